"""Plain-text time x location grid of a schedule."""

from __future__ import annotations

from .instance import Instance
from .schedule import Hover, Schedule, validate_schedule


def render_schedule_grid(inst: Instance, schedule: Schedule) -> str:
    """One row per node, one column per time step.

    A cell holds the id of the (lowest-numbered) agent hovering there,
    followed by ``*`` if that cell was demanded. Demanded cells nobody
    hovers over show ``!``. Agents in transit appear in no row.
    """
    validate_schedule(inst, schedule)
    H = inst.horizon
    who: dict[tuple[int, int], int] = {}
    for a, traj in enumerate(schedule.trajectories):
        for t, s in enumerate(traj):
            if isinstance(s, Hover):
                who.setdefault((s.node, t), a)

    width = max(len(str(max(inst.n_agents - 1, 0))) + 1, len(str(H - 1)), 2)
    label_w = len(str(inst.n_nodes - 1)) + 1
    lines = [" " * label_w + "|" + "".join(str(t).rjust(width + 1) for t in range(H))]
    lines.append("-" * label_w + "+" + "-" * ((width + 1) * H))
    for n in range(inst.n_nodes):
        cells = []
        for t in range(H):
            demanded = inst.demand[n][t] == 1
            a = who.get((n, t))
            if a is None:
                cell = "!" if demanded else ""
            else:
                cell = f"{a}*" if demanded else str(a)
            cells.append(cell.rjust(width + 1))
        lines.append(f"n{n}".ljust(label_w) + "|" + "".join(cells))
    return "\n".join(line.rstrip() for line in lines) + "\n"
