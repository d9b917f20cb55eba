"""Problem instances: travel times, agents, time-stamped visit demand.

Time steps are indexed ``0 .. horizon - 1``. Every agent hovers over its
initial node at ``t = 0`` and over its final node at ``t = horizon - 1``.
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass
from typing import Iterable, Sequence

import numpy as np

FORMAT_VERSION = 1


class InstanceError(ValueError):
    """Raised when an instance is malformed or violates an invariant."""


@dataclass(frozen=True)
class AgentSpec:
    id: int
    init_node: int
    fin_node: int


@dataclass(frozen=True)
class Instance:
    """Immutable problem statement.

    ``travel[i][j]`` is the number of transit steps between nodes ``i`` and
    ``j``; ``demand[n][t]`` is 1 when node ``n`` must be hovered over at ``t``.
    Build through :func:`build_instance` so the invariants are checked.
    """

    horizon: int
    travel: tuple[tuple[int, ...], ...]
    agents: tuple[AgentSpec, ...]
    demand: tuple[tuple[int, ...], ...]

    @property
    def n_nodes(self) -> int:
        return len(self.travel)

    @property
    def n_agents(self) -> int:
        return len(self.agents)

    def cost(self, i: int, j: int) -> int:
        return self.travel[i][j]

    def demand_points(self) -> list[tuple[int, int]]:
        """Demanded ``(node, time)`` cells in lexicographic order."""
        return [
            (n, t)
            for n, row in enumerate(self.demand)
            for t, d in enumerate(row)
            if d
        ]

    @property
    def total_demand(self) -> int:
        return sum(map(sum, self.demand))

    def return_time(self, node: int, agent: AgentSpec) -> int:
        """Steps needed from hovering at ``node`` to hovering at the agent's final node."""
        if node == agent.fin_node:
            return 0
        return self.travel[node][agent.fin_node] + 1


def _as_int(value, what: str) -> int:
    if isinstance(value, bool) or not isinstance(value, (int, np.integer)):
        raise InstanceError(f"{what} must be an integer, got {value!r}")
    return int(value)


def build_instance(
    horizon: int,
    travel: Sequence[Sequence[int]],
    agents: Iterable[AgentSpec | tuple[int, int]],
    demand: Sequence[Sequence[int]],
) -> Instance:
    """Validate raw parts and return an :class:`Instance`.

    ``agents`` may hold :class:`AgentSpec` objects or ``(init, fin)`` pairs;
    ids are reassigned to list positions.
    """
    horizon = _as_int(horizon, "horizon")
    if horizon < 2:
        raise InstanceError(f"horizon must be >= 2, got {horizon}")

    n = len(travel)
    if n < 1:
        raise InstanceError("travel matrix must have at least one node")
    rows = []
    for i, row in enumerate(travel):
        if len(row) != n:
            raise InstanceError(
                f"travel matrix is not square: row {i} has {len(row)} entries, expected {n}"
            )
        rows.append(tuple(_as_int(v, f"travel[{i}]") for v in row))
    for i in range(n):
        if rows[i][i] != 0:
            raise InstanceError(f"travel[{i}][{i}] must be 0, got {rows[i][i]}")
        for j in range(i + 1, n):
            if rows[i][j] != rows[j][i]:
                raise InstanceError(
                    f"travel matrix is asymmetric: travel[{i}][{j}]={rows[i][j]} "
                    f"but travel[{j}][{i}]={rows[j][i]}"
                )
            if rows[i][j] < 1:
                raise InstanceError(
                    f"travel[{i}][{j}] must be >= 1, got {rows[i][j]}"
                )

    specs = []
    for idx, a in enumerate(agents):
        if isinstance(a, AgentSpec):
            init, fin = a.init_node, a.fin_node
        else:
            init, fin = a
        init = _as_int(init, f"agent {idx} init node")
        fin = _as_int(fin, f"agent {idx} final node")
        for node, label in ((init, "init"), (fin, "final")):
            if not 0 <= node < n:
                raise InstanceError(
                    f"agent {idx}: {label} node {node} out of range [0, {n})"
                )
        if init != fin and rows[init][fin] + 1 > horizon - 1:
            raise InstanceError(
                f"agent {idx} cannot reach final node {fin} from {init} within the "
                f"horizon (needs {rows[init][fin] + 1} steps, has {horizon - 1})"
            )
        specs.append(AgentSpec(idx, init, fin))

    if len(demand) != n:
        raise InstanceError(f"demand has {len(demand)} rows, expected {n}")
    drows = []
    for i, row in enumerate(demand):
        if len(row) != horizon:
            raise InstanceError(
                f"demand row {i} has {len(row)} entries, expected {horizon}"
            )
        vals = tuple(_as_int(v, f"demand[{i}]") for v in row)
        if any(v not in (0, 1) for v in vals):
            raise InstanceError(f"demand row {i} has entries outside {{0, 1}}")
        drows.append(vals)

    return Instance(horizon, tuple(rows), tuple(specs), tuple(drows))


def demand_grid(n_nodes: int, horizon: int, points: Iterable[Sequence[int]]) -> list[list[int]]:
    """Dense 0/1 grid from ``(node, time)`` pairs; rejects duplicates and out-of-range cells."""
    grid = [[0] * horizon for _ in range(n_nodes)]
    for p in points:
        if len(p) != 2:
            raise InstanceError(f"demand entry must be a [node, time] pair, got {p!r}")
        node, t = _as_int(p[0], "demand node"), _as_int(p[1], "demand time")
        if not 0 <= node < n_nodes:
            raise InstanceError(f"demand node index {node} out of range [0, {n_nodes})")
        if not 0 <= t < horizon:
            raise InstanceError(f"demand time {t} out of range [0, {horizon})")
        if grid[node][t]:
            raise InstanceError(f"duplicate demand entry [{node}, {t}]")
        grid[node][t] = 1
    return grid


def _round_half_up(x: float) -> int:
    return int(math.floor(x + 0.5 + 1e-9))


def demand_count(demand_fraction: float, horizon: int) -> int:
    """Number of demanded time steps per node for a given fraction."""
    return _round_half_up(demand_fraction * horizon)


def generate_instance(
    n_nodes: int,
    horizon: int,
    n_agents: int,
    demand_fraction: float,
    travel_min: int = 1,
    travel_max: int = 3,
    seed: int = 0,
    independent_fin: bool = False,
) -> Instance:
    """Draw a random instance.

    Travel times are uniform integers in ``[travel_min, travel_max]``. Each
    node gets ``round(demand_fraction * horizon)`` distinct demand times drawn
    from ``1 .. horizon - 2``. Initial nodes are uniform; final nodes equal
    the initial ones unless ``independent_fin`` is set, in which case they are
    drawn uniformly and redrawn until reachable.

    The RNG draw order is travel, demand, then agents, so instances that
    differ only in ``n_agents`` share travel times and demand.
    """
    if n_nodes < 1:
        raise InstanceError(f"n_nodes must be >= 1, got {n_nodes}")
    if horizon < 2:
        raise InstanceError(f"horizon must be >= 2, got {horizon}")
    if n_agents < 0:
        raise InstanceError(f"n_agents must be >= 0, got {n_agents}")
    if not 0.0 <= demand_fraction <= 1.0:
        raise InstanceError(f"demand_fraction must lie in [0, 1], got {demand_fraction}")
    if not 1 <= travel_min <= travel_max:
        raise InstanceError(
            f"need 1 <= travel_min <= travel_max, got {travel_min}, {travel_max}"
        )
    per_node = demand_count(demand_fraction, horizon)
    slots = horizon - 2
    if per_node > slots:
        raise InstanceError(
            f"demand_fraction {demand_fraction} needs {per_node} demand times per node "
            f"but only {max(slots, 0)} interior time steps exist"
        )

    rng = np.random.default_rng(seed)
    travel = [[0] * n_nodes for _ in range(n_nodes)]
    for i in range(n_nodes):
        for j in range(i + 1, n_nodes):
            c = int(rng.integers(travel_min, travel_max + 1))
            travel[i][j] = travel[j][i] = c

    demand = [[0] * horizon for _ in range(n_nodes)]
    for n in range(n_nodes):
        if per_node:
            times = rng.choice(np.arange(1, horizon - 1), size=per_node, replace=False)
            for t in times:
                demand[n][int(t)] = 1

    agents = []
    for _ in range(n_agents):
        init = int(rng.integers(n_nodes))
        fin = init
        if independent_fin:
            while True:
                fin = int(rng.integers(n_nodes))
                if fin == init or travel[init][fin] + 1 <= horizon - 1:
                    break
        agents.append((init, fin))

    return build_instance(horizon, travel, agents, demand)


def instance_to_dict(inst: Instance) -> dict:
    return {
        "version": FORMAT_VERSION,
        "num_nodes": inst.n_nodes,
        "horizon": inst.horizon,
        "travel": [list(row) for row in inst.travel],
        "agents": [{"init": a.init_node, "final": a.fin_node} for a in inst.agents],
        "demand": [[n, t] for n, t in inst.demand_points()],
    }


def serialize_instance(inst: Instance) -> str:
    d = instance_to_dict(inst)
    lines = [
        "{",
        f'  "version": {d["version"]},',
        f'  "num_nodes": {d["num_nodes"]},',
        f'  "horizon": {d["horizon"]},',
        '  "travel": [',
        ",\n".join("    " + json.dumps(row) for row in d["travel"]),
        "  ],",
        '  "agents": ' + json.dumps(d["agents"]) + ",",
        '  "demand": ' + json.dumps(d["demand"]),
        "}",
    ]
    return "\n".join(lines) + "\n"


def instance_from_dict(d: dict) -> Instance:
    if not isinstance(d, dict):
        raise InstanceError("instance document must be a JSON object")
    required = ("version", "num_nodes", "horizon", "travel", "agents", "demand")
    missing = [k for k in required if k not in d]
    if missing:
        raise InstanceError(f"instance document missing fields: {', '.join(missing)}")
    if d["version"] != FORMAT_VERSION:
        raise InstanceError(f"unsupported instance version {d['version']!r}")
    n = _as_int(d["num_nodes"], "num_nodes")
    horizon = _as_int(d["horizon"], "horizon")
    travel = d["travel"]
    if not isinstance(travel, list) or not all(isinstance(r, list) for r in travel):
        raise InstanceError("travel must be an array of arrays")
    if len(travel) != n:
        raise InstanceError(f"travel has {len(travel)} rows but num_nodes is {n}")
    if not isinstance(d["agents"], list):
        raise InstanceError("agents must be an array")
    agents = []
    for i, a in enumerate(d["agents"]):
        if not isinstance(a, dict) or "init" not in a or "final" not in a:
            raise InstanceError(f"agent {i} must be an object with init and final")
        agents.append((a["init"], a["final"]))
    if not isinstance(d["demand"], list):
        raise InstanceError("demand must be an array of [node, time] pairs")
    if horizon < 2:
        raise InstanceError(f"horizon must be >= 2, got {horizon}")
    grid = demand_grid(n, horizon, d["demand"])
    return build_instance(horizon, travel, agents, grid)


def parse_instance(text: str) -> Instance:
    try:
        d = json.loads(text)
    except json.JSONDecodeError as exc:
        raise InstanceError(f"malformed instance JSON: {exc}") from exc
    return instance_from_dict(d)
