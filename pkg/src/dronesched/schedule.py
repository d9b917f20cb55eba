"""Trajectories, schedules, and their validation and scoring.

An agent is in exactly one state per time step: hovering over a node, or
in transit along an edge. A trip that departs node ``n`` at ``t`` occupies
``cost(n, m)`` transit steps and first hovers over ``m`` at ``t + cost + 1``.
Only hovering covers demand.
"""

from __future__ import annotations

import json
from dataclasses import dataclass
from typing import Sequence, Union

from .instance import FORMAT_VERSION, Instance


@dataclass(frozen=True, slots=True)
class Hover:
    node: int


@dataclass(frozen=True, slots=True)
class Transit:
    origin: int
    dest: int
    step: int


AgentState = Union[Hover, Transit]
Trajectory = tuple  # tuple[AgentState, ...], one entry per time step


@dataclass(frozen=True)
class Schedule:
    trajectories: tuple[Trajectory, ...]

    @classmethod
    def of(cls, trajectories: Sequence[Sequence[AgentState]]) -> "Schedule":
        return cls(tuple(tuple(tr) for tr in trajectories))

    def __len__(self) -> int:
        return len(self.trajectories)


@dataclass(frozen=True)
class CoverageReport:
    covered: int
    total: int
    covered_flags: tuple[tuple[int, ...], ...]
    trips: int


class ScheduleError(ValueError):
    """Base class for schedules that break the motion rules."""


class DimensionError(ScheduleError):
    pass


class BoundaryError(ScheduleError):
    def __init__(self, agent: int, time: int, expected: AgentState, found: AgentState):
        self.agent, self.time, self.expected, self.found = agent, time, expected, found
        super().__init__(
            f"agent {agent}: expected {expected} at t={time}, found {found}"
        )


class TransitionError(ScheduleError):
    def __init__(self, agent: int, time: int, before: AgentState, after: AgentState):
        self.agent, self.time, self.before, self.after = agent, time, before, after
        super().__init__(
            f"agent {agent}: illegal transition at t={time}: {before} -> {after}"
        )


class StateError(ScheduleError):
    def __init__(self, agent: int, time: int, state: AgentState, reason: str):
        self.agent, self.time, self.state = agent, time, state
        super().__init__(f"agent {agent}: invalid state at t={time}: {state} ({reason})")


def _check_state(inst: Instance, agent: int, t: int, s: AgentState) -> None:
    n = inst.n_nodes
    if isinstance(s, Hover):
        if not 0 <= s.node < n:
            raise StateError(agent, t, s, "node out of range")
    elif isinstance(s, Transit):
        if not (0 <= s.origin < n and 0 <= s.dest < n):
            raise StateError(agent, t, s, "node out of range")
        if s.origin == s.dest:
            raise StateError(agent, t, s, "transit needs distinct endpoints")
        if not 1 <= s.step <= inst.travel[s.origin][s.dest]:
            raise StateError(agent, t, s, "step outside 1..cost")
    else:
        raise StateError(agent, t, s, "not an agent state")


def legal_transition(inst: Instance, before: AgentState, after: AgentState) -> bool:
    if isinstance(before, Hover):
        if isinstance(after, Hover):
            return after.node == before.node
        return after.origin == before.node and after.step == 1
    cost = inst.travel[before.origin][before.dest]
    if before.step < cost:
        return (
            isinstance(after, Transit)
            and after.origin == before.origin
            and after.dest == before.dest
            and after.step == before.step + 1
        )
    return isinstance(after, Hover) and after.node == before.dest


def _departures(traj: Trajectory) -> int:
    return sum(1 for s in traj if isinstance(s, Transit) and s.step == 1)


def validate_schedule(inst: Instance, schedule: Schedule) -> CoverageReport:
    """Check every trajectory against the motion rules and score coverage.

    Raises the :class:`ScheduleError` subclass describing the earliest
    offending time step of the first offending agent.
    """
    if len(schedule.trajectories) != inst.n_agents:
        raise DimensionError(
            f"schedule has {len(schedule.trajectories)} trajectories, "
            f"instance has {inst.n_agents} agents"
        )
    H = inst.horizon
    for a, (spec, traj) in enumerate(zip(inst.agents, schedule.trajectories)):
        if len(traj) != H:
            raise DimensionError(
                f"agent {a}: trajectory has {len(traj)} states, horizon is {H}"
            )
        for t, s in enumerate(traj):
            _check_state(inst, a, t, s)
            if t == 0 and s != Hover(spec.init_node):
                raise BoundaryError(a, 0, Hover(spec.init_node), s)
            if t > 0 and not legal_transition(inst, traj[t - 1], s):
                raise TransitionError(a, t, traj[t - 1], s)
        if traj[H - 1] != Hover(spec.fin_node):
            raise BoundaryError(a, H - 1, Hover(spec.fin_node), traj[H - 1])
    return _report(inst, schedule)


def _report(inst: Instance, schedule: Schedule) -> CoverageReport:
    flags = [[0] * inst.horizon for _ in range(inst.n_nodes)]
    for traj in schedule.trajectories:
        for t, s in enumerate(traj):
            if isinstance(s, Hover):
                flags[s.node][t] = 1
    covered = sum(
        f & d
        for frow, drow in zip(flags, inst.demand)
        for f, d in zip(frow, drow)
    )
    return CoverageReport(
        covered=covered,
        total=inst.total_demand,
        covered_flags=tuple(map(tuple, flags)),
        trips=trip_count(schedule),
    )


def coverage_score(inst: Instance, schedule: Schedule) -> tuple[int, int]:
    """``(covered, total)`` demand cells; several agents on one cell count once."""
    r = validate_schedule(inst, schedule)
    return r.covered, r.total


def trip_count(schedule: Schedule) -> int:
    return sum(_departures(tr) for tr in schedule.trajectories)


def _token(s: AgentState) -> dict:
    if isinstance(s, Hover):
        return {"s": "h", "n": s.node}
    return {"s": "t", "from": s.origin, "to": s.dest, "k": s.step}


def serialize_schedule(inst: Instance, schedule: Schedule) -> str:
    report = validate_schedule(inst, schedule)
    agents = ",\n".join(
        "    " + json.dumps([_token(s) for s in traj], separators=(",", ":"))
        for traj in schedule.trajectories
    )
    summary = json.dumps(
        {"covered": report.covered, "total": report.total, "trips": report.trips}
    )
    return (
        "{\n"
        f'  "version": {FORMAT_VERSION},\n'
        '  "agents": [\n'
        f"{agents}\n"
        "  ],\n"
        f'  "summary": {summary}\n'
        "}\n"
    )


def _state_from_token(tok, agent: int, t: int) -> AgentState:
    if not isinstance(tok, dict) or "s" not in tok:
        raise ScheduleError(f"agent {agent}, t={t}: malformed state token {tok!r}")
    try:
        if tok["s"] == "h":
            return Hover(int(tok["n"]))
        if tok["s"] == "t":
            return Transit(int(tok["from"]), int(tok["to"]), int(tok["k"]))
    except (KeyError, TypeError, ValueError) as exc:
        raise ScheduleError(f"agent {agent}, t={t}: malformed state token {tok!r}") from exc
    raise ScheduleError(f"agent {agent}, t={t}: unknown state kind {tok['s']!r}")


def parse_schedule(text: str, inst: Instance) -> Schedule:
    """Parse a schedule file and check it against ``inst``.

    The stored summary is recomputed; any mismatch is rejected.
    """
    try:
        d = json.loads(text)
    except json.JSONDecodeError as exc:
        raise ScheduleError(f"malformed schedule JSON: {exc}") from exc
    if not isinstance(d, dict) or "agents" not in d:
        raise ScheduleError("schedule document must be an object with an agents array")
    if d.get("version") != FORMAT_VERSION:
        raise ScheduleError(f"unsupported schedule version {d.get('version')!r}")
    if not isinstance(d["agents"], list):
        raise ScheduleError("agents must be an array of arrays")
    trajs = []
    for a, toks in enumerate(d["agents"]):
        if not isinstance(toks, list):
            raise ScheduleError(f"agent {a}: trajectory must be an array")
        trajs.append(tuple(_state_from_token(tok, a, t) for t, tok in enumerate(toks)))
    schedule = Schedule(tuple(trajs))
    report = validate_schedule(inst, schedule)
    summary = d.get("summary")
    if summary is not None:
        expected = {"covered": report.covered, "total": report.total, "trips": report.trips}
        if summary != expected:
            raise ScheduleError(
                f"summary mismatch: file says {summary}, recomputed {expected}"
            )
    return schedule


def schedule_from_departures(
    inst: Instance, plans: Sequence[Sequence[tuple[int, int, int]]]
) -> Schedule:
    """Expand per-agent ``(depart_time, origin, dest)`` trip lists into states."""
    trajs = []
    for spec, trips in zip(inst.agents, plans):
        states: list[AgentState] = []
        node = spec.init_node
        for dep, o, d in trips:
            while len(states) <= dep:
                states.append(Hover(node))
            for k in range(1, inst.travel[o][d] + 1):
                states.append(Transit(o, d, k))
            node = d
        while len(states) < inst.horizon:
            states.append(Hover(node))
        trajs.append(tuple(states))
    return Schedule(tuple(trajs))
