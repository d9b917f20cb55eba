"""Exact coverage maximization.

Each agent's feasible trajectories are compressed to the set of demand cells
they cover (a bitmask over the demanded cells). Because the objective is the
size of the union over agents, picking one mask per agent is enough, and a
depth-first branch-and-bound over those choices finds the optimum.
"""

from __future__ import annotations

import itertools
import time
from dataclasses import dataclass

from .greedy import SolveResult
from .instance import AgentSpec, Instance
from .schedule import Hover, Transit, legal_transition, schedule_from_departures

DEFAULT_MAX_MASKS = 200_000
DEFAULT_TIMEOUT = 60.0


class SolverLimitError(RuntimeError):
    """The exact solver gave up; no (possibly wrong) answer is returned."""


class CapacityError(SolverLimitError):
    pass


class SolverTimeout(SolverLimitError):
    pass


class DemandIndex:
    """Bit position for every demanded ``(node, time)`` cell."""

    def __init__(self, inst: Instance):
        self.points = inst.demand_points()
        self.bit = {p: i for i, p in enumerate(self.points)}

    def __len__(self) -> int:
        return len(self.points)

    def mask_of(self, cells) -> int:
        m = 0
        for c in cells:
            i = self.bit.get(c)
            if i is not None:
                m |= 1 << i
        return m


@dataclass(frozen=True)
class CoverageMask:
    bits: int
    trips: int
    witness: tuple  # per-agent (depart_time, origin, dest) trips realizing ``bits``

    @property
    def popcount(self) -> int:
        return self.bits.bit_count()


def _prune_dominated(entries: dict[int, int]) -> list[int]:
    """Masks not strictly contained in another mask with no more trips."""
    ordered = sorted(entries, key=lambda m: (-m.bit_count(), entries[m], m))
    kept: list[int] = []
    for m in ordered:
        tm = entries[m]
        if any((m & k) == m and entries[k] <= tm for k in kept):
            continue
        kept.append(m)
    return kept


def enumerate_masks(
    inst: Instance,
    agent: AgentSpec,
    index: DemandIndex | None = None,
    max_masks: int = DEFAULT_MAX_MASKS,
    deadline: float | None = None,
) -> list[CoverageMask]:
    """All non-dominated coverage masks for one agent, with a witness trip list each.

    The time-expanded states ``(node, t)`` are swept in time order; at each
    state the agent either waits one step or departs to another node. States
    from which the final node cannot be reached in time are never entered.
    """
    if index is None:
        index = DemandIndex(inst)
    H = inst.horizon
    last = H - 1
    n_nodes = inst.n_nodes
    travel = inst.travel
    ret = [inst.return_time(k, agent) for k in range(n_nodes)]
    cell_bit = [[index.bit.get((n, t)) for t in range(H)] for n in range(n_nodes)]

    # tables[t][n]: mask -> (trips, parent); parent = (prev_t, prev_n, prev_mask, departed)
    tables: list[list[dict | None]] = [[None] * n_nodes for _ in range(H)]

    def bit_at(n, t):
        b = cell_bit[n][t]
        return 0 if b is None else 1 << b

    def push(n, t, mask, trips, parent):
        tab = tables[t][n]
        if tab is None:
            tab = tables[t][n] = {}
        mask |= bit_at(n, t)
        old = tab.get(mask)
        if old is None or trips < old[0]:
            tab[mask] = (trips, parent)
            if len(tab) > max_masks:
                raise CapacityError(
                    f"agent {agent.id}: more than {max_masks} coverage masks "
                    f"at node {n}, t={t}"
                )

    def check_deadline():
        if deadline is not None and time.perf_counter() > deadline:
            raise SolverTimeout(f"mask enumeration for agent {agent.id} timed out")

    push(agent.init_node, 0, 0, 0, None)
    for t in range(H - 1):
        check_deadline()
        for n in range(n_nodes):
            tab = tables[t][n]
            if not tab:
                continue
            stay_ok = t + 1 + ret[n] <= last
            moves = []
            for m in range(n_nodes):
                if m == n:
                    continue
                arr = t + travel[n][m] + 1
                if arr + ret[m] <= last:
                    moves.append((m, arr))
            for i, (mask, (trips, _)) in enumerate(tab.items()):
                if i & 4095 == 4095:
                    check_deadline()
                if stay_ok:
                    push(n, t + 1, mask, trips, (t, n, mask, False))
                for m, arr in moves:
                    push(m, arr, mask, trips + 1, (t, n, mask, True))

    final = tables[last][agent.fin_node] or {}
    trips_of = {m: v[0] for m, v in final.items()}
    out = []
    for m in _prune_dominated(trips_of):
        out.append(CoverageMask(m, trips_of[m], _witness(tables, agent.fin_node, last, m)))
    return out


def _witness(tables, node, t, mask) -> tuple:
    plan = []
    while True:
        _, parent = tables[t][node][mask]
        if parent is None:
            break
        pt, pn, pmask, departed = parent
        if departed:
            plan.append((pt, pn, node))
        t, node, mask = pt, pn, pmask
    return tuple(reversed(plan))


def exact_solve(
    inst: Instance,
    max_masks: int = DEFAULT_MAX_MASKS,
    timeout: float = DEFAULT_TIMEOUT,
) -> SolveResult:
    """Maximum coverage schedule; ties on coverage go to fewer trips.

    Coverage is optimal. Trip minimality holds among the non-dominated masks
    kept per agent, which may omit a cheaper way to cover a subset.
    """
    start = time.perf_counter()
    deadline = start + timeout if timeout is not None else None
    index = DemandIndex(inst)
    A = inst.n_agents
    per_agent = [enumerate_masks(inst, a, index, max_masks, deadline) for a in inst.agents]

    order = sorted(range(A), key=lambda a: (-max(m.popcount for m in per_agent[a]), a))
    masks = [per_agent[a] for a in order]
    # suffix aggregates for bounding
    suf_or = [0] * (A + 1)
    suf_pop = [0] * (A + 1)
    suf_trips = [0] * (A + 1)
    for i in range(A - 1, -1, -1):
        suf_or[i] = suf_or[i + 1]
        for m in masks[i]:
            suf_or[i] |= m.bits
        suf_pop[i] = suf_pop[i + 1] + max(m.popcount for m in masks[i])
        suf_trips[i] = suf_trips[i + 1] + min(m.trips for m in masks[i])

    total = len(index)
    best = [(-1, 0), None]  # [(covered, -trips), chosen masks]
    chosen: list[CoverageMask | None] = [None] * A
    nodes = 0

    def dfs(i, union, trips):
        nonlocal nodes
        nodes += 1
        if deadline is not None and nodes % 4096 == 0 and time.perf_counter() > deadline:
            raise SolverTimeout(f"branch-and-bound exceeded {timeout} s")
        cov = union.bit_count()
        if i == A:
            key = (cov, -trips)
            if key > best[0]:
                best[0] = key
                best[1] = list(chosen)
            return
        bound = min(cov + suf_pop[i], (union | suf_or[i]).bit_count(), total)
        best_cov, best_neg_trips = best[0]
        if bound < best_cov:
            return
        if bound == best_cov and trips + suf_trips[i] >= -best_neg_trips:
            return
        cands = sorted(masks[i], key=lambda m: (-(m.bits & ~union).bit_count(), m.trips))
        for m in cands:
            chosen[i] = m
            dfs(i + 1, union | m.bits, trips + m.trips)
        chosen[i] = None

    dfs(0, 0, 0)

    picked: list = [None] * A
    for pos, a in enumerate(order):
        picked[a] = best[1][pos]
    schedule = schedule_from_departures(inst, [m.witness for m in picked])
    union = 0
    for m in picked:
        union |= m.bits
    return SolveResult(
        schedule=schedule,
        covered=union.bit_count(),
        total=inst.total_demand,
        trips=sum(m.trips for m in picked),
        restarts_used=0,
        elapsed=time.perf_counter() - start,
    )


MAX_REFERENCE_STATES = 10**7


def _all_trajectories(inst: Instance, agent: AgentSpec) -> list[tuple]:
    n, H = inst.n_nodes, inst.horizon
    states = [Hover(v) for v in range(n)]
    for o in range(n):
        for d in range(n):
            if o != d:
                states.extend(Transit(o, d, k) for k in range(1, inst.travel[o][d] + 1))
    succ = {s: [s2 for s2 in states if legal_transition(inst, s, s2)] for s in states}

    out = []
    path = [Hover(agent.init_node)]

    def walk():
        if len(path) == H:
            if path[-1] == Hover(agent.fin_node):
                out.append(tuple(path))
            return
        for s2 in succ[path[-1]]:
            path.append(s2)
            walk()
            path.pop()

    walk()
    return out


def exhaustive_reference(inst: Instance, max_states: int = MAX_REFERENCE_STATES) -> int:
    """Brute-force optimum over every joint combination of legal trajectories.

    Intended only as a test oracle for tiny instances.
    """
    demand = set(inst.demand_points())
    covers = []
    budget = 1
    for a in inst.agents:
        trajs = _all_trajectories(inst, a)
        budget *= max(len(trajs), 1)
        if budget > max_states:
            raise CapacityError(f"joint trajectory space exceeds {max_states}")
        covers.append(
            [
                frozenset((s.node, t) for t, s in enumerate(tr) if isinstance(s, Hover)) & demand
                for tr in trajs
            ]
        )
    best = 0
    for combo in itertools.product(*covers):
        best = max(best, len(frozenset().union(*combo)))
    return best


