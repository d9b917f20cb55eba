"""Greedy one-step look-ahead scheduler with random agent-order restarts."""

from __future__ import annotations

import time
from dataclasses import dataclass
from typing import Sequence

import numpy as np

from .instance import Instance
from .schedule import Schedule, schedule_from_departures, trip_count

DEFAULT_THRESHOLD = 50


@dataclass(frozen=True)
class SolveResult:
    schedule: Schedule
    covered: int
    total: int
    trips: int
    restarts_used: int
    elapsed: float
    history: tuple[tuple[int, int], ...] = ()  # incumbent (covered, trips) after each restart


def preprocess(inst: Instance) -> Schedule:
    """Initial trajectories: hover at the start node, leave for the final node as late as possible."""
    plans = []
    for a in inst.agents:
        if a.init_node == a.fin_node:
            plans.append([])
        else:
            dep = inst.horizon - 2 - inst.cost(a.init_node, a.fin_node)
            plans.append([(dep, a.init_node, a.fin_node)])
    return schedule_from_departures(inst, plans)


def _candidate_order(inst: Instance) -> list[list[int]]:
    # nodes sorted by (cost from cur, index); cur itself comes first at cost 0
    n = inst.n_nodes
    return [sorted(range(n), key=lambda k, c=c: (inst.travel[c][k], k)) for c in range(n)]


def _plan_agent(inst, agent, demand, order) -> tuple[list[tuple[int, int, int]], int]:
    H = inst.horizon
    last = H - 1
    travel = inst.travel
    fin = agent.fin_node
    ret = [0 if k == fin else travel[k][fin] + 1 for k in range(inst.n_nodes)]

    trips = []
    covered = 0
    cur = agent.init_node
    t = 0
    while True:
        row = demand[cur]
        if row[t]:
            covered += 1
            row[t] = 0
        if t == last:
            break
        ctrav = travel[cur]
        chosen = -1
        for k in order[cur]:
            arr = t + ctrav[k] + 1
            if arr + ret[k] > last:
                continue
            if demand[k][arr]:
                chosen = k
                break
        if chosen == cur:
            t += 1
        elif chosen >= 0:
            trips.append((t, cur, chosen))
            t += ctrav[chosen] + 1
            cur = chosen
        elif t + 1 + ret[cur] <= last:
            t += 1
        else:
            trips.append((t, cur, fin))
            t += ctrav[fin] + 1
            cur = fin
    return trips, covered


def _rollout_plans(inst: Instance, perm: Sequence[int], order=None):
    if order is None:
        order = _candidate_order(inst)
    demand = [list(row) for row in inst.demand]
    plans: list[list] = [[] for _ in inst.agents]
    covered = 0
    for a in perm:
        plans[a], c = _plan_agent(inst, inst.agents[a], demand, order)
        covered += c
    return plans, covered


def rollout(inst: Instance, permutation: Sequence[int]) -> tuple[Schedule, int]:
    """Plan agents one after another in ``permutation`` order against a shared copy of the demand.

    Each agent walks forward in time. While hovering it consumes any demand
    at its cell, then moves to the cheapest node (its own included, ties by
    index) whose demand falls exactly on the arrival step and from which the
    final node is still reachable in time. With no such node it waits, unless
    waiting would strand it, in which case it heads for the final node.
    """
    perm = list(permutation)
    if sorted(perm) != list(range(inst.n_agents)):
        raise ValueError(f"{perm!r} is not a permutation of the agent ids")
    plans, covered = _rollout_plans(inst, perm)
    return schedule_from_departures(inst, plans), covered


def restart_rng(seed: int, restart: int) -> np.random.Generator:
    return np.random.default_rng([seed, restart])


def greedy_solve(inst: Instance, threshold: int = DEFAULT_THRESHOLD, seed: int = 0) -> SolveResult:
    """Rerun :func:`rollout` under random agent orders, keeping the best.

    Stops once ``threshold`` consecutive restarts fail to improve the
    incumbent. Higher coverage wins, then fewer trips; exact ties keep the
    earlier restart. Restart ``i`` draws its order from ``restart_rng(seed, i)``.
    """
    if threshold < 1:
        raise ValueError(f"threshold must be >= 1, got {threshold}")
    start = time.perf_counter()
    order = _candidate_order(inst)
    best_key = None
    best_plans = None
    count = 0
    restarts = 0
    history = []
    while count < threshold:
        perm = restart_rng(seed, restarts).permutation(inst.n_agents)
        restarts += 1
        plans, covered = _rollout_plans(inst, perm, order)
        key = (covered, -sum(map(len, plans)))
        if best_key is None or key > best_key:
            best_key, best_plans = key, plans
            count = 0
        else:
            count += 1
        history.append((best_key[0], -best_key[1]))
    schedule = schedule_from_departures(inst, best_plans)
    elapsed = time.perf_counter() - start
    return SolveResult(
        schedule=schedule,
        covered=best_key[0],
        total=inst.total_demand,
        trips=trip_count(schedule),
        restarts_used=restarts,
        elapsed=elapsed,
        history=tuple(history),
    )
