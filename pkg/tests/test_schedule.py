import json

import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from dronesched.greedy import greedy_solve, rollout
from dronesched.instance import build_instance, generate_instance
from dronesched.schedule import (
    BoundaryError,
    DimensionError,
    Hover,
    Schedule,
    ScheduleError,
    StateError,
    Transit,
    TransitionError,
    coverage_score,
    parse_schedule,
    serialize_schedule,
    trip_count,
    validate_schedule,
)


def test_round_trip_report(tiny1, tiny1_round_trip):
    r = validate_schedule(tiny1, tiny1_round_trip)
    assert (r.covered, r.total, r.trips) == (1, 1, 2)
    assert r.covered_flags == ((1, 0, 0, 0, 1), (0, 0, 1, 0, 0))


def test_all_hover_covers_nothing(tiny1):
    s = Schedule.of([[Hover(0)] * 5])
    r = validate_schedule(tiny1, s)
    assert (r.covered, r.total, r.trips) == (0, 1, 0)


def test_boundary_violation_at_start(tiny1):
    s = Schedule.of([[Hover(1), Transit(1, 0, 1), Hover(0), Hover(0), Hover(0)]])
    with pytest.raises(BoundaryError) as exc:
        validate_schedule(tiny1, s)
    assert exc.value.time == 0 and exc.value.agent == 0


def test_boundary_violation_at_end(tiny1):
    s = Schedule.of([[Hover(0), Hover(0), Hover(0), Transit(0, 1, 1), Hover(1)]])
    with pytest.raises(BoundaryError) as exc:
        validate_schedule(tiny1, s)
    assert exc.value.time == 4


@pytest.mark.parametrize(
    "states, t",
    [
        ([Hover(0), Hover(1), Hover(1), Transit(1, 0, 1), Hover(0)], 1),  # teleport
        ([Hover(0), Transit(1, 0, 1), Hover(0), Hover(0), Hover(0)], 1),  # wrong origin
        ([Hover(0), Transit(0, 1, 1), Hover(0), Hover(0), Hover(0)], 2),  # wrong destination
    ],
)
def test_illegal_transitions(tiny1, states, t):
    with pytest.raises(TransitionError) as exc:
        validate_schedule(tiny1, Schedule.of([states]))
    assert exc.value.time == t


def test_transit_must_run_full_duration():
    inst = build_instance(6, [[0, 2], [2, 0]], [(0, 1)], [[0] * 6] * 2)
    short = [Hover(0), Hover(0), Transit(0, 1, 1), Hover(1), Hover(1), Hover(1)]
    with pytest.raises(TransitionError) as exc:
        validate_schedule(inst, Schedule.of([short]))
    assert exc.value.time == 3
    skip = [Hover(0), Hover(0), Transit(0, 1, 2), Hover(1), Hover(1), Hover(1)]
    with pytest.raises(TransitionError):
        validate_schedule(inst, Schedule.of([skip]))
    ok = [Hover(0), Hover(0), Transit(0, 1, 1), Transit(0, 1, 2), Hover(1), Hover(1)]
    assert validate_schedule(inst, Schedule.of([ok])).trips == 1


def test_bad_states(tiny1):
    with pytest.raises(StateError):
        validate_schedule(tiny1, Schedule.of([[Hover(0), Transit(0, 1, 2), Hover(1), Transit(1, 0, 1), Hover(0)]]))
    with pytest.raises(StateError):
        validate_schedule(tiny1, Schedule.of([[Hover(0), Transit(0, 0, 1), Hover(0), Hover(0), Hover(0)]]))


def test_dimension_errors(tiny1):
    with pytest.raises(DimensionError):
        validate_schedule(tiny1, Schedule.of([]))
    with pytest.raises(DimensionError):
        validate_schedule(tiny1, Schedule.of([[Hover(0)] * 4]))


def test_union_semantics():
    inst = build_instance(3, [[0, 1], [1, 0]], [(1, 1), (1, 1)], [[0, 0, 0], [0, 1, 0]])
    s = Schedule.of([[Hover(1)] * 3, [Hover(1)] * 3])
    assert coverage_score(inst, s) == (1, 1)


def test_zero_demand_score():
    inst = generate_instance(3, 6, 2, 0.0, seed=1)
    s, _ = rollout(inst, [0, 1])
    assert coverage_score(inst, s) == (0, 0)


def test_trip_counts(tiny1, tiny1_round_trip):
    assert trip_count(tiny1_round_trip) == 2
    assert trip_count(Schedule.of([[Hover(0)] * 5])) == 0
    one_way = Schedule.of([[Hover(0), Hover(0), Hover(0), Transit(0, 1, 1), Hover(1)]])
    assert trip_count(one_way) == 1


def test_serialize_tokens(tiny1, tiny1_round_trip):
    text = serialize_schedule(tiny1, tiny1_round_trip)
    d = json.loads(text)
    assert d["version"] == 1
    assert d["agents"][0][:2] == [{"s": "h", "n": 0}, {"s": "t", "from": 0, "to": 1, "k": 1}]
    assert d["summary"] == {"covered": 1, "total": 1, "trips": 2}
    assert parse_schedule(text, tiny1) == tiny1_round_trip


def test_parse_rejects_step_beyond_cost(tiny1, tiny1_round_trip):
    d = json.loads(serialize_schedule(tiny1, tiny1_round_trip))
    d["agents"][0][1]["k"] = 2
    with pytest.raises(ScheduleError):
        parse_schedule(json.dumps(d), tiny1)


def test_parse_rejects_summary_mismatch(tiny1, tiny1_round_trip):
    d = json.loads(serialize_schedule(tiny1, tiny1_round_trip))
    d["summary"]["covered"] = 0
    with pytest.raises(ScheduleError, match="summary mismatch"):
        parse_schedule(json.dumps(d), tiny1)


@pytest.mark.parametrize("text", ["nope", "{}", '{"version": 1, "agents": [[{"s": "x"}]]}'])
def test_parse_rejects_malformed(tiny1, text):
    with pytest.raises(ScheduleError):
        parse_schedule(text, tiny1)


small_instances = st.builds(
    lambda n, h, a, frac, seed, indep: generate_instance(n, h, a, frac, 1, 3, seed, indep),
    st.integers(1, 5), st.integers(4, 14), st.integers(1, 4),
    st.sampled_from([0.0, 0.15, 0.3, 0.5]), st.integers(0, 10**6), st.booleans(),
)


@settings(max_examples=40, deadline=None)
@given(small_instances, st.randoms(use_true_random=False))
def test_permutation_and_removal_properties(inst, rnd):
    res = greedy_solve(inst, threshold=3, seed=rnd.randrange(1000))
    base = validate_schedule(inst, res.schedule)
    assert base.covered <= base.total
    perm = list(range(inst.n_agents))
    rnd.shuffle(perm)
    permuted_inst = build_instance(
        inst.horizon, inst.travel, [inst.agents[i] for i in perm], inst.demand
    )
    permuted = Schedule(tuple(res.schedule.trajectories[i] for i in perm))
    r2 = validate_schedule(permuted_inst, permuted)
    assert (r2.covered, r2.trips) == (base.covered, base.trips)
    # dropping an agent never increases coverage
    drop = rnd.randrange(inst.n_agents)
    keep = [i for i in range(inst.n_agents) if i != drop]
    fewer = build_instance(inst.horizon, inst.travel, [inst.agents[i] for i in keep], inst.demand)
    r3 = validate_schedule(fewer, Schedule(tuple(res.schedule.trajectories[i] for i in keep)))
    assert r3.covered <= base.covered
    assert parse_schedule(serialize_schedule(inst, res.schedule), inst) == res.schedule
