import math
import random

import pytest

from pickopt.alns import (
    AlnsConfig, LATE_PENALTY, OPERATORS, OperatorScores, accept,
    acceptance_probability, apply_operator, initial_solution, penalty_rate_at,
    run, tol_sim_at,
)
from pickopt.instance import GenSpec, InstanceParams, generate
from pickopt.solution import (
    costing, evaluate, peak_load, splitup_counts, total_capacity_excess,
)

from test_solution import make_instance, pick, ret, random_solution


def small_cfg(**kw):
    base = dict(outer_iters=3, inner_iters=15, num_contexts=2, seed=0)
    base.update(kw)
    return AlnsConfig(**base)


# ---------------------------------------------------------------------------
# Acceptance rule

def test_acceptance_probability_reference_point():
    cfg = AlnsConfig(outer_iters=10, inner_iters=10,
                     sa_worsening=5.0, sa_convergence=2.0)
    # 10% worse at the very first iteration
    p = acceptance_probability(110.0, 100.0, 0, cfg)
    assert p == pytest.approx(math.exp(-0.5), abs=1e-12)


def test_acceptance_probability_tightens_over_time():
    cfg = AlnsConfig(outer_iters=10, inner_iters=10)
    # halfway: (1 - 0.5)^2 = 0.25 quarter of the tolerance
    assert acceptance_probability(110.0, 100.0, 50, cfg) == pytest.approx(
        math.exp(-2.0), abs=1e-12)
    late = acceptance_probability(110.0, 100.0, 90, cfg)
    assert late == pytest.approx(math.exp(-50.0), rel=1e-9)
    assert late < acceptance_probability(110.0, 100.0, 50, cfg) < \
        acceptance_probability(110.0, 100.0, 0, cfg)


def test_acceptance_probability_equal_or_better_is_certain():
    cfg = AlnsConfig(outer_iters=10, inner_iters=10)
    assert acceptance_probability(100.0, 100.0, 42, cfg) == 1.0
    assert acceptance_probability(99.0, 100.0, 42, cfg) == 1.0
    rng = random.Random(0)
    assert accept(99.0, 100.0, 42, cfg, rng)


def test_acceptance_probability_rejects_bad_reference():
    cfg = AlnsConfig(outer_iters=10, inner_iters=10)
    with pytest.raises(ValueError):
        acceptance_probability(1.0, 0.0, 0, cfg)
    with pytest.raises(ValueError):
        acceptance_probability(1.0, -3.0, 0, cfg)
    with pytest.raises(ValueError):
        acceptance_probability(110.0, 100.0, 100, cfg)


def test_accept_is_monte_carlo():
    cfg = AlnsConfig(outer_iters=10, inner_iters=10)
    rng = random.Random(7)
    p = acceptance_probability(110.0, 100.0, 0, cfg)
    draws = [accept(110.0, 100.0, 0, cfg, rng) for _ in range(20000)]
    freq = sum(draws) / len(draws)
    assert abs(freq - p) < 0.02


# ---------------------------------------------------------------------------
# Operator scores

def test_scores_start_equal_and_select_all():
    cfg = AlnsConfig()
    scores = OperatorScores(cfg)
    assert all(v == 1.0 for v in scores.scores.values())
    rng = random.Random(1)
    seen = {scores.select(rng) for _ in range(2000)}
    assert seen == set(OPERATORS)


def test_selection_follows_scores():
    cfg = AlnsConfig()
    scores = OperatorScores(cfg)
    scores.scores[3] = 5.0  # 5 / 15 of the total mass
    rng = random.Random(2)
    hits = sum(scores.select(rng) == 3 for _ in range(30000))
    assert abs(hits / 30000 - 5.0 / 15.0) < 0.01
    assert scores.selection_probability(3) == pytest.approx(1.0 / 3.0)


def test_reward_bumps_operator_and_recent_accepted():
    cfg = AlnsConfig()
    scores = OperatorScores(cfg)
    for op in (4, 5, 6, 7, 8):
        scores.record_accepted(op)
    scores.reward(2)
    # only the last four accepted stay in the window
    assert scores.scores[2] == pytest.approx(1.25)
    assert scores.scores[4] == pytest.approx(1.0)
    for op in (5, 6, 7, 8):
        assert scores.scores[op] == pytest.approx(1.25)


def test_reset_high_scores():
    cfg = AlnsConfig()
    scores = OperatorScores(cfg)
    scores.scores[1] = 5.25
    scores.scores[2] = 4.9
    scores.reset_high()
    assert scores.scores[1] == 1.0
    assert scores.scores[2] == 4.9


def test_average_with():
    cfg = AlnsConfig()
    a = OperatorScores(cfg)
    a.scores[1] = 3.0
    a.average_with({op: 1.0 for op in OPERATORS})
    assert a.scores[1] == pytest.approx(2.0)
    assert a.scores[2] == pytest.approx(1.0)


# ---------------------------------------------------------------------------
# Schedules

def test_tol_sim_interpolation():
    cfg = AlnsConfig(outer_iters=4, tol_sim_start=2000.0, tol_sim_end=500.0)
    assert tol_sim_at(0, cfg) == 2000.0
    assert tol_sim_at(3, cfg) == 500.0
    assert tol_sim_at(1, cfg) == pytest.approx(1500.0)
    single = AlnsConfig(outer_iters=1)
    assert tol_sim_at(0, single) == single.tol_sim_start


def test_penalty_rate_schedule():
    inst = make_instance([pick(0, 0, 2, 10.0)])
    cfg = AlnsConfig()
    rate = inst.params.travel_cost_rate
    q = inst.params.capacity
    assert penalty_rate_at(0, cfg, inst) == pytest.approx(0.1 * rate * q)
    assert penalty_rate_at(3, cfg, inst) == pytest.approx(
        0.1 * rate * q * 1.3 ** 3)


def test_config_validation():
    with pytest.raises(ValueError):
        AlnsConfig(outer_iters=0)
    with pytest.raises(ValueError):
        AlnsConfig(tol_sim_start=100.0, tol_sim_end=200.0)
    with pytest.raises(ValueError):
        AlnsConfig(op3_min=0.5, op3_max=0.1)
    with pytest.raises(ValueError):
        AlnsConfig(noise=1.0)
    with pytest.raises(ValueError):
        AlnsConfig(penalty_growth=0.9)


# ---------------------------------------------------------------------------
# Construction

def test_initial_solution_covers_and_respects_capacity():
    inst = generate(GenSpec(num_orderlines=60, return_fraction=0.15, seed=4))
    sol = initial_solution(inst, random.Random(0))
    cost = costing(inst)
    assert sorted(sol.line_ids()) == list(range(60))
    assert total_capacity_excess(sol, cost) <= 1e-9


def test_initial_solution_fills_level_by_level():
    # tiny capacity forces one line per batch; the level rule spreads the
    # batches over both pickers before stacking
    lines = [pick(i, i, aisle=2 * i, offset=10.0, quantity=1, unit_weight=1.0)
             for i in range(4)]
    params = InstanceParams(num_pickers=2, max_batches_per_picker=4,
                            capacity=1.0)
    inst = make_instance(lines, params=params)
    sol = initial_solution(inst, random.Random(0))
    assert [len(bl) for bl in sol.routes] == [2, 2]


# ---------------------------------------------------------------------------
# Operators

def _operator_instances():
    yield generate(GenSpec(num_orderlines=30, return_fraction=0.2, seed=1))
    yield generate(GenSpec(num_orderlines=25, return_fraction=0.0, seed=2,
                           num_pickers=2, splitup_cost=4.0))


def test_every_operator_conserves_lines_and_purity():
    cfg = AlnsConfig()
    for inst in _operator_instances():
        n = len(inst.order_lines)
        for seed in (0, 1, 2):
            base = random_solution(inst, random.Random(seed))
            frozen = [list(r.stops) for bl in base.routes for r in bl]
            before = evaluate(base, inst).total
            for op_id in OPERATORS:
                rng = random.Random(100 * seed + op_id)
                cand = apply_operator(op_id, base, inst, cfg, 0.05, 2000.0, rng)
                assert sorted(cand.line_ids()) == list(range(n)), \
                    f"operator {op_id} lost or duplicated lines"
                assert [list(r.stops) for bl in base.routes for r in bl] == frozen, \
                    f"operator {op_id} mutated its input"
            assert evaluate(base, inst).total == pytest.approx(before)


def test_operator_determinism():
    cfg = AlnsConfig()
    inst = generate(GenSpec(num_orderlines=30, return_fraction=0.2, seed=1))
    base = random_solution(inst, random.Random(3))
    for op_id in OPERATORS:
        a = apply_operator(op_id, base, inst, cfg, 0.05, 2000.0,
                           random.Random(42))
        b = apply_operator(op_id, base, inst, cfg, 0.05, 2000.0,
                           random.Random(42))
        assert [r.stops for bl in a.routes for r in bl] == \
            [r.stops for bl in b.routes for r in bl]


def test_op1_reclusters_by_shared_customer():
    # two batches, each holding one line of customer 0 and one of customer 1;
    # the merge regroups them so each customer sits in one batch
    lines = [
        pick(0, 0, aisle=0, offset=5.0),
        pick(1, 1, aisle=20, offset=5.0),
        pick(2, 0, aisle=1, offset=6.0),
        pick(3, 1, aisle=21, offset=6.0),
    ]
    params = InstanceParams(num_pickers=1, max_batches_per_picker=4,
                            capacity=80.0, splitup_cost=5.0)
    inst = make_instance(lines, params=params)
    from pickopt.solution import Route, Solution
    cost = costing(inst)
    base = Solution([[Route([0, 1], cost), Route([2, 3], cost)]])
    cfg = AlnsConfig()
    cand = apply_operator(1, base, inst, cfg, 0.0, 5000.0, random.Random(0))
    grouped = sorted(tuple(sorted(r.stops)) for bl in cand.routes for r in bl)
    assert grouped == [(0, 2), (1, 3)]
    assert sum(splitup_counts(cand, inst).values()) == 0


def test_op2_moves_aisle_outlier_home():
    # picker 0 carries five aisle-0 lines plus one aisle-30 outlier;
    # picker 1 batches aisle-30 lines: the outlier belongs there
    lines = [pick(i, i, aisle=0, offset=float(2 + i)) for i in range(5)]
    lines.append(pick(5, 5, aisle=30, offset=4.0))
    lines += [pick(6 + i, 6 + i, aisle=30, offset=float(6 + i))
              for i in range(4)]
    params = InstanceParams(num_pickers=2, max_batches_per_picker=2,
                            capacity=80.0)
    inst = make_instance(lines, params=params)
    from pickopt.solution import Route, Solution
    cost = costing(inst)
    base = Solution([[Route([0, 1, 2, 3, 4, 5], cost)],
                     [Route([6, 7, 8, 9], cost)]])
    cfg = AlnsConfig(op2_int=1.0)  # check every line
    cand = apply_operator(2, base, inst, cfg, 0.0, 2000.0, random.Random(0))
    where = cand.assignment()[5]
    assert where[0] == 1
    assert evaluate(cand, inst).total < evaluate(base, inst).total - 1e-9


def test_op6_groups_customer_into_one_batch():
    # a single customer spread over three batches collapses into one
    lines = [pick(0, 0, aisle=0, offset=10.0),
             pick(1, 0, aisle=0, offset=12.0),
             pick(2, 0, aisle=1, offset=11.0)]
    params = InstanceParams(num_pickers=1, max_batches_per_picker=4,
                            capacity=80.0, splitup_cost=3.0)
    inst = make_instance(lines, params=params)
    from pickopt.solution import Route, Solution
    cost = costing(inst)
    base = Solution([[Route([0], cost), Route([1], cost), Route([2], cost)]])
    cfg = AlnsConfig()
    cand = apply_operator(6, base, inst, cfg, 0.0, 2000.0, random.Random(0))
    assert cand.num_batches() == 1
    assert sum(splitup_counts(cand, inst).values()) == 0


def test_op7_identity_without_split_customers():
    lines = [pick(0, 0, aisle=0, offset=10.0), pick(1, 1, aisle=1, offset=5.0)]
    inst = make_instance(lines, params=InstanceParams(num_pickers=1))
    from pickopt.solution import Route, Solution
    cost = costing(inst)
    base = Solution([[Route([0, 1], cost)]])
    cand = apply_operator(7, base, inst, AlnsConfig(), 0.0, 2000.0,
                          random.Random(0))
    assert cand is base


def test_op9_identity_when_everything_is_on_time():
    # one line finishing ~57s before its deadline: neither tardy nor more
    # than 1000s early, so the operator does not touch the solution
    cost_line = pick(0, 0, aisle=0, offset=10.0, deadline=120.0)
    inst = make_instance([cost_line], params=InstanceParams(num_pickers=1))
    from pickopt.solution import Route, Solution
    cost = costing(inst)
    base = Solution([[Route([0], cost)]])
    cfg = AlnsConfig(op9_int=1.0)
    cand = apply_operator(9, base, inst, cfg, 0.0, 2000.0, random.Random(0))
    assert cand is base


def test_op9_reinserts_late_lines():
    inst = generate(GenSpec(num_orderlines=40, return_fraction=0.0, seed=9,
                            deadline_hours=1))
    base = random_solution(inst, random.Random(1))
    cfg = AlnsConfig(op9_int=1.0)
    cand = apply_operator(9, base, inst, cfg, 0.0, 2000.0, random.Random(5))
    assert sorted(cand.line_ids()) == list(range(40))


def test_op8_never_worsens_travel():
    inst = generate(GenSpec(num_orderlines=40, return_fraction=0.2, seed=6))
    base = random_solution(inst, random.Random(2))
    cand = apply_operator(8, base, inst, AlnsConfig(), 0.0, 2000.0,
                          random.Random(0))
    assert evaluate(cand, inst).travel <= evaluate(base, inst).travel + 1e-9
    assert sorted(cand.line_ids()) == sorted(base.line_ids())


# ---------------------------------------------------------------------------
# Full search

def test_run_single_line():
    inst = make_instance([pick(0, 0, aisle=2, offset=10.0)],
                         params=InstanceParams(num_pickers=1))
    res = run(inst, small_cfg())
    assert res.feasible
    assert res.solution.num_batches() == 1
    cost = costing(inst)
    rt = 2.0 * cost.dist(1, 0)
    expected = inst.params.travel_cost_rate * (rt / cost.speed
                                               + inst.params.pick_time)
    assert res.cost.total == pytest.approx(expected)


def test_run_is_deterministic():
    inst = generate(GenSpec(num_orderlines=25, return_fraction=0.2, seed=8))
    a = run(inst, small_cfg(seed=3))
    b = run(inst, small_cfg(seed=3))
    assert a.cost.total == b.cost.total
    assert [r.stops for bl in a.solution.routes for r in bl] == \
        [r.stops for bl in b.solution.routes for r in bl]
    assert [(row.iteration, row.context, row.operator, row.accepted)
            for row in a.log] == \
        [(row.iteration, row.context, row.operator, row.accepted)
         for row in b.log]


def test_run_improves_on_initial():
    inst = generate(GenSpec(num_orderlines=40, return_fraction=0.1, seed=5))
    init = initial_solution(inst, random.Random(0))
    res = run(inst, small_cfg(outer_iters=4, inner_iters=30, seed=1))
    assert res.feasible
    assert res.cost.total <= evaluate(init, inst).total + 1e-9


def test_best_tracking_is_lexicographic_and_monotone():
    inst = generate(GenSpec(num_orderlines=30, return_fraction=0.2, seed=12))
    res = run(inst, small_cfg(seed=2))
    per_context: dict[int, list] = {}
    for row in res.log:
        per_context.setdefault(row.context, []).append(
            (row.best_violation, row.best_cost))
    for rows in per_context.values():
        for prev, cur in zip(rows, rows[1:]):
            assert cur[0] <= prev[0] + 1e-9
            if abs(cur[0] - prev[0]) <= 1e-9:
                assert cur[1] <= prev[1] + 1e-9


def test_run_log_covers_all_iterations():
    cfg = small_cfg(outer_iters=2, inner_iters=10, num_contexts=3)
    inst = generate(GenSpec(num_orderlines=15, return_fraction=0.0, seed=2))
    res = run(inst, cfg)
    assert len(res.log) == 2 * 10 * 3
    assert {row.context for row in res.log} == {0, 1, 2}
    assert {row.round for row in res.log} == {0, 1}


def test_warm_start_never_ends_worse():
    inst = generate(GenSpec(num_orderlines=30, return_fraction=0.1, seed=7))
    good = run(inst, small_cfg(outer_iters=4, inner_iters=40, seed=0))
    assert good.feasible
    res = run(inst, small_cfg(outer_iters=1, inner_iters=5, seed=9),
              warm_start=good.solution)
    assert res.feasible
    assert res.cost.total <= good.cost.total + 1e-9


def test_run_collects_pools():
    inst = generate(GenSpec(num_orderlines=12, return_fraction=0.0, seed=3))
    res = run(inst, small_cfg())
    assert len(res.batch_pool) > 0
    assert len(res.schedule_pool) > 0
    lines_seen = set()
    for pb in res.batch_pool:
        lines_seen |= pb.lines
    assert lines_seen == set(range(12))


def test_run_with_mip_ops_matches_or_beats_plain():
    inst = generate(GenSpec(num_orderlines=14, return_fraction=0.2, seed=10,
                            num_pickers=2))
    plain = run(inst, small_cfg(seed=4))
    repaired = run(inst, small_cfg(seed=4, mip_ops=True))
    assert repaired.cost.total <= plain.cost.total + 1e-9
