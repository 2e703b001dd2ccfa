import random

import pytest

from pickopt.instance import (
    CustomerOrder, GenSpec, Instance, InstanceParams, OrderLine, generate,
)
from pickopt.solution import (
    Route, Solution, batch_times, check_feasibility, completion_by_line,
    costing, evaluate, peak_load, schedules, solution_from_dict,
    solution_to_dict, splitup_counts, total_capacity_excess,
)
from pickopt.warehouse import Location, WarehouseLayout


def make_instance(lines, customers=None, params=None, num_aisles=35,
                  aisle_length=30.0, aisle_width=2.5):
    layout = WarehouseLayout(num_aisles=num_aisles, aisle_length=aisle_length,
                             aisle_width=aisle_width)
    params = params or InstanceParams()
    if customers is None:
        customers = [CustomerOrder(line.customer, []) for line in lines]
        seen = {}
        customers = []
        for line in lines:
            if line.customer not in seen:
                seen[line.customer] = CustomerOrder(line.customer, [])
                customers.append(seen[line.customer])
            seen[line.customer].order_lines.append(line.id)
    return Instance(layout, params, customers, lines)


def pick(id, customer, aisle, offset, quantity=1, unit_weight=0.5, deadline=28800.0):
    return OrderLine(id, customer, Location(aisle, offset), quantity,
                     unit_weight, quantity, 0, deadline)


def ret(id, customer, aisle, offset, quantity=1, unit_weight=0.5):
    return OrderLine(id, customer, Location(aisle, offset), quantity,
                     unit_weight, 0, quantity, 28800.0)


def test_single_pick_line_worked_example():
    # one pick 10 m into the first aisle: 20 m round trip plus one pick
    inst = make_instance([pick(0, 0, 0, 10.0)])
    cost = costing(inst)
    sol = Solution([[Route([0], cost)], [], []])
    breakdown = evaluate(sol, inst)
    expected = 0.009 * (20.0 / 0.7 + 8.0)
    assert breakdown.travel == pytest.approx(expected, abs=1e-12)
    assert breakdown.travel == pytest.approx(0.3291, abs=5e-5)
    assert breakdown.tardiness == 0.0
    assert breakdown.splitup == 0.0
    assert breakdown.total == breakdown.travel


def test_splitup_worked_example():
    # three lines of one customer spread over three batches at beta = 5
    params = InstanceParams(num_pickers=2, max_batches_per_picker=2, splitup_cost=5.0)
    lines = [pick(0, 0, 1, 5.0), pick(1, 0, 2, 5.0), pick(2, 0, 3, 5.0)]
    inst = make_instance(lines, params=params)
    cost = costing(inst)
    sol = Solution([[Route([0], cost), Route([1], cost)], [Route([2], cost)]])
    breakdown = evaluate(sol, inst)
    assert breakdown.splitup == pytest.approx(10.0)
    assert splitup_counts(sol, inst) == {0: 2}
    together = Solution([[Route([0, 1, 2], cost)], []])
    assert evaluate(together, inst).splitup == 0.0


def test_peak_load_worked_example():
    # carry a 2 kg return out, pick 3 kg, drop the return: peak 5 kg
    lines = [ret(0, 0, 1, 5.0, quantity=4, unit_weight=0.5),
             pick(1, 1, 2, 5.0, quantity=6, unit_weight=0.5)]
    inst = make_instance(lines)
    cost = costing(inst)
    route = Route([1, 0], cost)  # visit the pick first, then the return
    assert peak_load(route, inst) == pytest.approx(5.0)
    assert peak_load([1, 0], inst) == pytest.approx(5.0)
    # picks only: peak equals the total pick weight
    pick_route = Route([1], cost)
    assert pick_route.peak_load == pytest.approx(3.0)
    # returns only: peak equals the starting load
    ret_route = Route([0], cost)
    assert ret_route.peak_load == pytest.approx(2.0)


def test_completion_times_follow_break_recursion():
    params = InstanceParams(num_pickers=1, max_batches_per_picker=3)
    lines = [pick(0, 0, 0, 10.0), pick(1, 1, 0, 20.0), pick(2, 2, 1, 5.0)]
    inst = make_instance(lines, params=params)
    cost = costing(inst)
    sol = Solution([[Route([0], cost), Route([1], cost), Route([2], cost)]])
    times = batch_times(sol, cost)[0]
    clock = 0.0
    for (start, completion), route in zip(times, sol.routes[0]):
        assert start == pytest.approx(clock if clock == 0.0 else clock)
        assert completion == pytest.approx(start + route.duration)
        clock = completion + cost.break_time
    assert times[0][0] == 0.0
    assert times[1][0] == pytest.approx(times[0][1] + 300.0)
    assert times[2][0] == pytest.approx(times[1][1] + 300.0)


def test_tardiness_term():
    params = InstanceParams(num_pickers=1, max_batches_per_picker=2)
    lines = [pick(0, 0, 0, 10.0, deadline=10.0), pick(1, 1, 0, 5.0, deadline=28800.0)]
    inst = make_instance(lines, params=params)
    cost = costing(inst)
    sol = Solution([[Route([0, 1], cost)]])
    completion = batch_times(sol, cost)[0][0][1]
    expected = 0.001 * (completion - 10.0)
    assert evaluate(sol, inst).tardiness == pytest.approx(expected, abs=1e-12)


def test_tardiness_per_product_switch():
    params = InstanceParams(num_pickers=1, max_batches_per_picker=1,
                            tardiness_per_product=True)
    lines = [pick(0, 0, 0, 10.0, quantity=3, deadline=1.0)]
    inst = make_instance(lines, params=params)
    cost = costing(inst)
    sol = Solution([[Route([0], cost)]])
    completion = batch_times(sol, cost)[0][0][1]
    assert evaluate(sol, inst).tardiness == pytest.approx(
        0.001 * 3 * (completion - 1.0), abs=1e-12)


def test_evaluate_rejects_duplicates_and_gaps():
    lines = [pick(0, 0, 0, 10.0), pick(1, 1, 0, 5.0)]
    inst = make_instance(lines)
    cost = costing(inst)
    with pytest.raises(ValueError, match="more than once"):
        evaluate(Solution([[Route([0], cost), Route([0, 1], cost)], [], []]), inst)
    with pytest.raises(ValueError, match="not assigned"):
        evaluate(Solution([[Route([0], cost)], [], []]), inst)


def test_decomposition_identity_random():
    rng = random.Random(5)
    for trial in range(40):
        inst = generate(GenSpec(num_orderlines=rng.randint(5, 25),
                                return_fraction=0.3,
                                splitup_cost=rng.choice([0.0, 1.0, 17.5]),
                                seed=trial))
        sol = random_solution(inst, rng)
        rate = rng.choice([0.0, 0.5, 10.0])
        breakdown = evaluate(sol, inst, penalty_rate=rate)
        assert breakdown.total == (breakdown.travel + breakdown.tardiness
                                   + breakdown.splitup + breakdown.capacity_penalty)
        assert breakdown.travel >= 0 and breakdown.tardiness >= 0
        assert breakdown.splitup >= 0 and breakdown.capacity_penalty >= 0


def random_solution(inst, rng):
    """Arbitrary complete assignment used by the property tests."""
    cost = costing(inst)
    ids = list(range(len(inst.order_lines)))
    rng.shuffle(ids)
    buckets = []
    for picker in range(inst.params.num_pickers):
        buckets.append([[] for _ in range(rng.randint(1, inst.params.max_batches_per_picker))])
    flat = [b for picker in buckets for b in picker]
    for line_id in ids:
        rng.choice(flat).append(line_id)
    routes = []
    for picker in buckets:
        routes.append([Route(b, cost) for b in picker if b])
    return Solution(routes)


def test_peak_load_matches_prefix_max_reference():
    rng = random.Random(31)
    inst = generate(GenSpec(num_orderlines=60, return_fraction=0.5, seed=8))
    cost = costing(inst)
    for _ in range(2000):
        size = rng.randint(1, 12)
        stops = rng.sample(range(60), size)
        route = Route(stops, cost)
        # reference: prefix maximum over the running load
        loads = [sum(cost.return_weight[i] for i in stops)]
        for i in stops:
            loads.append(loads[-1] + cost.pick_weight[i] - cost.return_weight[i])
        assert route.peak_load == pytest.approx(max(loads), abs=1e-12)


def test_evaluate_is_pure():
    inst = generate(GenSpec(num_orderlines=20, return_fraction=0.2, seed=77))
    rng = random.Random(1)
    sol = random_solution(inst, rng)
    first = evaluate(sol, inst, penalty_rate=2.0)
    for _ in range(3):
        assert evaluate(sol, inst, penalty_rate=2.0) == first


def test_check_feasibility_capacity_violation():
    params = InstanceParams(num_pickers=1, max_batches_per_picker=1, capacity=80.0)
    lines = [pick(0, 0, 0, 5.0, quantity=4, unit_weight=1.0) for _ in range(1)]
    lines = [OrderLine(i, i, Location(0, 5.0), 4, 1.0, 4, 0, 28800.0) for i in range(22)]
    inst = make_instance(lines, params=params)
    cost = costing(inst)
    sol = Solution([[Route(list(range(22)), cost)]])
    violations = check_feasibility(sol, inst)
    capacity = [v for v in violations if v.kind == "capacity"]
    assert len(capacity) == 1
    assert capacity[0].amount == pytest.approx(88.0 - 80.0)
    assert total_capacity_excess(sol, cost) == pytest.approx(8.0)


def test_check_feasibility_horizon_violation():
    params = InstanceParams(num_pickers=1, max_batches_per_picker=1, horizon=10.0)
    lines = [pick(0, 0, 0, 10.0)]
    inst = make_instance(lines, params=params)
    cost = costing(inst)
    sol = Solution([[Route([0], cost)]])
    violations = check_feasibility(sol, inst)
    assert any(v.kind == "horizon" for v in violations)


def test_check_feasibility_clean():
    inst = generate(GenSpec(num_orderlines=12, return_fraction=0.2, seed=3))
    cost = costing(inst)
    routes = [[] for _ in range(inst.params.num_pickers)]
    for line in inst.order_lines:
        routes[0].append(Route([line.id], cost))
    routes[0] = routes[0][:inst.params.max_batches_per_picker]
    leftover = [line.id for line in inst.order_lines[inst.params.max_batches_per_picker:]]
    if leftover:
        routes[1].append(Route(leftover, cost))
    sol = Solution(routes)
    assert check_feasibility(sol, inst) == []


def test_schedules_view():
    inst = generate(GenSpec(num_orderlines=10, seed=2))
    cost = costing(inst)
    sol = Solution([[Route([i for i in range(10)], cost)], [], []])
    views = schedules(sol, inst)
    assert len(views) == 3
    assert views[0].starts[0] == 0.0
    assert views[0].completions[0] == pytest.approx(sol.routes[0][0].duration)
    assert views[1].routes == []


def test_completion_by_line():
    inst = generate(GenSpec(num_orderlines=6, seed=4, num_pickers=2))
    cost = costing(inst)
    sol = Solution([[Route([0, 1], cost), Route([2], cost)], [Route([3, 4, 5], cost)]])
    comp = completion_by_line(sol, cost)
    times = batch_times(sol, cost)
    assert comp[0] == comp[1] == times[0][0][1]
    assert comp[2] == times[0][1][1]
    assert comp[5] == times[1][0][1]


def test_solution_file_round_trip(tmp_path):
    inst = generate(GenSpec(num_orderlines=15, return_fraction=0.2, seed=6))
    rng = random.Random(9)
    sol = random_solution(inst, rng)
    data = solution_to_dict(sol, inst)
    again = solution_from_dict(data, inst)
    assert [[r.stops for r in picker] for picker in again.routes] == \
        [[r.stops for r in picker] for picker in sol.routes]
    assert data["cost"]["total"] == pytest.approx(evaluate(sol, inst).total)
