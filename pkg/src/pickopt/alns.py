"""Adaptive large neighborhood search over batching, assignment and routing.

Several search contexts run the same inner loop from shared starting
points: pick an operator by roulette wheel over adaptive scores, build a
candidate from the current solution, then accept it with a simulated
annealing rule whose tolerance tightens over the run.  At every round
boundary all contexts adopt the best solution found so far, scores are
averaged with the best context and capped, newly seen batches flow into
shared pools, and (optionally) two exact set-partitioning repairs try to
improve the adopted solution.  Capacity violations are allowed during the
search and priced by a penalty that grows geometrically per round, so the
final solution must be capacity-clean to win.

Operator ids:

 1 merge similar batches (single-linkage reclustering, S-shape rebuild)
 2 remove aisle outliers, reinsert by aisle
 3 remove random lines, reinsert in random order with noise
 4 remove random batches, reinsert in random order with noise
 5 remove random batches, reinsert by aisle
 6 remove whole customers, reinsert each grouped into a single batch
 7 like 6, but only customers currently split over batches
 8 intra-route VND on every batch
 9 remove tardy and far-too-early lines, reinsert by deadline
10 remove whole customers, reinsert ungrouped by customer index
11 remove random batches, reinsert by customer index
"""

from __future__ import annotations

import math
import random
from collections import Counter, deque
from dataclasses import dataclass

from .instance import Instance
from .mip import BatchPool, SchedulePool, mip_op1, mip_op2
from .routing import (
    InsertionCriterion, InsertionError, InsertionPlanner, SortCriterion,
    TRUE_COST, cheapest_insert, remove_lines, s_shape_order, vnd_improve,
)
from .solution import (
    Route, Solution, batch_times, check_feasibility, completion_by_line,
    CostBreakdown, costing, evaluate, horizon_overrun, splitup_counts,
    total_capacity_excess,
)

OPERATOR_IDS = tuple(range(1, 12))

# added to the insertion score of any position that would miss the deadline
LATE_PENALTY = 1e9

_EPS = 1e-9


@dataclass
class AlnsConfig:
    """Tuning knobs; the defaults suit instances of a few hundred lines."""

    outer_iters: int = 50
    inner_iters: int = 100
    num_contexts: int = 4
    seed: int = 0
    # simulated annealing acceptance
    sa_worsening: float = 5.0
    sa_convergence: float = 2.0
    # adaptive operator scores
    score_initial: float = 1.0
    score_increment: float = 0.25
    score_reset_threshold: float = 5.0
    score_memory: int = 4
    # insertion noise amplitude for the random destroy and repair moves
    noise: float = 0.1
    # batch similarity tolerance in seconds, interpolated over the run
    tol_sim_start: float = 2000.0
    tol_sim_end: float = 500.0
    # operator shares
    op2_int: float = 0.15
    op2_tol: float = 0.2
    op3_min: float = 0.05
    op3_max: float = 0.15
    op4_int: float = 0.25
    op5_int: float = 0.15
    op6_min: float = 0.05
    op6_max: float = 0.15
    op7_min: float = 0.05
    op7_max: float = 0.10
    op9_int: float = 0.15
    op9_earliness_threshold: float = 1000.0
    op9_earliness_rate: float = 0.01
    op11_int: float = 0.25
    # capacity penalty schedule
    penalty_start_factor: float = 0.1
    penalty_growth: float = 1.3
    # exact repair operators run at round boundaries
    mip_ops: bool = False
    mip_fix_fraction: float = 0.5
    mip_repeats_fraction: float = 0.2
    mip_max_batches: int = 12
    # batch and schedule pools
    collect_pools: bool = True
    pool_limit: int = 100_000

    def __post_init__(self):
        if self.outer_iters < 1 or self.inner_iters < 1:
            raise ValueError("iteration counts must be at least 1")
        if self.num_contexts < 1:
            raise ValueError("num_contexts must be at least 1")
        if self.tol_sim_end > self.tol_sim_start:
            raise ValueError("tol_sim_end must not exceed tol_sim_start")
        if self.penalty_growth < 1.0:
            raise ValueError("penalty_growth must be at least 1")
        for name in ("op2_int", "op3_min", "op3_max", "op4_int", "op5_int",
                     "op6_min", "op6_max", "op7_min", "op7_max", "op9_int",
                     "op11_int", "mip_fix_fraction", "mip_repeats_fraction"):
            value = getattr(self, name)
            if not 0.0 <= value <= 1.0:
                raise ValueError(f"{name} must lie in [0, 1]")
        if self.op3_min > self.op3_max or self.op6_min > self.op6_max \
                or self.op7_min > self.op7_max:
            raise ValueError("operator share ranges must be ordered")
        if not 0.0 <= self.noise < 1.0:
            raise ValueError("noise must lie in [0, 1)")


def tol_sim_at(round_index: int, cfg: AlnsConfig) -> float:
    """Batch similarity tolerance for a round, linear from start to end."""
    if cfg.outer_iters == 1:
        return cfg.tol_sim_start
    frac = round_index / (cfg.outer_iters - 1)
    return cfg.tol_sim_start + (cfg.tol_sim_end - cfg.tol_sim_start) * frac


def penalty_rate_at(round_index: int, cfg: AlnsConfig, instance: Instance) -> float:
    """Capacity penalty per kg of excess, growing geometrically per round."""
    cost = costing(instance)
    start = cfg.penalty_start_factor * cost.travel_rate * cost.capacity
    return start * cfg.penalty_growth ** round_index


# ---------------------------------------------------------------------------
# Simulated annealing acceptance

def acceptance_probability(z_cur: float, z_best: float, it: int,
                           cfg: AlnsConfig) -> float:
    """Probability of moving to ``z_cur`` from ``z_best`` at iteration ``it``."""
    if z_best <= 0.0:
        raise ValueError("acceptance needs a positive reference objective")
    if z_cur <= z_best:
        return 1.0
    n_max = cfg.outer_iters * cfg.inner_iters
    if not 0 <= it < n_max:
        raise ValueError(f"iteration {it} outside [0, {n_max})")
    relative = (z_cur - z_best) / z_best
    cooling = (1.0 - it / n_max) ** cfg.sa_convergence
    return math.exp(-(relative * cfg.sa_worsening) / cooling)


def accept(z_cur: float, z_best: float, it: int, cfg: AlnsConfig,
           rng: random.Random) -> bool:
    return rng.random() < acceptance_probability(z_cur, z_best, it, cfg)


# ---------------------------------------------------------------------------
# Adaptive operator scores

class OperatorScores:
    """Roulette-wheel operator selection with score feedback.

    An improving candidate rewards its operator and the operators behind
    the last few accepted moves.  At synchronization the scores are
    averaged with the best context's and any score beyond the threshold
    falls back to the initial value.
    """

    def __init__(self, cfg: AlnsConfig):
        self.cfg = cfg
        self.scores = {op: cfg.score_initial for op in OPERATOR_IDS}
        self.recent = deque(maxlen=cfg.score_memory)

    def select(self, rng: random.Random) -> int:
        total = sum(self.scores.values())
        pick = rng.random() * total
        acc = 0.0
        for op in OPERATOR_IDS:
            acc += self.scores[op]
            if pick < acc:
                return op
        return OPERATOR_IDS[-1]

    def selection_probability(self, op: int) -> float:
        return self.scores[op] / sum(self.scores.values())

    def reward(self, op: int) -> None:
        self.scores[op] += self.cfg.score_increment
        for earlier in self.recent:
            self.scores[earlier] += self.cfg.score_increment

    def record_accepted(self, op: int) -> None:
        self.recent.append(op)

    def reset_high(self) -> None:
        for op, value in self.scores.items():
            if value > self.cfg.score_reset_threshold:
                self.scores[op] = self.cfg.score_initial

    def average_with(self, other: dict[int, float]) -> None:
        for op in OPERATOR_IDS:
            self.scores[op] = (self.scores[op] + other[op]) / 2.0


# ---------------------------------------------------------------------------
# Operators

def _noise_criterion(cfg: AlnsConfig) -> InsertionCriterion:
    return InsertionCriterion(noise=cfg.noise)


def _reinsert(sol: Solution, removed, sort, crit, instance, rng, penalty_rate):
    return cheapest_insert(sol, removed, sort, crit, instance, rng,
                           penalty_rate=penalty_rate)


def _single_linkage_split(line_ids, cost):
    """Recluster a merged line set into two groups.

    Groups sharing a customer merge first; afterwards the closest pair by
    single-linkage distance merges.  Once a group's pick or return load
    reaches the transport capacity it is frozen and everything else
    becomes the second group.
    """
    clusters = [[i] for i in line_ids]
    custs = [{cost.customer[i]} for i in line_ids]
    picks = [cost.pick_weight[i] for i in line_ids]
    rets = [cost.return_weight[i] for i in line_ids]
    while len(clusters) > 2:
        pair = None
        for a in range(len(clusters)):
            for b in range(a + 1, len(clusters)):
                if custs[a] & custs[b]:
                    pair = (a, b)
                    break
            if pair:
                break
        if pair is None:
            best = None
            for a in range(len(clusters)):
                for b in range(a + 1, len(clusters)):
                    link = min(cost.dist(i, j)
                               for i in clusters[a] for j in clusters[b])
                    if best is None or link < best[0] - _EPS:
                        best = (link, a, b)
            pair = (best[1], best[2])
        a, b = pair
        clusters[a].extend(clusters[b])
        custs[a] |= custs[b]
        picks[a] += picks[b]
        rets[a] += rets[b]
        del clusters[b], custs[b], picks[b], rets[b]
        if picks[a] >= cost.capacity - _EPS or rets[a] >= cost.capacity - _EPS:
            rest = [i for idx, grp in enumerate(clusters) if idx != a for i in grp]
            return clusters[a], rest
    return clusters[0], clusters[1]


def op_merge_similar(sol, instance, cfg, penalty_rate, tol_sim, rng):
    cost = costing(instance)
    positions = [(e, h) for e, batch_list in enumerate(sol.routes)
                 for h in range(len(batch_list))]
    if len(positions) < 2:
        return sol
    times = batch_times(sol, cost)
    order = rng.sample(positions, len(positions))
    used = set()
    pairs = []
    for idx, first in enumerate(order):
        if first in used:
            continue
        st1, co1 = times[first[0]][first[1]]
        for second in order[idx + 1:]:
            if second in used:
                continue
            st2, co2 = times[second[0]][second[1]]
            if abs(st1 - st2) <= tol_sim and abs(co1 - co2) <= tol_sim:
                used.add(first)
                used.add(second)
                pairs.append((first, second))
                break
    if not pairs:
        return sol
    work = sol.copy()
    leftovers = []
    for first, second in pairs:
        merged = (list(work.routes[first[0]][first[1]].stops)
                  + list(work.routes[second[0]][second[1]].stops))
        groups = _single_linkage_split(merged, cost)
        rebuilt = []
        for group in groups:
            if not group:
                rebuilt.append(None)
                continue
            visit, left = s_shape_order(group, instance)
            leftovers.extend(left)
            rebuilt.append(Route(visit, cost) if visit else None)
        work.routes[first[0]][first[1]] = rebuilt[0]
        work.routes[second[0]][second[1]] = rebuilt[1]
    work = Solution([[r for r in batch_list if r is not None]
                     for batch_list in work.routes])
    if leftovers:
        work = _reinsert(work, leftovers, SortCriterion.RANDOM, TRUE_COST,
                         instance, rng, penalty_rate)
    return work


def op_outliers(sol, instance, cfg, penalty_rate, tol_sim, rng):
    cost = costing(instance)
    count = min(cost.n, int(round(cfg.op2_int * cost.n)))
    if count < 1:
        return sol
    checked = rng.sample(range(cost.n), count)
    assignment = sol.assignment()
    share = {}
    for picker, position, route in sol.all_routes():
        aisles = Counter(cost.aisle[i] for i in route.stops)
        share[(picker, position)] = {a: c / len(route.stops)
                                     for a, c in aisles.items()}
    outliers = [i for i in checked
                if share[assignment[i]][cost.aisle[i]] < cfg.op2_tol]
    if not outliers:
        return sol
    work = remove_lines(sol, outliers, instance)
    return _reinsert(work, outliers, SortCriterion.AISLE_THEN_OFFSET, TRUE_COST,
                     instance, rng, penalty_rate)


def op_random_lines(sol, instance, cfg, penalty_rate, tol_sim, rng):
    cost = costing(instance)
    low = max(1, round(cfg.op3_min * cost.n))
    high = max(low, round(cfg.op3_max * cost.n))
    count = min(rng.randint(low, high), cost.n)
    removed = rng.sample(range(cost.n), count)
    work = remove_lines(sol, removed, instance)
    return _reinsert(work, removed, SortCriterion.RANDOM, _noise_criterion(cfg),
                     instance, rng, penalty_rate)


def _remove_random_batches(sol, instance, fraction, rng):
    cost = costing(instance)
    positions = [(e, h) for e, batch_list in enumerate(sol.routes)
                 for h in range(len(batch_list))]
    if not positions:
        return None, []
    cap = max(1, round(fraction * cost.num_pickers * cost.max_batches))
    count = min(rng.randint(1, cap), len(positions))
    chosen = set(rng.sample(positions, count))
    removed = []
    routes = []
    for picker, batch_list in enumerate(sol.routes):
        kept = []
        for position, route in enumerate(batch_list):
            if (picker, position) in chosen:
                removed.extend(route.stops)
            else:
                kept.append(route)
        routes.append(kept)
    return Solution(routes), removed


def op_random_batches(sol, instance, cfg, penalty_rate, tol_sim, rng):
    work, removed = _remove_random_batches(sol, instance, cfg.op4_int, rng)
    if not removed:
        return sol
    return _reinsert(work, removed, SortCriterion.RANDOM, _noise_criterion(cfg),
                     instance, rng, penalty_rate)


def op_aisle_batches(sol, instance, cfg, penalty_rate, tol_sim, rng):
    work, removed = _remove_random_batches(sol, instance, cfg.op5_int, rng)
    if not removed:
        return sol
    return _reinsert(work, removed, SortCriterion.AISLE_THEN_OFFSET, TRUE_COST,
                     instance, rng, penalty_rate)


def _reinsert_customers_grouped(work, instance, chosen, cfg, penalty_rate, rng):
    """Insert each customer's lines into one batch; spillover goes to plain CI."""
    cost = costing(instance)
    planner = InsertionPlanner(work, cost, penalty_rate=penalty_rate)
    leftovers = []
    for customer in chosen:
        ids = sorted(cost.customer_lines[customer],
                     key=lambda i: (cost.aisle[i],
                                    instance.order_lines[i].location.offset, i))
        placed = planner.insert_group(ids)
        if not placed:
            leftovers.extend(ids)
    if leftovers:
        work = _reinsert(work, leftovers, SortCriterion.RANDOM, TRUE_COST,
                         instance, rng, penalty_rate)
    return work


def _customer_draw(rng, low_frac, high_frac, total):
    low = max(1, round(low_frac * total))
    high = max(low, round(high_frac * total))
    return min(rng.randint(low, high), total)


def op_customers_grouped(sol, instance, cfg, penalty_rate, tol_sim, rng):
    cost = costing(instance)
    total = len(instance.customers)
    count = _customer_draw(rng, cfg.op6_min, cfg.op6_max, total)
    chosen = rng.sample(range(total), count)
    removed = [i for c in chosen for i in cost.customer_lines[c]]
    work = remove_lines(sol, removed, instance)
    rng.shuffle(chosen)
    return _reinsert_customers_grouped(work, instance, chosen, cfg,
                                       penalty_rate, rng)


def op_split_customers(sol, instance, cfg, penalty_rate, tol_sim, rng):
    cost = costing(instance)
    split = sorted(c for c, extra in splitup_counts(sol, instance).items()
                   if extra > 0)
    if not split:
        return sol
    total = len(instance.customers)
    count = min(_customer_draw(rng, cfg.op7_min, cfg.op7_max, total), len(split))
    chosen = rng.sample(split, count)
    removed = [i for c in chosen for i in cost.customer_lines[c]]
    work = remove_lines(sol, removed, instance)
    rng.shuffle(chosen)
    return _reinsert_customers_grouped(work, instance, chosen, cfg,
                                       penalty_rate, rng)


def op_vnd_routes(sol, instance, cfg, penalty_rate, tol_sim, rng):
    return Solution([[vnd_improve(route, instance) for route in batch_list]
                     for batch_list in sol.routes])


def op_tardiness(sol, instance, cfg, penalty_rate, tol_sim, rng):
    cost = costing(instance)
    count = min(cost.n, int(round(cfg.op9_int * cost.n)))
    if count < 1:
        return sol
    checked = rng.sample(range(cost.n), count)
    completion = completion_by_line(sol, cost)
    removed = [i for i in checked
               if completion[i] > cost.deadline[i] + _EPS
               or cost.deadline[i] - completion[i] >= cfg.op9_earliness_threshold]
    if not removed:
        return sol
    work = remove_lines(sol, removed, instance)
    crit = InsertionCriterion(earliness_rate=cfg.op9_earliness_rate,
                              late_penalty=LATE_PENALTY)
    return _reinsert(work, removed, SortCriterion.DEADLINE, crit,
                     instance, rng, penalty_rate)


def op_customers_sorted(sol, instance, cfg, penalty_rate, tol_sim, rng):
    cost = costing(instance)
    total = len(instance.customers)
    count = _customer_draw(rng, cfg.op6_min, cfg.op6_max, total)
    chosen = rng.sample(range(total), count)
    removed = [i for c in chosen for i in cost.customer_lines[c]]
    work = remove_lines(sol, removed, instance)
    return _reinsert(work, removed, SortCriterion.CUSTOMER_INDEX, TRUE_COST,
                     instance, rng, penalty_rate)


def op_batches_by_customer(sol, instance, cfg, penalty_rate, tol_sim, rng):
    work, removed = _remove_random_batches(sol, instance, cfg.op11_int, rng)
    if not removed:
        return sol
    return _reinsert(work, removed, SortCriterion.CUSTOMER_INDEX, TRUE_COST,
                     instance, rng, penalty_rate)


OPERATORS = {
    1: op_merge_similar,
    2: op_outliers,
    3: op_random_lines,
    4: op_random_batches,
    5: op_aisle_batches,
    6: op_customers_grouped,
    7: op_split_customers,
    8: op_vnd_routes,
    9: op_tardiness,
    10: op_customers_sorted,
    11: op_batches_by_customer,
}


def apply_operator(op_id, sol, instance, cfg, penalty_rate, tol_sim, rng):
    return OPERATORS[op_id](sol, instance, cfg, penalty_rate, tol_sim, rng)


# ---------------------------------------------------------------------------
# Construction

def initial_solution(instance: Instance, rng: random.Random,
                     penalty_rate: float = 0.0) -> Solution:
    """Cheapest-insertion build, best of two sorting criteria.

    New batches open level by level: the first batches of all pickers fill
    before any picker starts a second one.  The build respects capacity
    outright; only when that leaves some line without a position (more
    total weight than the fleet can hold) it falls back to penalized
    insertion.
    """
    ids = range(len(instance.order_lines))
    best = None
    best_z = None
    for sort in (SortCriterion.DEADLINE_THEN_AISLE,
                 SortCriterion.CUSTOMER_THEN_DEADLINE_THEN_AISLE):
        try:
            sol = cheapest_insert(Solution.empty(instance.params.num_pickers),
                                  ids, sort, TRUE_COST, instance, rng,
                                  penalty_rate=penalty_rate, fill_first=True,
                                  capacity_hard=True)
        except InsertionError:
            sol = cheapest_insert(Solution.empty(instance.params.num_pickers),
                                  ids, sort, TRUE_COST, instance, rng,
                                  penalty_rate=penalty_rate, fill_first=True)
        z = evaluate(sol, instance, penalty_rate).total
        if best_z is None or z < best_z - _EPS:
            best = sol
            best_z = z
    return best


# ---------------------------------------------------------------------------
# Search driver

@dataclass
class LogRow:
    iteration: int
    context: int
    round: int
    operator: int
    delta: float
    accepted: bool
    best_violation: float
    best_cost: float


@dataclass
class AlnsResult:
    solution: Solution
    cost: CostBreakdown
    feasible: bool
    violations: list
    log: list[LogRow]
    batch_pool: BatchPool
    schedule_pool: SchedulePool


class _Context:
    __slots__ = ("rng", "scores", "incumbent", "z_inc", "best_sol",
                 "best_violation", "best_cost", "pending_batches",
                 "pending_schedules")

    def __init__(self, rng, scores, incumbent):
        self.rng = rng
        self.scores = scores
        self.incumbent = incumbent
        self.z_inc = 0.0
        self.best_sol = incumbent
        self.best_violation = math.inf
        self.best_cost = math.inf
        self.pending_batches = {}
        self.pending_schedules = {}

    def note_candidate(self, sol, violation, true_cost):
        if violation < self.best_violation - _EPS or (
                violation <= self.best_violation + _EPS
                and true_cost < self.best_cost - _EPS):
            self.best_sol = sol
            self.best_violation = violation
            self.best_cost = true_cost

    def collect(self, sol):
        for _, _, route in sol.all_routes():
            self.pending_batches.setdefault(route.stops, route)
        for batch_list in sol.routes:
            if batch_list:
                key = tuple(r.stops for r in batch_list)
                self.pending_schedules.setdefault(key, list(batch_list))


def _measure(sol, instance, cost):
    violation = total_capacity_excess(sol, cost) + horizon_overrun(sol, cost)
    true_cost = evaluate(sol, instance).total
    return violation, true_cost


def run(instance: Instance, cfg: AlnsConfig | None = None,
        warm_start: Solution | None = None) -> AlnsResult:
    """Full search; returns the best feasible solution found.

    When no capacity- and horizon-clean solution turns up, ``feasible`` is
    False and ``solution`` carries the least-violating one instead.
    """
    cfg = cfg or AlnsConfig()
    cost = costing(instance)
    if cost.n < 1:
        raise ValueError("instance has no order lines")
    base_rng = random.Random(cfg.seed)
    context_rngs = [random.Random(base_rng.getrandbits(63))
                    for _ in range(cfg.num_contexts)]
    mip_rng = random.Random(base_rng.getrandbits(63))
    batch_pool = BatchPool(instance, limit=cfg.pool_limit)
    schedule_pool = SchedulePool(instance, limit=cfg.pool_limit,
                                 batch_pool=batch_pool)

    first_pen = penalty_rate_at(0, cfg, instance)
    contexts = []
    for rng in context_rngs:
        start = initial_solution(instance, rng, first_pen)
        if warm_start is not None:
            if (evaluate(warm_start, instance, first_pen).total
                    < evaluate(start, instance, first_pen).total):
                start = warm_start
        ctx = _Context(rng, OperatorScores(cfg), start)
        ctx.note_candidate(start, *_measure(start, instance, cost))
        if warm_start is not None and warm_start is not start:
            ctx.note_candidate(warm_start, *_measure(warm_start, instance, cost))
        if cfg.collect_pools:
            ctx.collect(start)
            if warm_start is not None:
                ctx.collect(warm_start)
        contexts.append(ctx)

    log: list[LogRow] = []
    for round_index in range(cfg.outer_iters):
        pen = penalty_rate_at(round_index, cfg, instance)
        tol = tol_sim_at(round_index, cfg)
        for ctx in contexts:
            ctx.z_inc = evaluate(ctx.incumbent, instance, pen).total
        for context_index, ctx in enumerate(contexts):
            for inner in range(cfg.inner_iters):
                it = round_index * cfg.inner_iters + inner
                op = ctx.scores.select(ctx.rng)
                cand = apply_operator(op, ctx.incumbent, instance, cfg,
                                      pen, tol, ctx.rng)
                breakdown = evaluate(cand, instance, pen)
                z = breakdown.total
                delta = z - ctx.z_inc
                if z < ctx.z_inc - _EPS:
                    ctx.scores.reward(op)
                accepted = accept(z, ctx.z_inc, it, cfg, ctx.rng)
                if accepted:
                    ctx.incumbent = cand
                    ctx.z_inc = z
                    ctx.scores.record_accepted(op)
                    if cfg.collect_pools:
                        ctx.collect(cand)
                violation = (total_capacity_excess(cand, cost)
                             + horizon_overrun(cand, cost))
                ctx.note_candidate(cand, violation,
                                   breakdown.total - breakdown.capacity_penalty)
                log.append(LogRow(it, context_index, round_index, op, delta,
                                  accepted, ctx.best_violation, ctx.best_cost))
        # synchronization barrier: pools, best exchange, scores, exact repairs
        if cfg.collect_pools:
            for ctx in contexts:
                for key in sorted(ctx.pending_batches):
                    batch_pool.add(ctx.pending_batches[key])
                for key in sorted(ctx.pending_schedules):
                    schedule_pool.add(ctx.pending_schedules[key])
                ctx.pending_batches.clear()
                ctx.pending_schedules.clear()
        best_index = 0
        for idx in range(1, len(contexts)):
            ctx = contexts[idx]
            leader = contexts[best_index]
            if ctx.best_violation < leader.best_violation - _EPS or (
                    ctx.best_violation <= leader.best_violation + _EPS
                    and ctx.best_cost < leader.best_cost - _EPS):
                best_index = idx
        leader = contexts[best_index]
        best_scores = dict(leader.scores.scores)
        global_best = leader.best_sol
        global_violation = leader.best_violation
        global_cost = leader.best_cost
        if cfg.mip_ops:
            improved = _exact_repairs(global_best, instance, batch_pool, cfg,
                                      mip_rng, pen)
            if improved is not None:
                global_best = improved
                global_violation, global_cost = _measure(improved, instance, cost)
                if cfg.collect_pools:
                    leader.collect(improved)
                    for key in sorted(leader.pending_batches):
                        batch_pool.add(leader.pending_batches[key])
                    for key in sorted(leader.pending_schedules):
                        schedule_pool.add(leader.pending_schedules[key])
                    leader.pending_batches.clear()
                    leader.pending_schedules.clear()
        for ctx in contexts:
            ctx.incumbent = global_best
            ctx.note_candidate(global_best, global_violation, global_cost)
            ctx.scores.average_with(best_scores)
            ctx.scores.reset_high()

    final = contexts[0]
    solution = final.best_sol
    violations = check_feasibility(solution, instance)
    feasible = not violations
    return AlnsResult(
        solution=solution,
        cost=evaluate(solution, instance),
        feasible=feasible,
        violations=violations,
        log=log,
        batch_pool=batch_pool,
        schedule_pool=schedule_pool,
    )


def _exact_repairs(sol, instance, batch_pool, cfg, rng, penalty_rate):
    """Run the exact repairs in order; stop at the first improvement."""
    z_in = evaluate(sol, instance, penalty_rate).total
    if sol.num_batches() <= cfg.mip_max_batches:
        candidate = mip_op1(sol, instance)
        if evaluate(candidate, instance, penalty_rate).total < z_in - _EPS:
            return candidate
    candidate = mip_op2(sol, instance, batch_pool, cfg.mip_fix_fraction,
                        cfg.mip_repeats_fraction, rng,
                        penalty_rate=penalty_rate,
                        max_batches=cfg.mip_max_batches)
    if candidate is not None and \
            evaluate(candidate, instance, penalty_rate).total < z_in - _EPS:
        return candidate
    return None
