"""Route construction and improvement.

Three building blocks used across the solver:

* cheapest insertion: sort loose order lines, then place each at the
  cheapest position over all pickers, batches and stop indices, opening
  new batches when allowed;
* S-shape rebuild: order a stop set aisle by aisle with alternating
  traversal direction, deferring over-capacity picks to the way back;
* route VND: relocate, swap and 2-opt within one route until none of the
  three finds an improvement.
"""

from __future__ import annotations

import enum
import math
import random
from dataclasses import dataclass

from .instance import Instance
from .solution import Costing, Route, Solution, costing

_EPS = 1e-9


class InsertionError(RuntimeError):
    """No admissible insertion position exists for an order line."""


class SortCriterion(enum.Enum):
    RANDOM = "random"
    AISLE_THEN_OFFSET = "aisle_then_offset"
    DEADLINE_THEN_AISLE = "deadline_then_aisle"
    CUSTOMER_THEN_DEADLINE_THEN_AISLE = "customer_then_deadline_then_aisle"
    CUSTOMER_INDEX = "customer_index"
    DEADLINE = "deadline"


def sort_lines(line_ids, criterion: SortCriterion, cost: Costing,
               rng: random.Random) -> list[int]:
    """Order lines for insertion; ties fall back to a seeded shuffle."""
    ids = list(line_ids)
    rng.shuffle(ids)
    if criterion is SortCriterion.RANDOM:
        return ids
    inst = cost.instance
    if criterion is SortCriterion.AISLE_THEN_OFFSET:
        key = lambda i: (inst.order_lines[i].location.aisle,
                         inst.order_lines[i].location.offset)
    elif criterion is SortCriterion.DEADLINE_THEN_AISLE:
        key = lambda i: (cost.deadline[i], cost.aisle[i])
    elif criterion is SortCriterion.CUSTOMER_THEN_DEADLINE_THEN_AISLE:
        key = lambda i: (cost.customer[i], cost.deadline[i], cost.aisle[i])
    elif criterion is SortCriterion.CUSTOMER_INDEX:
        key = lambda i: cost.customer[i]
    elif criterion is SortCriterion.DEADLINE:
        key = lambda i: cost.deadline[i]
    else:
        raise ValueError(f"unknown sort criterion {criterion}")
    ids.sort(key=key)
    return ids


@dataclass(frozen=True)
class InsertionCriterion:
    """Scoring of candidate positions.

    With all fields zero the score is the exact objective delta.  ``noise``
    scales the delta by a uniform factor in [1-noise, 1+noise];
    ``earliness_rate`` charges each second the line would be dropped off
    before its deadline; ``late_penalty`` is added whenever the line would
    complete after its deadline.
    """

    noise: float = 0.0
    earliness_rate: float = 0.0
    late_penalty: float = 0.0


TRUE_COST = InsertionCriterion()


class InsertionPlanner:
    """Incremental cheapest-insertion over one working solution.

    The working solution is mutated through ``apply``; cached batch
    durations, completion times, per-batch tardiness and customer-to-batch
    membership keep a full position scan near O(positions).
    """

    def __init__(self, solution: Solution, cost: Costing, penalty_rate: float = 0.0,
                 fill_first: bool = False, capacity_hard: bool = False):
        self.sol = solution
        self.cost = cost
        self.penalty_rate = penalty_rate
        self.fill_first = fill_first
        self.capacity_hard = capacity_hard
        self.completions = []
        self.tardiness = []
        for batch_list in solution.routes:
            comps = []
            tards = []
            clock = 0.0
            for idx, route in enumerate(batch_list):
                if idx > 0:
                    clock += cost.break_time
                clock += route.duration
                comps.append(clock)
                tards.append(route.tardiness_at(clock))
            self.completions.append(comps)
            self.tardiness.append(tards)
        self.customer_batches: dict[int, dict] = {}
        for picker, position, route in solution.all_routes():
            for line_id in route.stops:
                slots = self.customer_batches.setdefault(cost.customer[line_id], {})
                slots[(picker, position)] = slots.get((picker, position), 0) + 1

    def _may_open_batch(self, picker: int) -> bool:
        level = len(self.sol.routes[picker])
        if level >= self.cost.max_batches:
            return False
        if not self.fill_first or level == 0:
            return True
        # every picker must already run `level` batches before anyone gets
        # a batch at position level+1
        return all(len(batch_list) >= level for batch_list in self.sol.routes)

    def _split_delta(self, customer: int, slot) -> float:
        slots = self.customer_batches.get(customer)
        if not slots:
            return 0.0
        if slot in slots:
            return 0.0
        return self.cost.splitup_cost

    def _score(self, delta: float, crit: InsertionCriterion, completion: float,
               deadline: float, rng: random.Random) -> float:
        score = delta
        if crit.noise:
            score *= rng.uniform(1.0 - crit.noise, 1.0 + crit.noise)
        if crit.late_penalty and completion > deadline:
            score += crit.late_penalty
        if crit.earliness_rate and completion <= deadline:
            score += crit.earliness_rate * (deadline - completion)
        return score

    def best_position(self, line_id: int, crit: InsertionCriterion = TRUE_COST,
                      rng: random.Random | None = None):
        """Cheapest admissible position as (picker, batch, stop index, delta).

        Returns None when capacity_hard filtering leaves nothing.  The stop
        index equals the batch length when opening a new batch.
        """
        cost = self.cost
        rng = rng or random.Random(0)
        depot = cost.n
        dist = cost.dist
        speed = cost.speed
        alpha = cost.tardiness_rate
        pick_w = cost.pick_weight
        ret_w = cost.return_weight
        capacity = cost.capacity
        line_pick = pick_w[line_id]
        line_ret = ret_w[line_id]
        line_w = line_pick + line_ret
        deadline = cost.deadline[line_id]
        tard_w = cost.tardiness_weight[line_id]
        cust = cost.customer[line_id]
        best = None
        best_score = None
        for picker, batch_list in enumerate(self.sol.routes):
            comps = self.completions[picker]
            tards = self.tardiness[picker]
            for position, route in enumerate(batch_list):
                split = self._split_delta(cust, (picker, position))
                stops = route.stops
                over_possible = (route.pick_load + route.return_load + line_w
                                 > capacity - 1e-12)
                if not over_possible:
                    # capacity cannot bind, and all remaining terms depend
                    # on the stop index only through the added duration,
                    # monotonically; the pure distance argmin wins
                    best_k = 0
                    best_dd = None
                    prev = depot
                    for k in range(len(stops) + 1):
                        nxt = stops[k] if k < len(stops) else depot
                        ddist = (dist(prev, line_id) + dist(line_id, nxt)
                                 - dist(prev, nxt))
                        if best_dd is None or ddist < best_dd - _EPS:
                            best_dd = ddist
                            best_k = k
                        prev = nxt
                    ddur = best_dd / speed + cost.pick_time
                    tard_delta = 0.0
                    for later in range(position, len(batch_list)):
                        tard_delta += (batch_list[later].tardiness_at(comps[later] + ddur)
                                       - tards[later])
                    completion = comps[position] + ddur
                    own_tard = tard_w * max(0.0, completion - deadline)
                    delta = (cost.travel_rate * ddur
                             + alpha * (tard_delta + own_tard) + split)
                    score = self._score(delta, crit, completion, deadline, rng)
                    if best_score is None or score < best_score - _EPS:
                        best_score = score
                        best = (picker, position, best_k, delta)
                    continue
                # the load profile matters: prefix and suffix load maxima
                # of the existing route make each slot's new peak O(1)
                old_excess = route.excess(capacity)
                initial = route.return_load
                loads = []
                load = initial
                pre_max = [initial]
                for i in stops:
                    load += pick_w[i] - ret_w[i]
                    loads.append(load)
                    pre_max.append(load if load > pre_max[-1] else pre_max[-1])
                suf_max = [-math.inf] * (len(stops) + 1)
                for k in range(len(stops) - 1, -1, -1):
                    nxt_max = suf_max[k + 1]
                    suf_max[k] = loads[k] if loads[k] > nxt_max else nxt_max
                prev = depot
                for k in range(len(stops) + 1):
                    nxt = stops[k] if k < len(stops) else depot
                    ddist = dist(prev, line_id) + dist(line_id, nxt) - dist(prev, nxt)
                    before = loads[k - 1] if k > 0 else initial
                    peak = max(pre_max[k] + line_ret, before + line_pick,
                               suf_max[k] + line_pick)
                    new_excess = peak - capacity
                    if new_excess < 0.0:
                        new_excess = 0.0
                    if self.capacity_hard and new_excess > _EPS:
                        prev = nxt
                        continue
                    ddur = ddist / speed + cost.pick_time
                    penalty_delta = self.penalty_rate * (new_excess - old_excess)
                    tard_delta = 0.0
                    for later in range(position, len(batch_list)):
                        tard_delta += (batch_list[later].tardiness_at(comps[later] + ddur)
                                       - tards[later])
                    completion = comps[position] + ddur
                    own_tard = tard_w * max(0.0, completion - deadline)
                    delta = (cost.travel_rate * ddur
                             + alpha * (tard_delta + own_tard)
                             + split + penalty_delta)
                    score = self._score(delta, crit, completion, deadline, rng)
                    if best_score is None or score < best_score - _EPS:
                        best_score = score
                        best = (picker, position, k, delta)
                    prev = nxt
            if self._may_open_batch(picker):
                ddist = 2.0 * dist(depot, line_id)
                duration = ddist / speed + cost.pick_time
                start = comps[-1] + cost.break_time if comps else 0.0
                completion = start + duration
                new_excess = max(0.0, line_w - cost.capacity)
                if self.capacity_hard and new_excess > _EPS:
                    continue
                split = self._split_delta(cust, (picker, len(batch_list)))
                own_tard = tard_w * max(0.0, completion - deadline)
                delta = (cost.travel_rate * duration
                         + alpha * own_tard
                         + split
                         + self.penalty_rate * new_excess)
                score = self._score(delta, crit, completion, deadline, rng)
                if best_score is None or score < best_score - _EPS:
                    best_score = score
                    best = (picker, len(batch_list), 0, delta)
        return best

    def _refresh_picker(self, picker: int) -> None:
        cost = self.cost
        comps = []
        tards = []
        clock = 0.0
        for idx, route in enumerate(self.sol.routes[picker]):
            if idx > 0:
                clock += cost.break_time
            clock += route.duration
            comps.append(clock)
            tards.append(route.tardiness_at(clock))
        self.completions[picker] = comps
        self.tardiness[picker] = tards

    def apply(self, line_id: int, picker: int, position: int, stop_index: int) -> None:
        """Insert the line at the given position and refresh the caches."""
        cost = self.cost
        batch_list = self.sol.routes[picker]
        if position == len(batch_list):
            batch_list.append(Route([line_id], cost))
        else:
            stops = list(batch_list[position].stops)
            stops.insert(stop_index, line_id)
            batch_list[position] = Route(stops, cost)
        self._refresh_picker(picker)
        slots = self.customer_batches.setdefault(cost.customer[line_id], {})
        key = (picker, position)
        slots[key] = slots.get(key, 0) + 1

    def insert_all(self, ordered_ids, crit: InsertionCriterion,
                   rng: random.Random) -> list[int]:
        """Insert lines in order; returns ids that found no position."""
        unplaced = []
        for line_id in ordered_ids:
            pos = self.best_position(line_id, crit, rng)
            if pos is None:
                unplaced.append(line_id)
                continue
            picker, position, stop_index, _ = pos
            self.apply(line_id, picker, position, stop_index)
        return unplaced

    def _greedy_extend(self, stops, line_ids) -> list[int]:
        """Add each line at its cheapest stop index by distance."""
        cost = self.cost
        dist = cost.dist
        depot = cost.n
        stops = list(stops)
        for line_id in line_ids:
            best_k = 0
            best_d = None
            prev = depot
            for k in range(len(stops) + 1):
                nxt = stops[k] if k < len(stops) else depot
                ddist = dist(prev, line_id) + dist(line_id, nxt) - dist(prev, nxt)
                if best_d is None or ddist < best_d - _EPS:
                    best_d = ddist
                    best_k = k
                prev = nxt
            stops.insert(best_k, line_id)
        return stops

    def insert_group(self, line_ids) -> bool:
        """Place the lines together into one batch; False when impossible.

        Candidate targets are every existing batch plus one new batch per
        admissible picker.  Any target whose peak load would exceed the
        transport capacity is skipped, so a successful group insertion
        never creates a capacity violation.
        """
        cost = self.cost
        alpha = cost.tardiness_rate
        group_pick = sum(cost.pick_weight[i] for i in line_ids)
        group_ret = sum(cost.return_weight[i] for i in line_ids)
        customers = sorted({cost.customer[i] for i in line_ids})
        best = None
        best_delta = None
        for picker, batch_list in enumerate(self.sol.routes):
            comps = self.completions[picker]
            tards = self.tardiness[picker]
            for position, route in enumerate(batch_list):
                if route.pick_load + group_pick > cost.capacity + _EPS:
                    continue
                if route.return_load + group_ret > cost.capacity + _EPS:
                    continue
                cand = Route(self._greedy_extend(route.stops, line_ids), cost)
                if cand.peak_load > cost.capacity + _EPS:
                    continue
                ddur = cand.duration - route.duration
                tard_delta = (cand.tardiness_at(comps[position] + ddur)
                              - tards[position])
                for later in range(position + 1, len(batch_list)):
                    tard_delta += (batch_list[later].tardiness_at(comps[later] + ddur)
                                   - tards[later])
                split = sum(self._split_delta(c, (picker, position))
                            for c in customers)
                delta = cost.travel_rate * ddur + alpha * tard_delta + split
                if best_delta is None or delta < best_delta - _EPS:
                    best_delta = delta
                    best = (picker, position, cand)
            if not self._may_open_batch(picker):
                continue
            if group_pick > cost.capacity + _EPS or group_ret > cost.capacity + _EPS:
                continue
            cand = Route(self._greedy_extend([], line_ids), cost)
            if cand.peak_load > cost.capacity + _EPS:
                continue
            start = comps[-1] + cost.break_time if comps else 0.0
            tard = cand.tardiness_at(start + cand.duration)
            split = sum(self._split_delta(c, (picker, len(batch_list)))
                        for c in customers)
            delta = cost.travel_rate * cand.duration + alpha * tard + split
            if best_delta is None or delta < best_delta - _EPS:
                best_delta = delta
                best = (picker, len(batch_list), cand)
        if best is None:
            return False
        picker, position, cand = best
        batch_list = self.sol.routes[picker]
        if position == len(batch_list):
            batch_list.append(cand)
        else:
            batch_list[position] = cand
        self._refresh_picker(picker)
        for line_id in line_ids:
            slots = self.customer_batches.setdefault(cost.customer[line_id], {})
            key = (picker, position)
            slots[key] = slots.get(key, 0) + 1
        return True


def cheapest_insert(solution: Solution, line_ids, sort: SortCriterion,
                    crit: InsertionCriterion, instance: Instance,
                    rng: random.Random, penalty_rate: float = 0.0,
                    fill_first: bool = False,
                    capacity_hard: bool = False) -> Solution:
    """Insert loose lines into a copy of ``solution`` one by one.

    Raises InsertionError when a line has no admissible position (all batch
    slots exhausted, or capacity_hard filtering rejects everything).
    """
    cost = costing(instance)
    work = solution.copy()
    planner = InsertionPlanner(work, cost, penalty_rate=penalty_rate,
                               fill_first=fill_first, capacity_hard=capacity_hard)
    ordered = sort_lines(line_ids, sort, cost, rng)
    unplaced = planner.insert_all(ordered, crit, rng)
    if unplaced:
        raise InsertionError(
            f"no admissible position for order lines {sorted(unplaced)}")
    return work


def remove_lines(solution: Solution, line_ids, instance: Instance) -> Solution:
    """Copy of ``solution`` without the given lines; emptied batches vanish."""
    cost = costing(instance)
    doomed = set(line_ids)
    routes = []
    for batch_list in solution.routes:
        kept = []
        for route in batch_list:
            if not doomed.intersection(route.stops):
                kept.append(route)
                continue
            stops = [i for i in route.stops if i not in doomed]
            if stops:
                kept.append(Route(stops, cost))
        routes.append(kept)
    return Solution(routes)


# ---------------------------------------------------------------------------
# S-shape rebuild

def s_shape_order(stop_ids, instance: Instance) -> tuple[list[int], list[int]]:
    """S-shape visiting order over a stop set.

    Aisles with stops are walked in increasing aisle order, alternating the
    traversal direction.  Picks that would push the load over capacity are
    deferred and collected on the way back (reverse order); picks that do
    not fit even then are returned as leftovers.
    """
    cost = costing(instance)
    capacity = cost.capacity
    for i in stop_ids:
        if cost.pick_weight[i] > capacity + _EPS or cost.return_weight[i] > capacity + _EPS:
            raise ValueError(
                f"order_line {i} weighs more than the transport capacity")
    inst = cost.instance
    by_aisle: dict[int, list[int]] = {}
    for i in stop_ids:
        by_aisle.setdefault(inst.order_lines[i].location.aisle, []).append(i)
    sweep = []
    for rank, aisle in enumerate(sorted(by_aisle)):
        ids = sorted(by_aisle[aisle], key=lambda i: (inst.order_lines[i].location.offset, i))
        if rank % 2 == 1:
            ids.reverse()
        sweep.extend(ids)
    order = []
    deferred = []
    load = sum(cost.return_weight[i] for i in stop_ids)
    for i in sweep:
        if cost.pick_weight[i] > 0 and load + cost.pick_weight[i] > capacity + _EPS:
            deferred.append(i)
            continue
        load += cost.pick_weight[i] - cost.return_weight[i]
        order.append(i)
    leftovers = []
    for i in reversed(deferred):
        if load + cost.pick_weight[i] > capacity + _EPS:
            leftovers.append(i)
            continue
        load += cost.pick_weight[i]
        order.append(i)
    return order, leftovers


def s_shape_route(stop_ids, instance: Instance) -> Route:
    """Route over all given stops in S-shape order.

    When no single-pass deferral keeps the load under capacity, the
    unplaceable picks are appended at the end and the route runs over
    capacity; the caller decides how to penalize that.
    """
    order, leftovers = s_shape_order(stop_ids, instance)
    return Route(order + leftovers, costing(instance))


# ---------------------------------------------------------------------------
# Intra-route VND
#
# The passes work on local indices 0..n-1 (n = depot) against a dense
# local distance matrix, so the hot loops run on plain list lookups.

def _relocate_pass(order, D, depot, excess_fn, excess):
    n = len(order)
    ext = [depot] + order + [depot]
    for i in range(n):
        s = ext[i + 1]
        row = D[s]
        gain = D[ext[i]][s] + row[ext[i + 2]] - D[ext[i]][ext[i + 2]]
        if gain <= _EPS:
            continue
        reduced = order[:i] + order[i + 1:]
        red_ext = [depot] + reduced + [depot]
        for j in range(len(reduced) + 1):
            a = red_ext[j]
            b = red_ext[j + 1]
            added = D[a][s] + row[b] - D[a][b]
            if added < gain - _EPS:
                cand = reduced[:j] + [s] + reduced[j:]
                if excess_fn(cand) <= excess + _EPS:
                    return cand
    return None


def _swap_pass(order, D, depot, excess_fn, excess):
    n = len(order)
    ext = [depot] + order + [depot]
    for i in range(n - 1):
        si = ext[i + 1]
        row_i = D[si]
        base_i = D[ext[i]][si] + row_i[ext[i + 2]]
        for j in range(i + 1, n):
            sj = ext[j + 1]
            row_j = D[sj]
            if j == i + 1:
                delta = (D[ext[i]][sj] + row_i[ext[j + 2]]
                         - D[ext[i]][si] - row_j[ext[j + 2]])
            else:
                delta = (D[ext[i]][sj] + row_j[ext[i + 2]]
                         + D[ext[j]][si] + row_i[ext[j + 2]]
                         - base_i
                         - D[ext[j]][sj] - row_j[ext[j + 2]])
            if delta < -_EPS:
                cand = list(order)
                cand[i], cand[j] = cand[j], cand[i]
                if excess_fn(cand) <= excess + _EPS:
                    return cand
    return None


def _two_opt_pass(order, D, depot, excess_fn, excess):
    n = len(order)
    ext = [depot] + order + [depot]
    for i in range(n - 1):
        si = ext[i + 1]
        before = ext[i]
        row_before = D[before]
        row_i = D[si]
        for j in range(i + 1, n):
            sj = ext[j + 1]
            after = ext[j + 2]
            delta = (row_before[sj] + row_i[after]
                     - row_before[si] - D[sj][after])
            if delta < -_EPS:
                cand = order[:i] + order[i:j + 1][::-1] + order[j + 1:]
                if excess_fn(cand) <= excess + _EPS:
                    return cand
    return None


_VND_PASSES = (_relocate_pass, _swap_pass, _two_opt_pass)


def vnd_improve(route: Route, instance: Instance) -> Route:
    """Shorten one route with relocate, then swap, then 2-opt.

    Each neighborhood runs to exhaustion; an improvement in a later
    neighborhood restarts the sequence from relocate.  Moves never worsen
    the capacity excess of the route.  The result is a local optimum for
    all three neighborhoods, so a second application changes nothing.
    """
    cost = costing(instance)
    stops = list(route.stops)
    n = len(stops)
    if n < 2:
        return route
    if cost._matrix is not None:
        rows = cost._matrix
        depot_row = rows[cost.n]
        D = [[rows[a][b] for b in stops] + [rows[a][cost.n]] for a in stops]
        D.append([depot_row[b] for b in stops] + [0.0])
    else:
        dist = cost.dist
        pts = stops + [cost.n]
        D = [[dist(a, b) for b in pts] for a in pts]
    pick = [cost.pick_weight[i] for i in stops]
    ret = [cost.return_weight[i] for i in stops]
    start_load = sum(ret)
    capacity = cost.capacity

    def excess_fn(order):
        load = start_load
        peak = load
        for idx in order:
            load += pick[idx] - ret[idx]
            if load > peak:
                peak = load
        over = peak - capacity
        return over if over > 0.0 else 0.0

    order = list(range(n))
    level = 0
    changed = False
    while level < len(_VND_PASSES):
        excess = excess_fn(order)
        better = _VND_PASSES[level](order, D, n, excess_fn, excess)
        if better is not None:
            order = better
            changed = True
            if level > 0:
                level = 0
            continue
        level += 1
    if not changed:
        return route
    return Route([stops[i] for i in order], cost)
