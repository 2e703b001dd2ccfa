"""Exact improvement components and a tiny-instance oracle.

Batch and schedule pools accumulate the distinct picking routes and picker
batch sequences seen during the search.  Two exact repairs use them at
synchronization points:

* ``mip_op1`` keeps the current batches as they are and redistributes them
  over the pickers with the tardiness-optimal assignment and order, found
  by dynamic programming over batch subsets.  Travel, split-up and
  capacity terms do not depend on the assignment, so only tardiness moves.
* ``mip_op2`` pins a random share of the current batches and rebuilds the
  remaining order lines as an exact cover over pooled batches, pricing
  travel, split-up, tardiness and the capacity penalty.

``schedule_pool_select`` picks a cost-minimal set of pooled schedules that
partitions all order lines, and ``brute_force_oracle`` enumerates every
batching, routing, assignment and sequencing of a very small instance.
All of these are exponential by nature; the oracle refuses instances
beyond its limits and ``mip_op2`` works within a node budget.
"""

from __future__ import annotations

import itertools
import math
import random
from collections import OrderedDict
from dataclasses import dataclass

from .instance import Instance, ParseError
from .routing import vnd_improve
from .solution import (
    CostBreakdown, Route, Solution, costing, evaluate, horizon_overrun,
)

_EPS = 1e-9


# ---------------------------------------------------------------------------
# Pools

@dataclass(frozen=True, eq=False)
class PooledBatch:
    """One distinct batch: a routing-improved stop sequence plus its facts."""

    key: tuple
    route: Route
    lines: frozenset
    customers: tuple
    travel_cost: float
    peak_load: float


class BatchPool:
    """Deduplicated batch store with least-recently-used eviction.

    Every added route is first canonicalized by the intra-route VND, so
    reordered duplicates of the same stop set usually collapse onto one
    entry and each stored route is locally optimal.
    """

    def __init__(self, instance: Instance, limit: int = 100_000):
        self.instance = instance
        self.cost = costing(instance)
        self.limit = int(limit)
        self.entries: OrderedDict[tuple, PooledBatch] = OrderedDict()
        self._canonical: dict[tuple, tuple] = {}

    def __len__(self) -> int:
        return len(self.entries)

    def __iter__(self):
        return iter(self.entries.values())

    def add(self, route: Route) -> PooledBatch:
        raw = tuple(route.stops)
        key = self._canonical.get(raw)
        improved = None
        if key is None:
            improved = vnd_improve(route, self.instance)
            key = tuple(improved.stops)
            if len(self._canonical) >= 8 * self.limit:
                self._canonical.clear()
            self._canonical[raw] = key
            self._canonical[key] = key
        entry = self.entries.get(key)
        if entry is not None:
            self.entries.move_to_end(key)
            return entry
        if improved is None or tuple(improved.stops) != key:
            improved = Route(list(key), self.cost)
        cost = self.cost
        entry = PooledBatch(
            key=key,
            route=improved,
            lines=frozenset(key),
            customers=tuple(sorted({cost.customer[i] for i in key})),
            travel_cost=cost.travel_rate * improved.duration,
            peak_load=improved.peak_load,
        )
        self.entries[key] = entry
        if len(self.entries) > self.limit:
            self.entries.popitem(last=False)
        return entry

    def dump(self) -> dict:
        return {"batches": [list(key) for key in self.entries]}

    @classmethod
    def restore(cls, instance: Instance, data: dict, limit: int = 100_000):
        pool = cls(instance, limit=limit)
        batches = data.get("batches")
        if batches is None:
            raise ParseError('pool dump: missing field "batches"')
        for stops in batches:
            pool.add(_route_from_stops(stops, pool.cost))
        return pool


@dataclass(frozen=True, eq=False)
class PooledSchedule:
    """One distinct picker schedule: an ordered batch sequence.

    ``cost`` is the stand-alone travel plus tardiness of running exactly
    this sequence from time zero; split-up interactions with other
    schedules are priced at selection time via ``customer_counts``.
    """

    key: tuple
    batches: tuple
    lines: frozenset
    cost: float
    customer_counts: dict
    makespan: float
    max_peak: float


class SchedulePool:
    """Deduplicated store of picker schedules over canonical batches."""

    def __init__(self, instance: Instance, limit: int = 100_000,
                 batch_pool: BatchPool | None = None):
        self.instance = instance
        self.cost = costing(instance)
        self.limit = int(limit)
        self.batches = batch_pool if batch_pool is not None \
            else BatchPool(instance, limit=limit)
        self.entries: OrderedDict[tuple, PooledSchedule] = OrderedDict()

    def __len__(self) -> int:
        return len(self.entries)

    def __iter__(self):
        return iter(self.entries.values())

    def add(self, routes) -> PooledSchedule:
        pooled = [self.batches.add(route) for route in routes]
        key = tuple(pb.key for pb in pooled)
        entry = self.entries.get(key)
        if entry is not None:
            self.entries.move_to_end(key)
            return entry
        cost = self.cost
        clock = 0.0
        tard = 0.0
        travel = 0.0
        peak = 0.0
        counts: dict[int, int] = {}
        lines: set[int] = set()
        for idx, pb in enumerate(pooled):
            if idx > 0:
                clock += cost.break_time
            clock += pb.route.duration
            tard += pb.route.tardiness_at(clock)
            travel += pb.travel_cost
            peak = max(peak, pb.peak_load)
            lines.update(pb.lines)
            for customer in pb.customers:
                counts[customer] = counts.get(customer, 0) + 1
        entry = PooledSchedule(
            key=key,
            batches=tuple(pooled),
            lines=frozenset(lines),
            cost=travel + cost.tardiness_rate * tard,
            customer_counts=counts,
            makespan=clock,
            max_peak=peak,
        )
        self.entries[key] = entry
        if len(self.entries) > self.limit:
            self.entries.popitem(last=False)
        return entry

    def dump(self) -> dict:
        return {"schedules": [[list(k) for k in key] for key in self.entries]}

    @classmethod
    def restore(cls, instance: Instance, data: dict, limit: int = 100_000,
                batch_pool: BatchPool | None = None):
        pool = cls(instance, limit=limit, batch_pool=batch_pool)
        schedules = data.get("schedules")
        if schedules is None:
            raise ParseError('pool dump: missing field "schedules"')
        for sched in schedules:
            pool.add([_route_from_stops(stops, pool.cost) for stops in sched])
        return pool


def _route_from_stops(stops, cost) -> Route:
    if not stops:
        raise ParseError("pool dump: empty batch")
    for i in stops:
        if not isinstance(i, int) or not 0 <= i < cost.n:
            raise ParseError(f"pool dump: unknown order line {i!r}")
    return Route(list(stops), cost)


# ---------------------------------------------------------------------------
# Exact reassignment of the current batches (repair 1)

def mip_op1(solution: Solution, instance: Instance) -> Solution:
    """Tardiness-optimal assignment and order of the solution's batches.

    The batches themselves stay untouched, so travel, split-up and
    capacity terms are constants and only tardiness is optimized, by a
    subset DP per picker sequence and a partition DP over pickers.  The
    input layout is part of the search space, so the result is never
    worse.  Work grows like 3^k in the number of batches k.
    """
    cost = costing(instance)
    routes = [route for _, _, route in solution.all_routes()]
    k = len(routes)
    if k == 0:
        return solution
    if k > 18:
        raise ValueError(f"{k} batches is beyond the subset DP size limit")
    num_pickers = cost.num_pickers
    max_batches = cost.max_batches
    break_time = cost.break_time
    enforce_horizon = horizon_overrun(solution, cost) <= _EPS

    full = (1 << k) - 1
    durations = [r.duration for r in routes]
    dur_sum = [0.0] * (full + 1)
    bit_count = [0] * (full + 1)
    for mask in range(1, full + 1):
        low = mask & -mask
        b = low.bit_length() - 1
        dur_sum[mask] = dur_sum[mask ^ low] + durations[b]
        bit_count[mask] = bit_count[mask ^ low] + 1

    # seq_tard[S]: minimal total tardiness of one picker running exactly the
    # batches in S, over all orders; the completion of the last batch only
    # depends on S, so the DP branches on which batch finishes last.
    inf = math.inf
    seq_tard = [inf] * (full + 1)
    seq_last = [-1] * (full + 1)
    seq_tard[0] = 0.0
    for mask in range(1, full + 1):
        completion = dur_sum[mask] + (bit_count[mask] - 1) * break_time
        rest = mask
        while rest:
            low = rest & -rest
            b = low.bit_length() - 1
            rest ^= low
            cand = seq_tard[mask ^ low] + routes[b].tardiness_at(completion)
            if cand < seq_tard[mask] - 1e-12:
                seq_tard[mask] = cand
                seq_last[mask] = b

    def part_ok(mask: int) -> bool:
        if bit_count[mask] > max_batches:
            return False
        if enforce_horizon:
            makespan = dur_sum[mask] + (bit_count[mask] - 1) * break_time
            if makespan > cost.horizon + _EPS:
                return False
        return True

    # partition DP: split all batches into at most num_pickers admissible
    # parts; the part containing the lowest remaining batch is branched on
    # so permutations of identical pickers are not re-counted.
    memo: dict[tuple, tuple | None] = {}

    def split(mask: int, parts_left: int):
        if mask == 0:
            return (0.0, None, None)
        if parts_left == 0:
            return None
        state = (mask, parts_left)
        if state in memo:
            return memo[state]
        low = mask & -mask
        rest_bits = mask ^ low
        best = None
        sub = rest_bits
        while True:
            part = sub | low
            if part_ok(part) and seq_tard[part] < inf:
                tail = split(mask ^ part, parts_left - 1)
                if tail is not None:
                    total = seq_tard[part] + tail[0]
                    if best is None or total < best[0] - 1e-12:
                        best = (total, part, tail)
            if sub == 0:
                break
            sub = (sub - 1) & rest_bits
        memo[state] = best
        return best

    result = split(full, num_pickers)
    if result is None:
        return solution

    parts = []
    node = result
    while node[1] is not None:
        parts.append(node[1])
        node = node[2]
    new_routes = [[] for _ in range(num_pickers)]
    for picker, part in enumerate(parts):
        order = []
        mask = part
        while mask:
            b = seq_last[mask]
            order.append(routes[b])
            mask ^= 1 << b
        order.reverse()
        new_routes[picker] = order
    return Solution(new_routes)


# ---------------------------------------------------------------------------
# Pin-and-rebuild over the batch pool (repair 2)

def mip_op2(solution: Solution, instance: Instance, pool: BatchPool,
            fix_fraction: float = 0.5, repeats_fraction: float = 0.2,
            rng: random.Random | None = None, penalty_rate: float = 0.0,
            max_batches: int = 12,
            node_budget: int = 50_000) -> Solution | None:
    """Rebuild part of the solution as an exact cover over pooled batches.

    Per repeat a random share of the current batches is pinned (keeping
    picker and relative order); the other order lines must be covered by
    disjoint pooled batches.  Covers are enumerated by branching on the
    lowest uncovered line with an admissible travel bound; each complete
    cover is priced exactly through an assignment DP that interleaves the
    new batches with the pinned ones.  The current batches enter the pool
    first, so the identity rebuild is always available and the result is
    never worse.  Returns None when no repeat found an improvement.
    """
    cost = costing(instance)
    rng = rng or random.Random(0)
    slots = cost.num_pickers * cost.max_batches
    repeats = max(1, round(repeats_fraction * slots))
    current = solution
    z_cur = evaluate(current, instance, penalty_rate).total
    horizon_limit = cost.horizon if horizon_overrun(current, cost) <= _EPS else None
    improved = False
    for _ in range(repeats):
        for _, _, route in current.all_routes():
            pool.add(route)
        positions = [(e, h) for e, batch_list in enumerate(current.routes)
                     for h in range(len(batch_list))]
        if len(positions) < 2:
            break
        pin_count = min(len(positions), round(fix_fraction * len(positions)))
        pinned_pos = set(rng.sample(positions, pin_count))
        pinned_by_picker = []
        free_ids = []
        for e, batch_list in enumerate(current.routes):
            kept = []
            for h, route in enumerate(batch_list):
                if (e, h) in pinned_pos:
                    kept.append(route)
                else:
                    free_ids.extend(route.stops)
            pinned_by_picker.append(kept)
        if not free_ids:
            continue
        free_lines = frozenset(free_ids)
        columns = [pb for pb in pool.entries.values()
                   if pb.lines <= free_lines
                   and pb.peak_load <= cost.capacity + _EPS]
        new_cap = min(slots - pin_count, max_batches, 14)
        candidate = _cover_and_assign(columns, free_lines, pinned_by_picker,
                                      cost, penalty_rate, horizon_limit,
                                      z_cur, new_cap, node_budget)
        if candidate is None:
            continue
        z_new = evaluate(candidate, instance, penalty_rate).total
        if z_new < z_cur - _EPS:
            current = candidate
            z_cur = z_new
            improved = True
    return current if improved else None


def _cover_and_assign(columns, free_lines, pinned_by_picker, cost,
                      penalty_rate, horizon_limit, z_cut, new_cap,
                      node_budget):
    """Best solution over exact covers of ``free_lines``, or None.

    Only covers whose priced total beats ``z_cut`` are kept.  Travel and
    split-up accumulate exactly during the cover search; tardiness is
    added by the assignment DP once a cover is complete.
    """
    beta = cost.splitup_cost
    by_line = {i: [] for i in sorted(free_lines)}
    for pb in columns:
        for i in pb.lines:
            by_line[i].append(pb)
    min_share = {}
    for i, cols in by_line.items():
        if not cols:
            return None
        cols.sort(key=lambda pb: (pb.travel_cost / len(pb.lines), pb.key))
        top = cols[0]
        min_share[i] = top.travel_cost / len(top.lines)

    pinned_flat = [r for batch_list in pinned_by_picker for r in batch_list]
    travel_const = cost.travel_rate * sum(r.duration for r in pinned_flat)
    pinned_pen = penalty_rate * sum(r.excess(cost.capacity)
                                    for r in pinned_flat)
    counts: dict[int, int] = {}
    for route in pinned_flat:
        for customer in {cost.customer[i] for i in route.stops}:
            counts[customer] = counts.get(customer, 0) + 1
    base_split = beta * sum(max(0, c - 1) for c in counts.values())

    best = {"total": z_cut, "solution": None}
    state = {"nodes": 0}
    chain: list = []

    def dfs(uncovered, travel_acc, split_acc):
        state["nodes"] += 1
        if state["nodes"] > node_budget:
            return
        if not uncovered:
            assigned = _assign_cover(pinned_by_picker, [pb.route for pb in chain],
                                     cost, horizon_limit)
            if assigned is None:
                return
            tard, per_picker = assigned
            new_travel = travel_const + travel_acc
            total = (new_travel + split_acc + pinned_pen
                     + cost.tardiness_rate * tard)
            if total < best["total"] - _EPS:
                best["total"] = total
                best["solution"] = Solution(per_picker)
            return
        remaining = sum(min_share[i] for i in uncovered)
        if (travel_const + travel_acc + split_acc + pinned_pen + remaining
                >= best["total"] - _EPS):
            return
        if len(chain) >= new_cap:
            return
        line = min(uncovered)
        for pb in by_line[line]:
            if not pb.lines <= uncovered:
                continue
            inc = 0.0
            for customer in pb.customers:
                if counts.get(customer, 0) > 0:
                    inc += beta
                counts[customer] = counts.get(customer, 0) + 1
            chain.append(pb)
            dfs(uncovered - pb.lines, travel_acc + pb.travel_cost,
                split_acc + inc)
            chain.pop()
            for customer in pb.customers:
                counts[customer] -= 1

    dfs(free_lines, 0.0, base_split)
    return best["solution"]


def _assign_cover(pinned_by_picker, new_routes, cost, horizon_limit):
    """Distribute the new routes over the pickers, pinned orders fixed.

    Exact two-level DP: per picker an interleave DP over (pinned placed,
    new subset placed) states, whose completion times only depend on the
    state; over pickers a subset DP on the new batches.  Returns the
    minimal total raw tardiness and the per-picker route lists, or None
    when no arrangement respects the batch count (and horizon) limits.
    """
    num_pickers = len(pinned_by_picker)
    nn = len(new_routes)
    full = (1 << nn) - 1
    max_batches = cost.max_batches
    break_time = cost.break_time
    inter_memo: dict[tuple, tuple | None] = {}

    def interleave(picker, mask):
        key = (picker, mask)
        if key in inter_memo:
            return inter_memo[key]
        pinned = pinned_by_picker[picker]
        num_pinned = len(pinned)
        members = [j for j in range(nn) if mask >> j & 1]
        total = num_pinned + len(members)
        if total > max_batches:
            inter_memo[key] = None
            return None
        levels = [dict() for _ in range(total + 1)]
        levels[0][(0, 0)] = (0.0, 0.0, None, None)
        for placed in range(total):
            for (i, sub), (tard, clock, _, _) in levels[placed].items():
                start = clock + break_time if placed else 0.0
                nxt = levels[placed + 1]
                if i < num_pinned:
                    route = pinned[i]
                    completion = start + route.duration
                    cand = tard + route.tardiness_at(completion)
                    key2 = (i + 1, sub)
                    old = nxt.get(key2)
                    if old is None or cand < old[0] - 1e-12:
                        nxt[key2] = (cand, completion, (i, sub), ("p", i))
                for j in members:
                    if sub >> j & 1:
                        continue
                    route = new_routes[j]
                    completion = start + route.duration
                    cand = tard + route.tardiness_at(completion)
                    key2 = (i, sub | (1 << j))
                    old = nxt.get(key2)
                    if old is None or cand < old[0] - 1e-12:
                        nxt[key2] = (cand, completion, (i, sub), ("n", j))
        final = levels[total].get((num_pinned, mask))
        if final is None or (horizon_limit is not None
                             and final[1] > horizon_limit + _EPS):
            inter_memo[key] = None
            return None
        tokens = []
        level = total
        node = final
        while node[2] is not None:
            tokens.append(node[3])
            level -= 1
            node = levels[level][node[2]]
        tokens.reverse()
        result = (final[0], tokens)
        inter_memo[key] = result
        return result

    g_memo: dict[tuple, tuple | None] = {}

    def distribute(picker, mask):
        if picker == num_pickers:
            return (0.0, None, None) if mask == 0 else None
        state = (picker, mask)
        if state in g_memo:
            return g_memo[state]
        best = None
        sub = mask
        while True:
            here = interleave(picker, sub)
            if here is not None:
                tail = distribute(picker + 1, mask ^ sub)
                if tail is not None:
                    total = here[0] + tail[0]
                    if best is None or total < best[0] - 1e-12:
                        best = (total, sub, tail)
            if sub == 0:
                break
            sub = (sub - 1) & mask
        g_memo[state] = best
        return best

    result = distribute(0, full)
    if result is None:
        return None
    per_picker = []
    node = result
    for picker in range(num_pickers):
        sub = node[1]
        tokens = interleave(picker, sub)[1]
        batch_list = []
        for kind, idx in tokens:
            if kind == "p":
                batch_list.append(pinned_by_picker[picker][idx])
            else:
                batch_list.append(new_routes[idx])
        per_picker.append(batch_list)
        node = node[2]
    return result[0], per_picker


# ---------------------------------------------------------------------------
# Schedule selection

def schedule_pool_select(pool: SchedulePool, instance: Instance,
                         max_schedules: int | None = None) -> Solution | None:
    """Cost-minimal set of pooled schedules that partitions all lines.

    At most one schedule per picker; capacity- or horizon-violating pool
    entries are skipped.  Split-up costs are priced across the chosen
    schedules.  Returns None when the pool cannot cover every order line.
    """
    cost = costing(instance)
    num_pickers = cost.num_pickers
    limit = min(max_schedules, num_pickers) if max_schedules else num_pickers
    beta = cost.splitup_cost
    columns = [s for s in pool.entries.values()
               if s.max_peak <= cost.capacity + _EPS
               and s.makespan <= cost.horizon + _EPS
               and len(s.batches) <= cost.max_batches]
    all_lines = frozenset(range(cost.n))
    by_line = {i: [] for i in range(cost.n)}
    for s in columns:
        for i in s.lines:
            by_line[i].append(s)
    min_share = {}
    for i, cols in by_line.items():
        if not cols:
            return None
        cols.sort(key=lambda s: (s.cost / len(s.lines), s.key))
        min_share[i] = cols[0].cost / len(cols[0].lines)

    best = {"total": math.inf, "chosen": None}
    counts: dict[int, int] = {}
    chain: list = []

    def dfs(uncovered, acc, split_acc):
        if not uncovered:
            total = acc + split_acc
            if total < best["total"] - _EPS:
                best["total"] = total
                best["chosen"] = list(chain)
            return
        if len(chain) >= limit:
            return
        bound = acc + split_acc + sum(min_share[i] for i in uncovered)
        if bound >= best["total"] - _EPS:
            return
        line = min(uncovered)
        for s in by_line[line]:
            if not s.lines <= uncovered:
                continue
            inc = 0.0
            for customer, k in s.customer_counts.items():
                seen = counts.get(customer, 0)
                inc += beta * (k if seen else k - 1)
                counts[customer] = seen + k
            chain.append(s)
            dfs(uncovered - s.lines, acc + s.cost, split_acc + inc)
            chain.pop()
            for customer, k in s.customer_counts.items():
                counts[customer] -= k
        return

    dfs(all_lines, 0.0, 0.0)
    if best["chosen"] is None:
        return None
    routes = [[pb.route for pb in s.batches] for s in best["chosen"]]
    while len(routes) < num_pickers:
        routes.append([])
    return Solution(routes)


# ---------------------------------------------------------------------------
# Brute force oracle

@dataclass(frozen=True)
class OracleLimits:
    """Hard size caps for full enumeration."""

    max_lines: int = 8
    max_pickers: int = 2
    max_batches_per_picker: int = 2


class OracleSizeError(ValueError):
    """Instance too large for full enumeration."""


def brute_force_oracle(instance: Instance, limits: OracleLimits | None = None
                       ) -> tuple[Solution, CostBreakdown]:
    """Provably optimal solution of a very small instance.

    Enumerates every partition of the order lines into batches, every
    batch-to-picker assignment and order, and every visiting sequence per
    batch, subject to capacity, batch count and horizon limits.  Raises
    OracleSizeError beyond the configured limits and ValueError when no
    feasible solution exists.
    """
    limits = limits or OracleLimits()
    cost = costing(instance)
    n = cost.n
    if n < 1:
        raise ValueError("instance has no order lines")
    if (n > limits.max_lines or cost.num_pickers > limits.max_pickers
            or cost.max_batches > limits.max_batches_per_picker):
        raise OracleSizeError(
            f"enumeration limited to {limits.max_lines} lines, "
            f"{limits.max_pickers} pickers and "
            f"{limits.max_batches_per_picker} batches per picker")
    num_pickers = cost.num_pickers
    max_batches = cost.max_batches
    pick = cost.pick_weight
    ret = cost.return_weight
    dist = cost.dist
    depot = cost.n

    # cheapest capacity-feasible visiting order per line subset; a shorter
    # route is never worse because one batch's completion bounds all its
    # lines and later batches alike
    best_route: dict[int, Route | None] = {}
    for mask in range(1, 1 << n):
        ids = [i for i in range(n) if mask >> i & 1]
        start_load = sum(ret[i] for i in ids)
        found = None
        found_dist = None
        for perm in itertools.permutations(ids):
            load = start_load
            peak = load
            feasible = True
            for i in perm:
                load += pick[i] - ret[i]
                if load > peak:
                    peak = load
            if peak > cost.capacity + _EPS:
                continue
            d = dist(depot, perm[0])
            for a, b in zip(perm, perm[1:]):
                d += dist(a, b)
            d += dist(perm[-1], depot)
            if found_dist is None or d < found_dist - _EPS:
                found = perm
                found_dist = d
        best_route[mask] = Route(list(found), cost) if found else None

    best_total = math.inf
    best_sol = None
    for blocks in _set_partitions(list(range(n)), num_pickers * max_batches):
        routes = []
        feasible = True
        for block in blocks:
            mask = 0
            for i in block:
                mask |= 1 << i
            route = best_route[mask]
            if route is None:
                feasible = False
                break
            routes.append(route)
        if not feasible:
            continue
        block_of = {}
        for idx, block in enumerate(blocks):
            for i in block:
                block_of[i] = idx
        split_total = 0.0
        for lines in cost.customer_lines.values():
            distinct = len({block_of[i] for i in lines})
            split_total += cost.splitup_cost * max(0, distinct - 1)
        travel_total = cost.travel_rate * sum(r.duration for r in routes)
        k = len(routes)
        for assignment in itertools.product(range(num_pickers), repeat=k):
            per_picker = [[] for _ in range(num_pickers)]
            overfull = False
            for idx, picker in enumerate(assignment):
                per_picker[picker].append(idx)
                if len(per_picker[picker]) > max_batches:
                    overfull = True
                    break
            if overfull:
                continue
            for orders in itertools.product(
                    *[itertools.permutations(lst) for lst in per_picker]):
                tard = 0.0
                in_horizon = True
                for picker in range(num_pickers):
                    clock = 0.0
                    for pos, idx in enumerate(orders[picker]):
                        if pos > 0:
                            clock += cost.break_time
                        clock += routes[idx].duration
                        tard += routes[idx].tardiness_at(clock)
                    if clock > cost.horizon + _EPS:
                        in_horizon = False
                        break
                if not in_horizon:
                    continue
                total = travel_total + split_total + cost.tardiness_rate * tard
                if total < best_total - 1e-12:
                    best_total = total
                    best_sol = Solution([[routes[idx] for idx in orders[picker]]
                                         for picker in range(num_pickers)])
    if best_sol is None:
        raise ValueError("no feasible solution within capacity and horizon")
    return best_sol, evaluate(best_sol, instance)


def _set_partitions(ids, max_blocks):
    """All partitions of ``ids`` into at most ``max_blocks`` blocks."""
    n = len(ids)
    if n == 0:
        yield []
        return
    assignment = [0] * n

    def rec(i, used):
        if i == n:
            blocks = [[] for _ in range(used)]
            for idx, b in enumerate(assignment):
                blocks[b].append(ids[idx])
            yield blocks
            return
        for b in range(used):
            assignment[i] = b
            yield from rec(i + 1, used)
        if used < max_blocks:
            assignment[i] = used
            yield from rec(i + 1, used + 1)

    yield from rec(1, 1)
