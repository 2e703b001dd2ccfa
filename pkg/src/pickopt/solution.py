"""Solutions and their valuation.

A solution assigns every order line to exactly one batch (route), batches
to picker positions.  Each picker works through its batches in position
order with a fixed break between consecutive batches; the first batch
starts at time zero.  A route starts and ends at the depot and carries all
its return lines from the start, so the load profile along the route rises
at picks and falls at returns.

The objective decomposes into travel cost (route time including pick
times, priced per second), tardiness cost (completion past the deadline,
per line or per product), split-up cost (extra batches per customer
order), and an optional penalty on capacity excess used while searching.
"""

from __future__ import annotations

import json
from bisect import bisect_right
from dataclasses import dataclass
from itertools import accumulate
from pathlib import Path

import numpy as np

from .instance import Instance, ParseError
from .warehouse import distance

# Keep a dense point-to-point distance matrix as nested lists (fastest
# scalar lookup) up to this many entries; larger instances fall back to
# on-demand computation.
_MATRIX_LIMIT = 4_000_000


class Costing:
    """Precomputed per-line data and distances for one instance.

    Index ``n`` (one past the last line id) stands for the depot.
    """

    def __init__(self, instance: Instance):
        self.instance = instance
        layout = instance.layout
        params = instance.params
        n = len(instance.order_lines)
        self.n = n
        self.speed = layout.travel_speed
        self.pick_time = params.pick_time
        self.travel_rate = params.travel_cost_rate
        self.tardiness_rate = params.tardiness_rate
        self.splitup_cost = params.splitup_cost
        self.capacity = params.capacity
        self.break_time = params.break_time
        self.horizon = params.horizon
        self.num_pickers = params.num_pickers
        self.max_batches = params.max_batches_per_picker

        aisle = np.empty(n + 1, dtype=np.float64)
        offset = np.empty(n + 1, dtype=np.float64)
        for line in instance.order_lines:
            aisle[line.id] = line.location.aisle
            offset[line.id] = line.location.offset
        aisle[n] = layout.depot.aisle
        offset[n] = layout.depot.offset
        self._aisle = aisle
        self._offset = offset
        self._aisle_width = layout.aisle_width
        self._aisle_length = layout.aisle_length

        self._matrix = None
        if (n + 1) * (n + 1) <= _MATRIX_LIMIT:
            across = np.abs(aisle[:, None] - aisle[None, :]) * layout.aisle_width
            front = offset[:, None] + offset[None, :]
            around = np.minimum(front, 2.0 * layout.aisle_length - front)
            same = np.abs(offset[:, None] - offset[None, :])
            mat = np.where(aisle[:, None] == aisle[None, :], same, across + around)
            self._matrix = mat.tolist()

        self.aisle = [line.location.aisle for line in instance.order_lines]
        self.deadline = [line.deadline for line in instance.order_lines]
        self.customer = [line.customer for line in instance.order_lines]
        self.line_weight = [line.weight for line in instance.order_lines]
        self.pick_weight = [line.unit_weight * line.pick_quantity
                            for line in instance.order_lines]
        self.return_weight = [line.unit_weight * line.return_quantity
                              for line in instance.order_lines]
        if params.tardiness_per_product:
            self.tardiness_weight = [float(line.quantity) for line in instance.order_lines]
        else:
            self.tardiness_weight = [1.0] * n
        self.customer_lines = {c.id: list(c.order_lines) for c in instance.customers}

    def dist(self, i: int, j: int) -> float:
        """Distance between two line ids; index ``n`` is the depot."""
        if self._matrix is not None:
            return self._matrix[i][j]
        if self._aisle[i] == self._aisle[j]:
            return abs(self._offset[i] - self._offset[j])
        front = self._offset[i] + self._offset[j]
        around = min(front, 2.0 * self._aisle_length - front)
        return abs(self._aisle[i] - self._aisle[j]) * self._aisle_width + around


def costing(instance: Instance) -> Costing:
    """Return the memoized Costing for ``instance``."""
    cached = getattr(instance, "_costing", None)
    if cached is None:
        cached = Costing(instance)
        instance._costing = cached
    return cached


class Route:
    """One batch: an ordered depot-to-depot tour over order lines.

    Routes are immutable once built; edits make new routes.  Cached fields
    keep the evaluator and the insertion scans cheap.
    """

    __slots__ = ("stops", "distance", "duration", "pick_load", "return_load",
                 "peak_load", "_dl", "_wsum", "_wdsum")

    def __init__(self, stops, cost: Costing):
        stops = tuple(stops)
        if not stops:
            raise ValueError("a route must visit at least one order line")
        self.stops = stops
        depot = cost.n
        dist = cost.dist
        total = dist(depot, stops[0])
        for a, b in zip(stops, stops[1:]):
            total += dist(a, b)
        total += dist(stops[-1], depot)
        self.distance = total
        self.duration = total / cost.speed + cost.pick_time * len(stops)
        pick = cost.pick_weight
        ret = cost.return_weight
        self.pick_load = sum(pick[i] for i in stops)
        self.return_load = sum(ret[i] for i in stops)
        load = self.return_load
        peak = load
        for i in stops:
            load += pick[i] - ret[i]
            if load > peak:
                peak = load
        self.peak_load = peak
        # Tardiness of the whole batch completing at time t is a piecewise
        # linear function of t; keep sorted deadlines plus prefix sums so
        # the evaluator and insertion deltas can query it in O(log k).
        pairs = sorted((cost.deadline[i], cost.tardiness_weight[i]) for i in stops)
        self._dl = [p[0] for p in pairs]
        self._wsum = list(accumulate((p[1] for p in pairs), initial=0.0))
        self._wdsum = list(accumulate((p[0] * p[1] for p in pairs), initial=0.0))

    def tardiness_at(self, completion: float) -> float:
        """Weighted tardiness of all lines if the batch completes at ``completion``."""
        idx = bisect_right(self._dl, completion)
        if idx == 0:
            return 0.0
        return completion * self._wsum[idx] - self._wdsum[idx]

    def excess(self, capacity: float) -> float:
        over = self.peak_load - capacity
        return over if over > 0.0 else 0.0

    def __repr__(self):
        return f"Route({list(self.stops)})"


class Solution:
    """Per-picker lists of routes in batch position order (no gaps)."""

    __slots__ = ("routes",)

    def __init__(self, routes):
        self.routes = routes

    @staticmethod
    def empty(num_pickers: int) -> "Solution":
        return Solution([[] for _ in range(num_pickers)])

    def copy(self) -> "Solution":
        return Solution([list(batch_list) for batch_list in self.routes])

    def all_routes(self):
        for picker, batch_list in enumerate(self.routes):
            for position, route in enumerate(batch_list):
                yield picker, position, route

    def line_ids(self) -> list[int]:
        out = []
        for _, _, route in self.all_routes():
            out.extend(route.stops)
        return out

    def assignment(self) -> dict[int, tuple[int, int]]:
        """Map line id to its (picker, batch position)."""
        out = {}
        for picker, position, route in self.all_routes():
            for line_id in route.stops:
                out[line_id] = (picker, position)
        return out

    def num_batches(self) -> int:
        return sum(len(batch_list) for batch_list in self.routes)


@dataclass(frozen=True)
class CostBreakdown:
    travel: float
    tardiness: float
    splitup: float
    capacity_penalty: float = 0.0

    @property
    def total(self) -> float:
        return self.travel + self.tardiness + self.splitup + self.capacity_penalty


@dataclass(frozen=True)
class Schedule:
    """Computed timing view of one picker's batch sequence."""

    picker: int
    routes: list[Route]
    starts: list[float]
    completions: list[float]


def batch_times(solution: Solution, cost: Costing) -> list[list[tuple[float, float]]]:
    """Start and completion time of every batch, per picker.

    The first batch starts at zero; each later batch starts a break after
    the previous one completes.
    """
    out = []
    for batch_list in solution.routes:
        times = []
        clock = 0.0
        for idx, route in enumerate(batch_list):
            if idx > 0:
                clock += cost.break_time
            start = clock
            clock += route.duration
            times.append((start, clock))
        out.append(times)
    return out


def schedules(solution: Solution, instance: Instance) -> list[Schedule]:
    cost = costing(instance)
    out = []
    for picker, times in enumerate(batch_times(solution, cost)):
        out.append(Schedule(
            picker=picker,
            routes=list(solution.routes[picker]),
            starts=[t[0] for t in times],
            completions=[t[1] for t in times],
        ))
    return out


def completion_by_line(solution: Solution, cost: Costing) -> dict[int, float]:
    out = {}
    for picker, batch_list in enumerate(solution.routes):
        clock = 0.0
        for idx, route in enumerate(batch_list):
            if idx > 0:
                clock += cost.break_time
            clock += route.duration
            for line_id in route.stops:
                out[line_id] = clock
    return out


def _check_coverage(solution: Solution, cost: Costing) -> list[str]:
    seen = {}
    problems = []
    for picker, position, route in solution.all_routes():
        for line_id in route.stops:
            if line_id in seen:
                problems.append(
                    f"order_line {line_id}: assigned more than once "
                    f"(picker {seen[line_id][0]} batch {seen[line_id][1]} and "
                    f"picker {picker} batch {position})")
            seen[line_id] = (picker, position)
            if not 0 <= line_id < cost.n:
                problems.append(f"order_line {line_id}: unknown id")
    for line_id in range(cost.n):
        if line_id not in seen:
            problems.append(f"order_line {line_id}: not assigned to any batch")
    return problems


def splitup_counts(solution: Solution, instance: Instance) -> dict[int, int]:
    """Extra batches used per customer order (0 when all lines share one batch)."""
    cost = costing(instance)
    batches_of: dict[int, set] = {c: set() for c in cost.customer_lines}
    for picker, position, route in solution.all_routes():
        for line_id in route.stops:
            batches_of[cost.customer[line_id]].add((picker, position))
    return {c: max(0, len(b) - 1) for c, b in batches_of.items()}


def evaluate(solution: Solution, instance: Instance,
             penalty_rate: float = 0.0) -> CostBreakdown:
    """Value a complete solution.

    Raises ValueError when a line is missing or assigned twice; use
    check_feasibility to inspect such solutions instead.
    """
    cost = costing(instance)
    problems = _check_coverage(solution, cost)
    if problems:
        raise ValueError(problems[0])
    travel_seconds = 0.0
    tardiness = 0.0
    excess = 0.0
    for batch_list in solution.routes:
        clock = 0.0
        for idx, route in enumerate(batch_list):
            if idx > 0:
                clock += cost.break_time
            clock += route.duration
            travel_seconds += route.duration
            tardiness += route.tardiness_at(clock)
            excess += route.excess(cost.capacity)
    split_extra = sum(splitup_counts(solution, instance).values())
    return CostBreakdown(
        travel=cost.travel_rate * travel_seconds,
        tardiness=cost.tardiness_rate * tardiness,
        splitup=cost.splitup_cost * split_extra,
        capacity_penalty=penalty_rate * excess,
    )


def peak_load(route, instance: Instance) -> float:
    """Highest carried weight along a route, the start load included."""
    if isinstance(route, Route):
        return route.peak_load
    cost = costing(instance)
    load = sum(cost.return_weight[i] for i in route)
    peak = load
    for i in route:
        load += cost.pick_weight[i] - cost.return_weight[i]
        if load > peak:
            peak = load
    return peak


def total_capacity_excess(solution: Solution, cost: Costing) -> float:
    return sum(route.excess(cost.capacity) for _, _, route in solution.all_routes())


def horizon_overrun(solution: Solution, cost: Costing) -> float:
    over = 0.0
    for times in batch_times(solution, cost):
        if times and times[-1][1] > cost.horizon:
            over += times[-1][1] - cost.horizon
    return over


@dataclass(frozen=True)
class Violation:
    kind: str
    message: str
    amount: float = 0.0


def check_feasibility(solution: Solution, instance: Instance) -> list[Violation]:
    """All hard-constraint violations; an empty list means feasible."""
    cost = costing(instance)
    out = [Violation("coverage", msg) for msg in _check_coverage(solution, cost)]
    for picker, position, route in solution.all_routes():
        over = route.excess(cost.capacity)
        if over > 1e-9:
            out.append(Violation(
                "capacity",
                f"picker {picker} batch {position}: peak load "
                f"{route.peak_load:.3f} kg exceeds capacity {cost.capacity:.3f} kg",
                over))
    for picker, times in enumerate(batch_times(solution, cost)):
        if times and times[-1][1] > cost.horizon + 1e-9:
            out.append(Violation(
                "horizon",
                f"picker {picker}: finishes at {times[-1][1]:.1f} s, after the "
                f"horizon {cost.horizon:.1f} s",
                times[-1][1] - cost.horizon))
    for picker, batch_list in enumerate(solution.routes):
        if len(batch_list) > cost.max_batches:
            out.append(Violation(
                "structure",
                f"picker {picker}: {len(batch_list)} batches exceed the "
                f"maximum of {cost.max_batches}",
                len(batch_list) - cost.max_batches))
    return out


# ---------------------------------------------------------------------------
# Solution files

def solution_to_dict(solution: Solution, instance: Instance) -> dict:
    breakdown = evaluate(solution, instance)
    cost = costing(instance)
    pickers = []
    for picker, times in enumerate(batch_times(solution, cost)):
        routes = []
        for (start, completion), route in zip(times, solution.routes[picker]):
            routes.append({
                "stops": list(route.stops),
                "start": start,
                "completion": completion,
            })
        pickers.append({"picker": picker, "routes": routes})
    return {
        "pickers": pickers,
        "cost": {
            "travel": breakdown.travel,
            "tardiness": breakdown.tardiness,
            "splitup": breakdown.splitup,
            "capacity_penalty": breakdown.capacity_penalty,
            "total": breakdown.total,
        },
    }


def solution_from_dict(data: dict, instance: Instance) -> Solution:
    cost = costing(instance)
    if not isinstance(data, dict) or "pickers" not in data:
        raise ParseError('solution: missing field "pickers"')
    pickers = data["pickers"]
    routes = [[] for _ in range(instance.params.num_pickers)]
    for entry in pickers:
        if "picker" not in entry or "routes" not in entry:
            raise ParseError('solution: picker entries need "picker" and "routes"')
        idx = entry["picker"]
        if not 0 <= idx < len(routes):
            raise ParseError(f"solution: picker {idx} outside the fleet")
        for route_entry in entry["routes"]:
            if "stops" not in route_entry:
                raise ParseError('solution: route entries need "stops"')
            stops = route_entry["stops"]
            if not stops:
                raise ParseError(f"solution: picker {idx} has an empty route")
            if any(not isinstance(s, int) or not 0 <= s < cost.n for s in stops):
                raise ParseError(f"solution: route of picker {idx} names an unknown line")
            routes[idx].append(Route(stops, cost))
    return Solution(routes)


def save_solution(solution: Solution, instance: Instance, path: str | Path) -> None:
    Path(path).write_text(json.dumps(solution_to_dict(solution, instance), indent=2) + "\n")


def load_solution(path: str | Path, instance: Instance) -> Solution:
    try:
        data = json.loads(Path(path).read_text())
    except json.JSONDecodeError as exc:
        raise ParseError(f"not valid JSON: {exc}") from exc
    return solution_from_dict(data, instance)
