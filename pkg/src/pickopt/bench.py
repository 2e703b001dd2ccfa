"""Constructive benchmark heuristics and the study harness.

The two reference heuristics mimic how large picking waves are dispatched
in practice: sort the order lines by deadline, fill one batch after the
other, and never violate capacity.  The study harness runs the solver over
instance grids (return handling, split fees, capacity, tightened
deadlines) and emits delimited report rows plus (x, y, series) points for
plotting.
"""

from __future__ import annotations

import csv
import io
import math
import random
from dataclasses import dataclass, field, replace

from .alns import AlnsConfig, AlnsResult, run
from .instance import CustomerOrder, Instance
from .routing import vnd_improve
from .solution import (
    CostBreakdown, Route, Solution, costing, evaluate, splitup_counts,
)

_EPS = 1e-9


class BenchError(RuntimeError):
    """A line could not be assigned without violating capacity."""


# ---------------------------------------------------------------------------
# BM1 / BM2

def _cheapest_slot(stops, line_id, cost):
    """Best position to insert ``line_id`` into ``stops`` by added distance.

    Only capacity-safe positions count.  Returns (added_distance, index)
    or None when no position keeps the peak load within capacity.
    """
    pick = cost.pick_weight
    ret = cost.return_weight
    cap = cost.capacity + _EPS
    line_pick = pick[line_id]
    line_ret = ret[line_id]
    depot = cost.n
    dist = cost.dist
    if not stops:
        if max(line_pick, line_ret) > cap:
            return None
        return 2.0 * dist(depot, line_id), 0

    n = len(stops)
    initial = sum(ret[i] for i in stops)
    loads = []
    load = initial
    for i in stops:
        load += pick[i] - ret[i]
        loads.append(load)
    pre_max = [initial] * (n + 1)
    for k in range(n):
        pre_max[k + 1] = max(pre_max[k], loads[k])
    suf_max = [-math.inf] * (n + 1)
    for k in range(n - 1, -1, -1):
        suf_max[k] = max(suf_max[k + 1], loads[k])

    best = None
    best_k = -1
    for k in range(n + 1):
        before = loads[k - 1] if k > 0 else initial
        peak = max(pre_max[k] + line_ret, before + line_pick,
                   suf_max[k] + line_pick)
        if peak > cap:
            continue
        prev = stops[k - 1] if k > 0 else depot
        nxt = stops[k] if k < n else depot
        added = dist(prev, line_id) + dist(line_id, nxt) - dist(prev, nxt)
        if best is None or added < best:
            best = added
            best_k = k
    if best is None:
        return None
    return best, best_k


def bm1(instance: Instance, rng: random.Random) -> Solution:
    """Earliest-deadline-first batch construction.

    Lines are sorted by (deadline, aisle) with a random tie-break and
    poured into one batch after the other.  At any moment two batches are
    reachable: the one currently being filled, and the empty batch at the
    next position of the picker round-robin.  Each line takes the cheaper
    capacity-safe spot of the two; as soon as the fresh batch receives a
    line it becomes the one being filled.  Positions walk picker by
    picker, then wrap to the first picker's next batch slot.
    """
    cost = costing(instance)
    ids = list(range(cost.n))
    rng.shuffle(ids)
    ids.sort(key=lambda i: (cost.deadline[i], cost.aisle[i]))

    num_pickers = cost.num_pickers
    max_batches = cost.max_batches
    pick = cost.pick_weight
    ret = cost.return_weight
    cap = cost.capacity + _EPS
    depot = cost.n
    dist = cost.dist

    slots: list[list[list[int]]] = [[] for _ in range(num_pickers)]
    current: list[int] | None = None
    e = h = 0
    for lid in ids:
        fits_alone = max(pick[lid], ret[lid]) <= cap
        if current is None:
            if not fits_alone:
                raise BenchError(f"order line {lid} exceeds capacity on its own")
            current = [lid]
            slots[0].append(current)
            continue
        in_current = _cheapest_slot(current, lid, cost)
        succ_e, succ_h = (e + 1, h) if e + 1 < num_pickers else (0, h + 1)
        succ_cost = None
        if succ_h < max_batches and fits_alone:
            succ_cost = 2.0 * dist(depot, lid)
        if in_current is not None and (succ_cost is None
                                       or in_current[0] <= succ_cost):
            current.insert(in_current[1], lid)
        elif succ_cost is not None:
            current = [lid]
            slots[succ_e].append(current)
            e, h = succ_e, succ_h
        elif not fits_alone:
            raise BenchError(f"order line {lid} exceeds capacity on its own")
        else:
            raise BenchError(f"no batch slot left for order line {lid}")
    return Solution([[Route(s, cost) for s in per] for per in slots])


def bm2(instance: Instance, rng: random.Random) -> Solution:
    """BM1 followed by a local search on every route."""
    sol = bm1(instance, rng)
    return Solution([[vnd_improve(r, instance) for r in per]
                     for per in sol.routes])


@dataclass
class BenchResult:
    solution: Solution
    breakdown: CostBreakdown
    costs: list[float]


def best_of_repeats(heuristic, instance: Instance, repeats: int = 100,
                    base_seed: int = 0) -> BenchResult:
    """Run ``heuristic`` with derived seeds, keep the cheapest solution."""
    if repeats < 1:
        raise ValueError("repeats must be at least 1")
    base = random.Random(base_seed)
    best_sol = None
    best_bd = None
    costs = []
    for _ in range(repeats):
        rng = random.Random(base.getrandbits(63))
        sol = heuristic(instance, rng)
        bd = evaluate(sol, instance)
        costs.append(bd.total)
        if best_bd is None or bd.total < best_bd.total:
            best_sol, best_bd = sol, bd
    return BenchResult(best_sol, best_bd, costs)


# ---------------------------------------------------------------------------
# Instance surgery for the studies

def sub_instance(instance: Instance, keep_ids, **param_overrides):
    """Instance restricted to ``keep_ids``; returns (instance, id_map).

    ``id_map[new_id]`` is the original line id.  Customers are renumbered
    to stay a dense index.  Parameter overrides (capacity, num_pickers,
    splitup_cost, ...) are applied on top.
    """
    id_map = sorted(keep_ids)
    params = replace(instance.params, **param_overrides) \
        if param_overrides else instance.params
    cust_ids: dict[int, int] = {}
    lines = []
    members: list[list[int]] = []
    for new_id, old_id in enumerate(id_map):
        old = instance.order_lines[old_id]
        new_cust = cust_ids.get(old.customer)
        if new_cust is None:
            new_cust = len(cust_ids)
            cust_ids[old.customer] = new_cust
            members.append([])
        members[new_cust].append(new_id)
        lines.append(replace(old, id=new_id, customer=new_cust))
    customers = [CustomerOrder(i, m) for i, m in enumerate(members)]
    return Instance(instance.layout, params, customers, lines), id_map


def with_params(instance: Instance, **param_overrides) -> Instance:
    return Instance(instance.layout, replace(instance.params,
                                             **param_overrides),
                    instance.customers, instance.order_lines)


def halve_pick_deadlines(instance: Instance) -> Instance:
    """Cut pick deadlines in half; return lines keep their full horizon."""
    lines = [line if line.is_return else replace(line,
                                                 deadline=line.deadline / 2.0)
             for line in instance.order_lines]
    return Instance(instance.layout, instance.params, instance.customers,
                    lines)


def split_by_kind(instance: Instance, **param_overrides):
    """(pick-only, return-only) sub-instances with their id maps.

    Either half may be None when the instance has no lines of that kind.
    """
    picks = [l.id for l in instance.order_lines if not l.is_return]
    rets = [l.id for l in instance.order_lines if l.is_return]
    pick_part = sub_instance(instance, picks, **param_overrides) \
        if picks else (None, [])
    ret_part = sub_instance(instance, rets, **param_overrides) \
        if rets else (None, [])
    return pick_part, ret_part


def merge_solutions(parts, instance: Instance) -> Solution | None:
    """Stitch sub-instance solutions into one solution of ``instance``.

    ``parts`` is a list of (solution, id_map) pairs.  Batches keep their
    per-picker position order, parts appended in the given order; when a
    picker would exceed its batch allowance the overflow spills to the
    picker with the most free slots.  Returns None when the combined batch
    count does not fit the fleet at all.
    """
    cost = costing(instance)
    per_picker: list[list[list[int]]] = [[] for _ in range(cost.num_pickers)]
    overflow: list[list[int]] = []
    for sol, id_map in parts:
        if sol is None:
            continue
        for picker, batch_list in enumerate(sol.routes):
            for route in batch_list:
                stops = [id_map[i] for i in route.stops]
                if picker < cost.num_pickers and \
                        len(per_picker[picker]) < cost.max_batches:
                    per_picker[picker].append(stops)
                else:
                    overflow.append(stops)
    for stops in overflow:
        target = min(range(cost.num_pickers),
                     key=lambda p: len(per_picker[p]))
        if len(per_picker[target]) >= cost.max_batches:
            return None
        per_picker[target].append(stops)
    return Solution([[Route(s, cost) for s in per] for per in per_picker])


# ---------------------------------------------------------------------------
# Reports

@dataclass
class Report:
    """Delimited study output plus plot-ready points."""
    kind: str
    columns: list[str]
    rows: list[list] = field(default_factory=list)
    plots: dict[str, list[tuple[float, float, str]]] = field(
        default_factory=dict)

    def add_plot_point(self, plot: str, x: float, y: float,
                       series: str) -> None:
        self.plots.setdefault(plot, []).append((x, y, series))


def fmt(value) -> str:
    """Stable cell formatting: floats at 9 significant digits."""
    if isinstance(value, float):
        return format(value, ".9g")
    return str(value)


def format_report(report: Report) -> str:
    out = io.StringIO()
    writer = csv.writer(out, lineterminator="\n")
    writer.writerow(report.columns)
    for row in report.rows:
        writer.writerow([fmt(cell) for cell in row])
    return out.getvalue()


def write_report(report: Report, path) -> None:
    with open(path, "w", newline="") as fh:
        fh.write(format_report(report))


def trajectory_points(log) -> list[tuple[float, float, str]]:
    """Best-known cost per context over the iteration counter."""
    return [(float(row.iteration), row.best_cost, f"context {row.context}")
            for row in log]


# ---------------------------------------------------------------------------
# Study harness

def _solve_cell(instance: Instance, cfg: AlnsConfig, repeats: int,
                warm: Solution | None = None) -> AlnsResult:
    best = None
    for j in range(repeats):
        result = run(instance, replace(cfg, seed=cfg.seed + j),
                     warm_start=warm)
        if best is None or result.cost.total < best.cost.total:
            best = result
    return best


def _solve_separated(instance: Instance, cfg: AlnsConfig, repeats: int,
                     **param_overrides):
    """Independent pick-only and return-only solves.

    Returns (orders_cost, returns_cost, merged warm start or None).
    """
    (pick_inst, pick_map), (ret_inst, ret_map) = \
        split_by_kind(instance, **param_overrides)
    parts = []
    orders_cost = returns_cost = 0.0
    if pick_inst is not None:
        res = _solve_cell(pick_inst, cfg, repeats)
        orders_cost = res.cost.total
        parts.append((res.solution, pick_map))
    if ret_inst is not None:
        res = _solve_cell(ret_inst, cfg, repeats)
        returns_cost = res.cost.total
        parts.append((res.solution, ret_map))
    target = with_params(instance, **param_overrides) \
        if param_overrides else instance
    warm = merge_solutions(parts, target) if parts else None
    return orders_cost, returns_cost, warm


def _return_fraction(instance: Instance) -> float:
    total = len(instance.order_lines)
    if total == 0:
        return 0.0
    returns = sum(1 for l in instance.order_lines if l.is_return)
    return returns / total


def _dif_percent(integrated: float, separated: float) -> float:
    if separated <= 0.0:
        return 0.0
    return 100.0 * (integrated - separated) / separated


def _experiment_returns(instances, cfg, repeats, labels, **_ignored):
    report = Report("returns", ["instance", "pickers", "beta", "int",
                                "int1", "orders", "returns", "dif"])
    for label, inst in zip(labels, instances):
        orders_cost, returns_cost, warm = _solve_separated(inst, cfg, repeats)
        integrated = _solve_cell(inst, cfg, repeats, warm=warm).cost.total
        frac = _return_fraction(inst)
        inflated = math.ceil(inst.params.num_pickers * (1.0 + frac))
        if inflated != inst.params.num_pickers:
            inflated_inst = with_params(inst, num_pickers=inflated)
            warm1 = None
            if warm is not None:
                warm1 = Solution(list(warm.routes)
                                 + [[] for _ in range(
                                     inflated - inst.params.num_pickers)])
            int1 = _solve_cell(inflated_inst, cfg, repeats,
                               warm=warm1).cost.total
        else:
            int1 = integrated
        separated = orders_cost + returns_cost
        report.rows.append([label, inst.params.num_pickers,
                            inst.params.splitup_cost, integrated, int1,
                            orders_cost, returns_cost,
                            _dif_percent(integrated, separated)])
        x = float(len(report.rows))
        report.add_plot_point("returns", x, integrated, "integrated")
        report.add_plot_point("returns", x, separated, "separated")
    return report


def _experiment_splitup(instances, cfg, repeats, labels, betas=None,
                        **_ignored):
    if betas is None:
        betas = [0.0, 0.05, 0.1, 0.2, 0.5, 1.0, 10000.0]
    betas = sorted(set(betas))
    report = Report("splitup", ["instance", "beta", "travel", "tardiness",
                                "splitup", "total", "split_customers"])
    for label, inst in zip(labels, instances):
        warm = None
        cells = []
        for beta in reversed(betas):
            cell = with_params(inst, splitup_cost=beta)
            result = _solve_cell(cell, cfg, repeats, warm=warm)
            warm = result.solution
            bd = result.cost
            split = sum(1 for v in splitup_counts(result.solution,
                                                  cell).values() if v > 1)
            cells.append([label, beta, bd.travel, bd.tardiness, bd.splitup,
                          bd.total, split])
        cells.reverse()
        report.rows.extend(cells)
        for row in cells:
            beta = row[1]
            report.add_plot_point("splitup", beta, row[2],
                                  f"travel[{label}]")
            report.add_plot_point("splitup", beta, row[4],
                                  f"splitup[{label}]")
            report.add_plot_point("splitup", beta, row[5],
                                  f"total[{label}]")
    return report


def _experiment_capacity(instances, cfg, repeats, labels, capacities=None,
                         **_ignored):
    report = Report("capacity", ["instance", "capacity", "int", "orders",
                                 "returns", "dif"])
    for label, inst in zip(labels, instances):
        grid = capacities
        if grid is None:
            base = inst.params.capacity
            grid = [base - 10.0, base, base + 10.0]
        for cap in grid:
            orders_cost, returns_cost, warm = _solve_separated(
                inst, cfg, repeats, capacity=cap)
            cell = with_params(inst, capacity=cap)
            integrated = _solve_cell(cell, cfg, repeats,
                                     warm=warm).cost.total
            separated = orders_cost + returns_cost
            report.rows.append([label, cap, integrated, orders_cost,
                                returns_cost,
                                _dif_percent(integrated, separated)])
            report.add_plot_point("capacity", cap, integrated,
                                  f"integrated[{label}]")
            report.add_plot_point("capacity", cap, separated,
                                  f"separated[{label}]")
    return report


def _experiment_deadlines(instances, cfg, repeats, labels, capacities=None,
                          **_ignored):
    if capacities is None:
        capacities = [40.0, 50.0, 60.0]
    report = Report("deadlines", ["instance", "capacity", "travel",
                                  "tardiness", "splitup", "total"])
    for label, inst in zip(labels, instances):
        tight = halve_pick_deadlines(inst)
        for cap in capacities:
            cell = with_params(tight, capacity=cap)
            bd = _solve_cell(cell, cfg, repeats).cost
            report.rows.append([label, cap, bd.travel, bd.tardiness,
                                bd.splitup, bd.total])
            for name, value in (("travel", bd.travel),
                                ("tardiness", bd.tardiness),
                                ("splitup", bd.splitup)):
                report.add_plot_point("deadlines", cap, value,
                                      f"{name}[{label}]")
    return report


_EXPERIMENTS = {
    "returns": _experiment_returns,
    "splitup": _experiment_splitup,
    "capacity": _experiment_capacity,
    "deadlines": _experiment_deadlines,
}

EXPERIMENT_KINDS = tuple(sorted(_EXPERIMENTS))


def experiment(kind: str, instances, cfg: AlnsConfig | None = None, *,
               repeats: int = 1, betas=None, capacities=None,
               labels=None) -> Report:
    """Run one study over ``instances`` and collect a report.

    Kinds: ``returns`` (integrated vs separated return handling),
    ``splitup`` (split fee sweep with warm-start chaining), ``capacity``
    (integrated vs separated across a capacity grid), ``deadlines``
    (cost partition under halved pick deadlines and small capacities).
    """
    if kind not in _EXPERIMENTS:
        raise ValueError(f"unknown experiment kind {kind!r}; "
                         f"choose from {', '.join(EXPERIMENT_KINDS)}")
    if cfg is None:
        cfg = AlnsConfig()
    if repeats < 1:
        raise ValueError("repeats must be at least 1")
    instances = list(instances)
    if labels is None:
        labels = [str(i + 1) for i in range(len(instances))]
    return _EXPERIMENTS[kind](instances, cfg, repeats, labels, betas=betas,
                              capacities=capacities)
