"""Problem instances: order lines, customer orders, parameters, generator and file IO.

An order line is either a pick (bring products from a storage location to
the depot) or a return (bring returned products from the depot back to a
storage location), never both.  Customer orders group lines; a return is
always a single-line customer order.  Instances serialize to JSON with the
sections ``layout``, ``params``, ``customers`` and ``order_lines``.
"""

from __future__ import annotations

import json
import random
from dataclasses import dataclass, asdict
from pathlib import Path

from .warehouse import Location, WarehouseLayout


class ParseError(ValueError):
    """An instance or solution file does not have the expected structure."""


class ValidationError(ValueError):
    """A structurally parseable instance violates a model invariant."""


@dataclass
class OrderLine:
    id: int
    customer: int
    location: Location
    quantity: int
    unit_weight: float
    pick_quantity: int
    return_quantity: int
    deadline: float

    @property
    def weight(self) -> float:
        """Total weight of the line in kg."""
        return self.unit_weight * self.quantity

    @property
    def is_return(self) -> bool:
        return self.return_quantity > 0


@dataclass
class CustomerOrder:
    id: int
    order_lines: list[int]


@dataclass
class InstanceParams:
    """Fleet, cost and timing parameters.

    Cost rates are per second: 0.54 EUR per travel minute and 0.06 EUR per
    tardy minute.  ``tardiness_per_product`` switches the tardiness term
    from per order line to per product unit.
    """

    num_pickers: int = 3
    max_batches_per_picker: int = 8
    capacity: float = 80.0
    pick_time: float = 8.0
    break_time: float = 300.0
    travel_cost_rate: float = 0.54 / 60.0
    tardiness_rate: float = 0.06 / 60.0
    splitup_cost: float = 0.0
    horizon: float = 8 * 3600.0
    tardiness_per_product: bool = False


@dataclass
class Instance:
    layout: WarehouseLayout
    params: InstanceParams
    customers: list[CustomerOrder]
    order_lines: list[OrderLine]

    def line(self, line_id: int) -> OrderLine:
        return self.order_lines[line_id]

    def customer(self, customer_id: int) -> CustomerOrder:
        return self.customers[customer_id]

    @property
    def num_lines(self) -> int:
        return len(self.order_lines)


# ---------------------------------------------------------------------------
# Random generator

QUANTITY_CHOICES = (1, 2, 3, 4)
QUANTITY_WEIGHTS = (0.4, 0.3, 0.2, 0.1)


@dataclass
class GenSpec:
    """Controls for the random instance generator.

    Locations are uniform over aisles and a 0.1 m offset grid, quantities
    follow the 40/30/20/10 mix over 1..4 products, unit weights are uniform
    over 0.1..1.0 kg, pick deadlines are uniform over the full hours
    1..deadline_hours and shared by all lines of a customer order, return
    deadlines equal the horizon.  ``return_fraction`` is the fraction of
    customer requests that are returns; a return request is one line.
    """

    num_orderlines: int
    return_fraction: float = 0.0
    num_aisles: int = 35
    aisle_length: float = 30.0
    aisle_width: float = 2.5
    deadline_hours: int = 8
    num_pickers: int = 3
    max_batches_per_picker: int = 8
    capacity: float = 80.0
    pick_time: float = 8.0
    break_time: float = 300.0
    travel_cost_rate: float = 0.54 / 60.0
    tardiness_rate: float = 0.06 / 60.0
    splitup_cost: float = 0.0
    horizon: float = 8 * 3600.0
    tardiness_per_product: bool = False
    travel_speed: float = 0.7
    max_lines_per_order: int = 6
    seed: int = 0


def generate(spec: GenSpec) -> Instance:
    """Build a random instance from ``spec``, deterministic per seed."""
    if spec.num_orderlines < 1:
        raise ValueError("num_orderlines must be at least 1")
    if not 0.0 <= spec.return_fraction <= 1.0:
        raise ValueError("return_fraction must lie in [0, 1]")
    rng = random.Random(spec.seed)
    layout = WarehouseLayout(
        num_aisles=spec.num_aisles,
        aisle_length=spec.aisle_length,
        aisle_width=spec.aisle_width,
        travel_speed=spec.travel_speed,
    )
    params = InstanceParams(
        num_pickers=spec.num_pickers,
        max_batches_per_picker=spec.max_batches_per_picker,
        capacity=spec.capacity,
        pick_time=spec.pick_time,
        break_time=spec.break_time,
        travel_cost_rate=spec.travel_cost_rate,
        tardiness_rate=spec.tardiness_rate,
        splitup_cost=spec.splitup_cost,
        horizon=spec.horizon,
        tardiness_per_product=spec.tardiness_per_product,
    )
    offset_steps = int(round(spec.aisle_length * 10))
    customers: list[CustomerOrder] = []
    lines: list[OrderLine] = []
    remaining = spec.num_orderlines
    while remaining > 0:
        is_return = rng.random() < spec.return_fraction
        if is_return:
            k = 1
            deadline = spec.horizon
        else:
            k = min(rng.randint(1, spec.max_lines_per_order), remaining)
            deadline = rng.randint(1, spec.deadline_hours) * 3600.0
        cust = CustomerOrder(id=len(customers), order_lines=[])
        for _ in range(k):
            quantity = rng.choices(QUANTITY_CHOICES, weights=QUANTITY_WEIGHTS)[0]
            line = OrderLine(
                id=len(lines),
                customer=cust.id,
                location=Location(
                    aisle=rng.randrange(spec.num_aisles),
                    offset=rng.randint(0, offset_steps) / 10.0,
                ),
                quantity=quantity,
                unit_weight=rng.randint(1, 10) / 10.0,
                pick_quantity=0 if is_return else quantity,
                return_quantity=quantity if is_return else 0,
                deadline=deadline,
            )
            cust.order_lines.append(line.id)
            lines.append(line)
        customers.append(cust)
        remaining -= k
    return Instance(layout=layout, params=params, customers=customers, order_lines=lines)


# ---------------------------------------------------------------------------
# Validation

def validate(instance: Instance) -> list[str]:
    """Check model invariants; returns one message per violation."""
    problems: list[str] = []
    layout = instance.layout
    params = instance.params
    if params.num_pickers < 1:
        problems.append("params: num_pickers must be at least 1")
    if params.max_batches_per_picker < 1:
        problems.append("params: max_batches_per_picker must be at least 1")
    for name in ("capacity", "pick_time", "break_time", "travel_cost_rate",
                 "tardiness_rate", "splitup_cost", "horizon"):
        if getattr(params, name) < 0:
            problems.append(f"params: {name} must not be negative")

    seen_by_customer: dict[int, list[int]] = {c.id: [] for c in instance.customers}
    for idx, cust in enumerate(instance.customers):
        if cust.id != idx:
            problems.append(f"customer {cust.id}: id does not match list position {idx}")
        if not cust.order_lines:
            problems.append(f"customer {cust.id}: has no order lines")

    assigned: dict[int, int] = {}
    for idx, line in enumerate(instance.order_lines):
        tag = f"order_line {line.id}"
        if line.id != idx:
            problems.append(f"{tag}: id does not match list position {idx}")
        try:
            layout.check_location(line.location)
        except ValueError as exc:
            problems.append(f"{tag}: {exc}")
        if line.quantity < 1:
            problems.append(f"{tag}: quantity must be at least 1")
        if line.unit_weight <= 0:
            problems.append(f"{tag}: unit_weight must be positive")
        if line.pick_quantity < 0 or line.return_quantity < 0:
            problems.append(f"{tag}: pick_quantity and return_quantity must not be negative")
        if (line.pick_quantity > 0) == (line.return_quantity > 0):
            problems.append(f"{tag}: exactly one of pick_quantity and return_quantity must be positive")
        if line.pick_quantity + line.return_quantity != line.quantity:
            problems.append(f"{tag}: pick_quantity plus return_quantity must equal quantity")
        if line.is_return and line.deadline != params.horizon:
            problems.append(f"{tag}: return deadline must equal the horizon")
        if line.deadline < 0:
            problems.append(f"{tag}: deadline must not be negative")
        if line.customer not in seen_by_customer:
            problems.append(f"{tag}: unknown customer {line.customer}")
        else:
            seen_by_customer[line.customer].append(line.id)
        if line.id in assigned:
            problems.append(f"{tag}: duplicate id")
        assigned[line.id] = line.customer

    for cust in instance.customers:
        listed = list(cust.order_lines)
        if sorted(listed) != sorted(seen_by_customer.get(cust.id, [])):
            problems.append(
                f"customer {cust.id}: order_lines do not match the lines referencing it")
        if len(set(listed)) != len(listed):
            problems.append(f"customer {cust.id}: repeated order line reference")
        members = [instance.order_lines[i] for i in listed
                   if 0 <= i < len(instance.order_lines)]
        if len(members) != len(listed):
            problems.append(f"customer {cust.id}: references an unknown order line")
            continue
        kinds = {line.is_return for line in members}
        if len(kinds) > 1:
            problems.append(f"customer {cust.id}: mixes picks and returns")
        elif kinds == {True} and len(members) != 1:
            problems.append(f"customer {cust.id}: a return order must have exactly one line")
    return problems


# ---------------------------------------------------------------------------
# Serialization

def _require(mapping, key, where):
    if not isinstance(mapping, dict):
        raise ParseError(f"{where}: expected an object")
    if key not in mapping:
        raise ParseError(f'{where}: missing field "{key}"')
    return mapping[key]


def to_dict(instance: Instance) -> dict:
    layout = instance.layout
    return {
        "layout": {
            "num_aisles": layout.num_aisles,
            "aisle_length": layout.aisle_length,
            "aisle_width": layout.aisle_width,
            "depot": {"aisle": layout.depot.aisle, "offset": layout.depot.offset},
            "travel_speed": layout.travel_speed,
        },
        "params": asdict(instance.params),
        "customers": [
            {"id": c.id, "order_lines": list(c.order_lines)} for c in instance.customers
        ],
        "order_lines": [
            {
                "id": line.id,
                "customer": line.customer,
                "location": {"aisle": line.location.aisle, "offset": line.location.offset},
                "quantity": line.quantity,
                "unit_weight": line.unit_weight,
                "pick_quantity": line.pick_quantity,
                "return_quantity": line.return_quantity,
                "deadline": line.deadline,
            }
            for line in instance.order_lines
        ],
    }


def from_dict(data: dict) -> Instance:
    lay = _require(data, "layout", "instance")
    depot = _require(lay, "depot", "layout")
    try:
        layout = WarehouseLayout(
            num_aisles=_require(lay, "num_aisles", "layout"),
            aisle_length=_require(lay, "aisle_length", "layout"),
            aisle_width=_require(lay, "aisle_width", "layout"),
            depot=Location(_require(depot, "aisle", "layout.depot"),
                           _require(depot, "offset", "layout.depot")),
            travel_speed=_require(lay, "travel_speed", "layout"),
        )
    except ValueError as exc:
        if isinstance(exc, ParseError):
            raise
        raise ValidationError(str(exc)) from exc
    par = _require(data, "params", "instance")
    params = InstanceParams(**{
        name: _require(par, name, "params")
        for name in InstanceParams.__dataclass_fields__
    })
    customers = []
    for pos, entry in enumerate(_require(data, "customers", "instance")):
        where = f"customers[{pos}]"
        customers.append(CustomerOrder(
            id=_require(entry, "id", where),
            order_lines=list(_require(entry, "order_lines", where)),
        ))
    lines = []
    for pos, entry in enumerate(_require(data, "order_lines", "instance")):
        where = f"order_lines[{pos}]"
        loc = _require(entry, "location", where)
        lines.append(OrderLine(
            id=_require(entry, "id", where),
            customer=_require(entry, "customer", where),
            location=Location(_require(loc, "aisle", f"{where}.location"),
                              _require(loc, "offset", f"{where}.location")),
            quantity=_require(entry, "quantity", where),
            unit_weight=_require(entry, "unit_weight", where),
            pick_quantity=_require(entry, "pick_quantity", where),
            return_quantity=_require(entry, "return_quantity", where),
            deadline=_require(entry, "deadline", where),
        ))
    instance = Instance(layout=layout, params=params, customers=customers, order_lines=lines)
    problems = validate(instance)
    if problems:
        raise ValidationError("; ".join(problems))
    return instance


def dumps(instance: Instance) -> str:
    return json.dumps(to_dict(instance), indent=2) + "\n"


def loads(text: str) -> Instance:
    try:
        data = json.loads(text)
    except json.JSONDecodeError as exc:
        raise ParseError(f"not valid JSON: {exc}") from exc
    return from_dict(data)


def save(instance: Instance, path: str | Path) -> None:
    Path(path).write_text(dumps(instance))


def load(path: str | Path) -> Instance:
    return loads(Path(path).read_text())
