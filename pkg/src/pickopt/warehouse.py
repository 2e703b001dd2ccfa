"""Rectangular parallel-aisle warehouse geometry.

The warehouse consists of parallel picking aisles connected by two cross
aisles, one at the front (offset 0) and one at the back (offset equal to
the aisle length).  Pickers switch aisles through whichever cross aisle is
shorter; within an aisle travel is along the aisle only.  All distances are
in meters, speeds in meters per second, times in seconds.
"""

from __future__ import annotations

from dataclasses import dataclass, field


@dataclass(frozen=True)
class Location:
    """A position in the warehouse: aisle index and distance from the front cross aisle."""

    aisle: int
    offset: float


@dataclass(frozen=True)
class WarehouseLayout:
    """Geometry of the warehouse plus the picker travel speed.

    ``aisle_width`` is the center-to-center spacing between neighboring
    aisles.  The depot sits on the front cross aisle.
    """

    num_aisles: int
    aisle_length: float
    aisle_width: float
    depot: Location = field(default_factory=lambda: Location(0, 0.0))
    travel_speed: float = 0.7

    def __post_init__(self):
        if self.num_aisles < 1:
            raise ValueError("num_aisles must be at least 1")
        if self.aisle_length <= 0:
            raise ValueError("aisle_length must be positive")
        if self.aisle_width < 0:
            raise ValueError("aisle_width must not be negative")
        if self.travel_speed <= 0:
            raise ValueError("travel_speed must be positive")
        if self.depot.offset != 0.0:
            raise ValueError("depot must lie on the front cross aisle (offset 0)")
        self.check_location(self.depot)

    def check_location(self, loc: Location) -> None:
        """Raise ValueError if ``loc`` lies outside the warehouse."""
        if not 0 <= loc.aisle < self.num_aisles:
            raise ValueError(f"aisle {loc.aisle} outside [0, {self.num_aisles})")
        if not 0.0 <= loc.offset <= self.aisle_length:
            raise ValueError(f"offset {loc.offset} outside [0, {self.aisle_length}]")


def distance(a: Location, b: Location, layout: WarehouseLayout) -> float:
    """Shortest walking distance between two locations.

    Within one aisle this is the offset difference.  Between aisles the
    picker leaves through the front or the back cross aisle, whichever
    makes the total path shorter.
    """
    layout.check_location(a)
    layout.check_location(b)
    if a.aisle == b.aisle:
        return abs(a.offset - b.offset)
    across = abs(a.aisle - b.aisle) * layout.aisle_width
    via_front = a.offset + b.offset
    via_back = 2.0 * layout.aisle_length - via_front
    return across + min(via_front, via_back)


def travel_time(a: Location, b: Location, layout: WarehouseLayout) -> float:
    """Walking time in seconds between two locations."""
    return distance(a, b, layout) / layout.travel_speed
