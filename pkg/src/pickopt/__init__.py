"""Order batching, picker routing and batch scheduling for parallel-aisle
warehouses.

The library batches customer order lines and product returns, routes each
batch through the warehouse, and assigns and sequences the batches over
multiple order pickers so that travel, lateness and order split fees stay
small.  ``alns.run`` is the main entry point; ``bench`` holds reference
heuristics and the study harness; the ``pickopt`` command line wraps both.
"""

from .alns import AlnsConfig, AlnsResult, run
from .bench import (
    BenchError, Report, best_of_repeats, bm1, bm2, experiment,
    format_report, write_report,
)
from .instance import (
    CustomerOrder, GenSpec, Instance, InstanceParams, OrderLine,
    ParseError, ValidationError, generate, load, save, validate,
)
from .mip import (
    BatchPool, OracleLimits, OracleSizeError, SchedulePool,
    brute_force_oracle, mip_op1, mip_op2, schedule_pool_select,
)
from .routing import (
    InsertionError, cheapest_insert, s_shape_route, vnd_improve,
)
from .solution import (
    CostBreakdown, Route, Solution, Violation, check_feasibility,
    costing, evaluate, load_solution, save_solution,
)
from .warehouse import Location, WarehouseLayout, distance

__version__ = "0.1.0"

__all__ = [
    "AlnsConfig", "AlnsResult", "run",
    "BenchError", "Report", "best_of_repeats", "bm1", "bm2", "experiment",
    "format_report", "write_report",
    "CustomerOrder", "GenSpec", "Instance", "InstanceParams", "OrderLine",
    "ParseError", "ValidationError", "generate", "load", "save", "validate",
    "BatchPool", "OracleLimits", "OracleSizeError", "SchedulePool",
    "brute_force_oracle", "mip_op1", "mip_op2", "schedule_pool_select",
    "InsertionError", "cheapest_insert", "s_shape_route", "vnd_improve",
    "CostBreakdown", "Route", "Solution", "Violation", "check_feasibility",
    "costing", "evaluate", "load_solution", "save_solution",
    "Location", "WarehouseLayout", "distance",
    "__version__",
]
