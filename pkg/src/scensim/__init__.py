"""Scenario-driven co-simulation: from a scenario document to a running federation."""

from .building_blocks import builtin_registry
from .manager import plan_run, run_distributed, run_reference
from .scenario import parse_scenario, serialize_scenario

__version__ = "0.1.0"

__all__ = [
    "builtin_registry",
    "parse_scenario",
    "plan_run",
    "run_distributed",
    "run_reference",
    "serialize_scenario",
]
