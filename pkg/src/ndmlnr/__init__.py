"""Discrete-event simulator of node-disjoint, stability-gated multipath routing."""

from .engine import Simulator, run
from .scenario import Scenario, ScenarioError, bundled, load_scenario, parse_scenario, validate

__all__ = ["Simulator", "run", "Scenario", "ScenarioError", "bundled", "load_scenario", "parse_scenario", "validate"]
__version__ = "0.1.0"
