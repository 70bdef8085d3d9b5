"""Deterministic discrete-event simulator for ICN-based 5G network slicing."""

from .errors import IcnSimError, ScenarioError
from .names import Name
from .packets import Data, Interest
from .scenario import Scenario, load_scenario, run
from .sim import SimConfig, Simulation

__all__ = ["Data", "IcnSimError", "Interest", "Name", "Scenario", "ScenarioError", "SimConfig", "Simulation",
           "load_scenario", "run"]
__version__ = "0.1.0"
