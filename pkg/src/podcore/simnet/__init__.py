"""Deterministic adversarial network simulator."""
from .adversary import Behavior, Kind, parse_behavior
from .engine import SimConfig, Simulation, extract_transcript
from .properties import PropertyChecker, PropertyReport
from .workload import run_random, run_scenario, run_sweep_seed, sweep

__all__ = [
    "Behavior",
    "Kind",
    "parse_behavior",
    "SimConfig",
    "Simulation",
    "extract_transcript",
    "PropertyChecker",
    "PropertyReport",
    "run_random",
    "run_scenario",
    "run_sweep_seed",
    "sweep",
]
