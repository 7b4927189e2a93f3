"""Simulation toolkit for sympathetic cooling of ions in separate Penning traps.

Two ions (or ion clouds) in different traps share a pickup electrode, either
directly or through a detuned tank circuit. Their axial motions exchange
energy at the Rabi frequency, and a laser-cooled partner can therefore cool
a target ion that has no cooling transition of its own.
"""

__version__ = "0.1.0"

from .model import (  # noqa: F401
    ConfigError,
    CouplingScenario,
    IonSpecies,
    Resonator,
    SimulationParams,
    TrapPort,
    ValidationError,
    bundled_config,
    load_scenario,
    load_scenario_file,
)
