"""Domain types, constants and scenario configuration.

All quantities are SI. Angular frequencies are rad/s internally; the
configuration file and every CSV boundary use Hz.

The configuration format is INI-style text with the sections ``[ion1]``,
``[port1]``, ``[ion2]``, ``[port2]``, ``[resonator]`` (optional),
``[environment]`` and ``[simulation]``.
"""

from __future__ import annotations

import configparser
import io
import math
from dataclasses import dataclass, fields, replace
from importlib import resources
from typing import Optional

from scipy.constants import atomic_mass, e as elementary_charge, k as k_b

TWO_PI = 2.0 * math.pi

__all__ = [
    "TWO_PI",
    "k_b",
    "elementary_charge",
    "atomic_mass",
    "ConfigError",
    "ValidationError",
    "IonSpecies",
    "TrapPort",
    "Resonator",
    "CouplingScenario",
    "SimulationParams",
    "load_scenario",
    "load_scenario_file",
    "dump_scenario",
    "bundled_config",
    "hz",
    "rad",
]


def hz(omega: float) -> float:
    """rad/s -> Hz."""
    return omega / TWO_PI


def rad(f: float) -> float:
    """Hz -> rad/s."""
    return f * TWO_PI


class ConfigError(ValueError):
    """Configuration text could not be parsed."""


class ValidationError(ValueError):
    """A value violates a domain invariant.

    ``field`` names the offending attribute.
    """

    def __init__(self, field_name: str, message: str):
        super().__init__(f"{field_name}: {message}")
        self.field = field_name


def _require(cond: bool, name: str, message: str) -> None:
    if not cond:
        raise ValidationError(name, message)


def _finite(x) -> bool:
    return isinstance(x, (int, float)) and math.isfinite(x)


@dataclass(frozen=True)
class IonSpecies:
    """One trapped species, or the centre-of-mass mode of a cloud of ``count`` ions."""

    name: str
    charge: float
    mass: float
    count: int = 1

    def __post_init__(self):
        _require(_finite(self.charge) and self.charge != 0, "charge", "must be non-zero")
        _require(_finite(self.mass) and self.mass > 0, "mass", "must be positive")
        _require(
            isinstance(self.count, int) and self.count >= 1, "count", "must be an integer >= 1"
        )

    @property
    def total_charge(self) -> float:
        return self.count * self.charge

    @property
    def total_mass(self) -> float:
        return self.count * self.mass


@dataclass(frozen=True)
class TrapPort:
    """Pickup electrode of one trap: effective distance D and capacitance C_T."""

    effective_distance: float
    trap_capacitance: float

    def __post_init__(self):
        _require(
            _finite(self.effective_distance) and self.effective_distance > 0,
            "effective_distance",
            "must be positive",
        )
        _require(
            _finite(self.trap_capacitance) and self.trap_capacitance > 0,
            "trap_capacitance",
            "must be positive",
        )


@dataclass(frozen=True)
class Resonator:
    """Parallel RLC tank circuit.

    ``attached_capacitance`` is the trap and wiring capacitance in parallel
    with the coil; the tank sees ``total_capacitance = C_R + attached``.
    """

    inductance: float
    coil_capacitance: float
    parallel_resistance: float
    attached_capacitance: float = 0.0

    def __post_init__(self):
        for name in ("inductance", "coil_capacitance", "parallel_resistance"):
            v = getattr(self, name)
            _require(_finite(v) and v > 0, name, "must be positive")
        _require(
            _finite(self.attached_capacitance) and self.attached_capacitance >= 0,
            "attached_capacitance",
            "must be non-negative",
        )

    @classmethod
    def from_quality_factor(cls, inductance, coil_capacitance, quality_factor, attached_capacitance=0.0):
        _require(_finite(quality_factor) and quality_factor > 0, "quality_factor", "must be positive")
        c = coil_capacitance + attached_capacitance
        omega_r = 1.0 / math.sqrt(inductance * c)
        return cls(inductance, coil_capacitance, quality_factor * omega_r * inductance, attached_capacitance)

    @property
    def total_capacitance(self) -> float:
        return self.coil_capacitance + self.attached_capacitance

    @property
    def resonance_frequency(self) -> float:
        """omega_R in rad/s."""
        return 1.0 / math.sqrt(self.inductance * self.total_capacitance)

    @property
    def quality_factor(self) -> float:
        return self.parallel_resistance / (self.resonance_frequency * self.inductance)

    @property
    def fwhm(self) -> float:
        """Full width at half maximum of Re(Z), rad/s."""
        return self.resonance_frequency / self.quality_factor


@dataclass(frozen=True)
class CouplingScenario:
    """Two ion species, their trap ports, the optional shared resonator and the environment.

    Without a resonator the ions couple through the bare common endcap and
    ``axial_frequency`` must be given. With a resonator the working point is
    ``omega_R + resonator_detuning``; ion 2 sits there and ion 1 is offset by
    ``ion_frequency_mismatch``.
    """

    ion1: IonSpecies
    port1: TrapPort
    ion2: IonSpecies
    port2: TrapPort
    resonator: Optional[Resonator] = None
    circuit_temperature: float = 4.2
    doppler_limit: float = 0.5e-3
    resonator_detuning: float = 0.0
    ion_frequency_mismatch: float = 0.0
    axial_frequency: Optional[float] = None
    laser_damping: float = 0.0
    common_electrode: bool = True

    def __post_init__(self):
        _require(
            _finite(self.circuit_temperature) and self.circuit_temperature > 0,
            "circuit_temperature",
            "must be positive",
        )
        _require(
            _finite(self.doppler_limit) and self.doppler_limit > 0, "doppler_limit", "must be positive"
        )
        _require(_finite(self.resonator_detuning), "resonator_detuning", "must be finite")
        _require(_finite(self.ion_frequency_mismatch), "ion_frequency_mismatch", "must be finite")
        _require(
            _finite(self.laser_damping) and self.laser_damping >= 0, "laser_damping", "must be >= 0"
        )
        if self.resonator is None:
            _require(
                self.axial_frequency is not None and self.axial_frequency > 0,
                "axial_frequency",
                "required (positive) when no resonator is attached",
            )
        elif self.axial_frequency is not None:
            _require(self.axial_frequency > 0, "axial_frequency", "must be positive")

    @property
    def working_frequency(self) -> float:
        """Axial frequency of ion 2 (rad/s): omega_R + d_omega, or the bare-endcap axial frequency."""
        if self.resonator is None:
            return self.axial_frequency
        return self.resonator.resonance_frequency + self.resonator_detuning

    @property
    def coupling_capacitance(self) -> float:
        """Capacitance entering the coupling constants: C_eff (magnitude) or the bare C_T."""
        if self.resonator is None:
            return self.port1.trap_capacitance
        from .resonator import effective_circuit

        return abs(effective_circuit(self.resonator, self.resonator_detuning).effective_capacitance)

    @property
    def effective_resistance(self) -> float:
        if self.resonator is None:
            return 0.0
        from .resonator import effective_circuit

        return effective_circuit(self.resonator, self.resonator_detuning).effective_resistance

    def swapped(self) -> "CouplingScenario":
        return replace(
            self,
            ion1=self.ion2,
            port1=self.port2,
            ion2=self.ion1,
            port2=self.port1,
            ion_frequency_mismatch=-self.ion_frequency_mismatch,
        )


@dataclass(frozen=True)
class SimulationParams:
    time_step: float
    duration: float
    rng_seed: int = 0
    ensemble_size: int = 1
    noise_bandwidth: Optional[float] = None
    coupling_time: Optional[float] = None
    n_cycles: Optional[int] = None

    def __post_init__(self):
        _require(_finite(self.time_step) and self.time_step > 0, "time_step", "must be positive")
        _require(
            _finite(self.duration) and self.duration >= self.time_step,
            "duration",
            "must be >= time_step",
        )
        _require(
            isinstance(self.ensemble_size, int) and self.ensemble_size >= 1,
            "ensemble_size",
            "must be an integer >= 1",
        )
        _require(isinstance(self.rng_seed, int), "rng_seed", "must be an integer")
        if self.noise_bandwidth is not None:
            _require(self.noise_bandwidth > 0, "noise_bandwidth", "must be positive")
        if self.coupling_time is not None:
            _require(self.coupling_time > 0, "coupling_time", "must be positive")
        if self.n_cycles is not None:
            _require(
                isinstance(self.n_cycles, int) and self.n_cycles >= 0, "n_cycles", "must be >= 0"
            )

    @property
    def bandwidth(self) -> float:
        """Noise bandwidth in Hz; 1/(2 dt) unless overridden."""
        if self.noise_bandwidth is not None:
            return self.noise_bandwidth
        return 1.0 / (2.0 * self.time_step)

    @property
    def n_steps(self) -> int:
        return int(round(self.duration / self.time_step))

    def check_against(self, scenario: CouplingScenario) -> None:
        _require(
            self.time_step * abs(scenario.ion_frequency_mismatch) < 0.1,
            "time_step",
            "time_step * |ion_frequency_mismatch| must be < 0.1",
        )


# -- configuration text ---------------------------------------------------

_ION_KEYS = ("name", "charge", "mass", "count")
_PORT_KEYS = ("effective_distance", "trap_capacitance")
_RES_KEYS = ("inductance", "coil_capacitance", "parallel_resistance", "quality_factor", "attached_capacitance")
# Keys given in Hz in the file and converted to rad/s on load.
_HZ_KEYS = {"resonator_detuning", "ion_frequency_mismatch", "axial_frequency"}
_ENV_KEYS = (
    "circuit_temperature",
    "doppler_limit",
    "resonator_detuning",
    "ion_frequency_mismatch",
    "axial_frequency",
    "laser_damping",
    "common_electrode",
)
_SIM_KEYS = ("time_step", "duration", "rng_seed", "ensemble_size", "noise_bandwidth", "coupling_time", "n_cycles")


def _float(section, key, required=True, default=None):
    if key not in section:
        if required:
            raise ValidationError(key, f"missing in [{section.name}]")
        return default
    raw = section[key]
    try:
        return float(raw)
    except ValueError:
        raise ConfigError(f"[{section.name}] {key} = {raw!r} is not a number") from None


def _int(section, key, required=True, default=None):
    v = _float(section, key, required, default)
    if v is None:
        return None
    if v != int(v):
        raise ValidationError(key, "must be an integer")
    return int(v)


def _section(cp, name, required=True):
    if not cp.has_section(name):
        if required:
            raise ValidationError(name, "section missing")
        return None
    return cp[name]


def _check_keys(section, allowed):
    unknown = set(section.keys()) - set(allowed)
    if unknown:
        raise ValidationError(sorted(unknown)[0], f"unknown key in [{section.name}]")


def _ion(cp, name):
    s = _section(cp, name)
    _check_keys(s, _ION_KEYS)
    return IonSpecies(
        name=s.get("name", name),
        charge=_float(s, "charge"),
        mass=_float(s, "mass"),
        count=_int(s, "count", required=False, default=1),
    )


def _port(cp, name):
    s = _section(cp, name)
    _check_keys(s, _PORT_KEYS)
    return TrapPort(_float(s, "effective_distance"), _float(s, "trap_capacitance"))


def load_scenario(text: str) -> tuple[CouplingScenario, SimulationParams]:
    """Parse configuration text into a validated scenario and simulation parameters.

    Raises ``ConfigError`` for malformed text and ``ValidationError`` (with
    ``.field``) when a value breaks an invariant.
    """
    cp = configparser.ConfigParser(inline_comment_prefixes=("#", ";"), interpolation=None)
    try:
        cp.read_string(text)
    except configparser.Error as exc:
        raise ConfigError(str(exc)) from exc

    ion1, ion2 = _ion(cp, "ion1"), _ion(cp, "ion2")
    port1, port2 = _port(cp, "port1"), _port(cp, "port2")

    env = _section(cp, "environment")
    _check_keys(env, _ENV_KEYS)
    try:
        common = env.getboolean("common_electrode", fallback=True)
    except ValueError:
        raise ConfigError("[environment] common_electrode is not a boolean") from None

    resonator = None
    rs = _section(cp, "resonator", required=False)
    if rs is not None:
        _check_keys(rs, _RES_KEYS)
        attached = _float(rs, "attached_capacitance", required=False)
        if attached is None:
            attached = port1.trap_capacitance
            if not common:
                attached += port2.trap_capacitance
        L = _float(rs, "inductance")
        c_r = _float(rs, "coil_capacitance")
        if "parallel_resistance" in rs:
            if "quality_factor" in rs:
                raise ValidationError("quality_factor", "give either parallel_resistance or quality_factor")
            resonator = Resonator(L, c_r, _float(rs, "parallel_resistance"), attached)
        elif "quality_factor" in rs:
            resonator = Resonator.from_quality_factor(L, c_r, _float(rs, "quality_factor"), attached)
        else:
            raise ValidationError("parallel_resistance", "missing in [resonator]")

    def env_hz(key, default=None):
        v = _float(env, key, required=False, default=None)
        return default if v is None else rad(v)

    scenario = CouplingScenario(
        ion1=ion1,
        port1=port1,
        ion2=ion2,
        port2=port2,
        resonator=resonator,
        circuit_temperature=_float(env, "circuit_temperature"),
        doppler_limit=_float(env, "doppler_limit"),
        resonator_detuning=env_hz("resonator_detuning", 0.0),
        ion_frequency_mismatch=env_hz("ion_frequency_mismatch", 0.0),
        axial_frequency=env_hz("axial_frequency"),
        laser_damping=_float(env, "laser_damping", required=False, default=0.0),
        common_electrode=common,
    )

    sim = _section(cp, "simulation")
    _check_keys(sim, _SIM_KEYS)
    params = SimulationParams(
        time_step=_float(sim, "time_step"),
        duration=_float(sim, "duration"),
        rng_seed=_int(sim, "rng_seed", required=False, default=0),
        ensemble_size=_int(sim, "ensemble_size", required=False, default=1),
        noise_bandwidth=_float(sim, "noise_bandwidth", required=False),
        coupling_time=_float(sim, "coupling_time", required=False),
        n_cycles=_int(sim, "n_cycles", required=False),
    )
    params.check_against(scenario)
    return scenario, params


def load_scenario_file(path) -> tuple[CouplingScenario, SimulationParams]:
    with open(path, encoding="utf-8") as fh:
        return load_scenario(fh.read())


def dump_scenario(scenario: CouplingScenario, params: SimulationParams) -> str:
    """Serialize back to configuration text (inverse of ``load_scenario``)."""
    cp = configparser.ConfigParser(interpolation=None)
    for label, ion in (("ion1", scenario.ion1), ("ion2", scenario.ion2)):
        cp[label] = {"name": ion.name, "charge": repr(ion.charge), "mass": repr(ion.mass), "count": str(ion.count)}
    for label, port in (("port1", scenario.port1), ("port2", scenario.port2)):
        cp[label] = {f.name: repr(getattr(port, f.name)) for f in fields(port)}
    if scenario.resonator is not None:
        cp["resonator"] = {f.name: repr(getattr(scenario.resonator, f.name)) for f in fields(scenario.resonator)}
    env = {}
    for key in _ENV_KEYS:
        v = getattr(scenario, key)
        if v is None:
            continue
        if key in _HZ_KEYS:
            v = hz(v)
        env[key] = str(v).lower() if isinstance(v, bool) else repr(v)
    cp["environment"] = env
    sim = {}
    for f in fields(params):
        v = getattr(params, f.name)
        if v is not None:
            sim[f.name] = repr(v)
    cp["simulation"] = sim
    buf = io.StringIO()
    cp.write(buf)
    return buf.getvalue()


def bundled_config(name: str) -> str:
    """Text of a configuration shipped with the package (``h2be_endcap``, ``h2be_tank``, ``arkr_at``, ``pb_pt``)."""
    if not name.endswith(".cfg"):
        name += ".cfg"
    return resources.files("tankcool").joinpath("configs", name).read_text(encoding="utf-8")
