"""Time-domain integration of the coupled axial motion.

Two engines are provided:

* the rotating-wave (RWA) amplitude equations, propagated exactly for the
  linear deterministic part with an additive Gaussian (Euler-Maruyama)
  noise increment per step. This is the workhorse for ensembles;
* a fourth-order Runge-Kutta integrator of the full second-order equations
  of motion, used as an oracle at short durations.

Amplitudes follow z_i = (A_i/2) e^{i w_i t} + c.c., so |A_i| is the
oscillation amplitude and E_i = N_i m_i w_i^2 |A_i|^2 / 2.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from functools import lru_cache
from typing import Optional, Sequence

import numpy as np
from scipy.linalg import expm

from .coupling import coupling_constants
from .model import CouplingScenario, SimulationParams, k_b

__all__ = [
    "StepSizeError",
    "IntegrationError",
    "DampingMatrix",
    "NoiseSource",
    "RwaState",
    "RwaSystem",
    "FullSystem",
    "Trajectory",
    "CoolingMap",
    "EnsembleRandom",
    "rwa_system",
    "full_system",
    "step_rwa",
    "propagate_rwa",
    "step_full",
    "rk4_matrix",
    "propagate_full",
    "full_energies",
    "simulate_exchange",
    "cooling_time",
    "cooling_time_map",
    "simulate_intermittent_cooling",
]


class StepSizeError(ValueError):
    """Time step too coarse for the requested dynamics."""


class IntegrationError(RuntimeError):
    """Integration produced non-finite amplitudes or could not proceed."""


@dataclass(frozen=True)
class DampingMatrix:
    """Energy damping rates (1/s). gamma_ij couples velocity of j into ion i."""

    g11: float = 0.0
    g12: float = 0.0
    g21: float = 0.0
    g22: float = 0.0

    def __post_init__(self):
        if self.g11 < 0 or self.g22 < 0:
            raise ValueError("diagonal damping rates must be non-negative")
        if self.g12 * self.g21 < 0:
            raise ValueError("cross damping terms must share a sign")

    @classmethod
    def from_resistance(cls, ion1, port1, ion2, port2, r_eff: float, laser: float = 0.0) -> "DampingMatrix":
        """gamma_ij = N_j q_i q_j R_eff / (m_i D_i D_j), plus laser damping on ion 2."""
        d1, d2 = port1.effective_distance, port2.effective_distance
        q1, q2 = ion1.charge, ion2.charge
        return cls(
            g11=ion1.count * q1 * q1 * r_eff / (ion1.mass * d1 * d1),
            g12=ion2.count * q1 * q2 * r_eff / (ion1.mass * d1 * d2),
            g21=ion1.count * q1 * q2 * r_eff / (ion2.mass * d1 * d2),
            g22=ion2.count * q2 * q2 * r_eff / (ion2.mass * d2 * d2) + laser,
        )

    @property
    def max_rate(self) -> float:
        return max(abs(self.g11), abs(self.g12), abs(self.g21), abs(self.g22))


@dataclass(frozen=True)
class NoiseSource:
    """White voltage noise on the shared electrode.

    ``psd`` is the one-sided spectral density S_U = 4 k_b T_0 R_eff (V^2/Hz).
    """

    psd: float = 0.0
    seed: int = 0

    def __post_init__(self):
        if self.psd < 0:
            raise ValueError("psd must be non-negative")

    @classmethod
    def johnson(cls, temperature: float, resistance: float, seed: int = 0) -> "NoiseSource":
        return cls(4.0 * k_b * temperature * resistance, seed)

    def voltage_rms(self, bandwidth: float) -> float:
        """U_noise = sqrt(S_U * bandwidth)."""
        return math.sqrt(self.psd * bandwidth)


@dataclass
class RwaState:
    """Complex amplitudes (scalars or ensemble arrays) at ``time``."""

    amplitude1: np.ndarray
    amplitude2: np.ndarray
    time: float = 0.0


@dataclass(frozen=True)
class RwaSystem:
    """Coefficients of the RWA amplitude equations.

    ``gain_i`` = N_i q_i / (N_i m_i D_i) converts electrode voltage into
    acceleration. ``laser_temperature`` adds an independent force on ion 2
    that balances ``laser_damping`` at that temperature.
    """

    omega1: float
    omega2: float
    c12: float
    c21: float
    damping: DampingMatrix
    mass1: float
    mass2: float
    gain1: float = 0.0
    gain2: float = 0.0
    noise: NoiseSource = NoiseSource()
    correlation: str = "common"
    laser_damping: float = 0.0
    laser_temperature: float = 0.0

    def __post_init__(self):
        if self.correlation not in ("common", "independent"):
            raise ValueError("correlation must be 'common' or 'independent'")

    @property
    def mismatch(self) -> float:
        return self.omega1 - self.omega2

    @property
    def rabi_frequency(self) -> float:
        return math.sqrt(abs(self.c12 * self.c21)) / (0.5 * (self.omega1 + self.omega2))

    def generator(self) -> np.ndarray:
        """Drift matrix in the frame (A1, A2 e^{-i dw t}), where it is time independent."""
        w1, w2, d = self.omega1, self.omega2, self.damping
        return np.array(
            [
                [-0.5 * d.g11, 1j * self.c12 / (2 * w1) - w2 * d.g12 / (2 * w1)],
                [1j * self.c21 / (2 * w2) - w1 * d.g21 / (2 * w2), -0.5 * d.g22 - 1j * self.mismatch],
            ],
            dtype=complex,
        )

    def noise_coefficients(self) -> np.ndarray:
        """Amplitude response per unit demodulated voltage per unit time."""
        return np.array([-1j * self.gain1 / self.omega1, -1j * self.gain2 / self.omega2])

    def laser_sigma(self) -> float:
        """Amplitude diffusion of ion 2 from the laser bath (per sqrt(s))."""
        if self.laser_damping <= 0 or self.laser_temperature <= 0:
            return 0.0
        return math.sqrt(2 * k_b * self.laser_temperature * self.laser_damping / (self.mass2 * self.omega2**2))

    def energies(self, a1, a2):
        return (
            0.5 * self.mass1 * self.omega1**2 * np.abs(a1) ** 2,
            0.5 * self.mass2 * self.omega2**2 * np.abs(a2) ** 2,
        )

    def thermal_mean_square(self, which: int, temperature: float) -> float:
        """<|A|^2> of a thermal state: 2 k_b T / (M w^2)."""
        m, w = (self.mass1, self.omega1) if which == 1 else (self.mass2, self.omega2)
        return 2 * k_b * temperature / (m * w * w)


@lru_cache(maxsize=256)
def _propagator(system: RwaSystem, dt: float) -> np.ndarray:
    return expm(system.generator() * dt)


def _check_rwa_step(system: RwaSystem, dt: float) -> None:
    if dt <= 0:
        raise StepSizeError("dt must be positive")
    if dt * abs(system.mismatch) >= 0.1:
        raise StepSizeError(f"dt*|dw| = {dt * abs(system.mismatch):.3g} must be < 0.1")
    if dt * max(system.damping.max_rate, system.laser_damping) >= 0.1:
        raise StepSizeError("dt*max(gamma) must be < 0.1")
    if dt * system.rabi_frequency >= 0.01:
        raise StepSizeError(f"dt*Omega_R = {dt * system.rabi_frequency:.3g} must be < 0.01")


class EnsembleRandom:
    """Independent random streams for each ensemble member.

    Member ``j`` draws from a generator seeded by ``SeedSequence(seed).spawn``
    so results do not depend on how an ensemble is split or ordered.
    """

    def __init__(self, seed: int, size: int):
        self.size = size
        self.generators = [np.random.default_rng(s) for s in np.random.SeedSequence(seed).spawn(size)]

    def complex_normal(self, n_steps: int, width: int = 1) -> np.ndarray:
        """Shape (n_steps, width, size); E|xi|^2 = 1."""
        out = np.empty((n_steps, width, self.size), dtype=complex)
        for j, g in enumerate(self.generators):
            z = g.standard_normal((n_steps, width, 2))
            out[:, :, j] = (z[..., 0] + 1j * z[..., 1]) * math.sqrt(0.5)
        return out

    def thermal(self, mean_square: float) -> np.ndarray:
        """Complex amplitudes with |A|^2 ~ Exp(mean_square) and uniform phase."""
        out = np.empty(self.size, dtype=complex)
        for j, g in enumerate(self.generators):
            r2 = g.exponential(mean_square) if mean_square > 0 else 0.0
            out[j] = math.sqrt(r2) * np.exp(1j * g.uniform(0, 2 * math.pi))
        return out


def step_rwa(state: RwaState, system: RwaSystem, dt: float, xi=None) -> RwaState:
    """Advance one step of the RWA amplitude equations.

    ``xi`` holds unit complex normals: shape (1, n) for common-mode noise,
    (2, n) for independent noise, with a further row for the laser bath when
    it is active. Omit it (or pass zeros) for noise-free steps.
    """
    _check_rwa_step(system, dt)
    a1 = np.asarray(state.amplitude1, dtype=complex)
    a2 = np.asarray(state.amplitude2, dtype=complex)
    dw = system.mismatch
    b2 = a2 * np.exp(-1j * dw * state.time)
    p = _propagator(system, dt)
    n1 = p[0, 0] * a1 + p[0, 1] * b2
    n2 = p[1, 0] * a1 + p[1, 1] * b2
    if xi is not None:
        d1, d2 = _noise_increments(system, dt, np.asarray(xi))
        n1 = n1 + d1
        n2 = n2 + d2
    t = state.time + dt
    out = RwaState(n1, n2 * np.exp(1j * dw * t), t)
    if not (np.all(np.isfinite(out.amplitude1)) and np.all(np.isfinite(out.amplitude2))):
        raise IntegrationError("non-finite amplitude")
    return out


def _noise_matrix(system: RwaSystem, dt: float) -> np.ndarray:
    """Map from unit complex normals (one per column) to the amplitude increments of both ions."""
    # The voltage sample has rms sqrt(S_U / (2 dt)) (bandwidth 1/(2 dt)); the
    # increment is that sample times dt.
    width = noise_width(system)
    out = np.zeros((2, width), dtype=complex)
    if not width:
        return out
    u = math.sqrt(system.noise.psd / (2.0 * dt)) * dt
    c = system.noise_coefficients() * u
    if system.correlation == "common":
        out[:, 0] = c
        k = 1
    else:
        out[0, 0], out[1, 1] = c
        k = 2
    sl = system.laser_sigma()
    if sl > 0:
        out[1, k] = sl * math.sqrt(dt)
    return out


def _noise_increments(system: RwaSystem, dt: float, xi: np.ndarray):
    d = _noise_matrix(system, dt) @ np.asarray(xi).reshape(noise_width(system), -1)
    return d[0], d[1]


def noise_width(system: RwaSystem) -> int:
    """Number of independent complex normals consumed per step."""
    laser = 1 if system.laser_sigma() > 0 else 0
    if system.noise.psd <= 0 and not laser:
        return 0
    return (1 if system.correlation == "common" else 2) + laser


def propagate_rwa(
    state: RwaState,
    system: RwaSystem,
    dt: float,
    n_steps: int,
    rng: Optional[EnsembleRandom] = None,
    record_every: int = 0,
):
    """Advance ``n_steps``; optionally record ensemble-mean energies every ``record_every`` steps.

    Returns the final state and, if recording, arrays (times, E1, E2) that
    include the initial sample.
    """
    _check_rwa_step(system, dt)
    width = noise_width(system)
    if width and rng is None:
        raise ValueError("a random source is required when noise is active")
    # The e^{-i dw t} frame makes the drift constant; noise in that frame is
    # common to both ions (the same voltage demodulated at each frequency).
    dw = system.mismatch
    p = _propagator(system, dt)
    nm = _noise_matrix(system, dt)
    a1 = np.array(state.amplitude1, dtype=complex, ndmin=1)
    b2 = np.array(state.amplitude2, dtype=complex, ndmin=1) * np.exp(-1j * dw * state.time)
    rec_t, rec_e1, rec_e2 = [], [], []

    def record(i):
        e1, e2 = system.energies(a1, b2)
        rec_t.append(state.time + i * dt)
        rec_e1.append(float(np.mean(e1)))
        rec_e2.append(float(np.mean(e2)))

    if record_every:
        record(0)
    block = 512
    done = 0
    if not width:
        # Deterministic: jump between samples with a power of the one-step map.
        stride = record_every or n_steps
        q = np.linalg.matrix_power(p, stride)
        while done + stride <= n_steps:
            a1, b2 = q[0, 0] * a1 + q[0, 1] * b2, q[1, 0] * a1 + q[1, 1] * b2
            done += stride
            if record_every:
                record(done)
    while done < n_steps:
        nb = min(block, n_steps - done)
        xi = rng.complex_normal(nb, width) if width else None
        for s in range(nb):
            a1, b2 = p[0, 0] * a1 + p[0, 1] * b2, p[1, 0] * a1 + p[1, 1] * b2
            if xi is not None:
                d = nm @ xi[s]
                a1 = a1 + d[0]
                b2 = b2 + d[1]
            if record_every and (done + s + 1) % record_every == 0:
                record(done + s + 1)
        done += nb
        if not (np.all(np.isfinite(a1)) and np.all(np.isfinite(b2))):
            raise IntegrationError("non-finite amplitude")
    t = state.time + n_steps * dt
    final = RwaState(a1, b2 * np.exp(1j * dw * t), t)
    if record_every:
        return final, (np.array(rec_t), np.array(rec_e1), np.array(rec_e2))
    return final


def rwa_system(
    scenario: CouplingScenario,
    *,
    noise: Optional[bool] = None,
    laser_damping: Optional[float] = None,
    correlation: str = "common",
    seed: int = 0,
) -> RwaSystem:
    """Build the RWA coefficients for a scenario.

    With a resonator the ions see resistive damping and (by default) Johnson
    noise from R_eff at the working point; without one, only the reactive
    endcap coupling. ``laser_damping`` (default: the scenario's) is added to
    gamma_22 and thermalises ion 2 towards the Doppler limit.
    """
    if noise is None:
        noise = scenario.resonator is not None
    gl = scenario.laser_damping if laser_damping is None else laser_damping
    w2 = scenario.working_frequency
    w1 = w2 + scenario.ion_frequency_mismatch
    cap = scenario.coupling_capacitance
    c12, c21 = coupling_constants(scenario.ion1, scenario.port1, scenario.ion2, scenario.port2, cap)
    r_eff = scenario.effective_resistance
    damping = DampingMatrix.from_resistance(
        scenario.ion1, scenario.port1, scenario.ion2, scenario.port2, r_eff, laser=gl
    )
    src = NoiseSource.johnson(scenario.circuit_temperature, r_eff, seed) if noise else NoiseSource(0.0, seed)
    return RwaSystem(
        omega1=w1,
        omega2=w2,
        c12=c12,
        c21=c21,
        damping=damping,
        mass1=scenario.ion1.total_mass,
        mass2=scenario.ion2.total_mass,
        gain1=scenario.ion1.charge / (scenario.ion1.mass * scenario.port1.effective_distance),
        gain2=scenario.ion2.charge / (scenario.ion2.mass * scenario.port2.effective_distance),
        noise=src,
        correlation=correlation,
        laser_damping=gl,
        laser_temperature=scenario.doppler_limit if noise else 0.0,
    )


# -- full equations of motion -------------------------------------------


@dataclass(frozen=True)
class FullSystem:
    omega1: float
    omega2: float
    c12: float
    c21: float
    damping: DampingMatrix
    mass1: float
    mass2: float
    gain1: float = 0.0
    gain2: float = 0.0

    def matrix(self) -> np.ndarray:
        """d/dt (z1, v1, z2, v2) = M @ state for zero noise voltage."""
        d = self.damping
        return np.array(
            [
                [0, 1, 0, 0],
                [-self.omega1**2, -d.g11, -self.c12, -d.g12],
                [0, 0, 0, 1],
                [-self.c21, -d.g21, -self.omega2**2, -d.g22],
            ],
            dtype=float,
        )


def full_system(scenario: CouplingScenario, *, damping: bool = True, capacitance: Optional[float] = None) -> FullSystem:
    w2 = scenario.working_frequency
    w1 = w2 + scenario.ion_frequency_mismatch
    cap = scenario.coupling_capacitance if capacitance is None else capacitance
    c12, c21 = coupling_constants(scenario.ion1, scenario.port1, scenario.ion2, scenario.port2, cap)
    dm = (
        DampingMatrix.from_resistance(
            scenario.ion1, scenario.port1, scenario.ion2, scenario.port2, scenario.effective_resistance,
            laser=scenario.laser_damping,
        )
        if damping
        else DampingMatrix()
    )
    return FullSystem(
        w1, w2, c12, c21, dm, scenario.ion1.total_mass, scenario.ion2.total_mass,
        scenario.ion1.charge / (scenario.ion1.mass * scenario.port1.effective_distance),
        scenario.ion2.charge / (scenario.ion2.mass * scenario.port2.effective_distance),
    )


def _check_full_step(system: FullSystem, dt: float) -> None:
    if dt <= 0 or dt * max(system.omega1, system.omega2) >= 0.05:
        raise StepSizeError("dt*omega must be in (0, 0.05)")


def step_full(state, system: FullSystem, dt: float, u_noise: float = 0.0) -> np.ndarray:
    """One classical RK4 step of the full equations; the noise voltage is held over the step."""
    _check_full_step(system, dt)
    m = system.matrix()
    f = np.array([0.0, -system.gain1 * u_noise, 0.0, -system.gain2 * u_noise])
    y = np.asarray(state, dtype=float)

    def rhs(v):
        return m @ v + f

    k1 = rhs(y)
    k2 = rhs(y + 0.5 * dt * k1)
    k3 = rhs(y + 0.5 * dt * k2)
    k4 = rhs(y + dt * k3)
    return y + dt / 6.0 * (k1 + 2 * k2 + 2 * k3 + k4)


def rk4_matrix(system: FullSystem, dt: float) -> np.ndarray:
    """The linear map that one noise-free ``step_full`` applies to the state."""
    _check_full_step(system, dt)
    h = system.matrix() * dt
    eye = np.eye(4)
    return eye + h @ (eye + h @ (eye / 2 + h @ (eye / 6 + h / 24)))


def propagate_full(state, system: FullSystem, dt: float, n_samples: int, steps_per_sample: int) -> np.ndarray:
    """Noise-free RK4 trajectory sampled every ``steps_per_sample`` steps; shape (n_samples+1, 4)."""
    q = np.linalg.matrix_power(rk4_matrix(system, dt), steps_per_sample)
    out = np.empty((n_samples + 1, 4))
    out[0] = state
    for i in range(n_samples):
        out[i + 1] = q @ out[i]
    return out


def full_energies(states, system: FullSystem):
    """Per-ion energies and the conserved total (including the coupling term)."""
    s = np.atleast_2d(states)
    z1, v1, z2, v2 = s.T
    e1 = 0.5 * system.mass1 * (v1**2 + system.omega1**2 * z1**2)
    e2 = 0.5 * system.mass2 * (v2**2 + system.omega2**2 * z2**2)
    coupling = system.mass1 * system.c12 * z1 * z2
    return e1, e2, e1 + e2 + coupling


# -- scenario-level simulations -----------------------------------------


@dataclass
class Trajectory:
    """Ensemble-mean energies and temperatures on a time grid."""

    times: np.ndarray
    energy1: np.ndarray
    energy2: np.ndarray
    ensemble_size: int = 1
    meta: dict = field(default_factory=dict)

    @property
    def temperature1(self) -> np.ndarray:
        return self.energy1 / k_b

    @property
    def temperature2(self) -> np.ndarray:
        return self.energy2 / k_b

    @property
    def total_energy(self) -> np.ndarray:
        return self.energy1 + self.energy2

    def __len__(self):
        return len(self.times)


def _initial_amplitudes(system, rng, temperatures, thermal, n):
    out = []
    for which, temp in ((1, temperatures[0]), (2, temperatures[1])):
        ms = system.thermal_mean_square(which, temp)
        if thermal:
            out.append(rng.thermal(ms))
        else:
            phases = np.array([g.uniform(0, 2 * math.pi) for g in rng.generators])
            out.append(math.sqrt(ms) * np.exp(1j * phases))
    return out


def simulate_exchange(
    scenario: CouplingScenario,
    params: SimulationParams,
    *,
    gamma_l: Optional[float] = None,
    noise: Optional[bool] = None,
    initial_temperatures: Optional[Sequence[float]] = None,
    thermal_start: bool = True,
    record_every: int = 1,
    correlation: str = "common",
) -> Trajectory:
    """Integrate the RWA equations from ion 1 at T_0 and ion 2 at T_D.

    ``gamma_l`` overrides the scenario's laser damping on ion 2. Noise defaults
    to on when a resonator is present and off for a bare endcap.
    """
    system = rwa_system(scenario, noise=noise, laser_damping=gamma_l, correlation=correlation, seed=params.rng_seed)
    temps = (
        (scenario.circuit_temperature, scenario.doppler_limit)
        if initial_temperatures is None
        else tuple(initial_temperatures)
    )
    rng = EnsembleRandom(params.rng_seed, params.ensemble_size)
    a1, a2 = _initial_amplitudes(system, rng, temps, thermal_start, params.ensemble_size)
    _, (t, e1, e2) = propagate_rwa(
        RwaState(a1, a2, 0.0), system, params.time_step, params.n_steps, rng, record_every=record_every
    )
    return Trajectory(t, e1, e2, params.ensemble_size, {"gamma_l": system.laser_damping})


def cooling_time(times, total_energy) -> float:
    """First time the energy envelope drops to E(0)/e; ``inf`` if it never does.

    The envelope is the running maximum taken from the end of the record, so
    coherent exchange ripple does not trigger an early crossing.
    """
    e = np.asarray(total_energy, dtype=float)
    env = np.maximum.accumulate(e[::-1])[::-1]
    below = np.nonzero(env <= e[0] / math.e)[0]
    if below.size == 0:
        return math.inf
    i = below[0]
    if i == 0:
        return float(times[0])
    # linear interpolation of the envelope crossing
    t0, t1 = times[i - 1], times[i]
    y0, y1 = env[i - 1], env[i]
    target = e[0] / math.e
    return float(t0 + (t1 - t0) * (y0 - target) / (y0 - y1)) if y0 != y1 else float(t1)


@dataclass
class CoolingMap:
    gamma_l: np.ndarray
    mismatch: np.ndarray
    tau_cool: np.ndarray  # shape (len(gamma_l), len(mismatch))

    @property
    def converged(self) -> np.ndarray:
        return np.isfinite(self.tau_cool)


def cooling_time_map(scenario: CouplingScenario, gamma_grid, mismatch_grid, params: SimulationParams) -> CoolingMap:
    """tau_cool over a grid of laser damping (1/s) and ion mismatch (rad/s), noise off.

    Entries that never reach E(0)/e within ``params.duration`` are ``inf``;
    check ``CoolingMap.converged``.
    """
    gamma_grid = np.asarray(gamma_grid, dtype=float)
    mismatch_grid = np.asarray(mismatch_grid, dtype=float)
    if gamma_grid.size == 0 or mismatch_grid.size == 0:
        raise ValueError("grids must be non-empty")
    tau = np.empty((gamma_grid.size, mismatch_grid.size))
    from dataclasses import replace

    base = rwa_system(scenario, noise=False, laser_damping=0.0).damping.max_rate
    for i, gl in enumerate(gamma_grid):
        # Strong laser damping needs a finer step; samples stay on the
        # params.time_step grid.
        sub = max(1, int(math.ceil(params.time_step * (gl + base) / 0.05)))
        p = replace(params, time_step=params.time_step / sub)
        for j, dw in enumerate(mismatch_grid):
            sc = replace(scenario, ion_frequency_mismatch=float(dw))
            traj = simulate_exchange(sc, p, gamma_l=float(gl), noise=False, record_every=sub)
            tau[i, j] = cooling_time(traj.times, traj.total_energy)
    return CoolingMap(gamma_grid, mismatch_grid, tau)


def simulate_intermittent_cooling(
    scenario: CouplingScenario,
    tau_c: float,
    n_cycles: int,
    params: SimulationParams,
    *,
    noise: bool = True,
    thermal_start: bool = True,
    correlation: str = "common",
) -> Trajectory:
    """Repeated cycles of instantaneous Doppler reset of ion 2 and free coupling for ``tau_c``.

    Each cycle redraws ion 2 from a thermal state at T_D, then integrates the
    RWA equations with resonator damping and Johnson noise (no laser). One
    sample per cycle is recorded, starting with the initial state.
    """
    system = rwa_system(scenario, noise=noise, laser_damping=0.0, correlation=correlation, seed=params.rng_seed)
    mod = math.hypot(system.rabi_frequency, system.mismatch)
    if not tau_c > 0 or tau_c >= math.pi / mod:
        raise ValueError(f"tau_c must be in (0, pi/Omega'_R = {math.pi / mod:.4g} s)")
    if n_cycles < 0:
        raise ValueError("n_cycles must be >= 0")
    steps = max(1, int(math.ceil(tau_c / params.time_step - 1e-9)))
    dt = tau_c / steps
    rng = EnsembleRandom(params.rng_seed, params.ensemble_size)
    a1, _ = _initial_amplitudes(system, rng, (scenario.circuit_temperature, 0.0), thermal_start, params.ensemble_size)
    ms2 = system.thermal_mean_square(2, scenario.doppler_limit)
    times = [0.0]
    e1m = [float(np.mean(system.energies(a1, 0)[0]))]
    e2m = [float(ms2 * 0.5 * system.mass2 * system.omega2**2)]
    state = RwaState(a1, np.zeros_like(a1), 0.0)
    for c in range(n_cycles):
        state = RwaState(state.amplitude1, rng.thermal(ms2), state.time)
        state = propagate_rwa(state, system, dt, steps, rng if noise else None)
        e1, e2 = system.energies(state.amplitude1, state.amplitude2)
        times.append(state.time)
        e1m.append(float(np.mean(e1)))
        e2m.append(float(np.mean(e2)))
    return Trajectory(
        np.array(times), np.array(e1m), np.array(e2m), params.ensemble_size,
        {"tau_c": tau_c, "dt": dt, "rabi_frequency": system.rabi_frequency},
    )
