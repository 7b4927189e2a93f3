"""Closed-form theory of intermittent sympathetic cooling.

Within one coupling interval tau_c the target ion (1) hands a fraction
P ~ (Omega_R tau_c / 2)^2 of its energy to the freshly laser-cooled ion (2),
while Johnson noise of the tank heats both ions with time constants
tau_1 = 1/gamma_11 and tau_2 = 1/gamma_22. Balancing these per cycle gives
the equilibrium temperature, the optimal coupling time and the exponential
approach to equilibrium.
"""

from __future__ import annotations

import math
import warnings
from dataclasses import dataclass, replace
from typing import Optional, Sequence

import numpy as np
from scipy.optimize import curve_fit

from .coupling import rabi_frequency
from .model import CouplingScenario, SimulationParams, k_b
from .resonator import ion_resonator_rate

__all__ = [
    "ValidityWarning",
    "RegimeError",
    "IntermittentTheory",
    "resonator_times",
    "transferred_energies",
    "equilibrium_temperature",
    "optimal_coupling",
    "effective_time_constant",
    "cooling_curve",
    "fit_cooling_curve",
    "intermittent_steady_state",
    "intermittent_theory",
    "ScanRow",
    "detuning_scan",
]


class ValidityWarning(UserWarning):
    """Inputs lie outside tau_c << pi/Omega_R << tau_i, where the short-time expansion holds."""


class RegimeError(ValueError):
    """The requested closed form is undefined for these time constants."""


def _check_validity(omega_r, tau_c, tau1, tau2):
    if omega_r * tau_c >= 0.3 * math.pi or math.pi / omega_r >= 0.3 * min(tau1, tau2):
        warnings.warn(
            f"short-time expansion outside its range (Omega_R*tau_c = {omega_r * tau_c:.3g}, "
            f"pi/Omega_R = {math.pi / omega_r:.3g} s, min tau_i = {min(tau1, tau2):.3g} s)",
            ValidityWarning,
            stacklevel=3,
        )


@dataclass(frozen=True)
class IntermittentTheory:
    transferred_12: float
    transferred_21: float
    equilibrium_temperature: float
    minimal_temperature: float
    optimal_coupling_time: float
    effective_time_constant: float
    resonator_times: tuple[float, float]
    rabi_frequency: float
    coupling_time: float


def resonator_times(scenario: CouplingScenario) -> tuple[float, float]:
    """(tau_1Res, tau_2Res): inverse resistive damping rates of each ion on the tank."""
    r = scenario.effective_resistance
    if r <= 0:
        return math.inf, math.inf
    return (
        1.0 / ion_resonator_rate(scenario.ion1, scenario.port1, r),
        1.0 / ion_resonator_rate(scenario.ion2, scenario.port2, r),
    )


def transferred_energies(omega_r, tau_c, e1_0, t_d, t_0, tau1, tau2, check=True):
    """Mean energies moved 1->2 and 2->1 during one coupling interval (joules).

    Ion 2 starts each interval at k_b T_D; the noise heating of each ion while
    coupled adds k_b T_0 tau_c / (3 tau_i) to what it can pass on.
    """
    if check and tau_c > 0:
        _check_validity(omega_r, tau_c, tau1, tau2)
    f = 0.25 * omega_r**2 * tau_c**2
    return (
        f * (e1_0 + k_b * t_0 * tau_c / (3.0 * tau1)),
        f * (k_b * t_d + k_b * t_0 * tau_c / (3.0 * tau2)),
    )


def equilibrium_temperature(omega_r, tau_c, t_d, t_0, tau1, tau2=math.inf, check=True, cross_term=False) -> float:
    """T_1,eq = T_D + T_0 tau_c / (3 tau_2) + 4 T_0 / (Omega_R^2 tau_c tau_1).

    Passing ``tau2=inf`` drops the ion-2 heating term, which is the form for
    tau_1 << tau_2. With ``cross_term=True`` the balance of the transferred
    energies is solved exactly, which subtracts T_0 tau_c / (3 tau_1); the
    closed-form optimum of ``optimal_coupling`` minimises that version.
    """
    if tau_c <= 0:
        raise ValueError("tau_c must be positive")
    if check:
        _check_validity(omega_r, tau_c, tau1, tau2)
    t = t_d + t_0 * tau_c / (3.0 * tau2) + 4.0 * t_0 / (omega_r**2 * tau_c * tau1)
    if cross_term:
        t -= t_0 * tau_c / (3.0 * tau1)
    return t


def optimal_coupling(omega_r, t_d, t_0, tau1, tau2) -> tuple[float, float]:
    """(T_1,min, tau_c,opt) for tau_1 > tau_2.

    For tau_1 <= tau_2 the optimum does not exist in this form; use
    ``equilibrium_temperature`` with ``tau2=inf`` instead.
    """
    if not tau1 > tau2:
        raise RegimeError(
            "tau_1Res must exceed tau_2Res for an optimal coupling time; "
            "use equilibrium_temperature(..., tau2=inf) in the opposite regime"
        )
    t_min = t_0 * 4.0 / (math.sqrt(3.0) * omega_r) * math.sqrt(1.0 / (tau1 * tau2)) + t_d
    tau_opt = 2.0 / omega_r * math.sqrt(3.0 * tau2 / (tau1 - tau2))
    return t_min, tau_opt


def effective_time_constant(omega_r, tau_c) -> float:
    """tau_eff = 4 / (Omega_R^2 tau_c)."""
    if omega_r <= 0 or tau_c <= 0:
        return math.inf
    return 4.0 / (omega_r**2 * tau_c)


def cooling_curve(t_0, t_eq, omega_r, tau_c, t) -> np.ndarray:
    """T_1(t) = (T_0 - T_eq) exp(-t / tau_eff) + T_eq."""
    tau = effective_time_constant(omega_r, tau_c)
    t = np.asarray(t, dtype=float)
    return (t_0 - t_eq) * np.exp(-t / tau) + t_eq


def _exp_model(t, a, t_eq, tau):
    return a * np.exp(-t / tau) + t_eq


def fit_cooling_curve(times, temps, p0: Optional[Sequence[float]] = None):
    """Least-squares fit of A exp(-t/tau) + T_eq; returns (A, T_eq, tau)."""
    times = np.asarray(times, dtype=float)
    temps = np.asarray(temps, dtype=float)
    if p0 is None:
        late = temps[-max(1, len(temps) // 4):].mean()
        target = late + (temps[0] - late) / math.e
        idx = int(np.argmax(temps <= target)) or len(temps) // 4 or 1
        p0 = (temps[0] - late, late, max(times[idx] - times[0], times[1] - times[0]))
    popt, _ = curve_fit(_exp_model, times - times[0], temps, p0=p0, maxfev=20000)
    return tuple(float(v) for v in popt)


def intermittent_steady_state(omega_r, mismatch, tau_c, t_d, t_0, tau1, tau2) -> tuple[float, float]:
    """(T_eq, tau_eff) for ions detuned by ``mismatch`` (rad/s).

    Uses the exact two-mode transfer probability
    P = (Omega_R/Omega')^2 sin^2(Omega' tau_c / 2) and its time integral for
    the noise injected during the interval. For mismatch -> 0 and small
    Omega_R tau_c this reduces to the short-time expressions above (up to the
    T_0 tau_c / (3 tau_1) cross term they neglect).
    """
    om = math.hypot(omega_r, mismatch)
    r = (omega_r / om) ** 2
    p = r * math.sin(0.5 * om * tau_c) ** 2
    integ = r * (0.5 * tau_c - math.sin(om * tau_c) / (2.0 * om))
    heat = t_0 * (integ / tau2 + (tau_c - integ) / tau1)
    return t_d + heat / p, tau_c / p


def intermittent_theory(scenario: CouplingScenario, tau_c: Optional[float] = None) -> IntermittentTheory:
    """All closed-form intermittent-cooling quantities; ``tau_c`` defaults to the optimum."""
    tau1, tau2 = resonator_times(scenario)
    omega = scenario.working_frequency + 0.5 * scenario.ion_frequency_mismatch
    om = rabi_frequency(scenario.ion1, scenario.port1, scenario.ion2, scenario.port2, scenario.coupling_capacitance, omega)
    t0, td = scenario.circuit_temperature, scenario.doppler_limit
    if tau1 > tau2:
        t_min, tau_opt = optimal_coupling(om, td, t0, tau1, tau2)
    else:
        t_min, tau_opt = math.nan, math.nan
    tc = tau_opt if tau_c is None else tau_c
    if not math.isfinite(tc):
        raise RegimeError("no optimal coupling time in this regime; pass tau_c explicitly")
    d12, d21 = transferred_energies(om, tc, k_b * t0, td, t0, tau1, tau2)
    t_eq = equilibrium_temperature(om, tc, td, t0, tau1, tau2 if tau1 > tau2 else math.inf, check=False)
    return IntermittentTheory(
        transferred_12=d12,
        transferred_21=d21,
        equilibrium_temperature=t_eq,
        minimal_temperature=t_min,
        optimal_coupling_time=tau_opt,
        effective_time_constant=effective_time_constant(om, tc),
        resonator_times=(tau1, tau2),
        rabi_frequency=om,
        coupling_time=tc,
    )


@dataclass(frozen=True)
class ScanRow:
    value: float  # grid value in rad/s (d_omega or ion mismatch)
    equilibrium_temperature: float
    effective_time_constant: float
    coupling_time: float
    method: str


def detuning_scan(
    scenario: CouplingScenario,
    grid,
    method: str = "intermittent",
    *,
    axis: str = "resonator",
    tau_c: Optional[float] = None,
    gamma_l: Optional[float] = None,
    params: Optional[SimulationParams] = None,
) -> list[ScanRow]:
    """(T_eq, tau_eff) across a grid of resonator detunings or ion mismatches (rad/s).

    ``axis="resonator"`` varies d_omega; ``axis="mismatch"`` varies the ion
    frequency difference at fixed d_omega. The intermittent method is
    analytic: with ``tau_c=None`` the optimal coupling time of each point is
    used on the resonator axis, and that of the zero-mismatch scenario on the
    mismatch axis. The continuous method simulates laser cooling at damping
    ``gamma_l`` (1/s) with ``params`` and reads T_eq from the last quarter of
    the ensemble mean and tau_eff from an exponential fit.
    """
    if axis not in ("resonator", "mismatch"):
        raise ValueError("axis must be 'resonator' or 'mismatch'")
    if method not in ("intermittent", "continuous"):
        raise ValueError("method must be 'intermittent' or 'continuous'")
    key = "resonator_detuning" if axis == "resonator" else "ion_frequency_mismatch"
    if axis == "mismatch" and tau_c is None and method == "intermittent":
        tau_c = intermittent_theory(replace(scenario, ion_frequency_mismatch=0.0)).coupling_time
    rows = []
    for v in np.asarray(grid, dtype=float):
        sc = replace(scenario, **{key: float(v)})
        if method == "intermittent":
            th = intermittent_theory(sc, tau_c)
            tau1, tau2 = th.resonator_times
            t_eq, t_eff = intermittent_steady_state(
                th.rabi_frequency, sc.ion_frequency_mismatch, th.coupling_time,
                sc.doppler_limit, sc.circuit_temperature, tau1, tau2,
            )
            rows.append(ScanRow(float(v), t_eq, t_eff, th.coupling_time, method))
        else:
            if gamma_l is None or params is None:
                raise ValueError("continuous method needs gamma_l and params")
            from .dynamics import simulate_exchange

            traj = simulate_exchange(sc, params, gamma_l=gamma_l, noise=True)
            temps = traj.temperature1
            n = len(temps)
            t_eq = float(temps[-max(1, n // 4):].mean())
            try:
                _, _, tau = fit_cooling_curve(traj.times, temps)
            except RuntimeError:
                tau = math.nan
            rows.append(ScanRow(float(v), t_eq, tau, math.nan, method))
    return rows
