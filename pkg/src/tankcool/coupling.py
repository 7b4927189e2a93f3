"""Closed-form coupling quantities for two ions sharing an electrode or tank circuit."""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .model import CouplingScenario, IonSpecies, TrapPort

__all__ = [
    "CouplingSummary",
    "coupling_constants",
    "rabi_frequency",
    "exchange_time",
    "shifted_axial_frequency",
    "mode_frequencies",
    "mode_coefficients",
    "coupling_summary",
]


@dataclass(frozen=True)
class CouplingSummary:
    rabi_frequency: float
    exchange_time: float
    shifted_frequencies: tuple[float, float]
    mode_frequencies: tuple[float, float]
    modified_rabi: float
    coupling_constants: tuple[float, float]
    mode_coefficients: tuple[float, float]
    coupling_capacitance: float


def coupling_constants(
    ion1: IonSpecies, port1: TrapPort, ion2: IonSpecies, port2: TrapPort, capacitance: float
) -> tuple[float, float]:
    """C_ij = N_j q_i q_j / (m_i D_i D_j C), units 1/s^2."""
    dd = port1.effective_distance * port2.effective_distance * capacitance
    qq = ion1.charge * ion2.charge
    return ion2.count * qq / (ion1.mass * dd), ion1.count * qq / (ion2.mass * dd)


def rabi_frequency(
    ion1: IonSpecies,
    port1: TrapPort,
    ion2: IonSpecies,
    port2: TrapPort,
    coupling_capacitance: float,
    omega: float,
) -> float:
    """Energy-exchange Rabi frequency (rad/s).

    ``coupling_capacitance`` is the bare endcap C_T or the tank's C_eff;
    ``omega`` is the common axial frequency.
    """
    if coupling_capacitance <= 0 or omega <= 0:
        raise ValueError("coupling_capacitance and omega must be positive")
    return (
        abs(ion1.charge * ion2.charge)
        * math.sqrt(ion1.count * ion2.count / (ion1.mass * ion2.mass))
        / (omega * port1.effective_distance * port2.effective_distance * coupling_capacitance)
    )


def exchange_time(omega_r: float) -> float:
    return math.pi / omega_r


def shifted_axial_frequency(ion: IonSpecies, port: TrapPort, c_eff: float, omega: float) -> float:
    """Axial frequency pulled by the reactive load: omega + N q^2 / (2 m omega D^2 C_eff)."""
    if c_eff <= 0:
        raise ValueError("c_eff must be positive")
    return omega + ion.count * ion.charge**2 / (2.0 * ion.mass * omega * port.effective_distance**2 * c_eff)


def mode_frequencies(w1: float, w2: float, omega_r: float) -> tuple[float, float, float]:
    """Common/counter mode frequencies and the modified Rabi frequency.

    Returns ``(omega_u, omega_v, sqrt(omega_r**2 + (w1 - w2)**2))`` with
    omega_u >= omega_v.
    """
    if w1 <= 0 or w2 <= 0:
        raise ValueError("frequencies must be positive")
    mod = math.hypot(omega_r, w1 - w2)
    s = w1 + w2
    return 0.5 * (s + mod), 0.5 * (s - mod), mod


def mode_coefficients(w1: float, w2: float, c12: float, c21: float) -> tuple[float, float]:
    """alpha, beta of u = z1 + alpha z2 and v = z1 - beta z2.

    Rows of the inverse eigenvector matrix of the stiffness matrix
    [[w1^2, C12], [C21, w2^2]] give the mode coordinates; each row is scaled
    so its z1 coefficient is one. u is the higher-frequency mode.
    """
    k = np.array([[w1**2, c12], [c21, w2**2]], dtype=float)
    lam, vec = np.linalg.eig(k)
    order = np.argsort(lam.real)[::-1]
    rows = np.linalg.inv(vec[:, order]).real
    alpha = rows[0, 1] / rows[0, 0]
    beta = -rows[1, 1] / rows[1, 0]
    return float(alpha), float(beta)


def coupling_summary(scenario: CouplingScenario) -> CouplingSummary:
    """Evaluate every closed-form coupling quantity for a scenario.

    Ion 2 sits at the working frequency and ion 1 at working + mismatch; the
    single omega entering the Rabi frequency is their mean.
    """
    w2 = scenario.working_frequency
    w1 = w2 + scenario.ion_frequency_mismatch
    cap = scenario.coupling_capacitance
    w_mean = 0.5 * (w1 + w2)
    om = rabi_frequency(scenario.ion1, scenario.port1, scenario.ion2, scenario.port2, cap, w_mean)
    wu, wv, mod = mode_frequencies(w1, w2, om)
    c12, c21 = coupling_constants(scenario.ion1, scenario.port1, scenario.ion2, scenario.port2, cap)
    return CouplingSummary(
        rabi_frequency=om,
        exchange_time=exchange_time(om),
        shifted_frequencies=(w1, w2),
        mode_frequencies=(wu, wv),
        modified_rabi=mod,
        coupling_constants=(c12, c21),
        mode_coefficients=mode_coefficients(w1, w2, c12, c21),
        coupling_capacitance=cap,
    )
