"""Tank-circuit impedance and its reduction to an effective series R/C.

Sign convention: time dependence e^{+i omega t}, so a capacitive reactance
has a negative imaginary part. Above resonance the tank looks capacitive
(C_eff > 0); below resonance C_eff comes out negative (inductive).
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from scipy.optimize import brentq

from .model import IonSpecies, Resonator, TrapPort

__all__ = [
    "WithinResonanceError",
    "EffectiveCircuit",
    "impedance",
    "impedance_closed_form",
    "effective_circuit",
    "ion_resonator_rate",
    "detuning_for_capacitance",
]


class WithinResonanceError(ValueError):
    """Working point lies inside the resonance width; the series R/C picture does not apply."""


@dataclass(frozen=True)
class EffectiveCircuit:
    effective_resistance: float
    effective_capacitance: float
    working_frequency: float


def impedance(res: Resonator, omega):
    """Z_LC(omega) = (1/R_p + i omega C + 1/(i omega L))^-1, ohms. Accepts arrays."""
    omega = np.asarray(omega, dtype=float)
    y = 1.0 / res.parallel_resistance + 1j * omega * res.total_capacitance + 1.0 / (1j * omega * res.inductance)
    z = 1.0 / y
    return z if z.ndim else complex(z)


def impedance_closed_form(res: Resonator, d_omega):
    """(Re Z, Im Z) written in terms of Q and the detuning from omega_R."""
    w_r = res.resonance_frequency
    q = res.quality_factor
    d_omega = np.asarray(d_omega, dtype=float)
    x = (w_r + d_omega) / w_r - w_r / (w_r + d_omega)
    den = 1.0 + q**2 * x**2
    return res.parallel_resistance / den, -res.parallel_resistance * q * x / den


def effective_circuit(res: Resonator, d_omega: float, mode: str = "exact") -> EffectiveCircuit:
    """Effective series resistance and capacitance seen at omega_R + d_omega.

    ``mode="exact"`` reads them off the full impedance; ``mode="approximate"``
    uses the large-detuning closed forms
    R_eff = R_p (w_R + dw)^2 / (4 Q^2 dw^2) and C_eff = 2 C w_R dw / (w_R + dw)^2.
    """
    w_r = res.resonance_frequency
    if abs(d_omega) <= res.fwhm:
        raise WithinResonanceError(
            f"|d_omega| = {abs(d_omega):.4g} rad/s is inside the resonance width "
            f"{res.fwhm:.4g} rad/s; integrate with the full impedance instead"
        )
    omega = w_r + d_omega
    if mode == "exact":
        z = impedance(res, omega)
        return EffectiveCircuit(z.real, -1.0 / (z.imag * omega), omega)
    if mode == "approximate":
        q = res.quality_factor
        r_eff = res.parallel_resistance * omega**2 / (4.0 * q**2 * d_omega**2)
        c_eff = 2.0 * res.total_capacitance * w_r * d_omega / omega**2
        return EffectiveCircuit(r_eff, c_eff, omega)
    raise ValueError(f"unknown mode {mode!r}")


def ion_resonator_rate(ion: IonSpecies, port: TrapPort, r_eff: float) -> float:
    """Energy damping rate gamma = N q^2 R_eff / (m D^2) of one species on the resonator (1/s)."""
    if r_eff < 0:
        raise ValueError("r_eff must be non-negative")
    return ion.count * ion.charge**2 * r_eff / (ion.mass * port.effective_distance**2)


def detuning_for_capacitance(res: Resonator, c_eff: float, bracket_fwhm=(1.0001, 1e4)) -> float:
    """Positive detuning d_omega (rad/s) at which the exact C_eff equals ``c_eff``."""
    lo = bracket_fwhm[0] * res.fwhm
    hi = min(bracket_fwhm[1] * res.fwhm, 0.5 * res.resonance_frequency)

    def f(dw):
        return effective_circuit(res, dw).effective_capacitance - c_eff

    if f(lo) * f(hi) > 0:
        raise ValueError("requested C_eff is not reachable above resonance")
    return brentq(f, lo, hi, xtol=1e-14, rtol=1e-15, maxiter=200)
