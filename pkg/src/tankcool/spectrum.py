"""Noise spectra of the tank circuit loaded by ions, and the avoided-crossing fit.

Each ion (or the centre-of-mass mode of a cloud) is represented by a lossless
series LC branch with l = m D^2 / (N q^2) and c = 1 / (l w^2) in parallel
with the tank. Re Z_tot then vanishes at every bare ion frequency and has a
pole where the branch reactance cancels the tank's, which is the ion
frequency pulled by C_eff. With two ions the poles trace the avoided
crossing of the coupled modes.

Frequency axes are in Hz, measured from the bare tank resonance
omega_R / 2 pi. Spectra are power in dB with an arbitrary offset.
"""

from __future__ import annotations

import csv
import io
import math
from dataclasses import dataclass, field
from typing import Optional, Sequence

import numpy as np
from scipy.ndimage import gaussian_filter1d
from scipy.optimize import brentq, least_squares
from scipy.signal import find_peaks

from .model import TWO_PI, CouplingScenario, IonSpecies, Resonator, TrapPort, k_b
from .resonator import effective_circuit, impedance

__all__ = [
    "FitError",
    "IonBranch",
    "EquivalentCircuit",
    "SpectrumGrid",
    "FitResult",
    "total_impedance",
    "dip_spectrum",
    "pole_frequencies",
    "avoided_crossing_map",
    "add_noise",
    "column_peaks",
    "minimal_splitting",
    "initial_guess",
    "fit_avoided_crossing",
    "write_grid_csv",
    "read_grid_csv",
]


class FitError(RuntimeError):
    """The least-squares fit did not converge or its Jacobian is degenerate."""


@dataclass(frozen=True)
class IonBranch:
    inductance: float
    capacitance: float

    def __post_init__(self):
        if not (self.inductance > 0 and self.capacitance > 0):
            raise ValueError("branch inductance and capacitance must be positive")

    @classmethod
    def from_ion(cls, ion: IonSpecies, port: TrapPort, omega: float) -> "IonBranch":
        ell = ion.mass * port.effective_distance**2 / (ion.count * ion.charge**2)
        return cls(ell, 1.0 / (ell * omega**2))

    @property
    def frequency(self) -> float:
        """Branch resonance in rad/s (the bare ion frequency)."""
        return 1.0 / math.sqrt(self.inductance * self.capacitance)

    def reactance(self, omega):
        """l (w^2 - w_b^2) / w, zero at the branch resonance."""
        omega = np.asarray(omega, dtype=float)
        return self.inductance * (omega**2 - self.frequency**2) / omega

    def admittance(self, omega):
        """Branch admittance; infinite (``inf`` imaginary part) exactly at resonance."""
        x = self.reactance(omega)
        with np.errstate(divide="ignore"):
            return 1j * (-1.0 / x)


@dataclass(frozen=True)
class EquivalentCircuit:
    tank: Resonator
    branches: tuple = ()


def total_impedance(circuit: EquivalentCircuit, omega):
    """Tank in parallel with every ion branch (ohms).

    A branch at exact resonance shorts the tank and gives zero.
    """
    omega = np.asarray(omega, dtype=float)
    y = 1.0 / impedance(circuit.tank, omega)
    shorted = np.zeros(omega.shape, dtype=bool)
    for b in circuit.branches:
        x = b.reactance(omega)
        shorted |= x == 0
        y = y - 1j / np.where(x == 0, 1.0, x)
    return np.where(shorted, 0.0, 1.0 / y)


def _bin_offsets(bin_width: float, oversample: int) -> np.ndarray:
    return ((np.arange(oversample) + 0.5) / oversample - 0.5) * bin_width


def _axis_step(axis) -> float:
    axis = np.asarray(axis, dtype=float)
    return float(np.median(np.diff(axis))) if axis.size > 1 else 0.0


def dip_spectrum(
    circuit: EquivalentCircuit,
    frequency_axis,
    temperature: float,
    *,
    gain: float = 0.0,
    floor: float = 0.0,
    oversample: int = 8,
) -> np.ndarray:
    """Johnson-noise power 10 log10(<4 k_b T Re Z_tot>_bin + floor) + gain in dB.

    ``frequency_axis`` is in Hz relative to the bare tank resonance. Each
    value is averaged over its bin (``oversample`` midpoints), as a spectrum
    analyser with that resolution would; ``floor`` (V^2/Hz) stands in for
    amplifier noise.
    """
    f = np.asarray(frequency_axis, dtype=float)
    f_r = circuit.tank.resonance_frequency / TWO_PI
    off = _bin_offsets(_axis_step(f), oversample) if f.size > 1 else np.zeros(1)
    w = TWO_PI * (f_r + f[:, None] + off[None, :])
    s = 4.0 * k_b * temperature * total_impedance(circuit, w).real.mean(axis=1)
    return gain + 10.0 * np.log10(s + floor)


def pole_frequencies(circuit: EquivalentCircuit, span: float = 0.5) -> list[float]:
    """Dressed mode frequencies (rad/s): zeros of the lossless total susceptance.

    Roots are bracketed between consecutive branch resonances and within
    ``span`` * 1e-4 (relative) outside the outermost ones.
    """
    tank = circuit.tank

    def b_total(w):
        y = 1j * w * tank.total_capacitance + 1.0 / (1j * w * tank.inductance)
        for br in circuit.branches:
            y = y + br.admittance(w)
        return y.imag

    # Zeros of Im Y between consecutive branch frequencies (where the
    # admittance diverges) and beyond the highest one.
    ws = sorted(b.frequency for b in circuit.branches)
    if not ws:
        return []
    eps = 1e-12
    width = span * 1e-4 * ws[-1]
    edges = [ws[0] - width] + ws + [ws[-1] + width]
    roots = []
    for lo, hi in zip(edges[:-1], edges[1:]):
        a, b = lo * (1 + eps), hi * (1 - eps)
        if b > a and b_total(a) * b_total(b) < 0:
            roots.append(brentq(b_total, a, b, xtol=1e-12, rtol=4 * np.finfo(float).eps))
    return roots


@dataclass
class SpectrumGrid:
    """Power (dB) on sweep x frequency axes; ``power[i, j]`` belongs to sweep_axis[i], frequency_axis[j]."""

    sweep_axis: np.ndarray
    frequency_axis: np.ndarray
    power: np.ndarray
    meta: dict = field(default_factory=dict)

    def __post_init__(self):
        self.sweep_axis = np.asarray(self.sweep_axis, dtype=float)
        self.frequency_axis = np.asarray(self.frequency_axis, dtype=float)
        self.power = np.asarray(self.power, dtype=float)
        if self.power.shape != (self.sweep_axis.size, self.frequency_axis.size):
            raise ValueError("power shape does not match the axes")
        if not np.all(np.isfinite(self.power)):
            raise ValueError("power contains non-finite values")

    @property
    def bin_width(self) -> float:
        return _axis_step(self.frequency_axis)


# -- two-ion map model -----------------------------------------------------


class _MapModel:
    """Shared machinery for synthesis and fitting of avoided-crossing maps.

    Parameters (all floats): C_eff (F) at the working point, dressed ion-2
    frequency (Hz from omega_R), sweep offset (Hz), sweep calibration
    (Hz per nominal Hz), gain (dB) and log10 of the floor relative to
    4 k_b T R_eff.
    """

    def __init__(self, scenario: CouplingScenario, frequency_axis, oversample=8, ceff_model="exact"):
        if scenario.resonator is None:
            raise ValueError("an avoided-crossing map needs a resonator")
        if ceff_model not in ("exact", "linear"):
            raise ValueError("ceff_model must be 'exact' or 'linear'")
        self.scenario = scenario
        self.tank = scenario.resonator
        self.temperature = scenario.circuit_temperature
        self.f_r = self.tank.resonance_frequency / TWO_PI
        self.w_work = scenario.working_frequency
        ec = effective_circuit(self.tank, scenario.resonator_detuning)
        self.c_ref = abs(ec.effective_capacitance)
        self.s_ref = 4.0 * k_b * self.temperature * ec.effective_resistance
        f = np.asarray(frequency_axis, dtype=float)
        off = _bin_offsets(_axis_step(f), oversample) if f.size > 1 else np.zeros(1)
        # Offsets from omega_R are kept separately: the branch reactance is a
        # small difference of two ~1e13 ohm terms and needs them for precision.
        self.dw = TWO_PI * (f[:, None] + off[None, :])  # (n_freq, os)
        self.w_r = self.tank.resonance_frequency
        self.w = self.w_r + self.dw
        z = impedance(self.tank, self.w)
        self.re_tank = z.real
        c_exact = -1.0 / (self.w * z.imag)
        if ceff_model == "linear":
            # Footnote-style model: C_eff varies linearly across the window
            # with the exact slope at the working point.
            h = 1e-3 * abs(scenario.resonator_detuning)
            cp = effective_circuit(self.tank, scenario.resonator_detuning + h).effective_capacitance
            cm = effective_circuit(self.tank, scenario.resonator_detuning - h).effective_capacitance
            slope = (cp - cm) / (2 * h) / ec.effective_capacitance
            c_shape = ec.effective_capacitance * (1.0 + slope * (self.w - self.w_work))
        else:
            c_shape = c_exact
        self.c_shape_rel = c_shape / ec.effective_capacitance  # C(w) / C(w_work)
        self.sign = math.copysign(1.0, ec.effective_capacitance)
        self.ions = ((scenario.ion1, scenario.port1), (scenario.ion2, scenario.port2))
        self.ell = [ion.mass * p.effective_distance**2 / (ion.count * ion.charge**2) for ion, p in self.ions]

    def shift(self, which: int, c_eff: float) -> float:
        """Frequency pulling (rad/s) of ion ``which`` for capacitance ``c_eff`` at the working point."""
        ion, port = self.ions[which]
        return self.sign * ion.count * ion.charge**2 / (2 * ion.mass * self.w_work * port.effective_distance**2 * c_eff)

    def column(self, c_eff, f2, dnu, couple=True):
        """Mean Re Z over each frequency bin for one sweep value (dnu in Hz)."""
        d2 = TWO_PI * f2
        d1 = d2 + TWO_PI * dnu
        bare = (d1 - self.shift(0, c_eff), d2 - self.shift(1, c_eff))  # from omega_R
        # Tank with its reactive part rescaled so that C_eff(w_work) = c_eff.
        x_tank = -1.0 / (self.w * self.c_shape_rel * c_eff * self.sign)
        z_tank = self.re_tank + 1j * x_tank
        y_t = 1.0 / z_tank
        # l (w^2 - wb^2) / w written with offsets from omega_R
        ys = [
            1.0 / (1j * ell * (self.dw - db) * (2 * self.w_r + self.dw + db) / self.w)
            for ell, db in zip(self.ell, bare)
        ]
        if couple:
            return (1.0 / (y_t + ys[0] + ys[1])).real.mean(axis=1)
        r0 = z_tank.real
        r1 = (1.0 / (y_t + ys[0])).real
        r2 = (1.0 / (y_t + ys[1])).real
        return (r1 * r2 / r0).mean(axis=1)

    def power(self, theta, sweep_axis, couple=True):
        c_eff, f2, off, cal, gain, lfloor = theta
        floor = self.s_ref * 10.0**lfloor
        cols = [self.column(c_eff, f2, cal * s + off, couple) for s in np.asarray(sweep_axis, dtype=float)]
        s = 4.0 * k_b * self.temperature * np.array(cols)
        return gain + 10.0 * np.log10(s + floor)


def avoided_crossing_map(
    scenario: CouplingScenario,
    sweep_axis,
    frequency_axis,
    *,
    ceff_scale: float = 1.0,
    gain: float = 0.0,
    floor_ratio: float = 1e-2,
    oversample: int = 8,
) -> SpectrumGrid:
    """Synthesize the two-ion spectrum map while ion 1 is swept across ion 2.

    Ion 2 sits at the working point omega_R + d_omega. In column ``i`` ion 1
    is placed ``sweep_axis[i]`` Hz away from it (after pulling by C_eff), so
    the two dressed frequencies coincide at a sweep value of zero.
    ``ceff_scale`` rescales the tank's reactive part, i.e. C_eff.
    """
    tank = scenario.resonator
    if tank is None:
        raise ValueError("an avoided-crossing map needs a resonator")
    if abs(scenario.resonator_detuning) <= tank.fwhm:
        raise ValueError("working point must lie outside the resonance width")
    model = _MapModel(scenario, frequency_axis, oversample, "exact")
    f2 = scenario.resonator_detuning / TWO_PI
    theta = (model.c_ref * ceff_scale, f2, 0.0, 1.0, gain, math.log10(floor_ratio))
    power = model.power(theta, sweep_axis)
    meta = {
        "f_R_Hz": model.f_r,
        "working_point_Hz": f2,
        "C_eff_F": model.c_ref * ceff_scale,
        "floor_ratio": floor_ratio,
        "gain_dB": gain,
        "oversample": oversample,
    }
    return SpectrumGrid(sweep_axis, frequency_axis, power, meta)


def add_noise(grid: SpectrumGrid, fraction: float, seed: int) -> SpectrumGrid:
    """Gaussian noise with sigma = ``fraction`` of the map's dip depth (peak-to-trough in dB)."""
    depth = float(np.ptp(grid.power))
    rng = np.random.default_rng(seed)
    noisy = grid.power + rng.normal(0.0, fraction * depth, grid.power.shape)
    meta = dict(grid.meta, noise_sigma_dB=fraction * depth, noise_seed=seed)
    return SpectrumGrid(grid.sweep_axis, grid.frequency_axis, noisy, meta)


# -- peak extraction -------------------------------------------------------


def column_peaks(frequency_axis, column, prominence: float = 1.0, max_peaks: int = 2) -> np.ndarray:
    """Sub-bin positions (Hz) of the most prominent local maxima, sorted by frequency."""
    f = np.asarray(frequency_axis, dtype=float)
    y = np.asarray(column, dtype=float)
    idx, props = find_peaks(y, prominence=prominence)
    if idx.size == 0:
        return np.array([])
    keep = idx[np.argsort(props["prominences"])[::-1][:max_peaks]]
    out = []
    step = _axis_step(f)
    for i in sorted(keep):
        if 0 < i < len(y) - 1:
            a, b, c = y[i - 1], y[i], y[i + 1]
            den = a - 2 * b + c
            d = 0.5 * (a - c) / den if den != 0 else 0.0
            out.append(f[i] + d * step)
        else:
            out.append(f[i])
    return np.array(out)


def minimal_splitting(grid: SpectrumGrid, prominence: float = 1.0) -> tuple[float, float]:
    """(smallest peak separation in Hz, sweep value where it occurs) over columns with two peaks."""
    best, at = math.inf, math.nan
    for s, col in zip(grid.sweep_axis, grid.power):
        pk = column_peaks(grid.frequency_axis, col, prominence)
        if pk.size == 2 and pk[1] - pk[0] < best:
            best, at = float(pk[1] - pk[0]), float(s)
    return best, at


# -- fit -------------------------------------------------------------------


@dataclass(frozen=True)
class FitResult:
    effective_capacitance: float
    capacitance_uncertainty: float
    rabi_frequency: float
    ion2_frequency: float  # Hz from omega_R
    sweep_offset: float  # Hz
    sweep_calibration: float  # Hz per nominal Hz
    gain: float
    floor_log10: float
    residual_norm: float
    initial_residual_norm: float
    converged: bool
    n_evaluations: int
    coupled: bool = True
    ceff_model: str = "linear"

    def as_dict(self) -> dict:
        return {k: getattr(self, k) for k in self.__dataclass_fields__}


def _rabi_from_ceff(scenario: CouplingScenario, c_eff: float) -> float:
    from .coupling import rabi_frequency

    return rabi_frequency(scenario.ion1, scenario.port1, scenario.ion2, scenario.port2, c_eff, scenario.working_frequency)


def initial_guess(grid: SpectrumGrid, scenario: CouplingScenario, prominence: float = 1.0) -> tuple:
    """Parameter start from peak positions: the narrowest two-peak column fixes offset, ion-2 frequency and C_eff."""
    split, at = minimal_splitting(grid, prominence)
    if not math.isfinite(split):
        raise FitError("no column shows two resolved peaks")
    col = grid.power[int(np.argmin(np.abs(grid.sweep_axis - at)))]
    pk = column_peaks(grid.frequency_axis, col, prominence)
    om_ref = _rabi_from_ceff(scenario, 1.0)  # Omega_R * C_eff is constant
    c_guess = om_ref / (TWO_PI * split)
    f2 = float(pk.mean())
    gain = float(np.median(grid.power) - 10 * np.log10(4 * k_b * scenario.circuit_temperature * scenario.effective_resistance))
    return (c_guess, f2, -at, 1.0, gain, -2.0)


def fit_avoided_crossing(
    grid: SpectrumGrid,
    scenario: CouplingScenario,
    initial: Optional[Sequence[float]] = None,
    *,
    couple: bool = True,
    ceff_model: str = "linear",
    oversample: Optional[int] = None,
    smoothing: Sequence[float] = (8, 4, 2, 1, 0),
    restarts: Sequence[float] = (-0.01, -0.005, -0.0025, 0.0025, 0.005, 0.01),
    max_nfev: int = 3000,
    tol: float = 1e-14,
) -> FitResult:
    """Least-squares fit of the map model to every grid cell in dB.

    Free parameters: C_eff, the dressed ion-2 frequency, sweep offset and
    calibration, gain and noise floor. Tank Q and R_p stay at their
    configured values. ``couple=False`` fits the uncoupled (no-splitting)
    model for nesting comparisons. ``ceff_model="linear"`` lets C_eff vary
    linearly across the window; ``"exact"`` uses the exact tank curve.

    The pole-zero pairs near counter-mode transparency are narrower than a
    bin and make the cost surface multimodal on the 1e-4 scale in C_eff. The
    fit therefore runs on Gaussian-smoothed data and model first (kernel
    widths ``smoothing``, in bins, ending unsmoothed), then restarts the final
    stage with C_eff scaled by each of ``restarts`` and keeps the lowest cost.
    """
    os_ = oversample or int(grid.meta.get("oversample", 8))
    model = _MapModel(scenario, grid.frequency_axis, os_, ceff_model)
    theta0 = np.array(initial if initial is not None else initial_guess(grid, scenario), dtype=float)
    scale = np.array([model.c_ref, 1.0, 1.0, 1.0, 1.0, 1.0])

    def solve(x, width):
        if width:
            smooth = lambda a: gaussian_filter1d(a, width, axis=1, mode="nearest")  # noqa: E731
        else:
            smooth = lambda a: a  # noqa: E731
        data = smooth(grid.power)

        def resid(v):
            return (smooth(model.power(v * scale, grid.sweep_axis, couple)) - data).ravel()

        try:
            return least_squares(
                resid, x, method="trf", x_scale="jac", xtol=tol, ftol=tol, gtol=tol, max_nfev=max_nfev
            )
        except ValueError as exc:
            raise FitError(str(exc)) from exc

    x0 = theta0 / scale
    r0n = float(np.linalg.norm(model.power(theta0, grid.sweep_axis, couple) - grid.power))
    x, nfev = x0, 0
    for width in smoothing:
        sol = solve(x, width)
        x, nfev = sol.x, nfev + sol.nfev
    if smoothing[-1] != 0:
        sol = solve(x, 0)
        nfev += sol.nfev
    best = sol
    for _ in range(3):
        improved = False
        for rel in restarts:
            xt = best.x.copy()
            xt[0] *= 1.0 + rel
            trial = solve(xt, 0)
            nfev += trial.nfev
            if trial.cost < best.cost * (1 - 1e-12):
                best, improved = trial, True
        if not improved:
            break
    sol = best
    jac = sol.jac
    n, p = jac.shape
    jtj = jac.T @ jac
    if np.linalg.matrix_rank(jtj) < p:
        raise FitError("degenerate Jacobian")
    s2 = float(sol.fun @ sol.fun) / max(1, n - p)
    cov = np.linalg.inv(jtj) * s2
    theta = sol.x * scale
    sigma_c = math.sqrt(max(cov[0, 0], 0.0)) * model.c_ref
    rn = float(np.linalg.norm(sol.fun))
    converged = bool(sol.status > 0) and rn <= r0n
    if not converged:
        raise FitError(f"least squares did not converge: {sol.message}")
    c_eff = float(theta[0])
    return FitResult(
        effective_capacitance=c_eff,
        capacitance_uncertainty=sigma_c if sigma_c > 0 else math.ulp(c_eff),
        rabi_frequency=_rabi_from_ceff(scenario, c_eff) if couple else 0.0,
        ion2_frequency=float(theta[1]),
        sweep_offset=float(theta[2]),
        sweep_calibration=float(theta[3]),
        gain=float(theta[4]),
        floor_log10=float(theta[5]),
        residual_norm=rn,
        initial_residual_norm=r0n,
        converged=converged,
        n_evaluations=int(nfev),
        coupled=couple,
        ceff_model=ceff_model,
    )


# -- CSV -------------------------------------------------------------------


def write_grid_csv(grid: SpectrumGrid, fh, header: Optional[dict] = None) -> None:
    """Long format ``dnu_Hz,f_Hz,power_dB`` with ``# key: value`` metadata lines."""
    meta = dict(grid.meta)
    meta.update(header or {})
    meta["n_sweep"] = grid.sweep_axis.size
    meta["n_freq"] = grid.frequency_axis.size
    for k in sorted(meta):
        fh.write(f"# {k}: {meta[k]}\n")
    w = csv.writer(fh, lineterminator="\n")
    w.writerow(["dnu_Hz", "f_Hz", "power_dB"])
    for i, s in enumerate(grid.sweep_axis):
        for j, f in enumerate(grid.frequency_axis):
            w.writerow([repr(float(s)), repr(float(f)), repr(float(grid.power[i, j]))])


def read_grid_csv(fh) -> SpectrumGrid:
    if isinstance(fh, str):
        fh = io.StringIO(fh)
    meta, rows = {}, []
    for line in fh:
        if line.startswith("#"):
            key, _, val = line[1:].partition(":")
            val = val.strip()
            try:
                meta[key.strip()] = float(val) if any(c in val for c in ".eE") else int(val)
            except ValueError:
                meta[key.strip()] = val
            continue
        if line.strip() and not line.startswith("dnu_Hz"):
            rows.append(line)
    data = np.loadtxt(io.StringIO("".join(rows)), delimiter=",", ndmin=2)
    sweep = np.unique(data[:, 0])
    freq = np.unique(data[:, 1])
    if data.shape[0] != sweep.size * freq.size:
        raise ValueError("grid CSV is not a complete sweep x frequency table")
    order = np.lexsort((data[:, 1], data[:, 0]))
    power = data[order, 2].reshape(sweep.size, freq.size)
    return SpectrumGrid(sweep, freq, power, meta)
