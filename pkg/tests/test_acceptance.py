"""End-to-end acceptance checks, one test per criterion.

Each test records (passed, detail) in the shared ``acceptance`` dict, which
the conftest prints as ``criterion N: PASS/FAIL (...)`` after the run. Run
directly with ``python tests/test_acceptance.py``.
"""

import math
import sys
from dataclasses import replace
from pathlib import Path

import numpy as np
import pytest

from tankcool import analytics as an
from tankcool import dynamics as dy
from tankcool import spectrum as sp
from tankcool.coupling import coupling_summary
from tankcool.model import TWO_PI
from tankcool.resonator import effective_circuit

sys.path.insert(0, str(Path(__file__).parent))


def _record(acceptance, key, checks):
    """``checks`` maps a label to (ok, text); all must hold."""
    ok = all(v[0] for v in checks.values())
    detail = "; ".join(f"{k} {v[1]}{'' if v[0] else ' [miss]'}" for k, v in checks.items())
    acceptance[key] = (ok, detail)
    print(f"criterion {key}: {'PASS' if ok else 'FAIL'} ({detail})")
    return ok


def _time_within(times, temps, target, frac=0.10):
    """First time the (falling) mean trajectory comes within ``frac`` of ``target``."""
    hit = np.nonzero(temps <= (1 + frac) * target)[0]
    return float(times[hit[0]]) if hit.size else math.inf


def test_criterion_1_exchange_time(load, acceptance):
    sc, _ = load("h2be_endcap")
    cs = coupling_summary(sc)
    tau, nu = cs.exchange_time, cs.rabi_frequency / TWO_PI
    checks = {
        "tau_ex": (abs(tau / 57.0 - 1) <= 0.02, f"{tau:.2f} s"),
        "Omega_R/2pi": (abs(nu / 8.7e-3 - 1) <= 0.05, f"{nu * 1e3:.3f} mHz"),
    }
    assert _record(acceptance, 1, checks)


def test_criterion_2_effective_capacitance(load, acceptance):
    sc, _ = load("arkr_at")
    c = effective_circuit(sc.resonator, TWO_PI * 149.5, mode="exact").effective_capacitance
    assert _record(acceptance, 2, {"C_eff": (abs(c / 1.978e-14 - 1) <= 0.01, f"{c:.4e} F")})


def test_criterion_3_rabi_splitting(load, acceptance):
    sc, _ = load("arkr_at")
    nu = coupling_summary(sc).rabi_frequency / TWO_PI
    assert _record(acceptance, 3, {"Omega_R/2pi": (abs(nu / 0.577 - 1) <= 0.10, f"{nu:.4f} Hz")})


def test_criterion_4_avoided_crossing_round_trip(load, acceptance):
    sc, _ = load("arkr_at")
    sweep = np.linspace(-3.0, 3.0, 61)
    freq = np.linspace(146.5, 152.5, 301)
    clean = sp.avoided_crossing_map(sc, sweep, freq)
    noisy = sp.add_noise(clean, 0.05, seed=7)
    res = sp.fit_avoided_crossing(noisy, sc)
    c_in = clean.meta["C_eff_F"]
    split, _ = sp.minimal_splitting(clean)
    om = coupling_summary(sc).rabi_frequency / TWO_PI
    bin_ = clean.bin_width
    checks = {
        "fitted C_eff": (abs(res.effective_capacitance / c_in - 1) <= 0.01,
                         f"{res.effective_capacitance:.4e} vs {c_in:.4e} F"),
        "min splitting": (abs(split - om) <= bin_, f"{split:.3f} Hz vs {om:.3f} Hz (bin {bin_:.3f})"),
    }
    assert _record(acceptance, 4, checks)


def test_criterion_5_intermittent_cooling(load, acceptance):
    sc, p = load("h2be_tank")
    th = an.intermittent_theory(sc)
    tau_c = 0.4
    traj = dy.simulate_intermittent_cooling(sc, tau_c, 150, p)
    _, t_eq, tau = an.fit_cooling_curve(traj.times, traj.temperature1)
    tau_th = an.effective_time_constant(th.rabi_frequency, tau_c)
    reach = _time_within(traj.times, traj.temperature1, t_eq)
    t20 = traj.temperature1[int(np.argmin(np.abs(traj.times - 20.0)))]
    checks = {
        "tau_c,opt": (abs(th.optimal_coupling_time / 0.40 - 1) <= 0.05, f"{th.optimal_coupling_time:.4f} s"),
        "T_1,min": (abs(th.minimal_temperature / 0.030 - 1) <= 0.15, f"{th.minimal_temperature * 1e3:.2f} mK"),
        "tau_eff fit": (abs(tau / tau_th - 1) <= 0.15, f"{tau:.3f} s vs {tau_th:.3f} s"),
        "within 10% of T_eq by 20 s": (
            reach <= 20.0,
            f"reached at {reach:.1f} s; T(20 s) {t20 * 1e3:.1f} mK vs T_eq {t_eq * 1e3:.1f} mK",
        ),
    }
    checks["ensemble"] = (traj.ensemble_size >= 200, str(traj.ensemble_size))
    assert _record(acceptance, 5, checks)


def test_criterion_6_mismatch_robustness(load, acceptance):
    sc, _ = load("h2be_tank")
    on, off = an.detuning_scan(sc, [0.0, TWO_PI * 1.0], axis="mismatch")
    ratio = off.effective_time_constant / on.effective_time_constant
    checks = {
        "T_eq(1 Hz)": (abs(off.equilibrium_temperature / 0.048 - 1) <= 0.20, f"{off.equilibrium_temperature * 1e3:.1f} mK"),
        "tau_eff ratio": (1 / 2.2 <= ratio <= 2.2, f"{ratio:.2f}"),
    }
    assert _record(acceptance, 6, checks)


def test_criterion_7_continuous_cooling_optimum(load, acceptance):
    sc, p = load("h2be_endcap")
    om = coupling_summary(sc).rabi_frequency
    gammas = om * np.geomspace(1 / 8, 8, 13)
    m = dy.cooling_time_map(sc, gammas, [0.0], replace(p, duration=3000.0))
    col = m.tau_cool[:, 0]
    best = gammas[int(np.argmin(col))]
    checks = {
        "argmin gamma_L / Omega_R": (0.5 <= best / om <= 2.0, f"{best / om:.3f}"),
        "tau_cool at argmin": (math.isfinite(col.min()), f"{col.min():.1f} s"),
    }
    assert _record(acceptance, 7, checks)


def test_criterion_8_lead_ion(load, acceptance):
    sc, p = load("pb_pt")
    th = an.intermittent_theory(sc)
    tau_c = th.optimal_coupling_time
    n = int(math.ceil(80.0 / tau_c))
    traj = dy.simulate_intermittent_cooling(sc, tau_c, n, p)
    _, t_eq, _ = an.fit_cooling_curve(traj.times, traj.temperature1)
    reach = _time_within(traj.times, traj.temperature1, t_eq)
    checks = {
        "T_eq": (0.020 / 1.5 <= t_eq <= 0.020 * 1.5, f"{t_eq * 1e3:.1f} mK (closed form {th.equilibrium_temperature * 1e3:.1f})"),
        "time to within 10%": (20.0 / 1.5 <= reach <= 20.0 * 1.5, f"{reach:.1f} s at tau_c {tau_c:.3f} s"),
    }
    assert _record(acceptance, 8, checks)


def test_criterion_9_property_suite(load, acceptance):
    import test_analytics as ta
    import test_dynamics as td

    props = {
        "fluctuation-dissipation": lambda: td.test_fluctuation_dissipation_single_ion(load),
        "full-EOM conservation": lambda: td.test_full_energy_conservation(load),
        "RWA vs full": lambda: td.test_rwa_tracks_full_equations(load),
        "long-tau2 limit": ta.test_long_tau2_limit_is_monotone,
        "seeded reruns": lambda: td.test_seeded_runs_are_bit_identical(load),
    }
    checks = {}
    for name, fn in props.items():
        try:
            fn()
            checks[name] = (True, "ok")
        except AssertionError as exc:
            checks[name] = (False, str(exc).splitlines()[0] if str(exc) else "failed")
    assert _record(acceptance, 9, checks)


if __name__ == "__main__":
    sys.exit(pytest.main([__file__, "-q", "-p", "no:cacheprovider"]))
