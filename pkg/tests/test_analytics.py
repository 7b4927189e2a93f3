import math
from dataclasses import replace

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st
from scipy.optimize import minimize_scalar

from tankcool import analytics as an
from tankcool.dynamics import simulate_intermittent_cooling
from tankcool.model import TWO_PI, k_b

TAU1, TAU2 = 849.3707761048695, 37.98669697986357
OMEGA = 1.8119287525839955
T0, TD = 4.2, 0.5e-3


@pytest.fixture
def tank(load):
    return load("h2be_tank")


def test_scenario_numbers(tank):
    sc, _ = tank
    th = an.intermittent_theory(sc)
    assert th.resonator_times == pytest.approx((TAU1, TAU2), rel=1e-9)
    assert th.rabi_frequency == pytest.approx(OMEGA, rel=1e-9)


def test_zero_interval_transfers_nothing():
    assert an.transferred_energies(OMEGA, 0.0, 1e-22, TD, T0, TAU1, TAU2) == (0.0, 0.0)


def test_small_angle_limit_is_quadratic():
    # without circuit noise both transfers are the coherent (Omega tau / 2)^2 E
    a = an.transferred_energies(OMEGA, 1e-3, 1e-22, TD, 0.0, TAU1, TAU2, check=False)
    b = an.transferred_energies(OMEGA, 2e-3, 1e-22, TD, 0.0, TAU1, TAU2, check=False)
    assert b[0] / a[0] == pytest.approx(4.0, rel=1e-12)
    assert b[1] / a[1] == pytest.approx(4.0, rel=1e-12)
    assert a[0] == pytest.approx(1e-22 * math.sin(OMEGA * 1e-3 / 2) ** 2, rel=1e-6)
    # the noise terms add a cubic piece
    c = an.transferred_energies(OMEGA, 1e-3, 0.0, 0.0, T0, TAU1, TAU2, check=False)
    d = an.transferred_energies(OMEGA, 2e-3, 0.0, 0.0, T0, TAU1, TAU2, check=False)
    assert d[1] / c[1] == pytest.approx(8.0, rel=1e-12)


def test_transfers_at_0p4_seconds():
    d12, d21 = an.transferred_energies(OMEGA, 0.4, k_b * T0, TD, T0, TAU1, TAU2, check=False)
    # hand evaluation: f = (1.81193 * 0.4)^2 / 4 = 0.131348
    f = 0.131348
    assert d12 == pytest.approx(f * k_b * T0 * (1 + 0.4 / (3 * TAU1)), rel=1e-5)
    assert d21 == pytest.approx(f * k_b * (TD + T0 * 0.4 / (3 * TAU2)), rel=1e-5)
    assert d12 == pytest.approx(7.6163e-24, rel=1e-4)
    assert d21 == pytest.approx(2.7636e-26, rel=1e-4)


def test_equilibrium_temperature_at_0p4(tank):
    sc, _ = tank
    assert an.intermittent_theory(sc, 0.4).equilibrium_temperature == pytest.approx(0.030, rel=0.15)


def test_no_circuit_noise_gives_doppler_limit():
    assert an.equilibrium_temperature(OMEGA, 0.4, TD, 0.0, TAU1, TAU2) == TD


def test_doubling_tau_c_past_optimum_heats():
    t_a = an.equilibrium_temperature(OMEGA, 0.41, TD, T0, TAU1, TAU2)
    t_b = an.equilibrium_temperature(OMEGA, 0.82, TD, T0, TAU1, TAU2, check=False)
    assert t_b > t_a


def test_optimum_values(tank):
    sc, _ = tank
    th = an.intermittent_theory(sc)
    assert th.optimal_coupling_time == pytest.approx(0.41, abs=0.01)
    assert th.minimal_temperature == pytest.approx(0.030, rel=0.15)


def test_optimum_requires_tau1_above_tau2():
    with pytest.raises(an.RegimeError):
        an.optimal_coupling(OMEGA, TD, T0, 10.0, 10.0)
    with pytest.raises(an.RegimeError):
        an.optimal_coupling(OMEGA, TD, T0, 5.0, 10.0)


def _numeric_minimum(cross_term):
    f = lambda tc: an.equilibrium_temperature(OMEGA, tc, TD, T0, TAU1, TAU2, check=False, cross_term=cross_term)
    res = minimize_scalar(f, bounds=(0.01, 1.5), method="bounded", options={"xatol": 1e-10})
    return f, res


def test_optimum_matches_numeric_minimum():
    t_min, tau_opt = an.optimal_coupling(OMEGA, TD, T0, TAU1, TAU2)
    f, res = _numeric_minimum(cross_term=True)
    assert res.x == pytest.approx(tau_opt, rel=0.01)
    h = 1e-5 * tau_opt
    slope = (f(tau_opt + h) - f(tau_opt - h)) / (2 * h)
    assert abs(slope) * tau_opt < 1e-6 * t_min
    # the closed-form minimum temperature drops a sqrt(1 - tau2/tau1) factor
    shrink = math.sqrt(1 - TAU2 / TAU1)
    assert res.fun - TD == pytest.approx((t_min - TD) * shrink, rel=1e-6)


def test_optimum_of_truncated_form():
    """Without the cross term the minimum moves by exactly sqrt(1 - tau2/tau1)."""
    _, tau_opt = an.optimal_coupling(OMEGA, TD, T0, TAU1, TAU2)
    _, res = _numeric_minimum(cross_term=False)
    assert res.x == pytest.approx(tau_opt * math.sqrt(1 - TAU2 / TAU1), rel=1e-6)


def test_long_tau2_limit_is_monotone():
    vals = [an.equilibrium_temperature(OMEGA, 0.4, TD, T0, TAU1, t2, check=False) for t2 in (40, 400, 4e3, 4e4, math.inf)]
    assert all(a > b for a, b in zip(vals, vals[1:]))
    assert vals[-1] == pytest.approx(TD + 4 * T0 / (OMEGA**2 * 0.4 * TAU1), rel=1e-14)
    assert vals[-2] == pytest.approx(vals[-1], rel=1e-3)


def test_cooling_curve_boundaries():
    t = np.array([0.0, 1e6])
    c = an.cooling_curve(T0, 0.03, OMEGA, 0.4, t)
    assert c[0] == pytest.approx(T0, rel=1e-15)
    assert c[1] == pytest.approx(0.03, rel=1e-12)


def test_halving_tau_c_doubles_time_constant():
    assert an.effective_time_constant(OMEGA, 0.2) == pytest.approx(2 * an.effective_time_constant(OMEGA, 0.4), rel=1e-15)
    assert an.effective_time_constant(OMEGA, 0.4) == pytest.approx(3.046, rel=1e-3)
    assert an.effective_time_constant(0.0, 0.4) == math.inf


def test_validity_warning():
    with pytest.warns(an.ValidityWarning):
        an.equilibrium_temperature(OMEGA, 1.2, TD, T0, TAU1, TAU2)


def test_fit_cooling_curve_recovers_parameters():
    t = np.linspace(0, 30, 200)
    a, t_eq, tau = an.fit_cooling_curve(t, 4.0 * np.exp(-t / 3.0) + 0.03)
    assert (a, t_eq, tau) == pytest.approx((4.0, 0.03, 3.0), rel=1e-6)


def test_resonator_detuning_scan_monotone(tank):
    sc, _ = tank
    grid = TWO_PI * np.arange(1000.0, 9001.0, 1000.0)
    rows = an.detuning_scan(sc, grid)
    t_eq = [r.equilibrium_temperature for r in rows]
    t_eff = [r.effective_time_constant for r in rows]
    assert all(a > b for a, b in zip(t_eq, t_eq[1:]))
    assert all(a < b for a, b in zip(t_eff, t_eff[1:]))


def test_one_hertz_mismatch(tank):
    sc, _ = tank
    on, off = an.detuning_scan(sc, [0.0, TWO_PI * 1.0], axis="mismatch")
    assert off.equilibrium_temperature == pytest.approx(0.048, rel=0.20)
    assert off.effective_time_constant / on.effective_time_constant <= 2.2
    assert off.coupling_time == on.coupling_time


def test_mismatch_kernel_is_even(tank):
    a = an.intermittent_steady_state(OMEGA, -4.4, 0.4, TD, T0, TAU1, TAU2)
    b = an.intermittent_steady_state(OMEGA, 4.4, 0.4, TD, T0, TAU1, TAU2)
    assert a == b
    # in a scenario the Rabi frequency follows the mean ion frequency,
    # which shifts by half the mismatch
    sc, _ = tank
    lo, hi = an.detuning_scan(sc, [-TWO_PI * 0.7, TWO_PI * 0.7], axis="mismatch")
    assert lo.equilibrium_temperature == pytest.approx(hi.equilibrium_temperature, rel=1e-5)


@pytest.mark.parametrize("tau_c", [0.005, 0.02, 0.05])
def test_kernel_reduces_to_short_time_form(tau_c):
    t_eq, t_eff = an.intermittent_steady_state(OMEGA, 0.0, tau_c, TD, T0, TAU1, TAU2)
    # the kernel's exact noise integral keeps the cross term
    short = an.equilibrium_temperature(OMEGA, tau_c, TD, T0, TAU1, TAU2, check=False, cross_term=True)
    x = (OMEGA * tau_c) ** 2
    assert t_eq == pytest.approx(short, rel=x)
    assert t_eff == pytest.approx(an.effective_time_constant(OMEGA, tau_c), rel=x)


def test_scan_rejects_bad_arguments(tank):
    sc, _ = tank
    with pytest.raises(ValueError):
        an.detuning_scan(sc, [0.0], axis="sideways")
    with pytest.raises(ValueError):
        an.detuning_scan(sc, [0.0], method="continuous")


pos = st.floats(0.1, 10.0)


@settings(max_examples=60, deadline=None)
@given(lam=pos, s=pos, tc=st.floats(0.05, 0.5), t2=st.floats(5.0, 500.0))
def test_dimensional_scaling(lam, s, tc, t2):
    """T_eq is linear in the temperatures and depends on times only through ratios."""
    base = an.equilibrium_temperature(OMEGA, tc, TD, T0, TAU1, t2, check=False)
    scaled_t = an.equilibrium_temperature(OMEGA, tc, lam * TD, lam * T0, TAU1, t2, check=False)
    scaled_s = an.equilibrium_temperature(OMEGA / s, s * tc, TD, T0, s * TAU1, s * t2, check=False)
    assert scaled_t == pytest.approx(lam * base, rel=1e-12)
    assert scaled_s == pytest.approx(base, rel=1e-12)


@settings(max_examples=60, deadline=None)
@given(tc=st.floats(0.01, 1.5), dw=st.floats(-20.0, 20.0))
def test_kernel_bounds(tc, dw):
    t_eq, t_eff = an.intermittent_steady_state(OMEGA, dw, tc, TD, T0, TAU1, TAU2)
    assert t_eq > TD
    assert t_eff >= tc  # at most all the energy moves in one interval


def _mismatch_mc(tank, nu, correlation):
    sc, p = tank
    (row,) = an.detuning_scan(sc, [TWO_PI * nu], axis="mismatch")
    sc1 = replace(sc, ion_frequency_mismatch=TWO_PI * nu)
    traj = simulate_intermittent_cooling(
        sc1, row.coupling_time, 160, replace(p, ensemble_size=400, time_step=5e-3), correlation=correlation
    )
    return row, an.fit_cooling_curve(traj.times, traj.temperature1)


@pytest.mark.slow
def test_monte_carlo_closure_with_mismatch(tank):
    """Independent noise on the two ions is what the transfer kernel assumes."""
    row, (_, t_eq, tau) = _mismatch_mc(tank, 1.0, "independent")
    assert t_eq == pytest.approx(row.equilibrium_temperature, rel=0.20)
    assert tau == pytest.approx(row.effective_time_constant, rel=0.20)


@pytest.mark.slow
def test_common_mode_noise_breaks_mismatch_symmetry(tank):
    """A shared noise voltage adds a term linear in the coupling and odd in the mismatch.

    The same voltage drives both ions, so with unequal frequencies the coherent
    exchange acting on the correlated noise amplitudes heats ion 1 for one
    sign of the mismatch and cools it for the other. The even kernel sits
    between the two.
    """
    row, (_, hot, _) = _mismatch_mc(tank, 1.0, "common")
    _, (_, cold, _) = _mismatch_mc(tank, -1.0, "common")
    assert hot > 1.2 * row.equilibrium_temperature
    assert cold < 0.8 * row.equilibrium_temperature
