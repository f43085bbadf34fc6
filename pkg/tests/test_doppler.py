"""Doppler spreads from phase trajectories and the mitigation walk."""

import numpy as np
import pytest

from irslat.doppler import (
    CoherenceModel,
    DopplerContext,
    cascaded_doppler_spread,
    direct_doppler,
    effective_rate_factor,
    mitigate_phases,
    phase_increments,
    total_doppler,
)
from irslat.exceptions import ContractError

MM_WAVELENGTH = 3.0e8 / 28.0e9


def _ctx(**kw):
    base = dict(v_speed=110.0, slot_dt=1e-3, phi_d=0.0, phi_c=0.0,
                wavelength=MM_WAVELENGTH, pilot_overhead=0.0)
    base.update(kw)
    return DopplerContext(**base)


def test_direct_doppler_stationary():
    assert direct_doppler(_ctx(v_speed=0.0)) == 0.0


def test_direct_doppler_head_on():
    f = direct_doppler(_ctx())
    assert f == pytest.approx(110.0 * 28.0e9 / 3.0e8, rel=1e-12)
    assert f == pytest.approx(10266.7, rel=1e-4)


def test_direct_doppler_perpendicular():
    assert direct_doppler(_ctx(phi_d=np.pi / 2)) == pytest.approx(0.0, abs=1e-9)


def test_direct_doppler_sign_preserved():
    assert direct_doppler(_ctx(phi_d=np.pi)) < 0


def test_context_validation():
    with pytest.raises(ContractError):
        _ctx(slot_dt=0.0)
    with pytest.raises(ContractError):
        _ctx(wavelength=-1.0)


def test_cascaded_spread_equal_increments():
    th_prev = np.array([0.1, 0.2, 0.3])
    ctx = _ctx(theta_t=th_prev + 0.7, theta_prev=th_prev)
    assert cascaded_doppler_spread(ctx) == 0.0


def test_cascaded_spread_two_elements():
    ctx = _ctx(theta_t=np.array([0.0, np.pi]), theta_prev=np.zeros(2))
    assert cascaded_doppler_spread(ctx) == pytest.approx(500.0, rel=1e-12)


def test_cascaded_spread_static_phases_any_speed():
    th = np.array([1.0, 2.5, 0.3])
    ctx = _ctx(v_speed=300.0, theta_t=th, theta_prev=th)
    assert cascaded_doppler_spread(ctx) == 0.0


def test_cascaded_spread_mismatched_history():
    ctx = _ctx(theta_t=np.zeros(3), theta_prev=np.zeros(2))
    with pytest.raises(ContractError):
        cascaded_doppler_spread(ctx)


def test_cascaded_spread_missing_history():
    with pytest.raises(ContractError):
        cascaded_doppler_spread(_ctx())


def test_common_constant_cancels(rng):
    th_prev = rng.uniform(0, 2 * np.pi, 16)
    th_t = rng.uniform(0, 2 * np.pi, 16)
    ctx = _ctx(theta_t=th_t, theta_prev=th_prev)
    base = cascaded_doppler_spread(ctx)
    shifted = cascaded_doppler_spread(ctx, theta_t=th_t + 1.234)
    assert abs(shifted - base) < 1e-9


def test_total_doppler_takes_dominant():
    th_t = np.array([0.0, np.pi])
    ctx = _ctx(theta_t=th_t, theta_prev=np.zeros(2))
    # direct shift ~10.3 kHz dominates the 500 Hz cascaded spread
    assert total_doppler(ctx) == pytest.approx(abs(direct_doppler(ctx)))
    slow = _ctx(v_speed=1.0, theta_t=th_t, theta_prev=np.zeros(2))
    assert total_doppler(slow) == pytest.approx(500.0, rel=1e-12)


def test_rate_factor_no_pilots():
    assert effective_rate_factor(1e4, 0.0, 80e6) == 1.0


def test_rate_factor_vanishes_at_large_spread():
    assert effective_rate_factor(1e12, 1.0, 1e6) == 0.0


def test_rate_factor_saturated_regime():
    # T_c = 0.423/1e4 = 42.3 us carries only 3384 symbols at 80 MHz, fewer
    # than the 6000 pilot symbols, so nothing is left for payload
    assert effective_rate_factor(1e4, 6000.0, 80e6) == 0.0


def test_rate_factor_interior_value():
    t_c = 0.423 / 1e3
    want = 1.0 - 1000.0 / (10e6 * t_c)
    assert effective_rate_factor(1e3, 1000.0, 10e6) == pytest.approx(want, rel=1e-12)


def test_rate_factor_floor_guards_zero_spread():
    assert effective_rate_factor(0.0, 1000.0, 10e6) == pytest.approx(
        1.0 - 1000.0 / (10e6 * CoherenceModel().coherence_time(0.0)), rel=1e-12)


def test_rate_factor_validation():
    with pytest.raises(ContractError):
        effective_rate_factor(1e3, -1.0, 10e6)
    with pytest.raises(ContractError):
        effective_rate_factor(1e3, 0.0, 0.0)


def test_mitigate_equal_increments_no_op():
    th_prev = np.array([0.25, 0.5, 0.75])  # exact binary fractions
    th_t = th_prev + 0.5
    ctx = _ctx(v_speed=0.0, theta_t=th_t, theta_prev=th_prev)
    out = mitigate_phases(th_t, th_prev, ctx, lambda th: 0.0)
    assert np.array_equal(out, th_t)


def test_mitigate_flattens_single_runaway_element():
    # sorted increments [2*pi*1e4*dt, 0, 0] with no direct shift: the walk
    # copies the successor's increment and the spread collapses to zero
    th_prev = np.zeros(3)
    th_t = np.array([2 * np.pi * 10.0, 0.0, 0.0])
    ctx = _ctx(v_speed=0.0, theta_t=th_t, theta_prev=th_prev)
    assert cascaded_doppler_spread(ctx) == pytest.approx(1e4, rel=1e-12)
    out = mitigate_phases(th_t, th_prev, ctx, lambda th: 0.0)
    assert cascaded_doppler_spread(ctx, theta_t=out) == pytest.approx(0.0, abs=1e-9)
    assert out[0] == pytest.approx(0.0)


def test_mitigate_guard_reverts_and_stops():
    th_prev = np.zeros(3)
    th_t = np.array([2 * np.pi * 10.0, 0.0, 0.0])
    ctx = _ctx(v_speed=0.0, theta_t=th_t, theta_prev=th_prev)
    calls = []

    def worsening(th):
        calls.append(np.array(th))
        return float(len(calls))  # every candidate looks worse than the last

    out = mitigate_phases(th_t, th_prev, ctx, worsening)
    assert np.array_equal(out, th_t)
    assert len(calls) == 2  # incumbent plus the single rejected candidate


def test_mitigate_skips_when_direct_dominates():
    # cascaded spread 500 Hz sits below the ~10.3 kHz direct shift
    th_prev = np.zeros(2)
    th_t = np.array([np.pi, 0.0])
    ctx = _ctx(theta_t=th_t, theta_prev=th_prev)
    calls = []
    out = mitigate_phases(th_t, th_prev, ctx, lambda th: calls.append(1) or 0.0)
    assert np.array_equal(out, th_t)
    assert not calls


def test_mitigate_never_hurts(rng):
    for _ in range(50):
        n = int(rng.integers(2, 12))
        th_prev = rng.uniform(0, 2 * np.pi, n)
        th_t = rng.uniform(-2 * np.pi, 4 * np.pi, n)
        weights = rng.uniform(0.5, 2.0, n)

        def objective(th):
            return float(np.dot(weights, np.cos(th - 0.3)))

        ctx = _ctx(v_speed=float(rng.uniform(0, 200)),
                   theta_t=th_t, theta_prev=th_prev)
        out = mitigate_phases(th_t, th_prev, ctx, objective)
        assert objective(out) <= objective(th_t) + 1e-9


def test_mitigate_spread_monotone_over_accepted_steps(rng):
    th_prev = rng.uniform(0, 2 * np.pi, 8)
    th_t = th_prev + rng.uniform(0, 3.0, 8)
    ctx = _ctx(v_speed=0.0, theta_t=th_t, theta_prev=th_prev)
    seen = []

    def accept_all(th):
        seen.append(np.array(th))
        return 0.0

    mitigate_phases(th_t, th_prev, ctx, accept_all)
    spreads = [cascaded_doppler_spread(ctx, theta_t=th) for th in seen]
    assert all(b <= a + 1e-9 for a, b in zip(spreads, spreads[1:]))


def test_phase_increments_include_kinematic_advance():
    th = np.zeros(4)
    ctx = _ctx(v_speed=100.0, phi_c=0.0, theta_t=th, theta_prev=th)
    inc = phase_increments(ctx)
    want = 2 * np.pi * 100.0 * 1e-3 / MM_WAVELENGTH
    assert inc == pytest.approx(np.full(4, want), rel=1e-12)
