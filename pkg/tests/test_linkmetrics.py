"""Composite channels, harvested power, SINR/MSE, latency, leakage."""

import numpy as np
import pytest

from irslat.exceptions import DomainError, InfeasibleInstanceError
from irslat.linkmetrics import (
    DownlinkDecision,
    UplinkDecision,
    effective_channels,
    harvested_power,
    leakage,
    mse,
    mse_all,
    sinr_and_capacity,
    upload_latency_objective,
)
from irslat.scenario import ChannelSet
from irslat.uplink import mmse_decoder


def _tiny_channelset(n2=1, K=1, L=1, d_val=1.0, g_val=1.0):
    """Hand-built single-band-duplicated set for scalar examples."""
    band = lambda arr: {"s": arr.copy(), "m": arr.copy()}
    return ChannelSet(
        H=np.ones((1, 1), complex),
        h_r=np.ones((L, 1), complex),
        h_d=np.zeros((L, 1), complex),
        G=band(np.ones((1, n2), complex)),
        g_r=band(g_val * np.ones((L, n2), complex)),
        g_d=band(np.zeros((L, 1), complex)),
        d_eaves=band(d_val * np.ones((K, n2), complex)),
        seed=0,
    )


# --- effective channels ---------------------------------------------------

def test_no_reflection_leaves_direct_path(toy_channels, toy_cfg):
    ch = ChannelSet(
        H=toy_channels.H,
        h_r=np.zeros_like(toy_channels.h_r),
        h_d=toy_channels.h_d,
        G=toy_channels.G,
        g_r=toy_channels.g_r,
        g_d=toy_channels.g_d,
        d_eaves=toy_channels.d_eaves,
        seed=0,
    )
    hbar, _ = effective_channels(ch, np.zeros(toy_cfg.n1), np.zeros(toy_cfg.n2))
    np.testing.assert_array_equal(hbar, toy_channels.h_d)


def test_single_element_pi_shift_negates():
    ch = _tiny_channelset()
    hbar, _ = effective_channels(ch, np.array([np.pi]), np.zeros(1))
    assert hbar[0, 0] == pytest.approx(-1.0, abs=1e-15)


def test_uplink_composition_orientation(toy_channels, toy_cfg):
    theta2 = np.linspace(0, 1, toy_cfg.n2)
    _, gbar = effective_channels(toy_channels, np.zeros(toy_cfg.n1), theta2)
    phase = np.exp(1j * theta2)
    l = 1
    want = toy_channels.G["m"] @ (phase * toy_channels.g_r["m"][l]) \
        + toy_channels.g_d["m"][l]
    np.testing.assert_allclose(gbar["m"][:, l], want, rtol=1e-12)


# --- harvested power --------------------------------------------------------

def test_harvested_scalar_identity():
    p = harvested_power(np.ones((1, 1)), np.sqrt(10.0) * np.ones((1, 1)),
                        beta=0.5, xi=0.8)
    assert p[0] == pytest.approx(8.0)


def test_harvested_zero_beams():
    p = harvested_power(np.ones((2, 3)), np.zeros((3, 3)), beta=0.3, xi=0.8)
    np.testing.assert_array_equal(p, np.zeros(2))


@pytest.mark.parametrize("beta", [0.0, 1.0, -0.2, 1.7])
def test_harvested_rejects_bad_beta(beta):
    with pytest.raises(DomainError):
        harvested_power(np.ones((1, 1)), np.ones((1, 1)), beta=beta, xi=0.8)


# --- SINR / capacity --------------------------------------------------------

def test_sinr_single_user_scalar():
    g = np.ones((1, 1), complex)
    f = np.ones((1, 1), complex)
    sinr, cap = sinr_and_capacity(g, f, np.array([1.0]), sigma2=1.0,
                                  bandwidth=1e6, beta=0.25)
    assert sinr[0] == pytest.approx(1.0)
    assert cap[0] == pytest.approx(0.75 * 1e6)  # log2(2) = 1


def test_sinr_zero_power():
    g = np.ones((2, 2), complex) + 0.1 * np.eye(2)
    f = np.eye(2, dtype=complex)
    sinr, cap = sinr_and_capacity(g, f, np.zeros(2), sigma2=1.0,
                                  bandwidth=1e6, beta=0.5)
    np.testing.assert_array_equal(sinr, np.zeros(2))
    np.testing.assert_array_equal(cap, np.zeros(2))


def test_sinr_two_equal_devices():
    # identical scalar channels: the other device is pure interference
    g = np.ones((1, 2), complex)
    f = np.ones((1, 2), complex)
    p, s2 = 3.0, 0.5
    sinr, _ = sinr_and_capacity(g, f, np.array([p, p]), sigma2=s2,
                                bandwidth=1e6, beta=0.5)
    np.testing.assert_allclose(sinr, p / (p + s2))


def test_sinr_rejects_zero_decoder_column():
    g = np.ones((2, 2), complex)
    f = np.zeros((2, 2), complex)
    f[:, 0] = 1.0
    with pytest.raises(Exception):
        sinr_and_capacity(g, f, np.ones(2), 1.0, 1e6, 0.5)


# --- MSE ---------------------------------------------------------------------

def test_mse_scalar_case():
    # (0.8 - 1)^2 + 0.16 = 0.2
    g = np.ones((1, 1), complex)
    f = np.array([[0.4]], complex)
    assert mse(g, f, np.array([4.0]), sigma2=1.0, l=0) == pytest.approx(0.2)


def test_mse_zero_decoder():
    g = np.ones((1, 1), complex)
    f = np.zeros((1, 1), complex)
    assert mse(g, f, np.array([4.0]), sigma2=1.0, l=0) == pytest.approx(1.0)


def test_mmse_duality(rng):
    # e * (1 + SINR) = 1 for the minimizing decoder
    for _ in range(20):
        m2, L = 4, 3
        g = rng.standard_normal((m2, L)) + 1j * rng.standard_normal((m2, L))
        p = rng.uniform(0.1, 2.0, L)
        s2 = rng.uniform(0.05, 1.0)
        f = mmse_decoder(g, p, s2)
        e = mse_all(g, f, p, s2)
        sinr, _ = sinr_and_capacity(g, f, p, s2, 1e6, 0.5)
        np.testing.assert_allclose(e * (1.0 + sinr), 1.0, atol=1e-10)


# --- latency objective -------------------------------------------------------

def test_latency_symmetric_split():
    rep = upload_latency_objective(
        np.array([0.5]), np.array([1e6]), np.array([1.0]),
        np.array([1e6]), np.array([1e6]))
    assert rep.latency[0] == pytest.approx(0.5)
    assert rep.objective == pytest.approx(0.5)


def test_latency_single_band_ignores_other():
    for c_m in (1.0, 1e9):
        rep = upload_latency_objective(
            np.array([1.0]), np.array([1e6]), np.array([1.0]),
            np.array([1e6]), np.array([c_m]))
        assert rep.latency[0] == pytest.approx(1.0)


def test_latency_balanced_optimum():
    rep = upload_latency_objective(
        np.array([0.25]), np.array([8e6]), np.array([1.0]),
        np.array([2e6]), np.array([6e6]))
    assert rep.latency[0] == pytest.approx(1.0)


def test_latency_dead_band_forces_live_band():
    rep = upload_latency_objective(
        np.array([0.3]), np.array([1e6]), np.array([1.0]),
        np.array([1e6]), np.array([0.0]))
    assert rep.alpha[0] == 1.0
    assert rep.latency[0] == pytest.approx(1.0)


def test_latency_both_bands_dead():
    with pytest.raises(InfeasibleInstanceError):
        upload_latency_objective(
            np.array([0.5]), np.array([1e6]), np.array([1.0]),
            np.array([0.0]), np.array([0.0]))


def test_objective_is_weighted_sum(rng):
    L = 4
    w = rng.uniform(0.1, 1.0, L)
    rep = upload_latency_objective(
        rng.uniform(0, 1, L), rng.uniform(1e5, 1e6, L), w,
        rng.uniform(1e5, 1e6, L), rng.uniform(1e5, 1e6, L))
    assert rep.objective == float(np.dot(w, rep.latency))


# --- leakage -----------------------------------------------------------------

def test_leakage_no_eaves_channel():
    ch = _tiny_channelset(d_val=0.0)
    assert leakage(ch, np.zeros(1)) == 0.0


def test_leakage_single_element_counts_paths():
    # phase drops out of a one-element reflection; 2 bands x K x L terms
    K, L = 3, 3
    ch = _tiny_channelset(n2=1, K=K, L=L)
    for theta in (0.0, 1.3, np.pi):
        assert leakage(ch, np.array([theta])) == pytest.approx(2 * K * L)


def test_leakage_destructive_pair():
    ch = _tiny_channelset(n2=2)
    assert leakage(ch, np.array([0.0, np.pi])) == pytest.approx(0.0, abs=1e-25)


# --- decision containers -----------------------------------------------------

def test_downlink_decision_validates_beta():
    with pytest.raises(DomainError):
        DownlinkDecision(beta=1.0, W=np.eye(2), theta1=np.zeros(4))


def test_downlink_decision_power_check():
    d = DownlinkDecision(beta=0.5, W=2.0 * np.eye(2), theta1=np.zeros(4))
    assert d.power() == pytest.approx(8.0)
    with pytest.raises(Exception):
        d.check_power(7.9)
    d.check_power(8.0)


def test_uplink_decision_band_powers():
    u = UplinkDecision(gamma=np.array([0.25, 1.0]),
                       F={"s": np.eye(2, dtype=complex),
                          "m": np.eye(2, dtype=complex)},
                       theta2=np.zeros(4))
    bp = u.band_powers(np.array([4.0, 2.0]))
    np.testing.assert_allclose(bp["s"], [1.0, 2.0])
    np.testing.assert_allclose(bp["m"], [3.0, 0.0])


def test_uplink_decision_rejects_bad_gamma():
    with pytest.raises(DomainError):
        UplinkDecision(gamma=np.array([-0.1]), F={}, theta2=np.zeros(2))
