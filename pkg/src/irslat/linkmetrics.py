"""Physical-layer metrics: composite channels, harvested power, SINR/MSE,
latency objective, and eavesdropper leakage.

All per-band quantities take the band's own matrices; callers select the
band by what they pass in. Powers are in watts, capacities in bits/s.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .exceptions import ContractError, DomainError, InfeasibleInstanceError
from .scenario import BANDS, ChannelSet


@dataclass
class DownlinkDecision:
    """Energy-transfer block: time split, BS beams, IRS1 phases."""

    beta: float
    W: np.ndarray  # M1 x M1
    theta1: np.ndarray  # N1 phases

    def __post_init__(self):
        if not 0 < self.beta < 1:
            raise DomainError(f"beta must lie in (0,1), got {self.beta}")
        self.theta1 = np.mod(np.asarray(self.theta1, dtype=float), 2 * np.pi)

    def power(self) -> float:
        return float(np.linalg.norm(self.W) ** 2)

    def check_power(self, p_max: float, slack: float = 1e-9):
        if self.power() > p_max + slack:
            raise ContractError(
                f"beam power {self.power():.6g} exceeds budget {p_max:.6g}")


@dataclass
class UplinkDecision:
    """Information-transfer block: band power splits, decoders, IRS2 phases."""

    gamma: np.ndarray  # L splits in [0,1]
    F: dict  # band -> M2 x L decoder matrix
    theta2: np.ndarray  # N2 phases

    def __post_init__(self):
        self.gamma = np.asarray(self.gamma, dtype=float)
        if np.any(self.gamma < 0) or np.any(self.gamma > 1):
            raise DomainError("gamma entries must lie in [0,1]")
        self.theta2 = np.mod(np.asarray(self.theta2, dtype=float), 2 * np.pi)

    def band_powers(self, p: np.ndarray) -> dict:
        return {"s": self.gamma * p, "m": (1.0 - self.gamma) * p}


@dataclass
class LatencyReport:
    capacities: dict  # band -> (L,) bits/s
    latency: np.ndarray  # (L,) seconds
    objective: float  # weighted sum, seconds
    leakage: float = 0.0  # linear power at the users
    harvested: np.ndarray | None = None  # (L,) watts
    alpha: np.ndarray | None = None  # volume split actually used

    def __post_init__(self):
        if np.any(self.latency < 0):
            raise ContractError("latency entries must be nonnegative")


def effective_channels(channels: ChannelSet, theta1: np.ndarray,
                       theta2: np.ndarray) -> tuple[np.ndarray, dict]:
    """Composite links after the IRS phase shifts.

    Returns (hbar, gbar): hbar is L x M1 with rows h_r Phi1 H + h_d,
    gbar maps band -> M2 x L with columns G Phi2 g_r + g_d.
    """
    theta1 = np.asarray(theta1, dtype=float)
    theta2 = np.asarray(theta2, dtype=float)
    if theta1.shape != (channels.H.shape[0],):
        raise ContractError(
            f"theta1 length {theta1.shape} does not match N1={channels.H.shape[0]}")
    phase1 = np.exp(1j * theta1)
    hbar = (channels.h_r * phase1[None, :]) @ channels.H + channels.h_d

    gbar = {}
    phase2 = np.exp(1j * theta2)
    for band in BANDS:
        g_r = channels.g_r[band]
        if theta2.shape != (g_r.shape[1],):
            raise ContractError(
                f"theta2 length {theta2.shape} does not match N2={g_r.shape[1]}")
        gbar[band] = channels.G[band] @ (phase2[None, :] * g_r).T + channels.g_d[band].T
    return hbar, gbar


def harvested_power(hbar: np.ndarray, W: np.ndarray, beta: float,
                    xi: float) -> np.ndarray:
    """Per-IoTD uplink transmit power p_l = xi*beta*||hbar_l W||^2/(1-beta)."""
    if not 0 < beta < 1:
        raise DomainError(f"harvested_power requires beta in (0,1), got {beta}")
    hw = hbar @ W  # L x M1
    return xi * beta / (1.0 - beta) * np.sum(np.abs(hw) ** 2, axis=1)


def _decoder_products(gbar_band: np.ndarray, decoder: np.ndarray):
    """q[l,i] = f_l^H gbar_i and per-column squared norms of the decoder."""
    if decoder.shape != gbar_band.shape:
        raise ContractError(
            f"decoder shape {decoder.shape} != channel shape {gbar_band.shape}")
    q = decoder.conj().T @ gbar_band  # L x L
    fnorm2 = np.sum(np.abs(decoder) ** 2, axis=0)
    return q, fnorm2


def sinr_and_capacity(gbar_band: np.ndarray, decoder: np.ndarray,
                      powers: np.ndarray, sigma2: float, bandwidth: float,
                      beta: float) -> tuple[np.ndarray, np.ndarray]:
    """Uplink SINR and capacity per IoTD for one band.

    Interference comes from same-band co-scheduled IoTDs only; capacity
    carries the (1-beta) information-phase time share.
    """
    if sigma2 <= 0:
        raise DomainError("sigma2 must be positive")
    if not 0 <= beta < 1:
        raise DomainError(f"beta must lie in [0,1), got {beta}")
    q, fnorm2 = _decoder_products(gbar_band, decoder)
    if np.any(fnorm2 <= 0):
        raise ContractError("zero decoder column: SINR undefined")
    powers = np.asarray(powers, dtype=float)
    q2 = np.abs(q) ** 2
    signal = powers * np.diag(q2)
    interference = q2 @ powers - signal
    sinr = signal / (interference + sigma2 * fnorm2)
    capacity = (1.0 - beta) * bandwidth * np.log2(1.0 + sinr)
    return sinr, capacity


def mse(gbar_band: np.ndarray, decoder: np.ndarray, powers: np.ndarray,
        sigma2: float, l: int) -> float:
    """Symbol-recovery MSE of device l under the given per-band decoder."""
    return float(mse_all(gbar_band, decoder, powers, sigma2)[l])


def mse_all(gbar_band: np.ndarray, decoder: np.ndarray, powers: np.ndarray,
            sigma2: float) -> np.ndarray:
    """e_l = |sqrt(p_l) f_l^H g_l - 1|^2 + sum_{i != l} p_i |f_l^H g_i|^2
    + sigma2 ||f_l||^2, vectorized over l."""
    if sigma2 <= 0:
        raise DomainError("sigma2 must be positive")
    q, fnorm2 = _decoder_products(gbar_band, decoder)
    powers = np.asarray(powers, dtype=float)
    root_p = np.sqrt(powers)
    diag_q = np.diag(q)
    q2 = np.abs(q) ** 2
    cross = q2 @ powers - powers * np.abs(diag_q) ** 2
    return (np.abs(root_p * diag_q - 1.0) ** 2 + cross + sigma2 * fnorm2).real


def upload_latency_objective(alpha: np.ndarray, volumes: np.ndarray,
                             weights: np.ndarray, c_s: np.ndarray,
                             c_m: np.ndarray, leakage: float = 0.0,
                             harvested: np.ndarray | None = None) -> LatencyReport:
    """Per-IoTD latency D_l = max over bands of (volume share / capacity).

    When one band carries zero capacity the whole volume is forced onto the
    live band regardless of the requested alpha; both bands dead is an
    infeasible instance.
    """
    alpha = np.asarray(alpha, dtype=float)
    volumes = np.asarray(volumes, dtype=float)
    c_s = np.asarray(c_s, dtype=float)
    c_m = np.asarray(c_m, dtype=float)
    if np.any((alpha < 0) | (alpha > 1)):
        raise DomainError("alpha entries must lie in [0,1]")
    dead = (c_s <= 0) & (c_m <= 0)
    if np.any(dead):
        raise InfeasibleInstanceError(
            f"devices {np.nonzero(dead)[0].tolist()} have zero capacity in both bands")
    alpha_eff = np.where(c_s <= 0, 0.0, np.where(c_m <= 0, 1.0, alpha))

    def share_time(vol_share, cap):
        out = np.zeros_like(vol_share)
        live = vol_share > 0
        out[live] = vol_share[live] / cap[live]  # cap > 0 wherever share > 0
        return out

    t_s = share_time(alpha_eff * volumes, c_s)
    t_m = share_time((1.0 - alpha_eff) * volumes, c_m)
    latency = np.maximum(t_s, t_m)
    objective = float(np.dot(np.asarray(weights, dtype=float), latency))
    return LatencyReport(capacities={"s": c_s, "m": c_m}, latency=latency,
                         objective=objective, leakage=leakage,
                         harvested=harvested, alpha=alpha_eff)


def leakage(channels: ChannelSet, theta2: np.ndarray) -> float:
    """Total reflected power reaching the users over bands, devices, users."""
    phase2 = np.exp(1j * np.asarray(theta2, dtype=float))
    total = 0.0
    for band in BANDS:
        paths = (channels.d_eaves[band] * phase2[None, :]) @ channels.g_r[band].T
        total += float(np.sum(np.abs(paths) ** 2))
    return total
