"""Doppler spread along the train trajectory and its phase-domain mitigation.

Phase trajectories are handled unwrapped: the per-element increments that
define the cascaded spread come from raw differences of consecutive phase
solutions, and downstream application of a phase vector is 2*pi-periodic, so
mitigated phases may leave [0, 2*pi) without changing any link quantity.
"""

from __future__ import annotations

from dataclasses import dataclass, replace

import numpy as np

from .exceptions import ContractError

LIGHTSPEED = 3.0e8


@dataclass(frozen=True)
class CoherenceModel:
    """Coherence time T_c = c0 / max(|f_d|, f_floor)."""

    c0: float = 0.423
    f_floor: float = 1e-3

    def coherence_time(self, f_d: float) -> float:
        return self.c0 / max(abs(f_d), self.f_floor)


@dataclass(frozen=True)
class DopplerContext:
    """Kinematics plus the phase history needed for the cascaded spread."""

    v_speed: float  # m/s
    slot_dt: float  # s between phase solutions
    phi_d: float  # direct-path heading angle at the MCR
    phi_c: float  # heading angle seen through the IRS2 path
    wavelength: float  # carrier wavelength of the penalized band, m
    pilot_overhead: float  # symbols consumed per coherence block
    theta_t: np.ndarray | None = None
    theta_prev: np.ndarray | None = None

    def __post_init__(self):
        if self.slot_dt <= 0:
            raise ContractError("slot_dt must be positive")
        if self.wavelength <= 0:
            raise ContractError("wavelength must be positive")


def direct_doppler(ctx: DopplerContext) -> float:
    """Doppler shift of the direct train-to-MCR path, v cos(phi_d)/lambda."""
    return ctx.v_speed * np.cos(ctx.phi_d) / ctx.wavelength


def phase_increments(ctx: DopplerContext, theta_t: np.ndarray | None = None,
                     theta_prev: np.ndarray | None = None) -> np.ndarray:
    """Per-element phase change over one slot: the kinematic advance through
    the reflected path plus the change of the applied phase shifts."""
    t_now = ctx.theta_t if theta_t is None else theta_t
    t_prev = ctx.theta_prev if theta_prev is None else theta_prev
    if t_now is None or t_prev is None:
        raise ContractError("phase history required for cascaded spread")
    t_now = np.asarray(t_now, dtype=float)
    t_prev = np.asarray(t_prev, dtype=float)
    if t_now.shape != t_prev.shape:
        raise ContractError("phase history shapes differ")
    kinematic = (2.0 * np.pi * ctx.v_speed * ctx.slot_dt
                 * np.cos(ctx.phi_c) / ctx.wavelength)
    return kinematic + (t_now - t_prev)


def cascaded_doppler_spread(ctx: DopplerContext,
                            theta_t: np.ndarray | None = None,
                            theta_prev: np.ndarray | None = None) -> float:
    """Spread of the reflected path's element frequencies: the widest pair
    of per-element phase increments over the slot, in Hz.

    The kinematic advance is common to all elements and cancels; only the
    applied-phase dynamics disperse the increments.
    """
    inc = phase_increments(ctx, theta_t, theta_prev)
    return float((inc.max() - inc.min()) / (2.0 * np.pi * ctx.slot_dt))


def effective_rate_factor(f_d_total: float, pilot_overhead: float,
                          bandwidth: float,
                          model: CoherenceModel = CoherenceModel()) -> float:
    """Fraction of a coherence block left for payload after pilots.

    Clamped at zero: when pilots outnumber the symbols a coherence block
    carries, the band transports nothing.
    """
    if bandwidth <= 0:
        raise ContractError("bandwidth must be positive")
    if pilot_overhead < 0:
        raise ContractError("pilot overhead cannot be negative")
    t_c = model.coherence_time(f_d_total)
    return float(max(0.0, 1.0 - pilot_overhead / (bandwidth * t_c)))


def total_doppler(ctx: DopplerContext, theta_t: np.ndarray | None = None,
                  theta_prev: np.ndarray | None = None) -> float:
    """Worst of the direct shift and the cascaded spread."""
    return max(abs(direct_doppler(ctx)),
               cascaded_doppler_spread(ctx, theta_t, theta_prev))


def mitigate_phases(theta_star_t: np.ndarray, theta_star_prev: np.ndarray,
                    ctx: DopplerContext, objective_evaluator) -> np.ndarray:
    """Re-align the fastest-moving IRS2 elements to shrink the cascaded
    spread below the direct shift, keeping the latency objective monotone.

    Elements are visited in decreasing order of their phase increment. The
    boundary index is the last position whose increment-above-minimum still
    exceeds the direct shift; if even the largest increment sits below that
    level there is nothing to gain and the input is returned unchanged.
    Each adjusted element copies its successor's increment; a candidate that
    worsens objective_evaluator's value reverts and stops the walk.
    """
    theta_t = np.asarray(theta_star_t, dtype=float)
    theta_prev = np.asarray(theta_star_prev, dtype=float)
    if theta_t.shape != theta_prev.shape:
        raise ContractError("phase history shapes differ")
    inc = phase_increments(ctx, theta_t, theta_prev)
    n = inc.shape[0]
    order = np.lexsort((np.arange(n), -inc))  # decreasing, ties by index
    inc_sorted = inc[order]
    level = abs(direct_doppler(ctx))
    spread_hz = (inc_sorted - inc_sorted[-1]) / (2.0 * np.pi * ctx.slot_dt)
    adjustable = int(np.sum(spread_hz > level))
    if adjustable <= 0 or n < 2:
        return theta_t.copy()
    adjustable = min(adjustable, n - 1)  # last element has no successor

    best = theta_t.copy()
    best_val = float(objective_evaluator(best))
    for pos in range(adjustable):
        here, nxt = order[pos], order[pos + 1]
        candidate = best.copy()
        candidate[here] = theta_t[nxt] + theta_prev[here] - theta_prev[nxt]
        val = float(objective_evaluator(candidate))
        if val <= best_val:
            best, best_val = candidate, val
        else:
            break
    return best
