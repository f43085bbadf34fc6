"""Energy-phase optimizers: time split beta, BS beamformer W, IRS1 phases.

Each routine maximizes the multiplier-weighted sum rate (equivalently,
minimizes the latency objective at fixed multipliers) over its own block
with everything else held fixed.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .exceptions import ContractError

LN2 = np.log(2.0)


# --------------------------------------------------------------------------
# time split beta
# --------------------------------------------------------------------------

@dataclass(frozen=True)
class BetaCoefficients:
    """Per (band, device) affine-SINR model: sinr(beta) = a*beta/((b-c)*beta + c).

    a carries the device's own harvested signal, b the co-channel harvested
    interference, c the decoder noise floor. Shapes are (2, L) with band
    order ("s", "m").
    """

    a: np.ndarray
    b: np.ndarray
    c: np.ndarray

    def __post_init__(self):
        for name in ("a", "b", "c"):
            arr = getattr(self, name)
            if np.any(arr < 0):
                raise ContractError(f"{name} coefficients must be nonnegative")
        if np.any(self.c <= 0):
            raise ContractError("noise coefficients c must be positive")


def beta_coefficients(hbar: np.ndarray, W: np.ndarray, q: dict, fnorm2: dict,
                      gamma: np.ndarray, xi: float, sigma2: dict) -> BetaCoefficients:
    """Assemble the beta-dependence of every SINR from current channels.

    q[band] is the L x L decoder/channel product f_l^H gbar_i, fnorm2[band]
    the squared decoder column norms.
    """
    hw2 = np.sum(np.abs(hbar @ W) ** 2, axis=1)  # ||hbar_l W||^2
    split = {"s": np.asarray(gamma, dtype=float),
             "m": 1.0 - np.asarray(gamma, dtype=float)}
    a_rows, b_rows, c_rows = [], [], []
    for band in ("s", "m"):
        q2 = np.abs(q[band]) ** 2
        harvested = xi * split[band] * hw2  # per source i, without beta/(1-beta)
        own = np.diag(q2) * harvested
        total = q2 @ harvested
        a_rows.append(own)
        b_rows.append(total - own)
        c_rows.append(sigma2[band] * fnorm2[band])
    return BetaCoefficients(a=np.vstack(a_rows), b=np.vstack(b_rows),
                            c=np.vstack(c_rows))


@dataclass(frozen=True)
class BetaResult:
    beta: float
    status: str  # "interior" | "boundary" | "degenerate"


def _beta_derivative(beta, coeffs, lam_eta, bandwidths):
    """d/dbeta of sum_{F,l} lam_eta_l * (1-beta) * B_F * log2(1 + sinr)."""
    a, b, c = coeffs.a, coeffs.b, coeffs.c
    den = (b - c) * beta + c
    u = a * beta / den
    du = a * c / den ** 2
    per_term = -np.log1p(u) + (1.0 - beta) * du / (1.0 + u)
    weight = lam_eta[None, :] * bandwidths[:, None] / LN2
    return float(np.sum(weight * per_term))


def _beta_objective(beta, coeffs, lam_eta, bandwidths):
    den = (coeffs.b - coeffs.c) * beta + coeffs.c
    u = coeffs.a * beta / den
    rates = (1.0 - beta) * bandwidths[:, None] * np.log1p(u) / LN2
    return float(np.sum(lam_eta[None, :] * rates))


def optimize_beta(coeffs: BetaCoefficients, lam_eta: np.ndarray,
                  bandwidths: tuple[float, float],
                  width_tol: float = 1e-12) -> BetaResult:
    """Maximize the weighted sum rate over the harvesting split beta.

    The summed derivative has a single sign change on (0,1) whenever any
    device carries signal; bisection runs to a fixed interval width so the
    answer is invariant to rescaling the weights.
    """
    lam_eta = np.asarray(lam_eta, dtype=float)
    bw = np.asarray(bandwidths, dtype=float)
    if np.all(coeffs.a * lam_eta[None, :] == 0):
        return BetaResult(beta=0.5, status="degenerate")

    lo, hi = 1e-9, 1.0 - 1e-9
    d_lo = _beta_derivative(lo, coeffs, lam_eta, bw)
    d_hi = _beta_derivative(hi, coeffs, lam_eta, bw)
    if d_lo <= 0 or d_hi >= 0:
        # no interior sign change: pick the better edge
        f_lo = _beta_objective(lo, coeffs, lam_eta, bw)
        f_hi = _beta_objective(hi, coeffs, lam_eta, bw)
        return BetaResult(beta=lo if f_lo >= f_hi else hi, status="boundary")
    while hi - lo > width_tol:
        mid = 0.5 * (lo + hi)
        if _beta_derivative(mid, coeffs, lam_eta, bw) > 0:
            lo = mid
        else:
            hi = mid
    return BetaResult(beta=0.5 * (lo + hi), status="interior")


# --------------------------------------------------------------------------
# BS energy beamformer W
# --------------------------------------------------------------------------

def ball_quadratic_min(Q: np.ndarray, V: np.ndarray, p_max: float,
                       width_tol: float = 1e-14) -> np.ndarray:
    """argmin_W Tr(W^H Q W) - 2 Re Tr(V^H W) subject to ||W||_F^2 <= p_max.

    Q must be Hermitian PSD. Solved exactly in Q's eigenbasis: rows scale by
    1/(d_i + nu) where the multiplier nu >= 0 is bisected on the monotone
    power curve.
    """
    if p_max <= 0:
        raise ContractError("power budget must be positive")
    d, U = np.linalg.eigh(Q)
    d = np.clip(d, 0.0, None)
    Vt = U.conj().T @ V

    def power(nu):
        return float(np.sum(np.abs(Vt) ** 2 / (d[:, None] + nu) ** 2))

    strict_rows = d > 0
    if np.all(strict_rows) or not np.any(np.abs(Vt[~strict_rows]) > 0):
        # unconstrained candidate exists (rows with d=0 carry no target)
        with np.errstate(divide="ignore", invalid="ignore"):
            W0 = np.where(d[:, None] > 0, Vt / np.where(d[:, None] > 0, d[:, None], 1.0), 0.0)
        if np.sum(np.abs(W0) ** 2) <= p_max:
            return U @ W0
    lo = 0.0
    hi = float(np.linalg.norm(Vt) / np.sqrt(p_max))
    if hi == 0.0:
        return np.zeros_like(V)
    while power(hi) > p_max:
        hi *= 2.0
    # Width test is relative to the bracket so that rescaling (Q, V) by a
    # common factor replays the same bisection path; scaling the problem
    # must not change the minimizer.
    while hi - lo > width_tol * hi:
        mid = 0.5 * (lo + hi)
        if mid <= lo or mid >= hi:
            break
        if power(mid) > p_max:
            lo = mid
        else:
            hi = mid
    nu = 0.5 * (lo + hi)
    return U @ (Vt / (d[:, None] + nu))


def dca_coefficients(hbar: np.ndarray, q: dict, gamma: np.ndarray,
                     beta: float, xi: float, mse_w: dict) -> tuple[np.ndarray, np.ndarray]:
    """Quadratic and norm weights (c_i, d_l) of the beamformer objective.

    mse_w[band] are the per-device MSE weights Gamma. gbar-side products q
    are held fixed while W varies.
    """
    L = hbar.shape[0]
    scale = xi * beta / (1.0 - beta)
    split = {"s": np.asarray(gamma, dtype=float), "m": 1.0 - np.asarray(gamma, dtype=float)}
    c = np.zeros(L)
    dvec = np.zeros(L)
    for band in ("s", "m"):
        gbar_scale = scale * split[band]  # per source index i
        q2 = np.abs(q[band]) ** 2  # [l, i]
        c += (mse_w[band] @ q2) * gbar_scale
        dvec += 2.0 * mse_w[band] * np.real(np.diag(q[band])) * np.sqrt(gbar_scale)
    # misaligned decoders can push a reward weight negative; the norm term
    # must stay concave, so such devices simply earn no reward
    return c, np.clip(dvec, 0.0, None)


def dca_energy_beams(hbar: np.ndarray, c_coeffs: np.ndarray, d_coeffs: np.ndarray,
                     p_max: float, w_init: np.ndarray, eps_dca: float = 1e-4,
                     t_max: int = 50) -> tuple[np.ndarray, list[float]]:
    """Difference-of-convex descent on Tr(W^H Q W) - sum_l d_l ||hbar_l W||.

    Each step linearizes the concave norm sum at the incumbent and solves the
    resulting ball-constrained quadratic exactly. Returns the beams and the
    per-iteration objective trace (nonincreasing).
    """
    Q = (hbar.conj().T * c_coeffs[None, :]) @ hbar
    Q = 0.5 * (Q + Q.conj().T)
    W = np.asarray(w_init, dtype=complex)
    if np.sum(np.abs(W) ** 2) > p_max:
        W = W * np.sqrt(p_max / np.sum(np.abs(W) ** 2))

    def objective(Wc):
        hw = hbar @ Wc
        quad = float(np.real(np.sum((Wc.conj() * (Q @ Wc)))))
        norms = np.linalg.norm(hw, axis=1)
        return quad - float(np.dot(d_coeffs, norms))

    trace = [objective(W)]
    for _ in range(t_max):
        hw = hbar @ W
        norms = np.linalg.norm(hw, axis=1)
        live = norms > 1e-12
        k = np.where(live, 0.5 * d_coeffs / np.where(live, norms, 1.0), 0.0)
        V = (hbar.conj().T * k[None, :]) @ hw
        if np.linalg.norm(V) == 0.0 and np.linalg.norm(Q) == 0.0:
            W_next = np.zeros_like(W)
        else:
            W_next = ball_quadratic_min(Q, V, p_max)
        step = np.linalg.norm(W_next - W) ** 2 / max(np.linalg.norm(W) ** 2, 1e-300)
        W = W_next
        trace.append(objective(W))
        if step <= eps_dca:
            break
    return W, trace


# --------------------------------------------------------------------------
# IRS1 phases
# --------------------------------------------------------------------------

def _golden_max(fun, lo, hi, tol):
    """Golden-section maximization; returns (x, fun(x))."""
    invphi = (np.sqrt(5.0) - 1.0) / 2.0
    a, b = lo, hi
    x1 = b - invphi * (b - a)
    x2 = a + invphi * (b - a)
    f1, f2 = fun(x1), fun(x2)
    while b - a > tol:
        if f1 >= f2:
            b, x2, f2 = x2, x1, f1
            x1 = b - invphi * (b - a)
            f1 = fun(x1)
        else:
            a, x1, f1 = x1, x2, f2
            x2 = a + invphi * (b - a)
            f2 = fun(x2)
    return (x1, f1) if f1 >= f2 else (x2, f2)


def optimize_theta1(h_r: np.ndarray, H: np.ndarray, h_d: np.ndarray,
                    theta1: np.ndarray, W: np.ndarray, *, beta: float,
                    xi: float, gamma: np.ndarray, q2: dict, fnorm2: dict,
                    sigma2: dict, bandwidths: dict, lam_eta: np.ndarray,
                    grid: int = 16, refine_tol: float = 1e-3) -> np.ndarray:
    """Per-element coordinate ascent of the IRS1 phases.

    Element n enters every harvested power through a rank-one term, so each
    candidate phase is scored in O(L^2) after an O(L M1^2) setup per element.
    A uniform phase grid seeds a golden-section refinement; an element only
    moves when the scored objective improves.
    """
    theta1 = np.array(theta1, dtype=float)
    n1 = theta1.shape[0]
    wwh = W @ W.conj().T
    scale = xi * beta / (1.0 - beta)
    split = {"s": np.asarray(gamma, dtype=float), "m": 1.0 - np.asarray(gamma, dtype=float)}
    diag_q2 = {band: np.diag(q2[band]).copy() for band in ("s", "m")}
    noise = {band: sigma2[band] * fnorm2[band] for band in ("s", "m")}

    def score(p):
        total = 0.0
        for band in ("s", "m"):
            p_band = split[band] * p
            own = p_band * diag_q2[band]
            other = q2[band] @ p_band - own
            rate = bandwidths[band] * np.log1p(own / (other + noise[band])) / LN2
            total += float(np.dot(lam_eta, (1.0 - beta) * rate))
        return total

    phase = np.exp(1j * theta1)
    hbar = (h_r * phase[None, :]) @ H + h_d
    grid_phi = 2.0 * np.pi * np.arange(grid) / grid

    for n in range(n1):
        contrib = h_r[:, n:n + 1] * H[n, :][None, :]  # L x M1 rank-one slice
        base = hbar - phase[n] * contrib
        bw_ = base @ wwh
        cw = contrib @ wwh
        t0 = np.real(np.sum(bw_ * base.conj(), axis=1))
        uu = np.real(np.sum(cw * contrib.conj(), axis=1))
        z = np.sum(cw * base.conj(), axis=1)  # p(phi) = t0+uu+2Re(e^{j phi} z)

        def power_at(phi):
            return scale * np.maximum(
                t0 + uu + 2.0 * np.real(np.exp(1j * phi) * z), 0.0)

        incumbent = score(power_at(theta1[n]))
        best_phi, best_val = theta1[n], incumbent
        for phi in grid_phi:
            val = score(power_at(phi))
            if val > best_val:
                best_phi, best_val = phi, val
        half = np.pi / grid
        phi_ref, val_ref = _golden_max(
            lambda phi: score(power_at(phi)), best_phi - half, best_phi + half,
            refine_tol)
        if val_ref > best_val:
            best_phi, best_val = phi_ref, val_ref
        if best_val > incumbent:
            theta1[n] = np.mod(best_phi, 2.0 * np.pi)
            phase[n] = np.exp(1j * theta1[n])
            hbar = base + phase[n] * contrib
    return theta1
