"""Information-phase optimizers: band power split, MMSE receive decoders,
and the IRS2 phase design through a semidefinite relaxation plus rounding.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .exceptions import ContractError
from .scenario import BANDS, ChannelSet
from .sdp import AdmmState, SdpSolution, solve_constrained_sdp

LN2 = np.log(2.0)


# --------------------------------------------------------------------------
# band power split gamma
# --------------------------------------------------------------------------

@dataclass(frozen=True)
class GammaResult:
    gamma: float
    status: str  # "interior" | "boundary" | "no_power"


def optimize_gamma(l: int, p: np.ndarray, gamma: np.ndarray, q2: dict,
                   fnorm2: dict, sigma2: dict, bandwidths: dict,
                   width_tol: float = 1e-12) -> GammaResult:
    """Split device l's power between bands to maximize its own sum rate.

    Other devices' splits are held fixed, so the interference floors are
    constants and the summed rate is concave in gamma_l; the derivative is
    strictly decreasing and bisection is exact.
    """
    p_l = float(p[l])
    if p_l <= 0:
        return GammaResult(gamma=float(gamma[l]), status="no_power")

    own = {}
    floor = {}
    for band in BANDS:
        split = np.asarray(gamma, dtype=float) if band == "s" else 1.0 - np.asarray(gamma, dtype=float)
        p_band = split * np.asarray(p, dtype=float)
        q2b = q2[band]
        own[band] = p_l * q2b[l, l]
        interference = float(q2b[l] @ p_band) - p_band[l] * q2b[l, l]
        floor[band] = interference + sigma2[band] * fnorm2[band][l]

    def derivative(g):
        d_s = bandwidths["s"] * own["s"] / (floor["s"] + g * own["s"])
        d_m = bandwidths["m"] * own["m"] / (floor["m"] + (1.0 - g) * own["m"])
        return (d_s - d_m) / LN2

    if derivative(0.0) <= 0:
        return GammaResult(gamma=0.0, status="boundary")
    if derivative(1.0) >= 0:
        return GammaResult(gamma=1.0, status="boundary")
    lo, hi = 0.0, 1.0
    while hi - lo > width_tol:
        mid = 0.5 * (lo + hi)
        if derivative(mid) > 0:
            lo = mid
        else:
            hi = mid
    return GammaResult(gamma=0.5 * (lo + hi), status="interior")


# --------------------------------------------------------------------------
# MMSE decoders
# --------------------------------------------------------------------------

def mmse_decoder(gbar_band: np.ndarray, powers: np.ndarray,
                 sigma2: float) -> np.ndarray:
    """Columnwise MMSE receive filters f_l = (sum_i p_i g_i g_i^H
    + sigma2 I)^{-1} sqrt(p_l) g_l."""
    if sigma2 <= 0:
        raise ContractError("sigma2 must be positive")
    m2 = gbar_band.shape[0]
    powers = np.asarray(powers, dtype=float)
    cov = (gbar_band * powers[None, :]) @ gbar_band.conj().T + sigma2 * np.eye(m2)
    return np.linalg.solve(cov, gbar_band * np.sqrt(powers)[None, :])


# --------------------------------------------------------------------------
# IRS2 phase design: SDR assembly, solve, rounding
# --------------------------------------------------------------------------

@dataclass
class SdrProblem:
    """Homogenized quadratic cost and covertness constraints in the lifted
    phase vector [phi; t] of length N2 + 1."""

    lam: np.ndarray  # (N2+1) x (N2+1) Hermitian cost
    deltas: list  # zero-padded leakage quadratics, same shape
    scales: list  # trace of each leakage quadratic, for relative caps
    keys: list  # (band, device, user) per constraint
    n2: int
    leak_vecs: np.ndarray | None = None  # (J, N2) rank-one factors of deltas


def leakage_factors(channels: ChannelSet) -> tuple[np.ndarray, np.ndarray]:
    """Rank-one leakage factors w_j = conj(d_k * g_l) per (band, device,
    eavesdropper) path and their strengths ||w_j||^2, in build_sdr_problem's
    constraint order. Depends on the channel draws alone."""
    vecs, scales = [], []
    for band in BANDS:
        g_r = channels.g_r[band]
        d_eaves = channels.d_eaves[band]
        for l in range(g_r.shape[0]):
            for k in range(d_eaves.shape[0]):
                w = (d_eaves[k] * g_r[l]).conj()
                vecs.append(w)
                scales.append(float(np.real(np.vdot(w, w))))
    return np.asarray(vecs), np.asarray(scales)


def build_sdr_problem(channels: ChannelSet, decoders: dict, band_powers: dict,
                      mse_w: dict) -> SdrProblem:
    """Assemble the lifted cost Lambda and per-path leakage quadratics.

    The cost collects every theta2-dependent term of the weighted-MSE
    objective; for unit-modulus phi the identity
    phi_bar^H Lambda phi_bar = sum over weighted MSE terms holds up to a
    phase-independent constant.
    """
    n2 = channels.g_r["s"].shape[1]
    xi_mat = np.zeros((n2, n2), dtype=complex)
    cross = np.zeros((n2, n2), dtype=complex)
    for band in BANDS:
        G = channels.G[band]
        g_r = channels.g_r[band]
        g_d = channels.g_d[band]
        F = decoders[band]
        w = np.asarray(mse_w[band], dtype=float)
        p = np.asarray(band_powers[band], dtype=float)

        a_mat = G.conj().T @ ((F * w[None, :]) @ F.conj().T) @ G
        b_mat = g_r.T @ (p[:, None] * g_r.conj())
        xi_mat += a_mat * b_mat.T

        m_rows = F.conj().T @ G  # row l carries f_l^H G
        s_li = F.conj().T @ g_d.T  # f_l^H g_d_i
        coef = w[:, None] * s_li.conj()
        w_rows = coef.T @ m_rows  # per source i
        c_mat = g_r.T @ ((p[:, None]) * w_rows)
        d_mat = g_r.T @ ((w * np.sqrt(p))[:, None] * m_rows)
        cross += c_mat - d_mat

    e_row = np.diag(cross)
    lam = np.zeros((n2 + 1, n2 + 1), dtype=complex)
    lam[:n2, :n2] = xi_mat
    lam[:n2, n2] = e_row.conj()
    lam[n2, :n2] = e_row
    lam = 0.5 * (lam + lam.conj().T)

    deltas, scales, keys = [], [], []
    for band in BANDS:
        g_r = channels.g_r[band]
        d_eaves = channels.d_eaves[band]
        for l in range(g_r.shape[0]):
            gl = g_r[l]
            for k in range(d_eaves.shape[0]):
                dk = d_eaves[k]
                # quad = w w^H for w = conj(d_k * g_l), so the per-path
                # leakage is |w^H phi|^2
                quad = np.outer(dk.conj(), dk) * np.outer(gl, gl.conj()).T
                padded = np.zeros((n2 + 1, n2 + 1), dtype=complex)
                padded[:n2, :n2] = 0.5 * (quad + quad.conj().T)
                deltas.append(padded)
                scales.append(float(np.real(np.trace(quad))))
                keys.append((band, l, k))
    vecs, _ = leakage_factors(channels)
    return SdrProblem(lam=lam, deltas=deltas, scales=scales, keys=keys, n2=n2,
                      leak_vecs=vecs)


def solve_sdp(problem: SdrProblem, eps_sdp: float = 1e-4,
              eps_leak: float = 1e-2, max_iter: int = 4000,
              warm: AdmmState | None = None) -> SdpSolution:
    """Solve the lifted relaxation with leakage caps relative to each
    path's strength (cap_j = eps_leak * trace(Delta_j))."""
    caps = [eps_leak * s for s in problem.scales]
    return solve_constrained_sdp(problem.lam, problem.deltas, caps,
                                 eps=eps_sdp, max_iter=max_iter, warm=warm)


def polish_covertness(thetas: np.ndarray, leak_vecs: np.ndarray,
                      caps: np.ndarray, max_sweeps: int = 40,
                      slack: float = 0.5) -> np.ndarray:
    """Drive every per-path leakage |w_j^H phi|^2 under its cap by rotating
    one element at a time, jointly over a batch of candidates.

    Rounding a covariance to unit modulus strands each path's leakage near
    a fifth of its incoherent level no matter how covert the relaxation
    was, so the cancellation has to be re-established on the phase manifold
    itself. For one element the weighted leakage sum is A + Re(B e^{j
    theta}), minimized in closed form; sweeps stop once all candidates sit
    below slack * cap on every path.

    thetas: (n2, C) angle columns. leak_vecs: (J, n2). caps: (J,).
    Monotone per candidate; returns adjusted angles, never worse in the
    cap-weighted leakage sum.
    """
    thetas = np.asarray(thetas, dtype=float)
    single = thetas.ndim == 1
    if single:
        thetas = thetas[:, None]
    if thetas.shape[0] != leak_vecs.shape[1]:
        raise ContractError("thetas and leak_vecs disagree on element count")
    caps = np.asarray(caps, dtype=float)
    live = caps > 0
    if not np.any(live):
        return thetas[:, 0] if single else thetas
    wc = leak_vecs[live].conj()
    wgt = 1.0 / caps[live]
    phi = np.exp(1j * thetas)  # (n2, C)
    resid = wc @ phi  # (J, C) path responses
    target = caps[live, None] * slack
    for _ in range(max_sweeps):
        if np.all(np.abs(resid) ** 2 <= target):
            break
        for i in range(thetas.shape[0]):
            a = wc[:, i]  # (J,)
            c = resid - a[:, None] * phi[i]
            b = (wgt * a) @ c.conj()  # (C,)
            mag = np.abs(b)
            rot = np.where(mag > 0, -np.conj(b) / np.where(mag > 0, mag, 1.0),
                           phi[i])
            phi[i] = rot
            resid = c + a[:, None] * rot[None, :]
    out = np.mod(np.angle(phi), 2.0 * np.pi)
    return out[:, 0] if single else out


def refine_quadratic(thetas: np.ndarray, cost_quad: np.ndarray,
                     max_sweeps: int = 10, rel_tol: float = 1e-8) -> np.ndarray:
    """Element-wise closed-form descent of the homogenized quadratic
    [phi; 1]^H Lambda [phi; 1] over unit-modulus phases, jointly over a
    batch of candidate columns.

    Entry-normalizing a Gaussian draw strands its quadratic value an
    additive (1 - pi/4) * tr(Lambda)-order gap above the relaxation value,
    which at realistic element counts buries the relaxation's guidance in
    rounding noise. One coordinate at a time the cost is
    const + 2 Re(phi_i^* c_i), minimized in closed form at -c_i / |c_i|,
    so every sweep is monotone per candidate.

    thetas: (n2, C) angle columns. cost_quad: (n2+1, n2+1) Hermitian.
    """
    thetas = np.asarray(thetas, dtype=float)
    single = thetas.ndim == 1
    if single:
        thetas = thetas[:, None]
    n2 = thetas.shape[0]
    if cost_quad.shape != (n2 + 1, n2 + 1):
        raise ContractError("cost matrix does not match the element count")
    lifted = np.vstack([np.exp(1j * thetas),
                        np.ones((1, thetas.shape[1]), dtype=complex)])
    s = cost_quad @ lifted  # (n2+1, C), kept consistent across updates
    val = np.real(np.sum(lifted.conj() * s, axis=0))
    for _ in range(max_sweeps):
        prev = val
        for i in range(n2):
            c = s[i] - cost_quad[i, i] * lifted[i]
            mag = np.abs(c)
            rot = np.where(mag > 0, -c / np.where(mag > 0, mag, 1.0),
                           lifted[i])
            s += cost_quad[:, i][:, None] * (rot - lifted[i])[None, :]
            lifted[i] = rot
        val = np.real(np.sum(lifted.conj() * s, axis=0))
        if np.all(prev - val <= rel_tol * np.maximum(1.0, np.abs(prev))):
            break
    out = np.mod(np.angle(lifted[:n2]), 2.0 * np.pi)
    return out[:, 0] if single else out


@dataclass
class RoundingResult:
    theta2: np.ndarray
    objective: float
    leakage: float
    improved: bool
    covert_ok: bool


def recover_phases(solution: SdpSolution, n_rand: int, rng: np.random.Generator,
                   objective_fn, leakage_fn, leak_cap: float,
                   incumbent: np.ndarray, leak_vecs: np.ndarray | None = None,
                   leak_caps: np.ndarray | None = None,
                   cost_quad: np.ndarray | None = None) -> RoundingResult:
    """Randomized rounding of the SDR solution to unit-modulus phases.

    Candidates are the principal eigenvector, Gaussian samples shaped by
    the solution covariance (each normalized against its homogenization
    entry), and the incumbent itself. With cost_quad supplied every
    candidate first descends the relaxation's quadratic on the phase
    manifold (refine_quadratic); with the per-path factors and caps
    supplied it is then polished back under the caps (polish_covertness).
    The winner must beat the incumbent on the true objective (evaluated by
    objective_fn) or the incumbent is kept; among candidates within the
    leakage cap the best objective wins, otherwise the least leaky
    not-worse candidate is taken.
    """
    omega = solution.omega
    n = omega.shape[0]
    vals, vecs = np.linalg.eigh(omega)
    vals = np.clip(vals, 0.0, None)
    shaper = vecs * np.sqrt(vals)[None, :]

    lifted = [vecs[:, -1] * np.sqrt(vals[-1])]
    if n_rand > 0:
        draws = (rng.standard_normal((n, n_rand))
                 + 1j * rng.standard_normal((n, n_rand))) / np.sqrt(2.0)
        samples = shaper @ draws
        lifted.extend(samples[:, i] for i in range(n_rand))

    inc_obj = float(objective_fn(incumbent))
    inc_leak = float(leakage_fn(incumbent))
    thetas = np.empty((n - 1, len(lifted) + 1))
    for col, vec in enumerate(lifted):
        ref = vec[-1]
        ratios = vec[:-1] if np.abs(ref) < 1e-12 else vec[:-1] / ref
        thetas[:, col] = np.angle(ratios)
    thetas[:, -1] = np.asarray(incumbent, dtype=float)
    if cost_quad is not None:
        thetas = refine_quadratic(thetas, cost_quad)
    if leak_vecs is not None and leak_caps is not None and leak_vecs.size:
        thetas = polish_covertness(thetas, leak_vecs, leak_caps)
    candidates = []
    for col in range(thetas.shape[1]):
        theta = np.mod(thetas[:, col], 2.0 * np.pi)
        candidates.append((float(objective_fn(theta)), float(leakage_fn(theta)), theta))

    covert = [c for c in candidates if c[1] <= leak_cap]
    if covert:
        best = min(covert, key=lambda c: c[0])
        if best[0] < inc_obj:
            return RoundingResult(theta2=best[2], objective=best[0],
                                  leakage=best[1], improved=True,
                                  covert_ok=True)
    # an incumbent already under the cap must never be traded for a leaky
    # candidate, however good the objective looks
    if inc_leak > leak_cap:
        strictly_better = [c for c in candidates if c[0] < inc_obj]
        if strictly_better:
            best = min(strictly_better, key=lambda c: (c[1], c[0]))
            return RoundingResult(theta2=best[2], objective=best[0],
                                  leakage=best[1], improved=True,
                                  covert_ok=best[1] <= leak_cap)
    return RoundingResult(theta2=np.mod(np.asarray(incumbent, dtype=float), 2 * np.pi),
                          objective=inc_obj, leakage=inc_leak, improved=False,
                          covert_ok=inc_leak <= leak_cap)
