"""Consensus-ADMM solver for the phase-design semidefinite relaxation.

Problem form: minimize Re<Lam, Omega> over Hermitian Omega subject to
diag(Omega) = 1, Omega PSD, and Re<Delta_j, Omega> <= cap_j for PSD
constraint matrices Delta_j.

One proximal block per constraint set shares a consensus variable; the cost
enters the consensus average in closed form. The cost matrix is normalized
by its Frobenius norm internally, which leaves the minimizer unchanged and
makes iteration counts independent of the objective's scale.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .exceptions import SdpInfeasibleError


@dataclass
class AdmmState:
    """Carryover between solves on a slowly changing problem."""

    omega: np.ndarray
    duals: np.ndarray  # (m, n, n) stacked block multipliers
    rho: float


@dataclass
class SdpSolution:
    omega: np.ndarray
    objective: float
    kkt_residuals: dict
    iterations: int
    converged: bool
    duality_gap: float
    state: AdmmState = field(repr=False, default=None)


def _project_psd(mat: np.ndarray) -> np.ndarray:
    vals, vecs = np.linalg.eigh(mat)
    pos = vals > 0
    if np.all(pos):
        return mat
    v = vecs[:, pos] * vals[pos][None, :]
    return v @ vecs[:, pos].conj().T


def infeasibility_bound(delta: np.ndarray) -> float:
    """Lower bound of Re<Delta, Omega> over unit-diagonal Hermitian Omega.

    Entrywise |Omega_nm| <= 1 for any PSD unit-diagonal matrix, so the
    off-diagonal mass can cancel at most its absolute sum.
    """
    diag = np.real(np.diag(delta))
    off = np.abs(delta).sum() - np.abs(np.diag(delta)).sum()
    return float(diag.sum() - off)


def solve_constrained_sdp(lam: np.ndarray, deltas: list, caps: list,
                          eps: float = 1e-4, max_iter: int = 4000,
                          warm: AdmmState | None = None) -> SdpSolution:
    """Solve the phase SDR; raises SdpInfeasibleError when a leakage cap is
    provably unreachable before any iteration is spent."""
    n = lam.shape[0]
    lam = 0.5 * (lam + lam.conj().T)
    lam_norm = float(np.linalg.norm(lam))
    lam_hat = lam / lam_norm if lam_norm > 0 else lam

    binding = [j for j, (d, c) in enumerate(zip(deltas, caps))
               if infeasibility_bound(d) > c]
    if binding:
        err = SdpInfeasibleError(
            f"{len(binding)} leakage caps are below the provable minimum")
        err.binding_count = len(binding)
        raise err

    # rescale every halfspace to a unit normal: the raw quadratics live on
    # the channel-power scale, many orders below the unit-diagonal Omega,
    # and unnormalized projections make the consensus iteration crawl
    orig_deltas, orig_caps = deltas, caps
    kept, kept_caps = [], []
    for d, c in zip(orig_deltas, orig_caps):
        d = 0.5 * (d + d.conj().T)
        norm = float(np.linalg.norm(d))
        if norm <= 0:
            continue  # a null quadratic constrains nothing
        kept.append(d / norm)
        kept_caps.append(c / norm)
    n_half = len(kept)
    half_mats = (np.stack(kept) if n_half
                 else np.zeros((0, n, n), dtype=complex))
    half_caps = np.asarray(kept_caps, dtype=float)
    m = 2 + n_half

    if (warm is not None and warm.omega.shape == (n, n)
            and warm.duals.shape == (m, n, n)):
        omega = warm.omega.copy()
        duals = warm.duals.copy()
        rho = warm.rho
    else:
        omega = np.eye(n, dtype=complex)
        duals = np.zeros((m, n, n), dtype=complex)
        rho = 0.1

    blocks = np.empty((m, n, n), dtype=complex)
    converged = False
    it = 0
    check_every = 10
    stall_primal = np.inf
    for it in range(1, max_iter + 1):
        # block updates against the consensus point
        np.subtract(omega[None], duals, out=blocks)
        np.fill_diagonal(blocks[0], 1.0)
        blocks[1] = _project_psd(blocks[1])
        if n_half:
            vals = np.einsum("jab,jab->j", half_mats.conj(), blocks[2:]).real
            hot = np.nonzero(vals > half_caps)[0]
            for j in hot:
                blocks[2 + j] -= (vals[j] - half_caps[j]) * half_mats[j]

        omega_prev = omega
        omega = (blocks.sum(axis=0) + duals.sum(axis=0)) / m \
            - lam_hat / (m * rho)
        omega = 0.5 * (omega + omega.conj().T)
        duals += blocks
        duals -= omega[None]

        if it % check_every == 0 or it == max_iter:
            scale = max(1.0, float(np.linalg.norm(omega)))
            gaps = (blocks - omega[None]).reshape(m, -1)
            primal = float(np.linalg.norm(gaps, axis=1).max())
            dual = rho * float(np.linalg.norm(omega - omega_prev)) \
                * np.sqrt(m)
            if primal <= eps * scale and dual <= eps * scale:
                converged = True
                break
            # a primal plateau with a collapsing dual residual means the
            # constraint sets (nearly) fail to intersect; more iterations
            # cannot help, so hand the caller the best-effort point
            if it % 500 == 0:
                if primal > 0.995 * stall_primal and dual <= 0.01 * primal:
                    break
                stall_primal = primal
            # residual balancing keeps both residuals comparable
            if primal > 5.0 * dual and rho < 1e4:
                rho *= 2.0
                duals /= 2.0
            elif dual > 5.0 * primal and rho > 1e-4:
                rho /= 2.0
                duals *= 2.0

    out = _project_psd(omega)
    out = 0.5 * (out + out.conj().T)
    evals = np.linalg.eigvalsh(omega)
    diag_violation = float(np.max(np.abs(np.real(np.diag(out)) - 1.0)))
    eq_violation = 0.0
    for delta, cap in zip(orig_deltas, orig_caps):
        s = max(float(np.real(np.trace(delta))), 1e-300)
        excess = float(np.real(np.vdot(delta, out))) - cap
        eq_violation = max(eq_violation, excess / s)
    kkt = {
        "psd_violation": float(max(0.0, -evals[0])),
        "diag_violation": diag_violation,
        "eq_violation": max(0.0, eq_violation),
    }
    objective = float(np.real(np.vdot(lam, out)))
    gap = _duality_gap(lam_hat, half_mats, half_caps, duals, rho, out) \
        * lam_norm
    return SdpSolution(omega=out, objective=objective, kkt_residuals=kkt,
                       iterations=it, converged=converged, duality_gap=gap,
                       state=AdmmState(omega=omega, duals=duals, rho=rho))


def _duality_gap(lam_hat, half_mats, half_caps, duals, rho, omega):
    """Certified primal-dual gap from the ADMM multipliers.

    The dual matrix is rebuilt from the block multipliers; any residual
    indefiniteness is charged to the bound through its smallest eigenvalue.
    """
    n = lam_hat.shape[0]
    n_half = half_mats.shape[0]
    if n_half:
        y = np.maximum(0.0, rho * np.einsum(
            "jab,jab->j", duals[2:].conj(), half_mats).real)
        shift = np.tensordot(y, half_mats, axes=1)
    else:
        y = np.zeros(0)
        shift = np.zeros_like(lam_hat)
    s_psd = rho * duals[1]
    nu = np.real(np.diag(s_psd - lam_hat - shift))
    s_built = lam_hat + np.diag(nu.astype(complex)) + shift
    lam_min = float(np.linalg.eigvalsh(0.5 * (s_built + s_built.conj().T))[0])
    dual_value = -float(nu.sum()) - float(y @ half_caps)
    dual_value += n * min(0.0, lam_min)
    primal_value = float(np.real(np.vdot(lam_hat, omega)))
    return abs(primal_value - dual_value)
