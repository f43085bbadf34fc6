"""Alternating solver for the weighted upload-latency problem.

The sum-of-ratios objective sum_l w_l v_l / C_l is handled through per-device
multipliers (lam_l, eta_l); every block optimizer maximizes the surrogate
sum_l lam_l eta_l C_l and a Newton step re-centers the multipliers on the
current capacities. A block update is committed only when the true weighted
latency at the current volume split does not get worse, which makes the
recorded objective trace monotone between multiplier refreshes by
construction.
"""

from __future__ import annotations

from dataclasses import dataclass, field, replace

import numpy as np

from . import downlink as dlopt
from . import uplink as ulopt
from .exceptions import ContractError, InfeasibleInstanceError
from .linkmetrics import (DownlinkDecision, LatencyReport, UplinkDecision,
                          effective_channels, harvested_power, leakage,
                          mse_all, sinr_and_capacity, upload_latency_objective)
from .scenario import BANDS, ChannelSet, SystemConfig
from .sdp import AdmmState

LN2 = np.log(2.0)

BLOCKS = ("beta", "decoders", "energy_beams", "theta1", "gamma", "theta2")


# --------------------------------------------------------------------------
# multiplier algebra
# --------------------------------------------------------------------------

@dataclass(frozen=True)
class RatioMultipliers:
    lam: np.ndarray  # reciprocal-capacity multipliers, (L,)
    eta: np.ndarray  # ratio values w_l v_l / C_l, (L,)


def init_multipliers(c_s: np.ndarray, c_m: np.ndarray, weights: np.ndarray,
                     volumes: np.ndarray) -> RatioMultipliers:
    """Multipliers consistent with the given capacities: lam = 1/C,
    eta = w v / C."""
    total = np.asarray(c_s, dtype=float) + np.asarray(c_m, dtype=float)
    if np.any(total <= 0):
        raise InfeasibleInstanceError("zero total capacity: ratios undefined")
    return RatioMultipliers(lam=1.0 / total,
                            eta=np.asarray(weights) * np.asarray(volumes) / total)


def psi_residual(mult: RatioMultipliers, c_s: np.ndarray, c_m: np.ndarray,
                 weights: np.ndarray, volumes: np.ndarray) -> tuple[np.ndarray, float]:
    """Stationarity residual of the ratio transform and its scale-free norm.

    psi1_l = -w v + eta C, psi2_l = -1 + lam C. The reported norm divides
    psi1 by w v so doubling every weight leaves it unchanged.
    """
    total = np.asarray(c_s, dtype=float) + np.asarray(c_m, dtype=float)
    wv = np.asarray(weights, dtype=float) * np.asarray(volumes, dtype=float)
    psi1 = -wv + mult.eta * total
    psi2 = -1.0 + mult.lam * total
    psi = np.concatenate([psi1, psi2])
    scaled = np.concatenate([psi1 / np.where(wv > 0, wv, 1.0), psi2])
    return psi, float(np.max(np.abs(scaled)))


@dataclass(frozen=True)
class NewtonInfo:
    backtracks: int
    stagnated: bool
    residual_before: float
    residual_after: float


def newton_update_multipliers(mult: RatioMultipliers, c_s: np.ndarray,
                              c_m: np.ndarray, weights: np.ndarray,
                              volumes: np.ndarray, delta: float = 0.5,
                              epsilon: float = 0.1,
                              max_backtracks: int = 50) -> tuple[RatioMultipliers, NewtonInfo]:
    """Damped Newton step on the stationarity system.

    The Jacobian is diagonal (psi1 depends only on eta, psi2 only on lam), so
    the full step lands exactly on lam = 1/C, eta = w v / C and the first
    damping level is accepted unless capacities are degenerate.
    """
    total = np.asarray(c_s, dtype=float) + np.asarray(c_m, dtype=float)
    if np.any(total <= 0):
        raise InfeasibleInstanceError("zero total capacity: ratios undefined")
    wv = np.asarray(weights, dtype=float) * np.asarray(volumes, dtype=float)

    def norm_at(lam, eta):
        psi1 = -wv + eta * total
        psi2 = -1.0 + lam * total
        return float(np.linalg.norm(np.concatenate([psi1, psi2])))

    base = norm_at(mult.lam, mult.eta)
    step_lam = 1.0 / total - mult.lam
    step_eta = wv / total - mult.eta
    for i in range(max_backtracks + 1):
        scale = delta ** i
        lam_new = mult.lam + scale * step_lam
        eta_new = mult.eta + scale * step_eta
        if norm_at(lam_new, eta_new) <= (1.0 - epsilon * scale) * base:
            return (RatioMultipliers(lam=lam_new, eta=eta_new),
                    NewtonInfo(backtracks=i, stagnated=False,
                               residual_before=base,
                               residual_after=norm_at(lam_new, eta_new)))
    return (mult, NewtonInfo(backtracks=max_backtracks, stagnated=True,
                             residual_before=base, residual_after=base))


def mse_weights(mult: RatioMultipliers, bandwidths: dict,
                mse_vals: dict) -> dict:
    """Per-band MSE weights Gamma = lam * eta * B / e.

    Any common positive factor on Gamma cancels out of every downstream
    block (the ball subproblem and the normalized relaxation are scale
    invariant), so the weights are kept in this bare form.
    """
    le = mult.lam * mult.eta
    out = {}
    for band, e in mse_vals.items():
        e = np.asarray(e, dtype=float)
        if np.any(e <= 0):
            raise ContractError("MSE values must be positive")
        out[band] = le * bandwidths[band] / e
    return out


def optimal_volume_split(volumes: np.ndarray, c_s: np.ndarray,
                         c_m: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    """Volume split that equalizes the two bands' upload times.

    Returns (v_s, alpha). With both capacities positive the per-device
    latency becomes v / (C_s + C_m); a dead band receives nothing.
    """
    volumes = np.asarray(volumes, dtype=float)
    c_s = np.asarray(c_s, dtype=float)
    c_m = np.asarray(c_m, dtype=float)
    if np.any((c_s <= 0) & (c_m <= 0)):
        raise InfeasibleInstanceError("zero capacity in both bands")
    total = c_s + c_m
    alpha = np.where(c_s <= 0, 0.0, np.where(c_m <= 0, 1.0, c_s / total))
    return alpha * volumes, alpha


# --------------------------------------------------------------------------
# BCD driver
# --------------------------------------------------------------------------

@dataclass
class BcdOptions:
    seed: int = 0
    t_max: int | None = None
    eps1: float | None = None
    eps2: float | None = None
    inner_max: int = 8
    skip_blocks: frozenset = frozenset()
    fixed_w: np.ndarray | None = None
    fixed_theta1: np.ndarray | None = None
    fixed_theta2: np.ndarray | None = None
    warm: "BcdWarmStart | None" = None
    collect_trace: bool = True
    n_rand: int | None = None

    def __post_init__(self):
        unknown = set(self.skip_blocks) - set(BLOCKS)
        if unknown:
            raise ContractError(f"unknown blocks to skip: {sorted(unknown)}")


@dataclass
class BcdWarmStart:
    downlink: DownlinkDecision
    uplink: UplinkDecision
    alpha: np.ndarray
    admm: AdmmState | None = None


@dataclass(frozen=True)
class TraceRecord:
    outer: int
    inner: int
    block: str
    objective: float
    psi_norm: float


@dataclass
class BcdSolution:
    downlink: DownlinkDecision
    uplink: UplinkDecision
    alpha: np.ndarray
    multipliers: RatioMultipliers
    report: LatencyReport
    trace: list
    converged: bool
    outer_iterations: int
    newton_stagnations: int = 0
    sdp_diagnostics: dict | None = None

    def warm_start(self) -> BcdWarmStart:
        return BcdWarmStart(downlink=self.downlink, uplink=self.uplink,
                            alpha=self.alpha.copy(), admm=self._admm)

    _admm: AdmmState | None = field(default=None, repr=False)


class _Evaluation:
    """Everything derivable from (channels, decisions): composite links,
    powers, decoder products, capacities."""

    __slots__ = ("hbar", "gbar", "p", "bp", "q", "q2", "fnorm2", "caps",
                 "zeta")

    def __init__(self, cfg: SystemConfig, channels: ChannelSet,
                 dl: DownlinkDecision, ul: UplinkDecision):
        self.hbar, self.gbar = effective_channels(channels, dl.theta1, ul.theta2)
        self.p = harvested_power(self.hbar, dl.W, dl.beta, cfg.xi)
        self.bp = ul.band_powers(self.p)
        self.q, self.q2, self.fnorm2, self.caps = {}, {}, {}, {}
        for band in BANDS:
            q = ul.F[band].conj().T @ self.gbar[band]
            self.q[band] = q
            self.q2[band] = np.abs(q) ** 2
            self.fnorm2[band] = np.sum(np.abs(ul.F[band]) ** 2, axis=0)
            _, cap = sinr_and_capacity(self.gbar[band], ul.F[band],
                                       self.bp[band], cfg.sigma2(band),
                                       cfg.bandwidth(band), dl.beta)
            self.caps[band] = cap
        self.zeta = leakage(channels, ul.theta2)

    def report(self, cfg: SystemConfig, alpha: np.ndarray) -> LatencyReport:
        return upload_latency_objective(alpha, cfg.volumes, cfg.weights,
                                        self.caps["s"], self.caps["m"],
                                        leakage=self.zeta, harvested=self.p)


def _draw_initial(cfg: SystemConfig, rng: np.random.Generator):
    tiny = 1e-12
    beta = float(np.clip(rng.uniform(), tiny, 1.0 - tiny))
    alpha = rng.uniform(size=cfg.num_iotds)
    gamma = rng.uniform(size=cfg.num_iotds)
    theta1 = rng.uniform(0.0, 2.0 * np.pi, size=cfg.n1)
    theta2 = rng.uniform(0.0, 2.0 * np.pi, size=cfg.n2)
    wbar = (rng.uniform(-1.0, 1.0, size=(cfg.m1, cfg.m1))
            + 1j * rng.uniform(-1.0, 1.0, size=(cfg.m1, cfg.m1)))
    W = np.sqrt(cfg.p_max) * wbar / np.linalg.norm(wbar)
    F = {}
    for band in BANDS:
        F[band] = (rng.uniform(-1.0, 1.0, size=(cfg.m2, cfg.num_iotds))
                   + 1j * rng.uniform(-1.0, 1.0, size=(cfg.m2, cfg.num_iotds)))
    return beta, alpha, gamma, theta1, theta2, W, F


def bcd_solve(config: SystemConfig, channels: ChannelSet,
              options: BcdOptions | None = None) -> BcdSolution:
    """Run the full alternating optimization and return the best decisions.

    Inner iterations sweep the blocks (each guarded against objective
    regressions), then refresh the multipliers by a damped Newton step until
    the stationarity residual falls under eps1. Outer iterations re-split
    the upload volumes and stop when the objective's relative change falls
    under eps2 or after t_max rounds.
    """
    cfg = config
    opt = options or BcdOptions()
    eps1 = cfg.eps1 if opt.eps1 is None else opt.eps1
    eps2 = cfg.eps2 if opt.eps2 is None else opt.eps2
    t_max = cfg.t_max if opt.t_max is None else opt.t_max
    n_rand = cfg.n_rand if opt.n_rand is None else opt.n_rand
    sigma2 = {band: cfg.sigma2(band) for band in BANDS}
    bandwidths = {band: cfg.bandwidth(band) for band in BANDS}

    rng = np.random.default_rng(opt.seed)
    beta0, alpha, gamma0, theta1_0, theta2_0, w0, f0 = _draw_initial(cfg, rng)
    if opt.fixed_w is not None:
        w0 = np.asarray(opt.fixed_w, dtype=complex)
    if opt.fixed_theta1 is not None:
        theta1_0 = np.asarray(opt.fixed_theta1, dtype=float)
    if opt.fixed_theta2 is not None:
        theta2_0 = np.asarray(opt.fixed_theta2, dtype=float)
    elif "theta2" not in opt.skip_blocks:
        # start inside the covert region: a uniform draw almost surely
        # violates the caps, and the guarded sweep below never trades
        # objective for feasibility, so leakage must be paid down up front
        vecs, scales = ulopt.leakage_factors(channels)
        if vecs.size:
            theta2_0 = ulopt.polish_covertness(theta2_0, vecs,
                                               cfg.eps_leak * scales)
    dl = DownlinkDecision(beta=beta0, W=w0, theta1=theta1_0)
    ul = UplinkDecision(gamma=gamma0, F=f0, theta2=theta2_0)
    admm_state = None
    if opt.warm is not None:
        dl = replace(opt.warm.downlink)
        ul = replace(opt.warm.uplink)
        alpha = opt.warm.alpha.copy()
        admm_state = opt.warm.admm

    ev = _Evaluation(cfg, channels, dl, ul)
    mult = init_multipliers(ev.caps["s"], ev.caps["m"], cfg.weights, cfg.volumes)
    obj = ev.report(cfg, alpha).objective
    trace: list[TraceRecord] = []
    newton_stagnations = 0
    sdp_diag = None

    def record(outer, inner, block):
        if opt.collect_trace:
            _, pn = psi_residual(mult, ev.caps["s"], ev.caps["m"],
                                 cfg.weights, cfg.volumes)
            trace.append(TraceRecord(outer, inner, block, obj, pn))

    record(0, 0, "init")

    def try_commit(cand_dl, cand_ul, outer, inner, block):
        nonlocal dl, ul, ev, obj
        try:
            cand_ev = _Evaluation(cfg, channels, cand_dl, cand_ul)
            cand_obj = cand_ev.report(cfg, alpha).objective
        except InfeasibleInstanceError:
            record(outer, inner, block)
            return
        if cand_obj <= obj:
            dl, ul, ev, obj = cand_dl, cand_ul, cand_ev, cand_obj
        record(outer, inner, block)

    def gamma_weights():
        m_vals = {band: mse_all(ev.gbar[band], ul.F[band], ev.bp[band],
                                sigma2[band]) for band in BANDS}
        return mse_weights(mult, bandwidths, m_vals)

    converged = False
    outer = 0
    f_prev = obj
    for outer in range(1, t_max + 1):
        _, alpha = optimal_volume_split(cfg.volumes, ev.caps["s"], ev.caps["m"])
        obj = ev.report(cfg, alpha).objective
        record(outer, 0, "alpha")

        for inner in range(1, opt.inner_max + 1):
            lam_eta = mult.lam * mult.eta

            if "beta" not in opt.skip_blocks:
                coeffs = dlopt.beta_coefficients(ev.hbar, dl.W, ev.q,
                                                 ev.fnorm2, ul.gamma, cfg.xi,
                                                 sigma2)
                res = dlopt.optimize_beta(coeffs, lam_eta,
                                          (bandwidths["s"], bandwidths["m"]))
                try_commit(replace(dl, beta=res.beta), ul, outer, inner, "beta")

            if "decoders" not in opt.skip_blocks:
                f_new = {band: ulopt.mmse_decoder(ev.gbar[band], ev.bp[band],
                                                  sigma2[band])
                         for band in BANDS}
                try_commit(dl, replace(ul, F=f_new), outer, inner, "decoders")

            if "energy_beams" not in opt.skip_blocks:
                gam_w = gamma_weights()
                c_co, d_co = dlopt.dca_coefficients(ev.hbar, ev.q, ul.gamma,
                                                    dl.beta, cfg.xi, gam_w)
                w_new, _ = dlopt.dca_energy_beams(ev.hbar, c_co, d_co,
                                                  cfg.p_max, dl.W,
                                                  cfg.eps_dca, cfg.t_dca_max)
                try_commit(replace(dl, W=w_new), ul, outer, inner,
                           "energy_beams")

            if "theta1" not in opt.skip_blocks:
                th1 = dlopt.optimize_theta1(
                    channels.h_r, channels.H, channels.h_d, dl.theta1, dl.W,
                    beta=dl.beta, xi=cfg.xi, gamma=ul.gamma, q2=ev.q2,
                    fnorm2=ev.fnorm2, sigma2=sigma2, bandwidths=bandwidths,
                    lam_eta=lam_eta, grid=cfg.theta1_grid,
                    refine_tol=cfg.theta1_refine_tol)
                try_commit(replace(dl, theta1=th1), ul, outer, inner, "theta1")

            if "gamma" not in opt.skip_blocks:
                gam = ul.gamma.copy()
                for l in range(cfg.num_iotds):
                    g_res = ulopt.optimize_gamma(l, ev.p, gam, ev.q2,
                                                 ev.fnorm2, sigma2, bandwidths)
                    gam[l] = g_res.gamma
                try_commit(dl, replace(ul, gamma=gam), outer, inner, "gamma")

            if "theta2" not in opt.skip_blocks:
                gam_w = gamma_weights()
                problem = ulopt.build_sdr_problem(channels, ul.F, ev.bp, gam_w)
                sol = ulopt.solve_sdp(problem, eps_sdp=cfg.eps_sdp,
                                      eps_leak=cfg.eps_leak,
                                      max_iter=cfg.sdp_max_iter,
                                      warm=admm_state)
                admm_state = sol.state
                sdp_diag = {"iterations": sol.iterations,
                            "converged": sol.converged,
                            "duality_gap": sol.duality_gap,
                            **sol.kkt_residuals}
                leak_cap = cfg.eps_leak * sum(problem.scales)

                def theta2_refit(th):
                    # decoders are a closed-form best response, so every
                    # candidate is judged with its own MMSE filters; stale
                    # filters rank covert phase patterns upside down
                    th = np.asarray(th, dtype=float)
                    _, gbar = effective_channels(channels, dl.theta1, th)
                    f_new = {band: ulopt.mmse_decoder(gbar[band],
                                                      ev.bp[band],
                                                      sigma2[band])
                             for band in BANDS}
                    return replace(ul, theta2=th, F=f_new)

                def theta2_objective(th):
                    try:
                        cand = _Evaluation(cfg, channels, dl, theta2_refit(th))
                        return cand.report(cfg, alpha).objective
                    except InfeasibleInstanceError:
                        return np.inf

                def theta2_leakage(th):
                    return leakage(channels, np.asarray(th, dtype=float))

                caps = cfg.eps_leak * np.asarray(problem.scales)
                rr = ulopt.recover_phases(sol, n_rand, rng, theta2_objective,
                                          theta2_leakage, leak_cap, ul.theta2,
                                          leak_vecs=problem.leak_vecs,
                                          leak_caps=caps,
                                          cost_quad=problem.lam)
                try_commit(dl, theta2_refit(rr.theta2), outer, inner,
                           "theta2")

            _, psi_norm = psi_residual(mult, ev.caps["s"], ev.caps["m"],
                                       cfg.weights, cfg.volumes)
            record(outer, inner, "multipliers")
            if psi_norm <= eps1:
                break
            mult, ninfo = newton_update_multipliers(mult, ev.caps["s"],
                                                    ev.caps["m"], cfg.weights,
                                                    cfg.volumes,
                                                    delta=cfg.delta,
                                                    epsilon=cfg.epsilon_newton)
            if ninfo.stagnated:
                newton_stagnations += 1
                break

        rel_change = abs(obj - f_prev) / max(abs(obj), 1e-300)
        f_prev = obj
        if rel_change <= eps2:
            converged = True
            break

    if t_max >= 1:
        _, alpha = optimal_volume_split(cfg.volumes, ev.caps["s"], ev.caps["m"])
        obj = ev.report(cfg, alpha).objective
        record(outer, 0, "final")
    report = ev.report(cfg, alpha)
    return BcdSolution(downlink=dl, uplink=ul, alpha=alpha, multipliers=mult,
                       report=report, trace=trace, converged=converged,
                       outer_iterations=outer, newton_stagnations=newton_stagnations,
                       sdp_diagnostics=sdp_diag, _admm=admm_state)
