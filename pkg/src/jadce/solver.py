"""Multi-rank aware sparse (MRAS) recovery for joint activity detection and
channel estimation.

Every device state is factored as ``X_n = J_n R_n^H`` with ``L_max`` columns
and the smoothed problem

    f(S) = 1/2 ||sum_n Bbar J_n R_n^H A_n - Y||_F^2
           + nu sum_n sum_ij ( |x_ij| - log(1 + rho |x_ij|) / rho )

is minimised by Riemannian conjugate gradients on the quotient of the
full-rank factors by unitary rotations, starting from a truncated spectral
initialisation. Activity is read off the relative block energies.
"""

from __future__ import annotations

import logging
import math
import warnings
from dataclasses import dataclass, field, replace
from typing import Callable, Optional

import numpy as np

from . import kernels
from .manifold import FactorPoint, RankDeficiencyError, metric, project_horizontal, retract, transport
from .sensing import SensingEnsemble, adjoint, forward

log = logging.getLogger(__name__)

PROGRESS_HEADER = "iter,objective,grad_norm,step"


class SolverError(RuntimeError):
    pass


@dataclass
class SolverConfig:
    """Tuning knobs of the MRAS solver.

    ``nu`` and ``rho`` default to 0.3 and 1/0.039. ``mu`` is the fixed step
    (``line_search="fixed"``) or the first trial step of the Armijo search
    (``"backtracking"``), which afterwards starts from twice the last accepted
    step. ``grad_tol`` is relative to the initial gradient norm.
    """

    nu: float = 0.3
    rho: float = 1.0 / 0.039
    L_max: int = 2
    mu: float = 1e-2
    max_iters: int = 500
    grad_tol: float = 1e-6
    omega: float = 3.0
    line_search: str = "backtracking"
    v1: float = 0.1
    armijo_c: float = 1e-4
    max_backtracks: int = 30
    restart_cos: float = 1e-3
    fit_init_scale: bool = True
    exact_data_step: bool = True
    refine_iters: int = 0
    refine_nu: Optional[float] = None

    def __post_init__(self):
        if self.nu < 0 or self.rho <= 0 or self.mu <= 0:
            raise ValueError("need nu >= 0, rho > 0, mu > 0")
        if self.max_iters < 0 or self.L_max < 1:
            raise ValueError("need max_iters >= 0 and L_max >= 1")
        if not 0 < self.v1 < 1:
            raise ValueError("v1 must lie in (0, 1)")
        if self.line_search not in ("fixed", "backtracking"):
            raise ValueError(f"unknown line search {self.line_search!r}")


@dataclass
class SolveResult:
    factors: FactorPoint
    blocks: np.ndarray
    channels: np.ndarray
    detected: set
    objective_trace: list = field(default_factory=list)
    grad_trace: list = field(default_factory=list)
    step_trace: list = field(default_factory=list)
    iterations: int = 0
    converged: bool = False


def smoothed_abs(x, rho: float):
    """``|x| - log(1 + rho|x|) / rho``; smooth at 0, tends to ``|x|`` as ``rho`` grows."""
    out = kernels.smoothed_abs(np.asarray(x, dtype=complex), float(rho))
    return float(out) if np.ndim(x) == 0 else out


def _factors(S):
    return S.factors if isinstance(S, FactorPoint) else np.asarray(S)


def _value(S: FactorPoint, ens: SensingEnsemble, Y, cfg):
    """Objective plus the residual and penalty weights needed for the gradient."""
    X = S.J @ np.swapaxes(S.R, -1, -2).conj()
    resid = forward(ens, X) - Y
    value = 0.5 * float(np.vdot(resid, resid).real)
    W = None
    if cfg.nu > 0:
        pen, W = kernels.penalty(X, cfg.rho)
        value += cfg.nu * pen
    return value, resid, W


def _gradient(S: FactorPoint, ens: SensingEnsemble, cfg, resid, W):
    G = adjoint(ens, resid)
    if W is not None:
        G = G + cfg.nu * W
    return np.concatenate([G @ S.R, np.swapaxes(G, -1, -2).conj() @ S.J], axis=1)


def _evaluate(S: FactorPoint, ens: SensingEnsemble, Y, cfg, grad=True):
    """Objective and (optionally) the Euclidean gradient ``[G R; G^H J]``.

    ``G = adjoint(residual) + nu * rho X / (1 + rho |X|)`` is the gradient of
    ``f`` w.r.t. the blocks under the real inner product ``Re Tr(A^H B)``.
    """
    value, resid, W = _value(S, ens, Y, cfg)
    return value, (_gradient(S, ens, cfg, resid, W) if grad else None)


def objective(S, ens: SensingEnsemble, Y, cfg: SolverConfig) -> float:
    return _evaluate(S, ens, Y, cfg, grad=False)[0]


def euclidean_gradient(S, ens: SensingEnsemble, Y, cfg: SolverConfig) -> np.ndarray:
    """Gradient w.r.t. the stacked factors under ``Re Tr(xi^H eta)``.

    Pairs with :func:`jadce.manifold.metric` to give directional derivatives.
    """
    return _evaluate(S, ens, Y, cfg)[1]


def riemannian_gradient(S, ens: SensingEnsemble, Y, cfg: SolverConfig) -> np.ndarray:
    """Horizontal projection of half the Euclidean gradient."""
    return project_horizontal(_factors(S), 0.5 * euclidean_gradient(S, ens, Y, cfg))


def truncate_measurements(Y, omega: float) -> np.ndarray:
    """Zero the entries whose magnitude exceeds ``omega`` times the mean magnitude."""
    mag = np.abs(Y)
    # relative slack so equal magnitudes survive omega = 1 despite rounding
    return np.where(mag <= omega * mag.mean() * (1 + 1e-12), Y, 0)


def truncated_init(ens: SensingEnsemble, Y, cfg: SolverConfig, rng=None) -> FactorPoint:
    """Truncated spectral initialisation.

    Each device gets the rank-``L_max`` SVD ``U S V^H`` of
    ``Bbar^H Y_tru A_n^H`` split as ``J = U sqrt(S)``, ``R = V sqrt(S)``.
    With ``fit_init_scale`` the whole initial estimate is then rescaled by the
    complex least-squares factor that best matches ``Y``.
    """
    L = cfg.L_max
    if L > min(ens.M, ens.D):
        raise SolverError(f"L_max = {L} exceeds min(M, D)")
    Y_tru = truncate_measurements(Y, cfg.omega)
    if not np.any(Y_tru):
        warnings.warn("truncated measurements are all zero; using a random initialisation",
                      RuntimeWarning, stacklevel=2)
        rng = np.random.default_rng(0) if rng is None else rng
        shape = (ens.N, ens.M + ens.D, L)
        return FactorPoint(1e-3 * (rng.standard_normal(shape) + 1j * rng.standard_normal(shape)), ens.M)
    U, s, Vh = np.linalg.svd(adjoint(ens, Y_tru), full_matrices=False)
    root = np.sqrt(np.maximum(s[:, :L], 1e-8))
    J = U[:, :, :L] * root[:, None, :]
    R = np.swapaxes(Vh[:, :L, :], -1, -2).conj() * root[:, None, :]
    if cfg.fit_init_scale:
        AX = forward(ens, J @ np.swapaxes(R, -1, -2).conj())
        denom = float(np.vdot(AX, AX).real)
        if denom > 0:
            c = np.vdot(AX, Y) / denom
            if abs(c) > 0:
                J = J * (c / math.sqrt(abs(c)))
                R = R * math.sqrt(abs(c))
    return FactorPoint.from_parts(J, R)


def detect_activity(result, v1: float = 0.1) -> set:
    """Devices (1-based) whose block energy is at least ``v1`` times the largest."""
    blocks = result.blocks if hasattr(result, "blocks") else np.asarray(result)
    energy = np.sum(np.abs(blocks) ** 2, axis=(1, 2))
    top = energy.max(initial=0.0)
    if top <= 0:
        return set()
    return {int(n) + 1 for n in np.flatnonzero(energy >= v1 * top)}


def _quartic_step(S, eta, ens, Y):
    """Minimiser over ``t > 0`` of the data term along ``S + t eta``.

    ``X(t) = X0 + t X1 + t^2 X2`` so the residual is quadratic in ``t`` and the
    data term a quartic; its critical points are roots of a cubic. Returns
    ``None`` when no positive minimiser exists.
    """
    J, R = S.J, S.R
    eJ, eR = eta[:, :S.M], eta[:, S.M:]
    ct = lambda a: np.swapaxes(a, -1, -2).conj()
    r0 = forward(ens, J @ ct(R)) - Y
    a1 = forward(ens, eJ @ ct(R) + J @ ct(eR))
    a2 = forward(ens, eJ @ ct(eR))
    ip = lambda a, b: float(np.vdot(a, b).real)
    coeffs = [2 * ip(a2, a2), 3 * ip(a1, a2), ip(a1, a1) + 2 * ip(r0, a2), ip(r0, a1)]
    if coeffs[3] >= 0:
        # data term does not decrease along eta; any positive root is spurious
        return None
    roots = np.roots(coeffs) if coeffs[0] > 0 or coeffs[1] != 0 else np.roots(coeffs[2:])
    curv = lambda t: 3 * coeffs[0] * t * t + 2 * coeffs[1] * t + coeffs[2]
    cands = [t.real for t in np.atleast_1d(roots)
             if abs(t.imag) <= 1e-9 * max(1.0, abs(t)) and t.real > 0 and curv(t.real) > 0]
    if not cands:
        return None
    phi = lambda t: 0.5 * np.linalg.norm(r0 + t * a1 + t * t * a2) ** 2
    return min(cands, key=phi)


def _grad_norm(g):
    return float(np.sum(np.linalg.norm(g, axis=(1, 2))))


def _try_step(S, eta, t, ens, Y, cfg):
    try:
        S_new, used = retract(S, eta, t)
    except RankDeficiencyError:
        return None
    f_new, resid, W = _value(S_new, ens, Y, cfg)
    return (S_new, used, f_new, resid, W) if math.isfinite(f_new) else None


def _line_search(S, eta, f, slope, ens, Y, cfg, starts):
    """Armijo backtracking from each entry of ``starts``; the accepted step
    with the lowest objective wins.

    A start that fails is halved until it passes or drops below a start that
    already passed, so a tiny first guess cannot lock in a negligible step.
    """
    ok = lambda c: c is not None and c[2] <= f + cfg.armijo_c * c[1] * slope
    passed, failed = [], []
    for t in starts:
        c = _try_step(S, eta, t, ens, Y, cfg)
        (passed if ok(c) else failed).append((t, c))
    floor = max((t for t, _ in passed), default=0.0)
    for t, _ in failed:
        for _ in range(cfg.max_backtracks):
            t *= 0.5
            if t <= floor:
                break
            c = _try_step(S, eta, t, ens, Y, cfg)
            if ok(c):
                passed.append((t, c))
                break
    if not passed:
        return None
    return min((c for _, c in passed), key=lambda c: c[2])


def solve(ens: SensingEnsemble, Y, cfg: Optional[SolverConfig] = None, rng=None,
          init: Optional[FactorPoint] = None,
          progress: Optional[Callable[[int, float, float, float], None]] = None) -> SolveResult:
    """Riemannian conjugate gradients (Polak-Ribiere+, projection transport).

    Stops after ``cfg.max_iters`` iterations, when the summed per-device
    gradient norm falls below ``grad_tol`` times its initial value, or when the
    line search cannot decrease the objective. ``progress`` is called as
    ``progress(iter, objective, grad_norm, step)`` after each iteration.
    """
    cfg = cfg or SolverConfig()
    Y = np.asarray(Y, dtype=complex)
    S = init if init is not None else truncated_init(ens, Y, cfg, rng)
    f, egrad = _evaluate(S, ens, Y, cfg)
    if not math.isfinite(f):
        raise SolverError(f"non-finite objective at initialisation ({f})")
    g = project_horizontal(S.factors, 0.5 * egrad)
    gnorm0 = _grad_norm(g)
    obj_trace, grad_trace, step_trace = [f], [gnorm0], []
    eta = -g
    step = cfg.mu
    converged = gnorm0 == 0.0
    it = 0
    while it < cfg.max_iters and not converged:
        slope = metric(S.factors, egrad, eta)
        # restart when eta is not clearly downhill (slope = 2 <g, eta>)
        gg = metric(S.factors, g, g)
        if slope >= -cfg.restart_cos * 2.0 * math.sqrt(gg * metric(S.factors, eta, eta)):
            eta, slope = -g, -2.0 * gg
        if cfg.line_search == "fixed":
            S_new, used = retract(S, eta, cfg.mu)
            f_new, egrad_new = _evaluate(S_new, ens, Y, cfg)
        else:
            fallback = max(2.0 * step, cfg.mu) if it > 0 else cfg.mu
            starts = [fallback]
            if cfg.exact_data_step:
                t_star = _quartic_step(S, eta, ens, Y)
                if t_star is not None:
                    starts = [t_star] if t_star >= 0.5 * fallback else [t_star, fallback]
            found = _line_search(S, eta, f, slope, ens, Y, cfg, starts)
            if found is None and gg > 0 and not np.array_equal(eta, -g):
                eta, slope = -g, -2.0 * gg
                found = _line_search(S, eta, f, slope, ens, Y, cfg, [fallback])
            if found is None:
                log.info("line search failed at iteration %d; stopping", it)
                break
            S_new, used, f_new, resid, W = found
            step = used
            egrad_new = _gradient(S_new, ens, cfg, resid, W)
        if not math.isfinite(f_new):
            raise SolverError(f"objective became non-finite at iteration {it + 1} "
                              f"(step {used:g}); reduce mu or enable backtracking")
        g_new = project_horizontal(S_new.factors, 0.5 * egrad_new)
        g_old_t, eta_t = transport(S, S_new, g), transport(S, S_new, eta)
        denom = metric(S.factors, egrad, g)
        beta = max(0.0, metric(S_new.factors, egrad_new, g_new - g_old_t) / denom) if denom > 0 else 0.0
        eta = -g_new + beta * eta_t
        S, f, egrad, g = S_new, f_new, egrad_new, g_new
        it += 1
        gn = _grad_norm(g)
        obj_trace.append(f)
        grad_trace.append(gn)
        step_trace.append(used)
        if progress is not None:
            progress(it, f, gn, used)
        converged = gn <= cfg.grad_tol * gnorm0
    blocks = S.blocks()
    result = SolveResult(factors=S, blocks=blocks, channels=ens.dicts.to_physical(blocks),
                         detected=set(), objective_trace=obj_trace, grad_trace=grad_trace,
                         step_trace=step_trace, iterations=it, converged=converged)
    result.detected = detect_activity(result, cfg.v1)
    if cfg.refine_iters > 0 and result.detected:
        result = _refine(ens, Y, cfg, result)
    return result


def _refine(ens, Y, cfg, first: SolveResult) -> SolveResult:
    """Re-solve on the detected devices only; undetected blocks become zero."""
    keep = np.array(sorted(n - 1 for n in first.detected))
    nu = cfg.nu if cfg.refine_nu is None else cfg.refine_nu
    sub_cfg = replace(cfg, nu=nu, max_iters=cfg.refine_iters, refine_iters=0)
    init = first.factors.with_factors(first.factors.factors[keep])
    sub = solve(ens.subset(keep), Y, sub_cfg, init=init)
    factors = first.factors.factors.copy()
    factors[keep] = sub.factors.factors
    blocks = np.zeros_like(first.blocks)
    blocks[keep] = sub.blocks
    return SolveResult(factors=first.factors.with_factors(factors), blocks=blocks,
                       channels=ens.dicts.to_physical(blocks), detected=first.detected,
                       objective_trace=first.objective_trace + sub.objective_trace,
                       grad_trace=first.grad_trace + sub.grad_trace,
                       step_trace=first.step_trace + sub.step_trace,
                       iterations=first.iterations + sub.iterations,
                       converged=sub.converged)
