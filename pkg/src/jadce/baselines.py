"""Reference estimators: entrywise-l1 FISTA and group OMP.

Both operate on the same stacked ``(N, M, D)`` device state as the MRAS
solver and return objects with a ``blocks`` attribute, so activity detection
and the metrics treat every solver alike.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Optional

import numpy as np

from . import kernels
from .sensing import SensingEnsemble, adjoint, forward


class BaselineError(RuntimeError):
    pass


@dataclass
class BaselineConfig:
    lam: float = 0.0
    max_iters: int = 500
    tol: float = 1e-6
    omp_max_groups: int = 6
    lipschitz_iters: int = 100

    def __post_init__(self):
        if self.lam < 0 or self.max_iters < 1:
            raise ValueError("need lam >= 0 and max_iters >= 1")


@dataclass
class BaselineResult:
    blocks: np.ndarray
    objective_trace: list = field(default_factory=list)
    iterations: int = 0
    support: list = field(default_factory=list)
    lam: Optional[float] = None


def lipschitz_constant(ens: SensingEnsemble, iters: int = 100, tol: float = 1e-8, rng=None) -> float:
    """Largest eigenvalue of ``A^H A`` by power iteration."""
    if iters < 1:
        raise ValueError("iters must be >= 1")
    rng = np.random.default_rng(0) if rng is None else rng
    x = rng.standard_normal((ens.N, ens.M, ens.D)) + 1j * rng.standard_normal((ens.N, ens.M, ens.D))
    x /= np.linalg.norm(x)
    prev = 0.0
    for _ in range(iters):
        y = adjoint(ens, forward(ens, x))
        est = float(np.linalg.norm(y))
        if not np.isfinite(est) or est == 0.0:
            raise BaselineError("power iteration broke down")
        x = y / est
        if abs(est - prev) <= tol * est:
            return est
        prev_gap, prev = abs(est - prev), est
    if prev_gap > 1e-2 * est:
        raise BaselineError(f"power iteration did not converge in {iters} iterations")
    return est


def lasso_objective(ens, Y, X, lam) -> float:
    r = forward(ens, X) - Y
    return 0.5 * float(np.vdot(r, r).real) + lam * float(np.abs(X).sum())


def fista_solve(ens: SensingEnsemble, Y, cfg: BaselineConfig, x0=None,
                lipschitz: Optional[float] = None) -> BaselineResult:
    """Monotone FISTA for ``min 1/2 ||A(X) - Y||^2 + lam ||X||_1`` (complex entries).

    The prox is magnitude soft-thresholding. A momentum step that would raise
    the objective is replaced by the plain proximal step (Beck-Teboulle MFISTA),
    so the objective trace never increases.
    """
    Lip = lipschitz if lipschitz is not None else lipschitz_constant(ens, cfg.lipschitz_iters) * 1.01
    x = np.zeros((ens.N, ens.M, ens.D), dtype=complex) if x0 is None else np.array(x0, dtype=complex)
    z, t = x.copy(), 1.0
    f = lasso_objective(ens, Y, x, cfg.lam)
    trace = [f]
    it = 0
    for it in range(1, cfg.max_iters + 1):
        grad = adjoint(ens, forward(ens, z) - Y)
        u = kernels.soft_threshold(z - grad / Lip, cfg.lam / Lip)
        fu = lasso_objective(ens, Y, u, cfg.lam)
        t_next = 0.5 * (1.0 + np.sqrt(1.0 + 4.0 * t * t))
        x_prev = x
        if fu <= f:
            x, f = u, fu
        z = x + (t / t_next) * (u - x) + ((t - 1.0) / t_next) * (x - x_prev)
        t = t_next
        trace.append(f)
        # measured on the prox point: a rejected momentum step leaves x unchanged
        change = np.linalg.norm(u - x_prev)
        if change <= cfg.tol * max(np.linalg.norm(x), 1e-300):
            break
    return BaselineResult(blocks=x, objective_trace=trace, iterations=it, lam=cfg.lam)


def lambda_max(ens: SensingEnsemble, Y) -> float:
    """Smallest ``lam`` for which the lasso solution is exactly zero."""
    return float(np.abs(adjoint(ens, Y)).max())


def fista_path(ens: SensingEnsemble, Y, lams, cfg: BaselineConfig) -> list:
    """Solutions for decreasing ``lams``, each warm-started from the previous one."""
    Lip = lipschitz_constant(ens, cfg.lipschitz_iters) * 1.01
    out, x = [], None
    for lam in sorted(lams, reverse=True):
        res = fista_solve(ens, Y, BaselineConfig(lam=lam, max_iters=cfg.max_iters, tol=cfg.tol),
                          x0=x, lipschitz=Lip)
        x = res.blocks
        out.append(res)
    return out


def _refit(ens, Y, support):
    """Minimum-norm least squares over unconstrained blocks of ``support``.

    The restricted map is ``X_S -> Bbar X_S Abar_S`` so its pseudo-inverse
    factors as ``pinv(Bbar) Y pinv(Abar_S)``.
    """
    A_S = ens.A[support].reshape(len(support) * ens.D, ens.B_p)
    X_S = np.linalg.pinv(ens.Bbar, rcond=1e-10) @ Y @ np.linalg.pinv(A_S, rcond=1e-10)
    X = np.zeros((ens.N, ens.M, ens.D), dtype=complex)
    X[support] = X_S.reshape(ens.M, len(support), ens.D).transpose(1, 0, 2)
    return X


def gomp_solve(ens: SensingEnsemble, Y, cfg: BaselineConfig, stall_tol: float = 1e-9) -> BaselineResult:
    """Group OMP: add the device whose back-projected residual is strongest,
    refit all selected blocks by least squares, repeat."""
    if cfg.omp_max_groups > ens.N:
        raise ValueError("omp_max_groups exceeds the number of devices")
    X = np.zeros((ens.N, ens.M, ens.D), dtype=complex)
    y_norm = np.linalg.norm(Y)
    support: list = []
    trace = [float(y_norm)]
    if y_norm == 0:
        return BaselineResult(blocks=X, objective_trace=trace, support=support)
    resid = np.asarray(Y, dtype=complex)
    while len(support) < cfg.omp_max_groups:
        corr = np.linalg.norm(adjoint(ens, resid), axis=(1, 2))
        corr[support] = -np.inf
        support.append(int(np.argmax(corr)))
        X = _refit(ens, Y, support)
        resid = Y - forward(ens, X)
        rn = float(np.linalg.norm(resid))
        stalled = trace[-1] - rn <= stall_tol * y_norm
        trace.append(rn)
        if rn <= stall_tol * y_norm or stalled:
            break
    return BaselineResult(blocks=X, objective_trace=trace, iterations=len(support),
                          support=list(support))
