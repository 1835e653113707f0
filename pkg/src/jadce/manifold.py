"""Quotient geometry of stacked full-column-rank factors.

Each device is represented by ``S_n = [J_n; R_n]`` of shape ``(M + D, L)``
with ``X_n = J_n R_n^H``; all devices are stacked into one ``(N, M + D, L)``
array. ``S_n`` and ``S_n Q_n`` (``Q_n`` unitary) represent the same point,
so directions ``S_n Omega`` with skew-Hermitian ``Omega`` are vertical and are
projected out of every search direction.

Functions accept a single ``(M + D, L)`` block or a stack of them.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np


class RankDeficiencyError(np.linalg.LinAlgError):
    """A factor lost full column rank."""


def _ct(a):
    return np.swapaxes(a, -1, -2).conj()


@dataclass
class FactorPoint:
    """Stack of factors ``(N, M + D, L)``; the first ``M`` rows of each are ``J_n``."""

    factors: np.ndarray
    M: int

    def __post_init__(self):
        self.factors = np.asarray(self.factors, dtype=complex)
        if self.factors.ndim != 3:
            raise ValueError("factors must have shape (N, M + D, L)")
        if not 0 < self.M < self.factors.shape[1]:
            raise ValueError("M must split the factor rows into nonempty J and R")

    @property
    def J(self) -> np.ndarray:
        return self.factors[:, :self.M]

    @property
    def R(self) -> np.ndarray:
        return self.factors[:, self.M:]

    @property
    def N(self) -> int:
        return self.factors.shape[0]

    @property
    def L(self) -> int:
        return self.factors.shape[2]

    def blocks(self) -> np.ndarray:
        """``X_n = J_n R_n^H`` for every device, shape ``(N, M, D)``."""
        return self.J @ _ct(self.R)

    def with_factors(self, factors) -> "FactorPoint":
        return FactorPoint(factors, self.M)

    @classmethod
    def from_parts(cls, J, R) -> "FactorPoint":
        J, R = np.asarray(J), np.asarray(R)
        return cls(np.concatenate([J, R], axis=-2), J.shape[-2])


def min_singular_ratio(S) -> np.ndarray:
    """``sigma_min / sigma_max`` of each factor."""
    s = np.linalg.svd(S, compute_uv=False)
    top = s[..., 0]
    return np.divide(s[..., -1], top, out=np.zeros_like(top), where=top > 0)


def metric(S, xi, eta) -> float:
    """``sum_n Re Tr(xi_n^H eta_n)``; the point ``S`` only fixes shapes."""
    xi, eta = np.asarray(xi), np.asarray(eta)
    if xi.shape != eta.shape or xi.shape != np.shape(getattr(S, "factors", S)):
        raise ValueError(f"shape mismatch: {xi.shape}, {eta.shape}")
    return float(np.vdot(xi, eta).real)


def lyapunov_rhs(S, xi):
    return _ct(S) @ xi - _ct(xi) @ S


def solve_lyapunov(S, xi, rtol: float = 1e-14) -> np.ndarray:
    """Skew-Hermitian ``B`` with ``G B + B G = S^H xi - xi^H S``, ``G = S^H S``.

    Solved in the eigenbasis of the (tiny) Hermitian Gram matrix:
    ``G = U diag(lam) U^H`` gives ``B = U (C / (lam_a + lam_b)) U^H`` with
    ``C = U^H rhs U``.
    """
    S, xi = np.asarray(S), np.asarray(xi)
    lam, U = np.linalg.eigh(_ct(S) @ S)
    if np.any(lam[..., 0] <= rtol * lam[..., -1]) or np.any(lam[..., -1] <= 0):
        raise RankDeficiencyError("factor Gram matrix is singular")
    C = _ct(U) @ lyapunov_rhs(S, xi) @ U
    B = U @ (C / (lam[..., :, None] + lam[..., None, :])) @ _ct(U)
    # exact skew-Hermitian part; removes rounding asymmetry
    return 0.5 * (B - _ct(B))


def project_horizontal(S, xi) -> np.ndarray:
    """Remove the vertical component: ``xi - S B``."""
    S, xi = np.asarray(S), np.asarray(xi)
    return xi - S @ solve_lyapunov(S, xi)


def retract(S: FactorPoint, xi, step: float, max_halvings: int = 20,
            rank_tol: float = 1e-12):
    """Affine step ``S + step xi`` with a rank guard.

    The step is halved until every factor keeps full column rank. Returns
    ``(new_point, step_used)``.
    """
    xi = np.asarray(xi)
    if xi.shape != S.factors.shape:
        raise ValueError(f"direction shape {xi.shape} != {S.factors.shape}")
    t = float(step)
    for _ in range(max_halvings + 1):
        cand = S.factors + t * xi
        if np.all(min_singular_ratio(cand) > rank_tol):
            return S.with_factors(cand), t
        t *= 0.5
    raise RankDeficiencyError(f"rank lost after {max_halvings} step halvings")


def transport(S_old, S_new, eta) -> np.ndarray:
    """Projection transport: the horizontal part of ``eta`` at ``S_new``."""
    S_new = getattr(S_new, "factors", S_new)
    return project_horizontal(S_new, eta)


def random_skew_hermitian(rng, L, size=()):
    A = rng.standard_normal((*size, L, L)) + 1j * rng.standard_normal((*size, L, L))
    return 0.5 * (A - _ct(A))


def random_unitary(rng, L, size=()):
    A = rng.standard_normal((*size, L, L)) + 1j * rng.standard_normal((*size, L, L))
    Q, R = np.linalg.qr(A)
    d = np.diagonal(R, axis1=-2, axis2=-1)
    return Q * (d / np.abs(d))[..., None, :]
