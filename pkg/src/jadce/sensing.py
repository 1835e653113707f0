"""Pilots, antenna/subcarrier sampling and the linear measurement map.

Device state is carried as a stacked array of shape ``(N, M, D)``; block
``n`` (0-based in code, device ``n + 1`` in reports) is ``X_n``. The map is

    Y = sum_n Bbar X_n A_n = Bbar [X_1 ... X_N] Abar_tau^H

with ``Bbar = P_M A_theta`` and ``A_n = A_tau^H P_T diag(alpha_n)``.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Optional

import numpy as np

from .channel import Dictionaries, build_dictionaries, synthesize_device


class SensingError(ValueError):
    pass


def _blocks(X) -> np.ndarray:
    return np.asarray(getattr(X, "blocks", X))


@dataclass
class DelayAngularState:
    """Per-device blocks ``(N, M, D)`` plus activity indicators."""

    blocks: np.ndarray
    active: Optional[np.ndarray] = None

    def __post_init__(self):
        self.blocks = np.asarray(self.blocks, dtype=complex)
        if self.blocks.ndim != 3:
            raise SensingError("blocks must have shape (N, M, D)")
        nonzero = np.any(self.blocks != 0, axis=(1, 2))
        if self.active is None:
            self.active = nonzero
        else:
            self.active = np.asarray(self.active, dtype=bool)
            if np.any(nonzero & ~self.active):
                raise SensingError("inactive device carries a nonzero block")

    @property
    def stacked(self) -> np.ndarray:
        """``[X_1 ... X_N]`` as one ``M x DN`` matrix."""
        N, M, D = self.blocks.shape
        return self.blocks.transpose(1, 0, 2).reshape(M, N * D)


@dataclass(frozen=True)
class SGLProfile:
    """Sparse-group / low-rank budget used by the bound and the RIP probe."""

    u: int
    r: int
    p_min: int = 1
    p_max: int = 1
    L_min: int = 1
    L_max: int = 1

    def __post_init__(self):
        if self.u < 0 or self.r < 1:
            raise SensingError("need u >= 0 and r >= 1")
        if self.p_min > self.p_max or self.L_min > self.L_max:
            raise SensingError("need p_min <= p_max and L_min <= L_max")


@dataclass(frozen=True)
class SensingEnsemble:
    """Sampling pattern, pilots and the derived per-device operators.

    ``Abar`` is the stacked ``(N D) x B_p`` matrix ``[A_1; ...; A_N]`` so that
    ``forward`` is two dense products. Treat instances as read-only.
    """

    antenna_idx: np.ndarray
    subcarrier_idx: np.ndarray
    pilots: np.ndarray
    Bbar: np.ndarray
    A: np.ndarray
    dicts: Dictionaries
    seed: Optional[int] = None
    Abar: np.ndarray = field(init=False, repr=False)

    def __post_init__(self):
        N, D, Bp = self.A.shape
        object.__setattr__(self, "Abar", self.A.reshape(N * D, Bp))

    @property
    def N(self) -> int:
        return self.A.shape[0]

    @property
    def M(self) -> int:
        return self.Bbar.shape[1]

    @property
    def D(self) -> int:
        return self.A.shape[1]

    @property
    def M_p(self) -> int:
        return self.Bbar.shape[0]

    @property
    def B_p(self) -> int:
        return self.A.shape[2]

    @property
    def P_M(self) -> np.ndarray:
        P = np.zeros((self.M_p, self.dicts.M))
        P[np.arange(self.M_p), self.antenna_idx] = 1.0
        return P

    @property
    def P_T(self) -> np.ndarray:
        P = np.zeros((self.dicts.B, self.B_p))
        P[self.subcarrier_idx, np.arange(self.B_p)] = 1.0
        return P

    def subset(self, devices) -> "SensingEnsemble":
        """Ensemble restricted to the given 0-based device indices."""
        idx = np.asarray(sorted(devices), dtype=int)
        return SensingEnsemble(antenna_idx=self.antenna_idx, subcarrier_idx=self.subcarrier_idx,
                               pilots=self.pilots[idx], Bbar=self.Bbar, A=self.A[idx],
                               dicts=self.dicts, seed=None)

    def describe(self) -> dict:
        """Seed and dimensions; enough to regenerate the ensemble."""
        return {"seed": self.seed, "M": self.dicts.M, "B": self.dicts.B, "D": self.D,
                "gamma": self.dicts.gamma, "N": self.N, "M_p": self.M_p, "B_p": self.B_p}

    @classmethod
    def from_description(cls, desc: dict) -> "SensingEnsemble":
        if desc.get("seed") is None:
            raise SensingError("ensemble description has no seed")
        dicts = build_dictionaries(desc["M"], desc["B"], desc["gamma"])
        return generate_ensemble(desc["seed"], desc["M"], desc["B"], desc["D"], desc["N"],
                                 desc["M_p"], desc["B_p"], dicts)


def generate_ensemble(rng, M: int, B: int, D: int, N: int, M_p: int, B_p: int,
                      dicts: Optional[Dictionaries] = None) -> SensingEnsemble:
    """Random antenna/subcarrier subsets (without replacement) and unit-modulus pilots.

    ``rng`` may be a ``numpy.random.Generator`` or an integer seed; with an
    integer the seed is kept so the ensemble can be described compactly.
    """
    if not 1 <= M_p <= M:
        raise SensingError(f"M_p = {M_p} must lie in [1, M = {M}]")
    if not 1 <= B_p <= B:
        raise SensingError(f"B_p = {B_p} must lie in [1, B = {B}]")
    seed = None
    if not isinstance(rng, np.random.Generator):
        seed = int(rng)
        rng = np.random.default_rng(seed)
    if dicts is None:
        dicts = build_dictionaries(M, B, D / B)
    if dicts.M != M or dicts.B != B or dicts.D != D:
        raise SensingError("dictionaries do not match (M, B, D)")
    antenna_idx = np.sort(rng.choice(M, size=M_p, replace=False))
    subcarrier_idx = np.sort(rng.choice(B, size=B_p, replace=False))
    pilots = np.exp(1j * rng.uniform(0.0, 2.0 * np.pi, size=(N, B_p)))
    Bbar = dicts.A_theta[antenna_idx, :]
    A_sub = dicts.A_tau[subcarrier_idx, :].conj().T          # A_tau^H P_T, D x B_p
    A = A_sub[None, :, :] * pilots[:, None, :]
    return SensingEnsemble(antenna_idx=antenna_idx, subcarrier_idx=subcarrier_idx,
                           pilots=pilots, Bbar=Bbar, A=A, dicts=dicts, seed=seed)


def _check_blocks(ens, X):
    if X.shape != (ens.N, ens.M, ens.D):
        raise SensingError(f"state shape {X.shape} != {(ens.N, ens.M, ens.D)}")


def forward(ens: SensingEnsemble, X) -> np.ndarray:
    """Noiseless measurements ``sum_n Bbar X_n A_n`` (``M_p x B_p``)."""
    X = _blocks(X)
    _check_blocks(ens, X)
    stacked = X.transpose(1, 0, 2).reshape(ens.M, -1)
    return ens.Bbar @ (stacked @ ens.Abar)


def adjoint(ens: SensingEnsemble, Y: np.ndarray) -> np.ndarray:
    """Blocks ``Bbar^H Y A_n^H`` stacked as ``(N, M, D)``."""
    Y = np.asarray(Y)
    if Y.shape != (ens.M_p, ens.B_p):
        raise SensingError(f"measurement shape {Y.shape} != {(ens.M_p, ens.B_p)}")
    Z = (ens.Bbar.conj().T @ Y) @ ens.Abar.conj().T
    return Z.reshape(ens.M, ens.N, ens.D).transpose(1, 0, 2)


def dense_operators(ens: SensingEnsemble):
    """Explicit ``(Abar_theta, Abar_tau)`` with ``Y = Abar_theta X Abar_tau^H``.

    Built column-by-column from the sampling matrices and pilots, independent
    of the fast path in :func:`forward`; meant for small checks.
    """
    A_theta_bar = ens.P_M @ ens.dicts.A_theta
    cols = [np.diag(ens.pilots[n]).conj().T @ ens.P_T.T @ ens.dicts.A_tau for n in range(ens.N)]
    return A_theta_bar, np.hstack(cols)


def add_noise(rng, Y: np.ndarray, snr_db: float):
    """AWGN at ``snr_db`` relative to the mean received energy per entry.

    Returns ``(Y + Z, sigma2)`` with ``sigma2 = ||Y||_F^2 / (M_p B_p 10^(snr/10))``.
    """
    if math.isinf(snr_db) and snr_db > 0:
        return Y.copy(), 0.0
    energy = float(np.vdot(Y, Y).real)
    if energy == 0.0:
        raise SensingError("cannot set a finite SNR on an all-zero signal")
    sigma2 = energy / (Y.size * 10.0 ** (snr_db / 10.0))
    Z = np.sqrt(sigma2 / 2.0) * (rng.standard_normal(Y.shape) + 1j * rng.standard_normal(Y.shape))
    return Y + Z, sigma2


def sg_norm(X, p, L) -> int:
    """Sparse-group count: sum of ``p_n^2 L_n`` over nonzero groups."""
    X = _blocks(X)
    nz = np.any(X != 0, axis=(1, 2))
    p = np.broadcast_to(np.asarray(p), nz.shape)
    L = np.broadcast_to(np.asarray(L), nz.shape)
    return int(np.sum(np.where(nz, p * p * L, 0)))


def measurement_bound(profile: SGLProfile, N: int, D: int, M: int,
                      t: float = 1.0, kappa1: float = 1.0) -> float:
    """Measurement count ``B_p M_p`` sufficient for sparse-group low-rank RIP.

    Natural logarithms; ``0 log(N/0)`` is taken as 0. ``kappa1`` is an
    unspecified absolute constant, so only the scaling is meaningful.
    """
    if profile.p_min <= 0 or profile.L_min <= 0:
        raise SensingError("p_min and L_min must be positive")
    if t < 1:
        raise SensingError("t must be >= 1")
    pL = profile.p_max * profile.L_max
    u_bar = (1.0 + (t - 1.0) * profile.p_max ** 2 * profile.L_max) * profile.u
    theta = u_bar / (profile.p_min ** 2 * profile.L_min)
    group_term = theta * math.log(N / theta) if theta > 0 else 0.0
    total = (group_term + theta + theta * pL * math.log(D / pL) + theta * pL
             + (theta * pL + M + 1) * profile.r)
    return kappa1 * total


@dataclass
class RipSummary:
    trials: int
    u: int
    r: int
    B_p: int
    M_p: int
    mean_rho: float
    max_dev: float
    tail_frac: float
    max_dev_amplitude: float
    scale: float
    rho: np.ndarray = field(repr=False, default=None)

    CSV_HEADER = "trials,u,r,Bp,Mp,mean_rho,max_dev,tail_frac"

    def csv_row(self) -> str:
        return (f"{self.trials},{self.u},{self.r},{self.B_p},{self.M_p},"
                f"{self.mean_rho:.6g},{self.max_dev:.6g},{self.tail_frac:.6g}")


def _random_sg_state(rng, ens, profile):
    """Random u-sparse-group state with per-group rank ``<= min(r, L_max)``."""
    p, L = profile.p_max, min(profile.L_max, profile.r)
    groups = max(1, min(ens.N, profile.u // (p * p * L)))
    X = np.zeros((ens.N, ens.M, ens.D), dtype=complex)
    for n in rng.choice(ens.N, size=groups, replace=False):
        X[n] = synthesize_device(rng, ens.M, ens.D, L, p).delay_angular
    return X


def rip_probe(rng, ens: SensingEnsemble, profile: SGLProfile, trials: int,
              threshold: float = 0.5, calibration: int = 50,
              normalization: str = "batch") -> RipSummary:
    """Empirical concentration of ``rho = ||A(X)||^2 / ||X||_F^2``.

    The map is first scaled so that ``E[rho] = 1``: ``"batch"`` estimates the
    scale from ``calibration`` independent draws, ``"analytic"`` uses
    ``M_p B_p``. Both second-moment (``|rho - 1|``) and first-moment
    (``|sqrt(rho) - 1|``) deviations are reported.
    """
    if trials < 1:
        raise SensingError("trials must be >= 1")
    if profile.u < 1:
        raise SensingError("u = 0 only admits X = 0, for which rho is undefined")

    def ratio(X):
        Y = forward(ens, X)
        return float(np.vdot(Y, Y).real / np.vdot(X, X).real)

    if normalization == "batch":
        scale = float(np.mean([ratio(_random_sg_state(rng, ens, profile)) for _ in range(calibration)]))
    elif normalization == "analytic":
        scale = float(ens.M_p * ens.B_p)
    else:
        raise SensingError(f"unknown normalization {normalization!r}")
    rho = np.array([ratio(_random_sg_state(rng, ens, profile)) for _ in range(trials)]) / scale
    dev = np.abs(rho - 1.0)
    return RipSummary(trials=trials, u=profile.u, r=profile.r, B_p=ens.B_p, M_p=ens.M_p,
                      mean_rho=float(rho.mean()), max_dev=float(dev.max()),
                      tail_frac=float(np.mean(dev > threshold)),
                      max_dev_amplitude=float(np.abs(np.sqrt(rho) - 1.0).max()),
                      scale=scale, rho=rho)
