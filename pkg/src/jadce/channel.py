"""Delay-angular channel synthesis for wideband mmW/THz devices.

Channels live in two forms: the physical ``M x B`` antenna/subcarrier matrix
``H`` and the delay-angular ``M x D`` matrix ``X`` with ``H = A_theta X A_tau^H``.
The default synthesis path places rank-1 ``p x p`` blocks directly on the
delay-angular grid; :func:`synthesize_device_physical` builds clusters from
mean angle/delay and is mostly useful for round-trip checks.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from pathlib import Path
from typing import Optional, Sequence

import numpy as np


class ChannelError(ValueError):
    """Raised when a channel cannot be synthesized as requested."""


@dataclass(frozen=True)
class Dictionaries:
    """Angle and delay dictionaries shared by all devices."""

    A_theta: np.ndarray
    A_tau: np.ndarray
    D: int
    T_s: float
    gamma: float

    @property
    def M(self) -> int:
        return self.A_theta.shape[0]

    @property
    def B(self) -> int:
        return self.A_tau.shape[0]

    def to_physical(self, X: np.ndarray) -> np.ndarray:
        """Map delay-angular block(s) ``(..., M, D)`` to physical ``(..., M, B)``."""
        return self.A_theta @ X @ self.A_tau.conj().T


@dataclass
class ClusterSpec:
    """One scattering cluster on the delay-angular grid.

    ``gains`` is the ``p_ang x p_del`` footprint; ``None`` means "draw a
    rank-1 complex Gaussian block" at synthesis time.
    """

    mean_angle: float
    mean_delay: float
    p_ang: int = 1
    p_del: int = 1
    gains: Optional[np.ndarray] = None

    def __post_init__(self):
        if self.p_ang < 1 or self.p_del < 1:
            raise ChannelError("cluster spreads must be positive")
        if self.gains is not None:
            g = np.atleast_2d(np.asarray(self.gains, dtype=complex))
            if g.shape != (self.p_ang, self.p_del):
                raise ChannelError(
                    f"gains shape {g.shape} != ({self.p_ang}, {self.p_del})"
                )
            if not (np.any(g != 0, axis=1).all() and np.any(g != 0, axis=0).all()):
                raise ChannelError("cluster gains contain an all-zero row or column")
            self.gains = g


@dataclass
class DeviceChannel:
    clusters: list
    delay_angular: np.ndarray
    physical: Optional[np.ndarray] = None
    clipped: bool = False

    @property
    def L(self) -> int:
        return len(self.clusters)


def steering_angle(theta: float, M: int) -> np.ndarray:
    """ULA angle response ``a(theta)[m] = exp(-j 2 pi m theta)``."""
    return np.exp(-2j * np.pi * np.arange(M) * theta)


def steering_delay(tau: float, T_s: float, B: int) -> np.ndarray:
    """Delay response ``b(tau)[b] = exp(-j 2 pi b tau / T_s)``."""
    return np.exp(-2j * np.pi * np.arange(B) * tau / T_s)


def build_dictionaries(M: int, B: int, gamma: float = 1.0, T_s: float = 1.0) -> Dictionaries:
    if M < 1 or B < 1:
        raise ChannelError("M and B must be positive")
    if not 0.0 < gamma <= 1.0:
        raise ChannelError(f"gamma must lie in (0, 1], got {gamma}")
    D = int(np.floor(gamma * B + 1e-9))
    if D < 1:
        raise ChannelError(f"gamma*B = {gamma * B} gives an empty delay grid")
    m = np.arange(M)
    A_theta = np.exp(-2j * np.pi * np.outer(m, m) / M)
    b = np.arange(B)
    # column k is b(k T_s / B)
    A_tau = np.exp(-2j * np.pi * np.outer(b, np.arange(D)) / B)
    return Dictionaries(A_theta=A_theta, A_tau=A_tau, D=D, T_s=float(T_s), gamma=float(gamma))


def _complex_gaussian(rng, size):
    return (rng.standard_normal(size) + 1j * rng.standard_normal(size)) / np.sqrt(2.0)


def _place_blocks(rng, M, D, L, p, max_tries=1000):
    """Top-left corners of ``L`` pairwise disjoint ``p x p`` rectangles."""
    corners = []
    for _ in range(max_tries):
        corners = []
        for _ in range(L):
            r = int(rng.integers(0, M - p + 1))
            c = int(rng.integers(0, D - p + 1))
            if any(abs(r - r0) < p and abs(c - c0) < p for r0, c0 in corners):
                break
            corners.append((r, c))
        if len(corners) == L:
            return corners
    raise ChannelError(f"could not place {L} disjoint {p}x{p} blocks in a {M}x{D} grid")


def synthesize_device(rng, M: int, D: int, L_n: int, p: int,
                      amp_range=(1.0, 1.0), dicts: Optional[Dictionaries] = None) -> DeviceChannel:
    """Grid-aligned block-sparse, rank-``L_n`` delay-angular channel.

    Each path contributes a rank-1 ``p x p`` block (outer product of two
    complex Gaussian vectors) at a random position; blocks never overlap.
    The result has unit Frobenius norm times an amplitude drawn uniformly
    from ``amp_range``. If ``dicts`` is given the physical channel is filled in.
    """
    if L_n < 1 or p < 1:
        raise ChannelError("L_n and p must be positive")
    if L_n * p > min(M, D):
        raise ChannelError(f"L_n*p = {L_n * p} exceeds min(M, D) = {min(M, D)}")
    X = np.zeros((M, D), dtype=complex)
    corners = _place_blocks(rng, M, D, L_n, p)
    for r, c in corners:
        X[r:r + p, c:c + p] = np.outer(_complex_gaussian(rng, p), _complex_gaussian(rng, p))
    lo, hi = amp_range
    amp = lo if hi == lo else rng.uniform(lo, hi)
    X *= amp / np.linalg.norm(X)
    # without dictionaries the delay is reported in grid bins
    delay_unit = dicts.T_s / dicts.B if dicts is not None else 1.0
    clusters = [ClusterSpec(mean_angle=(r + (p - 1) // 2) / M,
                            mean_delay=(c + (p - 1) // 2) * delay_unit,
                            p_ang=p, p_del=p, gains=X[r:r + p, c:c + p].copy())
                for r, c in corners]
    H = dicts.to_physical(X) if dicts is not None else None
    return DeviceChannel(clusters=clusters, delay_angular=X, physical=H)


def _support(center, width, size):
    start = center - (width - 1) // 2
    lo, hi = max(start, 0), min(start + width, size)
    return start, lo, hi, (lo != start or hi != start + width)


def synthesize_device_physical(rng, dicts: Dictionaries,
                               clusters: Sequence[ClusterSpec]) -> DeviceChannel:
    """Build ``X`` from cluster mean angle/delay and the physical ``H`` from it.

    Cluster supports are contiguous and centred on the grid bin nearest the
    mean angle (``round(theta M) mod M``) and mean delay (``round(tau B / T_s)``).
    Supports that leave the grid are clipped and flagged.
    """
    M, D, B = dicts.M, dicts.D, dicts.B
    X = np.zeros((M, D), dtype=complex)
    clipped = False
    out = []
    for cl in clusters:
        gains = cl.gains
        if gains is None:
            gains = np.outer(_complex_gaussian(rng, cl.p_ang), _complex_gaussian(rng, cl.p_del))
        k_ang = int(np.floor(cl.mean_angle * M + 0.5)) % M
        k_del = int(np.floor(cl.mean_delay * B / dicts.T_s + 0.5))
        s_a, lo_a, hi_a, clip_a = _support(k_ang, cl.p_ang, M)
        s_d, lo_d, hi_d, clip_d = _support(k_del, cl.p_del, D)
        clipped |= clip_a or clip_d
        if hi_a > lo_a and hi_d > lo_d:
            X[lo_a:hi_a, lo_d:hi_d] += gains[lo_a - s_a:hi_a - s_a, lo_d - s_d:hi_d - s_d]
        out.append(ClusterSpec(cl.mean_angle, cl.mean_delay, cl.p_ang, cl.p_del, gains))
    return DeviceChannel(clusters=out, delay_angular=X, physical=dicts.to_physical(X),
                         clipped=clipped)


@dataclass
class ChannelRealization:
    """All devices of one trial: stacked blocks ``(N, M, D)`` and activity."""

    blocks: np.ndarray
    active: np.ndarray
    L: np.ndarray = field(default=None)
    p: np.ndarray = field(default=None)

    @property
    def N(self) -> int:
        return self.blocks.shape[0]

    @property
    def support(self) -> set:
        return {int(n) + 1 for n in np.flatnonzero(self.active)}


def synthesize_population(rng, N: int, K: int, M: int, D: int, L_max: int, p,
                          amp_range=(1.0, 1.0), L_n=None) -> ChannelRealization:
    """``N`` devices, ``K`` of them active (uniformly chosen), zero blocks elsewhere.

    ``p`` may be a scalar or a per-device array. ``L_n`` defaults to ``L_max``
    for every device.
    """
    if K > N:
        raise ChannelError("K must not exceed N")
    p = np.broadcast_to(np.asarray(p, dtype=int), (N,)).copy()
    L = np.full(N, L_max, dtype=int) if L_n is None else np.broadcast_to(np.asarray(L_n, dtype=int), (N,)).copy()
    active = np.zeros(N, dtype=bool)
    active[rng.choice(N, size=K, replace=False)] = True
    blocks = np.zeros((N, M, D), dtype=complex)
    for n in np.flatnonzero(active):
        blocks[n] = synthesize_device(rng, M, D, int(L[n]), int(p[n]), amp_range).delay_angular
    return ChannelRealization(blocks=blocks, active=active, L=L, p=p)


def save_channels(path, blocks: np.ndarray, L_max: int) -> None:
    """Write ``(N, M, D)`` blocks as CSV of re,im pairs.

    The first line is ``M,D,N,L_max``; each following line is one row of the
    stacked ``M x DN`` matrix ``[X_1 ... X_N]``.
    """
    blocks = np.asarray(blocks, dtype=complex)
    N, M, D = blocks.shape
    stacked = np.concatenate(list(blocks), axis=1) if N else np.zeros((M, 0))
    pairs = np.empty((M, 2 * N * D))
    pairs[:, 0::2] = stacked.real
    pairs[:, 1::2] = stacked.imag
    with open(path, "w") as fh:
        fh.write(f"{M},{D},{N},{L_max}\n")
        for row in pairs:
            fh.write(",".join(repr(float(v)) for v in row) + "\n")


def load_channels(path):
    """Inverse of :func:`save_channels`; returns ``(blocks, L_max)``."""
    text = Path(path).read_text().splitlines()
    try:
        M, D, N, L_max = (int(v) for v in text[0].split(","))
    except (IndexError, ValueError) as exc:
        raise ChannelError(f"{path}: bad header line") from exc
    rows = [np.array(line.split(","), dtype=float) for line in text[1:1 + M]]
    if len(rows) != M or any(r.size != 2 * N * D for r in rows):
        raise ChannelError(f"{path}: expected {M} rows of {2 * N * D} values")
    pairs = np.vstack(rows)
    stacked = pairs[:, 0::2] + 1j * pairs[:, 1::2]
    blocks = stacked.reshape(M, N, D).transpose(1, 0, 2).copy()
    return blocks, L_max
