"""Per-iteration cost of the MRAS solver over a grid of problem sizes."""

from __future__ import annotations

import math
import time

import numpy as np

from ..channel import build_dictionaries, synthesize_population
from ..sensing import add_noise, forward, generate_ensemble
from ..solver import SolverConfig, solve, truncated_init

BENCH_HEADER = "dim,value,M_p,B_p,D,N,sec_per_iter"


def time_iteration(M_p, B_p, D, N, *, M=None, B=None, iters=20, repeats=3, seed=0) -> float:
    """Median wall time of one CG iteration (line search included).

    ``M`` defaults to ``M_p`` and ``B`` to the smallest power of two that
    holds ``B_p`` and ``D``.
    """
    M = M_p if M is None else M
    B = B if B is not None else 2 ** math.ceil(math.log2(max(B_p, D)))
    rng = np.random.default_rng(seed)
    dicts = build_dictionaries(M, B, D / B)
    K = max(1, N // 4)
    pop = synthesize_population(rng, N, K, M, D, 2, 1)
    ens = generate_ensemble(rng, M, B, D, N, M_p, B_p, dicts)
    Y, _ = add_noise(rng, forward(ens, pop.blocks), 25.0)
    cfg = SolverConfig(nu=0.03 * M_p * B_p, rho=1000.0, max_iters=iters, grad_tol=0.0)
    init = truncated_init(ens, Y, cfg)
    samples = []
    for _ in range(repeats):
        t0 = time.perf_counter()
        res = solve(ens, Y, cfg, init=init)
        samples.append((time.perf_counter() - t0) / max(res.iterations, 1))
    return float(np.median(samples))


def bench_scaling(grid: dict, base: dict, iters: int = 20, repeats: int = 3) -> list:
    """Time one iteration for each value of each swept dimension.

    ``grid`` maps a dimension name (``M_p``, ``B_p``, ``D`` or ``N``) to the
    values to try; ``base`` holds the other dimensions. Returns rows
    ``(dim, value, M_p, B_p, D, N, seconds)``.
    """
    rows = []
    for dim, values in grid.items():
        for v in values:
            dims = dict(base, **{dim: v})
            t = time_iteration(dims["M_p"], dims["B_p"], dims["D"], dims["N"],
                               iters=iters, repeats=repeats)
            rows.append((dim, v, dims["M_p"], dims["B_p"], dims["D"], dims["N"], t))
    return rows


def fit_slopes(rows) -> dict:
    """Least-squares slope of log(time) against log(dimension), per dimension.

    Dimensions with a single point get ``nan``.
    """
    out = {}
    for dim in dict.fromkeys(r[0] for r in rows):
        pts = [(r[1], r[-1]) for r in rows if r[0] == dim]
        if len(pts) < 2:
            out[dim] = math.nan
            continue
        x, y = np.log([p[0] for p in pts]), np.log([p[1] for p in pts])
        out[dim] = float(np.polyfit(x, y, 1)[0])
    return out


def format_bench(rows) -> str:
    lines = [BENCH_HEADER]
    lines += [",".join([r[0]] + [str(v) for v in r[1:-1]] + [f"{r[-1]:.6e}"]) for r in rows]
    return "\n".join(lines) + "\n"
