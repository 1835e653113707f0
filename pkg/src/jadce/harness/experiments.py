"""Monte-Carlo sweeps over pilot length, antenna sampling, spread or SNR.

Every trial draws a fresh channel population, sensing ensemble and noise
from a seed derived only from the base seed and the trial index, runs all
selected solvers on the same instance, and the per-point aggregates are
written as CSV rows in a fixed order. Reruns with the same configuration
therefore produce identical files.
"""

from __future__ import annotations

import csv
import io
import logging
import math
import time
from concurrent.futures import ProcessPoolExecutor
from dataclasses import asdict, dataclass, field, fields, replace
from pathlib import Path
from typing import Optional

import numpy as np

from ..baselines import BaselineConfig, BaselineError, fista_path, gomp_solve, lambda_max
from ..channel import build_dictionaries, synthesize_population
from ..manifold import RankDeficiencyError
from ..sensing import add_noise, forward, generate_ensemble
from ..solver import SolverConfig, SolverError, detect_activity, solve
from . import metrics

log = logging.getLogger(__name__)

CSV_HEADER = ("solver,sweep_var,sweep_val,trials,aer_mean,miss_rate,fa_rate,"
              "nmse_paper,nmse_std,time_mean_s,failures")
SEED_STRIDE = 0x9E3779B9
SOLVERS = ("mras", "fista", "gomp")
SWEEP_VARS = ("B_p", "M_p", "p", "snr_db")

FULL_SCALE = {"M": 64, "B": 1300, "D": 64}


class ConfigError(ValueError):
    pass


@dataclass
class ExperimentConfig:
    """Sweep definition. ``sweep_var`` names the field replaced by each entry
    of ``sweep_vals``; the scalar value of that field is ignored.

    ``nu_rel`` and ``refine_nu_rel`` are MRAS penalty weights relative to the
    number of measurements ``M_p * B_p``. ``fista_fracs`` is the grid of
    lasso weights, as fractions of ``lambda_max``, from which the FISTA
    weight with the best mean NMSE is reported at each sweep point.
    """

    M: int = 32
    B: int = 256
    D: int = 32
    N: int = 20
    K: int = 6
    L_max: int = 2
    p: int = 2
    M_p: int = 16
    B_p: int = 32
    snr_db: float = 25.0
    trials: int = 50
    seed: int = 0
    sweep_var: str = "B_p"
    sweep_vals: tuple = (8, 16, 32, 64)
    solvers: tuple = SOLVERS
    out_dir: str = "results"
    nu_rel: float = 0.03
    rho: float = 1000.0
    max_iters: int = 250
    refine_iters: int = 120
    refine_nu_rel: float = 0.003
    v1: float = 0.1
    fista_fracs: tuple = (0.001, 0.003, 0.01, 0.03, 0.1, 0.3, 1.0)
    fista_iters: int = 300
    workers: int = 1

    def __post_init__(self):
        self.sweep_vals = tuple(self.sweep_vals)
        self.solvers = tuple(self.solvers)
        self.fista_fracs = tuple(self.fista_fracs)
        if not 0 <= self.K <= self.N:
            raise ConfigError(f"need 0 <= K <= N, got K={self.K}, N={self.N}")
        if self.trials < 1:
            raise ConfigError("trials must be >= 1")
        if not self.sweep_vals:
            raise ConfigError("sweep list is empty")
        if self.sweep_var not in SWEEP_VARS:
            raise ConfigError(f"sweep_var must be one of {SWEEP_VARS}")
        bad = set(self.solvers) - set(SOLVERS)
        if bad or not self.solvers:
            raise ConfigError(f"unknown solvers {sorted(bad)}; choose from {SOLVERS}")
        if not self.fista_fracs:
            raise ConfigError("fista_fracs is empty")
        if not 1 <= self.D <= self.B:
            raise ConfigError(f"need 1 <= D <= B, got D={self.D}, B={self.B}")

    def check_points(self):
        """Raise ConfigError if any sweep point has infeasible dimensions."""
        for v in self.sweep_vals:
            dims = {"M_p": self.M_p, "B_p": self.B_p, "p": self.p}
            if self.sweep_var in dims:
                dims[self.sweep_var] = v
            if not 1 <= dims["M_p"] <= self.M:
                raise ConfigError(f"M_p = {dims['M_p']} must lie in [1, M = {self.M}]")
            if not 1 <= dims["B_p"] <= self.B:
                raise ConfigError(f"B_p = {dims['B_p']} must lie in [1, B = {self.B}]")
            if dims["p"] < 1 or dims["p"] * self.L_max > min(self.M, self.D):
                raise ConfigError(f"{self.L_max} clusters of width p = {dims['p']} do not fit "
                                  f"in {self.M} x {self.D}")

    def point(self, val) -> "ExperimentConfig":
        """Copy with the swept field set to ``val``."""
        cast = float if self.sweep_var == "snr_db" else int
        return replace(self, **{self.sweep_var: cast(val)})

    def solver_config(self) -> SolverConfig:
        scale = self.M_p * self.B_p
        return SolverConfig(nu=self.nu_rel * scale, rho=self.rho, L_max=self.L_max,
                            max_iters=self.max_iters, refine_iters=self.refine_iters,
                            refine_nu=self.refine_nu_rel * scale, v1=self.v1)


def _parse_value(raw: str, kind):
    raw = raw.strip()
    if kind is tuple:
        items = [s.strip() for s in raw.split(",") if s.strip()]
        out = []
        for s in items:
            try:
                out.append(int(s))
            except ValueError:
                try:
                    out.append(float(s))
                except ValueError:
                    out.append(s)
        return tuple(out)
    if kind is int:
        return int(raw)
    if kind is float:
        return float(raw)
    return raw


_FIELD_KINDS = {"M": int, "B": int, "D": int, "N": int, "K": int, "L_max": int, "p": int,
                "M_p": int, "B_p": int, "snr_db": float, "trials": int, "seed": int,
                "sweep_var": str, "sweep_vals": tuple, "solvers": tuple, "out_dir": str,
                "nu_rel": float, "rho": float, "max_iters": int, "refine_iters": int,
                "refine_nu_rel": float, "v1": float, "fista_fracs": tuple,
                "fista_iters": int, "workers": int}
assert set(_FIELD_KINDS) == {f.name for f in fields(ExperimentConfig)}


def parse_overrides(pairs: dict) -> dict:
    """Convert string values to field types; unknown keys raise ConfigError."""
    out = {}
    for key, raw in pairs.items():
        if key not in _FIELD_KINDS:
            raise ConfigError(f"unknown config key {key!r}")
        try:
            out[key] = _parse_value(str(raw), _FIELD_KINDS[key])
        except ValueError as exc:
            raise ConfigError(f"bad value for {key}: {raw!r}") from exc
    return out


def read_config_file(path) -> dict:
    """Read ``key = value`` lines. ``#`` starts a comment; lists are comma separated."""
    pairs = {}
    for lineno, line in enumerate(Path(path).read_text().splitlines(), 1):
        line = line.split("#", 1)[0].strip()
        if not line:
            continue
        if "=" not in line:
            raise ConfigError(f"{path}:{lineno}: expected key=value")
        key, val = (s.strip() for s in line.split("=", 1))
        pairs[key] = val
    return parse_overrides(pairs)


def load_config(path=None, **overrides) -> ExperimentConfig:
    values = read_config_file(path) if path is not None else {}
    values.update({k: v for k, v in overrides.items() if v is not None})
    return ExperimentConfig(**values)


def trial_seed(base: int, i: int) -> int:
    return (base + i * SEED_STRIDE) % 2**63


@dataclass
class TrialResult:
    solver: str
    aer: float = math.nan
    miss: float = math.nan
    fa: float = math.nan
    nmse: float = math.nan
    nmse_std: float = math.nan
    time_s: float = 0.0
    iterations: int = 0
    failed: bool = False
    # FISTA only: one entry per fraction of lambda_max
    by_lam: dict = field(default_factory=dict)


def make_instance(cfg: ExperimentConfig, seed: int):
    """Channel population, ensemble and noisy measurements for one trial."""
    ss = np.random.SeedSequence(seed)
    s_ch, s_ens, s_noise = (int(c.generate_state(1, np.uint64)[0] % 2**63) for c in ss.spawn(3))
    dicts = build_dictionaries(cfg.M, cfg.B, cfg.D / cfg.B)
    pop = synthesize_population(np.random.default_rng(s_ch), cfg.N, cfg.K, cfg.M, cfg.D,
                                cfg.L_max, cfg.p)
    ens = generate_ensemble(s_ens, cfg.M, cfg.B, cfg.D, cfg.N, cfg.M_p, cfg.B_p, dicts)
    Y, _ = add_noise(np.random.default_rng(s_noise), forward(ens, pop.blocks), cfg.snr_db)
    return pop, ens, Y


def _score(name, pop, ens, blocks, detected, N) -> TrialResult:
    H = ens.dicts.to_physical(pop.blocks)
    Hh = ens.dicts.to_physical(blocks)
    return TrialResult(solver=name, aer=metrics.aer(pop.support, detected, N),
                       miss=metrics.miss_rate(pop.support, detected),
                       fa=metrics.false_alarm_rate(pop.support, detected, N),
                       nmse=metrics.nmse(H, Hh), nmse_std=metrics.nmse_standard(H, Hh))


_FAILURES = (SolverError, BaselineError, RankDeficiencyError, np.linalg.LinAlgError, FloatingPointError)


def _run_solver(name, cfg, pop, ens, Y) -> TrialResult:
    t0 = time.perf_counter()
    if name == "mras":
        res = solve(ens, Y, cfg.solver_config())
        out = _score(name, pop, ens, res.blocks, res.detected, cfg.N)
        out.iterations = res.iterations
    elif name == "gomp":
        res = gomp_solve(ens, Y, BaselineConfig(omp_max_groups=cfg.K))
        out = _score(name, pop, ens, res.blocks, detect_activity(res, cfg.v1), cfg.N)
        out.iterations = res.iterations
    else:
        lm = lambda_max(ens, Y)
        path = fista_path(ens, Y, [f * lm for f in cfg.fista_fracs],
                          BaselineConfig(max_iters=cfg.fista_iters, tol=1e-5))
        out = TrialResult(solver=name)
        for frac, res in zip(sorted(cfg.fista_fracs, reverse=True), path):
            r = _score(name, pop, ens, res.blocks, detect_activity(res, cfg.v1), cfg.N)
            r.iterations = res.iterations
            out.by_lam[frac] = r
    out.time_s = time.perf_counter() - t0
    return out


def run_trial(cfg: ExperimentConfig, i: int) -> list:
    """All selected solvers on trial ``i``; a solver that aborts is marked failed."""
    pop, ens, Y = make_instance(cfg, trial_seed(cfg.seed, i))
    results = []
    for name in cfg.solvers:
        try:
            results.append(_run_solver(name, cfg, pop, ens, Y))
        except _FAILURES as exc:
            log.warning("trial %d: %s aborted: %s", i, name, exc)
            results.append(TrialResult(solver=name, failed=True))
    return results


def _mean(xs):
    xs = [x for x in xs if math.isfinite(x)]
    return float(np.mean(xs)) if xs else math.nan


def _select_score(values) -> float:
    # an all-zero estimate on any trial disqualifies that lambda
    vals = np.asarray(values, dtype=float)
    return math.inf if np.isnan(vals).any() else float(vals.mean())


def aggregate(name: str, trials: list) -> dict:
    """Means over non-failed trials. NMSE means skip undefined (all-zero) estimates."""
    ok = [t for t in trials if not t.failed]
    row = {"solver": name, "trials": len(trials), "failures": len(trials) - len(ok)}
    if name == "fista" and ok:
        fracs = ok[0].by_lam.keys()
        best = min(fracs, key=lambda f: (_select_score([t.by_lam[f].nmse for t in ok]), f))
        picked = [t.by_lam[best] for t in ok]
        row["lam_frac"] = best
    else:
        picked = ok
    row.update(aer_mean=_mean([t.aer for t in picked]), miss_rate=_mean([t.miss for t in picked]),
               fa_rate=_mean([t.fa for t in picked]), nmse_paper=_mean([t.nmse for t in picked]),
               nmse_std=_mean([t.nmse_std for t in picked]),
               time_mean_s=_mean([t.time_s for t in ok]),
               iters_mean=_mean([t.iterations for t in picked]))
    return row


def _fmt(x) -> str:
    if isinstance(x, float):
        return "nan" if math.isnan(x) else repr(round(x, 10))
    return str(x)


def format_rows(rows: list, record_time: bool = False) -> str:
    """CSV text. Without ``record_time`` the wall-clock column is left empty so
    the file depends only on the configuration."""
    buf = io.StringIO()
    buf.write(CSV_HEADER + "\n")
    w = csv.writer(buf, lineterminator="\n")
    for r in rows:
        t = _fmt(r["time_mean_s"]) if record_time else ""
        w.writerow([r["solver"], r["sweep_var"], _fmt(r["sweep_val"]), r["trials"],
                    _fmt(r["aer_mean"]), _fmt(r["miss_rate"]), _fmt(r["fa_rate"]),
                    _fmt(r["nmse_paper"]), _fmt(r["nmse_std"]), t, r["failures"]])
    return buf.getvalue()


def run_point(cfg: ExperimentConfig, val, progress=None) -> list:
    """Aggregated rows (one per solver) at one sweep value."""
    pcfg = cfg.point(val)
    idx = range(cfg.trials)
    if cfg.workers > 1:
        with ProcessPoolExecutor(cfg.workers) as pool:
            per_trial = list(pool.map(run_trial, [pcfg] * cfg.trials, idx))
    else:
        per_trial = []
        for i in idx:
            per_trial.append(run_trial(pcfg, i))
            if progress is not None:
                progress(cfg.sweep_var, val, i + 1, cfg.trials)
    rows = []
    for k, name in enumerate(cfg.solvers):
        row = aggregate(name, [t[k] for t in per_trial])
        row.update(sweep_var=cfg.sweep_var, sweep_val=val)
        rows.append(row)
    return rows


def run_sweep(cfg: ExperimentConfig, out_path=None, record_time: bool = False, progress=None) -> list:
    """Run every sweep point and optionally write the CSV. Returns the rows."""
    cfg.check_points()
    rows = []
    for val in cfg.sweep_vals:
        rows.extend(run_point(cfg, val, progress))
    if out_path is not None:
        out_path = Path(out_path)
        out_path.parent.mkdir(parents=True, exist_ok=True)
        out_path.write_text(format_rows(rows, record_time))
    return rows


def config_dump(cfg: ExperimentConfig) -> str:
    """``key = value`` text that :func:`read_config_file` reads back."""
    lines = []
    for k, v in asdict(cfg).items():
        if isinstance(v, (tuple, list)):
            v = ",".join(str(x) for x in v)
        lines.append(f"{k} = {v}")
    return "\n".join(lines) + "\n"
