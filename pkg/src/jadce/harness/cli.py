"""Command line entry point: ``jadce {generate,solve,sweep,bench,plot,rip}``."""

from __future__ import annotations

import argparse
import json
import logging
import sys
from dataclasses import replace
from pathlib import Path

import numpy as np

from ..channel import ChannelRealization, load_channels, save_channels
from ..sensing import SensingEnsemble, SGLProfile, add_noise, forward, rip_probe, RipSummary
from ..solver import PROGRESS_HEADER, solve
from . import experiments as ex
from .bench import bench_scaling, fit_slopes, format_bench
from .plots import PlotError, emit_plots


def _add_config_flags(p):
    p.add_argument("--config", help="key=value file; flags given here override it")
    p.add_argument("--full-scale", action="store_true", help="M=64, B=1300, D=64")
    for name, kind in ex._FIELD_KINDS.items():
        if name == "seed":
            continue
        meta = "A,B,..." if kind is tuple else None
        p.add_argument(f"--{name}", default=None, metavar=meta)


def _config(args, **extra) -> ex.ExperimentConfig:
    raw = {k: getattr(args, k) for k in ex._FIELD_KINDS if getattr(args, k, None) is not None}
    over = ex.parse_overrides(raw)
    if args.full_scale:
        over = {**ex.FULL_SCALE, **over}
    over.update(extra)
    return ex.load_config(args.config, **over)


def cmd_generate(args):
    cfg = _config(args, seed=args.seed)
    pop, ens, Y = ex.make_instance(cfg, ex.trial_seed(cfg.seed, 0))
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    save_channels(out / "channels.csv", pop.blocks, cfg.L_max)
    desc = ens.describe()
    (out / "ensemble.txt").write_text("".join(f"{k} = {v}\n" for k, v in desc.items()))
    (out / "config.txt").write_text(ex.config_dump(cfg))
    print(f"wrote {out}/channels.csv, ensemble.txt, config.txt; active = {sorted(pop.support)}")
    return 0


def _read_ensemble(path) -> SensingEnsemble:
    desc = {}
    for line in Path(path).read_text().splitlines():
        if "=" in line:
            k, v = (s.strip() for s in line.split("=", 1))
            desc[k] = float(v) if k == "gamma" else int(v)
    return SensingEnsemble.from_description(desc)


def cmd_solve(args):
    cfg = _config(args, seed=args.seed)
    if args.channels or args.ensemble:
        if not (args.channels and args.ensemble):
            print("error: --channels and --ensemble go together", file=sys.stderr)
            return 2
        blocks, _ = load_channels(args.channels)
        ens = _read_ensemble(args.ensemble)
        Y, _ = add_noise(np.random.default_rng(cfg.seed), forward(ens, blocks), cfg.snr_db)
        active = np.linalg.norm(blocks, axis=(1, 2)) > 0
        pop = ChannelRealization(blocks=blocks, active=active, L=cfg.L_max, p=cfg.p)
        cfg = replace(cfg, N=ens.N, M=ens.M, D=ens.D, M_p=ens.M_p, B_p=ens.B_p,
                    K=int(active.sum()))
    else:
        pop, ens, Y = ex.make_instance(cfg, ex.trial_seed(cfg.seed, 0))
    if args.progress and "mras" in cfg.solvers:
        with open(args.progress, "w") as fh:
            fh.write(PROGRESS_HEADER + "\n")
            solve(ens, Y, cfg.solver_config(),
                  progress=lambda i, f, g, s: fh.write(f"{i},{f:.10e},{g:.10e},{s:.10e}\n"))
    print(f"true support: {sorted(pop.support)}")
    for name in cfg.solvers:
        try:
            r = ex._run_solver(name, cfg, pop, ens, Y)
        except ex._FAILURES as exc:
            print(f"{name}: aborted ({exc})")
            continue
        if name == "fista":
            frac = min(r.by_lam, key=lambda f: r.by_lam[f].nmse)
            r, name = r.by_lam[frac], f"fista(lam={frac:g}*lam_max)"
        print(f"{name}: aer={r.aer:.3f} miss={r.miss:.3f} fa={r.fa:.3f} "
              f"nmse={r.nmse:.4g} nmse_std={r.nmse_std:.4g} iters={r.iterations}")
    return 0


def cmd_sweep(args):
    cfg = _config(args, seed=args.seed)
    out = Path(args.out) if args.out else Path(cfg.out_dir) / f"sweep_{cfg.sweep_var}.csv"

    def progress(var, val, done, total):
        if not args.quiet:
            print(f"\r{var}={val}: trial {done}/{total}", end="", file=sys.stderr, flush=True)

    rows = ex.run_sweep(cfg, out, record_time=args.record_time, progress=progress)
    if not args.quiet:
        print(file=sys.stderr)
    for r in rows:
        print(f"{r['solver']:6s} {r['sweep_var']}={r['sweep_val']:<6g} aer={r['aer_mean']:.3f} "
              f"nmse={r['nmse_paper']:.4g} failures={r['failures']}")
    print(f"wrote {out}")
    return 0


def _int_list(s):
    return [int(v) for v in s.split(",") if v.strip()]


def cmd_bench(args):
    base = {"M_p": args.M_p, "B_p": args.B_p, "D": args.D, "N": args.N}
    grid = {d: _int_list(v) for d, v in (x.split("=", 1) for x in args.grid)}
    for d in grid:
        if d not in base:
            print(f"error: unknown dimension {d!r}", file=sys.stderr)
            return 2
    rows = bench_scaling(grid, base, iters=args.iters, repeats=args.repeats)
    text = format_bench(rows)
    if args.out:
        Path(args.out).write_text(text)
    print(text, end="")
    print("slopes:", json.dumps({k: round(v, 3) for k, v in fit_slopes(rows).items()}))
    return 0


def cmd_plot(args):
    try:
        paths = emit_plots(args.csv, args.out_dir)
    except (PlotError, OSError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1
    for p in paths:
        print(p)
    return 0


def cmd_rip(args):
    cfg = _config(args, seed=args.seed)
    profile = SGLProfile(u=args.u, r=args.r, p_min=cfg.p, p_max=cfg.p, L_min=1, L_max=cfg.L_max)
    lines = [RipSummary.CSV_HEADER]
    for Mp, Bp in zip(_int_list(args.mp), _int_list(args.bp)):
        _, ens, _ = ex.make_instance(replace(cfg, M_p=Mp, B_p=Bp), cfg.seed)
        s = rip_probe(np.random.default_rng(cfg.seed), ens, profile, cfg.trials)
        lines.append(s.csv_row())
    text = "\n".join(lines) + "\n"
    if args.out:
        Path(args.out).write_text(text)
    print(text, end="")
    return 0


def build_parser() -> argparse.ArgumentParser:
    ap = argparse.ArgumentParser(prog="jadce", description="Joint activity detection and "
                                 "channel estimation experiments.")
    ap.add_argument("-v", "--verbose", action="store_true")
    sub = ap.add_subparsers(dest="cmd", required=True)

    p = sub.add_parser("generate", help="write a channel file and an ensemble description")
    _add_config_flags(p)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--out", default="instance")
    p.set_defaults(func=cmd_generate)

    p = sub.add_parser("solve", help="run the solvers on one instance and print metrics")
    _add_config_flags(p)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--channels", help="channel CSV written by generate")
    p.add_argument("--ensemble", help="ensemble description written by generate")
    p.add_argument("--progress", help="write MRAS per-iteration CSV here")
    p.set_defaults(func=cmd_solve)

    p = sub.add_parser("sweep", help="Monte-Carlo sweep to CSV")
    _add_config_flags(p)
    p.add_argument("--seed", type=int, required=True)
    p.add_argument("--out", help="CSV path (default OUT_DIR/sweep_VAR.csv)")
    p.add_argument("--record-time", action="store_true",
                   help="fill time_mean_s (the file is then no longer reproducible byte for byte)")
    p.add_argument("-q", "--quiet", action="store_true")
    p.set_defaults(func=cmd_sweep)

    p = sub.add_parser("bench", help="per-iteration timing and log-log slopes")
    p.add_argument("--grid", nargs="+", default=["N=20,40,80,160", "B_p=256,512,1024,2048"],
                   metavar="DIM=V1,V2,...")
    p.add_argument("--M_p", type=int, default=16)
    p.add_argument("--B_p", type=int, default=256)
    p.add_argument("--D", type=int, default=32)
    p.add_argument("--N", type=int, default=40)
    p.add_argument("--iters", type=int, default=10)
    p.add_argument("--repeats", type=int, default=3)
    p.add_argument("--out")
    p.set_defaults(func=cmd_bench)

    p = sub.add_parser("plot", help="SVG charts from a sweep CSV")
    p.add_argument("csv")
    p.add_argument("--out-dir", default="plots")
    p.set_defaults(func=cmd_plot)

    p = sub.add_parser("rip", help="empirical isometry constants to CSV")
    _add_config_flags(p)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--mp", default="16,16,16")
    p.add_argument("--bp", default="16,32,64")
    p.add_argument("--u", type=int, default=2)
    p.add_argument("--r", type=int, default=2)
    p.add_argument("--out")
    p.set_defaults(func=cmd_rip)
    return ap


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s")
    try:
        return args.func(args)
    except (ex.ConfigError, ValueError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2


if __name__ == "__main__":
    sys.exit(main())
