import numpy as np
import pytest

from jadce.channel import load_channels
from jadce.harness.cli import main

SMALL = ["--M", "8", "--B", "32", "--D", "8", "--N", "6", "--K", "2", "--L_max", "1", "--p", "1",
         "--M_p", "8", "--B_p", "16", "--max_iters", "20", "--refine_iters", "0",
         "--fista_iters", "30", "--fista_fracs", "0.01,0.1"]


def test_sweep_requires_seed(capsys):
    with pytest.raises(SystemExit):
        main(["sweep", "--trials", "1"])
    assert "--seed" in capsys.readouterr().err


def test_generate_then_solve(tmp_path, capsys):
    inst = tmp_path / "inst"
    assert main(["generate", "--seed", "4", "--out", str(inst)] + SMALL) == 0
    blocks, L_max = load_channels(inst / "channels.csv")
    assert blocks.shape == (6, 8, 8) and L_max == 1
    assert (inst / "ensemble.txt").read_text().startswith("seed = ")
    prog = tmp_path / "prog.csv"
    rc = main(["solve", "--seed", "4", "--channels", str(inst / "channels.csv"),
               "--ensemble", str(inst / "ensemble.txt"), "--progress", str(prog)] + SMALL)
    assert rc == 0
    out = capsys.readouterr().out
    assert "mras: aer=" in out and "gomp: aer=" in out and "fista(lam=" in out
    lines = prog.read_text().splitlines()
    assert lines[0] == "iter,objective,grad_norm,step"
    assert len(lines[1].split(",")) == 4


def test_solve_needs_both_files(tmp_path, capsys):
    assert main(["solve", "--channels", "x.csv"] + SMALL) == 2


def test_sweep_deterministic_and_plot(tmp_path, capsys):
    args = ["sweep", "--seed", "11", "--trials", "1", "--sweep_vals", "12,16", "-q"] + SMALL
    a, b = tmp_path / "a.csv", tmp_path / "b.csv"
    assert main(args + ["--out", str(a)]) == 0
    assert main(args + ["--out", str(b)]) == 0
    assert a.read_bytes() == b.read_bytes()
    assert main(["plot", str(a), "--out-dir", str(tmp_path / "svg")]) == 0
    assert sorted(p.name for p in (tmp_path / "svg").iterdir()) == ["aer_vs_B_p.svg", "nmse_vs_B_p.svg"]


def test_config_file(tmp_path, capsys):
    cfg = tmp_path / "desk.cfg"
    cfg.write_text("M = 8\nB = 32\nD = 8\nN = 6\nK = 2\nL_max = 1\np = 1\nM_p = 8\n"
                   "trials = 1\nsolvers = gomp\nsweep_vals = 16\n")
    out = tmp_path / "s.csv"
    assert main(["sweep", "--seed", "1", "--config", str(cfg), "--out", str(out), "-q"]) == 0
    rows = out.read_text().splitlines()
    assert len(rows) == 2 and rows[1].startswith("gomp,B_p,16,1,")


def test_bad_config_value(capsys):
    assert main(["sweep", "--seed", "1"] + SMALL + ["--K", "99"]) == 2
    assert "K <= N" in capsys.readouterr().err
    assert main(["sweep", "--seed", "1"] + SMALL + ["--sweep_vals", "16,64"]) == 2
    assert "B_p = 64" in capsys.readouterr().err


def test_plot_error_exit(tmp_path, capsys):
    bad = tmp_path / "bad.csv"
    bad.write_text("")
    assert main(["plot", str(bad)]) == 1


def test_bench_single_point(capsys):
    assert main(["bench", "--grid", "N=4", "--M_p", "4", "--B_p", "8", "--D", "4",
                 "--iters", "2", "--repeats", "1"]) == 0
    out = capsys.readouterr().out.splitlines()
    assert out[0] == "dim,value,M_p,B_p,D,N,sec_per_iter"
    assert out[1].startswith("N,4,4,8,4,4,")


def test_rip_csv(tmp_path, capsys):
    out = tmp_path / "rip.csv"
    assert main(["rip", "--trials", "20", "--mp", "4,8", "--bp", "8,8", "--u", "1", "--r", "1",
                 "--p", "1", "--L_max", "1", "--M", "8", "--B", "16", "--D", "4", "--N", "4",
                 "--K", "1", "--out", str(out)]) == 0
    lines = out.read_text().splitlines()
    assert lines[0] == "trials,u,r,Bp,Mp,mean_rho,max_dev,tail_frac"
    assert [l.split(",")[3:5] for l in lines[1:]] == [["8", "4"], ["8", "8"]]
