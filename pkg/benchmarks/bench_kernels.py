"""Compare the compiled kernels with the numpy fallback.

    python benchmarks/bench_kernels.py --sizes 1000,20480,204800

Prints one CSV row per (kernel, size) with the median time of each backend
and the speed-up. The default sizes bracket one device block (32 x 32), the
full desk-scale state (20 x 32 x 32) and ten times that.
"""

import argparse
import sys
import timeit

import numpy as np

from jadce import _kernels_py

try:
    from jadce import _kernels as _kernels_c
except ImportError:
    _kernels_c = None

KERNELS = {
    "smoothed_abs": lambda impl, z: impl.smoothed_abs(z, 1000.0),
    "penalty": lambda impl, z: impl.penalty(z, 1000.0),
    "soft_threshold": lambda impl, z: impl.soft_threshold(z, 1.0),
}


def median_time(fn, repeats, number):
    return float(np.median(timeit.repeat(fn, repeat=repeats, number=number))) / number


def run(sizes, repeats=7, number=20, seed=0):
    rng = np.random.default_rng(seed)
    rows = []
    for n in sizes:
        z = rng.standard_normal(n) + 1j * rng.standard_normal(n)
        for name, call in KERNELS.items():
            t_py = median_time(lambda: call(_kernels_py, z), repeats, number)
            t_c = median_time(lambda: call(_kernels_c, z), repeats, number)
            rows.append((name, n, t_py, t_c, t_py / t_c))
    return rows


def main(argv=None):
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--sizes", default="1024,20480,204800",
                    help="comma-separated element counts")
    ap.add_argument("--repeats", type=int, default=7)
    ap.add_argument("--number", type=int, default=20, help="calls per timing sample")
    args = ap.parse_args(argv)
    if _kernels_c is None:
        print("compiled extension not built; run `pip install --no-build-isolation -e .`",
              file=sys.stderr)
        return 1
    sizes = [int(s) for s in args.sizes.split(",") if s.strip()]
    print("kernel,size,python_s,cython_s,speedup")
    for name, n, t_py, t_c, sp in run(sizes, args.repeats, args.number):
        print(f"{name},{n},{t_py:.3e},{t_c:.3e},{sp:.2f}")
    return 0


if __name__ == "__main__":
    sys.exit(main())
