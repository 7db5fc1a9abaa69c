"""Compare the compiled and pure-numpy kernel backends on the hot loops.

Usage::

    python3 benchmarks/bench_kernels.py [--repeat 5] [--json out.json]

Times full DP-SGDA runs on bilinear and PL games (the projected step loop)
and the pairwise AUC counter, and checks that both backends return the same
result before reporting a speedup.
"""

import argparse
import json
import platform
import timeit

import numpy as np

from dpsgda import _kernels
from dpsgda.core import RngStream
from dpsgda.optimizer import Constant, InverseTime, PowerTwoThirds, SgdaConfig, run_dpsgda
from dpsgda.privacy import NoiseScales
from dpsgda.problems import make_synthetic


def sgda_case(kind, n, d, T, m, **kw):
    prob = make_synthetic(kind, n, d, d, seed=0, **kw)
    if kind == "plsc":
        sched_w, sched_v = InverseTime(2.0, 1.0, cap=0.2), PowerTwoThirds(0.5, cap=0.5)
    else:
        sched_w = sched_v = Constant(0.05)
    cfg = SgdaConfig(T=T, m=m, schedule_w=sched_w, schedule_v=sched_v, noise=NoiseScales(0.1, 0.1))

    def run(backend):
        return run_dpsgda(prob, cfg, RngStream(1), backend=backend).output_w

    return f"sgda {kind} n={n} d={d} T={T} m={m}", run


def auc_case(n):
    gen = np.random.default_rng(0)
    pos, neg = np.round(gen.standard_normal(n), 2), np.round(gen.standard_normal(n), 2)

    def run(backend):
        return np.array(_kernels.get_backend(backend).auc_pair_counts(pos, neg))

    return f"auc_pair_counts {n}x{n}", run


CASES = [
    lambda: sgda_case("bilinear", 1000, 5, 20_000, 1),
    lambda: sgda_case("bilinear", 1000, 20, 20_000, 16, radius_w=2.0, radius_v=2.0),
    lambda: sgda_case("plsc", 1000, 10, 50_000, 4),
    lambda: auc_case(2000),
]


def best_of(fn, repeat):
    return min(timeit.repeat(fn, number=1, repeat=repeat))


def main(argv=None):
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--repeat", type=int, default=5)
    ap.add_argument("--json", help="also write results to this file")
    args = ap.parse_args(argv)
    try:
        _kernels.get_backend("compiled")
    except ImportError:
        raise SystemExit("compiled backend not built; run `pip install -e . --no-build-isolation` first")

    print(f"python {platform.python_version()}, numpy {np.__version__}, best of {args.repeat}")
    print(f"{'case':<48} {'python s':>10} {'compiled s':>11} {'speedup':>8}")
    results = []
    for make in CASES:
        name, run = make()
        a, b = run("python"), run("compiled")
        if not np.allclose(a, b, rtol=1e-10, atol=1e-12):
            raise SystemExit(f"{name}: backends disagree")
        tp = best_of(lambda: run("python"), args.repeat)
        tc = best_of(lambda: run("compiled"), args.repeat)
        results.append({"case": name, "python": tp, "compiled": tc, "speedup": tp / tc})
        print(f"{name:<48} {tp:>10.4f} {tc:>11.4f} {tp / tc:>7.1f}x")
    if args.json:
        with open(args.json, "w") as fh:
            json.dump(results, fh, indent=2)


if __name__ == "__main__":
    main()
