"""Recompute the frozen oracle values in ``frozen.json``.

Closed-form and brute-force oracles are evaluated here from first
principles (plain math, numpy brute force, sympy for the AUC fixture) and
do not touch the package's implementations. The ``regression`` block holds
pinned-seed reference runs of the package itself; rerun only on a
deliberate behaviour change.

    python tests/oracles/build_oracles.py [--regression]
"""

from __future__ import annotations

import argparse
import json
import math
from pathlib import Path

import numpy as np

HERE = Path(__file__).resolve().parent


def calibrate_sigma(G, T, n, eps, delta, c=8.0):
    return c * G * math.sqrt(T * math.log(1 / delta)) / (n * eps)


def moments_oracle(n, m, T, sigma_w, sigma_v, G_w, G_v, delta, grid=100_000):
    """Brute-force minimisation of (alpha(lam) + log(1/delta)) / lam on a lambda grid.

    Each stream with noise multiplier z = m sigma / (2 G) and sampling
    rate q = m / n contributes T q^2 lam^2 / z^2 to the log moment, valid
    for lam <= z^2 log(1/(q z)).
    """
    q = m / n
    zs = [m * sigma_w / (2 * G_w), m * sigma_v / (2 * G_v)]
    A = sum(T * q * q / (z * z) for z in zs)
    uppers = [z * z * math.log(1 / (q * z)) for z in zs if q * z < 1]
    if len(uppers) < 2:
        return {"epsilon": math.inf}
    upper = min(uppers)
    lam = np.linspace(upper / grid, upper, grid)
    vals = (A * lam**2 + math.log(1 / delta)) / lam
    k = int(np.argmin(vals))
    return {"epsilon": float(vals[k]), "lam": float(lam[k]), "upper": upper, "A": A,
            "z_w": zs[0], "z_v": zs[1]}


def auc_fixture():
    import sympy as sp

    th1, th2, a, b, v = sp.symbols("th1 th2 a b v")
    X = [(1, 5), (3, -1), (0, 2), (2, 7)]
    y = [1, 1, -1, -1]
    n, npos, nneg = 4, 2, 2
    wp, wn, kap = sp.Rational(1, npos), sp.Rational(1, nneg), sp.Rational(1, n)
    point = {th1: 1, th2: 0, a: sp.Rational(1, 2), b: sp.Rational(-1, 4), v: sp.Rational(3, 10)}
    grads = []
    total = 0
    for (x1, x2), yi in zip(X, y):
        h = th1 * x1 + th2 * x2
        if yi == 1:
            f = wp * (h - a) ** 2 - 2 * (1 + v) * wp * h - kap * v**2
        else:
            f = wn * (h - b) ** 2 + 2 * (1 + v) * wn * h - kap * v**2
        total += f
        gw = [float(sp.diff(f, s).subs(point)) for s in (th1, th2, a, b)]
        grads.append({"g_w": gw, "g_v": float(sp.diff(f, v).subs(point))})
    F = total / n
    # dual maximiser by 1-D grid search at theta=(1,0): scores pos {1,3}, neg {0,2}
    Fv = sp.lambdify(v, F.subs({th1: 1, th2: 0, a: sp.Rational(1, 2), b: sp.Rational(-1, 4)}))
    grid = np.linspace(-5, 5, 100_001)
    v_star = float(grid[int(np.argmax(Fv(grid)))])
    return {"X": X, "y": y, "point": {"theta": [1.0, 0.0], "a": 0.5, "b": -0.25, "v": 0.3},
            "per_example": grads, "value": float(F.subs(point)), "v_star_grid": v_star}


def population_gap_fixture():
    """Primal risk of the AUC fixture split into a train half {0, 2} and a test half {1, 3}."""
    import sympy as sp

    v = sp.symbols("v")
    X = [(1, 5), (3, -1), (0, 2), (2, 7)]
    y = [1, 1, -1, -1]
    theta, a, b = (1, 0), sp.Rational(1, 2), sp.Rational(-1, 4)

    def risk(idx):
        n = len(idx)
        npos = sum(y[i] == 1 for i in idx)
        nneg = n - npos
        F = 0
        for i in idx:
            h = theta[0] * X[i][0] + theta[1] * X[i][1]
            if y[i] == 1:
                F += sp.Rational(1, npos) * ((h - a) ** 2 - 2 * (1 + v) * h)
            else:
                F += sp.Rational(1, nneg) * ((h - b) ** 2 + 2 * (1 + v) * h)
            F -= sp.Rational(1, n) * v**2
        F = F / n
        v_star = sp.solve(sp.diff(F, v), v)[0]
        return F.subs(v, v_star)

    train, test = risk([0, 2]), risk([1, 3])
    return {"train_idx": [0, 2], "test_idx": [1, 3], "train_risk": float(train),
            "test_risk": float(test), "gap": float(test - train)}


def gaussian_stats(seed=2024, dim=100_000, sigma=2.0):
    gen = np.random.Generator(np.random.PCG64(np.random.SeedSequence(seed, spawn_key=())))
    x = sigma * gen.standard_normal(dim)
    return {"seed": seed, "dim": dim, "sigma": sigma, "mean": float(x.mean()), "var": float(x.var(ddof=1))}


def closed_form() -> dict:
    out = {}
    out["calibrate_sigma"] = calibrate_sigma(1.0, 100, 10_000, 1.0, 1e-6)
    s = out["calibrate_sigma"]
    q, z = 500 / 10_000, 500 * s / 2
    out["calibrate_alpha_at_4"] = 2 * 100 * q * q * 16 / (z * z)
    out["calibrate_interval_upper"] = z * z * math.log(1 / (q * z))
    s1 = calibrate_sigma(1.0, 100, 10_000, 1.0, 1e-8)
    out["small_eps_sigma"] = s1
    out["small_eps"] = moments_oracle(10_000, 500, 100, s1, s1, 1.0, 1.0, 1e-8)
    out["small_eps_halved"] = moments_oracle(10_000, 500, 100, s1 / 2, s1 / 2, 1.0, 1.0, 1e-8)
    L = math.log(1e6)
    out["cc_smooth_eta"] = 1 / max(32.0, math.sqrt(4 * L))
    out["cc_smooth_eta_eps001"] = 1 / (math.sqrt(4 * L) / 0.01)
    out["cc_nonsmooth_eta"] = 1 / (100 * max(10.0, math.sqrt(4 * L)))
    out["plsc_v_prefactor_kappa2"] = 2 * 2**2.5
    out["auc_fixture"] = auc_fixture()
    out["auc_score_fixture"] = {"pos": [0.9, 0.4], "neg": [0.5, 0.1], "auc": 3 / 4}
    out["population_gap_fixture"] = population_gap_fixture()
    out["gaussian"] = gaussian_stats()
    return out


def regression() -> dict:
    from dpsgda.cli.config import resolve
    from dpsgda.cli.commands import cmd_run
    from dpsgda.metrics import stability_probe
    from dpsgda.optimizer import Constant, SgdaConfig
    from dpsgda.problems import neighbor_pair
    import tempfile

    cfg = SgdaConfig(T=256, m=1, schedule_w=Constant(0.05), schedule_v=Constant(0.05), seed=0)
    rep = stability_probe(lambda k, r: neighbor_pair("bilinear", 256, 5, 5, seed=100 + k)[int(r)], 0, cfg, 5)
    run_cfg = resolve({
        "problem": {"kind": "auc", "source": "synthetic", "n": 1000, "dim": 22, "separation": 2.0, "seed": 3},
        "schedule": {"kind": "explicit", "eta_w": 20.0, "eta_v": 20.0},
        "run": {"batch": 16, "epochs": 5, "seeds": [0, 1, 2, 3, 4], "metrics": ["auc"]},
    }, environ={})
    with tempfile.TemporaryDirectory() as tmp:
        rows = cmd_run(run_cfg, Path(tmp))
    return {"stability_bilinear_n256_T256": rep.mean_distance,
            "cmd_run_linear_auc_mean": float(np.mean([r.value for r in rows])),
            "cmd_run_config": run_cfg}


def main():
    ap = argparse.ArgumentParser()
    ap.add_argument("--regression", action="store_true", help="also refresh pinned package runs")
    args = ap.parse_args()
    path = HERE / "frozen.json"
    frozen = json.loads(path.read_text()) if path.exists() else {}
    frozen["closed_form"] = closed_form()
    if args.regression or "regression" not in frozen:
        frozen["regression"] = regression()
    path.write_text(json.dumps(frozen, indent=2, sort_keys=True) + "\n")


if __name__ == "__main__":
    main()
