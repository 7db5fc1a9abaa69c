"""Turning a resolved config into problems, run settings and result rows."""

from __future__ import annotations

import copy
import json
import math
from dataclasses import dataclass

import numpy as np

from .. import data as data_mod
from .. import metrics as met
from ..core import ContractViolation, RngStream
from ..optimizer import (
    Constant,
    DivergenceError,
    SgdaConfig,
    run_dpsgda,
    schedule_cc_nonsmooth,
    schedule_cc_smooth,
    schedule_plsc_steps,
)
from ..privacy import MechanismParams, NoiseScales, PrivacyBudget, calibrate_noise, default_batch_size, verify_budget
from ..problems import AucProblem, NoClosedForm, estimate_constants, make_synthetic, neighbor_pair
from .artifacts import SCHEMA_VERSION, ResultRow
from .config import ConfigError

SYNTHETIC_KEYS = ("noise", "coupling", "mu_reg", "rho_reg", "radius_w", "radius_v", "s_min", "s_max", "w_star_norm")
DEFAULT_METRIC = {"bilinear": "weak_pd_gap", "plsc": "excess_primal", "auc": "auc"}

_PROBLEM_CACHE: dict = {}
_CONSTANTS_CACHE: dict = {}


def _require(table: dict, key: str, where: str):
    if key not in table:
        raise ConfigError(f"{where}.{key} is required")
    return table[key]


def _load_source(prob: dict):
    source = prob.get("source", "synthetic")
    if source == "synthetic":
        ds = data_mod.make_binary_dataset(int(_require(prob, "n", "problem")), int(_require(prob, "dim", "problem")),
                                          seed=int(prob["seed"]), separation=float(prob.get("separation", 1.0)),
                                          pos_fraction=float(prob.get("pos_fraction", 0.3)))
        return ds, None
    if source == "libsvm":
        train = data_mod.parse_libsvm(_require(prob, "train_path", "problem"))
        test = data_mod.parse_libsvm(prob["test_path"]) if prob.get("test_path") else None
        if test is not None and test.dim != train.dim:
            dim = max(train.dim, test.dim)
            train, test = _pad(train, dim), _pad(test, dim)
        return train, test
    if source == "idx":
        train = data_mod.load_idx_dataset(_require(prob, "train_images", "problem"),
                                          _require(prob, "train_labels", "problem"))
        test = None
        if prob.get("test_images"):
            test = data_mod.load_idx_dataset(prob["test_images"], _require(prob, "test_labels", "problem"))
        return train, test
    raise ConfigError(f"problem.source must be 'synthetic', 'libsvm' or 'idx', got {source!r}")


def _pad(ds, dim):
    if ds.dim == dim:
        return ds
    X = np.zeros((len(ds), dim))
    X[:, : ds.dim] = ds.X
    return data_mod.Dataset(X, ds.y, ds.meta)


def _prepare_auc(prob: dict):
    train, test = _load_source(prob)
    labels = set(np.unique(np.concatenate([train.y, test.y]) if test is not None else train.y).tolist())
    if not labels <= {-1, 1}:
        positive = prob.get("positive")
        pseed = int(prob.get("partition_seed", prob["seed"]))
        train = data_mod.binarize_labels(train, positive=positive, seed=pseed)
        if test is not None:
            test = data_mod.binarize_labels(test, positive=train.meta["partition"]["positive"],
                                            negative=train.meta["partition"]["negative"])
    if test is None:
        train, test = data_mod.split(train, float(prob.get("train_fraction", 0.8)), int(prob.get("split_seed", prob["seed"])))
    mode = prob.get("normalize", "none")
    if mode != "none":
        train, transform = data_mod.normalize(train, mode)
        test = transform.apply(test)
    kw = dict(scorer=prob.get("scorer", "linear"), hidden=int(prob.get("hidden", 256)),
              leak=float(prob.get("leak", 0.01)), weighting=prob.get("weighting", "paper"),
              radius_w=float(prob.get("radius_w", 10.0)), dual_bound=float(prob.get("dual_bound", 5.0)))
    if kw["scorer"] not in ("linear", "mlp"):
        raise ConfigError(f"problem.scorer must be 'linear' or 'mlp', got {kw['scorer']!r}")
    p_train = AucProblem.from_dataset(train, **kw)
    return p_train, p_train.with_data(test.X, test.y)


def build_problem(prob: dict):
    """``(train_problem, test_problem_or_None)``, memoised per process."""
    key = json.dumps(prob, sort_keys=True)
    if key not in _PROBLEM_CACHE:
        kind = _require(prob, "kind", "problem")
        if kind == "auc":
            _PROBLEM_CACHE[key] = _prepare_auc(prob)
        else:
            opts = {k: prob[k] for k in SYNTHETIC_KEYS if k in prob}
            p = make_synthetic(kind, int(_require(prob, "n", "problem")), int(_require(prob, "d1", "problem")),
                               int(_require(prob, "d2", "problem")), int(prob["seed"]), **opts)
            _PROBLEM_CACHE[key] = (p, None)
    return _PROBLEM_CACHE[key]


def lipschitz_constants(cfg: dict, problem) -> tuple[float, float]:
    priv = cfg["privacy"]
    mode = priv["constants"]
    if mode == "declared":
        if "G_w" not in priv or "G_v" not in priv:
            raise ConfigError("privacy.constants = 'declared' needs privacy.G_w and privacy.G_v")
        return float(priv["G_w"]), float(priv["G_v"])
    if mode == "analytic":
        G_w, G_v = problem.constants.G_w, problem.constants.G_v
        if G_w is None or G_v is None:
            raise ConfigError("this problem has no analytic Lipschitz constants; run a constants-estimation "
                              "pre-run by setting privacy.constants = 'estimate' (or declare G_w/G_v)")
        return float(G_w), float(G_v)
    key = (json.dumps(cfg["problem"], sort_keys=True), priv["estimate_samples"], priv["estimate_eta"])
    if key not in _CONSTANTS_CACHE:
        _CONSTANTS_CACHE[key] = estimate_constants(problem, int(priv["estimate_samples"]),
                                                   RngStream(int(cfg["problem"]["seed"]), 99),
                                                   eta=float(priv["estimate_eta"]))
    return _CONSTANTS_CACHE[key]


@dataclass
class RunPoint:
    n: int
    T: int
    m: int
    epsilon: float
    delta: float | None
    config: SgdaConfig
    G: tuple[float, float] | None
    params: MechanismParams | None

    def budget_report(self):
        if self.params is None:
            return None
        return verify_budget(self.params, self.config.noise, PrivacyBudget(self.epsilon, self.delta))


def _constant_or(value, problem_value, name):
    v = value if value is not None else problem_value
    if v is None:
        raise ConfigError(f"schedule needs {name}; declare schedule.{name}")
    return float(v)


def resolve_point(cfg: dict, problem, epsilon: float, delta: float | None, seed: int = 0) -> RunPoint:
    """Resolve T, m, stepsizes and noise for one (epsilon, delta) coordinate."""
    sched, run = cfg["schedule"], cfg["run"]
    n = problem.n
    private = math.isfinite(epsilon)
    kind = sched["kind"]
    batch = run["batch"]
    if kind in ("cc_smooth", "cc_nonsmooth"):
        if "T" in run or "epochs" in run:
            raise ConfigError(f"{kind} fixes T from n; remove run.T / run.epochs")
        d = problem.d1 + problem.d2
        dl = delta if delta is not None else 0.5
        if kind == "cc_smooth":
            L = _constant_or(sched.get("L"), problem.constants.L, "L")
            T, sw = schedule_cc_smooth(n, d, epsilon, dl, L, float(sched["scale"]))
        else:
            T, sw = schedule_cc_nonsmooth(n, d, epsilon, dl, float(sched["scale"]))
        sv = sw
    else:
        if kind == "plsc_steps":
            c = problem.constants
            mu = _constant_or(sched.get("mu"), c.mu, "mu")
            rho = _constant_or(sched.get("rho"), c.rho, "rho")
            L = _constant_or(sched.get("L"), c.L, "L")
            sw, sv = schedule_plsc_steps(mu, rho, L, float(sched.get("c_w", 2.0)), float(sched.get("c_v", 2.0)))
        else:
            sw, sv = Constant(float(sched["eta_w"])), Constant(float(sched["eta_v"]))
        T = None
        if "T" in run:
            T = int(run["T"])
    full_batch = batch == "full"
    if full_batch:
        m = n
    elif batch == "default":
        if not private:
            raise ConfigError("run.batch = 'default' is defined for private runs only")
        if T is None:
            raise ConfigError("run.batch = 'default' needs run.T")
        m = default_batch_size(n, epsilon, T)
    else:
        m = int(batch)
        if m > n:
            raise ConfigError(f"run.batch = {m} exceeds n = {n}")
    if T is None:
        if "epochs" not in run:
            raise ConfigError("run.T or run.epochs is required for this schedule")
        T = max(1, math.ceil(float(run["epochs"]) * n / m))
    noise, G, params = NoiseScales.non_private(), None, None
    if private:
        G = lipschitz_constants(cfg, problem)
        params = MechanismParams(n, m, T, G[0], G[1])
        noise = calibrate_noise(params, PrivacyBudget(epsilon, delta),
                                float(cfg["privacy"]["c_w"]), float(cfg["privacy"]["c_v"]))
    config = SgdaConfig(T=T, m=m, schedule_w=sw, schedule_v=sv, output=run["output"], seed=seed, noise=noise,
                        record_every=T, full_batch=full_batch)
    return RunPoint(n, T, m, epsilon, delta if private else None, config, G, params)


def privacy_grid(cfg: dict) -> list[tuple[float, float | None]]:
    eps = cfg["privacy"]["epsilon"]
    if not eps:
        return [(math.inf, None)]
    return [(e, d) for e in eps for d in cfg["privacy"]["delta"]]


def metrics_for(cfg: dict) -> list[str]:
    return cfg["run"]["metrics"] or [DEFAULT_METRIC[cfg["problem"]["kind"]]]


def hidden_units(cfg: dict):
    prob = cfg["problem"]
    return int(prob.get("hidden", 256)) if prob.get("kind") == "auc" and prob.get("scorer") == "mlp" else None


def _metric(name, problem, test, w, v):
    if name == "weak_pd_gap":
        return met.weak_pd_empirical_gap(problem, w, v, return_tolerance=True)
    if name == "primal_risk":
        return met.primal_empirical_risk(problem, w), None
    if name == "excess_primal":
        return met.excess_primal(problem, w), None
    if name == "saddle_distance":
        return met.saddle_distance(problem, w, v), None
    if name in ("auc", "train_auc"):
        if not isinstance(problem, AucProblem):
            raise ConfigError(f"metric {name!r} needs an AUC problem")
        target = test if name == "auc" else problem
        return met.auc_score(target.scores(w), target.y), None
    raise ConfigError(f"unknown metric {name!r}")


def with_overrides(cfg: dict, overrides: dict) -> dict:
    out = copy.deepcopy(cfg)
    for dotted, value in overrides.items():
        table, key = dotted.split(".", 1)
        out[table][key] = value
    return out


def execute(task: tuple) -> list[ResultRow]:
    """Worker entry: ``(command, cfg, epsilon, delta, seed, timing)`` -> rows."""
    command, cfg, epsilon, delta, seed, timing = task
    problem, test = build_problem(cfg["problem"])
    point = resolve_point(cfg, problem, epsilon, delta, seed)
    names = metrics_for(cfg)

    def row(metric, value, tol, status, wall=None):
        return ResultRow(SCHEMA_VERSION, command, cfg["problem"]["kind"], point.n, point.T, point.m, epsilon,
                         point.delta, hidden_units(cfg), seed, metric, value, tol, status, wall if timing else None)

    try:
        res = run_dpsgda(problem, point.config, RngStream(seed))
    except DivergenceError:
        return [row(name, None, None, "aborted") for name in names]
    out = []
    for name in names:
        try:
            value, tol = _metric(name, problem, test, res.output_w, res.output_v)
        except NoClosedForm as exc:
            raise ConfigError(f"metric {name!r} is unavailable for this problem: {exc}") from None
        status = "ok" if value is not None and math.isfinite(value) else "aborted"
        out.append(row(name, float(value) if status == "ok" else None, tol, status, res.wall_time))
    return out


def stability_task(task: tuple) -> list[ResultRow]:
    """Worker entry for one (n, seed) stability probe."""
    command, cfg, n, seed, timing = task
    prob, st = cfg["problem"], cfg["stability"]
    kind = prob.get("kind")
    if kind not in ("bilinear", "plsc"):
        raise ConfigError("stability needs a synthetic problem (bilinear or plsc) to regenerate neighbours")
    opts = {k: prob[k] for k in SYNTHETIC_KEYS if k in prob}
    d1, d2 = int(_require(prob, "d1", "problem")), int(_require(prob, "d2", "problem"))
    replace_index = int(st["replace_index"])
    identical = bool(st["identical"])
    base_seed = int(prob["seed"])
    try:
        pairs: dict = {}

        def factory(k, replaced):
            if k not in pairs:
                pairs[k] = neighbor_pair(kind, n, d1, d2, base_seed + k, replace_index, **opts)
            s, s2 = pairs[k]
            return s2 if (replaced and not identical) else s

        epsilon, delta = privacy_grid(cfg)[0]
        point = resolve_point(cfg, factory(0, False), epsilon, delta, seed)
        report = met.stability_probe(factory, replace_index, point.config, int(st["pair_count"]))
    except ContractViolation as exc:
        raise ConfigError(str(exc)) from None
    return [ResultRow(SCHEMA_VERSION, command, kind, n, point.T, point.m, epsilon, point.delta, None, seed,
                      "stability_distance", report.mean_distance, None, "ok", None)]
