"""The five harness commands. Each returns its records and writes artifacts under ``out``."""

from __future__ import annotations

import csv
import io
import math
from collections import defaultdict
from concurrent.futures import ProcessPoolExecutor
from pathlib import Path
from types import SimpleNamespace

import numpy as np

from .. import __version__
from .._kernels import BACKEND
from ..metrics import rate_fit
from ..problems import Constants
from .artifacts import COORDINATES, SCHEMA_VERSION, ResultRow, json_safe, read_rows, write_csv, write_jsonl
from .config import CONFIG_FORMAT, ConfigError, config_hash
from .runner import (
    build_problem,
    execute,
    metrics_for,
    privacy_grid,
    resolve_point,
    stability_task,
    with_overrides,
)

RATE_AXES = ("n", "T")
UTILITY_METRICS = ("auc", "train_auc")


def _map(fn, tasks, workers: int):
    if workers <= 1 or len(tasks) <= 1:
        return [fn(t) for t in tasks]
    with ProcessPoolExecutor(max_workers=workers) as pool:
        return list(pool.map(fn, tasks))


def _manifest(out: Path, command: str, cfg: dict, seed_offset: int, artifacts: list[str], extra=None) -> None:
    rec = {
        "build_version": __version__,
        "command": command,
        "config_format": CONFIG_FORMAT,
        "config_hash": config_hash(cfg, {"seed_offset": seed_offset, **(extra or {})}),
        "schema_version": SCHEMA_VERSION,
        "backend": BACKEND,
        "artifacts": artifacts,
        "seed_offset": seed_offset,
    }
    if extra:
        rec.update(extra)
    write_jsonl(out / f"{command}.manifest.jsonl", [json_safe(rec)])


def _seeds(cfg: dict, seed_offset: int) -> list[int]:
    return [int(s) + seed_offset for s in cfg["run"]["seeds"]]


def _precheck(cfg: dict) -> None:
    # surface configuration errors in the parent before any worker starts
    problem, _ = build_problem(cfg["problem"])
    for eps, delta in privacy_grid(cfg):
        resolve_point(cfg, problem, eps, delta)


# -- calibrate ----------------------------------------------------------------


def _size_only_problem(cfg: dict):
    priv = cfg["privacy"]
    if "n" not in priv:
        raise ConfigError("calibrate without problem.kind needs privacy.n (and declared G_w, G_v)")
    return SimpleNamespace(n=int(priv["n"]), d1=1, d2=1, constants=Constants())


def cmd_calibrate(cfg: dict, out: Path, seed_offset: int = 0) -> list[dict]:
    out = Path(out)
    if not cfg["privacy"]["epsilon"]:
        raise ConfigError("calibrate needs privacy.epsilon values")
    if cfg["problem"].get("kind") is None:
        problem = _size_only_problem(cfg)
    else:
        problem, _ = build_problem(cfg["problem"])
    records = []
    for eps, delta in privacy_grid(cfg):
        point = resolve_point(cfg, problem, eps, delta)
        rep = point.budget_report()
        records.append(json_safe({
            "epsilon": eps, "delta": delta, "n": point.n, "T": point.T, "m": point.m,
            "G_w": point.G[0], "G_v": point.G[1],
            "c_w": float(cfg["privacy"]["c_w"]), "c_v": float(cfg["privacy"]["c_v"]),
            "sigma_w": point.config.noise.sigma_w, "sigma_v": point.config.noise.sigma_v,
            **{f"report_{k}": v for k, v in rep.as_dict().items()},
        }))
    write_jsonl(out / "calibrate.jsonl", records)
    _manifest(out, "calibrate", cfg, seed_offset, ["calibrate.jsonl"])
    return records


# -- run / sweep --------------------------------------------------------------


def _tasks(command: str, cfg: dict, seed_offset: int, timing: bool) -> list[tuple]:
    return [(command, cfg, eps, delta, seed, timing) for eps, delta in privacy_grid(cfg)
            for seed in _seeds(cfg, seed_offset)]


def cmd_run(cfg: dict, out: Path, workers: int = 1, seed_offset: int = 0, timing: bool = False) -> list[ResultRow]:
    out = Path(out)
    _precheck(cfg)
    rows = [r for batch in _map(execute, _tasks("run", cfg, seed_offset, timing), workers) for r in batch]
    write_csv(out / "run.csv", rows)
    _manifest(out, "run", cfg, seed_offset, ["run.csv"])
    return sorted(rows, key=ResultRow.sort_key)


def _axis_value(axis: str, value):
    if axis == "epsilon":
        v = float(value)
        if not v > 0:
            raise ConfigError("epsilon axis values must be positive (use inf for non-private)")
        return v
    v = value if axis == "batch" and value in ("default", "full") else int(value)
    if isinstance(v, int) and v < 1:
        raise ConfigError(f"{axis} axis values must be >= 1")
    return v


def sweep_overrides(cfg: dict, axis: str, value) -> dict:
    if axis == "epsilon":
        return {"privacy.epsilon": [] if math.isinf(value) else [value]}
    if axis == "n":
        if cfg["problem"].get("kind") == "auc" and cfg["problem"].get("source", "synthetic") != "synthetic":
            raise ConfigError("an n axis needs a generated problem (problem.source = 'synthetic')")
        return {"problem.n": value}
    if axis == "T":
        if cfg["schedule"]["kind"].startswith("cc_"):
            raise ConfigError("convex-concave schedules fix T = scale * n; sweep n instead")
        if "epochs" in cfg["run"]:
            raise ConfigError("a T axis conflicts with run.epochs")
        return {"run.T": value}
    if axis == "batch":
        return {"run.batch": value}
    if cfg["problem"].get("kind") != "auc" or cfg["problem"].get("scorer") != "mlp":
        raise ConfigError("a hidden_units axis needs problem.kind = 'auc' with scorer = 'mlp'")
    return {"problem.hidden": value}


def _axis_of(row: ResultRow, axis: str):
    return {"epsilon": row.epsilon, "n": row.n, "T": row.T, "batch": row.m, "hidden_units": row.hidden_units}[axis]


def summarize(rows, axis: str, metric: str) -> dict:
    groups: dict = defaultdict(list)
    aborted: dict = defaultdict(int)
    for r in rows:
        if r.metric != metric:
            continue
        key = _axis_of(r, axis)
        if r.status == "ok":
            groups[key].append(r.value)
        else:
            aborted[key] += 1
    points = []
    for key in sorted(set(groups) | set(aborted)):
        vals = groups.get(key, [])
        points.append({
            "axis_value": key,
            "count": len(vals),
            "aborted": aborted.get(key, 0),
            "mean": float(np.mean(vals)) if vals else None,
            "std": float(np.std(vals, ddof=1)) if len(vals) > 1 else (0.0 if vals else None),
        })
    return {"axis": axis, "metric": metric, "points": points}


def pooled_std(points) -> float:
    var = [p["std"] ** 2 for p in points if p["std"] is not None]
    return float(math.sqrt(np.mean(var))) if var else 0.0


def nondecreasing_within(points, tol: float) -> bool:
    means = [p["mean"] for p in points if p["mean"] is not None]
    return all(b >= a - tol for a, b in zip(means, means[1:]))


def cmd_sweep(cfg: dict, out: Path, axis: str | None = None, values=None, workers: int = 1,
              seed_offset: int = 0, timing: bool = False) -> tuple[list[ResultRow], dict]:
    out = Path(out)
    sw = cfg["sweep"]
    axis = axis or sw.get("axis")
    values = values if values is not None else sw.get("values")
    if axis is None or not values:
        raise ConfigError("sweep needs an axis and values (sweep.axis / sweep.values or --axis / --values)")
    values = [_axis_value(axis, v) for v in values]
    metric = sw.get("metric") or metrics_for(cfg)[0]
    if metric not in metrics_for(cfg):
        raise ConfigError(f"sweep.metric {metric!r} is not among run.metrics")
    if axis in RATE_AXES and len(set(values)) < 3:
        raise ConfigError(f"a rate fit over the {axis} axis needs >= 3 distinct points, got {len(set(values))}")
    point_cfgs = [with_overrides(cfg, sweep_overrides(cfg, axis, v)) for v in values]
    for pc in point_cfgs:
        _precheck(pc)
    tasks = [t for pc in point_cfgs for t in _tasks("sweep", pc, seed_offset, timing)]
    rows = [r for batch in _map(execute, tasks, workers) for r in batch]
    summary = summarize(rows, axis, metric)
    if axis in RATE_AXES:
        pts = [(p["axis_value"], p["mean"]) for p in summary["points"] if p["mean"] is not None]
        if len(pts) < 3:
            summary["rate_fit"] = None
            summary["rate_fit_error"] = "fewer than 3 axis points with finite results"
        elif any(y <= 0 for _, y in pts):
            summary["rate_fit"] = None
            summary["rate_fit_error"] = "rate fit needs positive metric means"
        else:
            fit = rate_fit(pts)
            summary["rate_fit"] = {"slope": fit.slope, "intercept": fit.intercept, "r2": fit.r2}
    if metric in UTILITY_METRICS:
        tol = pooled_std(summary["points"])
        summary["pooled_std"] = tol
        summary["nondecreasing_within_pooled_std"] = nondecreasing_within(summary["points"], tol)
    write_csv(out / "sweep.csv", rows)
    write_jsonl(out / "sweep_summary.jsonl", [json_safe(summary)])
    _manifest(out, "sweep", cfg, seed_offset, ["sweep.csv", "sweep_summary.jsonl"], {"axis": axis, "values": values})
    return sorted(rows, key=ResultRow.sort_key), summary


# -- stability ----------------------------------------------------------------


def cmd_stability(cfg: dict, out: Path, workers: int = 1, seed_offset: int = 0) -> tuple[list[ResultRow], dict]:
    out = Path(out)
    st = cfg["stability"]
    ns = st.get("n") or ([cfg["problem"]["n"]] if "n" in cfg["problem"] else [])
    if not ns:
        raise ConfigError("stability needs stability.n (list of dataset sizes)")
    ns = [int(n) for n in ns]
    if cfg["problem"].get("kind") not in ("bilinear", "plsc"):
        raise ConfigError("stability needs a synthetic problem (bilinear or plsc) to regenerate neighbours")
    tasks = [("stability", with_overrides(cfg, {"problem.n": n}), n, seed, False)
             for n in ns for seed in _seeds(cfg, seed_offset)]
    rows = [r for batch in _map(stability_task, tasks, workers) for r in batch]
    summary = summarize(rows, "n", "stability_distance")
    means = [p["mean"] for p in summary["points"]]
    summary["nonincreasing"] = all(b <= a for a, b in zip(means, means[1:]))
    pts = [(p["axis_value"], p["mean"]) for p in summary["points"]]
    if len(pts) >= 3 and all(y > 0 for _, y in pts):
        fit = rate_fit(pts)
        summary["rate_fit"] = {"slope": fit.slope, "intercept": fit.intercept, "r2": fit.r2}
    else:
        summary["rate_fit"] = None
    summary["coupling"] = "common randomness: both runs of a pair share batch indices and noise draws"
    write_csv(out / "stability.csv", rows)
    write_jsonl(out / "stability_summary.jsonl", [json_safe(summary)])
    _manifest(out, "stability", cfg, seed_offset, ["stability.csv", "stability_summary.jsonl"])
    return sorted(rows, key=ResultRow.sort_key), summary


# -- report -------------------------------------------------------------------

SUMMARY_COLUMNS = ("command", "problem", *COORDINATES, "metric", "count", "aborted", "mean", "std")


def aggregate(rows) -> list[dict]:
    groups: dict = defaultdict(list)
    aborted: dict = defaultdict(int)
    for r in rows:
        key = r.coordinate()
        if r.status == "ok":
            groups[key].append(r.value)
        else:
            aborted[key] += 1
            groups.setdefault(key, [])
    order = sorted(groups, key=lambda k: tuple((0, 0.0) if x is None else (1, x) for x in k))
    out = []
    for key in order:
        vals = groups[key]
        rec = dict(zip(("command", "problem", *COORDINATES, "metric"), key))
        rec.update(count=len(vals), aborted=aborted.get(key, 0),
                   mean=float(np.mean(vals)) if vals else None,
                   std=(float(np.std(vals, ddof=1)) if len(vals) > 1 else 0.0) if vals else None)
        out.append(rec)
    return out


def _fmt_cell(x):
    if x is None:
        return ""
    if isinstance(x, float):
        return "inf" if math.isinf(x) else repr(float(x))
    return str(x)


def render_table(aggs) -> str:
    head = ["problem", "n", "T", "m", "epsilon", "delta", "hidden", "metric", "mean ± std", "seeds"]
    body = []
    for a in aggs:
        ms = "aborted" if a["mean"] is None else f"{a['mean']:.6g} ± {a['std']:.2g}"
        seeds = str(a["count"]) + (f" (+{a['aborted']} aborted)" if a["aborted"] else "")
        body.append([a["problem"], a["n"], a["T"], a["m"], a["epsilon"], a["delta"], a["hidden_units"],
                     a["metric"], ms, seeds])
    body = [["" if c is None else (f"{c:g}" if isinstance(c, float) else str(c)) for c in r] for r in body]
    widths = [max(len(h), *(len(r[i]) for r in body)) if body else len(h) for i, h in enumerate(head)]
    lines = ["  ".join(h.ljust(w) for h, w in zip(head, widths))]
    lines.append("  ".join("-" * w for w in widths))
    lines += ["  ".join(c.ljust(w) for c, w in zip(r, widths)) for r in body]
    return "\n".join(lines)


def cmd_report(paths, out: Path) -> tuple[list[dict], str]:
    out = Path(out)
    if not paths:
        raise ConfigError("report needs at least one CSV path")
    rows = [r for p in paths for r in read_rows(p)]
    aggs = aggregate(rows)
    out.mkdir(parents=True, exist_ok=True)
    write_csv(out / "report_long.csv", rows)
    buf = io.StringIO()
    writer = csv.writer(buf, lineterminator="\r\n")
    writer.writerow(SUMMARY_COLUMNS)
    for a in aggs:
        writer.writerow([_fmt_cell(a[c]) for c in SUMMARY_COLUMNS])
    with open(out / "report_summary.csv", "w", encoding="utf-8", newline="") as fh:
        fh.write(buf.getvalue())
    return aggs, render_table(aggs)

