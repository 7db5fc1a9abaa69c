"""Experiment configuration: TOML files, environment overrides, validation.

Config format ``dpsgda-config/1`` is a TOML document with the tables
``problem``, ``privacy``, ``schedule``, ``run`` and optionally ``sweep``,
``stability`` and ``output``. Any key can be overridden from the
environment as ``DPSGDA_<TABLE>__<KEY>=<toml value>``; values that do not
parse as TOML are taken as strings (so ``DPSGDA_PROBLEM__TRAIN_PATH=/d/x``
works unquoted).
"""

from __future__ import annotations

import copy
import hashlib
import json
import os
import sys
from importlib import resources
from pathlib import Path

if sys.version_info >= (3, 11):
    import tomllib
else:
    import tomli as tomllib

CONFIG_FORMAT = "dpsgda-config/1"
ENV_PREFIX = "DPSGDA_"
TABLES = ("problem", "privacy", "schedule", "run", "sweep", "stability", "output")
SCHEDULES = ("explicit", "cc_smooth", "cc_nonsmooth", "plsc_steps")
METRICS = ("weak_pd_gap", "primal_risk", "excess_primal", "saddle_distance", "auc", "train_auc")
SWEEP_AXES = ("epsilon", "n", "T", "batch", "hidden_units")
PROBLEM_KINDS = ("bilinear", "plsc", "auc")

DEFAULTS = {
    "problem": {"seed": 0},
    "privacy": {"epsilon": [], "delta": [1e-6], "c_w": 8.0, "c_v": 8.0, "constants": "analytic",
                "estimate_samples": 200, "estimate_eta": 0.1},
    "schedule": {"kind": "explicit", "scale": 1.0},
    "run": {"seeds": [0, 1, 2, 3, 4], "batch": 1, "output": "average", "metrics": []},
    "sweep": {},
    "stability": {"pair_count": 5, "replace_index": 0, "identical": False},
    "output": {"dir": "results"},
}


class ConfigError(ValueError):
    """Invalid or inconsistent experiment configuration."""


def _parse_env_value(raw: str):
    try:
        return tomllib.loads(f"v = {raw}")["v"]
    except tomllib.TOMLDecodeError:
        return raw


def env_overrides(environ=None) -> dict:
    environ = os.environ if environ is None else environ
    out: dict = {}
    for name, raw in environ.items():
        if not name.startswith(ENV_PREFIX) or "__" not in name[len(ENV_PREFIX):]:
            continue
        table, key = name[len(ENV_PREFIX):].split("__", 1)
        table = table.lower()
        if table not in TABLES:
            continue
        out.setdefault(table, {})[key.lower()] = _parse_env_value(raw)
    return out


def preset_names() -> list[str]:
    root = resources.files("dpsgda") / "presets"
    return sorted(p.name[:-5] for p in root.iterdir() if p.name.endswith(".toml"))


def read_text(path_or_preset: str) -> str:
    if path_or_preset.startswith("preset:"):
        name = path_or_preset[len("preset:"):]
        if name not in preset_names():
            raise ConfigError(f"unknown preset {name!r}; available: {', '.join(preset_names())}")
        return (resources.files("dpsgda") / "presets" / f"{name}.toml").read_text(encoding="utf-8")
    return Path(path_or_preset).read_text(encoding="utf-8")


def load_config(path_or_preset: str | None, environ=None) -> dict:
    """Parse, merge defaults and environment overrides, and validate."""
    raw = {}
    if path_or_preset is not None:
        try:
            raw = tomllib.loads(read_text(path_or_preset))
        except tomllib.TOMLDecodeError as exc:
            raise ConfigError(f"{path_or_preset}: {exc}") from None
    return resolve(raw, environ)


def resolve(raw: dict, environ=None) -> dict:
    raw = copy.deepcopy(raw)
    fmt = raw.pop("format", CONFIG_FORMAT)
    if fmt != CONFIG_FORMAT:
        raise ConfigError(f"unsupported config format {fmt!r} (expected {CONFIG_FORMAT!r})")
    raw.pop("preset", None)
    for table in raw:
        if table not in TABLES:
            raise ConfigError(f"unknown table [{table}]")
    cfg = {t: {**DEFAULTS.get(t, {}), **raw.get(t, {})} for t in TABLES}
    for table, kv in env_overrides(environ).items():
        cfg[table].update(kv)
    validate(cfg)
    return cfg


def _as_list(value) -> list:
    return list(value) if isinstance(value, (list, tuple)) else [value]


def validate(cfg: dict) -> None:
    prob, priv, sched, run = cfg["problem"], cfg["privacy"], cfg["schedule"], cfg["run"]
    kind = prob.get("kind")
    if kind is not None and kind not in PROBLEM_KINDS:
        raise ConfigError(f"problem.kind must be one of {PROBLEM_KINDS}, got {kind!r}")
    priv["epsilon"] = [float(e) for e in _as_list(priv["epsilon"])]
    priv["delta"] = [float(d) for d in _as_list(priv["delta"])]
    if any(not (e > 0) for e in priv["epsilon"]):
        raise ConfigError("privacy.epsilon values must be positive")
    if any(not (0 < d < 1) for d in priv["delta"]):
        raise ConfigError("privacy.delta values must lie in (0, 1)")
    if priv["constants"] not in ("analytic", "declared", "estimate"):
        raise ConfigError("privacy.constants must be 'analytic', 'declared' or 'estimate'")
    if sched["kind"] not in SCHEDULES:
        raise ConfigError(f"schedule.kind must be one of {SCHEDULES}, got {sched['kind']!r}")
    if sched["kind"] == "explicit" and ("eta_w" not in sched or "eta_v" not in sched):
        raise ConfigError("explicit schedule needs schedule.eta_w and schedule.eta_v")
    if sched["kind"] == "plsc_steps" and kind not in (None, "plsc"):
        if not all(k in sched for k in ("mu", "rho", "L")):
            raise ConfigError("plsc_steps schedule needs mu, rho and L declared for non-PL-SC problems")
    seeds = _as_list(run["seeds"])
    if not seeds:
        raise ConfigError("run.seeds must be nonempty")
    if any(not isinstance(s, int) or s < 0 for s in seeds):
        raise ConfigError("run.seeds must be nonnegative integers")
    run["seeds"] = seeds
    if run["output"] not in ("average", "last"):
        raise ConfigError("run.output must be 'average' or 'last'")
    batch = run["batch"]
    if not (batch in ("default", "full") or (isinstance(batch, int) and batch >= 1)):
        raise ConfigError("run.batch must be a positive integer, 'default' or 'full'")
    if "T" in run and "epochs" in run:
        raise ConfigError("give either run.T or run.epochs, not both")
    if batch == "default" and "epochs" in run:
        raise ConfigError("run.batch = 'default' depends on T and cannot be combined with run.epochs")
    metrics = _as_list(run["metrics"])
    for m in metrics:
        if m not in METRICS:
            raise ConfigError(f"unknown metric {m!r}; choose from {METRICS}")
    run["metrics"] = metrics
    axis = cfg["sweep"].get("axis")
    if axis is not None and axis not in SWEEP_AXES:
        raise ConfigError(f"sweep.axis must be one of {SWEEP_AXES}, got {axis!r}")


def config_hash(cfg: dict, extra: dict | None = None) -> str:
    """SHA-256 over the canonical JSON of the resolved config."""
    payload = {"format": CONFIG_FORMAT, "config": cfg, **(extra or {})}
    text = json.dumps(payload, sort_keys=True, separators=(",", ":"), default=str)
    return hashlib.sha256(text.encode("utf-8")).hexdigest()

