"""Empirical Lipschitz constants for instances without analytic bounds."""

from __future__ import annotations

import numpy as np

from ..core import RngStream
from .base import MinimaxProblem

_CHUNK = 4096


def max_gradient_norms(problem: MinimaxProblem, w, v) -> tuple[float, float]:
    """Largest per-example gradient norms over all ``n`` examples at ``(w, v)``."""
    gw_max = gv_max = 0.0
    for s in range(0, problem.n, _CHUNK):
        idx = np.arange(s, min(problem.n, s + _CHUNK))
        gw, gv = problem.per_example_gradients(w, v, idx)
        gw_max = max(gw_max, float(np.linalg.norm(gw, axis=1).max()))
        gv_max = max(gv_max, float(np.linalg.norm(gv, axis=1).max()))
    return gw_max, gv_max


def estimate_constants(problem: MinimaxProblem, sample_count: int, rng: RngStream,
                       eta: float = 0.1, m: int | None = None) -> tuple[float, float]:
    """Max per-example gradient norms along a non-private SGDA trajectory.

    The initial point and each of the ``sample_count`` iterates are evaluated
    on every example.
    """
    from ..optimizer import Constant, SgdaConfig, run_dpsgda

    if sample_count < 1:
        raise ValueError("sample_count must be >= 1")
    m = m if m is not None else min(problem.n, 64)
    cfg = SgdaConfig(T=sample_count, m=m, schedule_w=Constant(eta), schedule_v=Constant(eta), record_every=1)
    w0, v0 = problem.initial_point(rng.child(3))
    res = run_dpsgda(problem, cfg, rng, w0=w0, v0=v0)
    G_w, G_v = max_gradient_norms(problem, w0, v0)
    for rec in res.trace:
        gw, gv = max_gradient_norms(problem, rec.w, rec.v)
        G_w, G_v = max(G_w, gw), max(G_v, gv)
    return G_w, G_v
