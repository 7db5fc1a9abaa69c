"""Utility measures: weak primal-dual gap, primal risks, AUC, stability, rate fits.

Metrics operate on single realisations; expectations over algorithm
randomness are estimated by averaging over seeds at the caller (see
:func:`gap_report`). Where an instance has no closed-form inner extremum
the inner problem is solved by projected gradient steps with backtracking,
and the achieved gradient-mapping norm is reported alongside the value.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Callable, Sequence

import numpy as np
from scipy.stats import rankdata

from . import _kernels
from .core import RngStream, project
from .optimizer import SgdaConfig, run_dpsgda
from .problems.base import MinimaxProblem, NoClosedForm

INNER_TOL = 1e-8
PAIRWISE_MAX_N = 10_000


@dataclass(frozen=True)
class InnerSolution:
    value: float
    point: np.ndarray
    tolerance: float
    converged: bool


def _projected_descent(fun, grad, domain, x0, budget, tol) -> InnerSolution:
    """Minimise ``fun`` over ``domain`` by projected gradient with backtracking."""
    x = project(domain, x0)
    fx = fun(x)
    step = 1.0
    gm = math.inf
    for _ in range(budget):
        g = grad(x)
        while True:
            xn = project(domain, x - step * g)
            fn = fun(xn)
            dx = xn - x
            if fn <= fx + g @ dx + (dx @ dx) / (2.0 * step) + 1e-15 * abs(fx) or step < 1e-300:
                break
            step *= 0.5
        gm = float(np.linalg.norm(dx)) / step
        x, fx = xn, fn
        if gm <= tol:
            break
        step *= 2.0
    return InnerSolution(float(fx), x, gm, gm <= tol)


def inner_max(problem: MinimaxProblem, w, budget: int = 10_000, tol: float = INNER_TOL) -> InnerSolution:
    """``max_v F_S(w, v)``: closed form when available, else projected ascent."""
    w = np.asarray(w, dtype=np.float64)
    try:
        v = problem.dual_maximizer(w)
        return InnerSolution(problem.value(w, v), v, 0.0, True)
    except NoClosedForm:
        pass
    sol = _projected_descent(
        lambda v: -problem.value(w, v),
        lambda v: -problem.full_gradient(w, v)[1],
        problem.domain_v,
        np.zeros(problem.d2),
        budget,
        tol,
    )
    return InnerSolution(-sol.value, sol.point, sol.tolerance, sol.converged)


def inner_min(problem: MinimaxProblem, v, budget: int = 10_000, tol: float = INNER_TOL, w0=None) -> InnerSolution:
    """``min_w F_S(w, v)``: closed form when available, else projected descent."""
    v = np.asarray(v, dtype=np.float64)
    try:
        w = problem.primal_minimizer(v)
        return InnerSolution(problem.value(w, v), w, 0.0, True)
    except NoClosedForm:
        pass
    start = np.zeros(problem.d1) if w0 is None else np.asarray(w0, dtype=np.float64)
    return _projected_descent(
        lambda w: problem.value(w, v),
        lambda w: problem.full_gradient(w, v)[0],
        problem.domain_w,
        start,
        budget,
        tol,
    )


def weak_pd_empirical_gap(problem: MinimaxProblem, w_bar, v_bar, inner_budget: int = 10_000,
                          return_tolerance: bool = False):
    """``max_v F_S(w_bar, v) - min_w F_S(w, v_bar)`` for one realisation."""
    hi = inner_max(problem, w_bar, inner_budget)
    lo = inner_min(problem, v_bar, inner_budget, w0=w_bar)
    gap = hi.value - lo.value
    if return_tolerance:
        return gap, max(hi.tolerance, lo.tolerance)
    return gap


def primal_empirical_risk(problem: MinimaxProblem, w, inner_budget: int = 10_000) -> float:
    """``R_S(w) = max_v F_S(w, v)``."""
    return inner_max(problem, w, inner_budget).value


def excess_primal(problem: MinimaxProblem, w, inner_budget: int = 10_000) -> float:
    """``R_S(w) - R_S*``; the instance must expose ``primal_min``."""
    return primal_empirical_risk(problem, w, inner_budget) - problem.primal_min()


def population_gap_estimate(problem_train: MinimaxProblem, problem_test: MinimaxProblem, w) -> float:
    """Plug-in estimate ``R_test(w) - R_train(w)`` of the primal generalisation gap.

    Computed from one realisation of the splits; it estimates, and is not, the
    expectation over data and algorithm.
    """
    if (problem_train.d1, problem_train.d2) != (problem_test.d1, problem_test.d2):
        raise ValueError("train and test problems have different dimensions")
    if getattr(problem_train, "weighting", None) != getattr(problem_test, "weighting", None):
        raise ValueError("train and test problems use different weighting modes")
    return primal_empirical_risk(problem_test, w) - primal_empirical_risk(problem_train, w)


def saddle_distance(problem: MinimaxProblem, w, v) -> float:
    ws, vs = problem.saddle()
    return float(np.sqrt(np.sum((w - ws) ** 2) + np.sum((v - vs) ** 2)))


# -- AUC ----------------------------------------------------------------------


def _split_scores(scores, labels):
    scores = np.asarray(scores, dtype=np.float64).reshape(-1)
    labels = np.asarray(labels).reshape(-1)
    if scores.shape != labels.shape:
        raise ValueError("scores and labels differ in length")
    pos = scores[labels == 1]
    neg = scores[labels == -1]
    if pos.size + neg.size != labels.size:
        raise ValueError("labels must be +1 / -1")
    if pos.size == 0 or neg.size == 0:
        raise ValueError("AUC needs at least one positive and one negative example")
    return pos, neg


def auc_pairwise(scores, labels) -> float:
    pos, neg = _split_scores(scores, labels)
    greater, ties = _kernels.auc_pair_counts(pos, neg)
    return (greater + 0.5 * ties) / (pos.size * neg.size)


def auc_rank(scores, labels) -> float:
    """Mann-Whitney statistic from mid-ranks, ``O(n log n)``."""
    pos, neg = _split_scores(scores, labels)
    ranks = rankdata(np.concatenate([pos, neg]), method="average")
    r_pos = float(ranks[: pos.size].sum())
    return (r_pos - pos.size * (pos.size + 1) / 2.0) / (pos.size * neg.size)


def auc_score(scores, labels) -> float:
    """Fraction of (positive, negative) pairs ranked correctly, ties counting 1/2."""
    if np.size(scores) <= PAIRWISE_MAX_N:
        return auc_pairwise(scores, labels)
    return auc_rank(scores, labels)


# -- stability ------------------------------------------------------------------


@dataclass
class StabilityReport:
    mean_distance: float
    distances: list[float]
    pair_count: int
    replace_index: int
    policy: str = "coupled randomness: S and S' share batch indices and noise draws"


def _same_problem(p: MinimaxProblem, q: MinimaxProblem, probes: int = 3) -> bool:
    gen = np.random.default_rng(12345)
    for _ in range(probes):
        w = project(p.domain_w, gen.standard_normal(p.d1))
        v = project(p.domain_v, gen.standard_normal(p.d2))
        gp, gq = p.full_gradient(w, v), q.full_gradient(w, v)
        if p.value(w, v) != q.value(w, v) or not all(np.array_equal(a, b) for a, b in zip(gp, gq)):
            return False
    return True


def stability_probe(problem_factory: Callable[[int, bool], MinimaxProblem], replace_index: int,
                    config: SgdaConfig, pair_count: int) -> StabilityReport:
    """Mean ``||A_w(S) - A_w(S')||`` over coupled runs on neighbouring datasets.

    ``problem_factory(pair, replaced)`` must build the dataset for ``pair``;
    ``replaced=True`` gives the copy whose example ``replace_index`` is
    replaced by a fresh draw. Both runs of a pair use the seed
    ``config.seed + pair``, so batch indices and noise coincide.
    """
    distances = []
    for k in range(pair_count):
        S = problem_factory(k, False)
        if not _same_problem(S, problem_factory(k, False)):
            raise RuntimeError("problem factory is not deterministic")
        S2 = problem_factory(k, True)
        rng_seed = config.seed + k
        wa = run_dpsgda(S, config, RngStream(rng_seed)).output_w
        wb = run_dpsgda(S2, config, RngStream(rng_seed)).output_w
        distances.append(float(np.linalg.norm(wa - wb)))
    return StabilityReport(float(np.mean(distances)), distances, pair_count, replace_index)


# -- aggregation and rate fits -----------------------------------------------------


@dataclass
class GapReport:
    weak_pd_empirical: list[float]
    primal_empirical: list[float]
    excess_primal_empirical: list[float] | None = None
    tolerance: float = 0.0
    summary: dict = field(default_factory=dict)

    def __post_init__(self):
        for name in ("weak_pd_empirical", "primal_empirical", "excess_primal_empirical"):
            vals = getattr(self, name)
            if vals:
                self.summary[name] = (float(np.mean(vals)), float(np.std(vals, ddof=1)) if len(vals) > 1 else 0.0)


def gap_report(problem: MinimaxProblem, outputs: Sequence[tuple[np.ndarray, np.ndarray]]) -> GapReport:
    """Seed-averaged gap and primal measures over ``(w, v)`` outputs of several runs."""
    if not outputs:
        raise ValueError("need at least one run output")
    gaps, primals, excess = [], [], []
    tol = 0.0
    try:
        r_star = problem.primal_min()
    except NoClosedForm:
        r_star = None
    for w, v in outputs:
        g, t = weak_pd_empirical_gap(problem, w, v, return_tolerance=True)
        gaps.append(g)
        tol = max(tol, t)
        primals.append(primal_empirical_risk(problem, w))
        if r_star is not None:
            excess.append(primals[-1] - r_star)
    return GapReport(gaps, primals, excess or None, tol)


@dataclass(frozen=True)
class RateFit:
    slope: float
    intercept: float
    r2: float


def rate_fit(points: Sequence[tuple[float, float]]) -> RateFit:
    """Least-squares line through ``(log x, log y)``."""
    pts = np.asarray(points, dtype=np.float64)
    if pts.ndim != 2 or pts.shape[0] < 3:
        raise ValueError("rate_fit needs at least 3 points")
    if np.any(pts <= 0):
        raise ValueError("rate_fit needs positive x and y")
    x, y = np.log(pts[:, 0]), np.log(pts[:, 1])
    xc, yc = x - x.mean(), y - y.mean()
    slope = float(xc @ yc / (xc @ xc))
    intercept = float(y.mean() - slope * x.mean())
    ss_res = float(np.sum((yc - slope * xc) ** 2))
    ss_tot = float(yc @ yc)
    r2 = 1.0 - ss_res / ss_tot if ss_tot > 0 else 1.0
    return RateFit(slope, intercept, r2)
