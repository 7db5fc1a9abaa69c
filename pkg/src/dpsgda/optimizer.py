"""The DP-SGDA iteration with stepsize schedules and seed-exact replay."""

from __future__ import annotations

import math
import time
from dataclasses import dataclass, field

import numpy as np

from . import _kernels
from .core import ContractViolation, RngStream, as_vec, project
from .privacy import NoiseScales
from .problems.base import MinimaxProblem, NoClosedForm

# Randomness is drawn in fixed-size blocks so the consumed stream never
# depends on record_every or on the execution backend.
BLOCK = 1024

_BATCH_STREAM, _NOISE_W_STREAM, _NOISE_V_STREAM, _INIT_STREAM = 0, 1, 2, 3


# -- schedules ---------------------------------------------------------------


@dataclass(frozen=True)
class Constant:
    eta: float
    cap: float | None = None

    def __post_init__(self):
        if not self.eta > 0:
            raise ContractViolation("stepsize must be positive")

    def values(self, t: np.ndarray) -> np.ndarray:
        out = np.full(t.shape, self.eta, dtype=np.float64)
        return out if self.cap is None else np.minimum(out, self.cap)


@dataclass(frozen=True)
class InverseTime:
    """``c / (mu t)``."""

    c: float
    mu: float
    cap: float | None = None

    def __post_init__(self):
        if not (self.c > 0 and self.mu > 0):
            raise ContractViolation("InverseTime parameters must be positive")

    def values(self, t: np.ndarray) -> np.ndarray:
        out = self.c / (self.mu * np.asarray(t, dtype=np.float64))
        return out if self.cap is None else np.minimum(out, self.cap)


@dataclass(frozen=True)
class PowerTwoThirds:
    """``c / t^(2/3)``."""

    c: float
    cap: float | None = None

    def __post_init__(self):
        if not self.c > 0:
            raise ContractViolation("PowerTwoThirds prefactor must be positive")

    def values(self, t: np.ndarray) -> np.ndarray:
        out = self.c / np.asarray(t, dtype=np.float64) ** (2.0 / 3.0)
        return out if self.cap is None else np.minimum(out, self.cap)


StepSchedule = Constant | InverseTime | PowerTwoThirds


def step(schedule, t: int) -> float:
    """Stepsize at iteration ``t >= 1``."""
    if t < 1:
        raise ContractViolation("schedules are evaluated at t >= 1")
    return float(schedule.values(np.array([t]))[0])


def _round_half_up(x: float) -> int:
    return int(math.floor(x + 0.5))


def _privacy_floor_term(d, epsilon, delta):
    if math.isinf(epsilon):
        return 0.0
    return math.sqrt(d * math.log(1.0 / delta)) / epsilon


def schedule_cc_smooth(n, d, epsilon, delta, L, scale=1.0) -> tuple[int, Constant]:
    """``T ~ n`` and ``eta ~ 1 / (sqrt(L) max(sqrt(n), sqrt(d log(1/delta)) / eps))``.

    ``epsilon=inf`` gives the non-private schedule.
    """
    if min(n, d, delta, L, scale) <= 0 or epsilon <= 0:
        raise ContractViolation("all schedule arguments must be positive")
    T = max(1, _round_half_up(scale * n))
    eta = scale / (math.sqrt(L) * max(math.sqrt(n), _privacy_floor_term(d, epsilon, delta)))
    return T, Constant(eta)


def schedule_cc_nonsmooth(n, d, epsilon, delta, scale=1.0) -> tuple[int, Constant]:
    """``T ~ n^2`` and ``eta ~ 1 / (n max(sqrt(n), sqrt(d log(1/delta)) / eps))``."""
    if min(n, d, delta, scale) <= 0 or epsilon <= 0:
        raise ContractViolation("all schedule arguments must be positive")
    T = max(1, _round_half_up(scale * n * n))
    eta = scale / (n * max(math.sqrt(n), _privacy_floor_term(d, epsilon, delta)))
    return T, Constant(eta)


def schedule_plsc_steps(mu, rho, L, c_w=2.0, c_v=2.0) -> tuple[InverseTime, PowerTwoThirds]:
    """PL/strongly-concave schedules ``c_w/(mu t)`` and ``c_v kappa^2.5 / (mu^1.5 t^(2/3))``.

    Capped at ``1/(L + L^2/rho)`` for w and ``1/L`` for v.
    """
    if min(mu, rho, L, c_w, c_v) <= 0:
        raise ContractViolation("schedule arguments must be positive")
    kappa = L / rho
    sw = InverseTime(c_w, mu, cap=1.0 / (L + L * L / rho))
    sv = PowerTwoThirds(c_v * kappa**2.5 / mu**1.5, cap=1.0 / L)
    return sw, sv


# -- configuration and results ----------------------------------------------


@dataclass(frozen=True)
class SgdaConfig:
    """One DP-SGDA run.

    ``full_batch`` replaces the sampled mini-batch by all ``n`` examples
    (deterministic gradients; requires ``m == n``).
    """

    T: int
    m: int
    schedule_w: StepSchedule
    schedule_v: StepSchedule
    output: str = "average"
    seed: int = 0
    noise: NoiseScales = field(default_factory=NoiseScales.non_private)
    record_every: int | None = None
    full_batch: bool = False

    def __post_init__(self):
        if self.T < 1 or self.m < 1:
            raise ContractViolation("T and m must be >= 1")
        if self.output not in ("average", "last"):
            raise ContractViolation(f"output must be 'average' or 'last', got {self.output!r}")
        if self.record_every is not None and not 1 <= self.record_every <= self.T:
            raise ContractViolation("record_every must lie in [1, T]")

    @property
    def record_interval(self) -> int:
        return self.record_every if self.record_every is not None else max(1, self.T // 100)


@dataclass
class TraceRecord:
    t: int
    value: float
    primal: float | None
    grad_norm_w: float
    grad_norm_v: float
    w: np.ndarray
    v: np.ndarray


@dataclass
class RunResult:
    output_w: np.ndarray
    output_v: np.ndarray
    last_w: np.ndarray
    last_v: np.ndarray
    trace: list[TraceRecord]
    wall_time: float
    seed: int
    backend: str


class DivergenceError(FloatingPointError):
    """An iterate became non-finite; carries the iteration index and last norms."""

    def __init__(self, t: int, norm_w: float, norm_v: float):
        super().__init__(f"non-finite iterate at iteration {t} (|w|={norm_w:.3g}, |v|={norm_v:.3g})")
        self.t, self.norm_w, self.norm_v = t, norm_w, norm_v


# -- the iteration ----------------------------------------------------------


def _record(problem, t, w, v, primal_ok):
    gw, gv = problem.full_gradient(w, v)
    primal = None
    if primal_ok[0]:
        try:
            primal = float(problem.primal_risk(w))
        except (NoClosedForm, AttributeError):
            primal_ok[0] = False
    return TraceRecord(t, problem.value(w, v), primal, float(np.linalg.norm(gw)), float(np.linalg.norm(gv)), w.copy(), v.copy())


def _generic_steps(problem, w, v, wsum, vsum, idx, xi, zeta, eta_w, eta_v, dom_w, dom_v):
    for t in range(idx.shape[0]):
        gw, gv = problem._batch_mean_gradient(w, v, idx[t])
        w_new = w - eta_w[t] * (gw + xi[t])
        v_new = v + eta_v[t] * (gv + zeta[t])
        if not (np.all(np.isfinite(w_new)) and np.all(np.isfinite(v_new))):
            w[:] = w_new
            v[:] = v_new
            return t
        w[:] = project(dom_w, w_new)
        v[:] = project(dom_v, v_new)
        wsum += w
        vsum += v
    return -1


def run_dpsgda(
    problem: MinimaxProblem,
    config: SgdaConfig,
    rng: RngStream,
    w0=None,
    v0=None,
    backend: str | None = None,
) -> RunResult:
    """Run DP-SGDA from ``(w0, v0)`` (default: the problem's initial point).

    Step ``t = 1..T`` samples ``m`` indices uniformly with replacement, forms
    the batch-average gradients, adds ``N(0, sigma^2 I)`` noise to each and
    takes a projected descent step in ``w`` and ascent step in ``v`` with the
    scheduled stepsizes. ``output='average'`` returns the mean of iterates
    ``1..T``, ``'last'`` returns iterate ``T``.
    """
    if config.m > problem.n:
        raise ContractViolation(f"batch size {config.m} exceeds n={problem.n}")
    if config.full_batch and config.m != problem.n:
        raise ContractViolation("full_batch requires m == n")
    start = time.perf_counter()
    if w0 is None or v0 is None:
        iw, iv = problem.initial_point(rng.child(_INIT_STREAM))
        w0 = iw if w0 is None else w0
        v0 = iv if v0 is None else v0
    w = project(problem.domain_w, as_vec(w0, problem.d1, "w0"))
    v = project(problem.domain_v, as_vec(v0, problem.d2, "v0"))

    kmod = _kernels.get_backend(backend)
    backend_name = "python" if kmod is _kernels._pykernels else "compiled"
    spec = problem.kernel_spec()
    batch_gen = rng.child(_BATCH_STREAM).generator
    noise_w_gen = rng.child(_NOISE_W_STREAM).generator
    noise_v_gen = rng.child(_NOISE_V_STREAM).generator
    sigma_w, sigma_v = config.noise.sigma_w, config.noise.sigma_v

    wsum = np.zeros(problem.d1)
    vsum = np.zeros(problem.d2)
    trace: list[TraceRecord] = []
    primal_ok = [True]
    every = config.record_interval
    T, m = config.T, config.m
    full_idx = np.arange(problem.n, dtype=np.int64)
    block = BLOCK if not config.full_batch else max(1, min(BLOCK, 2**20 // max(1, m)))

    t0 = 0
    while t0 < T:
        B = min(block, T - t0)
        if config.full_batch:
            idx = np.broadcast_to(full_idx, (B, m))
            idx = np.ascontiguousarray(idx)
        else:
            idx = batch_gen.integers(0, problem.n, size=(B, m), dtype=np.int64)
        xi = sigma_w * noise_w_gen.standard_normal((B, problem.d1)) if sigma_w > 0 else np.zeros((B, problem.d1))
        zeta = sigma_v * noise_v_gen.standard_normal((B, problem.d2)) if sigma_v > 0 else np.zeros((B, problem.d2))
        ts = np.arange(t0 + 1, t0 + B + 1, dtype=np.float64)
        eta_w = np.ascontiguousarray(config.schedule_w.values(ts))
        eta_v = np.ascontiguousarray(config.schedule_v.values(ts))

        s = 0
        while s < B:
            # advance to the next record point inside the block
            t_abs = t0 + s
            next_rec = min(((t_abs // every) + 1) * every, T)
            e = min(B, next_rec - t0)
            args = (w, v, wsum, vsum, idx[s:e], xi[s:e], zeta[s:e], eta_w[s:e], eta_v[s:e])
            if spec is not None:
                bad = kmod.quadgame_block(spec["K"], spec["b"], spec["c"], spec["mu"], spec["rho"], spec["dom_w"], spec["dom_v"], *args)
            else:
                bad = _generic_steps(problem, *args, problem.domain_w, problem.domain_v)
            if bad >= 0:
                raise DivergenceError(t0 + s + bad + 1, float(np.linalg.norm(w)), float(np.linalg.norm(v)))
            s = e
            if (t0 + s) % every == 0 or t0 + s == T:
                trace.append(_record(problem, t0 + s, w, v, primal_ok))
        t0 += B

    if config.output == "average":
        out_w, out_v = wsum / T, vsum / T
    else:
        out_w, out_v = w.copy(), v.copy()
    return RunResult(out_w, out_v, w.copy(), v.copy(), trace, time.perf_counter() - start, rng.seed, backend_name)


def replay(problem: MinimaxProblem, config: SgdaConfig, **kwargs) -> RunResult:
    """Run with the stream derived from ``config.seed``; identical inputs give identical results."""
    return run_dpsgda(problem, config, RngStream(config.seed), **kwargs)
