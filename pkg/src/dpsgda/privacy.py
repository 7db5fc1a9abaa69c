"""Noise calibration and moments-accountant verification for DP-SGDA.

Each iteration releases two subsampled Gaussian mechanisms (one per variable).
The per-variable ``l2``-sensitivity of the averaged batch gradient is
``2 G / m``; expressed on the sum scale that is sensitivity 1 with noise
multiplier ``m * sigma / (2 G)``. The composed log-moment bound over ``T``
iterations is ``sum_streams q^2 T lam^2 / z^2`` with sampling rate ``q = m / n``,
valid for ``lam <= z^2 log(1 / (q z))``. The cubic remainder term of the
subsampled-Gaussian moment estimate is dropped, so every epsilon reported here
is an upper-bound approximation.
"""

from __future__ import annotations

import logging
import math
from dataclasses import dataclass, field

import numpy as np

from .core import ContractViolation

log = logging.getLogger(__name__)

DEFAULT_C = 8.0
GOLDEN_RTOL = 1e-6
GRID_POINTS = 1024


class NonPrivateMechanism(ValueError):
    """A zero noise scale gives no finite privacy guarantee."""


@dataclass(frozen=True)
class PrivacyBudget:
    epsilon: float
    delta: float

    def __post_init__(self):
        if not self.epsilon > 0:
            raise ContractViolation(f"epsilon must be positive, got {self.epsilon}")
        if not 0 < self.delta < 1:
            raise ContractViolation(f"delta must lie in (0, 1), got {self.delta}")


@dataclass(frozen=True)
class NoiseScales:
    sigma_w: float
    sigma_v: float

    def __post_init__(self):
        if self.sigma_w < 0 or self.sigma_v < 0:
            raise ContractViolation("noise scales must be nonnegative")

    @classmethod
    def non_private(cls) -> "NoiseScales":
        return cls(0.0, 0.0)

    @property
    def is_private(self) -> bool:
        return self.sigma_w > 0 and self.sigma_v > 0


@dataclass(frozen=True)
class MechanismParams:
    n: int
    m: int
    T: int
    G_w: float
    G_v: float

    def __post_init__(self):
        if not 1 <= self.m <= self.n:
            raise ContractViolation(f"batch size must satisfy 1 <= m <= n, got m={self.m}, n={self.n}")
        if self.T < 1:
            raise ContractViolation(f"T must be >= 1, got {self.T}")
        if not (self.G_w > 0 and self.G_v > 0):
            raise ContractViolation("Lipschitz constants must be positive")

    @property
    def sampling_rate(self) -> float:
        return self.m / self.n

    @property
    def sensitivity_w(self) -> float:
        """l2-sensitivity of the averaged batch w-gradient."""
        return 2.0 * self.G_w / self.m

    @property
    def sensitivity_v(self) -> float:
        return 2.0 * self.G_v / self.m


def calibrate_noise(
    params: MechanismParams, budget: PrivacyBudget, c_w: float = DEFAULT_C, c_v: float = DEFAULT_C
) -> NoiseScales:
    """Gaussian scales ``c G sqrt(T log(1/delta)) / (n eps)`` for both variables."""
    if not (c_w > 0 and c_v > 0):
        raise ContractViolation("calibration constants must be positive")
    base = math.sqrt(params.T * math.log(1.0 / budget.delta)) / (params.n * budget.epsilon)
    return NoiseScales(sigma_w=c_w * params.G_w * base, sigma_v=c_v * params.G_v * base)


def default_batch_size(n: int, epsilon: float, T: int) -> int:
    """``max(1, n sqrt(eps / (4T)))`` rounded half away from zero, clamped to ``n``."""
    if epsilon > 1:
        log.warning("default batch size is derived for epsilon <= 1 (got %g)", epsilon)
    raw = n * math.sqrt(epsilon / (4.0 * T))
    m = int(math.floor(raw + 0.5))
    return min(n, max(1, m))


def noise_multipliers(params: MechanismParams, scales: NoiseScales) -> tuple[float, float]:
    """Noise std divided by the sensitivity, per variable."""
    return scales.sigma_w / params.sensitivity_w, scales.sigma_v / params.sensitivity_v


def _multipliers_checked(params, scales):
    z_w, z_v = noise_multipliers(params, scales)
    if z_w <= 0 or z_v <= 0:
        raise NonPrivateMechanism("non-private mechanism: a noise scale is zero")
    return z_w, z_v


def moment_coefficient(params: MechanismParams, scales: NoiseScales) -> float:
    """``A`` such that the composed log-moment bound is ``A * lam**2``."""
    z_w, z_v = _multipliers_checked(params, scales)
    q2T = params.sampling_rate**2 * params.T
    return q2T / z_w**2 + q2T / z_v**2


def moment_bound(lam: float, params: MechanismParams, scales: NoiseScales) -> float:
    """Composed log-moment bound ``alpha(lam)`` over both gradient streams and T steps."""
    if not lam > 0:
        raise ContractViolation(f"lambda must be positive, got {lam}")
    return moment_coefficient(params, scales) * lam * lam


def validity_range(params: MechanismParams, scales: NoiseScales) -> tuple[float, float] | None:
    """Interval ``(0, upper]`` of admissible lambdas, or ``None`` when empty."""
    z_w, z_v = _multipliers_checked(params, scales)
    q = params.sampling_rate
    uppers = []
    for z in (z_w, z_v):
        arg = 1.0 / (q * z)
        if arg <= 1.0:
            return None
        uppers.append(z * z * math.log(arg))
    return (0.0, min(uppers))


def _golden_section(f, lo: float, hi: float, rtol: float) -> float:
    invphi = (math.sqrt(5.0) - 1.0) / 2.0
    a, b = lo, hi
    c = b - invphi * (b - a)
    d = a + invphi * (b - a)
    fc, fd = f(c), f(d)
    while (b - a) > rtol * max(abs(a), abs(b)):
        if fc <= fd:
            b, d, fd = d, c, fc
            c = b - invphi * (b - a)
            fc = f(c)
        else:
            a, c, fc = c, d, fd
            d = a + invphi * (b - a)
            fd = f(d)
    return 0.5 * (a + b)


@dataclass(frozen=True)
class EpsilonResult:
    epsilon: float
    lam: float | None
    interval: tuple[float, float] | None

    @property
    def bounded(self) -> bool:
        return math.isfinite(self.epsilon)


def _minimize_epsilon(params, scales, delta) -> EpsilonResult:
    if not 0 < delta < 1:
        raise ContractViolation(f"delta must lie in (0, 1), got {delta}")
    A = moment_coefficient(params, scales)
    interval = validity_range(params, scales)
    if interval is None:
        return EpsilonResult(math.inf, None, None)
    upper = interval[1]
    log_inv_delta = math.log(1.0 / delta)

    def eps_at(lam):
        return (A * lam * lam + log_inv_delta) / lam

    lo = upper * 1e-12
    lam_gs = _golden_section(eps_at, lo, upper, GOLDEN_RTOL)
    # grid guard for flat regions; the endpoint is always a candidate
    grid = np.linspace(upper / GRID_POINTS, upper, GRID_POINTS)
    vals = (A * grid * grid + log_inv_delta) / grid
    candidates = [(eps_at(lam_gs), lam_gs), (float(vals.min()), float(grid[vals.argmin()])), (eps_at(upper), upper)]
    eps, lam = min(candidates)
    return EpsilonResult(eps, lam, interval)


def epsilon_for(params: MechanismParams, scales: NoiseScales, delta: float) -> float:
    """Smallest epsilon certified by the tail bound, or ``inf`` ("unbounded")."""
    return _minimize_epsilon(params, scales, delta).epsilon


@dataclass(frozen=True)
class BudgetReport:
    verified: bool
    epsilon_target: float
    delta: float
    epsilon_achieved: float
    lam: float | None
    interval: tuple[float, float] | None
    noise_multipliers: tuple[float, float]
    notes: tuple[str, ...] = field(
        default=("log-moment bound drops the cubic remainder of the subsampled-Gaussian estimate",)
    )

    def as_dict(self) -> dict:
        return {
            "verified": self.verified,
            "epsilon_target": self.epsilon_target,
            "delta": self.delta,
            "epsilon_achieved": self.epsilon_achieved if math.isfinite(self.epsilon_achieved) else "unbounded",
            "lambda": self.lam,
            "lambda_interval": list(self.interval) if self.interval else None,
            "noise_multipliers": list(self.noise_multipliers),
            "notes": list(self.notes),
        }


def verify_budget(params: MechanismParams, scales: NoiseScales, budget: PrivacyBudget) -> BudgetReport:
    """Check the calibrated scales against the target budget with the accountant."""
    res = _minimize_epsilon(params, scales, budget.delta)
    return BudgetReport(
        verified=bool(res.epsilon <= budget.epsilon),
        epsilon_target=budget.epsilon,
        delta=budget.delta,
        epsilon_achieved=res.epsilon,
        lam=res.lam,
        interval=res.interval,
        noise_multipliers=noise_multipliers(params, scales),
    )
