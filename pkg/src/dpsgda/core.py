"""Vectors, convex domains with Euclidean projections, and seeded random streams.

Vectors are plain 1-D ``float64`` numpy arrays. Every module in the package
shares the domain and randomness conventions defined here.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Union

import numpy as np

# Relative slack used for domain membership; points within it are left untouched
# by projection, which keeps projection exactly idempotent.
MEMBERSHIP_RTOL = 1e-12


class ContractViolation(ValueError):
    """Raised when an operation is called outside its precondition."""


def as_vec(x, dim: int | None = None, name: str = "vector") -> np.ndarray:
    """Coerce ``x`` to a finite 1-D float64 array, optionally checking its dimension."""
    arr = np.asarray(x, dtype=np.float64)
    if arr.ndim == 0:
        arr = arr.reshape(1)
    if arr.ndim != 1:
        raise ContractViolation(f"{name} must be one-dimensional, got shape {arr.shape}")
    if dim is not None and arr.shape[0] != dim:
        raise ContractViolation(f"{name} has dimension {arr.shape[0]}, expected {dim}")
    if not np.all(np.isfinite(arr)):
        raise ContractViolation(f"{name} contains non-finite entries")
    return arr


@dataclass(frozen=True)
class Unbounded:
    """The whole space R^d."""

    dim: int | None = None

    def contains(self, p) -> bool:
        return True

    @property
    def radius_bound(self) -> float:
        return float("inf")


@dataclass(frozen=True)
class Ball:
    """Closed Euclidean ball ``{x : ||x - center|| <= radius}``."""

    radius: float
    center: np.ndarray = field(default=None)  # type: ignore[assignment]
    dim: int | None = None

    def __post_init__(self):
        if not self.radius > 0:
            raise ContractViolation(f"ball radius must be positive, got {self.radius}")
        if self.center is None:
            if self.dim is None:
                raise ContractViolation("Ball needs a center or a dimension")
            object.__setattr__(self, "center", np.zeros(self.dim))
        else:
            c = as_vec(self.center, self.dim, "ball center")
            object.__setattr__(self, "center", c)
            object.__setattr__(self, "dim", c.shape[0])

    def contains(self, p) -> bool:
        p = np.asarray(p, dtype=np.float64)
        return float(np.linalg.norm(p - self.center)) <= self.radius * (1.0 + MEMBERSHIP_RTOL)

    @property
    def radius_bound(self) -> float:
        """Largest Euclidean norm attained on the domain."""
        return float(np.linalg.norm(self.center)) + self.radius


@dataclass(frozen=True)
class Box:
    """Axis-aligned box ``lower <= x <= upper``."""

    lower: np.ndarray
    upper: np.ndarray

    def __post_init__(self):
        lo = as_vec(self.lower, name="box lower")
        hi = as_vec(self.upper, lo.shape[0], "box upper")
        if np.any(lo > hi):
            raise ContractViolation("box requires lower <= upper componentwise")
        object.__setattr__(self, "lower", lo)
        object.__setattr__(self, "upper", hi)

    @property
    def dim(self) -> int:
        return self.lower.shape[0]

    def contains(self, p) -> bool:
        p = np.asarray(p, dtype=np.float64)
        scale = MEMBERSHIP_RTOL * np.maximum(1.0, np.maximum(np.abs(self.lower), np.abs(self.upper)))
        return bool(np.all(p >= self.lower - scale) and np.all(p <= self.upper + scale))

    @property
    def radius_bound(self) -> float:
        return float(np.linalg.norm(np.maximum(np.abs(self.lower), np.abs(self.upper))))


Domain = Union[Unbounded, Ball, Box]


def _check_dim(domain: Domain, p: np.ndarray) -> None:
    if domain.dim is not None and p.shape[0] != domain.dim:
        raise ContractViolation(f"point has dimension {p.shape[0]}, domain has {domain.dim}")


def project(domain: Domain, p) -> np.ndarray:
    """Euclidean projection of ``p`` onto ``domain``.

    Members of the domain (up to ``MEMBERSHIP_RTOL``) are returned unchanged.
    """
    p = as_vec(p, name="point")
    _check_dim(domain, p)
    if isinstance(domain, Unbounded):
        return p.copy()
    if isinstance(domain, Ball):
        diff = p - domain.center
        norm = float(np.linalg.norm(diff))
        if norm <= domain.radius * (1.0 + MEMBERSHIP_RTOL):
            return p.copy()
        return domain.center + diff * (domain.radius / norm)
    if isinstance(domain, Box):
        return np.clip(p, domain.lower, domain.upper)
    raise ContractViolation(f"unknown domain {domain!r}")


def ball(dim: int, radius: float) -> Ball:
    """Origin-centred ball in R^dim."""
    return Ball(radius=radius, center=np.zeros(dim))


def box(dim: int, lo: float, hi: float) -> Box:
    return Box(np.full(dim, float(lo)), np.full(dim, float(hi)))


class RngStream:
    """Seeded, splittable random stream.

    A stream is identified by its seed and a path of stream ids; identical
    identifiers reproduce identical sample sequences. Samples come from
    numpy's PCG64 bit generator seeded through ``SeedSequence`` (normals use
    numpy's ziggurat transform), so pinned-seed values are stable across
    platforms for a given numpy release.
    """

    def __init__(self, seed: int, stream_id: int | tuple[int, ...] = ()):
        if isinstance(stream_id, int):
            stream_id = (stream_id,)
        self.seed = int(seed)
        self.stream_id = tuple(int(s) for s in stream_id)
        ss = np.random.SeedSequence(self.seed & (2**64 - 1), spawn_key=self.stream_id)
        self.generator = np.random.Generator(np.random.PCG64(ss))

    def child(self, stream_id: int) -> "RngStream":
        """Independent child stream; does not advance this stream."""
        return RngStream(self.seed, self.stream_id + (int(stream_id),))

    def __repr__(self) -> str:
        return f"RngStream(seed={self.seed}, stream_id={self.stream_id})"


def gaussian(dim: int, sigma: float, rng: RngStream) -> np.ndarray:
    """i.i.d. ``N(0, sigma^2)`` vector of length ``dim``."""
    if sigma < 0:
        raise ContractViolation(f"sigma must be nonnegative, got {sigma}")
    if dim < 0:
        raise ContractViolation(f"dim must be nonnegative, got {dim}")
    if sigma == 0 or dim == 0:
        return np.zeros(dim)
    return sigma * rng.generator.standard_normal(dim)
