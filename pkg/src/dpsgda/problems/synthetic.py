"""Reproducible synthetic instances for rate and stability experiments."""

from __future__ import annotations

import numpy as np

from ..core import Ball, ContractViolation, RngStream, Unbounded
from .quadratic import BilinearInstance, PlscInstance


def _centered(noise: np.ndarray) -> np.ndarray:
    return noise - noise.mean(axis=0, keepdims=True)


def _orthonormal(gen: np.random.Generator, rows: int, cols: int) -> np.ndarray:
    q, r = np.linalg.qr(gen.standard_normal((rows, cols)))
    return q * np.sign(np.diag(r))


def _domain(dim: int, radius):
    return Unbounded(dim) if radius is None else Ball(radius=float(radius), center=np.zeros(dim))


def make_synthetic(
    kind: str,
    n: int,
    d1: int,
    d2: int,
    seed: int = 0,
    *,
    noise: float = 0.5,
    coupling: float = 1.0,
    mu_reg: float = 1.0,
    rho_reg: float = 1.0,
    radius_w: float | None = None,
    radius_v: float | None = None,
    s_min: float = 0.5,
    s_max: float = 1.0,
    w_star_norm: float = 1.0,
    extra: int = 0,
):
    """Generate a ``bilinear`` or ``plsc`` instance from ``seed``.

    Per-example data are a fixed mean plus example noise of scale ``noise``
    centred over the examples, so dataset averages equal the designed means.

    bilinear: ``A_bar`` is a Gaussian matrix rescaled to spectral norm
    ``coupling``; ``mu_reg``/``rho_reg`` set the strong convexity/concavity.

    plsc: ``A_bar`` (d2 x d1) has singular values spread over
    ``[s_min, s_max]`` and ``b_bar = A_bar w_star``, so the PL constant of the
    primal risk is ``s_min**2 / rho_reg`` and ``R_S* = 0``. ``radius_w``
    defaults to ``3 * w_star_norm``.

    ``extra`` appends that many examples drawn from the same distribution
    after the centred ``n``; they serve as replacement examples for
    neighbouring datasets and leave the first ``n`` unchanged.
    """
    if min(n, d1, d2) < 1:
        raise ContractViolation("n, d1 and d2 must be >= 1")
    gen = RngStream(seed, 0).generator
    if kind == "bilinear":
        A_bar = gen.standard_normal((d1, d2))
        A_bar *= coupling / np.linalg.norm(A_bar, 2)
        b_bar = gen.standard_normal(d1) / np.sqrt(d1)
        c_bar = gen.standard_normal(d2) / np.sqrt(d2)
        shape_A = (d1, d2)
    elif kind == "plsc":
        k = min(d1, d2)
        if s_min <= 0 or s_max < s_min:
            raise ContractViolation("need 0 < s_min <= s_max")
        U = _orthonormal(gen, d2, k)
        V = _orthonormal(gen, d1, k)
        s = np.linspace(s_max, s_min, k) if k > 1 else np.array([s_min])
        A_bar = (U * s) @ V.T
        w_star = V @ gen.standard_normal(k)
        w_star *= w_star_norm / max(np.linalg.norm(w_star), 1e-300)
        b_bar = A_bar @ w_star
        shape_A = (d2, d1)
    else:
        raise ContractViolation(f"unknown synthetic kind {kind!r}")

    sa = noise / np.sqrt(max(shape_A))
    sb = noise / np.sqrt(shape_A[0])
    A = A_bar + _centered(gen.standard_normal((n,) + shape_A)) * sa
    bb = b_bar + _centered(gen.standard_normal((n, shape_A[0]))) * sb
    if kind == "bilinear":
        cc = c_bar + _centered(gen.standard_normal((n, d2))) * (noise / np.sqrt(d2))
    # replacement examples are drawn last so the first n never depend on extra
    if extra:
        A = np.concatenate([A, A_bar + gen.standard_normal((extra,) + shape_A) * sa])
        bb = np.concatenate([bb, b_bar + gen.standard_normal((extra, shape_A[0])) * sb])
        if kind == "bilinear":
            cc = np.concatenate([cc, c_bar + gen.standard_normal((extra, d2)) * (noise / np.sqrt(d2))])
    if kind == "bilinear":
        return BilinearInstance(A, bb, cc, mu_reg, rho_reg, _domain(d1, radius_w), _domain(d2, radius_v))

    rw = 3.0 * w_star_norm if radius_w is None else radius_w
    dom_w = Ball(radius=float(rw), center=np.zeros(d1))
    dom_v = None if radius_v is None else Ball(radius=float(radius_v), center=np.zeros(d2))
    return PlscInstance(A, bb, rho_reg, dom_w, dom_v)


def neighbor_pair(kind: str, n: int, d1: int, d2: int, seed: int = 0, replace_index: int = 0, **kwargs):
    """Neighbouring instances ``(S, S')`` differing only in example ``replace_index``.

    ``S`` is exactly ``make_synthetic(kind, n, d1, d2, seed, **kwargs)``; ``S'``
    swaps in one extra draw from the same distribution. Both share identical
    domains (for ``plsc`` the dual ball covers both datasets), so the
    difference between runs on them is due to the data alone.
    """
    if not 0 <= replace_index < n:
        raise ContractViolation(f"replace_index {replace_index} out of range for n={n}")
    full = make_synthetic(kind, n, d1, d2, seed, extra=1, **kwargs)
    idx_a = np.arange(n)
    idx_b = idx_a.copy()
    idx_b[replace_index] = n
    if kind == "bilinear":
        return full.subset(idx_a), full.subset(idx_b)
    K = full.K
    A = np.transpose(K, (0, 2, 1))
    pa = PlscInstance(A[idx_a], full.c[idx_a], full.rho_reg, full.domain_w)
    pb = PlscInstance(A[idx_b], full.c[idx_b], full.rho_reg, full.domain_w)
    radius = max(pa.domain_v.radius, pb.domain_v.radius)
    if kwargs.get("radius_v") is not None:
        radius = max(radius, float(kwargs["radius_v"]))
    dom_v = Ball(radius=float(radius), center=np.zeros(d2))
    return (PlscInstance(A[idx_a], full.c[idx_a], full.rho_reg, full.domain_w, dom_v),
            PlscInstance(A[idx_b], full.c[idx_b], full.rho_reg, full.domain_w, dom_v))
