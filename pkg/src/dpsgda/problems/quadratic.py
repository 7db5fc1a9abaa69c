"""Quadratic saddle-point instances with closed-form oracles.

Both shipped synthetic families are special cases of the per-example game

    f(w, v; z_i) = <w, K_i v> + <b_i, w> - <c_i, v> + (mu/2)||w||^2 - (rho/2)||v||^2

whose curvature is isotropic in each block, so the constrained inner
extrema are projections of the unconstrained ones.
"""

from __future__ import annotations

import numpy as np

from ..core import Ball, Box, ContractViolation, Domain, Unbounded, project
from .base import Constants, MinimaxProblem, NoClosedForm


def _linear_extremum(domain: Domain, coef: np.ndarray, maximize: bool) -> np.ndarray:
    """Point of ``domain`` maximising (or minimising) ``<coef, x>``."""
    direction = coef if maximize else -coef
    if isinstance(domain, Ball):
        norm = float(np.linalg.norm(direction))
        if norm == 0.0:
            return domain.center.copy()
        return domain.center + domain.radius * direction / norm
    if isinstance(domain, Box):
        return np.where(direction > 0, domain.upper, np.where(direction < 0, domain.lower, np.clip(0.0, domain.lower, domain.upper)))
    raise NoClosedForm("linear objective is unbounded on an unbounded domain")


def _domain_code(domain: Domain, dim: int):
    """(kind, radius, center, lower, upper) encoding used by the SGDA kernels."""
    zeros = np.zeros(dim)
    if isinstance(domain, Unbounded):
        return 0, 0.0, zeros, zeros, zeros
    if isinstance(domain, Ball):
        return 1, float(domain.radius), np.ascontiguousarray(domain.center), zeros, zeros
    if isinstance(domain, Box):
        return 2, 0.0, zeros, np.ascontiguousarray(domain.lower), np.ascontiguousarray(domain.upper)
    raise ContractViolation(f"unsupported domain {domain!r}")


def _scaled(coef, radius: float):
    """``coef * radius`` with a zero coefficient contributing nothing on unbounded domains."""
    coef = np.asarray(coef, dtype=np.float64)
    if not np.isinf(radius):
        return coef * radius
    return np.where(coef == 0.0, 0.0, np.inf)


def _pair_norm_bound(mu: float, rho: float, s: np.ndarray) -> np.ndarray:
    """Spectral norm of [[mu I, K], [K^T, -rho I]] given the top singular value of K."""
    return 0.5 * (abs(mu - rho) + np.sqrt((mu + rho) ** 2 + 4.0 * s**2))


class QuadraticGame(MinimaxProblem):
    def __init__(self, K, b, c, mu_reg: float = 0.0, rho_reg: float = 0.0, domain_w: Domain | None = None, domain_v: Domain | None = None):
        K = np.ascontiguousarray(K, dtype=np.float64)
        if K.ndim != 3:
            raise ContractViolation("K must have shape (n, d1, d2)")
        self.n, self.d1, self.d2 = K.shape
        b = np.ascontiguousarray(b, dtype=np.float64).reshape(self.n, self.d1)
        c = np.ascontiguousarray(c, dtype=np.float64).reshape(self.n, self.d2)
        if mu_reg < 0 or rho_reg < 0:
            raise ContractViolation("regularizers must be nonnegative")
        if self.n < 1:
            raise ContractViolation("need at least one example")
        self.K, self.b, self.c = K, b, c
        self.mu_reg, self.rho_reg = float(mu_reg), float(rho_reg)
        self.domain_w = domain_w if domain_w is not None else Unbounded(self.d1)
        self.domain_v = domain_v if domain_v is not None else Unbounded(self.d2)
        self.K_bar = K.mean(axis=0)
        self.b_bar = b.mean(axis=0)
        self.c_bar = c.mean(axis=0)
        self.constants = self._compute_constants()

    def _compute_constants(self) -> Constants:
        s = np.linalg.norm(self.K, ord=2, axis=(1, 2))
        D_w, D_v = self.domain_w.radius_bound, self.domain_v.radius_bound
        G_w = float(np.max(_scaled(s, D_v) + np.linalg.norm(self.b, axis=1)) + _scaled(self.mu_reg, D_w))
        G_v = float(np.max(_scaled(s, D_w) + np.linalg.norm(self.c, axis=1)) + _scaled(self.rho_reg, D_v))
        L = float(max(np.max(_pair_norm_bound(self.mu_reg, self.rho_reg, s)), self.mu_reg, self.rho_reg))
        return Constants(
            G_w=G_w if np.isfinite(G_w) else None,
            G_v=G_v if np.isfinite(G_v) else None,
            L=L if L > 0 else None,
            rho=self.rho_reg or None,
            mu=self.mu_reg or None,
        )

    # -- contract ---------------------------------------------------------

    def per_example_gradients(self, w, v, idx):
        Ki = self.K[idx]
        gw = np.einsum("bij,j->bi", Ki, v) + self.b[idx] + self.mu_reg * w
        gv = np.einsum("bij,i->bj", Ki, w) - self.c[idx] - self.rho_reg * v
        return gw, gv

    def full_gradient(self, w, v):
        w, v = self._check_point(w, v)
        gw = self.K_bar @ v + self.b_bar + self.mu_reg * w
        gv = self.K_bar.T @ w - self.c_bar - self.rho_reg * v
        return gw, gv

    def value(self, w, v) -> float:
        w, v = self._check_point(w, v)
        return float(
            w @ self.K_bar @ v + self.b_bar @ w - self.c_bar @ v
            + 0.5 * self.mu_reg * (w @ w) - 0.5 * self.rho_reg * (v @ v)
        )

    def kernel_spec(self):
        return {
            "K": self.K,
            "b": self.b,
            "c": self.c,
            "mu": self.mu_reg,
            "rho": self.rho_reg,
            "dom_w": _domain_code(self.domain_w, self.d1),
            "dom_v": _domain_code(self.domain_v, self.d2),
        }

    # -- closed forms -----------------------------------------------------

    def dual_maximizer(self, w) -> np.ndarray:
        w = np.asarray(w, dtype=np.float64)
        coef = self.K_bar.T @ w - self.c_bar
        if self.rho_reg > 0:
            return project(self.domain_v, coef / self.rho_reg)
        return _linear_extremum(self.domain_v, coef, maximize=True)

    def primal_minimizer(self, v) -> np.ndarray:
        v = np.asarray(v, dtype=np.float64)
        coef = self.K_bar @ v + self.b_bar
        if self.mu_reg > 0:
            return project(self.domain_w, -coef / self.mu_reg)
        return _linear_extremum(self.domain_w, coef, maximize=False)

    def saddle(self) -> tuple[np.ndarray, np.ndarray]:
        """Solve the stationarity system; requires both regularizers positive."""
        if not (self.mu_reg > 0 and self.rho_reg > 0):
            raise NoClosedForm("closed-form saddle needs mu_reg > 0 and rho_reg > 0")
        d1, d2 = self.d1, self.d2
        M = np.zeros((d1 + d2, d1 + d2))
        M[:d1, :d1] = self.mu_reg * np.eye(d1)
        M[:d1, d1:] = self.K_bar
        M[d1:, :d1] = self.K_bar.T
        M[d1:, d1:] = -self.rho_reg * np.eye(d2)
        rhs = np.concatenate([-self.b_bar, self.c_bar])
        try:
            sol = np.linalg.solve(M, rhs)
        except np.linalg.LinAlgError as exc:
            raise NoClosedForm("singular stationarity system") from exc
        w, v = sol[:d1], sol[d1:]
        if not (self.domain_w.contains(w) and self.domain_v.contains(v)):
            raise NoClosedForm("unconstrained saddle lies outside the domains")
        return w, v

    def primal_risk(self, w) -> float:
        return self.value(w, self.dual_maximizer(w))

    def primal_min(self) -> float:
        w, v = self.saddle()
        return self.value(w, v)

    def subset(self, indices) -> "QuadraticGame":
        idx = np.asarray(indices, dtype=np.int64)
        return type(self)._from_arrays(self, self.K[idx], self.b[idx], self.c[idx])

    @classmethod
    def _from_arrays(cls, proto, K, b, c):
        return QuadraticGame(K, b, c, proto.mu_reg, proto.rho_reg, proto.domain_w, proto.domain_v)


class BilinearInstance(QuadraticGame):
    """``<w, A_i v> + <b_i, w> - <c_i, v> + (mu/2)||w||^2 - (rho/2)||v||^2``."""

    def __init__(self, A, b, c, mu_reg=0.0, rho_reg=0.0, domain_w=None, domain_v=None):
        super().__init__(A, b, c, mu_reg, rho_reg, domain_w, domain_v)

    @property
    def A(self):
        return self.K

    @classmethod
    def _from_arrays(cls, proto, K, b, c):
        return BilinearInstance(K, b, c, proto.mu_reg, proto.rho_reg, proto.domain_w, proto.domain_v)


class PlscInstance(QuadraticGame):
    """``<v, A_i w - b_i> - (rho/2)||v||^2`` with ``A_i`` of shape ``(d2, d1)``.

    The primal risk is ``R_S(w) = ||A_bar w - b_bar||^2 / (2 rho)``, which is
    PL with ``mu = lambda_min^+(A_bar^T A_bar) / rho``. The v-domain defaults to
    a ball large enough to keep the dual maximizer interior.
    """

    def __init__(self, A, b, rho_reg: float, domain_w: Ball, domain_v: Ball | None = None):
        A = np.ascontiguousarray(A, dtype=np.float64)
        if A.ndim != 3:
            raise ContractViolation("A must have shape (n, d2, d1)")
        if not rho_reg > 0:
            raise ContractViolation("PlscInstance needs rho_reg > 0")
        if not isinstance(domain_w, Ball):
            raise ContractViolation("PlscInstance needs a bounded (Ball) primal domain")
        A_bar = A.mean(axis=0)
        b_bar = np.asarray(b, dtype=np.float64).reshape(A.shape[0], A.shape[1]).mean(axis=0)
        sup_resid = np.linalg.norm(A_bar, 2) * domain_w.radius_bound + np.linalg.norm(b_bar)
        needed = sup_resid / rho_reg
        if domain_v is None:
            domain_v = Ball(radius=max(needed, 1e-12), center=np.zeros(A.shape[1]))
        elif not (isinstance(domain_v, Ball) and domain_v.radius >= needed * (1 - 1e-12) and not np.any(domain_v.center)):
            raise ContractViolation(f"v-domain must be an origin ball of radius >= {needed:.6g}")
        super().__init__(np.transpose(A, (0, 2, 1)), np.zeros((A.shape[0], A.shape[2])), b, 0.0, rho_reg, domain_w, domain_v)
        self.A = A
        self.A_bar = A_bar
        eig = np.linalg.eigvalsh(A_bar.T @ A_bar)
        tol = max(eig.max(), 1.0) * 1e-12 * max(A_bar.shape)
        positive = eig[eig > tol]
        self.mu = float(positive.min() / rho_reg) if positive.size else 0.0
        self.constants = self.constants.with_(mu=self.mu or None, rho=rho_reg)

    def primal_risk(self, w) -> float:
        r = self.A_bar @ np.asarray(w, dtype=np.float64) - self.c_bar
        return float(r @ r) / (2.0 * self.rho_reg)

    def primal_gradient(self, w) -> np.ndarray:
        r = self.A_bar @ np.asarray(w, dtype=np.float64) - self.c_bar
        return self.A_bar.T @ r / self.rho_reg

    def primal_argmin(self) -> np.ndarray:
        w, *_ = np.linalg.lstsq(self.A_bar, self.c_bar, rcond=None)
        if not self.domain_w.contains(w):
            raise NoClosedForm("least-squares minimizer lies outside the primal domain")
        return w

    def primal_min(self) -> float:
        return self.primal_risk(self.primal_argmin())

    def saddle(self):
        w = self.primal_argmin()
        return w, self.dual_maximizer(w)

    @classmethod
    def _from_arrays(cls, proto, K, b, c):
        A = np.transpose(K, (0, 2, 1))
        try:
            return PlscInstance(A, c, proto.rho_reg, proto.domain_w, proto.domain_v)
        except ContractViolation:
            return PlscInstance(A, c, proto.rho_reg, proto.domain_w)
