"""AUC maximization with the square loss as a minimax problem.

The primal variable stacks the scorer parameters with the two class
centres ``(a, b)``; the dual variable is a scalar ``v``. Per-example losses
take the weights ``(w_pos, w_neg, kappa)``:

    f_i = w_pos (h_i - a)^2 [y_i = 1] + w_neg (h_i - b)^2 [y_i = -1]
          + 2 (1 + v) (w_neg h_i [y_i = -1] - w_pos h_i [y_i = 1]) - kappa v^2

``paper`` weighting uses ``(1/n_+, 1/n_-, 1/n)``; ``population`` weighting
uses the plug-in probabilities ``(1 - p, p, p (1 - p))`` with ``p = n_+/n``.
The two differ by the constant factor ``n / (n_+ n_-)``.
"""

from __future__ import annotations

import logging

import numpy as np

from ..core import Ball, Box, ContractViolation, Domain, RngStream, project
from .base import Constants, MinimaxProblem, NoClosedForm

log = logging.getLogger(__name__)

WEIGHTINGS = ("paper", "population")


class LinearScorer:
    """``h(theta; x) = <theta, x>``."""

    def __init__(self, dim: int):
        self.dim = dim
        self.n_params = dim

    def scores(self, theta, X) -> np.ndarray:
        return X @ theta

    def per_example_grads(self, theta, X) -> np.ndarray:
        return X

    def weighted_grad(self, theta, X, coef) -> np.ndarray:
        """``sum_j coef_j grad h(theta; x_j)``."""
        return coef @ X

    def init_params(self, rng: RngStream) -> np.ndarray:
        return np.zeros(self.dim)


class MlpScorer:
    """One-hidden-layer Leaky-ReLU network ``W2 . leaky(W1 x + b1) + b2``.

    Parameters are packed as ``[W1 (row-major), b1, W2, b2]``. The
    subgradient of the activation at 0 is taken to be ``leak``.
    """

    def __init__(self, dim: int, hidden: int = 256, leak: float = 0.01):
        if not 0 < leak < 1:
            raise ContractViolation("leak must lie in (0, 1)")
        self.dim, self.hidden, self.leak = dim, hidden, leak
        self.n_params = hidden * dim + 2 * hidden + 1

    def unpack(self, theta):
        h, d = self.hidden, self.dim
        W1 = theta[: h * d].reshape(h, d)
        b1 = theta[h * d : h * d + h]
        W2 = theta[h * d + h : h * d + 2 * h]
        b2 = theta[-1]
        return W1, b1, W2, b2

    def _forward(self, theta, X):
        W1, b1, W2, b2 = self.unpack(theta)
        z = X @ W1.T + b1
        slope = np.where(z > 0, 1.0, self.leak)
        act = z * slope
        return act @ W2 + b2, act, slope, W2

    def scores(self, theta, X) -> np.ndarray:
        return self._forward(theta, X)[0]

    def per_example_grads(self, theta, X) -> np.ndarray:
        _, act, slope, W2 = self._forward(theta, X)
        delta = slope * W2  # dh/dz, shape (m, hidden)
        gW1 = (delta[:, :, None] * X[:, None, :]).reshape(X.shape[0], -1)
        return np.concatenate([gW1, delta, act, np.ones((X.shape[0], 1))], axis=1)

    def weighted_grad(self, theta, X, coef) -> np.ndarray:
        _, act, slope, W2 = self._forward(theta, X)
        delta = slope * W2
        cd = coef[:, None] * delta
        return np.concatenate([(cd.T @ X).ravel(), cd.sum(axis=0), coef @ act, [coef.sum()]])

    def init_params(self, rng: RngStream) -> np.ndarray:
        gen = rng.generator
        W1 = gen.uniform(-1.0, 1.0, size=(self.hidden, self.dim)) / np.sqrt(self.dim)
        W2 = gen.uniform(-1.0, 1.0, size=self.hidden) / np.sqrt(self.hidden)
        return np.concatenate([W1.ravel(), np.zeros(self.hidden), W2, [0.0]])


class AucProblem(MinimaxProblem):
    def __init__(
        self,
        X,
        y,
        scorer=None,
        weighting: str = "paper",
        domain_w: Domain | None = None,
        domain_v: Domain | None = None,
    ):
        X = np.ascontiguousarray(X, dtype=np.float64)
        y = np.asarray(y).astype(np.int64).reshape(-1)
        if X.ndim != 2 or X.shape[0] != y.shape[0]:
            raise ContractViolation("X must be (n, d) with one label per row")
        if not np.all(np.isin(y, (-1, 1))):
            raise ContractViolation("labels must be +1 / -1")
        self.pos = y == 1
        self.neg = ~self.pos
        self.n_pos, self.n_neg = int(self.pos.sum()), int(self.neg.sum())
        if self.n_pos < 1 or self.n_neg < 1:
            raise ContractViolation("both classes must be present (n_+ >= 1 and n_- >= 1)")
        if weighting not in WEIGHTINGS:
            raise ContractViolation(f"weighting must be one of {WEIGHTINGS}")
        self.X, self.y = X, y
        self.n = X.shape[0]
        self.scorer = scorer if scorer is not None else LinearScorer(X.shape[1])
        self.weighting = weighting
        self.n_theta = self.scorer.n_params
        self.d1 = self.n_theta + 2
        self.d2 = 1
        if weighting == "paper":
            self.w_pos, self.w_neg, self.kappa = 1.0 / self.n_pos, 1.0 / self.n_neg, 1.0 / self.n
        else:
            p = self.n_pos / self.n
            self.w_pos, self.w_neg, self.kappa = 1.0 - p, p, p * (1.0 - p)
        self.domain_w = domain_w if domain_w is not None else Ball(radius=10.0, center=np.zeros(self.d1))
        self.domain_v = domain_v if domain_v is not None else Box(np.array([-5.0]), np.array([5.0]))
        self._posf = self.pos.astype(np.float64)
        self._negf = self.neg.astype(np.float64)
        self.constants = self._compute_constants()

    @classmethod
    def from_dataset(cls, dataset, scorer: str = "linear", hidden: int = 256, leak: float = 0.01,
                     weighting: str = "paper", radius_w: float = 10.0, dual_bound: float = 5.0):
        X = dataset.X
        sc = LinearScorer(X.shape[1]) if scorer == "linear" else MlpScorer(X.shape[1], hidden, leak)
        d1 = sc.n_params + 2
        return cls(X, dataset.y, sc, weighting, Ball(radius=radius_w, center=np.zeros(d1)),
                   Box(np.array([-dual_bound]), np.array([dual_bound])))

    def with_data(self, X, y) -> "AucProblem":
        """Same scorer, weighting and domains on another dataset (e.g. a test split)."""
        return AucProblem(X, y, self.scorer, self.weighting, self.domain_w, self.domain_v)

    def _compute_constants(self) -> Constants:
        if not isinstance(self.scorer, LinearScorer):
            return Constants(rho=2.0 * self.kappa)
        R = self.domain_w.radius_bound
        V = self.domain_v.radius_bound
        Xn = float(np.max(np.linalg.norm(self.X, axis=1)))
        G_w = 0.0
        G_v = 0.0
        for wc in (self.w_pos, self.w_neg):
            centre = 2.0 * wc * (R * Xn + R)
            g_theta = centre * Xn + 2.0 * (1.0 + V) * wc * Xn
            G_w = max(G_w, float(np.hypot(g_theta, centre)))
            G_v = max(G_v, 2.0 * wc * R * Xn + 2.0 * self.kappa * V)
        return Constants(G_w=G_w, G_v=G_v, rho=2.0 * self.kappa)

    def split_w(self, w):
        return w[: self.n_theta], w[self.n_theta], w[self.n_theta + 1]

    def scores(self, w, X=None) -> np.ndarray:
        theta = w[: self.n_theta]
        return self.scorer.scores(theta, self.X if X is None else X)

    def _coefficients(self, w, v, idx):
        theta, a, b = self.split_w(w)
        vv = float(v[0])
        Xb = self.X[idx]
        h = self.scorer.scores(theta, Xb)
        pos, neg = self._posf[idx], self._negf[idx]
        wp, wn = self.w_pos, self.w_neg
        alpha = 2 * wp * (h - a) * pos + 2 * wn * (h - b) * neg + 2 * (1 + vv) * (wn * neg - wp * pos)
        ga = 2 * wp * (a - h) * pos
        gb = 2 * wn * (b - h) * neg
        gv = 2 * (wn * h * neg - wp * h * pos) - 2 * self.kappa * vv
        return theta, Xb, alpha, ga, gb, gv

    def per_example_gradients(self, w, v, idx):
        theta, Xb, alpha, ga, gb, gv = self._coefficients(w, v, idx)
        gtheta = alpha[:, None] * self.scorer.per_example_grads(theta, Xb)
        return np.column_stack([gtheta, ga, gb]), gv[:, None]

    def _batch_mean_gradient(self, w, v, idx):
        theta, Xb, alpha, ga, gb, gv = self._coefficients(w, v, idx)
        m = len(idx)
        gtheta = self.scorer.weighted_grad(theta, Xb, alpha / m)
        return np.concatenate([gtheta, [ga.mean(), gb.mean()]]), np.array([gv.mean()])

    def value(self, w, v) -> float:
        w, v = self._check_point(w, v)
        theta, a, b = self.split_w(w)
        vv = float(v[0])
        h = self.scorer.scores(theta, self.X)
        pos, neg = self._posf, self._negf
        f = (self.w_pos * (h - a) ** 2 * pos + self.w_neg * (h - b) ** 2 * neg
             + 2 * (1 + vv) * (self.w_neg * h * neg - self.w_pos * h * pos) - self.kappa * vv * vv)
        return float(f.mean())

    def dual_maximizer(self, w) -> np.ndarray:
        h = self.scores(np.asarray(w, dtype=np.float64))
        v_star = float(h[self.neg].mean() - h[self.pos].mean())
        out = project(self.domain_v, np.array([v_star]))
        if out[0] != v_star:
            log.warning("AUC dual maximizer %.4g clipped to the dual domain", v_star)
        return out

    def primal_risk(self, w) -> float:
        return self.value(w, self.dual_maximizer(w))

    def initial_point(self, rng=None):
        rng = rng if rng is not None else RngStream(0)
        theta = self.scorer.init_params(rng)
        w0 = np.concatenate([theta, [0.0, 0.0]])
        return project(self.domain_w, w0), project(self.domain_v, np.zeros(1))


def auc_per_example_gradient(problem: AucProblem, w, v, i: int) -> tuple[np.ndarray, float]:
    """Gradient of example ``i`` w.r.t. ``(theta, a, b)`` and the scalar dual gradient."""
    gw, gv = problem.per_example_gradient(i, w, np.atleast_1d(v))
    return gw, float(gv[0])
