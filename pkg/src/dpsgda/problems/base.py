"""The minimax problem contract shared by every instance."""

from __future__ import annotations

from dataclasses import dataclass, replace

import numpy as np

from ..core import ContractViolation, Domain, as_vec


class NoClosedForm(NotImplementedError):
    """The instance has no closed-form oracle for the requested quantity."""


@dataclass(frozen=True)
class Constants:
    """Regularity constants of an instance (``None`` when not available).

    G_w, G_v: per-example Lipschitz bounds. L: per-example smoothness.
    rho: strong concavity in v. mu: PL constant (of F_S(., v) or of R_S).
    B_w, B_v: gradient variance bounds.
    """

    G_w: float | None = None
    G_v: float | None = None
    L: float | None = None
    rho: float | None = None
    mu: float | None = None
    B_w: float | None = None
    B_v: float | None = None

    def with_(self, **kw) -> "Constants":
        return replace(self, **kw)


class MinimaxProblem:
    """Empirical objective ``F_S(w, v) = (1/n) sum_i f(w, v; z_i)``.

    Subclasses implement :meth:`per_example_gradients` (vectorised over an
    index array) and :meth:`value`; the optional closed-form oracles raise
    :class:`NoClosedForm` by default.
    """

    n: int
    d1: int
    d2: int
    domain_w: Domain
    domain_v: Domain
    constants: Constants

    def per_example_gradients(self, w: np.ndarray, v: np.ndarray, idx: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
        """Per-example gradients of shape ``(len(idx), d1)`` and ``(len(idx), d2)``."""
        raise NotImplementedError

    def value(self, w, v) -> float:
        raise NotImplementedError

    # -- derived -----------------------------------------------------------

    def _check_point(self, w, v):
        return as_vec(w, self.d1, "w"), as_vec(v, self.d2, "v")

    def _check_idx(self, idx) -> np.ndarray:
        idx = np.asarray(idx, dtype=np.int64).reshape(-1)
        if idx.size == 0:
            raise ContractViolation("batch must be nonempty")
        if idx.min() < 0 or idx.max() >= self.n:
            raise ContractViolation(f"batch index out of range [0, {self.n})")
        return idx

    def per_example_gradient(self, i: int, w, v) -> tuple[np.ndarray, np.ndarray]:
        w, v = self._check_point(w, v)
        gw, gv = self.per_example_gradients(w, v, self._check_idx([i]))
        return gw[0], gv[0]

    def _batch_mean_gradient(self, w, v, idx):
        gw, gv = self.per_example_gradients(w, v, idx)
        return gw.mean(axis=0), gv.mean(axis=0)

    def stochastic_gradient(self, w, v, batch) -> tuple[np.ndarray, np.ndarray]:
        """Average of per-example gradients over ``batch`` (duplicates allowed)."""
        w, v = self._check_point(w, v)
        return self._batch_mean_gradient(w, v, self._check_idx(batch))

    def full_gradient(self, w, v) -> tuple[np.ndarray, np.ndarray]:
        w, v = self._check_point(w, v)
        return self._batch_mean_gradient(w, v, np.arange(self.n))

    def initial_point(self, rng=None) -> tuple[np.ndarray, np.ndarray]:
        """Default starting point: zero vectors projected into the domains."""
        from ..core import project

        return project(self.domain_w, np.zeros(self.d1)), project(self.domain_v, np.zeros(self.d2))

    # -- optional oracles --------------------------------------------------

    def dual_maximizer(self, w) -> np.ndarray:
        raise NoClosedForm(f"{type(self).__name__} has no closed-form dual maximizer")

    def primal_minimizer(self, v) -> np.ndarray:
        """``argmin_w F_S(w, v)`` over the primal domain."""
        raise NoClosedForm(f"{type(self).__name__} has no closed-form primal minimizer")

    def saddle(self) -> tuple[np.ndarray, np.ndarray]:
        raise NoClosedForm(f"{type(self).__name__} has no closed-form saddle point")

    def primal_min(self) -> float:
        """``R_S* = min_w max_v F_S(w, v)``."""
        raise NoClosedForm(f"{type(self).__name__} does not expose R_S*")

    def kernel_spec(self):
        """Arrays for the compiled SGDA loop, or ``None`` for the generic path."""
        return None


def saddle_point(problem: MinimaxProblem) -> tuple[np.ndarray, np.ndarray]:
    return problem.saddle()


def dual_maximizer(problem: MinimaxProblem, w) -> np.ndarray:
    return problem.dual_maximizer(w)


def stochastic_gradient(problem: MinimaxProblem, w, v, batch):
    return problem.stochastic_gradient(w, v, batch)


def full_gradient(problem: MinimaxProblem, w, v):
    return problem.full_gradient(w, v)
