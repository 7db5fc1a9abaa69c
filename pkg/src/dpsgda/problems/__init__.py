"""Minimax problem contract and concrete instances."""

from .base import Constants, MinimaxProblem, NoClosedForm, dual_maximizer, full_gradient, saddle_point, stochastic_gradient
from .quadratic import BilinearInstance, PlscInstance, QuadraticGame
from .synthetic import make_synthetic, neighbor_pair
from .auc import AucProblem, LinearScorer, MlpScorer
from .auc import auc_per_example_gradient
from .estimate import estimate_constants, max_gradient_norms
