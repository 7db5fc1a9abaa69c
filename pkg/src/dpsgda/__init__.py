"""Differentially private stochastic gradient descent ascent (DP-SGDA)."""

__version__ = "0.1.0"
