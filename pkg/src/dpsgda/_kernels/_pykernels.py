"""Pure-numpy reference implementations of the hot loops."""

from __future__ import annotations

import math

import numpy as np

from ..core import MEMBERSHIP_RTOL


def _project(kind, radius, center, lower, upper, p):
    if kind == 1:
        diff = p - center
        norm = math.sqrt(float(diff @ diff))
        if norm > radius * (1.0 + MEMBERSHIP_RTOL):
            return center + diff * (radius / norm)
        return p
    if kind == 2:
        return np.minimum(np.maximum(p, lower), upper)
    return p


def quadgame_block(K, b, c, mu, rho, dom_w, dom_v, w, v, wsum, vsum, idx, xi, zeta, eta_w, eta_v):
    """Run ``len(idx)`` SGDA steps on a quadratic game, updating arrays in place.

    Returns the offset of the first step producing a non-finite iterate, or -1.
    """
    m = idx.shape[1]
    inv_m = 1.0 / m
    for t in range(idx.shape[0]):
        ii = idx[t]
        Ki = K[ii]
        gw = np.einsum("bij,j->i", Ki, v) * inv_m + b[ii].sum(axis=0) * inv_m + mu * w
        gv = np.einsum("bij,i->j", Ki, w) * inv_m - c[ii].sum(axis=0) * inv_m - rho * v
        w_new = _project(*dom_w, w - eta_w[t] * (gw + xi[t]))
        v_new = _project(*dom_v, v + eta_v[t] * (gv + zeta[t]))
        if not (np.isfinite(w_new).all() and np.isfinite(v_new).all()):
            w[:] = w_new
            v[:] = v_new
            return t
        w[:] = w_new
        v[:] = v_new
        wsum += w
        vsum += v
    return -1


def auc_pair_counts(pos, neg):
    """Number of (positive, negative) pairs with pos > neg, and with pos == neg."""
    pos = np.asarray(pos, dtype=np.float64)
    neg = np.asarray(neg, dtype=np.float64)
    greater = 0
    ties = 0
    chunk = max(1, 2_000_000 // max(1, neg.size))
    for s in range(0, pos.size, chunk):
        block = pos[s : s + chunk, None]
        greater += int(np.count_nonzero(block > neg[None, :]))
        ties += int(np.count_nonzero(block == neg[None, :]))
    return greater, ties
