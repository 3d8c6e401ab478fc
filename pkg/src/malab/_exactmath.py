"""Compensated (double-double) primitives for envelope evaluation.

The Legendre involution contract is bitwise: conjugating twice must
reproduce the envelope values exactly.  The evaluation scheme anchors
every supporting plane at a witness node, so terms of the form
``(x - X_w) . p + u_w`` must be computed with the site difference taken
error-free and the dot product compensated.  These helpers implement the
standard error-free transformations (Dekker/Knuth) vectorized over numpy
arrays; all inputs are float64.
"""

from __future__ import annotations

import numpy as np

__all__ = ["two_sum", "two_diff", "two_prod", "dot_compensated", "plane_terms"]

_SPLITTER = 134217729.0  # 2**27 + 1


def two_sum(a, b):
    s = a + b
    bb = s - a
    err = (a - (s - bb)) + (b - bb)
    return s, err


def two_diff(a, b):
    s = a - b
    bb = s - a
    err = (a - (s - bb)) - (b + bb)
    return s, err


def two_prod(a, b):
    p = a * b
    ah = _SPLITTER * a
    ah = ah - (ah - a)
    al = a - ah
    bh = _SPLITTER * b
    bh = bh - (bh - b)
    bl = b - bh
    err = ((ah * bh - p) + ah * bl + al * bh) + al * bl
    return p, err


def dot_compensated(dh, dl, p):
    """Sum_k (dh_k + dl_k) * p_k along the last axis, double-double.

    (dh, dl) is an error-free split of the difference vectors, p a plain
    float64 array broadcastable against them.  Returns (hi, lo).
    """
    hi = np.zeros(np.broadcast(dh[..., 0], p[..., 0]).shape)
    lo = np.zeros_like(hi)
    for k in range(dh.shape[-1]):
        ph, pe = two_prod(dh[..., k], p[..., k])
        pe = pe + dl[..., k] * p[..., k]
        hi, e = two_sum(hi, ph)
        lo = lo + (e + pe)
    return hi, lo


def plane_terms(x, witness_sites, witness_values, slopes):
    """Evaluate (x - X_w) . p + u_w for every (witness, slope) pair.

    x : (d,) point; witness_sites : (K, d); witness_values : (K,);
    slopes : (K, d).  Returns the K term values rounded once at the end.
    The difference x - X_w is split error-free, so a pair whose witness
    site equals x bitwise contributes exactly u_w.
    """
    dh, dl = two_diff(x[None, :], witness_sites)
    hi, lo = dot_compensated(dh, dl, slopes)
    hi, e = two_sum(hi, witness_values)
    return hi + (lo + e)
