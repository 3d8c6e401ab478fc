"""Inscribed ellipsoids of convex polytopes.

The construction runs in two deterministic steps.  A Khachiyan barycentric
ascent computes the minimum-volume enclosing ellipsoid (MVEE) of the
polytope's vertices to a containment-factor tolerance, which fixes the
center and the axis directions.  The MVEE is then shrunk about its center
by the exact largest factor that fits inside the H-representation.  The
shrink factor is never below 1/n (the classical inner John bound for the
MVEE), so the polytope is contained in n times the inscribed ellipsoid
about its center, comfortably within the advertised n^{3/2} sandwich.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .clip import njit

__all__ = ["JohnEllipsoid", "mvee", "inscribed_ellipsoid", "SANDWICH_FACTOR"]


def SANDWICH_FACTOR(dim: int) -> float:
    """Guaranteed outer containment factor for :func:`inscribed_ellipsoid`."""
    return float(dim) ** 1.5


@dataclass(frozen=True)
class JohnEllipsoid:
    """Ellipsoid {center + sum_i t_i d_i e_i : |t| <= 1} with d_1 >= ... >= d_n.

    ``axes`` holds the unit directions as rows, ordered by decreasing
    length.  ``shape`` maps the unit ball onto the centered ellipsoid.
    """

    center: np.ndarray
    axes: np.ndarray
    lengths: np.ndarray

    @property
    def dim(self) -> int:
        return len(self.center)

    @property
    def shape(self) -> np.ndarray:
        return (self.axes.T * self.lengths) @ self.axes

    @property
    def volume(self) -> float:
        return float(_unit_ball_volume(self.dim) * np.prod(self.lengths))

    def contains(self, points: np.ndarray, scale: float = 1.0, rtol: float = 1e-9) -> np.ndarray:
        """Membership of points in center + scale*(E - center), vectorized."""
        y = (np.atleast_2d(points) - self.center) @ self.axes.T
        r2 = np.sum((y / (scale * self.lengths)) ** 2, axis=1)
        return r2 <= 1.0 + rtol


def _unit_ball_volume(n: int) -> float:
    from math import gamma, pi

    return pi ** (n / 2) / gamma(n / 2 + 1)


@njit(cache=True)
def _khachiyan_ascent(Q, u, d, tol, max_iter):
    """Away-step Frank-Wolfe ascent on the MVEE weights, in place.

    Moment inverses are maintained by Sherman-Morrison rank-1 updates and
    refreshed from scratch every 1024 steps.  Returns -1 on a singular
    moment matrix, otherwise the iteration count used.
    """
    N, m = Q.shape
    dp1 = d + 1.0
    X = Q.T @ (Q * u.reshape(-1, 1))
    if np.abs(np.linalg.det(X)) < 1e-300:
        return -1
    Xi = np.linalg.inv(X)
    M = np.empty(N)
    for i in range(N):
        v = 0.0
        for a in range(m):
            row = 0.0
            for bb in range(m):
                row += Xi[a, bb] * Q[i, bb]
            v += Q[i, a] * row
        M[i] = v
    for it in range(max_iter):
        jp = 0
        kp = -1.0
        for i in range(N):
            if M[i] > kp:
                kp = M[i]
                jp = i
        if kp <= (1.0 + tol) * dp1:
            return it
        km = 1e300
        jm = -1
        for i in range(N):
            if u[i] > 1e-14 and M[i] < km:
                km = M[i]
                jm = i
        if kp - dp1 >= dp1 - km or jm < 0:
            j = jp
            k = kp
            lam = (k - dp1) / (dp1 * (k - 1.0))
        else:
            j = jm
            k = km
            lam = (k - dp1) / (dp1 * (k - 1.0))
            lmin = -u[j] / (1.0 - u[j])
            if lam < lmin:
                lam = lmin
        if lam == 0.0:
            return it
        w = np.empty(m)
        for a in range(m):
            s = 0.0
            for bb in range(m):
                s += Xi[a, bb] * Q[j, bb]
            w[a] = s
        qw = 0.0
        for a in range(m):
            qw += Q[j, a] * w[a]
        om = 1.0 - lam
        denom = om + lam * qw
        if denom <= 1e-300 or om <= 1e-300:
            return -1
        coef = lam / (om * denom)
        for i in range(N):
            u[i] *= om
        u[j] += lam
        if (it + 1) % 1024 == 0:
            X = Q.T @ (Q * u.reshape(-1, 1))
            if np.abs(np.linalg.det(X)) < 1e-300:
                return -1
            Xi = np.linalg.inv(X)
            for i in range(N):
                v = 0.0
                for a in range(m):
                    row = 0.0
                    for bb in range(m):
                        row += Xi[a, bb] * Q[i, bb]
                    v += Q[i, a] * row
                M[i] = v
        else:
            for a in range(m):
                for bb in range(m):
                    Xi[a, bb] = Xi[a, bb] / om - coef * w[a] * w[bb]
            for i in range(N):
                s = 0.0
                for a in range(m):
                    s += Q[i, a] * w[a]
                M[i] = M[i] / om - coef * s * s
    return max_iter


def mvee(points: np.ndarray, tol: float = 1e-7, max_iter: int = 200000):
    """Minimum-volume enclosing ellipsoid of a point set (Khachiyan ascent).

    Returns (center, M) with the ellipsoid {x : (x-c)^T M (x-c) <= 1}.
    The iteration stops when every point is inside the ellipsoid inflated
    by at most (1 + tol).
    """
    P = np.asarray(points, dtype=float)
    N, d = P.shape
    if N < d + 1:
        raise ValueError("no interior")
    Q = np.column_stack([P, np.ones(N)])
    u = np.full(N, 1.0 / N)
    if _khachiyan_ascent(Q, u, float(d), float(tol), max_iter) < 0:
        raise ValueError("no interior")
    c = P.T @ u
    cov = P.T @ (P * u[:, None]) - np.outer(c, c)
    try:
        Minv = np.linalg.inv(cov) / d
    except np.linalg.LinAlgError:
        raise ValueError("no interior") from None
    return c, Minv


def inscribed_ellipsoid(
    vertices: np.ndarray,
    A: np.ndarray,
    b: np.ndarray,
    tol: float = 1e-7,
) -> JohnEllipsoid:
    """Large inscribed ellipsoid of the polytope conv(vertices) = {A x <= b}.

    Parameters
    ----------
    vertices : the polytope's vertex list (both representations are needed;
        vertices drive the MVEE, the rows of (A, b) the exact shrink).
    tol : Khachiyan containment tolerance.

    Raises
    ------
    ValueError("no interior") when the polytope is flat to rounding.
    """
    V = np.asarray(vertices, dtype=float)
    if V.ndim != 2 or len(V) == 0:
        raise ValueError("no interior")
    dim = V.shape[1]
    if dim == 1:
        lo, hi = float(np.min(V)), float(np.max(V))
        if hi - lo <= 0:
            raise ValueError("no interior")
        half = 0.5 * (hi - lo)
        return JohnEllipsoid(
            center=np.array([0.5 * (lo + hi)]),
            axes=np.eye(1),
            lengths=np.array([half]),
        )
    c, Minv = mvee(V, tol=tol)
    # eigendecomposition of the outer ellipsoid: Minv = sum l_i^2 e_i e_i^T
    evals, evecs = np.linalg.eigh(np.linalg.inv(Minv))
    if np.min(evals) <= 0:
        raise ValueError("no interior")
    outer_len = np.sqrt(evals)          # ascending
    L = evecs * outer_len               # maps unit ball to centered MVEE
    An = np.asarray(A, dtype=float)
    bn = np.asarray(b, dtype=float)
    gap = bn - An @ c
    denom = np.linalg.norm(An @ L, axis=1)
    keep = denom > 1e-300
    if not np.all(gap[keep] > -1e-9 * (1.0 + np.abs(bn[keep]))):
        raise ValueError("no interior")
    s = float(np.min(gap[keep] / denom[keep]))
    if s <= 0:
        raise ValueError("no interior")
    lengths = outer_len * s
    order = np.argsort(lengths)[::-1]
    return JohnEllipsoid(
        center=c,
        axes=evecs.T[order],
        lengths=lengths[order],
    )
