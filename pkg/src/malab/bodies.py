"""Convex bodies, polar duality, and Gauss images.

A body here always contains the origin in its interior, which keeps the
polar involution elementary: the halfspace a . x <= b with b > 0 maps to
the polar vertex a / b and back.  Polytopes carry both representations;
smooth planar bodies are given by a radial function on angles and derive
everything else from dense sampling with local refinement.

The Gauss image of a polytope vertex is the spherical cell of outward
normals supported at that vertex.  Cells of all vertices partition the
sphere up to boundary overlaps, and their measures must add up to the
full sphere area; that identity is the main internal consistency check
for the normal fans used elsewhere.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Callable, Sequence

import numpy as np
from scipy.spatial import ConvexHull

__all__ = [
    "ConvexBody",
    "GaussImageCell",
    "gauss_image",
    "sphere_area",
    "restrict_to_hyperplane",
    "normal_angles",
    "gauss_jacobian_product",
    "random_polytope",
]


def sphere_area(dim: int) -> float:
    """Surface measure of the unit sphere in R^dim (dim >= 1)."""
    from scipy.special import gamma

    return float(2.0 * np.pi ** (dim / 2.0) / gamma(dim / 2.0))


class ConvexBody:
    """Convex body with the origin interior, polytope or smooth planar.

    Parameters
    ----------
    vertices : ndarray, optional
        Vertex list of a polytope mode body.
    radial : callable, optional
        Vectorized radial function theta -> rho(theta) > 0 for a smooth
        planar body.  Exactly one of ``vertices``/``radial`` is given.

    Notes
    -----
    The halfspace representation is normalized to a . x <= b with unit
    rows; b > 0 is asserted because every construction below divides by
    it.
    """

    def __init__(self, vertices: np.ndarray | None = None,
                 radial: Callable[[np.ndarray], np.ndarray] | None = None,
                 _samples: int = 4096):
        if (vertices is None) == (radial is None):
            raise ValueError("give exactly one of vertices or radial")
        if radial is not None:
            self.dim = 2
            self.mode = "smooth"
            self._rho = radial
            self._thetas = np.linspace(0.0, 2.0 * np.pi, _samples, endpoint=False)
            rho = np.asarray(radial(self._thetas), float)
            if np.any(rho <= 0):
                raise ValueError("radial function must be positive")
            self._boundary = rho[:, None] * np.column_stack(
                [np.cos(self._thetas), np.sin(self._thetas)]
            )
            self.vertices = None
            self.A = None
            self.b = None
            return
        V = np.asarray(vertices, float)
        if V.ndim != 2 or len(V) < V.shape[1] + 1:
            raise ValueError("need at least dim + 1 vertices")
        hull = ConvexHull(V)
        self.dim = V.shape[1]
        self.mode = "polytope"
        self.vertices = V[hull.vertices]
        eq = hull.equations
        nrm = np.linalg.norm(eq[:, :-1], axis=1)
        A = eq[:, :-1] / nrm[:, None]
        b = -eq[:, -1] / nrm
        # qhull repeats merged facets occasionally; dedupe on rounded rows
        key = np.round(np.column_stack([A, b]), 12)
        _, keep = np.unique(key, axis=0, return_index=True)
        self.A = A[np.sort(keep)]
        self.b = b[np.sort(keep)]
        if np.any(self.b <= 1e-12):
            raise ValueError("origin must be interior to the body")
        self._hull = hull

    @classmethod
    def from_halfspaces(cls, A: np.ndarray, b: np.ndarray) -> "ConvexBody":
        """Polytope from a . x <= b rows; the origin must satisfy b > 0."""
        A = np.asarray(A, float)
        b = np.asarray(b, float)
        if np.any(b <= 0):
            raise ValueError("origin must be strictly inside every halfspace")
        # vertices of {Ax <= b} are polars of the hull of the polar points
        polar_pts = A / b[:, None]
        hull = ConvexHull(polar_pts)
        eq = hull.equations
        nrm = np.linalg.norm(eq[:, :-1], axis=1)
        verts = eq[:, :-1] / (-eq[:, -1])[:, None]
        if np.any(-eq[:, -1] <= 1e-12 * nrm):
            raise ValueError("halfspaces do not bound a body around the origin")
        return cls(vertices=verts)

    def support(self, U: np.ndarray) -> np.ndarray:
        """Support values h(u) = sup_{x in K} x . u for each row of U."""
        U = np.atleast_2d(np.asarray(U, float))
        if self.mode == "polytope":
            return np.max(U @ self.vertices.T, axis=1)
        # dense sample then two rounds of parabolic refinement around the max
        vals = U @ self._boundary.T
        k = np.argmax(vals, axis=1)
        th = self._thetas[k]
        step = self._thetas[1] - self._thetas[0]
        phi = np.arctan2(U[:, 1], U[:, 0])
        for _ in range(2):
            tm, tp = th - step, th + step
            f0 = self._rho(th) * np.cos(th - phi)
            fm = self._rho(tm) * np.cos(tm - phi)
            fp = self._rho(tp) * np.cos(tp - phi)
            denom = fm - 2.0 * f0 + fp
            shift = np.where(np.abs(denom) > 1e-300,
                             0.5 * step * (fm - fp) / denom, 0.0)
            th = th + np.clip(shift, -step, step)
            step *= 0.05
        h = self._rho(th) * np.cos(th - phi)
        scale = np.linalg.norm(U, axis=1)
        return h * scale

    def radial(self, U: np.ndarray) -> np.ndarray:
        """Radial values rho(u) = max {t >= 0 : t u in K}."""
        U = np.atleast_2d(np.asarray(U, float))
        if self.mode == "smooth":
            th = np.arctan2(U[:, 1], U[:, 0])
            return np.asarray(self._rho(th), float) / np.linalg.norm(U, axis=1)
        proj = U @ self.A.T
        with np.errstate(divide="ignore"):
            t = np.where(proj > 1e-14, self.b[None, :] / proj, np.inf)
        return np.min(t, axis=1)

    def polar(self) -> "ConvexBody":
        """The polar body {y : y . x <= 1 for all x in K}."""
        if self.mode == "polytope":
            return ConvexBody(vertices=self.A / self.b[:, None])
        support = self.support

        def rho_star(theta):
            theta = np.atleast_1d(np.asarray(theta, float))
            u = np.column_stack([np.cos(theta), np.sin(theta)])
            return 1.0 / support(u)

        return ConvexBody(radial=rho_star)

    def contains(self, X: np.ndarray, margin: float = 0.0) -> np.ndarray:
        X = np.atleast_2d(np.asarray(X, float))
        if self.mode == "polytope":
            return np.all(X @ self.A.T <= self.b[None, :] + margin, axis=1)
        r = np.linalg.norm(X, axis=1)
        th = np.arctan2(X[:, 1], X[:, 0])
        return r <= np.asarray(self._rho(th), float) + margin

    @property
    def volume(self) -> float:
        if self.mode == "polytope":
            return float(self._hull.volume)
        th = self._thetas
        rho = np.asarray(self._rho(th), float)
        return float(0.5 * np.mean(rho**2) * 2.0 * np.pi)


@dataclass(frozen=True)
class GaussImageCell:
    """Spherical cell of outward normals supported at one vertex."""

    vertex_index: int
    normals: np.ndarray
    area: float


def _spherical_polygon_area(normals: np.ndarray) -> float:
    """Area of the spherical polygon spanned by unit vectors (3D).

    The vectors are sorted around their mean direction first, then the
    classical angle-sum formula applies: sum of interior angles minus
    (k - 2) pi.
    """
    k = len(normals)
    if k < 3:
        return 0.0
    center = normals.mean(axis=0)
    nc = np.linalg.norm(center)
    if nc < 1e-12:
        raise ValueError("normal cone is not pointed")
    center = center / nc
    # order by angle in the tangent plane at the center
    ref = np.eye(3)[np.argmin(np.abs(center))]
    e1 = ref - center * (ref @ center)
    e1 /= np.linalg.norm(e1)
    e2 = np.cross(center, e1)
    ang = np.arctan2(normals @ e2, normals @ e1)
    P = normals[np.argsort(ang)]
    total = 0.0
    for i in range(k):
        a, b, c = P[i - 1], P[i], P[(i + 1) % k]
        # interior angle at b between great-circle arcs to a and c
        ta = a - b * (a @ b)
        tc = c - b * (c @ b)
        na, ncn = np.linalg.norm(ta), np.linalg.norm(tc)
        if na < 1e-14 or ncn < 1e-14:
            continue
        cosang = np.clip((ta @ tc) / (na * ncn), -1.0, 1.0)
        total += np.arccos(cosang)
    return float(total - (k - 2) * np.pi)


def gauss_image(body: ConvexBody) -> list[GaussImageCell]:
    """Gauss cells of all polytope vertices (dimensions 2 and 3).

    Each vertex collects the outward unit normals of its incident
    facets; the cell measure is the angle they span (2D) or the area of
    the spherical polygon they bound (3D).  Summed over vertices the
    measures tile the sphere, which is what the consistency tests
    assert.
    """
    if body.mode != "polytope":
        raise ValueError("gauss images are defined here for polytopes only")
    if body.dim not in (2, 3):
        raise ValueError("gauss_image supports dimensions 2 and 3")
    V, A, b = body.vertices, body.A, body.b
    incident = np.abs(V @ A.T - b[None, :]) <= 1e-9 * (1.0 + np.abs(b[None, :]))
    cells = []
    for i in range(len(V)):
        normals = A[incident[i]]
        if len(normals) < body.dim:
            raise ValueError(f"vertex {i} has too few incident facets")
        if body.dim == 2:
            ang = np.arctan2(normals[:, 1], normals[:, 0])
            # the cone of an irredundant planar vertex spans < pi
            spread = np.angle(np.exp(1j * (ang[:, None] - ang[None, :])))
            area = float(np.max(spread))
        else:
            area = _spherical_polygon_area(normals)
        cells.append(GaussImageCell(i, normals, area))
    return cells


def normal_angles(body: ConvexBody, thetas: np.ndarray) -> np.ndarray:
    """Outward normal angle of the boundary point at parameter theta.

    Smooth planar bodies only.  The tangent is differentiated with
    central differences at a scale tied to the sampling density, and the
    branch is unwrapped so the result is a monotone circle map (the
    planar Gauss map).
    """
    if body.mode != "smooth":
        raise ValueError("normal_angles needs a smooth planar body")
    thetas = np.asarray(thetas, float)
    hstep = 1e-6
    rho_p = (np.asarray(body._rho(thetas + hstep), float)
             - np.asarray(body._rho(thetas - hstep), float)) / (2.0 * hstep)
    rho = np.asarray(body._rho(thetas), float)
    # tangent = rho' e_r + rho e_theta; outward normal is its -90 rotation
    tx = rho_p * np.cos(thetas) - rho * np.sin(thetas)
    ty = rho_p * np.sin(thetas) + rho * np.cos(thetas)
    alpha = np.arctan2(-tx, ty)  # angle of (ty, -tx), the outward rotation
    alpha = np.unwrap(alpha)
    # a single global branch shift suffices: with the origin interior the
    # outward normal stays within pi/2 of the radial direction, so after
    # unwrapping, anchoring one sample anchors them all
    alpha += 2.0 * np.pi * np.round((thetas.flat[0] - alpha.flat[0]) / (2.0 * np.pi))
    if np.max(np.abs(alpha - thetas)) >= 0.5 * np.pi + 1e-6:
        raise ValueError("normal angle strayed beyond pi/2 of the radius; "
                         "is the origin interior?")
    return alpha


def gauss_jacobian_product(body: ConvexBody, thetas: np.ndarray,
                           h: float = 1e-4) -> np.ndarray:
    """Pointwise product of the Gauss-map jacobians of a body and its polar.

    The planar Gauss map alpha of the body and the map alpha* of the
    polar body invert each other, so alpha*'(alpha(theta)) alpha'(theta)
    must be identically 1.  Both derivatives are taken as central
    differences of the maps themselves at matched parameters; anything
    array-based (gradient stencils on a shared grid plus interpolation)
    loses an order of accuracy at the branch seam.
    """
    thetas = np.asarray(thetas, float)
    polar = body.polar()
    al = normal_angles(body, thetas)
    d1 = (normal_angles(body, thetas + h) - normal_angles(body, thetas - h)) / (2.0 * h)
    d2 = (normal_angles(polar, al + h) - normal_angles(polar, al - h)) / (2.0 * h)
    return d1 * d2


def restrict_to_hyperplane(body: ConvexBody, height: float = 1.0):
    """Chart a body on the hyperplane {x_last = height} as a graph pair.

    Central projection turns the radial function into the function
    u(x) = sqrt(|x|^2 + height^2) / rho(nu(x)) with nu(x) the direction
    of (x, height); u is convex exactly when the body is.  The returned
    companion evaluates the support function in downward directions,
    w(y) = h((y, -1)), the chart of the polar data on the opposite side.

    Returns
    -------
    u, w : callables
        Vectorized evaluators on points of the hyperplane (arrays of
        shape (m, dim - 1)).
    """
    if height <= 0:
        raise ValueError("height must be positive")
    dim = body.dim

    def u(X: np.ndarray) -> np.ndarray:
        X = np.atleast_2d(np.asarray(X, float))
        lifted = np.column_stack([X, np.full(len(X), height)])
        norm = np.linalg.norm(lifted, axis=1)
        return norm / body.radial(lifted / norm[:, None]) / 1.0

    def w(Y: np.ndarray) -> np.ndarray:
        Y = np.atleast_2d(np.asarray(Y, float))
        lifted = np.column_stack([Y, -np.ones(len(Y))])
        return body.support(lifted)

    if dim < 2:
        raise ValueError("restriction needs dim >= 2")
    return u, w


def random_polytope(dim: int, n_points: int, rng: np.random.Generator,
                    anisotropy: float = 2.0) -> ConvexBody:
    """Hull of random points around the origin, rescaled anisotropically.

    The points are sampled on a sphere, pushed through a random diagonal
    stretch in [1/anisotropy, anisotropy], and shifted by a small random
    offset that keeps the origin well inside.
    """
    P = rng.normal(size=(n_points, dim))
    P /= np.linalg.norm(P, axis=1)[:, None]
    stretch = rng.uniform(1.0 / anisotropy, anisotropy, size=dim)
    P = P * stretch[None, :]
    shift = rng.uniform(-0.2, 0.2, size=dim) * stretch.min()
    return ConvexBody(vertices=P + shift[None, :])
