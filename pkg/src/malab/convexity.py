"""Piecewise-linear convex functions and their Aleksandrov measures.

A function here is the lower convex hull of lifted nodes (X_i, u_i): its
graph is the envelope, its subdifferential at a node is a polytope of
slopes, and the discrete Monge-Ampere measure assigns each interior node
the volume of that polytope.  The Legendre conjugate and its involution
are evaluated through witness-anchored supporting planes, which is what
makes conjugating twice reproduce envelope values bit for bit: every
supporting plane is stored as (slope p, witness node w) and evaluated as
(x - X_w) . p + u_w with the site difference taken error-free, so at
x = X_w the term is exactly u_w regardless of how p was rounded.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np
from scipy.spatial import ConvexHull, Delaunay, QhullError, cKDTree

from ._exactmath import plane_terms, two_diff, two_prod, two_sum
from ._parallel import ordered_map
from .geometry import clip_halfspaces

__all__ = [
    "Domain",
    "PLConvexFunction",
    "SubdifferentialCell",
    "DiscreteMeasure",
    "lower_envelope",
    "subdifferential",
    "ma_measure",
    "legendre",
]

# Nodes whose raw value sits within this relative distance of the computed
# envelope are treated as envelope-active and keep their raw value bit for
# bit.  Below double precision's certifiable resolution, "on the hull" is
# the only defensible verdict, and it is what makes re-enveloping an
# envelope the exact identity.
ACTIVE_RTOL = 1e-13


@dataclass(frozen=True)
class Domain:
    """Bounded convex polytope with a finite node set.

    ``vertices`` are the polytope's corners, ``nodes`` the sites carrying
    function values, flagged interior or boundary by ``is_boundary``.
    """

    dim: int
    vertices: np.ndarray
    nodes: np.ndarray
    is_boundary: np.ndarray

    def __post_init__(self):
        object.__setattr__(self, "vertices", np.atleast_2d(np.asarray(self.vertices, float)))
        object.__setattr__(self, "nodes", np.atleast_2d(np.asarray(self.nodes, float)))
        object.__setattr__(self, "is_boundary", np.asarray(self.is_boundary, bool))
        if self.vertices.shape[1] != self.dim or self.nodes.shape[1] != self.dim:
            raise ValueError("dimension mismatch")
        if len(self.is_boundary) != len(self.nodes):
            raise ValueError("one boundary flag per node")
        if not np.all(np.isfinite(self.vertices)) or not np.all(np.isfinite(self.nodes)):
            raise ValueError("nonfinite coordinates")
        centered = self.vertices - self.vertices.mean(axis=0)
        if np.linalg.matrix_rank(centered, tol=1e-12) < self.dim:
            raise ValueError("domain polytope has empty interior")
        A, b = self.hull_rows()
        slack = self.nodes @ A.T - b
        scale = 1.0 + float(np.max(np.abs(self.vertices)))
        if np.any(slack > 1e-9 * scale):
            raise ValueError("node outside the domain closure")
        tree = cKDTree(self.nodes)
        pairs = tree.query_pairs(1e-12 * scale)
        if pairs:
            raise ValueError("duplicate node sites")

    def hull_rows(self) -> tuple[np.ndarray, np.ndarray]:
        """H-representation A x <= b of the domain polytope (cached)."""
        cached = getattr(self, "_hull_rows", None)
        if cached is None:
            if self.dim == 1:
                lo, hi = float(np.min(self.vertices)), float(np.max(self.vertices))
                cached = (np.array([[1.0], [-1.0]]), np.array([hi, -lo]))
            else:
                hull = ConvexHull(self.vertices)
                cached = (hull.equations[:, :-1].copy(), -hull.equations[:, -1].copy())
            object.__setattr__(self, "_hull_rows", cached)
        return cached

    @property
    def interior_indices(self) -> np.ndarray:
        return np.flatnonzero(~self.is_boundary)

    @property
    def boundary_indices(self) -> np.ndarray:
        return np.flatnonzero(self.is_boundary)

    def contains(self, points: np.ndarray, margin: float = 0.0) -> np.ndarray:
        """True where points lie in the closure shrunk inward by ``margin``."""
        A, b = self.hull_rows()
        pts = np.atleast_2d(points)
        norms = np.linalg.norm(A, axis=1)
        return np.all(pts @ A.T <= b - margin * norms, axis=1)

    @staticmethod
    def box_grid(lo, hi, shape) -> "Domain":
        """Regular grid on an axis box; box faces are the boundary nodes."""
        lo = np.atleast_1d(np.asarray(lo, float))
        hi = np.atleast_1d(np.asarray(hi, float))
        shape = np.atleast_1d(np.asarray(shape, int))
        dim = len(lo)
        axes = [np.linspace(lo[k], hi[k], shape[k]) for k in range(dim)]
        mesh = np.meshgrid(*axes, indexing="ij")
        nodes = np.column_stack([m.ravel() for m in mesh])
        onface = np.zeros(len(nodes), bool)
        for k in range(dim):
            onface |= np.isclose(nodes[:, k], lo[k]) | np.isclose(nodes[:, k], hi[k])
        corners = np.array(np.meshgrid(*zip(lo, hi), indexing="ij")).reshape(dim, -1).T
        return Domain(dim=dim, vertices=corners, nodes=nodes, is_boundary=onface)

    @staticmethod
    def from_nodes(nodes, is_boundary, vertices=None) -> "Domain":
        nodes = np.atleast_2d(np.asarray(nodes, float))
        if vertices is None:
            if nodes.shape[1] == 1:
                vertices = np.array([[nodes.min()], [nodes.max()]])
            else:
                hull = ConvexHull(nodes)
                vertices = nodes[hull.vertices]
        return Domain(nodes.shape[1], vertices, nodes, np.asarray(is_boundary, bool))


@dataclass(eq=False)
class PLConvexFunction:
    """Lower convex hull of lifted nodes, with its supporting-plane pairs.

    ``values`` are envelope values (raw data at active nodes, the hull
    height at nodes the convexification dropped).  ``facets`` lists the
    node indices of each lower-hull simplex and ``gradients`` its slope.
    ``pair_slopes``/``pair_witness`` enumerate every (facet, vertex)
    combination; they define evaluation everywhere and are the basis of
    the conjugation scheme.
    """

    domain: Domain
    values: np.ndarray
    raw_values: np.ndarray
    active: np.ndarray
    facets: np.ndarray
    gradients: np.ndarray
    pair_slopes: np.ndarray
    pair_witness: np.ndarray
    conjugate_of: "PLConvexFunction | None" = None
    _active_tree: cKDTree | None = field(default=None, repr=False)

    @property
    def dim(self) -> int:
        return self.domain.dim

    @property
    def n_nodes(self) -> int:
        return len(self.values)

    def evaluate(self, points: np.ndarray) -> np.ndarray:
        """Envelope value max_F (plane of F) at arbitrary points.

        On conv(nodes) this is the function itself; outside it continues
        the supporting planes (the natural PL extension).
        """
        pts = np.atleast_2d(np.asarray(points, float))
        wsites = self.domain.nodes[self.pair_witness]
        wvals = self.values[self.pair_witness]
        out = np.empty(len(pts))
        for k, x in enumerate(pts):
            out[k] = np.max(plane_terms(x, wsites, wvals, self.pair_slopes))
        return out

    def __call__(self, x) -> float:
        return float(self.evaluate(np.atleast_2d(np.asarray(x, float)))[0])

    def value_at_node(self, j: int) -> float:
        """Envelope value at node j via the canonical rule.

        Active nodes short-circuit to their stored value: their witness
        pair evaluates to exactly that value and, by the supporting-plane
        property, no other pair exceeds it in exact arithmetic.
        """
        if self.active[j]:
            return float(self.values[j])
        x = self.domain.nodes[j]
        terms = plane_terms(
            x,
            self.domain.nodes[self.pair_witness],
            self.values[self.pair_witness],
            self.pair_slopes,
        )
        return float(np.max(terms))

    def gradient_at_node(self, j: int) -> np.ndarray:
        """A representative subgradient: mean of incident facet slopes.

        Active nodes that are not facet vertices (coplanar promotions)
        fall back to the slope of the supporting plane through the node.
        """
        mask = np.any(self.facets == j, axis=1)
        if np.any(mask):
            return self.gradients[mask].mean(axis=0)
        if not self.active[j]:
            raise ValueError("node below envelope")
        x = self.domain.nodes[j]
        terms = plane_terms(
            x,
            self.domain.nodes[self.pair_witness],
            self.values[self.pair_witness],
            self.pair_slopes,
        )
        return self.pair_slopes[int(np.argmax(terms))].copy()

    def slope_bound(self) -> float:
        return float(np.max(np.abs(self.gradients))) if len(self.gradients) else 0.0

    def active_tree(self) -> cKDTree:
        if self._active_tree is None:
            self._active_tree = cKDTree(self.domain.nodes[self.active])
        return self._active_tree


@dataclass(frozen=True)
class SubdifferentialCell:
    """The slope polytope of one node, with its volume.

    Boundary nodes have unbounded cells; those are clipped to a reporting
    box and flagged.
    """

    node: int
    vertices: np.ndarray
    volume: float
    unbounded: bool


@dataclass(frozen=True)
class DiscreteMeasure:
    masses: np.ndarray

    def __post_init__(self):
        object.__setattr__(self, "masses", np.asarray(self.masses, float))
        if np.any(self.masses < 0) or not np.all(np.isfinite(self.masses)):
            raise ValueError("masses must be finite and nonnegative")

    @property
    def total(self) -> float:
        return float(np.sum(self.masses))

    def __le__(self, other: "DiscreteMeasure") -> bool:
        return bool(np.all(self.masses <= other.masses))


# ---------------------------------------------------------------------------
# Envelope construction.
# ---------------------------------------------------------------------------


def _lower_hull_1d(x: np.ndarray, u: np.ndarray):
    """Andrew-chain lower hull; collinear nodes stay on the chain."""
    order = np.argsort(x, kind="stable")
    chain: list[int] = []
    for idx in order:
        while len(chain) >= 2:
            i, j = chain[-2], chain[-1]
            # drop j when it lies strictly above segment (i, idx)
            lhs = (u[j] - u[i]) * (x[idx] - x[i])
            rhs = (u[idx] - u[i]) * (x[j] - x[i])
            if lhs > rhs:
                chain.pop()
            else:
                break
        chain.append(int(idx))
    facets = np.array([[chain[k], chain[k + 1]] for k in range(len(chain) - 1)], dtype=int)
    if len(facets) == 0:
        raise ValueError("degenerate sites")
    grads = (u[facets[:, 1]] - u[facets[:, 0]]) / (x[facets[:, 1]] - x[facets[:, 0]])
    return facets, grads.reshape(-1, 1)


def _affine_fit(X: np.ndarray, u: np.ndarray):
    """Best affine fit u ~ g.x + c; returns (g, c, max residual)."""
    A = np.column_stack([X, np.ones(len(X))])
    coef, *_ = np.linalg.lstsq(A, u, rcond=None)
    res = float(np.max(np.abs(A @ coef - u))) if len(u) else 0.0
    return coef[:-1], coef[-1], res


def lower_envelope(domain: Domain, raw_values: np.ndarray) -> PLConvexFunction:
    """Largest convex PL function below the raw node values.

    Parameters
    ----------
    domain : node sites and polytope.
    raw_values : one value per node.

    Returns
    -------
    PLConvexFunction whose values equal ``raw_values`` at hull-active
    nodes (bit for bit) and the hull height at dropped nodes.

    Raises
    ------
    ValueError("degenerate sites") when the sites span no full-dimensional
    simplex, so no envelope with facets exists.
    """
    u = np.asarray(raw_values, float).copy()
    if u.shape != (len(domain.nodes),):
        raise ValueError("one value per node")
    if not np.all(np.isfinite(u)):
        raise ValueError("nonfinite values")
    X = domain.nodes
    d = domain.dim

    if d == 1:
        facets, grads = _lower_hull_1d(X[:, 0], u)
    else:
        centered = X - X.mean(axis=0)
        if np.linalg.matrix_rank(centered, tol=1e-10) < d:
            raise ValueError("degenerate sites")
        scale = 1.0 + float(np.max(np.abs(u)))
        g_fit, c_fit, res = _affine_fit(X, u)
        if res <= 1e-13 * scale:
            tri = Delaunay(X, qhull_options="Qt Qbb")
            facets = np.asarray(tri.simplices, dtype=int)
            grads = np.tile(g_fit, (len(facets), 1))
        else:
            lifted = np.column_stack([X, u])
            try:
                hull = ConvexHull(lifted, qhull_options="Qt")
            except QhullError as exc:
                raise ValueError("degenerate sites") from exc
            normals = hull.equations[:, :-1]
            lower = normals[:, -1] < -1e-10
            facets = np.asarray(hull.simplices[lower], dtype=int)
            nrm = hull.equations[lower]
            grads = -nrm[:, :d] / nrm[:, d : d + 1]
            if len(facets) == 0:
                raise ValueError("degenerate sites")

    active = np.zeros(len(u), bool)
    active[np.unique(facets)] = True

    # every (facet, vertex) combination is a supporting-plane pair
    pair_slopes = np.repeat(grads, d + 1, axis=0)
    pair_witness = facets.reshape(-1)

    # hull-inactive nodes take the envelope height; nodes indistinguishable
    # from the hull at double precision are promoted to active instead
    values = u.copy()
    scale = 1.0 + float(np.max(np.abs(u)))
    for j in np.flatnonzero(~active):
        terms = plane_terms(X[j], X[pair_witness], values[pair_witness], pair_slopes)
        ev = float(np.max(terms))
        if u[j] <= ev + ACTIVE_RTOL * scale:
            active[j] = True
        else:
            values[j] = ev
    return PLConvexFunction(
        domain=domain,
        values=values,
        raw_values=u.copy(),
        active=active,
        facets=facets,
        gradients=grads,
        pair_slopes=pair_slopes,
        pair_witness=pair_witness,
    )


# ---------------------------------------------------------------------------
# Subdifferential cells and the Monge-Ampere measure.
# ---------------------------------------------------------------------------


def _cell_clip(u: PLConvexFunction, i: int, candidates: np.ndarray, lo, hi):
    X = u.domain.nodes
    A = X[candidates] - X[i]
    b = u.values[candidates] - u.values[i]
    return clip_halfspaces(A, b, lo, hi)


def _slope_box(u: PLConvexFunction, pad_factor: float = 0.5):
    g = u.gradients
    lo = g.min(axis=0)
    hi = g.max(axis=0)
    pad = pad_factor * float(np.max(hi - lo)) + 1.0
    return lo - pad, hi + pad


def subdifferential(u: PLConvexFunction, node: int) -> SubdifferentialCell:
    """Slope polytope {p : (X_k - X_i).p <= u_k - u_i for all k} at a node.

    Equals the convex hull of incident facet gradients for active interior
    nodes.  Boundary-node cells are unbounded and come back clipped to a
    slope box with ``unbounded=True``.

    Raises
    ------
    ValueError("node below envelope") for hull-inactive nodes.
    """
    if not u.active[node]:
        raise ValueError("node below envelope")
    X = u.domain.nodes
    act = np.flatnonzero(u.active)
    act = act[act != node]
    lo, hi = _slope_box(u)
    if len(act) == 0:
        return SubdifferentialCell(node, np.empty((0, u.dim)), 0.0, True)

    dist = np.linalg.norm(X[act] - X[node], axis=1)
    order = act[np.lexsort((act, dist))]
    k0 = min(len(order), max(24 * u.dim, 16))
    cand = order[:k0]
    scale = 1.0 + float(np.max(np.abs(u.values)))
    for _ in range(12):
        poly = _cell_clip(u, node, cand, lo, hi)
        if poly.empty:
            break
        rest = np.setdiff1d(order, cand, assume_unique=False)
        if len(rest) == 0:
            break
        Ar = X[rest] - X[node]
        br = u.values[rest] - u.values[node]
        worst = np.max(poly.vertices @ Ar.T - br, axis=0)
        viol = worst > 1e-12 * scale
        if not np.any(viol):
            break
        cand = np.concatenate([cand, rest[viol]])
    else:
        poly = _cell_clip(u, node, order, lo, hi)

    if poly.empty or poly.volume <= 0.0:
        # cell degenerated to (a piece of) a lower-dimensional set
        verts = poly.vertices if not poly.empty else u.gradient_at_node(node)[None, :]
        return SubdifferentialCell(node, verts, 0.0, False)
    return SubdifferentialCell(node, poly.vertices, float(poly.volume), bool(poly.truncated))


def ma_measure(u: PLConvexFunction) -> DiscreteMeasure:
    """Monge-Ampere masses: interior nodes carry their cell volume.

    Boundary nodes get mass zero by convention; their slope cells are
    unbounded and belong to the boundary trace, not to the measure.
    """
    masses = np.zeros(u.n_nodes)
    interior = u.domain.interior_indices

    def one(i: int) -> float:
        if not u.active[i]:
            return 0.0
        return subdifferential(u, i).volume

    vols = ordered_map(one, [int(i) for i in interior])
    masses[interior] = vols
    return DiscreteMeasure(masses)


# ---------------------------------------------------------------------------
# Legendre conjugation.
# ---------------------------------------------------------------------------


def _conjugate_values(X: np.ndarray, u: np.ndarray, slopes: np.ndarray):
    """max_i (X_i . p - u_i) per slope, compensated, with argmax witnesses."""
    values = np.empty(len(slopes))
    witnesses = np.empty(len(slopes), dtype=int)
    for k, p in enumerate(slopes):
        hi = np.zeros(len(X))
        lo = np.zeros(len(X))
        for c in range(X.shape[1]):
            ph, pe = two_prod(X[:, c], p[c])
            hi, e = two_sum(hi, ph)
            lo = lo + (e + pe)
        hi, e = two_sum(hi, -u)
        t = hi + (lo + e)
        w = int(np.argmax(t))
        witnesses[k] = w
        values[k] = t[w]
    return values, witnesses


def _dedup_slopes(slopes: np.ndarray, scale: float):
    """Merge slopes equal to within 1e-9 relative; keeps first occurrence."""
    if len(slopes) == 0:
        return slopes, np.zeros(0, int)
    tree = cKDTree(slopes)
    groups = tree.query_ball_point(slopes, 1e-9 * scale)
    keep = []
    owner = np.full(len(slopes), -1, int)
    for k in range(len(slopes)):
        if owner[k] >= 0:
            continue
        owner[np.asarray(groups[k], int)] = len(keep)
        owner[k] = len(keep)
        keep.append(k)
    return slopes[keep], owner


def legendre(u: PLConvexFunction) -> PLConvexFunction:
    """Legendre conjugate p -> max_i (X_i . p - u_i) on facet-slope nodes.

    Conjugating a conjugate routes through the biconjugate evaluator: the
    result lives back on the original sites and reproduces the envelope
    values exactly (active nodes by witness cancellation, dropped nodes by
    rerunning the identical compensated formula).
    """
    if u.conjugate_of is not None:
        return _biconjugate(u.conjugate_of)
    X = u.domain.nodes
    scale = 1.0 + float(np.max(np.abs(u.gradients))) if len(u.gradients) else 1.0
    slopes, _ = _dedup_slopes(u.gradients, scale)
    if len(slopes) <= u.dim:
        # a single affine piece: conjugate is a point mass; widen with the
        # same slope replicated is useless, so build a tiny simplex of
        # supporting slopes around it instead
        base = slopes[0] if len(slopes) else np.zeros(u.dim)
        eye = np.eye(u.dim)
        extra = [base] + [base + 1e-6 * eye[k] for k in range(u.dim)]
        slopes = np.unique(np.vstack(extra), axis=0)
    cvals, _w = _conjugate_values(X, u.values, slopes)
    if u.dim == 1:
        dom = Domain.from_nodes(slopes, _hull_boundary_mask_1d(slopes))
    else:
        dom = Domain.from_nodes(slopes, _hull_boundary_mask(slopes))
    conj = lower_envelope(dom, cvals)
    conj.conjugate_of = u
    return conj


def _hull_boundary_mask(points: np.ndarray) -> np.ndarray:
    mask = np.zeros(len(points), bool)
    try:
        hull = ConvexHull(points)
        mask[hull.vertices] = True
        A = hull.equations[:, :-1]
        b = -hull.equations[:, -1]
        scale = 1.0 + float(np.max(np.abs(points)))
        on_face = np.any(points @ A.T >= b[None, :] - 1e-9 * scale, axis=1)
        mask |= on_face
    except QhullError:
        mask[:] = True
    return mask


def _hull_boundary_mask_1d(points: np.ndarray) -> np.ndarray:
    mask = np.zeros(len(points), bool)
    mask[np.argmin(points[:, 0])] = True
    mask[np.argmax(points[:, 0])] = True
    return mask


def _biconjugate(u: PLConvexFunction) -> PLConvexFunction:
    """Fenchel biconjugate evaluated at the original sites.

    max_p (x . p - u*(p)) over the conjugate's slope nodes, with each
    conjugate value represented through its witness so the maximum is
    computed as max over pairs of (x - X_w) . p + u_w.
    """
    values = np.array([u.value_at_node(j) for j in range(u.n_nodes)])
    out = PLConvexFunction(
        domain=u.domain,
        values=values,
        raw_values=values.copy(),
        active=u.active.copy(),
        facets=u.facets.copy(),
        gradients=u.gradients.copy(),
        pair_slopes=u.pair_slopes.copy(),
        pair_witness=u.pair_witness.copy(),
    )
    return out
