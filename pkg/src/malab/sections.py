"""Sublevel sections of PL convex functions and the measure inequalities.

A section is the open sublevel polytope S = {x in Omega : u(x) < l(x) + t}
below the tilted supporting plane l(x) = u(x0) + p.(x - x0).  Sections
drive everything quantitative in this package: the lower bound
Mu(S)|S| >= c_n t^n on internal sections, the matching upper bound under a
doubling hypothesis, the doubling diagnostics themselves, and the shrink
profiles behind flat-node detection.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .convexity import DiscreteMeasure, PLConvexFunction, ma_measure, subdifferential
from .geometry import JohnEllipsoid, clip_halfspaces, inscribed_ellipsoid
from .report import ExperimentReport

__all__ = [
    "SectionDescriptor",
    "section",
    "john_ellipsoid",
    "measure_section_inequalities",
    "doubling_check",
    "ABP_LOWER_DEFAULT",
    "ABP_UPPER_DEFAULT",
]

NODE_STRICT = 1e-12  # a node joins a section only if below the plane by this

# Calibrated acceptance constants for the section inequalities: half (twice)
# the extremal ratio achieved by the quadratic u = |x|^2/2 with Lebesgue
# target on the finest reference grid.  See tests for the calibration runs.
ABP_LOWER_DEFAULT = {1: 4.0, 2: 19.7, 3: 70.0}
ABP_UPPER_DEFAULT = {1: 16.0, 2: 320.0, 3: 2300.0}


@dataclass(frozen=True)
class SectionDescriptor:
    """One sublevel section with its geometry.

    ``internal`` records whether the closed polytope stays inside the open
    domain; every quantitative bound below requires it.  ``john`` is None
    exactly when the polytope was too flat for an inscribed ellipsoid.
    """

    node: int
    x0: np.ndarray
    p: np.ndarray
    t: float
    vertices: np.ndarray
    volume: float
    contained_nodes: np.ndarray
    internal: bool
    john: JohnEllipsoid | None

    @property
    def diameter(self) -> float:
        if len(self.vertices) < 2:
            return 0.0
        v = self.vertices
        if len(v) <= 2048:
            d2 = np.sum((v[:, None, :] - v[None, :, :]) ** 2, axis=-1)
            return float(np.sqrt(np.max(d2)))
        # same pairwise max, row blocks; envelopes of solved functions can
        # put tens of thousands of near-coplanar vertices on one section
        # and the full (V, V, dim) broadcast would not fit in memory
        best = 0.0
        for k in range(0, len(v), 512):
            blk = v[k : k + 512]
            d2 = np.sum((blk[:, None, :] - v[None, :, :]) ** 2, axis=-1)
            best = max(best, float(np.max(d2)))
        return float(np.sqrt(best))


def _slope_membership_gap(u: PLConvexFunction, node: int, p: np.ndarray) -> float:
    """Worst normalized violation of (X_k - X_0).p <= u_k - u_0."""
    X = u.domain.nodes
    act = np.flatnonzero(u.active)
    act = act[act != node]
    if len(act) == 0:
        return 0.0
    D = X[act] - X[node]
    viol = D @ p - (u.values[act] - u.values[node])
    return float(np.max(viol / np.linalg.norm(D, axis=1)))


def section(
    u: PLConvexFunction,
    node: int,
    p: np.ndarray,
    t: float,
    slope_tol: float = 1e-9,
) -> SectionDescriptor:
    """Sublevel section of u at a base node with slope p and height t.

    Raises ValueError("invalid slope") when p fails the subdifferential
    membership test at the base node beyond ``slope_tol * (1 + |p|)``.

    When a boundary node lies strictly inside the sublevel set the
    section is non-internal with no further computation; the descriptor
    then carries no vertices and a nan volume.
    """
    if t <= 0:
        raise ValueError("height t must be positive")
    p = np.asarray(p, float)
    if not u.active[node]:
        raise ValueError("node below envelope")
    if _slope_membership_gap(u, node, p) > slope_tol * (1.0 + float(np.linalg.norm(p))):
        raise ValueError("invalid slope")

    X = u.domain.nodes
    x0 = X[node]
    u0 = float(u.values[node])
    c_p = u0 - float(p @ x0)

    # facet planes: g_F . x + c_F with c_F anchored at the facet's first node
    anchors = u.facets[:, 0]
    c_f = u.values[anchors] - np.einsum("fd,fd->f", u.gradients, X[anchors])
    A_f = u.gradients - p[None, :]
    b_f = t + c_p - c_f
    # adjacent simplices of one flat envelope facet repeat the same plane
    # (up to rounding); merge them so the clip sees each plane once.  Zero
    # rows (facets with slope p) are vacuous because t > 0.
    nrm = np.linalg.norm(A_f, axis=1)
    live = nrm > 1e-13 * (1.0 + float(np.max(nrm, initial=0.0)))
    An_f = A_f[live] / nrm[live, None]
    bn_f = b_f[live] / nrm[live]
    if len(bn_f):
        key = np.round(np.column_stack([An_f, bn_f]), 9)
        _, uniq = np.unique(key, axis=0, return_index=True)
        A_f, b_f = An_f[uniq], bn_f[uniq]
    else:
        A_f, b_f = An_f, bn_f
    A_om, b_om = u.domain.hull_rows()
    A = np.vstack([A_f, A_om])
    b = np.concatenate([b_f, b_om])

    level = u.values - (X @ p + c_p)
    contained = np.flatnonzero(level < t - NODE_STRICT)
    # a boundary node strictly inside the sublevel set already proves the
    # section touches the domain boundary; skip the polytope entirely
    if np.any(u.domain.is_boundary[contained]):
        return SectionDescriptor(
            node, x0, p, float(t), np.empty((0, u.dim)), np.nan, contained, False, None
        )

    dom_lo = u.domain.vertices.min(axis=0)
    dom_hi = u.domain.vertices.max(axis=0)
    diam = float(np.max(dom_hi - dom_lo))
    radius = diam / 16.0
    while True:
        lo = np.maximum(x0 - radius, dom_lo - 0.01 * diam)
        hi = np.minimum(x0 + radius, dom_hi + 0.01 * diam)
        # rows whose halfspace contains the whole box cannot cut it; drop them
        corners = np.array(np.meshgrid(*zip(lo, hi), indexing="ij")).reshape(u.dim, -1).T
        cuts = np.max(corners @ A.T - b[None, :], axis=0) > 0.0
        keep = np.flatnonzero(cuts)
        poly = clip_halfspaces(A[keep], b[keep], lo, hi)
        if not poly.truncated or radius >= diam:
            break
        radius *= 4.0

    if poly.empty:
        return SectionDescriptor(node, x0, p, float(t), poly.vertices, 0.0, contained, False, None)

    margin = 1e-9 * (1.0 + diam)
    norms = np.linalg.norm(A_om, axis=1)
    inside = np.all(poly.vertices @ A_om.T <= b_om - margin * norms, axis=1)
    internal = bool(np.all(inside))

    john = None
    if poly.volume > 0:
        try:
            john = inscribed_ellipsoid(poly.vertices, A[keep], b[keep])
        except ValueError:
            john = None
    return SectionDescriptor(
        node, x0, p, float(t), poly.vertices, float(poly.volume), contained, internal, john
    )


def john_ellipsoid(vertices: np.ndarray) -> JohnEllipsoid:
    """Inscribed ellipsoid of conv(vertices); raises "no interior" if flat."""
    from scipy.spatial import ConvexHull, QhullError

    V = np.atleast_2d(np.asarray(vertices, float))
    if V.shape[1] == 1:
        return inscribed_ellipsoid(V, np.array([[1.0], [-1.0]]), np.array([V.max(), -V.min()]))
    try:
        hull = ConvexHull(V)
    except QhullError as exc:
        raise ValueError("no interior") from exc
    A = hull.equations[:, :-1]
    b = -hull.equations[:, -1]
    return inscribed_ellipsoid(V[hull.vertices], A, b)


def _measure_in_polytope(
    mu: DiscreteMeasure, nodes: np.ndarray, A: np.ndarray, b: np.ndarray
) -> float:
    inside = np.all(nodes @ A.T <= b[None, :] - NODE_STRICT, axis=1)
    return float(np.sum(mu.masses[inside]))


def _polytope_rows(vertices: np.ndarray):
    from scipy.spatial import ConvexHull

    if vertices.shape[1] == 1:
        return np.array([[1.0], [-1.0]]), np.array([vertices.max(), -vertices.min()])
    hull = ConvexHull(vertices)
    return hull.equations[:, :-1], -hull.equations[:, -1]


def measure_section_inequalities(
    u: PLConvexFunction,
    sec: SectionDescriptor,
    mu: DiscreteMeasure | None = None,
    c_lower: float | None = None,
    C_upper: float | None = None,
    doubling_certificate: float | None = None,
) -> ExperimentReport:
    """Check Mu(S)|S| >= c t^n on an internal section, and optionally the
    matching upper bound against the best-shift affine distance.

    The upper check runs only when a doubling certificate (the empirical
    constant from :func:`doubling_check`) is supplied, since without
    doubling the bound has no backing.  Raises on non-internal sections.
    """
    if not sec.internal:
        raise ValueError("section not internal")
    n = u.dim
    if mu is None:
        mu = ma_measure(u)
    c_lower = ABP_LOWER_DEFAULT[n] if c_lower is None else c_lower
    C_upper = ABP_UPPER_DEFAULT[n] if C_upper is None else C_upper

    mass = float(np.sum(mu.masses[sec.contained_nodes]))
    product = mass * sec.volume
    tn = sec.t**n
    ratio = product / tn if tn > 0 else float("inf")

    rep = ExperimentReport(
        "measure_section_inequalities",
        params={
            "node": sec.node,
            "t": sec.t,
            "volume": sec.volume,
            "mass": mass,
            "dim": n,
        },
    )
    rep.add(
        "section_lower_bound",
        "product of section mass and section volume is at least c_n t^n on internal sections",
        bool(ratio >= c_lower),
        residual=ratio,
        tolerance=c_lower,
    )
    if doubling_certificate is not None:
        # best constant-shift affine distance: u - l ranges over [0, t) on S,
        # so the centered shift achieves exactly t/2
        best_shift = sec.t / 2.0
        ratio_up = product / best_shift**n
        rep.add(
            "section_upper_bound",
            "with a doubling certificate, mass times volume stays below C times "
            "the n-th power of the best affine sup-distance on the section",
            bool(ratio_up <= C_upper),
            residual=ratio_up,
            tolerance=C_upper,
            doubling_certificate=doubling_certificate,
        )
    return rep


def doubling_check(
    mu: DiscreteMeasure,
    u: PLConvexFunction,
    alpha: float,
    k: float,
    heights: list[float] | None = None,
    centers: np.ndarray | None = None,
    dilation: float = 0.5,
    max_centers: int = 40,
) -> ExperimentReport:
    """Empirical doubling diagnostics of mu along u's internal sections.

    Checks mu(S) <= k * mu(alpha-shrunk S about the base point) over a
    sample of internal sections, and records the empirical constant b of
    the ellipsoid form mu(x_E + dilation*(E - x_E)) >= b * mu(E) over the
    sections' inscribed ellipsoids.  The second part is a measurement, not
    an assertion.
    """
    if not (0.0 < alpha < 1.0):
        raise ValueError("alpha must lie in (0, 1)")
    if k <= 0:
        raise ValueError("k must be positive")
    X = u.domain.nodes
    if centers is None:
        centers = [i for i in u.domain.interior_indices if u.active[i]]
        stride = max(1, len(centers) // max_centers)
        centers = centers[::stride]
    if heights is None:
        spread = float(np.max(u.values) - np.min(u.values)) or 1.0
        heights = [0.25 * spread, 0.125 * spread, 0.0625 * spread]

    rep = ExperimentReport(
        "doubling_check", params={"alpha": alpha, "k": k, "dilation": dilation}
    )
    worst = 0.0
    worst_at = None
    b_emp = float("inf")
    n_internal = 0
    for i in centers:
        p = u.gradient_at_node(i)
        if _slope_membership_gap(u, int(i), p) > 1e-9 * (1 + float(np.linalg.norm(p))):
            continue
        for t in heights:
            sec = section(u, int(i), p, float(t))
            if not sec.internal or sec.volume <= 0:
                continue
            n_internal += 1
            A, b = _polytope_rows(sec.vertices)
            m_full = _measure_in_polytope(mu, X, A, b)
            b_shrunk = alpha * b + (1 - alpha) * (A @ sec.x0)
            m_shrunk = _measure_in_polytope(mu, X, A, b_shrunk)
            ratio = m_full / m_shrunk if m_shrunk > 0 else float("inf")
            if ratio > worst:
                worst = ratio
                worst_at = {"node": int(i), "t": float(t)}
            if sec.john is not None:
                m_ell = float(np.sum(mu.masses[sec.john.contains(X)]))
                m_core = float(np.sum(mu.masses[sec.john.contains(X, scale=dilation)]))
                if m_ell > 0:
                    b_emp = min(b_emp, m_core / m_ell)

    if n_internal == 0:
        rep.add(
            "doubling_sections",
            "no internal sections in the sampled (base, height) range",
            None,
        )
        return rep
    rep.add(
        "doubling_sections",
        "measure of each internal section is at most k times the measure of "
        "its alpha-shrunk copy about the base point",
        bool(worst <= k),
        residual=worst,
        tolerance=k,
        worst_at=worst_at,
        sections=n_internal,
    )
    rep.add(
        "dilation_constant",
        "empirical ellipsoid dilation constant recorded over inscribed ellipsoids",
        True,
        residual=None if b_emp == float("inf") else b_emp,
    )
    return rep
