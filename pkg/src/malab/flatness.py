"""Flat-set detection and touching experiments for convex PL functions.

The continuum notion of strict convexity fails exactly on unions of
segments; at node resolution the usable surrogates are

* exact affinity of the envelope along runs of three or more collinear
  nodes (the flat proxy), and
* geometric decay of section size down a height ladder (the strictly
  convex proxy, tested on the top John axis).

Everything else in the module consumes those flags: the touching
construction builds a competitor that agrees with u on a flat segment
and strictly undercuts it nearby, ``verify_smp`` checks that solution
pairs only coincide along mutual flat sets, and the conjugate sandwich
bounds a perturbed conjugate between u* - delta and u*.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np
from scipy.linalg import null_space
from scipy.optimize import linprog
from scipy.spatial import ConvexHull, cKDTree

from ._parallel import ordered_map
from .convexity import (
    DiscreteMeasure,
    Domain,
    PLConvexFunction,
    lower_envelope,
    ma_measure,
)
from .dirichlet import DirichletProblem, solve_dirichlet
from .report import ExperimentReport
from .sections import section

__all__ = [
    "SigmaEstimate",
    "sigma_estimate",
    "touching_construction",
    "coincidence_set",
    "verify_smp",
    "legendre_sandwich_check",
    "boxcount_sigma",
]

FLAT = "flat"
STRICT = "strictly-convex"
INCONCLUSIVE = "boundary-inconclusive"


@dataclass(frozen=True)
class SigmaEstimate:
    """Per-node convexity verdicts with the evidence that produced them.

    flags holds one of the three verdict strings per node.  diam and
    john_axes record the shrink profile over the ladder (nan where a rung
    produced no internal section).  flat_sets lists every maximal
    collinear node run on which the envelope is exactly affine; a node is
    flagged flat iff it is strictly inside at least one run, so the
    affine-dimension >= 1 invariant holds by construction.
    """

    flags: np.ndarray
    ladder: np.ndarray
    diam: np.ndarray
    john_axes: np.ndarray
    flat_sets: list[np.ndarray]
    ratio_threshold: float

    def nodes_flagged(self, flag: str) -> np.ndarray:
        return np.flatnonzero(self.flags == flag)


def _canonical_directions(X: np.ndarray, max_directions: int = 48) -> np.ndarray:
    """Most frequent normalized node-difference directions (sign-fixed)."""
    n, d = X.shape
    tree = cKDTree(X)
    k = min(n, 2 * d + 7)
    _, idx = tree.query(X, k=k)
    if k == 1:
        return np.zeros((0, d))
    offs = (X[idx[:, 1:]] - X[:, None, :]).reshape(-1, d)
    nrm = np.linalg.norm(offs, axis=1)
    offs = offs[nrm > 0] / nrm[nrm > 0, None]
    # fix sign so that the first coordinate of magnitude > tol is positive
    lead = np.argmax(np.abs(offs) > 1e-12, axis=1)
    signs = np.sign(offs[np.arange(len(offs)), lead])
    offs *= signs[:, None]
    key = np.round(offs, 9)
    uniq, counts = np.unique(key, axis=0, return_counts=True)
    order = np.argsort(-counts)
    return uniq[order[:max_directions]]


def _affine_runs(u: PLConvexFunction, tol_slope: float) -> list[np.ndarray]:
    """Maximal runs of >= 3 collinear nodes on which the envelope is affine."""
    X = u.domain.nodes
    vals = u.values
    runs: list[np.ndarray] = []
    seen: set[tuple[int, ...]] = set()
    for d in _canonical_directions(X):
        t = X @ d
        perp = X - t[:, None] * d[None, :]
        key = np.round(perp, 8)
        _, inv = np.unique(key, axis=0, return_inverse=True)
        order = np.lexsort((t, inv))
        groups = np.split(order, np.flatnonzero(np.diff(inv[order])) + 1)
        for g in groups:
            if len(g) < 3:
                continue
            ts = t[g]
            vs = vals[g]
            gaps = np.diff(ts)
            if np.any(gaps <= 1e-12):
                continue
            slopes = np.diff(vs) / gaps
            ok = np.abs(np.diff(slopes)) <= tol_slope
            start = 0
            for stop in range(len(ok) + 1):
                if stop == len(ok) or not ok[stop]:
                    if stop - start >= 1:  # >= 2 consecutive equal slopes
                        run = tuple(int(j) for j in g[start : stop + 2])
                        if run not in seen:
                            seen.add(run)
                            runs.append(np.array(run, int))
                    start = stop + 1
    return runs


def sigma_estimate(
    u: PLConvexFunction,
    ladder: np.ndarray | None = None,
    ratio_threshold: float = 0.75,
    slope_tol: float | None = None,
) -> SigmaEstimate:
    """Classify every node as flat, strictly convex, or inconclusive.

    Parameters
    ----------
    ladder : decreasing section heights; by default five rungs starting
        at an eighth of the value spread, halving.
    ratio_threshold : a node is strictly convex when the top John axis of
        its sections contracts by at least this factor per halving, on
        every rung pair the grid can resolve.
    slope_tol : slope-jump tolerance for the affine-run detector.  The
        default is machine-level, which catches constructed functions.
        A function SOLVED against an everywhere-positive target cannot be
        exactly affine anywhere (every cell must hold its mass), so its
        degenerate lines are microscopically bent; pass the bending scale
        that the solve tolerance implies to flag them.

    Flat verdicts come from exact affine runs and take precedence; nodes
    whose sections never separate from the boundary (boundary nodes
    first of all) stay inconclusive.
    """
    dom = u.domain
    X = dom.nodes
    n_nodes, dim = X.shape
    spread = float(np.ptp(u.values)) + 1e-300
    dspread = float(np.max(X.max(axis=0) - X.min(axis=0)))
    if ladder is None:
        t0 = spread / 8.0
        ladder = t0 * 0.5 ** np.arange(8)
    ladder = np.asarray(ladder, float)
    if len(ladder) >= 2 and np.any(np.diff(ladder) >= 0):
        raise ValueError("ladder must be strictly decreasing")

    tol_slope = 1e-9 * (1.0 + spread / dspread) if slope_tol is None else slope_tol
    runs = _affine_runs(u, tol_slope)
    flat_nodes: set[int] = set()
    for run in runs:
        flat_nodes.update(int(j) for j in run[1:-1])

    flags = np.full(n_nodes, INCONCLUSIVE, dtype=object)
    L = len(ladder)
    diam = np.full((n_nodes, L), np.nan)
    axes = np.full((n_nodes, L, dim), np.nan)
    interior = set(int(j) for j in dom.interior_indices)

    def classify(i: int) -> str:
        if i not in interior or not u.active[i]:
            return INCONCLUSIVE
        try:
            p = u.gradient_at_node(i)
        except ValueError:
            return INCONCLUSIVE
        d1 = np.full(L, np.nan)
        # sections are nested in t, so climb from the smallest height and
        # stop at the first rung that escapes the domain interior, or at
        # the first one spanning most of the domain: those say nothing
        # about the shrink profile at the node, and on solved (wiggly)
        # envelopes their vertex enumerations run to tens of thousands
        for r in range(L - 1, -1, -1):
            try:
                sec = section(u, i, p, float(ladder[r]))
            except ValueError:
                continue
            if not sec.internal:
                break
            if len(sec.vertices):
                bbox = sec.vertices.max(axis=0) - sec.vertices.min(axis=0)
                if float(np.linalg.norm(bbox)) > 0.5 * dspread:
                    break
            diam[i, r] = sec.diameter
            if sec.john is not None:
                axes[i, r] = sec.john.lengths
                d1[r] = sec.john.lengths[0]
        pairs = 0
        for r in range(L - 1):
            if np.isnan(d1[r]) or np.isnan(d1[r + 1]):
                continue
            pairs += 1
            if d1[r + 1] > ratio_threshold * d1[r]:
                return INCONCLUSIVE
        return STRICT if pairs > 0 else INCONCLUSIVE

    verdicts = ordered_map(classify, range(n_nodes))
    for i, v in enumerate(verdicts):
        flags[i] = v
    for i in flat_nodes:
        if i in interior:
            flags[i] = FLAT
    return SigmaEstimate(
        flags=flags,
        ladder=ladder,
        diam=diam,
        john_axes=axes,
        flat_sets=runs,
        ratio_threshold=ratio_threshold,
    )


def _run_through(
    u: PLConvexFunction, x0_index: int, direction: np.ndarray, tol_slope: float
) -> np.ndarray:
    """Collinear affine run through one node along one direction.

    Returns the node indices of the maximal run containing x0 strictly
    inside, or an empty array when u is not affine across x0 that way.
    """
    X = u.domain.nodes
    d = np.asarray(direction, float)
    d = d / np.linalg.norm(d)
    x0 = X[x0_index]
    t = (X - x0) @ d
    perp = (X - x0) - t[:, None] * d[None, :]
    online = np.flatnonzero(np.linalg.norm(perp, axis=1) <= 1e-8 * (1.0 + np.abs(t)))
    if len(online) < 3:
        return np.zeros(0, int)
    order = online[np.argsort(t[online])]
    pos = int(np.flatnonzero(order == x0_index)[0])
    vals = u.values[order]
    ts = t[order]
    lo = pos
    while lo > 0:
        s_prev = (vals[lo] - vals[lo - 1]) / (ts[lo] - ts[lo - 1])
        s_next = (vals[lo + 1] - vals[lo]) / (ts[lo + 1] - ts[lo]) if lo + 1 < len(order) else None
        if s_next is None or abs(s_next - s_prev) > tol_slope:
            break
        lo -= 1
    hi = pos
    while hi < len(order) - 1:
        s_next = (vals[hi + 1] - vals[hi]) / (ts[hi + 1] - ts[hi])
        s_prev = (vals[hi] - vals[hi - 1]) / (ts[hi] - ts[hi - 1]) if hi > 0 else None
        if s_prev is None or abs(s_next - s_prev) > tol_slope:
            break
        hi += 1
    if hi - lo < 2 or not (lo < pos < hi):
        return np.zeros(0, int)
    return order[lo : hi + 1]


def touching_construction(
    u: PLConvexFunction,
    x0_index: int,
    segment_direction: np.ndarray,
    M: float,
    delta: float,
    tol: float = 1e-9,
    M_min: float = 1.0,
    max_iter: int = 400,
    min_cells: float = 2.0,
) -> tuple[PLConvexFunction, ExperimentReport]:
    """Build the squeeze-and-solve competitor at a flat node.

    After subtracting the supporting affine function along the segment,
    the barrier is w = (u + delta * u o sigma) / (1 + delta) with
    sigma(x) = x0 + (x - x0)/2 + M ((x - x0) . d) d, evaluated on the ball
    of radius 0.25 dist(x0, boundary) around x0, never below ``min_cells``
    grid spacings and never so large that the squeezed ball (stretch
    M + 1/2 along the segment) leaves the domain.  On the lattice the ball
    is realized as the inscribed grid box, whose node layers triangulate
    cleanly (a Euclidean node ball on an anisotropic grid grows sliver
    facets at its poles).  The competitor v solves
    the Dirichlet problem on that ball, with boundary data w and the
    measure of u restricted to the ball as target (restriction means the
    measure of u's values re-enveloped over the ball alone; cells of the
    full-domain measure straddling the ring differ by a discretization
    artifact, reported under ``mass_full_vs_sub``).  The report records
    the chain w <= v <= u, agreement with u along the segment, strict
    drop off the segment, and mass preservation.
    """
    dom = u.domain
    X = dom.nodes
    if M < M_min:
        raise ValueError(f"M must be at least {M_min}")
    if delta < 0:
        raise ValueError("delta must be nonnegative")
    spread = float(np.ptp(u.values)) + 1e-300
    dspread = float(np.max(X.max(axis=0) - X.min(axis=0)))
    tol_slope = 1e-9 * (1.0 + spread / dspread)
    run = _run_through(u, x0_index, segment_direction, tol_slope)
    if len(run) == 0:
        raise ValueError("no segment in Sigma_u")
    d = np.asarray(segment_direction, float)
    d = d / np.linalg.norm(d)
    x0 = X[x0_index]

    # normalize: subtract a supporting plane through x0 that vanishes on
    # the whole run.  The component along d is the run's two-sided slope;
    # transversally, the facet-mean gradient of an asymmetric apex fan can
    # tilt by O(h^(1/2)) and push the squeeze barrier above u at far ring
    # corners, so take the Chebyshev center of the admissible supporting
    # slopes instead (margin measured per unit of transverse distance;
    # run nodes sit at zero margin and do not bind)
    trun = (X[run] - x0) @ d
    order = np.argsort(trun)
    lo_n, hi_n = run[order[0]], run[order[-1]]
    slope_d = (u.values[hi_n] - u.values[lo_n]) / (trun[order[-1]] - trun[order[0]])
    Q = null_space(d[None, :])
    dX = X - x0
    perp = dX @ Q
    perp_norm = np.linalg.norm(perp, axis=1)
    rhs = u.values - u.values[x0_index] - slope_d * (dX @ d)
    lp = linprog(
        np.append(np.zeros(Q.shape[1]), -1.0),
        A_ub=np.column_stack([perp, perp_norm]),
        b_ub=rhs,
        bounds=[(None, None)] * Q.shape[1] + [(0.0, None)],
        method="highs",
    )
    if not lp.success:
        raise ValueError("no supporting plane vanishing on the segment at x0")
    p0 = Q @ lp.x[:-1] + slope_d * d
    ell = u.values[x0_index] + dX @ p0
    tilde = u.values - ell

    A_om, b_om = dom.hull_rows()
    norms = np.linalg.norm(A_om, axis=1)
    dist_bd = float(np.min((b_om - A_om @ x0) / norms))

    # per-axis lattice spacings; the ball is realized as the inscribed
    # grid box rather than a Euclidean node ball, because spherical caps
    # on an anisotropic lattice triangulate into slivers whose restricted
    # measure is ill-conditioned (a full box of nodes triangulates cleanly)
    h_axis = np.empty(dom.dim)
    for ax in range(dom.dim):
        levels = np.unique(np.round(X[:, ax], 12))
        h_axis[ax] = float(np.min(np.diff(levels))) if len(levels) > 1 else np.inf
    h_spacing = float(np.max(h_axis))

    # the squeeze stretches by M + 1/2 along the segment only (it halves
    # every transverse direction), so containment is governed by the exit
    # distance of the axis ray
    gaps = b_om - A_om @ x0

    def _exit(direction: np.ndarray) -> float:
        adir = A_om @ direction
        pos = adir > 1e-14
        if not np.any(pos):
            return np.inf
        return float(np.min(gaps[pos] / adir[pos]))

    dist_axis = min(_exit(d), _exit(-d))
    r = max(0.25 * dist_bd / M, min_cells * h_spacing)
    r = min(r, 0.98 * dist_axis / (M + 0.5))
    if r < min_cells * h_spacing * (1.0 - 1e-12):
        raise ValueError(
            "grid too coarse for squeeze factor M: the resolution floor of "
            f"{min_cells:g} spacings does not fit inside the contained ball"
        )

    half_cells = np.empty(dom.dim, dtype=int)
    for ax in range(dom.dim):
        ei = np.zeros(dom.dim)
        ei[ax] = 1.0
        reach = min(r, 0.999 * min(_exit(ei), _exit(-ei)))
        half_cells[ax] = int(np.floor(reach / h_axis[ax] + 1e-9))
    if np.any(half_cells < min_cells):
        raise ValueError(
            "x0 too close to the boundary: the lattice box around it is "
            f"thinner than {min_cells:g} cells on some axis"
        )

    rel = np.abs(X - x0) / h_axis
    ball = np.flatnonzero(np.all(rel <= half_cells + 1e-9, axis=1))
    Xb = X[ball]
    hull_b = ConvexHull(Xb)
    # pin the whole outermost node layer of the box (and any original
    # domain boundary swept in): the discrete comparison bound v <= u
    # needs every face node held at w
    on_ring = np.any(rel[ball] >= half_cells - 0.5, axis=1)
    on_ring |= dom.is_boundary[ball]
    if np.all(on_ring):
        raise ValueError("ball resolves no interior nodes; grid too coarse")
    subdom = Domain.from_nodes(Xb, on_ring, vertices=Xb[hull_b.vertices])

    sigma_pts = x0 + 0.5 * (Xb - x0) + (M * ((Xb - x0) @ d))[:, None] * d[None, :]
    tilde_fn = lower_envelope(dom, tilde)
    tilde_ball = tilde[ball]
    tilde_sigma = tilde_fn.evaluate(sigma_pts)
    w_vals = (tilde_ball + delta * tilde_sigma) / (1.0 + delta)

    # target = measure of u restricted to the ball: re-envelope u's values
    # over the subdomain and take that measure.  Full-domain cells that
    # straddle the pinned ring are strictly smaller than their subdomain
    # counterparts, which would break the comparison bound v <= u at the
    # 1e-8 scale; the restricted measure is what the subproblem reproduces.
    tilde_sub = lower_envelope(subdom, tilde[ball])
    mu_sub = ma_measure(tilde_sub)
    mu_full = ma_measure(u)
    masses = np.zeros(len(ball))
    inner = ~on_ring
    masses[inner] = mu_sub.masses[inner]
    total_mass = float(masses.sum())
    mass_full_vs_sub = float(
        np.sum(np.abs(masses[inner] - mu_full.masses[ball[inner]]))
    )

    problem = DirichletProblem(
        subdom, DiscreteMeasure(masses), w_vals[on_ring]
    )
    v_sub, solve_rep = solve_dirichlet(problem, tol=tol, max_iter=max_iter)

    rep = ExperimentReport(
        "touching_construction",
        params={
            "x0_index": int(x0_index),
            "M": M,
            "delta": delta,
            "radius": r,
            "box_half_widths": (half_cells * h_axis).tolist(),
            "ball_nodes": int(len(ball)),
            "segment_nodes": int(len(run)),
            "tol": tol,
            "ball_mass": total_mass,
            "mass_full_vs_sub": mass_full_vs_sub,
            "squeeze_leaves_domain": bool((M + 0.5) * r > dist_axis),
        },
    )
    rep.add(
        "subproblem_converged",
        "the ball Dirichlet solve reached its mass tolerance",
        bool(solve_rep.converged),
        residual=solve_rep.max_residual,
        tolerance=tol,
    )

    slack = 10.0 * tol
    v = v_sub.values
    ub = tilde_ball
    rep.add(
        "lower_bound",
        "the barrier w stays below the competitor v on the ball",
        bool(np.all(v >= w_vals - slack)),
        residual=float(np.min(v - w_vals)),
        tolerance=slack,
    )
    rep.add(
        "upper_bound",
        "the competitor v stays below u on the ball",
        bool(np.all(v <= ub + slack)),
        residual=float(np.max(v - ub)),
        tolerance=slack,
    )
    seg_in_ball = np.flatnonzero(np.isin(ball, run))
    rep.add(
        "segment_agreement",
        "v equals u along the flat segment through x0",
        bool(np.all(np.abs(v[seg_in_ball] - ub[seg_in_ball]) <= slack))
        if len(seg_in_ball)
        else None,
        residual=float(np.max(np.abs(v[seg_in_ball] - ub[seg_in_ball])))
        if len(seg_in_ball)
        else None,
        tolerance=slack,
    )
    degenerate = delta == 0.0 or float(np.max(np.abs(w_vals - tilde_ball))) <= slack
    off = np.setdiff1d(np.flatnonzero(inner), seg_in_ball)
    max_drop = float(np.max(ub[off] - v[off])) if len(off) else 0.0
    if degenerate:
        rep.add(
            "identity_degenerate",
            "the barrier is u itself (delta = 0 or affine u), so v = u",
            bool(np.max(np.abs(v - ub)) <= slack),
            residual=float(np.max(np.abs(v - ub))),
            tolerance=slack,
        )
    else:
        rep.add(
            "proper_touching",
            "v drops strictly below u at some off-segment node",
            bool(max_drop > slack),
            residual=max_drop,
            tolerance=slack,
        )
    mu_v = ma_measure(v_sub)
    mass_err = float(np.sum(np.abs(mu_v.masses[inner] - masses[inner])))
    rep.add(
        "measure_match",
        "the competitor carries exactly u's masses on the ball interior",
        bool(mass_err <= tol * len(ball)),
        residual=mass_err,
        tolerance=tol * len(ball),
    )

    # return v in the original (un-normalized) frame
    v_orig = lower_envelope(subdom, v + ell[ball])
    return v_orig, rep


def coincidence_set(
    u: PLConvexFunction, v: PLConvexFunction, tol: float
) -> np.ndarray:
    """Nodes where u and v agree within tol, requiring u >= v - tol first."""
    if u.domain.nodes.shape != v.domain.nodes.shape or not np.allclose(
        u.domain.nodes, v.domain.nodes
    ):
        raise ValueError("mismatched node sets")
    gap = u.values - v.values
    if np.min(gap) < -tol:
        raise ValueError("hypothesis u >= v violated beyond tol")
    return np.flatnonzero(np.abs(gap) <= tol)


def verify_smp(
    u: PLConvexFunction,
    v: PLConvexFunction,
    sigma_u: SigmaEstimate,
    sigma_v: SigmaEstimate,
    tol: float,
) -> ExperimentReport:
    """Check that touching happens only along mutual flat sets.

    The verdict has two halves: every coincidence node must be flat (or
    inconclusive) for both functions, and where both estimates are
    decisive their flat flags must agree.
    """
    coin = coincidence_set(u, v, tol)
    rep = ExperimentReport("verify_smp", params={"tol": tol, "coincidence": int(len(coin))})
    viol_u = [int(i) for i in coin if sigma_u.flags[i] == STRICT]
    viol_v = [int(i) for i in coin if sigma_v.flags[i] == STRICT]
    rep.add(
        "coincidence_in_flat_u",
        "no coincidence node is strictly convex for u",
        len(viol_u) == 0,
        residual=float(len(viol_u)),
        violations=viol_u[:20],
    )
    rep.add(
        "coincidence_in_flat_v",
        "no coincidence node is strictly convex for v",
        len(viol_v) == 0,
        residual=float(len(viol_v)),
        violations=viol_v[:20],
    )
    decisive = [
        int(i)
        for i in coin
        if sigma_u.flags[i] != INCONCLUSIVE and sigma_v.flags[i] != INCONCLUSIVE
    ]
    disagree = [i for i in decisive if sigma_u.flags[i] != sigma_v.flags[i]]
    rep.add(
        "flag_agreement",
        "decisive flags of u and v agree on the coincidence set",
        len(disagree) == 0 if decisive else None,
        residual=float(len(disagree)),
        violations=disagree[:20],
    )
    return rep


def legendre_sandwich_check(
    u: PLConvexFunction,
    w: PLConvexFunction,
    V_nodes: np.ndarray,
    delta: float,
    tol: float = 1e-9,
) -> ExperimentReport:
    """Conjugate pinch test on a perturbation supported in V.

    Hypotheses (checked, error on failure): u <= w <= u + delta on V and
    u = w on the relative boundary of V.  The conclusion sampled at w's
    facet gradients over V: u* - delta <= w* <= u*, and those gradients
    lie inside the hull of u's gradients over V.
    """
    if u.domain.nodes.shape != w.domain.nodes.shape or not np.allclose(
        u.domain.nodes, w.domain.nodes
    ):
        raise ValueError("mismatched node sets")
    V_nodes = np.asarray(V_nodes, int)
    X = u.domain.nodes
    scale = 1.0 + float(np.max(np.abs(u.values)))
    htol = 1e-9 * scale
    gap = w.values[V_nodes] - u.values[V_nodes]
    if np.min(gap) < -htol or np.max(gap) > delta + htol:
        raise ValueError("hypothesis u <= w <= u + delta violated on V")
    XV = X[V_nodes]
    if len(V_nodes) > len(X[0]) + 1:
        hullV = ConvexHull(XV)
        eq = hullV.equations
        on_bd = np.max(XV @ eq[:, :-1].T + eq[None, :, -1], axis=1) >= -1e-9 * scale
    else:
        on_bd = np.ones(len(V_nodes), bool)
    bd_gap = np.abs(gap[on_bd])
    if len(bd_gap) and np.max(bd_gap) > htol:
        raise ValueError("hypothesis u = w on the boundary of V violated")

    inner_V = set(int(i) for i in V_nodes[~on_bd])
    maskw = np.array(
        [any(int(j) in inner_V for j in f) for f in w.facets], bool
    )
    grads_w = w.gradients[maskw]
    if len(grads_w) == 0:
        grads_w = w.gradients[
            np.array([any(int(j) in set(int(k) for k in V_nodes) for j in f) for f in w.facets], bool)
        ]
    masku = np.array(
        [any(int(j) in set(int(k) for k in V_nodes) for j in f) for f in u.facets], bool
    )
    grads_u = u.gradients[masku]

    def conj_at(fn: PLConvexFunction, P: np.ndarray) -> np.ndarray:
        return np.max(P @ fn.domain.nodes.T - fn.values[None, :], axis=1)

    wstar = conj_at(w, grads_w)
    ustar = conj_at(u, grads_w)
    ctol = tol * scale
    rep = ExperimentReport(
        "legendre_sandwich",
        params={"delta": delta, "V_count": int(len(V_nodes)), "samples": int(len(grads_w))},
    )
    rep.add(
        "upper_pinch",
        "the perturbed conjugate never exceeds u* at sampled slopes",
        bool(np.all(wstar <= ustar + ctol)),
        residual=float(np.max(wstar - ustar)),
        tolerance=ctol,
    )
    rep.add(
        "lower_pinch",
        "the perturbed conjugate stays above u* - delta at sampled slopes",
        bool(np.all(wstar >= ustar - delta - ctol)),
        residual=float(np.min(wstar - (ustar - delta))),
        tolerance=ctol,
    )
    if len(grads_u) >= u.domain.dim + 1:
        try:
            hull_u = ConvexHull(grads_u)
            eqs = hull_u.equations
            inside = np.max(grads_w @ eqs[:, :-1].T + eqs[None, :, -1], axis=1)
            incl = bool(np.all(inside <= 1e-9 * (1.0 + np.max(np.abs(grads_u)))))
            rep.add(
                "gradient_inclusion",
                "w's slopes over V lie in the hull of u's slopes over V",
                incl,
                residual=float(np.max(inside)),
            )
        except Exception:
            rep.add(
                "gradient_inclusion",
                "w's slopes over V lie in the hull of u's slopes over V",
                None,
            )
    else:
        same = bool(np.all(np.abs(wstar - ustar) <= ctol + delta))
        rep.add(
            "gradient_inclusion",
            "w's slopes over V lie in the hull of u's slopes over V",
            same,
        )
    if delta < 1e-12 * scale:
        rep.add(
            "tolerance_limited",
            "delta is below float resolution; the pinch is degenerate",
            True,
            residual=delta,
        )
    return rep


def boxcount_sigma(
    sigma: SigmaEstimate,
    nodes: np.ndarray,
    L_eta: np.ndarray,
    scales: np.ndarray,
) -> ExperimentReport:
    """Covering-number diagnostic N(r) * r^(n-1) on the residual flat set.

    A set that is genuinely lower dimensional than a hypersurface sends
    the product to zero as r shrinks; a fat (hypersurface-sized) flat set
    plateaus.  Reported as a trend, not asserted.
    """
    scales = np.asarray(scales, float)
    if len(scales) >= 2 and np.any(np.diff(scales) >= 0):
        raise ValueError("scales must be strictly decreasing")
    flat = set(int(i) for i in np.flatnonzero(sigma.flags == FLAT))
    excluded = set(int(i) for i in np.asarray(L_eta, int))
    residual = sorted(flat - excluded)
    nodes = np.asarray(nodes, float)
    dim = nodes.shape[1]
    P = nodes[residual]
    products = []
    counts = []
    for r in scales:
        if len(P) == 0:
            counts.append(0)
            products.append(0.0)
            continue
        covered = np.zeros(len(P), bool)
        cnt = 0
        tree = cKDTree(P)
        for j in range(len(P)):
            if covered[j]:
                continue
            cnt += 1
            covered[tree.query_ball_point(P[j], r)] = True
        counts.append(cnt)
        products.append(cnt * float(r) ** (dim - 1))
    rep = ExperimentReport(
        "boxcount_sigma",
        params={
            "scales": [float(s) for s in scales],
            "counts": counts,
            "products": [float(p) for p in products],
            "residual_nodes": len(residual),
        },
    )
    if len(residual) == 0:
        rep.add("empty_residual", "no flat nodes outside the excluded set", True, residual=0.0)
    else:
        decreasing = products[-1] <= 0.9 * products[0] + 1e-12
        rep.add(
            "shrinking_product",
            "N(r) * r^(n-1) decreases down the scale list",
            bool(decreasing),
            residual=float(products[-1] / (products[0] + 1e-300)),
        )
    return rep
