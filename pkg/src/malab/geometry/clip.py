"""Halfspace-intersection kernels in dimensions 1, 2 and 3.

Cells of the discrete Monge-Ampere measure, sublevel sections, and clipped
gradient images are all intersections of finitely many halfspaces
``a_i . x <= b_i`` with a bounding box.  The solver evaluates millions of
such cells, so the 2D and 3D kernels are written in a numba-compatible
style (flat loops, preallocated buffers) and jitted when numba is present.

The public entry point is :func:`clip_halfspaces`, which prepends the
bounding box as the first ``2*dim`` constraint rows and returns vertices,
volume, and the surface measure each row contributes.  Per-row face
measures are what the Dirichlet solver differentiates: lowering a node
value shifts a subset of rows in lockstep, and d(volume)/dt is the summed
face measure over those rows divided by each row's gradient norm.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

try:
    from numba import njit

    NUMBA_AVAILABLE = True
except ImportError:  # pragma: no cover - exercised only without numba
    NUMBA_AVAILABLE = False

    def njit(*args, **kwargs):
        if args and callable(args[0]):
            return args[0]

        def deco(fn):
            return fn

        return deco


__all__ = ["ClippedPolytope", "clip_halfspaces", "box_rows", "NUMBA_AVAILABLE"]


@dataclass(frozen=True)
class ClippedPolytope:
    """Result of intersecting halfspaces with a bounding box.

    ``face_measure[i]`` is the (dim-1)-measure of the facet contributed by
    constraint row i (rows 0..2*dim-1 are the synthetic box).  ``truncated``
    is True when any box row carries positive measure, i.e. the intersection
    of the user rows alone would have been larger than the box.
    """

    dim: int
    vertices: np.ndarray
    volume: float
    face_measure: np.ndarray
    truncated: bool

    @property
    def empty(self) -> bool:
        return len(self.vertices) == 0


def box_rows(lo: np.ndarray, hi: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    """H-representation of the axis box [lo, hi], one +/- row per axis."""
    dim = len(lo)
    rows = np.zeros((2 * dim, dim))
    offs = np.empty(2 * dim)
    for k in range(dim):
        rows[2 * k, k] = 1.0
        offs[2 * k] = hi[k]
        rows[2 * k + 1, k] = -1.0
        offs[2 * k + 1] = -lo[k]
    return rows, offs


# ---------------------------------------------------------------------------
# 2D kernel: Sutherland-Hodgman walk with edge provenance ids.
# ---------------------------------------------------------------------------


@njit(cache=True)
def _clip2d(A, b, vx, vy, eid, nv, eps):
    """Clip the polygon (vx, vy) by every row of (A, b) in order.

    eid[k] labels the edge from vertex k to k+1 (mod nv) with the row that
    produced it.  Buffers must be sized nv + len(A) + 4.  Returns the new
    vertex count, or 0 when the intersection is empty.
    """
    m = A.shape[0]
    cap = vx.shape[0]
    wx = np.empty(cap)
    wy = np.empty(cap)
    we = np.empty(cap, dtype=np.int64)
    d = np.empty(cap)
    for i in range(m):
        ax = A[i, 0]
        ay = A[i, 1]
        bi = b[i]
        dmax = -1e300
        dmin = 1e300
        for k in range(nv):
            dk = ax * vx[k] + ay * vy[k] - bi
            d[k] = dk
            if dk > dmax:
                dmax = dk
            if dk < dmin:
                dmin = dk
        if dmax <= eps:
            continue
        if dmin >= -eps:
            return 0
        w = 0
        for k in range(nv):
            k2 = k + 1 if k + 1 < nv else 0
            din = d[k] <= eps
            dout = d[k2] <= eps
            if din:
                wx[w] = vx[k]
                wy[w] = vy[k]
                we[w] = eid[k]
                w += 1
                if not dout:
                    # leaving: emit crossing, switch provenance to row i
                    s = d[k] / (d[k] - d[k2])
                    wx[w] = vx[k] + s * (vx[k2] - vx[k])
                    wy[w] = vy[k] + s * (vy[k2] - vy[k])
                    we[w - 1] = eid[k]
                    we[w] = i
                    w += 1
            elif dout:
                # entering: emit crossing, edge onward keeps old id
                s = d[k] / (d[k] - d[k2])
                wx[w] = vx[k] + s * (vx[k2] - vx[k])
                wy[w] = vy[k] + s * (vy[k2] - vy[k])
                we[w] = eid[k]
                w += 1
        if w < 3:
            return 0
        for k in range(w):
            vx[k] = wx[k]
            vy[k] = wy[k]
            eid[k] = we[k]
        nv = w
    return nv


@njit(cache=True)
def _polygon_measures(vx, vy, eid, nv, m, face):
    """Shoelace area plus per-row boundary edge length."""
    area = 0.0
    for k in range(nv):
        k2 = k + 1 if k + 1 < nv else 0
        area += vx[k] * vy[k2] - vx[k2] * vy[k]
        ex = vx[k2] - vx[k]
        ey = vy[k2] - vy[k]
        r = eid[k]
        if 0 <= r < m:
            face[r] += np.sqrt(ex * ex + ey * ey)
    return 0.5 * abs(area)


# ---------------------------------------------------------------------------
# 3D kernel: incremental vertex clipping with plane-membership lists.
# ---------------------------------------------------------------------------

_MAXPLANES = 48  # planes meeting at one vertex; 3 generically, more if degenerate


@njit(cache=True)
def _shared_planes(memb, cnt, i, j, out):
    """Collect plane ids common to vertices i and j; returns the count."""
    n = 0
    for a in range(cnt[i]):
        pa = memb[i, a]
        for bq in range(cnt[j]):
            if memb[j, bq] == pa:
                if n < out.shape[0]:
                    out[n] = pa
                n += 1
                break
    return n


@njit(cache=True)
def _clip3d(A, b, verts, memb, cnt, nv, eps):
    """Clip a 3D convex vertex set by every row of (A, b) in order.

    memb[k, :cnt[k]] lists the rows whose planes pass through vertex k.
    Two vertices sharing >= 2 planes are edge-adjacent on a convex
    polytope, which is how cut edges are found.  Returns the new vertex
    count (0 when empty).
    """
    m = A.shape[0]
    cap = verts.shape[0]
    d = np.empty(cap)
    shared = np.empty(_MAXPLANES, dtype=np.int64)
    for i in range(m):
        dmax = -1e300
        dmin = 1e300
        for k in range(nv):
            dk = A[i, 0] * verts[k, 0] + A[i, 1] * verts[k, 1] + A[i, 2] * verts[k, 2] - b[i]
            d[k] = dk
            if dk > dmax:
                dmax = dk
            if dk < dmin:
                dmin = dk
        if dmax <= eps:
            continue
        if dmin >= -eps:
            return 0
        w = nv
        # vertices on the plane join it; strictly-cut edges spawn new vertices
        for k in range(nv):
            if d[k] > eps:
                continue
            if d[k] >= -eps and cnt[k] < _MAXPLANES:
                memb[k, cnt[k]] = i
                cnt[k] += 1
        meps = 16.0 * eps
        for k in range(nv):
            if d[k] >= -eps:
                continue  # keep only strictly-inside endpoints here
            for k2 in range(nv):
                if d[k2] <= eps:
                    continue  # need a strictly-outside partner
                ns = _shared_planes(memb, cnt, k, k2, shared)
                if ns < 2:
                    continue
                s = d[k] / (d[k] - d[k2])
                px = verts[k, 0] + s * (verts[k2, 0] - verts[k, 0])
                py = verts[k, 1] + s * (verts[k2, 1] - verts[k, 1])
                pz = verts[k, 2] + s * (verts[k2, 2] - verts[k, 2])
                # a degenerate (non-simple) cut point arises once per plane
                # pair; merge repeats by position, pooling their planes
                dup = -1
                for k3 in range(nv, w):
                    if (
                        abs(verts[k3, 0] - px) <= meps
                        and abs(verts[k3, 1] - py) <= meps
                        and abs(verts[k3, 2] - pz) <= meps
                    ):
                        dup = k3
                        break
                if dup >= 0:
                    for t in range(ns):
                        pa = shared[t]
                        found = False
                        for a in range(cnt[dup]):
                            if memb[dup, a] == pa:
                                found = True
                                break
                        if not found and cnt[dup] < _MAXPLANES:
                            memb[dup, cnt[dup]] = pa
                            cnt[dup] += 1
                    continue
                if w >= cap:
                    return -1
                verts[w, 0] = px
                verts[w, 1] = py
                verts[w, 2] = pz
                nc = 0
                for t in range(ns):
                    if nc < _MAXPLANES:
                        memb[w, nc] = shared[t]
                        nc += 1
                if nc < _MAXPLANES:
                    memb[w, nc] = i
                    nc += 1
                cnt[w] = nc
                w += 1
        # compact: drop strictly-outside vertices
        out = 0
        for k in range(w):
            if k < nv and d[k] > eps:
                continue
            if out != k:
                verts[out, 0] = verts[k, 0]
                verts[out, 1] = verts[k, 1]
                verts[out, 2] = verts[k, 2]
                for t in range(cnt[k]):
                    memb[out, t] = memb[k, t]
                cnt[out] = cnt[k]
            out += 1
        nv = out
        if nv < 4:
            return 0
    return nv


@njit(cache=True)
def _polytope_measures_3d(A, verts, memb, cnt, nv, face):
    """Volume and per-row facet areas of the clipped vertex set.

    Faces are recovered per constraint row by gathering its incident
    vertices, ordering them by angle in the facet plane, and fanning
    triangles; the volume is the sum of cone volumes over the vertex
    centroid, which is origin-independent and robust for convex cells.
    """
    m = face.shape[0]
    cx = 0.0
    cy = 0.0
    cz = 0.0
    for k in range(nv):
        cx += verts[k, 0]
        cy += verts[k, 1]
        cz += verts[k, 2]
    cx /= nv
    cy /= nv
    cz /= nv
    idx = np.empty(nv, dtype=np.int64)
    ang = np.empty(nv)
    vol = 0.0
    for r in range(m):
        nf = 0
        for k in range(nv):
            for t in range(cnt[k]):
                if memb[k, t] == r:
                    idx[nf] = k
                    nf += 1
                    break
        if nf < 3:
            continue
        nx = A[r, 0]
        ny = A[r, 1]
        nz = A[r, 2]
        nn = np.sqrt(nx * nx + ny * ny + nz * nz)
        nx /= nn
        ny /= nn
        nz /= nn
        # orthonormal basis (t1, t2) of the facet plane
        if abs(nx) <= abs(ny) and abs(nx) <= abs(nz):
            t1x, t1y, t1z = 0.0, -nz, ny
        elif abs(ny) <= abs(nz):
            t1x, t1y, t1z = -nz, 0.0, nx
        else:
            t1x, t1y, t1z = -ny, nx, 0.0
        tn = np.sqrt(t1x * t1x + t1y * t1y + t1z * t1z)
        t1x /= tn
        t1y /= tn
        t1z /= tn
        t2x = ny * t1z - nz * t1y
        t2y = nz * t1x - nx * t1z
        t2z = nx * t1y - ny * t1x
        fx = 0.0
        fy = 0.0
        fz = 0.0
        for q in range(nf):
            k = idx[q]
            fx += verts[k, 0]
            fy += verts[k, 1]
            fz += verts[k, 2]
        fx /= nf
        fy /= nf
        fz /= nf
        for q in range(nf):
            k = idx[q]
            rx = verts[k, 0] - fx
            ry = verts[k, 1] - fy
            rz = verts[k, 2] - fz
            ang[q] = np.arctan2(
                rx * t2x + ry * t2y + rz * t2z, rx * t1x + ry * t1y + rz * t1z
            )
        # insertion sort of idx by ang (nf is small)
        for q in range(1, nf):
            ak = ang[q]
            ik = idx[q]
            p = q - 1
            while p >= 0 and ang[p] > ak:
                ang[p + 1] = ang[p]
                idx[p + 1] = idx[p]
                p -= 1
            ang[p + 1] = ak
            idx[p + 1] = ik
        area2 = 0.0  # twice the signed area accumulated in the (t1, t2) chart
        for q in range(nf):
            k = idx[q]
            k2 = idx[(q + 1) % nf]
            x1 = (verts[k, 0] - fx) * t1x + (verts[k, 1] - fy) * t1y + (verts[k, 2] - fz) * t1z
            y1 = (verts[k, 0] - fx) * t2x + (verts[k, 1] - fy) * t2y + (verts[k, 2] - fz) * t2z
            x2 = (verts[k2, 0] - fx) * t1x + (verts[k2, 1] - fy) * t1y + (verts[k2, 2] - fz) * t1z
            y2 = (verts[k2, 0] - fx) * t2x + (verts[k2, 1] - fy) * t2y + (verts[k2, 2] - fz) * t2z
            area2 += x1 * y2 - x2 * y1
        area = 0.5 * abs(area2)
        face[r] = area
        # cone from the centroid; height = distance from centroid to the plane
        h = abs((fx - cx) * nx + (fy - cy) * ny + (fz - cz) * nz)
        vol += area * h / 3.0
    return vol


# ---------------------------------------------------------------------------
# Public dispatch.
# ---------------------------------------------------------------------------


def _box_corners_2d(lo, hi):
    vx = np.array([lo[0], hi[0], hi[0], lo[0]])
    vy = np.array([lo[1], lo[1], hi[1], hi[1]])
    # box rows: 0:+x 1:-x 2:+y 3:-y; edges CCW starting at bottom edge
    eid = np.array([3, 0, 2, 1], dtype=np.int64)
    return vx, vy, eid


def _box_corners_3d(lo, hi):
    verts = np.empty((8, 3))
    memb = np.full((8, _MAXPLANES), -1, dtype=np.int64)
    cnt = np.zeros(8, dtype=np.int64)
    k = 0
    for sx in (0, 1):
        for sy in (0, 1):
            for sz in (0, 1):
                verts[k] = (
                    hi[0] if sx else lo[0],
                    hi[1] if sy else lo[1],
                    hi[2] if sz else lo[2],
                )
                memb[k, 0] = 0 if sx else 1
                memb[k, 1] = 2 if sy else 3
                memb[k, 2] = 4 if sz else 5
                cnt[k] = 3
                k += 1
    return verts, memb, cnt


def clip_halfspaces(
    A: np.ndarray,
    b: np.ndarray,
    lo: np.ndarray,
    hi: np.ndarray,
    eps: float = 1e-12,
) -> ClippedPolytope:
    """Intersect {A x <= b} with the box [lo, hi].

    Parameters
    ----------
    A, b : constraint rows, shape (m, dim) and (m,).
    lo, hi : bounding box corners; must strictly contain the region of
        interest.  The box becomes rows 0..2*dim-1 of the combined system,
        and user row i becomes combined row 2*dim + i.
    eps : on-plane classification tolerance, absolute.

    Returns
    -------
    ClippedPolytope with ``face_measure`` indexed by the combined rows.
    """
    lo = np.asarray(lo, dtype=float)
    hi = np.asarray(hi, dtype=float)
    A = np.ascontiguousarray(A, dtype=float)
    b = np.ascontiguousarray(b, dtype=float)
    dim = len(lo)
    Abox, bbox = box_rows(lo, hi)
    if A.size:
        Afull = np.vstack([Abox, A])
        bfull = np.concatenate([bbox, b])
    else:
        Afull, bfull = Abox, bbox
    m = len(bfull)
    scale = float(max(np.max(hi - lo), 1.0))
    tol = eps * scale

    if dim == 1:
        lo1, hi1 = float(lo[0]), float(hi[0])
        for i in range(len(b)):
            a = A[i, 0]
            if a > tol:
                hi1 = min(hi1, b[i] / a)
            elif a < -tol:
                lo1 = max(lo1, b[i] / a)
            elif b[i] < -tol:
                return ClippedPolytope(1, np.empty((0, 1)), 0.0, np.zeros(m), False)
        if hi1 - lo1 <= tol:
            return ClippedPolytope(1, np.empty((0, 1)), 0.0, np.zeros(m), False)
        face = np.zeros(m)
        # each endpoint is the facet of the binding row (box rows 0, 1 first)
        for endpoint, sign in ((hi1, 1.0), (lo1, -1.0)):
            vals = Afull[:, 0] * endpoint - bfull
            binding = np.where((np.abs(vals) <= tol) & (sign * Afull[:, 0] > 0))[0]
            if len(binding):
                face[binding[0]] = 1.0
        verts = np.array([[lo1], [hi1]])
        truncated = bool(face[0] > 0 or face[1] > 0)
        return ClippedPolytope(1, verts, hi1 - lo1, face, truncated)

    if dim == 2:
        cap = 4 + m + 8
        vx = np.empty(cap)
        vy = np.empty(cap)
        eid = np.empty(cap, dtype=np.int64)
        bx, by, be = _box_corners_2d(lo, hi)
        vx[:4], vy[:4], eid[:4] = bx, by, be
        # the initial polygon is the box, so the four box rows clip to no-ops
        # and edge ids live directly in combined-row indexing
        nv = _clip2d(Afull, bfull, vx, vy, eid, 4, tol)
        face = np.zeros(m)
        if nv == 0:
            return ClippedPolytope(2, np.empty((0, 2)), 0.0, face, False)
        area = _polygon_measures(vx, vy, eid, nv, m, face)
        verts = np.column_stack([vx[:nv], vy[:nv]])
        truncated = bool(np.any(face[:4] > tol))
        return ClippedPolytope(2, verts, area, face, truncated)

    if dim == 3:
        cap = 8 + 4 * m + 16
        verts = np.empty((cap, 3))
        memb = np.full((cap, _MAXPLANES), -1, dtype=np.int64)
        cnt = np.zeros(cap, dtype=np.int64)
        v0, m0, c0 = _box_corners_3d(lo, hi)
        verts[:8], memb[:8], cnt[:8] = v0, m0, c0
        nv = _clip3d(Afull, bfull, verts, memb, cnt, 8, tol)
        face = np.zeros(m)
        if nv <= 0:
            if nv < 0:
                raise RuntimeError("clip buffer overflow; increase capacity")
            return ClippedPolytope(3, np.empty((0, 3)), 0.0, face, False)
        vol = _polytope_measures_3d(Afull, verts, memb, cnt, nv, face)
        out = np.array(verts[:nv])
        truncated = bool(np.any(face[:6] > tol))
        return ClippedPolytope(3, out, vol, face, truncated)

    raise NotImplementedError(f"clipping not implemented for dim {dim}")
