"""Triangle-triangle intersection tests (vectorized, with exact-ish eps).

Interior intersection semantics: a pair intersects when the triangles
properly straddle each other's planes and their intersection-line intervals
overlap by more than the tolerance, or when they are coplanar with
overlapping area. Touching along shared vertices or tangentially does not
count.
"""

from __future__ import annotations

import numpy as np


def _coplanar_overlap(t1, t2, n, eps):
    axis = int(np.argmax(np.abs(n)))
    keep = [k for k in range(3) if k != axis]
    a = t1[:, keep]
    b = t2[:, keep]

    def edges(t):
        return [(t[k], t[(k + 1) % 3]) for k in range(3)]

    def separating(p, q):
        for e0, e1 in edges(p):
            normal = np.array([e1[1] - e0[1], e0[0] - e1[0]])
            dp = [(v - e0) @ normal for v in p]
            dq = [(v - e0) @ normal for v in q]
            if max(dp) <= eps and min(dq) >= -eps:
                return True
            if min(dp) >= -eps and max(dq) <= eps:
                return True
        return False

    return not (separating(a, b) or separating(b, a))


def _interval_batch(p: np.ndarray, d: np.ndarray, eps: np.ndarray):
    """Intersection-line intervals for triangles straddling the other plane.

    ``p`` are the vertex projections on the shared line direction, ``d`` the
    signed plane distances. Returns (lo, hi) per row.
    """
    s = np.where(np.abs(d) <= eps[:, None], 0.0, np.sign(d))
    odd = np.where(s[:, 0] * s[:, 1] > 0, 2,
                   np.where(s[:, 0] * s[:, 2] > 0, 1, 0))
    rows = np.arange(len(d))
    j1 = (odd + 1) % 3
    j2 = (odd + 2) % 3

    def crossing(jo, jk):
        do = d[rows, jo]
        dk = d[rows, jk]
        po = p[rows, jo]
        pk = p[rows, jk]
        denom = do - dk
        safe = np.where(np.abs(denom) > 1e-300, denom, 1.0)
        return np.where(np.abs(denom) > 1e-300, po + (pk - po) * do / safe, po)

    ta = crossing(odd, j1)
    tb = crossing(odd, j2)
    return np.minimum(ta, tb), np.maximum(ta, tb)


def tri_tri_batch(t1: np.ndarray, t2: np.ndarray, eps_len: float) -> np.ndarray:
    """Boolean interior-intersection per row of two (n, 3, 3) triangle sets."""
    n = len(t1)
    if n == 0:
        return np.zeros(0, bool)
    n1 = np.cross(t1[:, 1] - t1[:, 0], t1[:, 2] - t1[:, 0])
    n2 = np.cross(t2[:, 1] - t2[:, 0], t2[:, 2] - t2[:, 0])
    m1 = np.linalg.norm(n1, axis=1)
    m2 = np.linalg.norm(n2, axis=1)
    e1 = eps_len * np.maximum(m1, 1e-300)
    e2 = eps_len * np.maximum(m2, 1e-300)

    d2 = np.einsum("nkc,nc->nk", t2 - t1[:, 0:1, :], n1)
    d1 = np.einsum("nkc,nc->nk", t1 - t2[:, 0:1, :], n2)

    straddle2 = np.any(d2 > e1[:, None], axis=1) & np.any(d2 < -e1[:, None], axis=1)
    straddle1 = np.any(d1 > e2[:, None], axis=1) & np.any(d1 < -e2[:, None], axis=1)
    coplanar = np.all(np.abs(d2) <= e1[:, None], axis=1) \
        & np.all(np.abs(d1) <= e2[:, None], axis=1)

    out = np.zeros(n, bool)
    active = straddle1 & straddle2
    if np.any(active):
        idx = np.flatnonzero(active)
        direction = np.cross(n1[idx], n2[idx])
        p1 = np.einsum("nkc,nc->nk", t1[idx], direction)
        p2 = np.einsum("nkc,nc->nk", t2[idx], direction)
        lo1, hi1 = _interval_batch(p1, d1[idx], e2[idx])
        lo2, hi2 = _interval_batch(p2, d2[idx], e1[idx])
        scale = np.maximum(np.abs(p1).max(axis=1), np.abs(p2).max(axis=1))
        tol = eps_len * np.maximum(scale, 1e-300)
        out[idx] = np.minimum(hi1, hi2) - np.maximum(lo1, lo2) > tol

    for k in np.flatnonzero(coplanar):
        out[k] = _coplanar_overlap(t1[k], t2[k], n1[k], eps_len * max(m1[k], 1e-300))
    return out


def candidate_pairs(tri_points: np.ndarray, eps: float) -> np.ndarray:
    """Bounding-box grid candidates: (m, 2) index pairs, a < b."""
    lo = tri_points.min(axis=1)
    hi = tri_points.max(axis=1)
    extent = float(np.max(hi.max(axis=0) - lo.min(axis=0)))
    cell = max(float(np.median(hi - lo)) * 1.5, 1e-9 * max(extent, 1e-30))
    lo_idx = np.floor(lo / cell).astype(np.int64)
    hi_idx = np.floor(hi / cell).astype(np.int64)
    grid: dict[tuple[int, int, int], list[int]] = {}
    for f in range(len(tri_points)):
        for ix in range(lo_idx[f, 0], hi_idx[f, 0] + 1):
            for iy in range(lo_idx[f, 1], hi_idx[f, 1] + 1):
                for iz in range(lo_idx[f, 2], hi_idx[f, 2] + 1):
                    grid.setdefault((ix, iy, iz), []).append(f)
    pairs = set()
    for bucket in grid.values():
        if len(bucket) < 2:
            continue
        arr = np.array(bucket)
        ii, jj = np.triu_indices(len(arr), k=1)
        for a, b in zip(arr[ii], arr[jj]):
            pairs.add((int(a), int(b)) if a < b else (int(b), int(a)))
    if not pairs:
        return np.zeros((0, 2), int)
    return np.array(sorted(pairs), int)


def mesh_intersections(points: np.ndarray, tris: np.ndarray,
                       eps_rel: float = 1e-9,
                       max_report: int | None = None) -> list[tuple[int, int]]:
    """All non-adjacent interior-intersecting triangle pairs of a mesh.

    Pairs sharing a vertex index are legal contact and excluded.
    """
    if len(tris) == 0:
        return []
    tp = points[tris]
    scale = float(np.max(tp.max(axis=(0, 1)) - tp.min(axis=(0, 1))))
    eps = eps_rel * max(scale, 1e-30)
    pairs = candidate_pairs(tp, eps)
    if len(pairs) == 0:
        return []
    a, b = pairs[:, 0], pairs[:, 1]
    shares = ((tris[a][:, :, None] == tris[b][:, None, :]).any(axis=(1, 2)))
    pairs = pairs[~shares]
    if len(pairs) == 0:
        return []
    # AABB rejection before the exact test
    lo = tp.min(axis=1)
    hi = tp.max(axis=1)
    a, b = pairs[:, 0], pairs[:, 1]
    overlap = np.all(lo[a] <= hi[b] + eps, axis=1) & np.all(lo[b] <= hi[a] + eps, axis=1)
    pairs = pairs[overlap]
    hits = []
    chunk = 65536
    for k in range(0, len(pairs), chunk):
        sl = pairs[k:k + chunk]
        mask = tri_tri_batch(tp[sl[:, 0]], tp[sl[:, 1]], eps)
        for a, b in sl[mask]:
            hits.append((int(a), int(b)))
            if max_report is not None and len(hits) >= max_report:
                return hits
    return hits
