"""Nodal patch design: vertex placement on strut end-face circles.

Every nodal-triangle vertex lives on its strut's end-face circle and is
positioned by angular increments from a fixed anchor, so the circle
constraint holds by construction. The wolf-pack optimizer adjusts the
increments (renormalized to a full turn per strut after every update) to
minimize a weighted sum of

* a smoothness term: quads should continue their two neighbor triangles,
* a projection term rewarding vertices that wrap around the circle centers,
* two barrier terms forbidding flipped quads and triangle-strut contact.

Objective values are evaluated for whole populations at once (arrays shaped
(pop, ...)), which is what makes large lattices affordable.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from .errors import DegeneratePatchError, NodeDesignError
from .graph import LatticeGraph
from .gwo import GwoConfig, GwoResult, minimize
from .topology import NodeTopology, seed_vertex_layout

TWO_PI = 2.0 * math.pi
BETA_FLOOR = math.radians(2.0)
BARRIER_CLAMP = 1e-12
_TINY = 1e-30

DEFAULT_WEIGHTS = {"w1p": 1.0, "w2p": 1.0, "wb1": 10.0, "wb2": 10.0}


def _normalize_rows(v: np.ndarray) -> np.ndarray:
    return v / np.maximum(np.linalg.norm(v, axis=-1, keepdims=True), _TINY)


def _cos_between(a: np.ndarray, b: np.ndarray) -> np.ndarray:
    num = np.einsum("...c,...c->...", a, b)
    den = np.maximum(np.linalg.norm(a, axis=-1) * np.linalg.norm(b, axis=-1), _TINY)
    return np.clip(num / den, -1.0, 1.0)


@dataclass
class NodeShapeProblem:
    """Geometry and index tables for one node's patch optimization."""

    node_id: int
    node_position: np.ndarray
    strut_ids: list[int]
    directions: np.ndarray            # (n, 3)
    radii: np.ndarray                 # (n,)
    totals: np.ndarray                # (n,) total cut = baseline + refinement
    centers: np.ndarray               # (n, 3) end-face circle centers
    frames: list[tuple[np.ndarray, np.ndarray]]
    anchors: np.ndarray               # (n,)
    beta0: np.ndarray                 # concatenated initial increments
    topo: NodeTopology

    # index tables, filled in __post_init__
    offsets: np.ndarray = field(init=False)
    dim: int = field(init=False)
    tri_vidx: np.ndarray = field(init=False)      # (N_T, 3) global vertex ids
    tri_struts: np.ndarray = field(init=False)    # (N_T, 3) local strut ids
    quad_vidx: np.ndarray = field(init=False)     # (N_Q, 4): v1 v2 v3 v4
    quad_flanks: np.ndarray = field(init=False)   # (N_Q, 2): T_l, T_r
    quad_struts: np.ndarray = field(init=False)   # (N_Q, 2): i, j
    vert_strut: np.ndarray = field(init=False)    # (K,) strut of each vertex

    def __post_init__(self):
        topo = self.topo
        n = topo.degree
        ks = [topo.hull_degree(i) for i in range(n)]
        self.offsets = np.concatenate([[0], np.cumsum(ks)])
        self.dim = int(self.offsets[-1])
        self.vert_strut = np.concatenate([np.full(k, i, int) for i, k in enumerate(ks)])

        self.tri_vidx = np.empty((len(topo.triangles), 3), int)
        self.tri_struts = np.array(topo.triangles, int)
        for t in range(len(topo.triangles)):
            for c, strut in enumerate(topo.triangles[t]):
                self.tri_vidx[t, c] = self.offsets[strut] + topo.triangle_slot(t, strut)

        quads = []
        flanks = []
        for (i, j) in topo.edges:
            t_l, t_r = topo.edge_flanks(i, j)
            v1 = self.offsets[i] + topo.triangle_slot(t_l, i)
            v2 = self.offsets[i] + topo.triangle_slot(t_r, i)
            v3 = self.offsets[j] + topo.triangle_slot(t_l, j)
            v4 = self.offsets[j] + topo.triangle_slot(t_r, j)
            quads.append((v1, v2, v3, v4))
            flanks.append((t_l, t_r))
        self.quad_vidx = np.array(quads, int).reshape(-1, 4)
        self.quad_flanks = np.array(flanks, int).reshape(-1, 2)
        self.quad_struts = np.array(topo.edges, int).reshape(-1, 2)

    # ------------------------------------------------------------------
    def normalize_beta(self, beta: np.ndarray) -> np.ndarray:
        """Scale each strut's increments to a full turn, then enforce the
        2-degree floor by redistributing mass from the larger increments."""
        beta = np.maximum(np.asarray(beta, float), _TINY)
        out = np.empty_like(beta)
        for i in range(len(self.strut_ids)):
            sl = slice(self.offsets[i], self.offsets[i + 1])
            b = beta[..., sl]
            b = b * (TWO_PI / np.sum(b, axis=-1, keepdims=True))
            deficit = np.sum(np.maximum(BETA_FLOOR - b, 0.0), axis=-1, keepdims=True)
            excess = np.maximum(b - BETA_FLOOR, 0.0)
            surplus = np.maximum(np.sum(excess, axis=-1, keepdims=True), _TINY)
            b = np.maximum(b, BETA_FLOOR) - excess * (deficit / surplus)
            out[..., sl] = b
        return out

    def vertex_angles(self, beta_norm: np.ndarray) -> np.ndarray:
        """Anchor + exclusive cumulative sum per strut."""
        angles = np.empty_like(beta_norm)
        for i in range(len(self.strut_ids)):
            sl = slice(self.offsets[i], self.offsets[i + 1])
            b = beta_norm[..., sl]
            cum = np.cumsum(b, axis=-1)
            ang = np.empty_like(b)
            ang[..., 0] = self.anchors[i]
            ang[..., 1:] = self.anchors[i] + cum[..., :-1]
            angles[..., sl] = ang
        return angles

    def vertex_positions(self, angles: np.ndarray) -> np.ndarray:
        """Map angles (..., K) to 3D points on the end-face circles."""
        xs = np.stack([f[0] for f in self.frames])[self.vert_strut]   # (K, 3)
        ys = np.stack([f[1] for f in self.frames])[self.vert_strut]
        cen = self.centers[self.vert_strut]
        rad = self.radii[self.vert_strut][:, None]
        c, s = np.cos(angles)[..., None], np.sin(angles)[..., None]
        return cen + rad * (c * xs + s * ys)

    # ------------------------------------------------------------------
    def quad_angle_cosines(self, verts: np.ndarray) -> np.ndarray:
        """Cosines of the four transition angles of every quad: (..., N_Q, 4).

        Angle 1 pairs the left-triangle edge normal u1 with the connecting
        chord 1->2, angle 2 with chord 3->4; angles 3 and 4 pair u2 with the
        reversed chords.
        """
        t = verts[..., self.tri_vidx, :]                       # (..., N_T, 3, 3)
        n_tri = _normalize_rows(np.cross(t[..., 1, :] - t[..., 0, :],
                                         t[..., 2, :] - t[..., 0, :]))
        v1 = verts[..., self.quad_vidx[:, 0], :]
        v2 = verts[..., self.quad_vidx[:, 1], :]
        v3 = verts[..., self.quad_vidx[:, 2], :]
        v4 = verts[..., self.quad_vidx[:, 3], :]
        n_l = n_tri[..., self.quad_flanks[:, 0], :]
        n_r = n_tri[..., self.quad_flanks[:, 1], :]
        u1 = np.cross(v1 - v3, n_l)
        u2 = np.cross(v4 - v2, n_r)
        l12 = v2 - v1
        l34 = v4 - v3
        return np.stack([
            _cos_between(u1, l12),
            _cos_between(u1, l34),
            _cos_between(u2, -l12),
            _cos_between(u2, -l34),
        ], axis=-1)

    def projection_cosines(self, verts: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
        """Per triangle, the six circle-wrap angle cosines and barrier gates.

        Returns ``(cos_phi, climb)`` with shape (..., N_T, 6). Term order per
        triangle follows corner order: corner 1 vs corners 2, 3; corner 2 vs
        1, 3; corner 3 vs 1, 2. ``climb`` is the dot of the strut direction
        with the edge leaving the corner vertex (positive means the edge
        climbs up the strut).
        """
        t = verts[..., self.tri_vidx, :]                       # (..., N_T, 3, 3)
        e = self.directions[self.tri_struts]                   # (N_T, 3, 3)
        o = self.centers[self.tri_struts]
        pairs = [(0, 1), (0, 2), (1, 0), (1, 2), (2, 0), (2, 1)]
        cos_list, climb_list = [], []
        for k, j in pairs:
            tk = t[..., k, :]
            tj = t[..., j, :]
            ek = e[:, k, :]
            ok = o[:, k, :]
            diff = tj - tk
            height = np.einsum("...tc,tc->...t", diff, ek)
            proj = tj - height[..., None] * ek
            cos_list.append(_cos_between(ok - tk, proj - tk))
            climb_list.append(height)
        return np.stack(cos_list, axis=-1), np.stack(climb_list, axis=-1)


@dataclass
class NodalPatchSet:
    """Concrete patch geometry for one node (vertices on end circles)."""

    problem: NodeShapeProblem
    beta: np.ndarray           # normalized increments, concatenated
    angles: np.ndarray         # (K,) vertex angles
    vertices: np.ndarray       # (K, 3)
    origin: str = "optimized"  # which candidate produced this layout

    @property
    def triangle_count(self) -> int:
        return len(self.problem.tri_vidx)

    @property
    def quad_count(self) -> int:
        return len(self.problem.quad_vidx)

    def triangle_points(self) -> np.ndarray:
        return self.vertices[self.problem.tri_vidx]


def build_patches(problem: NodeShapeProblem, beta: np.ndarray) -> NodalPatchSet:
    """Realize a patch set from raw increments (renormalized)."""
    beta_n = problem.normalize_beta(np.asarray(beta, float))
    angles = problem.vertex_angles(beta_n)
    verts = problem.vertex_positions(angles)
    return NodalPatchSet(problem, beta_n, angles, verts)


def build_shape_problem(g: LatticeGraph, node_id: int, topo: NodeTopology,
                        totals: np.ndarray) -> NodeShapeProblem:
    """Assemble the optimization problem for one node given its total cuts."""
    n = topo.degree
    totals = np.asarray(totals, float)
    radii = np.array([g.struts[s].radius for s in topo.strut_ids])
    pos = g.position(node_id)
    centers = pos[None, :] + topo.directions * totals[:, None]
    anchors = np.empty(n)
    beta_parts = []
    for i in range(n):
        anchor, b0 = seed_vertex_layout(topo, i)
        anchors[i] = anchor
        beta_parts.append(b0)
    return NodeShapeProblem(node_id, pos, list(topo.strut_ids), topo.directions,
                            radii, totals, centers, topo.frames, anchors,
                            np.concatenate(beta_parts), topo)


# ----------------------------------------------------------------------
# objective components (single patch set)

def _check_patch_sanity(patches: NodalPatchSet) -> None:
    p = patches.problem
    v = patches.vertices
    chords = np.concatenate([
        v[p.quad_vidx[:, 1]] - v[p.quad_vidx[:, 0]],
        v[p.quad_vidx[:, 3]] - v[p.quad_vidx[:, 2]],
    ])
    if np.any(np.linalg.norm(chords, axis=1) < 1e-9 * p.radii.min()):
        raise DegeneratePatchError("coincident quad vertices (zero-length connecting edge)")


def smoothness_objective(patches: NodalPatchSet) -> float:
    """Sum over quads of (cos(theta) - 1)^2 for the four transition angles."""
    _check_patch_sanity(patches)
    cos = patches.problem.quad_angle_cosines(patches.vertices)
    return float(np.sum((cos - 1.0) ** 2))


def flip_barrier(patches: NodalPatchSet, w_b1: float = 1.0) -> float:
    """Barrier on flipped quads (two or more transition angles over 90 deg)."""
    cos = patches.problem.quad_angle_cosines(patches.vertices)
    return w_b1 * float(_flip_barrier_from_cos(cos))


def _flip_barrier_from_cos(cos: np.ndarray) -> np.ndarray:
    neg = cos < 0.0
    flipped = np.sum(neg, axis=-1) >= 2
    x = np.clip(cos, -1.0 + BARRIER_CLAMP, None)
    term = np.where(neg & flipped[..., None], np.log1p(x) / np.where(neg, x, 1.0), 0.0)
    return np.sum(term, axis=(-2, -1))


def projection_objective(patches: NodalPatchSet) -> float:
    """Sum of the six circle-wrap cosines per triangle (lower wraps better)."""
    p = patches.problem
    t = patches.vertices[p.tri_vidx]
    rays = t[:, [1, 2, 0, 2, 0, 1], :] - t[:, [0, 0, 1, 1, 2, 2], :]
    if np.any(np.linalg.norm(rays, axis=-1) < 1e-12 * p.radii.min()):
        raise DegeneratePatchError("coincident projected points in wrap angles")
    cos, _ = p.projection_cosines(patches.vertices)
    return float(np.sum(cos))


def intersection_barrier(patches: NodalPatchSet, w_b2: float = 1.0) -> float:
    """Barrier on triangle edges that climb a strut while heading inward."""
    cos, climb = patches.problem.projection_cosines(patches.vertices)
    return w_b2 * float(_intersection_barrier_from_cos(cos, climb))


def _intersection_barrier_from_cos(cos: np.ndarray, climb: np.ndarray) -> np.ndarray:
    trigger = (climb > 0.0) & (cos > 0.0)
    c = np.clip(cos, None, 1.0 - BARRIER_CLAMP)
    term = np.where(trigger, np.log1p(-c) / np.where(trigger, -c, 1.0), 0.0)
    return np.sum(term, axis=(-2, -1))


def combined_objective(patches: NodalPatchSet, weights: dict | None = None) -> float:
    w = dict(DEFAULT_WEIGHTS, **(weights or {}))
    return (w["w1p"] * smoothness_objective(patches)
            + w["w2p"] * projection_objective(patches)
            + flip_barrier(patches, w["wb1"])
            + intersection_barrier(patches, w["wb2"]))


# ----------------------------------------------------------------------
# exact post-checks

def flipped_quads(patches: NodalPatchSet) -> list[int]:
    """Indices of quads failing the exact flip test (>= 2 angles over 90 deg)."""
    cos = patches.problem.quad_angle_cosines(patches.vertices)
    return list(np.flatnonzero(np.sum(cos < 0.0, axis=-1) >= 2))


def segment_hits_cylinder(p0: np.ndarray, p1: np.ndarray, base: np.ndarray,
                          axis: np.ndarray, radius: float, height: float,
                          tol: float) -> bool:
    """True if the open segment enters the open solid cylinder interior."""
    a0 = p0 - base
    d = p1 - p0
    s0 = float(np.dot(a0, axis))
    sd = float(np.dot(d, axis))
    perp0 = a0 - s0 * axis
    perpd = d - sd * axis
    r_in = radius - tol
    # |perp0 + u*perpd|^2 < r_in^2 as a quadratic in u
    a = float(np.dot(perpd, perpd))
    b = 2.0 * float(np.dot(perp0, perpd))
    c = float(np.dot(perp0, perp0)) - r_in * r_in
    if a < 1e-30:
        if c >= 0.0:
            return False
        u_lo, u_hi = 0.0, 1.0
    else:
        disc = b * b - 4.0 * a * c
        if disc <= 0.0:
            return False
        sq = math.sqrt(disc)
        u_lo = (-b - sq) / (2.0 * a)
        u_hi = (-b + sq) / (2.0 * a)
    u_lo = max(u_lo, 0.0)
    u_hi = min(u_hi, 1.0)
    if u_lo >= u_hi:
        return False
    # axial window: tol < s0 + u*sd < height - tol
    if abs(sd) < 1e-30:
        return tol < s0 < height - tol
    w_lo = (tol - s0) / sd
    w_hi = (height - tol - s0) / sd
    if w_lo > w_hi:
        w_lo, w_hi = w_hi, w_lo
    return max(u_lo, w_lo) < min(u_hi, w_hi)


def _segment_hits_triangle(orig: np.ndarray, dest: np.ndarray,
                           tri: np.ndarray, tol: float) -> bool:
    """Moller-Trumbore segment/triangle interior crossing."""
    e1 = tri[1] - tri[0]
    e2 = tri[2] - tri[0]
    d = dest - orig
    p = np.cross(d, e2)
    det = float(np.dot(e1, p))
    if abs(det) < 1e-14:
        return False
    inv = 1.0 / det
    tv = orig - tri[0]
    u = float(np.dot(tv, p)) * inv
    if u < tol or u > 1.0 - tol:
        return False
    q = np.cross(tv, e1)
    v = float(np.dot(d, q)) * inv
    if v < tol or u + v > 1.0 - tol:
        return False
    s = float(np.dot(e2, q)) * inv
    return tol < s < 1.0 - tol


def triangle_cylinder_intersect(tri: np.ndarray, base: np.ndarray, axis: np.ndarray,
                                radius: float, height: float,
                                tol: float = 1e-9) -> bool:
    """Exact open-interior intersection of a triangle and a finite cylinder."""
    tol_len = tol * radius
    for k in range(3):
        a = tri[k] - base
        s = float(np.dot(a, axis))
        if tol_len < s < height - tol_len and np.linalg.norm(a - s * axis) < radius - tol_len:
            return True
    for k in range(3):
        if segment_hits_cylinder(tri[k], tri[(k + 1) % 3], base, axis,
                                 radius, height, tol_len):
            return True
    return _segment_hits_triangle(base, base + axis * height, tri, tol)


def triangle_strut_intersections(patches: NodalPatchSet, g: LatticeGraph,
                                 tol: float = 1e-9) -> list[tuple[int, int]]:
    """(triangle index, local strut) pairs with exact interior intersection.

    Each nodal triangle is tested against the remaining cylinders of its own
    three struts (the pairs the barrier models).
    """
    p = patches.problem
    hits = []
    for t in range(len(p.tri_vidx)):
        tri = patches.vertices[p.tri_vidx[t]]
        for k in range(3):
            i = p.tri_struts[t, k]
            sid = p.strut_ids[i]
            height = g.strut_length(sid) - p.totals[i]
            if height <= 0:
                continue
            if triangle_cylinder_intersect(tri, p.centers[i], p.directions[i],
                                           p.radii[i], height, tol):
                hits.append((t, int(i)))
    return hits


# ----------------------------------------------------------------------
# local geometric gate

def local_patch_mesh(patches: NodalPatchSet, g: LatticeGraph,
                     chord_error: float = 0.02,
                     stub_factor: float = 2.0) -> tuple[np.ndarray, np.ndarray]:
    """Coarse triangle soup of this node's patch faces plus strut wall stubs.

    Points are shared by index exactly as in the stitched model, so contact
    at patch vertices and circle subdivisions is legal adjacency.
    """
    from .mesher import subdivision_count, subdivide_arc

    p = patches.problem
    topo = p.topo
    points: list[np.ndarray] = [v for v in patches.vertices]
    tris: list[tuple[int, int, int]] = []

    def circle_point(i: int, ang: float) -> np.ndarray:
        x, y = p.frames[i]
        return p.centers[i] + p.radii[i] * (math.cos(ang) * x + math.sin(ang) * y)

    # subdivide every arc once (slot m -> m+1), keeping endpoint ids shared
    chains: dict[tuple[int, int], list[int]] = {}
    for i in range(topo.degree):
        k = topo.hull_degree(i)
        off = p.offsets[i]
        for m in range(k):
            a1 = float(patches.angles[off + m])
            a2 = float(patches.angles[off + m + 1]) if m + 1 < k \
                else float(patches.angles[off]) + TWO_PI
            n_seg = subdivision_count(a1, a2, chord_error)
            ids = [off + m]
            for s in subdivide_arc(a1, a2, n_seg)[1:-1]:
                points.append(circle_point(i, float(s)))
                ids.append(len(points) - 1)
            ids.append(off + (m + 1) % k)
            chains[(i, m)] = ids

    for t in range(len(p.tri_vidx)):
        tris.append(tuple(int(v) for v in p.tri_vidx[t]))

    def strip(P: list[int], Q: list[int]) -> None:
        ip = iq = 0
        np_, nq = len(P) - 1, len(Q) - 1
        while ip < np_ or iq < nq:
            if iq >= nq or (ip < np_ and (ip + 1) * nq <= (iq + 1) * np_):
                tris.append((P[ip + 1], P[ip], Q[iq]))
                ip += 1
            else:
                tris.append((Q[iq], Q[iq + 1], P[ip]))
                iq += 1

    for q, (i, j) in enumerate(topo.edges):
        t_l, t_r = topo.edge_flanks(i, j)
        strip(chains[(i, topo.triangle_slot(t_l, i))],
              chains[(j, topo.triangle_slot(t_r, j))][::-1])

    # strut wall stubs from the end circle outward
    for i in range(topo.degree):
        k = topo.hull_degree(i)
        ring = []
        for m in range(k):
            ring.extend(chains[(i, m)][:-1])
        sid = p.strut_ids[i]
        height = min(stub_factor * 2.0 * float(p.radii.max()),
                     max(g.strut_length(sid) - float(p.totals[i]), 1e-9))
        offset = p.directions[i] * height
        top = []
        for pid in ring:
            points.append(points[pid] + offset)
            top.append(len(points) - 1)
        n_ring = len(ring)
        for m in range(n_ring):
            m2 = (m + 1) % n_ring
            tris.append((ring[m], ring[m2], top[m]))
            tris.append((top[m], ring[m2], top[m2]))

    return np.array(points).reshape(-1, 3), np.array(tris, int).reshape(-1, 3)


def patch_self_intersections(patches: NodalPatchSet, g: LatticeGraph,
                             chord_error: float = 0.02) -> list[tuple[int, int]]:
    """Interior intersections among the node's own faces and strut walls."""
    from .intersect import mesh_intersections
    points, tris = local_patch_mesh(patches, g, chord_error)
    return mesh_intersections(points, tris, max_report=8)


# ----------------------------------------------------------------------
# optimization

def optimize_node(g: LatticeGraph, node_id: int, topo: NodeTopology,
                  totals: np.ndarray, weights: dict | None = None,
                  gwo_config: GwoConfig | None = None) -> tuple[NodalPatchSet, GwoResult]:
    """Optimize the beta increments of one node's patch set.

    Returns the best barrier-free patch set passing the exact geometric
    post-checks. When the optimizer's barrier-free best fails the local
    self-intersection gate (possible on degenerate direction hulls, where
    the flip heuristic misfires), the seed and uniform layouts are tried as
    fallbacks and the choice is flagged on the patch set. Raises
    :class:`NodeDesignError` when nothing acceptable is found.
    """
    w = dict(DEFAULT_WEIGHTS, **(weights or {}))
    problem = build_shape_problem(g, node_id, topo, totals)

    def batch(beta_raw: np.ndarray) -> np.ndarray:
        bn = problem.normalize_beta(beta_raw)
        verts = problem.vertex_positions(problem.vertex_angles(bn))
        qcos = problem.quad_angle_cosines(verts)
        pcos, climb = problem.projection_cosines(verts)
        f1p = np.sum((qcos - 1.0) ** 2, axis=(-2, -1))
        f2p = np.sum(pcos, axis=(-2, -1))
        fb1 = _flip_barrier_from_cos(qcos)
        fb2 = _intersection_barrier_from_cos(pcos, climb)
        return w["w1p"] * f1p + w["w2p"] * f2p + w["wb1"] * fb1 + w["wb2"] * fb2

    def barrier_free(beta_raw: np.ndarray) -> bool:
        bn = problem.normalize_beta(beta_raw)
        verts = problem.vertex_positions(problem.vertex_angles(bn))
        qcos = problem.quad_angle_cosines(verts)
        pcos, climb = problem.projection_cosines(verts)
        return (float(_flip_barrier_from_cos(qcos)) == 0.0
                and float(_intersection_barrier_from_cos(pcos, climb)) == 0.0)

    def batch_barrier_free(beta_raw: np.ndarray) -> np.ndarray:
        bn = problem.normalize_beta(beta_raw)
        verts = problem.vertex_positions(problem.vertex_angles(bn))
        qcos = problem.quad_angle_cosines(verts)
        pcos, climb = problem.projection_cosines(verts)
        return (_flip_barrier_from_cos(qcos) == 0.0) \
            & (_intersection_barrier_from_cos(pcos, climb) == 0.0)

    box = [(0.01, TWO_PI)] * problem.dim
    if gwo_config is None:
        gwo_config = GwoConfig(box=box, max_iterations=150)
    else:
        gwo_config = gwo_config.with_box(box)
    gwo_config = gwo_config.with_initial_guesses([problem.beta0])
    if gwo_config.validity is None:
        gwo_config = gwo_config.with_validity(validity=barrier_free,
                                              batch_validity=batch_barrier_free)

    result = minimize(lambda x: float(batch(x[None, :])[0]), gwo_config,
                      batch_objective=batch)

    candidates: list[tuple[str, np.ndarray]] = []
    if result.best_valid_position is not None:
        candidates.append(("optimized", result.best_valid_position))
    candidates.append(("seed", problem.beta0))
    candidates.append(("uniform", np.concatenate([
        np.full(topo.hull_degree(i), TWO_PI / topo.hull_degree(i))
        for i in range(topo.degree)])))

    diagnostics: dict = {"best_fitness": result.fitness}
    for origin, position in candidates:
        patches = build_patches(problem, position)
        if origin == "optimized":
            flips = flipped_quads(patches)
            hits = triangle_strut_intersections(patches, g)
            if flips or hits:
                diagnostics["optimized_postcheck"] = {
                    "flipped_quads": [int(x) for x in flips],
                    "intersections": hits}
                continue
        crossings = patch_self_intersections(patches, g)
        if not crossings:
            patches.origin = origin
            return patches, result
        diagnostics[f"{origin}_crossings"] = len(crossings)

    raise NodeDesignError(
        f"node {node_id}: no acceptable patch layout "
        f"(diagnostics {diagnostics})",
        node_id=node_id, diagnostics=diagnostics)
