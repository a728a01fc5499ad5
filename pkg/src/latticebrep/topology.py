"""Per-node connectivity from the spherical Delaunay of strut directions.

The incident strut directions are treated as points on the unit sphere; their
3D convex hull is the spherical Delaunay triangulation. Hull triangles become
the nodal triangles, hull edges the quad faces, and the link cycle of each
hull vertex gives the counterclockwise order of vertices on that strut's
end-face circle (viewed along the negated strut direction).

Nodal-triangle vertices correspond one-to-one to the hull triangles incident
to a strut; the angular gaps between consecutive vertices (one per incident
hull edge) are the increments the shape optimizer adjusts.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np
from scipy.spatial import ConvexHull, QhullError

from .errors import GraphError, TopologyError
from .geometry import angle_between, plane_basis, unit
from .graph import LatticeGraph, strut_direction

CLUSTER_WARN_ANGLE = math.radians(5.0)
PERTURBATION = 1e-9


@dataclass
class NodeTopology:
    """Connectivity of one node's replacement patch.

    All strut references are local indices into ``strut_ids``. ``triangles``
    are outward-oriented triples; ``edges`` the unordered hull edges (the
    topology set for cut post-processing); ``link[i]`` the neighbors of strut
    i in counterclockwise circle order starting at the lowest-index neighbor;
    ``edge_angles[i]`` the matching projected neighbor angles (first is 0);
    ``frames[i]`` the right-handed in-plane basis of strut i's end circle.
    """

    node_id: int
    strut_ids: list[int]
    directions: np.ndarray
    triangles: list[tuple[int, int, int]]
    edges: list[tuple[int, int]]
    link: list[list[int]]
    edge_angles: list[np.ndarray]
    frames: list[tuple[np.ndarray, np.ndarray]]
    warnings: list[str] = field(default_factory=list)

    @property
    def degree(self) -> int:
        return len(self.strut_ids)

    def local_index(self, strut_id: int) -> int:
        return self.strut_ids.index(strut_id)

    def hull_degree(self, i: int) -> int:
        return len(self.link[i])

    def slot_triangle(self, i: int, m: int) -> tuple[int, int, int]:
        """Hull triangle owning vertex slot m on strut i's circle."""
        k = len(self.link[i])
        return (i, self.link[i][m], self.link[i][(m + 1) % k])

    def triangle_slot(self, tri_index: int, i: int) -> int:
        """Vertex slot of triangle ``tri_index`` on strut i's circle."""
        return self._tri_slot[(tri_index, i)]

    def edge_flanks(self, i: int, j: int) -> tuple[int, int]:
        """(T_l, T_r) triangle indices flanking hull edge {i, j}.

        T_l traverses the edge j -> i in its outward winding, T_r traverses
        i -> j; equivalently T_l comes before the edge in i's fan order.
        """
        return self._flanks[(min(i, j), max(i, j))]

    def __post_init__(self):
        self._tri_index = {self._key(t): n for n, t in enumerate(self.triangles)}
        self._tri_slot: dict[tuple[int, int], int] = {}
        for i in range(self.degree):
            for m in range(len(self.link[i])):
                tri = self.slot_triangle(i, m)
                self._tri_slot[(self._tri_index[self._key(tri)], i)] = m
        self._flanks: dict[tuple[int, int], tuple[int, int]] = {}
        for i in range(self.degree):
            k = len(self.link[i])
            for m in range(k):
                j = self.link[i][m]
                if i < j:
                    t_l = self._tri_index[self._key(self.slot_triangle(i, (m - 1) % k))]
                    t_r = self._tri_index[self._key(self.slot_triangle(i, m))]
                    self._flanks[(i, j)] = (t_l, t_r)

    @staticmethod
    def _key(tri: tuple[int, int, int]) -> tuple[int, ...]:
        """Rotation-invariant key for an oriented triangle."""
        k = tri.index(min(tri))
        return tri[k:] + tri[:k]


def _oriented_simplices(points: np.ndarray) -> list[tuple[int, int, int]]:
    """Outward-oriented hull triangles of >= 4 points in general position."""
    try:
        hull = ConvexHull(points)
    except QhullError:
        rng = np.random.Generator(np.random.Philox(key=np.array(
            [np.uint64(0xD1AEC7), np.uint64(len(points))], dtype=np.uint64)))
        jittered = points + PERTURBATION * (rng.random(points.shape) - 0.5)
        try:
            hull = ConvexHull(jittered)
        except QhullError as exc:
            raise TopologyError(f"degenerate direction set: {exc}") from None
        points = jittered
    if len(hull.vertices) != len(points):
        raise TopologyError("coincident strut directions: not all points are hull vertices")
    tris = []
    for simplex, eq in zip(hull.simplices, hull.equations):
        a, b, c = (int(v) for v in simplex)
        n = np.cross(points[b] - points[a], points[c] - points[a])
        if np.dot(n, eq[:3]) < 0.0:
            b, c = c, b
        tris.append((a, b, c))
    return tris


def _links_from_triangles(n: int, tris: list[tuple[int, int, int]]) -> list[list[int]]:
    """CCW link cycle around each vertex, starting at its lowest neighbor."""
    succ: list[dict[int, int]] = [dict() for _ in range(n)]
    for a, b, c in tris:
        succ[a][b] = c
        succ[b][c] = a
        succ[c][a] = b
    links = []
    for i in range(n):
        nxt = succ[i]
        if not nxt:
            raise TopologyError(f"hull vertex {i} has no incident triangles")
        start = min(nxt)
        cycle = [start]
        cur = nxt[start]
        while cur != start:
            if cur in cycle or len(cycle) > len(nxt):
                raise TopologyError(f"non-cyclic link around hull vertex {i}")
            cycle.append(cur)
            cur = nxt[cur]
        if len(cycle) != len(nxt):
            raise TopologyError(f"disconnected link around hull vertex {i}")
        links.append(cycle)
    return links


def build_node_topology(g: LatticeGraph, node_id: int) -> NodeTopology:
    """Convex-hull topology of the strut directions at a degree >= 3 node."""
    entries = g.adjacency[node_id]
    n = len(entries)
    if n < 3:
        raise GraphError(f"node {node_id} has degree {n}; topology needs degree >= 3")
    dirs = np.array([strut_direction(g, e.strut_id, node_id) for e in entries])
    ids = [e.strut_id for e in entries]

    warnings = []
    for i in range(n):
        for j in range(i + 1, n):
            a = angle_between(dirs[i], dirs[j])
            if a < CLUSTER_WARN_ANGLE:
                warnings.append(
                    f"node {node_id}: struts {ids[i]} and {ids[j]} are only "
                    f"{math.degrees(a):.2f} deg apart; expect sliver patches")

    if n == 3:
        normal = np.cross(dirs[1] - dirs[0], dirs[2] - dirs[0])
        if np.linalg.norm(normal) < 1e-12:
            raise TopologyError(f"node {node_id}: collinear direction triple")
        front = (0, 1, 2) if np.dot(normal, dirs.sum(axis=0)) >= 0.0 else (0, 2, 1)
        tris = [front, (front[0], front[2], front[1])]
    else:
        tris = _oriented_simplices(dirs)

    links = _links_from_triangles(n, tris)
    edges = sorted({(min(i, j), max(i, j)) for i in range(n) for j in links[i]})

    frames = []
    edge_angles = []
    for i in range(n):
        x_axis, y_axis = plane_basis(dirs[i], hint=dirs[links[i][0]])
        frames.append((x_axis, y_axis))
        raw = []
        for j in links[i]:
            p = dirs[j] - np.dot(dirs[j], dirs[i]) * dirs[i]
            raw.append(math.atan2(np.dot(p, y_axis), np.dot(p, x_axis)) % (2.0 * math.pi))
        # unwrap along the combinatorial order; the first angle is 0 by basis choice
        psi = [0.0]
        for m in range(1, len(raw)):
            gap = (raw[m] - raw[m - 1]) % (2.0 * math.pi)
            psi.append(psi[-1] + gap)
        total = psi[-1] + ((2.0 * math.pi - raw[-1]) % (2.0 * math.pi)
                           if len(raw) > 1 else 2.0 * math.pi)
        if abs(total - 2.0 * math.pi) > 1e-9:
            # projection winding is degenerate (extreme direction spike):
            # fall back to combinatorial equal spacing
            warnings.append(f"node {node_id}: strut {ids[i]} link projection "
                            f"winds {total / (2 * math.pi):.3f} turns; using equal spacing")
            psi = [2.0 * math.pi * m / len(raw) for m in range(len(raw))]
        edge_angles.append(np.array(psi))

    return NodeTopology(node_id, ids, dirs, tris, edges, links, edge_angles,
                        frames, warnings)


def initial_vertex_angles(topo: NodeTopology, strut_index: int) -> tuple[np.ndarray, np.ndarray]:
    """Initial per-edge angles and angular increments on a strut's circle.

    Returns ``(angles, beta)`` in radians: one angle per incident hull edge
    (counterclockwise, first at 0 by basis construction) and the successive
    gaps, which sum to a full turn.
    """
    psi = topo.edge_angles[strut_index]
    k = len(psi)
    beta = np.empty(k)
    beta[:-1] = np.diff(psi)
    beta[-1] = 2.0 * math.pi - psi[-1]
    return psi.copy(), beta


def seed_vertex_layout(topo: NodeTopology, strut_index: int) -> tuple[float, np.ndarray]:
    """Anchor angle and initial increments for the shape optimizer.

    Vertex slot m (owned by the hull triangle between edges m and m+1) is
    seeded at its triangle's outward-normal direction projected onto the
    circle plane; on flat direction hulls this separates front- and
    back-facing sheets that gap midpoints would collapse. When the normal
    targets are not cyclically ordered along the fan they are blended toward
    the gap midpoints until they are. The anchor is the slot-0 angle and
    stays fixed during optimization.
    """
    i = strut_index
    psi, gaps = initial_vertex_angles(topo, i)
    k = len(psi)
    mids = psi + gaps / 2.0

    x_axis, y_axis = topo.frames[i]
    e_i = topo.directions[i]
    targets = np.empty(k)
    for m in range(k):
        _, a, b = topo.slot_triangle(i, m)
        normal = np.cross(topo.directions[a] - e_i, topo.directions[b] - e_i)
        proj = normal - np.dot(normal, e_i) * e_i
        if np.linalg.norm(proj) < 1e-9:
            targets[m] = mids[m] % (2.0 * math.pi)
        else:
            targets[m] = math.atan2(np.dot(proj, y_axis),
                                    np.dot(proj, x_axis)) % (2.0 * math.pi)

    def closes(t: np.ndarray) -> bool:
        total = np.sum(np.diff(np.concatenate([t, [t[0]]])) % (2.0 * math.pi))
        return abs(total - 2.0 * math.pi) < 1e-9

    seed = targets
    if k > 1 and not closes(seed):
        for lam in (0.25, 0.5, 0.75, 1.0):
            delta = (mids % (2.0 * math.pi)) - targets
            delta = (delta + math.pi) % (2.0 * math.pi) - math.pi
            seed = (targets + lam * delta) % (2.0 * math.pi)
            if closes(seed):
                break

    anchor = float(seed[0])
    beta0 = np.empty(k)
    if k > 1:
        beta0[:-1] = np.diff(seed) % (2.0 * math.pi)
        beta0[-1] = 2.0 * math.pi - np.sum(beta0[:-1])
    else:
        beta0[0] = 2.0 * math.pi
    return anchor, beta0
