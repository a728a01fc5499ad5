"""Multiresolution triangle meshing of the boundary representation.

Arcs are subdivided once under the chord-error bound and every face
referencing an arc reuses the same subdivision points by index, so the mesh
is watertight whenever the model is valid. Re-meshing at another resolution
reuses the unchanged model.
"""

from __future__ import annotations

import math
import struct
from dataclasses import dataclass, field

import numpy as np

from .brep import BRepModel, ValidityReport, _structural_checks
from .errors import MeshError
from .geometry import plane_basis, unit


@dataclass(frozen=True)
class MeshConfig:
    """Chord error is the maximum sagitta as a fraction of the arc radius."""

    chord_error: float = 0.05

    def __post_init__(self):
        if not (0.0 < self.chord_error < 1.0):
            raise ValueError("chord error must be in (0, 1)")


@dataclass
class TriMesh:
    vertices: np.ndarray            # (V, 3)
    triangles: np.ndarray           # (F, 3) int
    face_ids: np.ndarray = field(default=None)   # (F,) source B-rep face id

    @property
    def vertex_count(self) -> int:
        return len(self.vertices)

    @property
    def triangle_count(self) -> int:
        return len(self.triangles)


def subdivision_count(a1: float, a2: float, chord_error: float) -> int:
    """Number of uniform segments keeping each chord's sagitta under the
    bound: floor(span / (2 acos(1 - CE))) + 1, at least one segment."""
    span = a2 - a1
    if span <= 0.0:
        return 1
    limit = 2.0 * math.acos(1.0 - chord_error)
    return max(int(math.floor(span / limit)) + 1, 1)


def subdivide_arc(a1: float, a2: float, n: int) -> np.ndarray:
    """Uniform parameters s_0..s_n with exact endpoints."""
    if n < 1:
        raise ValueError("need at least one segment")
    s = a1 + (a2 - a1) * np.arange(n + 1) / n
    s[0], s[-1] = a1, a2
    return s


def _arc_segment_counts(model: BRepModel, ce: float) -> dict[int, int]:
    counts = {a.id: subdivision_count(a.a1, a.a2, ce) for a in model.arcs}
    # closed loops must form at least a triangle
    for lp in model.loops:
        ids = [aid for aid, _ in lp.arcs]
        while sum(counts[a] for a in ids) < 3:
            widest = max(ids, key=lambda a: (model.arcs[a].a2 - model.arcs[a].a1)
                         / counts[a])
            counts[widest] += 1
    return counts


class _MeshBuilder:
    def __init__(self, model: BRepModel, counts: dict[int, int]):
        self.model = model
        self.points: list[np.ndarray] = [v.copy() for v in model.vertices]
        self.tris: list[tuple[int, int, int]] = []
        self.tri_faces: list[int] = []
        self.chains: dict[int, list[int]] = {}
        for arc in model.arcs:
            n = counts[arc.id]
            params = subdivide_arc(arc.a1, arc.a2, n)
            ids = []
            for k, s in enumerate(params):
                if k == 0 and arc.v_start is not None:
                    ids.append(arc.v_start)
                elif k == n and arc.v_end is not None:
                    ids.append(arc.v_end)
                elif k == n and arc.v_start is None:
                    ids.append(ids[0])          # closed arc wraps to its seam
                else:
                    self.points.append(arc.point_at(float(s)))
                    ids.append(len(self.points) - 1)
            self.chains[arc.id] = ids

    def emit(self, a: int, b: int, c: int, face_id: int) -> None:
        if a != b and b != c and a != c:
            self.tris.append((a, b, c))
            self.tri_faces.append(face_id)

    def loop_cycle(self, loop_id: int) -> list[int]:
        """Concatenated chain of a loop's arcs (closed; first == last dropped)."""
        out: list[int] = []
        for aid, rev in self.model.loops[loop_id].arcs:
            chain = self.chains[aid]
            chain = chain[::-1] if rev else chain
            if out and out[-1] == chain[0]:
                out.extend(chain[1:])
            else:
                out.extend(chain)
        if len(out) > 1 and out[0] == out[-1]:
            out.pop()
        return out


def _strip(builder: _MeshBuilder, P: list[int], Q: list[int], face_id: int) -> None:
    """Bridge two open polylines; P edges are emitted reversed, Q forward.

    Rails P[0]-Q[0] and P[-1]-Q[-1] become single mesh edges.
    """
    ip = iq = 0
    np_, nq = len(P) - 1, len(Q) - 1
    while ip < np_ or iq < nq:
        take_p = iq >= nq or (ip < np_ and (ip + 1) * nq <= (iq + 1) * np_)
        if take_p:
            builder.emit(P[ip + 1], P[ip], Q[iq], face_id)
            ip += 1
        else:
            builder.emit(Q[iq], Q[iq + 1], P[ip], face_id)
            iq += 1


def _lateral(builder: _MeshBuilder, strut, loop_a: int, loop_b: int,
             face_id: int) -> None:
    """Zipper the two end loops of a strut cylinder by angle."""
    model = builder.model
    g_a = builder.loop_cycle(loop_a)
    g_b = builder.loop_cycle(loop_b)[::-1]    # align rotation sense about the axis

    pa = np.array([builder.points[i] for i in g_a])
    pb = np.array([builder.points[i] for i in g_b])
    axis = unit(pb.mean(axis=0) - pa.mean(axis=0))
    x_axis, y_axis = plane_basis(axis)

    def angles(pts, center):
        rel = pts - center
        return np.arctan2(rel @ y_axis, rel @ x_axis) % (2.0 * math.pi)

    def ascending(th, base):
        gaps = np.diff(np.concatenate([[base], th])) % (2.0 * math.pi)
        gaps[0] = (th[0] - base) % (2.0 * math.pi)
        return base + np.cumsum(gaps)

    th_a = angles(pa, pa.mean(axis=0))
    th_b = angles(pb, pb.mean(axis=0))
    # start both cycles at nearly the same angle: A at its smallest, B at its
    # first point forward of A's start, so the zigzag interleaves instead of
    # degenerating into two fans sharing one bridge edge
    ra = int(np.argmin(th_a))
    base = float(th_a[ra])
    rb = int(np.argmin((th_b - base) % (2.0 * math.pi)))
    g_a = g_a[ra:] + g_a[:ra]
    g_b = g_b[rb:] + g_b[:rb]
    th_a = np.concatenate([[base], ascending(np.concatenate(
        [th_a[ra + 1:], th_a[:ra]]), base)]) if len(g_a) > 1 else np.array([base])
    th_b = ascending(np.concatenate([th_b[rb:], th_b[:rb]]), base)

    na, nb = len(g_a), len(g_b)
    ka = kb = 0
    next_a = lambda: th_a[(ka + 1) % na] + 2.0 * math.pi * ((ka + 1) // na)
    next_b = lambda: th_b[(kb + 1) % nb] + 2.0 * math.pi * ((kb + 1) // nb)
    while ka < na or kb < nb:
        if kb >= nb or (ka < na and next_a() <= next_b()):
            builder.emit(g_a[ka % na], g_a[(ka + 1) % na], g_b[kb % nb], face_id)
            ka += 1
        else:
            builder.emit(g_b[(kb + 1) % nb], g_b[kb % nb], g_a[ka % na], face_id)
            kb += 1


def tessellate(model: BRepModel, cfg: MeshConfig, validated: bool = False) -> TriMesh:
    """Triangulate the model under the chord-error bound.

    Arcs are subdivided once and shared by index between faces; cylinder
    side walls bridge their two (possibly unequal) loops with a zigzag
    strip; quads are ruled strips between their two arcs; nodal triangles
    are emitted directly.
    """
    if not validated:
        probe = ValidityReport()
        _structural_checks(model, probe)
        if probe.structure_errors or probe.face_count_violations:
            raise MeshError(
                "refusing to tessellate an invalid model: "
                f"{probe.structure_errors or probe.face_count_violations}; "
                "run validate() for the full report")

    counts = _arc_segment_counts(model, cfg.chord_error)
    b = _MeshBuilder(model, counts)

    for face in model.faces:
        if face.kind == "triangle":
            b.emit(*face.vertices, face.id)
        elif face.kind == "quad":
            arc_i, arc_j = face.arcs
            P = b.chains[arc_i]                    # v1 -> v2
            Q = b.chains[arc_j][::-1]              # stored v4 -> v3, need v3 -> v4
            _strip(b, P, Q, face.id)
        elif face.kind == "cylinder":
            strut = model.struts[face.strut_id] if face.strut_id is not None else None
            _lateral(b, strut, face.loops[0], face.loops[1], face.id)
        elif face.kind == "disk":
            cycle = b.loop_cycle(face.loops[0])
            arc = model.arcs[model.loops[face.loops[0]].arcs[0][0]]
            b.points.append(arc.center.copy())
            center = len(b.points) - 1
            for k in range(len(cycle)):
                b.emit(center, cycle[k], cycle[(k + 1) % len(cycle)], face.id)
        else:
            raise MeshError(f"unknown face kind {face.kind!r}")

    return TriMesh(np.array(b.points).reshape(-1, 3),
                   np.array(b.tris, int).reshape(-1, 3),
                   np.array(b.tri_faces, int))


# ----------------------------------------------------------------------
# mesh-level validity checks

def manifold_stats(mesh: TriMesh) -> dict:
    """Edge pairing, orientation coherence, fan closure and Euler number."""
    tris = mesh.triangles
    directed = np.concatenate([tris[:, [0, 1]], tris[:, [1, 2]], tris[:, [2, 0]]])
    und = np.sort(directed, axis=1)
    _, und_inv, und_counts = np.unique(und, axis=0, return_inverse=True,
                                       return_counts=True)
    boundary = int(np.sum(und_counts == 1))
    non_manifold = int(np.sum(und_counts > 2))
    _, dir_counts = np.unique(directed, axis=0, return_counts=True)
    misoriented = int(np.sum(dir_counts > 1))

    # fan closure: around each vertex the triangle wedges must chain into a
    # single cycle
    open_fans = 0
    succ: dict[int, dict[int, int]] = {}
    for a, bb, c in tris:
        succ.setdefault(a, {})[bb] = c
        succ.setdefault(bb, {})[c] = a
        succ.setdefault(c, {})[a] = bb
    for v, nxt in succ.items():
        start = next(iter(nxt))
        seen = 1
        cur = nxt.get(start)
        while cur is not None and cur != start and seen <= len(nxt):
            cur = nxt.get(cur)
            seen += 1
        if cur != start or seen != len(nxt):
            open_fans += 1

    used = np.unique(tris)
    euler = int(len(used) - len(und_counts) + len(tris))
    return {
        "boundary_edges": boundary,
        "non_manifold_edges": non_manifold,
        "misoriented_edges": misoriented,
        "open_fans": open_fans,
        "euler": euler,
    }


def mesh_volume(mesh: TriMesh) -> float:
    """Signed volume; positive for outward-oriented closed meshes."""
    a = mesh.vertices[mesh.triangles[:, 0]]
    b = mesh.vertices[mesh.triangles[:, 1]]
    c = mesh.vertices[mesh.triangles[:, 2]]
    return float(np.einsum("ij,ij->i", a, np.cross(b, c)).sum() / 6.0)


def self_intersections(mesh: TriMesh, eps_rel: float = 1e-9,
                       max_report: int = 100) -> list[tuple[int, int]]:
    """Non-adjacent triangle pairs with genuine interior intersection.

    Pairs sharing a mesh vertex id are legal contact and skipped.
    """
    from .intersect import mesh_intersections
    return mesh_intersections(mesh.vertices, mesh.triangles,
                              eps_rel=eps_rel, max_report=max_report)


# ----------------------------------------------------------------------
# mesh file formats

def write_obj(mesh: TriMesh, path) -> None:
    """ASCII OBJ with 1-based indices and full-precision coordinates."""
    with open(path, "w", encoding="utf-8") as fh:
        for v in mesh.vertices:
            fh.write(f"v {v[0]!r} {v[1]!r} {v[2]!r}\n")
        for t in mesh.triangles:
            fh.write(f"f {t[0] + 1} {t[1] + 1} {t[2] + 1}\n")


def read_obj(path) -> TriMesh:
    verts, tris = [], []
    with open(path, "r", encoding="utf-8") as fh:
        for line in fh:
            parts = line.split()
            if not parts:
                continue
            if parts[0] == "v":
                verts.append([float(x) for x in parts[1:4]])
            elif parts[0] == "f":
                idx = [int(p.split("/")[0]) - 1 for p in parts[1:]]
                for k in range(1, len(idx) - 1):
                    tris.append((idx[0], idx[k], idx[k + 1]))
    return TriMesh(np.array(verts, float).reshape(-1, 3),
                   np.array(tris, int).reshape(-1, 3))


def write_stl(mesh: TriMesh, path) -> None:
    """Binary STL: 80-byte header, little-endian float32 triangles, normals
    recomputed from the winding."""
    a = mesh.vertices[mesh.triangles[:, 0]]
    b = mesh.vertices[mesh.triangles[:, 1]]
    c = mesh.vertices[mesh.triangles[:, 2]]
    n = np.cross(b - a, c - a)
    norms = np.linalg.norm(n, axis=1, keepdims=True)
    n = np.where(norms > 1e-300, n / np.maximum(norms, 1e-300), 0.0)
    with open(path, "wb") as fh:
        fh.write(b"latticebrep binary stl".ljust(80, b"\0"))
        fh.write(struct.pack("<I", len(mesh.triangles)))
        rec = np.empty((len(mesh.triangles), 12), dtype="<f4")
        rec[:, 0:3] = n
        rec[:, 3:6] = a
        rec[:, 6:9] = b
        rec[:, 9:12] = c
        body = np.zeros((len(mesh.triangles), 50), dtype=np.uint8)
        body[:, :48] = rec.view(np.uint8).reshape(-1, 48)
        fh.write(body.tobytes())


def read_stl(path) -> TriMesh:
    with open(path, "rb") as fh:
        fh.read(80)
        (count,) = struct.unpack("<I", fh.read(4))
        body = np.frombuffer(fh.read(count * 50), dtype=np.uint8).reshape(count, 50)
    rec = body[:, :48].copy().view("<f4").reshape(count, 12)
    pts = rec[:, 3:12].reshape(count, 3, 3).astype(float)
    verts: list = []
    index: dict[tuple, int] = {}
    tris = np.empty((count, 3), int)
    for f in range(count):
        for k in range(3):
            key = tuple(pts[f, k])
            if key not in index:
                index[key] = len(verts)
                verts.append(pts[f, k])
            tris[f, k] = index[key]
    return TriMesh(np.array(verts, float).reshape(-1, 3), tris)
