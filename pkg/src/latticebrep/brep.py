"""Boundary representation: stitching cut struts and nodal patches.

Element model: vertices (nodal triangle corners), straight edges (triangle
sides doubling as quad rails), arcs (end-circle segments between consecutive
vertices), loops (cycles of arcs bounding cylindrical faces and caps) and
four face kinds: nodal triangles, ruled quads, strut cylinders, and disk
caps for degree-1 ends.

Orientation conventions (verified by the mesh-level validity checks):

* strut-end loops run counterclockwise about the direction pointing from the
  node into the strut, so walking them upright leaves the quads on the right;
* arcs are stored with increasing parameter in that same sense; a quad
  traverses its two arcs reversed, the cylinder loops traverse them forward;
* nodal triangles keep the outward orientation of the direction hull.

Every vertex is created once and shared by id; watertightness never relies
on coordinate snapping.
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass, field

import numpy as np

from .errors import BRepError
from .geometry import plane_basis, unit
from .graph import LatticeGraph, build_graph, strut_direction
from .nodeshape import NodalPatchSet

FORMAT_NAME = "latticebrep-brep"
FORMAT_VERSION = 1


@dataclass
class ArcRec:
    id: int
    center: np.ndarray
    x_axis: np.ndarray
    y_axis: np.ndarray
    radius: float
    a1: float
    a2: float
    v_start: int | None
    v_end: int | None
    strut_id: int
    node_id: int

    @property
    def axis(self) -> np.ndarray:
        return np.cross(self.x_axis, self.y_axis)

    def point_at(self, s: float) -> np.ndarray:
        return self.center + self.radius * (math.cos(s) * self.x_axis
                                            + math.sin(s) * self.y_axis)


@dataclass
class EdgeRec:
    id: int
    v1: int
    v2: int


@dataclass
class LoopRec:
    """Oriented cycle of (arc id, reversed) pairs."""

    id: int
    arcs: list[tuple[int, bool]]


@dataclass
class FaceRec:
    id: int
    kind: str                      # 'triangle' | 'quad' | 'cylinder' | 'disk'
    node_id: int | None = None
    strut_id: int | None = None
    vertices: tuple[int, ...] = ()     # triangle: (a,b,c); quad: (v1,v2,v3,v4)
    edges: tuple[int, ...] = ()        # triangle: 3; quad: (e13, e42)
    arcs: tuple[int, ...] = ()         # quad: (arc_i, arc_j)
    loops: tuple[int, ...] = ()        # cylinder: 2; disk: 1


@dataclass
class NodeInfo:
    id: int
    kind: str                      # 'patch' | 'loft' | 'cap' | 'isolated'
    degree: int
    position: np.ndarray
    reference_radius: float
    strut_ids: list[int]
    totals: list[float]
    phase1_iterations: int | None = None
    phase2_iterations: int | None = None
    warnings: list[str] = field(default_factory=list)


@dataclass
class StrutInfo:
    id: int
    endpoints: tuple[int, int]
    radius: float
    length: float
    cuts: tuple[float, float]      # at endpoints[0], endpoints[1]


@dataclass
class BRepModel:
    vertices: list[np.ndarray]
    edges: list[EdgeRec]
    arcs: list[ArcRec]
    loops: list[LoopRec]
    faces: list[FaceRec]
    nodes: list[NodeInfo]
    struts: list[StrutInfo]
    provenance: dict = field(default_factory=dict)

    def faces_of_kind(self, kind: str) -> list[FaceRec]:
        return [f for f in self.faces if f.kind == kind]

    def node_faces(self, node_id: int) -> list[FaceRec]:
        return [f for f in self.faces if f.node_id == node_id
                and f.kind in ("triangle", "quad")]

    def graph(self) -> LatticeGraph:
        """Reconstruct the source lattice graph from stored metadata."""
        positions = np.array([n.position for n in self.nodes], float).reshape(-1, 3)
        ids = [n.id for n in self.nodes]
        index = {nid: k for k, nid in enumerate(ids)}
        edges = [(index[s.endpoints[0]], index[s.endpoints[1]], s.radius)
                 for s in self.struts]
        return build_graph(positions, edges, node_ids=ids)


@dataclass
class ValidityReport:
    watertight: bool = False
    non_manifold_edges: int = 0
    boundary_edges: int = 0
    misoriented_edges: int = 0
    open_fans: int = 0
    self_intersections: int = 0
    flipped_faces: int = 0
    euler_characteristic: int | None = None
    expected_euler: int | None = None
    genus: int | None = None
    face_count_violations: list[int] = field(default_factory=list)
    vertex_rule_violations: int = 0
    structure_errors: list[str] = field(default_factory=list)
    corner_case_struts: list[int] = field(default_factory=list)
    node_checks: dict = field(default_factory=dict)

    @property
    def valid(self) -> bool:
        return (self.watertight
                and self.non_manifold_edges == 0
                and self.boundary_edges == 0
                and self.misoriented_edges == 0
                and self.open_fans == 0
                and self.self_intersections == 0
                and self.flipped_faces == 0
                and not self.face_count_violations
                and self.vertex_rule_violations == 0
                and not self.structure_errors
                and not self.corner_case_struts
                and self.euler_characteristic == self.expected_euler)


class _Builder:
    def __init__(self):
        self.vertices: list[np.ndarray] = []
        self.edges: list[EdgeRec] = []
        self.arcs: list[ArcRec] = []
        self.loops: list[LoopRec] = []
        self.faces: list[FaceRec] = []
        self._edge_index: dict[frozenset, int] = {}
        self.end_loops: dict[tuple[int, int], int] = {}   # (strut, node) -> loop

    def add_vertex(self, p) -> int:
        self.vertices.append(np.asarray(p, float))
        return len(self.vertices) - 1

    def add_edge(self, v1: int, v2: int) -> int:
        key = frozenset((v1, v2))
        if key in self._edge_index:
            return self._edge_index[key]
        rec = EdgeRec(len(self.edges), v1, v2)
        self.edges.append(rec)
        self._edge_index[key] = rec.id
        return rec.id

    def add_arc(self, **kw) -> int:
        rec = ArcRec(id=len(self.arcs), **kw)
        self.arcs.append(rec)
        return rec.id

    def add_loop(self, arcs) -> int:
        rec = LoopRec(len(self.loops), list(arcs))
        self.loops.append(rec)
        return rec.id

    def add_face(self, **kw) -> int:
        rec = FaceRec(id=len(self.faces), **kw)
        self.faces.append(rec)
        return rec.id


def _stitch_patch_node(b: _Builder, g: LatticeGraph, patches: NodalPatchSet) -> None:
    prob = patches.problem
    topo = prob.topo
    node_id = prob.node_id
    n = topo.degree

    vid = [b.add_vertex(patches.vertices[k]) for k in range(prob.dim)]

    # arcs between consecutive vertex slots on every strut circle
    arc_ids: dict[tuple[int, int], int] = {}
    for i in range(n):
        k = topo.hull_degree(i)
        off = prob.offsets[i]
        x_axis, y_axis = prob.frames[i]
        for m in range(k):
            a1 = float(patches.angles[off + m])
            a2 = float(patches.angles[off + m + 1]) if m + 1 < k \
                else float(patches.angles[off]) + 2.0 * math.pi
            arc_ids[(i, m)] = b.add_arc(
                center=prob.centers[i], x_axis=x_axis, y_axis=y_axis,
                radius=float(prob.radii[i]), a1=a1, a2=a2,
                v_start=vid[off + m], v_end=vid[off + (m + 1) % k],
                strut_id=prob.strut_ids[i], node_id=node_id)
        b.end_loops[(prob.strut_ids[i], node_id)] = b.add_loop(
            [(arc_ids[(i, m)], False) for m in range(k)])

    # nodal triangle faces (outward winding from the hull)
    tri_face_edges = []
    for t in range(len(prob.tri_vidx)):
        va, vb, vc = (vid[v] for v in prob.tri_vidx[t])
        e_ids = (b.add_edge(va, vb), b.add_edge(vb, vc), b.add_edge(vc, va))
        tri_face_edges.append(e_ids)
        b.add_face(kind="triangle", node_id=node_id,
                   vertices=(va, vb, vc), edges=e_ids)

    # quad faces across hull edges
    for q, (i, j) in enumerate(topo.edges):
        t_l, t_r = topo.edge_flanks(i, j)
        v1 = vid[prob.offsets[i] + topo.triangle_slot(t_l, i)]
        v2 = vid[prob.offsets[i] + topo.triangle_slot(t_r, i)]
        v3 = vid[prob.offsets[j] + topo.triangle_slot(t_l, j)]
        v4 = vid[prob.offsets[j] + topo.triangle_slot(t_r, j)]
        arc_i = arc_ids[(i, topo.triangle_slot(t_l, i))]
        arc_j = arc_ids[(j, topo.triangle_slot(t_r, j))]
        if b.arcs[arc_i].v_start != v1 or b.arcs[arc_i].v_end != v2 \
                or b.arcs[arc_j].v_start != v4 or b.arcs[arc_j].v_end != v3:
            raise BRepError(f"node {node_id}: quad {q} arc endpoints inconsistent")
        e13 = b.add_edge(v1, v3)
        e42 = b.add_edge(v4, v2)
        b.add_face(kind="quad", node_id=node_id,
                   vertices=(v1, v2, v3, v4), edges=(e13, e42),
                   arcs=(arc_i, arc_j))


def _stitch_loft_node(b: _Builder, g: LatticeGraph, node_id: int,
                      strut_ids: list[int], totals: list[float]) -> None:
    pos = g.position(node_id)
    dirs = [strut_direction(g, s, node_id) for s in strut_ids]
    radii = [g.struts[s].radius for s in strut_ids]
    binormal = np.cross(dirs[0], dirs[1])
    if np.linalg.norm(binormal) < 1e-9:
        binormal, _ = plane_basis(dirs[0])
    else:
        binormal = unit(binormal)

    verts = []     # per strut: (v_plus, v_minus)
    arcs = []      # per strut: (arc_0_pi, arc_pi_2pi)
    for k in range(2):
        x_axis = binormal
        y_axis = np.cross(dirs[k], x_axis)
        center = pos + dirs[k] * totals[k]
        v_plus = b.add_vertex(center + radii[k] * x_axis)
        v_minus = b.add_vertex(center - radii[k] * x_axis)
        a1 = b.add_arc(center=center, x_axis=x_axis, y_axis=y_axis,
                       radius=radii[k], a1=0.0, a2=math.pi,
                       v_start=v_plus, v_end=v_minus,
                       strut_id=strut_ids[k], node_id=node_id)
        a2 = b.add_arc(center=center, x_axis=x_axis, y_axis=y_axis,
                       radius=radii[k], a1=math.pi, a2=2.0 * math.pi,
                       v_start=v_minus, v_end=v_plus,
                       strut_id=strut_ids[k], node_id=node_id)
        b.end_loops[(strut_ids[k], node_id)] = b.add_loop([(a1, False), (a2, False)])
        verts.append((v_plus, v_minus))
        arcs.append((a1, a2))

    (ip, im), (jp, jm) = verts
    e_plus = b.add_edge(ip, jp)
    e_minus = b.add_edge(im, jm)
    # with both x axes on the shared binormal, strut 0's inner half-circle is
    # (pi, 2pi) and strut 1's is (0, pi); pairing them keeps the loft untwisted
    b.add_face(kind="quad", node_id=node_id,
               vertices=(im, ip, jm, jp), edges=(e_minus, e_plus),
               arcs=(arcs[0][1], arcs[1][0]))
    b.add_face(kind="quad", node_id=node_id,
               vertices=(ip, im, jp, jm), edges=(e_plus, e_minus),
               arcs=(arcs[0][0], arcs[1][1]))


def _stitch_cap_node(b: _Builder, g: LatticeGraph, node_id: int, strut_id: int) -> None:
    pos = g.position(node_id)
    direction = strut_direction(g, strut_id, node_id)
    radius = g.struts[strut_id].radius
    x_axis, y_axis = plane_basis(direction)
    arc = b.add_arc(center=pos, x_axis=x_axis, y_axis=y_axis, radius=radius,
                    a1=0.0, a2=2.0 * math.pi, v_start=None, v_end=None,
                    strut_id=strut_id, node_id=node_id)
    b.end_loops[(strut_id, node_id)] = b.add_loop([(arc, False)])
    disk_loop = b.add_loop([(arc, True)])
    b.add_face(kind="disk", node_id=node_id, strut_id=strut_id, loops=(disk_loop,))


def stitch(g: LatticeGraph, totals: dict[tuple[int, int], float],
           patch_sets: dict[int, NodalPatchSet],
           node_stats: dict[int, dict] | None = None,
           provenance: dict | None = None) -> BRepModel:
    """Assemble the boundary representation of the whole lattice.

    ``totals`` maps (node id, strut id) to the total cut length at that end;
    ``patch_sets`` holds the optimized patch set of every degree >= 3 node.
    Degree-2 nodes get a two-quad loft, degree-1 ends a disk cap.
    """
    b = _Builder()
    node_stats = node_stats or {}
    nodes_meta = []
    for node in g.nodes:
        nid = node.id
        degree = g.degree(nid)
        incident = [e.strut_id for e in g.adjacency[nid]]
        tot = [totals.get((nid, s), 0.0) for s in incident]
        radii = [g.struts[s].radius for s in incident]
        stats = node_stats.get(nid, {})
        if degree == 0:
            kind = "isolated"
        elif degree == 1:
            kind = "cap"
            _stitch_cap_node(b, g, nid, incident[0])
        elif degree == 2:
            kind = "loft"
            _stitch_loft_node(b, g, nid, incident, tot)
        else:
            kind = "patch"
            if nid not in patch_sets:
                raise BRepError(f"node {nid} (degree {degree}) has no patch set")
            _stitch_patch_node(b, g, patch_sets[nid])
        nodes_meta.append(NodeInfo(
            id=nid, kind=kind, degree=degree, position=node.position.copy(),
            reference_radius=max(radii) if radii else 0.0,
            strut_ids=incident, totals=tot,
            phase1_iterations=stats.get("phase1"),
            phase2_iterations=stats.get("phase2"),
            warnings=stats.get("warnings", [])))

    struts_meta = []
    for strut in g.struts:
        a, bn = strut.endpoints
        loop_a = b.end_loops.get((strut.id, a))
        loop_b = b.end_loops.get((strut.id, bn))
        if loop_a is None or loop_b is None:
            raise BRepError(f"strut {strut.id}: missing end loop")
        b.add_face(kind="cylinder", strut_id=strut.id, loops=(loop_a, loop_b))
        struts_meta.append(StrutInfo(
            id=strut.id, endpoints=strut.endpoints, radius=strut.radius,
            length=g.strut_length(strut.id),
            cuts=(totals.get((a, strut.id), 0.0), totals.get((bn, strut.id), 0.0))))

    return BRepModel(b.vertices, b.edges, b.arcs, b.loops, b.faces,
                     nodes_meta, struts_meta, provenance or {})


# ----------------------------------------------------------------------
# persistence

def _vec(v) -> list[float]:
    return [float(x) for x in v]


def to_document(model: BRepModel) -> dict:
    return {
        "format": FORMAT_NAME,
        "version": FORMAT_VERSION,
        "vertices": [_vec(v) for v in model.vertices],
        "edges": [[e.v1, e.v2] for e in model.edges],
        "arcs": [{
            "center": _vec(a.center), "x_axis": _vec(a.x_axis),
            "y_axis": _vec(a.y_axis), "radius": a.radius,
            "a1": a.a1, "a2": a.a2,
            "v_start": a.v_start, "v_end": a.v_end,
            "strut": a.strut_id, "node": a.node_id,
        } for a in model.arcs],
        "loops": [[[aid, int(rev)] for aid, rev in lp.arcs] for lp in model.loops],
        "faces": [{
            "kind": f.kind, "node": f.node_id, "strut": f.strut_id,
            "vertices": list(f.vertices), "edges": list(f.edges),
            "arcs": list(f.arcs), "loops": list(f.loops),
        } for f in model.faces],
        "nodes": [{
            "id": n.id, "kind": n.kind, "degree": n.degree,
            "position": _vec(n.position), "R": n.reference_radius,
            "struts": n.strut_ids, "totals": [float(t) for t in n.totals],
            "phase1_iterations": n.phase1_iterations,
            "phase2_iterations": n.phase2_iterations,
            "warnings": n.warnings,
        } for n in model.nodes],
        "struts": [{
            "id": s.id, "endpoints": list(s.endpoints), "radius": s.radius,
            "length": s.length, "cuts": [float(c) for c in s.cuts],
        } for s in model.struts],
        "provenance": model.provenance,
    }


def from_document(doc: dict) -> BRepModel:
    if doc.get("format") != FORMAT_NAME:
        raise BRepError(f"not a {FORMAT_NAME} document")
    if doc.get("version") != FORMAT_VERSION:
        raise BRepError(f"unsupported document version {doc.get('version')!r}")
    vertices = [np.array(v, float) for v in doc["vertices"]]
    edges = [EdgeRec(i, v1, v2) for i, (v1, v2) in enumerate(doc["edges"])]
    arcs = [ArcRec(i, np.array(a["center"]), np.array(a["x_axis"]),
                   np.array(a["y_axis"]), a["radius"], a["a1"], a["a2"],
                   a["v_start"], a["v_end"], a["strut"], a["node"])
            for i, a in enumerate(doc["arcs"])]
    loops = [LoopRec(i, [(aid, bool(rev)) for aid, rev in lp])
             for i, lp in enumerate(doc["loops"])]
    faces = [FaceRec(i, f["kind"], f["node"], f["strut"],
                     tuple(f["vertices"]), tuple(f["edges"]),
                     tuple(f["arcs"]), tuple(f["loops"]))
             for i, f in enumerate(doc["faces"])]
    nodes = [NodeInfo(n["id"], n["kind"], n["degree"], np.array(n["position"]),
                      n["R"], list(n["struts"]), list(n["totals"]),
                      n["phase1_iterations"], n["phase2_iterations"],
                      list(n["warnings"]))
             for n in doc["nodes"]]
    struts = [StrutInfo(s["id"], tuple(s["endpoints"]), s["radius"],
                        s["length"], tuple(s["cuts"]))
              for s in doc["struts"]]
    return BRepModel(vertices, edges, arcs, loops, faces, nodes, struts,
                     doc.get("provenance", {}))


def dumps(model: BRepModel) -> str:
    return json.dumps(to_document(model), separators=(",", ":")) + "\n"


def loads(text: str | bytes) -> BRepModel:
    return from_document(json.loads(text))


def save(model: BRepModel, path) -> None:
    with open(path, "w", encoding="utf-8") as fh:
        fh.write(dumps(model))


def load(path) -> BRepModel:
    with open(path, "r", encoding="utf-8") as fh:
        return loads(fh.read())


# ----------------------------------------------------------------------
# validation

def expected_genus(model: BRepModel) -> int:
    """Cycle rank of the built lattice graph: each independent cycle is a
    handle of the thickened solid."""
    parent = {n.id: n.id for n in model.nodes if n.kind != "isolated"}

    def find(x):
        while parent[x] != x:
            parent[x] = parent[parent[x]]
            x = parent[x]
        return x

    for s in model.struts:
        a, b = s.endpoints
        ra, rb = find(a), find(b)
        if ra != rb:
            parent[ra] = rb
    components = len({find(x) for x in parent})
    return len(model.struts) - len(parent) + components


def _structural_checks(model: BRepModel, report: ValidityReport) -> None:
    # per-node face-count law and vertex rule
    for node in model.nodes:
        if node.kind != "patch":
            continue
        n = node.degree
        tris = [f for f in model.faces if f.kind == "triangle" and f.node_id == node.id]
        quads = [f for f in model.faces if f.kind == "quad" and f.node_id == node.id]
        ok = len(tris) == 2 * n - 4 and len(quads) == 3 * n - 6
        report.node_checks[node.id] = {
            "triangles": len(tris), "quads": len(quads),
            "expected": (2 * n - 4, 3 * n - 6), "ok": ok,
        }
        if not ok:
            report.face_count_violations.append(node.id)

    # face incidence per vertex: two quads, one triangle, one cylinder
    vertex_faces: dict[int, list[str]] = {}
    arc_vertex_struts: dict[int, int] = {}
    for a in model.arcs:
        for v in (a.v_start, a.v_end):
            if v is not None:
                arc_vertex_struts[v] = a.strut_id
    cyl_vertices: dict[int, set[int]] = {}
    for f in model.faces:
        if f.kind in ("triangle", "quad"):
            for v in f.vertices:
                vertex_faces.setdefault(v, []).append(f.kind)
        elif f.kind == "cylinder":
            touched = set()
            for loop_id in f.loops:
                for aid, _ in model.loops[loop_id].arcs:
                    arc = model.arcs[aid]
                    for v in (arc.v_start, arc.v_end):
                        if v is not None:
                            touched.add(v)
            cyl_vertices[f.id] = touched
            for v in touched:
                vertex_faces.setdefault(v, []).append("cylinder")
    for v, kinds in vertex_faces.items():
        counts = {k: kinds.count(k) for k in set(kinds)}
        if counts != {"quad": 2, "triangle": 1, "cylinder": 1} \
                and counts != {"quad": 2, "cylinder": 1}:   # loft rail vertices
            report.vertex_rule_violations += 1

    # arcs shared by exactly two faces; loops closed; circles partition 2 pi
    arc_uses: dict[int, int] = {a.id: 0 for a in model.arcs}
    for f in model.faces:
        for aid in f.arcs:
            arc_uses[aid] += 1
        for loop_id in f.loops:
            for aid, _ in model.loops[loop_id].arcs:
                arc_uses[aid] += 1
    bad = [aid for aid, c in arc_uses.items() if c != 2]
    if bad:
        report.structure_errors.append(f"{len(bad)} arcs not shared by exactly 2 faces")

    for lp in model.loops:
        arcs = [model.arcs[aid] for aid, _ in lp.arcs]
        span = sum(a.a2 - a.a1 for a in arcs)
        if arcs and abs(span - 2.0 * math.pi) > 1e-6:
            report.structure_errors.append(f"loop {lp.id} spans {span:.6f} != 2*pi")
        ends = []
        for aid, rev in lp.arcs:
            a = model.arcs[aid]
            ends.append((a.v_end, a.v_start) if rev else (a.v_start, a.v_end))
        for k in range(len(ends)):
            if ends[k][1] != ends[(k + 1) % len(ends)][0]:
                report.structure_errors.append(f"loop {lp.id} is not closed")
                break
        if not (0.0 < arcs[0].a2 - arcs[0].a1 <= 2.0 * math.pi + 1e-12):
            report.structure_errors.append(f"loop {lp.id} has bad arc span")

    for a in model.arcs:
        if not (0.0 < a.a2 - a.a1 <= 2.0 * math.pi + 1e-12):
            report.structure_errors.append(f"arc {a.id} parameter span invalid")


def validate(model: BRepModel, proxy_chord_error: float = 0.02,
             check_intersections: bool = True) -> ValidityReport:
    """Check the §-style solid validity conditions on the model.

    Structural checks run on the B-rep itself; manifoldness, orientation,
    fan closure, the Euler/genus law and face-face intersections are checked
    on a tessellated proxy at ``proxy_chord_error``.
    """
    from . import mesher

    report = ValidityReport()
    _structural_checks(model, report)

    mesh = mesher.tessellate(model, mesher.MeshConfig(proxy_chord_error),
                             validated=True)
    stats = mesher.manifold_stats(mesh)
    report.boundary_edges = stats["boundary_edges"]
    report.non_manifold_edges = stats["non_manifold_edges"]
    report.misoriented_edges = stats["misoriented_edges"]
    report.open_fans = stats["open_fans"]
    report.euler_characteristic = stats["euler"]
    g = expected_genus(model)
    report.genus = g
    report.expected_euler = 2 - 2 * g
    report.watertight = (report.boundary_edges == 0
                         and report.non_manifold_edges == 0)
    if mesher.mesh_volume(mesh) <= 0.0:
        report.flipped_faces += 1
    if check_intersections:
        report.self_intersections = len(mesher.self_intersections(mesh))
    return report
