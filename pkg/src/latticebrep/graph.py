"""Weighted lattice graph: parsing, validation, adjacency-list storage.

The input format is line oriented UTF-8 text::

    # comment
    v <id:int> <x> <y> <z>
    e <id1:int> <id2:int> <radius>

Node and strut declarations may appear in any order; node ids may be sparse
and are re-mapped to dense indices (the original ids are kept in
``node_id_map`` / ``strut_ids`` for reporting). Radii are attached to edges.
"""

from __future__ import annotations

import io
from dataclasses import dataclass, field

import numpy as np

from .errors import GraphError, ParseError
from .geometry import unit


@dataclass(frozen=True)
class NodeRecord:
    id: int
    position: np.ndarray  # shape (3,)


@dataclass(frozen=True)
class StrutRecord:
    id: int
    endpoints: tuple[int, int]
    radius: float


@dataclass(frozen=True)
class AdjacencyEntry:
    strut_id: int
    neighbor_id: int
    radius: float


@dataclass
class LatticeGraph:
    """Immutable-after-construction lattice graph with adjacency lists.

    ``adjacency[v]`` lists ``(strut_id, neighbor_id, radius)`` for every strut
    incident to node ``v``. Safe for concurrent read access.
    """

    nodes: list[NodeRecord]
    struts: list[StrutRecord]
    adjacency: list[list[AdjacencyEntry]]
    node_id_map: dict[int, int] = field(default_factory=dict)  # original id -> dense index

    @property
    def node_count(self) -> int:
        return len(self.nodes)

    @property
    def strut_count(self) -> int:
        return len(self.struts)

    def degree(self, node_id: int) -> int:
        return len(self.adjacency[node_id])

    def position(self, node_id: int) -> np.ndarray:
        return self.nodes[node_id].position

    def strut_length(self, strut_id: int) -> float:
        a, b = self.struts[strut_id].endpoints
        return float(np.linalg.norm(self.nodes[b].position - self.nodes[a].position))

    def other_end(self, strut_id: int, node_id: int) -> int:
        a, b = self.struts[strut_id].endpoints
        if node_id == a:
            return b
        if node_id == b:
            return a
        raise GraphError(f"strut {strut_id} is not incident to node {node_id}")


def build_graph(positions: np.ndarray, edges: list[tuple[int, int, float]],
                node_ids: list[int] | None = None) -> LatticeGraph:
    """Assemble and validate a graph from dense positions and edge triples."""
    positions = np.asarray(positions, float)
    if positions.ndim != 2 or positions.shape[1] != 3:
        raise GraphError("positions must be an (n, 3) array")
    if not np.all(np.isfinite(positions)):
        raise GraphError("node positions must be finite")

    n = len(positions)
    nodes = [NodeRecord(i, positions[i].copy()) for i in range(n)]
    struts: list[StrutRecord] = []
    adjacency: list[list[AdjacencyEntry]] = [[] for _ in range(n)]
    seen_pairs: set[tuple[int, int]] = set()

    for k, (a, b, r) in enumerate(edges):
        if not (0 <= a < n) or not (0 <= b < n):
            raise GraphError(f"strut {k} references undeclared node ({a}, {b})")
        if a == b:
            raise GraphError(f"strut {k} connects node {a} to itself")
        if r <= 0.0:
            raise GraphError(f"strut {k} has non-positive radius {r}")
        key = (min(a, b), max(a, b))
        if key in seen_pairs:
            raise GraphError(f"duplicate strut between nodes {a} and {b}")
        seen_pairs.add(key)
        if np.linalg.norm(positions[b] - positions[a]) <= 0.0:
            raise GraphError(f"strut {k} between nodes {a} and {b} has zero length")
        struts.append(StrutRecord(k, (a, b), float(r)))
        adjacency[a].append(AdjacencyEntry(k, b, float(r)))
        adjacency[b].append(AdjacencyEntry(k, a, float(r)))

    id_map = {orig: i for i, orig in enumerate(node_ids)} if node_ids is not None \
        else {i: i for i in range(n)}
    return LatticeGraph(nodes, struts, adjacency, id_map)


def parse_lattice(source: str | bytes | io.IOBase) -> LatticeGraph:
    """Parse lattice graph text into a validated :class:`LatticeGraph`.

    Accepts a string, UTF-8 bytes, or a readable file object. Raises
    :class:`ParseError` with the line number for syntax problems and
    :class:`GraphError` for semantic ones (dangling references, duplicate
    edges, non-positive radii, zero-length struts).
    """
    if isinstance(source, bytes):
        text = source.decode("utf-8")
    elif isinstance(source, str):
        text = source
    else:
        data = source.read()
        text = data.decode("utf-8") if isinstance(data, bytes) else data

    raw_nodes: dict[int, np.ndarray] = {}
    raw_edges: list[tuple[int, int, float]] = []
    node_order: list[int] = []

    for lineno, line in enumerate(text.splitlines(), start=1):
        stripped = line.strip()
        if not stripped or stripped.startswith("#"):
            continue
        parts = stripped.split()
        tag = parts[0]
        if tag == "v":
            if len(parts) != 5:
                raise ParseError(f"expected 'v <id> <x> <y> <z>', got {stripped!r}", lineno)
            try:
                nid = int(parts[1])
                xyz = np.array([float(parts[2]), float(parts[3]), float(parts[4])])
            except ValueError as exc:
                raise ParseError(str(exc), lineno) from None
            if not np.all(np.isfinite(xyz)):
                raise ParseError(f"non-finite coordinate in {stripped!r}", lineno)
            if nid in raw_nodes:
                raise ParseError(f"node id {nid} declared twice", lineno)
            raw_nodes[nid] = xyz
            node_order.append(nid)
        elif tag == "e":
            if len(parts) != 4:
                raise ParseError(f"expected 'e <id1> <id2> <radius>', got {stripped!r}", lineno)
            try:
                a, b, r = int(parts[1]), int(parts[2]), float(parts[3])
            except ValueError as exc:
                raise ParseError(str(exc), lineno) from None
            raw_edges.append((a, b, r))
        else:
            raise ParseError(f"unknown record type {tag!r}", lineno)

    index = {orig: i for i, orig in enumerate(node_order)}
    for a, b, _ in raw_edges:
        if a not in index or b not in index:
            missing = a if a not in index else b
            raise GraphError(f"strut references undeclared node id {missing}")

    positions = np.array([raw_nodes[i] for i in node_order], float).reshape(-1, 3)
    edges = [(index[a], index[b], r) for a, b, r in raw_edges]
    return build_graph(positions, edges, node_ids=node_order)


def serialize_lattice(g: LatticeGraph) -> str:
    """Emit the graph in the text format; round-trips bit-exact positions."""
    out = []
    inverse = {dense: orig for orig, dense in g.node_id_map.items()}
    for node in g.nodes:
        x, y, z = (repr(float(c)) for c in node.position)
        out.append(f"v {inverse.get(node.id, node.id)} {x} {y} {z}")
    for strut in g.struts:
        a, b = strut.endpoints
        out.append(f"e {inverse.get(a, a)} {inverse.get(b, b)} {repr(strut.radius)}")
    return "\n".join(out) + "\n"


def strut_direction(g: LatticeGraph, strut_id: int, from_node_id: int) -> np.ndarray:
    """Unit vector from ``from_node_id`` toward the strut's opposite endpoint."""
    other = g.other_end(strut_id, from_node_id)
    return unit(g.nodes[other].position - g.nodes[from_node_id].position)
