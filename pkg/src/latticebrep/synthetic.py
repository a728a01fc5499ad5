"""Small lattice builders used by the tests, demos and benchmarks.

These construct input graphs only (no conformal design): single struts,
star nodes with prescribed directions, and body-centered cubic blocks.
"""

from __future__ import annotations

import numpy as np

from .graph import LatticeGraph, build_graph


def single_strut(length: float = 3.0, radius: float = 0.5) -> LatticeGraph:
    return build_graph(np.array([[0.0, 0.0, 0.0], [length, 0.0, 0.0]]),
                       [(0, 1, radius)])


def star_node(directions: np.ndarray, radii, strut_length: float = 3.0) -> LatticeGraph:
    """One center node with struts along the given unit directions."""
    directions = np.asarray(directions, float)
    n = len(directions)
    radii = np.broadcast_to(np.asarray(radii, float), (n,))
    positions = np.vstack([[0.0, 0.0, 0.0], directions * strut_length])
    edges = [(0, i + 1, float(radii[i])) for i in range(n)]
    return build_graph(positions, edges)


def octahedral_node(radius: float = 0.2, strut_length: float = 1.0) -> LatticeGraph:
    dirs = np.array([[1, 0, 0], [-1, 0, 0], [0, 1, 0],
                     [0, -1, 0], [0, 0, 1], [0, 0, -1]], float)
    return star_node(dirs, radius, strut_length)


def tetrahedral_node(radius: float = 0.2, strut_length: float = 1.0) -> LatticeGraph:
    dirs = np.array([[1, 1, 1], [1, -1, -1], [-1, 1, -1], [-1, -1, 1]], float)
    dirs /= np.linalg.norm(dirs, axis=1, keepdims=True)
    return star_node(dirs, radius, strut_length)


def bcc_center_node(radius: float = 0.15, strut_length: float = 1.0) -> LatticeGraph:
    """Degree-8 node with struts toward the cube corners."""
    dirs = np.array([[sx, sy, sz] for sx in (-1, 1) for sy in (-1, 1)
                     for sz in (-1, 1)], float)
    dirs /= np.sqrt(3.0)
    return star_node(dirs, radius, strut_length)


def bcc_lattice(nx: int, ny: int, nz: int, cell: float = 1.0,
                radius: float = 0.08) -> LatticeGraph:
    """Body-centered cubic block: corner grid plus cell centers, one strut
    from each center to its eight corners."""
    corner_index = {}
    positions = []
    for ix in range(nx + 1):
        for iy in range(ny + 1):
            for iz in range(nz + 1):
                corner_index[(ix, iy, iz)] = len(positions)
                positions.append([ix * cell, iy * cell, iz * cell])
    edges = []
    for ix in range(nx):
        for iy in range(ny):
            for iz in range(nz):
                center = len(positions)
                positions.append([(ix + 0.5) * cell, (iy + 0.5) * cell,
                                  (iz + 0.5) * cell])
                for dx in (0, 1):
                    for dy in (0, 1):
                        for dz in (0, 1):
                            edges.append((center,
                                          corner_index[(ix + dx, iy + dy, iz + dz)],
                                          radius))
    return build_graph(np.array(positions, float), edges)


def random_star_directions(degree: int, seed: int, min_angle_deg: float = 15.0,
                           max_tries: int = 20000) -> np.ndarray:
    """Random unit directions with a minimum pairwise angle (rejection)."""
    rng = np.random.default_rng(seed)
    min_cos = np.cos(np.radians(min_angle_deg))
    dirs: list[np.ndarray] = []
    for _ in range(max_tries):
        v = rng.normal(size=3)
        v /= np.linalg.norm(v)
        if all(abs(np.dot(v, d)) <= min_cos for d in dirs):
            dirs.append(v)
            if len(dirs) == degree:
                return np.array(dirs)
    raise RuntimeError(f"could not place {degree} directions at >= {min_angle_deg} deg")
