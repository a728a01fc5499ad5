"""Shape-deviation statistics of constructed nodes vs. spherical references.

Every node is compared against the sphere of radius R = max incident strut
radius centered at the node: points are sampled area-weighted on the node's
triangle and quad faces and the relative deviation ``| |p - v| - R | / R``
is aggregated. Quad faces are ruled surfaces, so sampling integrates cell
areas on a parameter grid instead of a closed form.
"""

from __future__ import annotations

import csv
import io
import math

import numpy as np

from .brep import BRepModel, FaceRec

DEFAULT_SAMPLES = 10_000
_GRID = 16


def _quad_grid(model: BRepModel, face: FaceRec) -> np.ndarray:
    """(G+1, G+1, 3) point grid of the ruled quad surface."""
    arc_i = model.arcs[face.arcs[0]]
    arc_j = model.arcs[face.arcs[1]]
    u = np.linspace(0.0, 1.0, _GRID + 1)
    s_i = arc_i.a1 + u * (arc_i.a2 - arc_i.a1)
    s_j = arc_j.a2 - u * (arc_j.a2 - arc_j.a1)       # stored v4 -> v3; rail order
    p_i = arc_i.center[None, :] + arc_i.radius * (
        np.cos(s_i)[:, None] * arc_i.x_axis + np.sin(s_i)[:, None] * arc_i.y_axis)
    p_j = arc_j.center[None, :] + arc_j.radius * (
        np.cos(s_j)[:, None] * arc_j.x_axis + np.sin(s_j)[:, None] * arc_j.y_axis)
    v = np.linspace(0.0, 1.0, _GRID + 1)
    return (1.0 - v)[None, :, None] * p_i[:, None, :] + v[None, :, None] * p_j[:, None, :]


def _sample_faces(model: BRepModel, faces: list[FaceRec], count: int,
                  rng: np.random.Generator) -> np.ndarray:
    """Area-weighted uniform samples over triangle and quad faces."""
    patches = []      # (a, b, c) corner triples of flat cells
    areas = []
    for face in faces:
        if face.kind == "triangle":
            a, b, c = (model.vertices[v] for v in face.vertices)
            patches.append((a, b, c))
            areas.append(0.5 * np.linalg.norm(np.cross(b - a, c - a)))
        elif face.kind == "quad":
            grid = _quad_grid(model, face)
            for iu in range(_GRID):
                for iv in range(_GRID):
                    p00 = grid[iu, iv]
                    p10 = grid[iu + 1, iv]
                    p01 = grid[iu, iv + 1]
                    p11 = grid[iu + 1, iv + 1]
                    patches.append((p00, p10, p01))
                    areas.append(0.5 * np.linalg.norm(np.cross(p10 - p00, p01 - p00)))
                    patches.append((p11, p01, p10))
                    areas.append(0.5 * np.linalg.norm(np.cross(p01 - p11, p10 - p11)))
    areas = np.asarray(areas)
    total = areas.sum()
    if total <= 0.0 or not patches:
        return np.zeros((0, 3))
    counts = rng.multinomial(count, areas / total)
    out = []
    for (a, b, c), k in zip(patches, counts):
        if k == 0:
            continue
        r1 = rng.random(k)
        r2 = rng.random(k)
        flip = r1 + r2 > 1.0
        r1 = np.where(flip, 1.0 - r1, r1)
        r2 = np.where(flip, 1.0 - r2, r2)
        out.append(a[None, :] + r1[:, None] * (np.asarray(b) - a)
                   + r2[:, None] * (np.asarray(c) - a))
    return np.concatenate(out) if out else np.zeros((0, 3))


def node_deviation(model: BRepModel, node_id: int,
                   samples: int = DEFAULT_SAMPLES,
                   seed: int = 0) -> tuple[float, float, float] | None:
    """(min, max, avg) relative deviation of one node's patch surface.

    Returns None (skip) for nodes without nodal faces (degree <= 2).
    """
    node = next(n for n in model.nodes if n.id == node_id)
    faces = model.node_faces(node_id)
    if not faces or node.kind != "patch":
        return None
    rng = np.random.default_rng((seed, node_id))
    pts = _sample_faces(model, faces, samples, rng)
    if len(pts) == 0:
        return None
    dist = np.linalg.norm(pts - node.position[None, :], axis=1)
    dev = np.abs(dist - node.reference_radius) / node.reference_radius
    return float(dev.min()), float(dev.max()), float(dev.mean())


def _phase_stats(values: list[int]) -> dict:
    if not values:
        return {"min": None, "max": None, "average": None}
    return {"min": int(min(values)), "max": int(max(values)),
            "average": float(np.mean(values))}


def deviation_report(model: BRepModel, samples: int = DEFAULT_SAMPLES,
                     seed: int = 0, corner_cases: list[int] | None = None,
                     extra: dict | None = None) -> dict:
    """Per-node and aggregate deviation stats plus optimizer iteration stats.

    The returned document mirrors a min/max/average table per phase and per
    node, lists skipped nodes, fallback layouts and corner-case struts.
    """
    rows = []
    skipped = []
    warnings = []
    for node in model.nodes:
        stats = node_deviation(model, node.id, samples, seed)
        warnings.extend(node.warnings)
        if stats is None:
            if node.degree > 0:
                skipped.append({"node_id": node.id, "degree": node.degree,
                                "reason": f"{node.kind} node has no nodal faces"})
            continue
        dmin, dmax, davg = stats
        rows.append({
            "node_id": node.id, "degree": node.degree,
            "R": node.reference_radius,
            "min": dmin, "max": dmax, "avg": davg,
            "phase1_iterations": node.phase1_iterations,
            "phase2_iterations": node.phase2_iterations,
        })
    agg = {
        "nodes": len(rows),
        "min": min((r["min"] for r in rows), default=None),
        "max": max((r["max"] for r in rows), default=None),
        "average": float(np.mean([r["avg"] for r in rows])) if rows else None,
    }
    doc = {
        "format": "latticebrep-report",
        "version": 1,
        "samples_per_node": samples,
        "nodes": rows,
        "skipped": skipped,
        "aggregate": agg,
        "iteration_stats": {
            "phase1": _phase_stats([n.phase1_iterations for n in model.nodes
                                    if n.phase1_iterations is not None]),
            "phase2": _phase_stats([n.phase2_iterations for n in model.nodes
                                    if n.phase2_iterations is not None]),
        },
        "corner_case_struts": sorted(corner_cases or []),
        "warnings": warnings,
        "config": model.provenance.get("config", {}),
    }
    if extra:
        doc.update(extra)
    return doc


def report_csv(doc: dict) -> str:
    """Flat per-node CSV: node_id,min,max,avg,R."""
    buf = io.StringIO()
    writer = csv.writer(buf, lineterminator="\n")
    writer.writerow(["node_id", "min", "max", "avg", "R"])
    for row in doc["nodes"]:
        writer.writerow([row["node_id"], repr(row["min"]), repr(row["max"]),
                         repr(row["avg"]), repr(row["R"])])
    return buf.getvalue()
