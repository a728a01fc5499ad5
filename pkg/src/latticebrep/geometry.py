"""Small vector/frame helpers used by the cutting, topology and node modules."""

from __future__ import annotations

import numpy as np

Vec3 = np.ndarray


def unit(v: Vec3) -> Vec3:
    """Normalize a vector; raises on (near-)zero input."""
    n = float(np.linalg.norm(v))
    if n < 1e-300:
        raise ValueError("cannot normalize zero-length vector")
    return v / n


def angle_between(a: Vec3, b: Vec3) -> float:
    """Angle in radians between two vectors, robust near 0 and pi."""
    a = unit(np.asarray(a, float))
    b = unit(np.asarray(b, float))
    # atan2 form avoids the acos precision cliff at the ends of the range
    return float(np.arctan2(np.linalg.norm(np.cross(a, b)), np.dot(a, b)))


def perpendicular_component(v: Vec3, axis: Vec3) -> Vec3:
    """Component of v orthogonal to the given unit axis."""
    return v - np.dot(v, axis) * axis


def plane_basis(normal: Vec3, hint: Vec3 | None = None) -> tuple[Vec3, Vec3]:
    """Right-handed in-plane basis (x, y) with x × y = normal.

    When ``hint`` is given, x is aligned with the projection of the hint onto
    the plane; otherwise an arbitrary stable axis is used. Angles measured
    with atan2(p·y, p·x) increase counterclockwise for a viewer looking
    along -normal (i.e. with the normal pointing at the viewer).
    """
    n = unit(np.asarray(normal, float))
    if hint is not None:
        x = perpendicular_component(np.asarray(hint, float), n)
        if np.linalg.norm(x) < 1e-12:
            hint = None
        else:
            x = unit(x)
    if hint is None:
        seed = np.array([1.0, 0.0, 0.0]) if abs(n[0]) < 0.9 else np.array([0.0, 1.0, 0.0])
        x = unit(perpendicular_component(seed, n))
    y = np.cross(n, x)
    return x, y
