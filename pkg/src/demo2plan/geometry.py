"""Geometry kernels for affordance extraction.

Direction quantization onto a discrete codebook, Ramer-Douglas-Peucker
polyline simplification, PCA plane fitting, and algebraic (Kasa) circle
fitting with accumulated swept angle for rotation recovery.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np


class ZeroVector(ValueError):
    """Direction requested for a zero-length vector."""


class DegenerateGeometry(ValueError):
    """Points too degenerate (collinear, coincident, or flat) for the requested fit."""


def _codebook(kind: str) -> list[tuple[int, int, int]]:
    if kind == "d26":
        codes = [
            (a, b, c)
            for a in (-1, 0, 1)
            for b in (-1, 0, 1)
            for c in (-1, 0, 1)
            if (a, b, c) != (0, 0, 0)
        ]
    elif kind == "d6":
        codes = [(-1, 0, 0), (0, -1, 0), (0, 0, -1), (0, 0, 1), (0, 1, 0), (1, 0, 0)]
    else:
        raise ValueError(f"unknown quantizer {kind!r}")
    return sorted(codes)


_CODEBOOKS = {kind: _codebook(kind) for kind in ("d26", "d6")}


def quantize_code(v, quantizer: str = "d26") -> tuple[int, int, int]:
    """Integer code of the codebook direction with maximal dot product.

    Ties resolve to the lexicographically smallest (a, b, c). Invariant under
    positive scaling of the input.
    """
    v = np.asarray(v, dtype=float)
    if v.shape == (2,):
        v = np.array([v[0], v[1], 0.0])
    norm = np.linalg.norm(v)
    if not np.isfinite(norm) or norm == 0.0:
        raise ZeroVector("cannot quantize a zero or non-finite vector")
    unit = v / norm
    best_code, best_dot = None, -np.inf
    for code in _CODEBOOKS[quantizer]:
        direction = np.array(code, dtype=float)
        dot = float(unit @ (direction / np.linalg.norm(direction)))
        if dot > best_dot:
            best_code, best_dot = code, dot
    return best_code


def quantize_direction(v, quantizer: str = "d26") -> np.ndarray:
    """Normalized member of the codebook closest in angle to v."""
    code = quantize_code(v, quantizer)
    direction = np.array(code, dtype=float)
    return direction / np.linalg.norm(direction)


def point_line_distance(point, start, end) -> float:
    """Perpendicular distance from a point to the infinite line through start-end."""
    point, start, end = (np.asarray(a, dtype=float) for a in (point, start, end))
    chord = end - start
    length = np.linalg.norm(chord)
    if length == 0.0:
        return float(np.linalg.norm(point - start))
    offset = point - start
    projected = (offset @ chord) / length
    return float(np.sqrt(max(0.0, float(offset @ offset) - projected**2)))


def rdp_indices(points, epsilon: float) -> list[int]:
    """Indices kept by Ramer-Douglas-Peucker simplification; endpoints always survive."""
    points = np.asarray(points, dtype=float)
    n = len(points)
    if n == 0:
        return []
    if n <= 2:
        return list(range(n))
    keep = {0, n - 1}
    stack = [(0, n - 1)]
    while stack:
        lo, hi = stack.pop()
        if hi - lo < 2:
            continue
        dmax, split = 0.0, lo
        for i in range(lo + 1, hi):
            d = point_line_distance(points[i], points[lo], points[hi])
            if d > dmax:
                dmax, split = d, i
        if dmax > epsilon:
            keep.add(split)
            stack.append((lo, split))
            stack.append((split, hi))
    return sorted(keep)


def rdp(points, epsilon: float) -> np.ndarray:
    points = np.asarray(points, dtype=float)
    return points[rdp_indices(points, epsilon)]


@dataclass(frozen=True)
class PlaneFit:
    centroid: np.ndarray
    basis_u: np.ndarray
    basis_v: np.ndarray
    normal: np.ndarray  # unit, right-handed: normal = u x v


def fit_plane(points) -> PlaneFit:
    """Least-squares plane via PCA; the normal is the smallest-variance direction."""
    points = np.asarray(points, dtype=float)
    if points.ndim != 2 or points.shape[1] != 3 or len(points) < 3:
        raise DegenerateGeometry("plane fit needs at least 3 points in 3D")
    centroid = points.mean(axis=0)
    centered = points - centroid
    cov = centered.T @ centered
    eigenvalues, eigenvectors = np.linalg.eigh(cov)  # ascending
    if eigenvalues[2] <= 1e-24 or eigenvalues[1] / eigenvalues[2] < 1e-9:
        raise DegenerateGeometry("points are collinear or coincident")
    normal = eigenvectors[:, 0]
    basis_u = eigenvectors[:, 2]
    basis_v = np.cross(normal, basis_u)
    # re-order to a right-handed (u, v, n) triad
    return PlaneFit(centroid=centroid, basis_u=basis_u, basis_v=basis_v, normal=np.cross(basis_u, basis_v))


def kasa_circle(xy) -> tuple[float, float, float]:
    """Algebraic least-squares circle fit; returns (cx, cy, radius)."""
    xy = np.asarray(xy, dtype=float)
    x, y = xy[:, 0], xy[:, 1]
    design = np.column_stack([2.0 * x, 2.0 * y, np.ones_like(x)])
    target = x**2 + y**2
    try:
        (a, b, c), *_ = np.linalg.lstsq(design, target, rcond=None)
    except np.linalg.LinAlgError as err:  # pragma: no cover - lstsq rarely fails outright
        raise DegenerateGeometry(str(err)) from err
    r_squared = c + a**2 + b**2
    if r_squared <= 0.0 or not np.isfinite(r_squared):
        raise DegenerateGeometry("circle fit collapsed to a point")
    return float(a), float(b), float(np.sqrt(r_squared))


@dataclass(frozen=True)
class RotationFit:
    axis: np.ndarray  # unit vector, right-hand rule sign
    center: np.ndarray  # 3D circle center
    angle: float  # absolute swept angle, radians
    radius: float


def fit_rotation_from_points(points, min_radius: float = 1e-3) -> RotationFit:
    """Recover a rotation from a 3D point trajectory.

    PCA plane fit, Kasa circle fit in the plane, then the swept angle is
    accumulated increment-by-increment so arcs beyond 180 degrees keep their
    full extent. Axis sign follows the trajectory winding (right-hand rule).
    """
    points = np.asarray(points, dtype=float)
    plane = fit_plane(points)
    centered = points - plane.centroid
    uv = np.column_stack([centered @ plane.basis_u, centered @ plane.basis_v])
    cu, cv, radius = kasa_circle(uv)
    if radius < min_radius:
        raise DegenerateGeometry(f"fitted radius {radius:.2e} below threshold {min_radius:.2e}")
    angles = np.arctan2(uv[:, 1] - cv, uv[:, 0] - cu)
    increments = np.diff(angles)
    increments = (increments + np.pi) % (2.0 * np.pi) - np.pi
    total = float(increments.sum())
    if total == 0.0:
        raise DegenerateGeometry("trajectory sweeps no net angle around the fitted center")
    axis = plane.normal if total > 0 else -plane.normal
    center = plane.centroid + cu * plane.basis_u + cv * plane.basis_v
    return RotationFit(axis=axis, center=center, angle=abs(total), radius=radius)


def surface_normal_from_points(points) -> np.ndarray:
    """Unit normal of the best-fit plane, oriented toward the camera (negative z)."""
    normal = fit_plane(points).normal
    if normal[2] > 0.0:
        normal = -normal
    elif normal[2] == 0.0:
        # plane contains the view axis; orient deterministically
        nonzero = np.flatnonzero(normal)
        if normal[nonzero[0]] < 0.0:
            normal = -normal
    return normal


def principal_extent(points) -> float:
    """Spread of a trajectory along its first principal component."""
    points = np.asarray(points, dtype=float)
    centered = points - points.mean(axis=0)
    if not centered.any():
        return 0.0
    _, _, vt = np.linalg.svd(centered, full_matrices=False)
    coords = centered @ vt[0]
    return float(coords.max() - coords.min())


def arc_length(points) -> np.ndarray:
    """Cumulative arc length along a polyline, starting at 0."""
    points = np.asarray(points, dtype=float)
    if len(points) == 0:
        return np.zeros(0)
    steps = np.linalg.norm(np.diff(points, axis=0), axis=1)
    return np.concatenate([[0.0], np.cumsum(steps)])
