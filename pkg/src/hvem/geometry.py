"""Shape-regularity diagnostics for polygonal meshes.

Star-shapedness is measured exactly: the kernel of a simple polygon is the
intersection of the inner half-planes of its edges, and the largest ball
inside the kernel is the Chebyshev ball of that half-plane system (a small
linear program).
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np
from scipy.optimize import linprog

from .mesh import Mesh, polygon_diameter, signed_area


def _inner_halfplanes(xy: np.ndarray):
    """Rows (A, b) with A @ x <= b describing the inner side of each ccw edge."""
    d = np.roll(xy, -1, axis=0) - xy
    # inward normal of a ccw edge is the tangent rotated counterclockwise
    normals = np.stack([-d[:, 1], d[:, 0]], axis=1)
    A = -normals
    b = np.einsum("ij,ij->i", A, xy)
    return A, b


def polygon_kernel(xy: np.ndarray) -> np.ndarray:
    """Vertices of the kernel of a ccw polygon (empty array when empty)."""
    xy = np.asarray(xy, dtype=float)
    A, b = _inner_halfplanes(xy)
    lo, hi = xy.min(axis=0), xy.max(axis=0)
    region = np.array([lo, [hi[0], lo[1]], hi, [lo[0], hi[1]]], dtype=float)
    scale = polygon_diameter(xy)
    for a_row, b_val in zip(A, b):
        if len(region) == 0:
            break
        f = region @ a_row - b_val
        eps = 1e-14 * scale * np.linalg.norm(a_row)
        res = []
        for k in range(len(region)):
            p, q = region[k], region[(k + 1) % len(region)]
            fp, fq = f[k], f[(k + 1) % len(region)]
            if fp <= eps:
                res.append(p)
            if (fp <= eps) != (fq <= eps):
                t = fp / (fp - fq)
                res.append(p + t * (q - p))
        region = np.array(res).reshape(-1, 2)
        if len(region) >= 3 and abs(signed_area(region)) <= 1e-14 * scale * scale:
            region = np.empty((0, 2))
    return region


def chebyshev_radius(xy: np.ndarray) -> float:
    """Radius of the largest ball contained in the polygon's kernel (0 if none)."""
    xy = np.asarray(xy, dtype=float)
    A, b = _inner_halfplanes(xy)
    norms = np.linalg.norm(A, axis=1)
    A_ub = np.hstack([A, norms[:, None]])
    res = linprog(
        c=[0.0, 0.0, -1.0],
        A_ub=A_ub,
        b_ub=b,
        bounds=[(None, None), (None, None), (0, None)],
        method="highs",
    )
    if res.status != 0:
        return 0.0
    return max(float(res.x[2]), 0.0)


def inradius_triangle(a, b, c) -> float:
    la = np.hypot(*(b - c))
    lb = np.hypot(*(c - a))
    lc = np.hypot(*(a - b))
    area = 0.5 * abs((b[0] - a[0]) * (c[1] - a[1]) - (b[1] - a[1]) * (c[0] - a[0]))
    return 2.0 * area / (la + lb + lc)


def interior_angles(xy: np.ndarray) -> np.ndarray:
    prev = np.roll(xy, 1, axis=0) - xy
    nxt = np.roll(xy, -1, axis=0) - xy
    ang = np.arctan2(prev[:, 1], prev[:, 0]) - np.arctan2(nxt[:, 1], nxt[:, 0])
    return np.mod(ang, 2 * np.pi)


@dataclass
class ElementGeometry:
    star_ratio: float  # inscribed kernel-ball radius / h_E
    min_edge_ratio: float  # min edge length / h_E
    n_edges: int
    smallest_exterior_angle: float
    largest_interior_angle: float
    convex: bool


@dataclass
class GeometryReport:
    rho0: float
    elements: list[ElementGeometry]
    layer_counts: dict[int, int] = field(default_factory=dict)
    d1_pass: bool = True
    d1_subtriangulation_pass: bool = True
    d2_pass: bool = True
    # per layer j: (min, max) of h_E / sigma^(n-j)
    d3_size_ratios: dict[int, tuple[float, float]] = field(default_factory=dict)
    # per layer j >= 1: (min, max) of dist(E, 0) / h_E
    d3_distance_ratios: dict[int, tuple[float, float]] = field(default_factory=dict)

    @property
    def min_star_ratio(self) -> float:
        return min(g.star_ratio for g in self.elements)

    @property
    def min_edge_ratio(self) -> float:
        return min(g.min_edge_ratio for g in self.elements)


def _point_polygon_distance(pt, xy) -> float:
    best = math.inf
    for k in range(len(xy)):
        a, b = xy[k], xy[(k + 1) % len(xy)]
        d = b - a
        t = np.clip(np.dot(pt - a, d) / np.dot(d, d), 0.0, 1.0)
        best = min(best, float(np.hypot(*(a + t * d - pt))))
    return best


def element_geometry(xy: np.ndarray) -> ElementGeometry:
    h = polygon_diameter(xy)
    lengths = np.hypot(*(np.roll(xy, -1, axis=0) - xy).T)
    ang = interior_angles(xy)
    return ElementGeometry(
        star_ratio=chebyshev_radius(xy) / h,
        min_edge_ratio=float(lengths.min() / h),
        n_edges=len(xy),
        smallest_exterior_angle=float((2 * np.pi - ang).min()),
        largest_interior_angle=float(ang.max()),
        convex=bool(np.all(ang <= np.pi + 1e-12)),
    )


def validate_geometry(
    mesh: Mesh, rho0: float = 0.1, sigma: float | None = None, corner=(0.0, 0.0)
) -> GeometryReport:
    """Report the mesh against the shape assumptions D1-D3; never mutates it.

    D1 requires each element to be star-shaped with respect to a ball of
    radius ``rho0 * h_E``; D2 requires ``h_e >= rho0 * h_E``. On the L-shape
    the fan triangles joining each corner element's vertices to the corner
    are checked as well. D3 is reported as ratios only.
    """
    if not 0.0 < rho0 < 0.5:
        raise ValueError(f"rho0 must lie in (0, 1/2), got {rho0}")
    geoms = [element_geometry(mesh.element_coords(e)) for e in mesh.elements]
    report = GeometryReport(rho0=rho0, elements=geoms)
    report.d1_pass = all(g.star_ratio >= rho0 for g in geoms)
    report.d2_pass = all(g.min_edge_ratio >= rho0 for g in geoms)

    corner = np.asarray(corner, dtype=float)
    layers = mesh.layers()
    if np.all(layers >= 0):
        for j in np.unique(layers):
            report.layer_counts[int(j)] = int(np.sum(layers == j))

    if mesh.domain_tag == "L-shape":
        tol = 1e-12 * mesh.diameter()
        for e in mesh.elements:
            xy = mesh.element_coords(e)
            at_corner = np.hypot(*(xy - corner).T) <= tol
            if not at_corner.any():
                continue
            m = len(xy)
            for k in range(m):
                a, b = xy[k], xy[(k + 1) % m]
                if at_corner[k] or at_corner[(k + 1) % m]:
                    continue
                tri = np.array([corner, a, b])
                if inradius_triangle(*tri) < rho0 * polygon_diameter(tri):
                    report.d1_subtriangulation_pass = False

    sigma = sigma if sigma is not None else mesh.grading_sigma
    if sigma is not None and np.all(layers >= 0) and mesh.n_layers > 0:
        n = mesh.n_layers - 1
        for j in np.unique(layers):
            idx = np.flatnonzero(layers == j)
            hs = np.array([mesh.elements[k].diameter for k in idx])
            r = hs / sigma ** (n - j)
            report.d3_size_ratios[int(j)] = (float(r.min()), float(r.max()))
            if j >= 1:
                d = np.array(
                    [_point_polygon_distance(corner, mesh.element_coords(int(k))) for k in idx]
                )
                dr = d / hs
                report.d3_distance_ratios[int(j)] = (float(dr.min()), float(dr.max()))
    return report
