"""Mesh families: uniform squares, clipped hexagons, and graded L-shape meshes.

The graded families all refine toward the reentrant corner at the origin of
the L-shaped domain ``(-1, 1)^2 minus (-1, 0]^2``. Layer interfaces sit on
the square "rings" ``max(|x|, |y|) = sigma^k`` for ``k = 0..n``:

* family ``a``: each quadrant of the L-shape is split per ring into three
  rectangles (squares when sigma = 1/2); coarse edges abutting the next ring
  get a hanging node.
* family ``b``: each ring is cut along the diagonal ``x = y`` into two
  nonconvex hexagons; the innermost L is cut into two quadrilaterals.
* family ``c``: each ring is a single nonconvex, non-star-shaped decagon;
  the innermost L is a single hexagon.
"""

from __future__ import annotations

import math

import numpy as np

from .mesh import Mesh, MeshError, build_mesh

FAMILIES = ("a", "b", "c")

# quadrant maps for the three quadrants of the L-shape
_QUADRANTS = (np.array([1.0, 1.0]), np.array([-1.0, 1.0]), np.array([1.0, -1.0]))


def generate_square_mesh(n: int) -> Mesh:
    """``n x n`` uniform squares on the unit square."""
    if n < 1:
        raise MeshError(f"number of subdivisions must be >= 1, got {n}")
    h = 1.0 / n
    polys = []
    for j in range(n):
        for i in range(n):
            x0, y0 = i * h, j * h
            polys.append([(x0, y0), (x0 + h, y0), (x0 + h, y0 + h), (x0, y0 + h)])
    return build_mesh(polys, domain_tag="unit-square")


def _clip_convex_to_box(poly: np.ndarray, lo: float = 0.0, hi: float = 1.0) -> np.ndarray:
    """Sutherland-Hodgman clipping of a convex polygon against a square."""
    out = poly
    for axis in (0, 1):
        for bound, sign in ((lo, 1.0), (hi, -1.0)):
            if len(out) == 0:
                return out
            res = []
            for k in range(len(out)):
                a, b = out[k], out[(k + 1) % len(out)]
                fa, fb = sign * (a[axis] - bound), sign * (b[axis] - bound)
                if fa >= 0:
                    res.append(a)
                if (fa >= 0) != (fb >= 0) and fa != fb:
                    t = fa / (fa - fb)
                    p = a + t * (b - a)
                    p[axis] = bound
                    res.append(p)
            out = np.array(res)
    return out


def generate_hexagonal_mesh(n: int) -> Mesh:
    """Pointy-top hexagons of width ``1/n`` clipped to the unit square.

    Rows are spaced so that the square's horizontal sides cut hexagons
    through their centers and the vertical sides either halve a hexagon or
    follow its vertical edges; boundary cells are thus halves or quarters of
    hexagons and all cells stay convex.
    """
    if n < 1:
        raise MeshError(f"resolution must be >= 1, got {n}")
    dx = 1.0 / n
    m = max(1, round(2 * n / math.sqrt(3)))
    dy = 1.0 / m
    a = dy / 1.5
    offsets = np.array(
        [(0.0, a), (-dx / 2, a / 2), (-dx / 2, -a / 2), (0.0, -a), (dx / 2, -a / 2), (dx / 2, a / 2)]
    )
    polys = []
    for j in range(m + 1):
        shift = 0.0 if j % 2 == 0 else 0.5
        for i in range(-1, n + 2):
            c = np.array([(i + shift) * dx, j * dy])
            cell = _clip_convex_to_box(c + offsets)
            if len(cell) < 3:
                continue
            x, y = cell[:, 0], cell[:, 1]
            area = 0.5 * abs(np.dot(x, np.roll(y, -1)) - np.dot(np.roll(x, -1), y))
            if area < 1e-12 * dx * dy:
                continue
            # drop duplicate points created by clipping through vertices
            keep = [k for k in range(len(cell)) if np.hypot(*(cell[k] - cell[k - 1])) > 1e-13]
            polys.append(cell[keep])
    return build_mesh(polys, domain_tag="unit-square")


def _ring_radii(sigma: float, n: int):
    return [sigma**k for k in range(n + 1)]


def _family_a(sigma: float, n: int):
    polys, layers = [], []
    r = _ring_radii(sigma, n)
    for q in _QUADRANTS:
        s = r[n]
        polys.append(q * np.array([(0, 0), (s, 0), (s, s), (0, s)]))
        layers.append(0)
        for k in range(n):
            s0, s1 = r[k], r[k + 1]
            for rect in (
                [(s1, 0), (s0, 0), (s0, s1), (s1, s1)],
                [(s1, s1), (s0, s1), (s0, s0), (s1, s0)],
                [(0, s1), (s1, s1), (s1, s0), (0, s0)],
            ):
                polys.append(q * np.array(rect, dtype=float))
                layers.append(n - k)
    return polys, layers


def _family_b(sigma: float, n: int):
    polys, layers = [], []
    r = _ring_radii(sigma, n)
    s = r[n]
    polys.append([(0, 0), (0, -s), (s, -s), (s, s)])
    polys.append([(0, 0), (s, s), (-s, s), (-s, 0)])
    layers += [0, 0]
    for k in range(n):
        s0, s1 = r[k], r[k + 1]
        polys.append([(0, -s0), (s0, -s0), (s0, s0), (s1, s1), (s1, -s1), (0, -s1)])
        polys.append([(s0, s0), (-s0, s0), (-s0, 0), (-s1, 0), (-s1, s1), (s1, s1)])
        layers += [n - k, n - k]
    return polys, layers


def _family_c(sigma: float, n: int):
    polys, layers = [], []
    r = _ring_radii(sigma, n)
    s = r[n]
    polys.append([(0, 0), (0, -s), (s, -s), (s, s), (-s, s), (-s, 0)])
    layers.append(0)
    for k in range(n):
        s0, s1 = r[k], r[k + 1]
        polys.append(
            [
                (0, -s0), (s0, -s0), (s0, s0), (-s0, s0), (-s0, 0),
                (-s1, 0), (-s1, s1), (s1, s1), (s1, -s1), (0, -s1),
            ]
        )
        layers.append(n - k)
    return polys, layers


_BUILDERS = {"a": _family_a, "b": _family_b, "c": _family_c}


def generate_graded_mesh(family: str, sigma: float, n: int) -> Mesh:
    """Geometrically graded mesh of the L-shape with ``n + 1`` layers.

    Elements in layer ``j`` have diameter proportional to ``sigma^(n - j)``;
    layer 0 consists of the elements touching the origin.
    """
    if family not in _BUILDERS:
        raise MeshError(f"unknown graded family {family!r}; expected one of {FAMILIES}")
    if not 0.0 < sigma < 1.0:
        raise MeshError(f"grading factor sigma must lie in (0, 1), got {sigma}")
    if n < 0:
        raise MeshError(f"layer parameter n must be >= 0, got {n}")
    polys, layers = _BUILDERS[family](sigma, n)
    return build_mesh(
        polys, layers=layers, domain_tag="L-shape", grading_sigma=sigma, n_layers=n + 1
    )
