"""Conforming polygonal meshes: data types, construction, validation, I/O.

Meshes are built from raw polygon coordinate lists. Construction merges
coincident vertices, orients every element counterclockwise and splits edges
at hanging nodes, so the stored mesh is always strictly conforming: every
internal edge borders exactly two elements.
"""

from __future__ import annotations

import math
from collections import defaultdict, deque
from dataclasses import dataclass, replace
from pathlib import Path
from typing import Iterable, Sequence

import numpy as np
from scipy.spatial import cKDTree

DOMAIN_AREAS = {"unit-square": 1.0, "L-shape": 3.0}
DEDUP_RTOL = 1e-12
AREA_RTOL = 1e-10


class MeshError(ValueError):
    """Invalid mesh input: parse errors, nonconformity, bad geometry."""


@dataclass(frozen=True)
class Edge:
    id: int
    endpoints: tuple[int, int]
    elements: tuple[int, ...]
    length: float

    @property
    def is_boundary(self) -> bool:
        return len(self.elements) == 1


@dataclass(frozen=True)
class Element:
    id: int
    vertex_loop: tuple[int, ...]
    edge_loop: tuple[int, ...]
    # True where the loop traverses the edge from endpoints[0] to endpoints[1]
    edge_forward: tuple[bool, ...]
    diameter: float
    centroid: tuple[float, float]
    area: float
    layer: int | None = None

    @property
    def n_edges(self) -> int:
        return len(self.vertex_loop)


@dataclass(frozen=True)
class Mesh:
    vertices: np.ndarray
    edges: tuple[Edge, ...]
    elements: tuple[Element, ...]
    n_layers: int = 0
    grading_sigma: float | None = None
    domain_tag: str = "custom"

    @property
    def n_vertices(self) -> int:
        return self.vertices.shape[0]

    def element_coords(self, e: Element | int) -> np.ndarray:
        if isinstance(e, (int, np.integer)):
            e = self.elements[e]
        return self.vertices[list(e.vertex_loop)]

    def layers(self) -> np.ndarray:
        return np.array([-1 if e.layer is None else e.layer for e in self.elements])

    def total_area(self) -> float:
        return float(sum(e.area for e in self.elements))

    def diameter(self) -> float:
        lo = self.vertices.min(axis=0)
        hi = self.vertices.max(axis=0)
        return float(np.hypot(*(hi - lo)))

    def boundary_vertices(self) -> np.ndarray:
        ids = {v for ed in self.edges if ed.is_boundary for v in ed.endpoints}
        return np.array(sorted(ids), dtype=int)

    def vertex_degrees(self) -> np.ndarray:
        deg = np.zeros(self.n_vertices, dtype=int)
        for ed in self.edges:
            deg[list(ed.endpoints)] += 1
        return deg

    def with_layers(self, layers: Sequence[int], n_layers: int | None = None) -> "Mesh":
        elements = tuple(replace(e, layer=int(j)) for e, j in zip(self.elements, layers))
        if n_layers is None:
            n_layers = int(max(layers)) + 1 if len(layers) else 0
        return replace(self, elements=elements, n_layers=n_layers)


# -- polygon helpers -----------------------------------------------------------


def signed_area(xy: np.ndarray) -> float:
    x, y = xy[:, 0], xy[:, 1]
    return 0.5 * float(np.dot(x, np.roll(y, -1)) - np.dot(np.roll(x, -1), y))


def polygon_centroid(xy: np.ndarray) -> np.ndarray:
    x, y = xy[:, 0], xy[:, 1]
    xn, yn = np.roll(x, -1), np.roll(y, -1)
    cross = x * yn - xn * y
    a = 0.5 * cross.sum()
    return np.array([((x + xn) * cross).sum(), ((y + yn) * cross).sum()]) / (6.0 * a)


def polygon_diameter(xy: np.ndarray) -> float:
    diff = xy[:, None, :] - xy[None, :, :]
    return float(np.sqrt((diff**2).sum(-1)).max())


def _segments_intersect(p1, p2, q1, q2, tol) -> bool:
    def orient(a, b, c):
        return (b[0] - a[0]) * (c[1] - a[1]) - (b[1] - a[1]) * (c[0] - a[0])

    d1, d2 = orient(q1, q2, p1), orient(q1, q2, p2)
    d3, d4 = orient(p1, p2, q1), orient(p1, p2, q2)
    if ((d1 > tol and d2 < -tol) or (d1 < -tol and d2 > tol)) and (
        (d3 > tol and d4 < -tol) or (d3 < -tol and d4 > tol)
    ):
        return True

    def on_seg(a, b, c):
        return (
            abs(orient(a, b, c)) <= tol
            and min(a[0], b[0]) - tol <= c[0] <= max(a[0], b[0]) + tol
            and min(a[1], b[1]) - tol <= c[1] <= max(a[1], b[1]) + tol
        )

    return on_seg(q1, q2, p1) or on_seg(q1, q2, p2) or on_seg(p1, p2, q1) or on_seg(p1, p2, q2)


def is_simple_polygon(xy: np.ndarray, tol: float = 1e-14) -> bool:
    m = len(xy)
    scale = polygon_diameter(xy)
    tol = tol * scale * scale
    for i in range(m):
        a0, a1 = xy[i], xy[(i + 1) % m]
        da = a1 - a0
        # consecutive edges must not fold back onto each other
        db = xy[(i + 2) % m] - a1
        if abs(da[0] * db[1] - da[1] * db[0]) <= tol and np.dot(da, db) < 0:
            return False
        for j in range(i + 2, m):
            if i == 0 and j == m - 1:
                continue
            if _segments_intersect(a0, a1, xy[j], xy[(j + 1) % m], tol):
                return False
    return True


# -- construction --------------------------------------------------------------


def _merge_points(points: np.ndarray, tol: float):
    """Map each point to a representative id; returns (unique_points, index)."""
    tree = cKDTree(points)
    parent = np.arange(len(points))

    def find(i):
        while parent[i] != i:
            parent[i] = parent[parent[i]]
            i = parent[i]
        return i

    for i, j in tree.query_pairs(tol):
        ri, rj = find(i), find(j)
        if ri != rj:
            parent[max(ri, rj)] = min(ri, rj)
    roots = np.array([find(i) for i in range(len(points))])
    uniq, index = np.unique(roots, return_inverse=True)
    return points[uniq], index


def build_mesh(
    polygons: Iterable[Sequence[Sequence[float]]],
    layers: Sequence[int] | None = None,
    domain_tag: str = "custom",
    grading_sigma: float | None = None,
    n_layers: int | None = None,
    insert_hanging_nodes: bool = True,
) -> Mesh:
    """Assemble a validated :class:`Mesh` from polygon vertex lists.

    Polygons may be given in either orientation. Vertices closer than
    ``1e-12 * diam(domain)`` are merged; vertices lying on the interior of
    another polygon's edge are inserted into that polygon (hanging nodes).
    """
    polys = [np.asarray(p, dtype=float) for p in polygons]
    if not polys:
        raise MeshError("mesh has no elements")
    sizes = np.cumsum([0] + [len(p) for p in polys])
    loops = [list(range(a, b)) for a, b in zip(sizes[:-1], sizes[1:])]
    return build_indexed_mesh(
        np.vstack(polys), loops, layers, domain_tag, grading_sigma, n_layers, insert_hanging_nodes
    )


def build_indexed_mesh(
    points: np.ndarray,
    loops: Sequence[Sequence[int]],
    layers: Sequence[int] | None = None,
    domain_tag: str = "custom",
    grading_sigma: float | None = None,
    n_layers: int | None = None,
    insert_hanging_nodes: bool = True,
) -> Mesh:
    """Like :func:`build_mesh` but from a vertex table and index loops.

    Vertex order is preserved apart from merged duplicates and unused
    vertices, which are dropped.
    """
    points = np.asarray(points, dtype=float)
    if not len(loops):
        raise MeshError("mesh has no elements")
    lo, hi = points.min(axis=0), points.max(axis=0)
    tol = DEDUP_RTOL * float(np.hypot(*(hi - lo)))
    verts, index = _merge_points(points, tol)
    used = np.zeros(len(verts), dtype=bool)
    for loop in loops:
        used[index[list(loop)]] = True
    renum = np.cumsum(used) - 1
    verts = verts[used]
    index = renum[index]
    merged = []
    for k, loop in enumerate(loops):
        ids = [int(index[i]) for i in loop]
        dedup = [v for j, v in enumerate(ids) if v != ids[j - 1]]
        if len(dedup) < 3:
            raise MeshError(f"polygon {k} has fewer than 3 distinct vertices")
        merged.append(dedup)
    loops = merged

    if insert_hanging_nodes:
        tree = cKDTree(verts)
        new_loops = []
        for loop in loops:
            out = []
            for k, a in enumerate(loop):
                b = loop[(k + 1) % len(loop)]
                out.append(a)
                pa, pb = verts[a], verts[b]
                d = pb - pa
                L = float(np.hypot(*d))
                cand = tree.query_ball_point(0.5 * (pa + pb), 0.5 * L + tol)
                inner = []
                for c in cand:
                    if c == a or c == b:
                        continue
                    w = verts[c] - pa
                    s = float(np.dot(w, d)) / (L * L)
                    dist = abs(d[0] * w[1] - d[1] * w[0]) / L
                    if dist <= tol and 0.0 < s < 1.0:
                        inner.append((s, c))
                out.extend(c for _, c in sorted(inner))
            new_loops.append(out)
        loops = new_loops

    return _finalize(verts, loops, layers, domain_tag, grading_sigma, n_layers)


def _finalize(verts, loops, layers, domain_tag, grading_sigma, n_layers) -> Mesh:
    verts = np.ascontiguousarray(verts, dtype=float)
    verts.setflags(write=False)
    oriented = []
    for k, loop in enumerate(loops):
        xy = verts[loop]
        a = signed_area(xy)
        if a < 0:
            loop = loop[::-1]
        elif a == 0:
            raise MeshError(f"element {k} has zero area")
        oriented.append(tuple(loop))

    edge_index: dict[tuple[int, int], int] = {}
    edge_elems: list[list[int]] = []
    edge_dirs: list[list[bool]] = []
    elem_edges = []
    for k, loop in enumerate(oriented):
        eids, fwd = [], []
        for i, a in enumerate(loop):
            b = loop[(i + 1) % len(loop)]
            key = (min(a, b), max(a, b))
            if key not in edge_index:
                edge_index[key] = len(edge_elems)
                edge_elems.append([])
                edge_dirs.append([])
            eid = edge_index[key]
            edge_elems[eid].append(k)
            edge_dirs[eid].append(a < b)
            eids.append(eid)
            fwd.append(a < b)
        elem_edges.append((tuple(eids), tuple(fwd)))

    bad = [eid for eid, el in enumerate(edge_elems) if len(el) > 2]
    if bad:
        keys = {v: k for k, v in edge_index.items()}
        raise MeshError(
            "nonconforming mesh: edges bordering more than two elements: "
            + ", ".join(f"{keys[e]} -> elements {edge_elems[e]}" for e in bad)
        )
    overlap = [eid for eid, d in enumerate(edge_dirs) if len(d) == 2 and d[0] == d[1]]
    if overlap:
        keys = {v: k for k, v in edge_index.items()}
        raise MeshError(
            "overlapping elements along edges: " + ", ".join(str(keys[e]) for e in overlap)
        )

    edges = []
    for key, eid in sorted(edge_index.items(), key=lambda kv: kv[1]):
        L = float(np.hypot(*(verts[key[1]] - verts[key[0]])))
        edges.append(Edge(eid, key, tuple(edge_elems[eid]), L))

    elements = []
    for k, loop in enumerate(oriented):
        xy = verts[list(loop)]
        if not is_simple_polygon(xy):
            raise MeshError(f"element {k} is not a simple polygon")
        c = polygon_centroid(xy)
        layer = None if layers is None else int(layers[k])
        elements.append(
            Element(
                id=k,
                vertex_loop=loop,
                edge_loop=elem_edges[k][0],
                edge_forward=elem_edges[k][1],
                diameter=polygon_diameter(xy),
                centroid=(float(c[0]), float(c[1])),
                area=signed_area(xy),
                layer=layer,
            )
        )

    if n_layers is None:
        n_layers = (max(layers) + 1) if layers is not None and len(layers) else 0
    mesh = Mesh(
        vertices=verts,
        edges=tuple(edges),
        elements=tuple(elements),
        n_layers=int(n_layers),
        grading_sigma=grading_sigma,
        domain_tag=domain_tag,
    )
    check_area(mesh)
    return mesh


def check_area(mesh: Mesh) -> None:
    """Element areas must add up to the domain area (known domains only)."""
    target = DOMAIN_AREAS.get(mesh.domain_tag)
    if target is None:
        return
    total = mesh.total_area()
    if abs(total - target) > AREA_RTOL * target:
        raise MeshError(f"area closure failed: elements cover {total!r}, domain has {target!r}")


def check_conformity(mesh: Mesh) -> list[int]:
    """Edge ids violating conformity (empty when the mesh is conforming)."""
    bad = []
    for ed in mesh.edges:
        if len(ed.elements) not in (1, 2):
            bad.append(ed.id)
    return bad


def detect_domain(verts: np.ndarray, total_area: float) -> str:
    lo, hi = verts.min(axis=0), verts.max(axis=0)
    if np.allclose(lo, 0.0, atol=1e-12) and np.allclose(hi, 1.0, atol=1e-12):
        if abs(total_area - 1.0) <= AREA_RTOL:
            return "unit-square"
    if np.allclose(lo, -1.0, atol=1e-12) and np.allclose(hi, 1.0, atol=1e-12):
        if abs(total_area - 3.0) <= 3 * AREA_RTOL:
            return "L-shape"
    return "custom"


# -- layers --------------------------------------------------------------------


def assign_layers(mesh: Mesh, corner=(0.0, 0.0)) -> Mesh:
    """Label elements by closure-contact distance from the singular corner.

    Layer 0 holds the elements whose closure contains ``corner``; layer j
    holds the unlabeled elements touching layer j-1. Closures touch exactly
    when elements share a vertex, because hanging nodes are materialized.
    """
    corner = np.asarray(corner, dtype=float)
    tol = DEDUP_RTOL * max(mesh.diameter(), 1.0)
    dist = np.hypot(*(mesh.vertices - corner).T)
    vc = np.flatnonzero(dist <= tol)
    if vc.size == 0:
        raise MeshError(f"no element touches the corner {tuple(corner)}")
    vert_elems = defaultdict(list)
    for e in mesh.elements:
        for v in e.vertex_loop:
            vert_elems[v].append(e.id)
    labels = np.full(len(mesh.elements), -1, dtype=int)
    queue = deque()
    for v in vc:
        for k in vert_elems[v]:
            if labels[k] < 0:
                labels[k] = 0
                queue.append(k)
    while queue:
        k = queue.popleft()
        for v in mesh.elements[k].vertex_loop:
            for nb in vert_elems[v]:
                if labels[nb] < 0:
                    labels[nb] = labels[k] + 1
                    queue.append(nb)
    if np.any(labels < 0):
        raise MeshError("mesh is not connected through element closures")
    return mesh.with_layers(labels)


# -- text format ---------------------------------------------------------------


def write_mesh(mesh: Mesh, path) -> None:
    """Write the line-oriented ``POLYMESH 1`` format."""
    lines = ["POLYMESH 1", f"VERTICES {mesh.n_vertices}"]
    lines += [f"{x!r} {y!r}" for x, y in mesh.vertices.tolist()]
    lines.append(f"ELEMENTS {len(mesh.elements)}")
    lines += [" ".join(str(v) for v in e.vertex_loop) for e in mesh.elements]
    if all(e.layer is not None for e in mesh.elements):
        lines.append("LAYERS " + " ".join(str(e.layer) for e in mesh.elements))
    Path(path).write_text("\n".join(lines) + "\n")


def read_mesh(path) -> Mesh:
    """Parse a ``POLYMESH 1`` file; raises :class:`MeshError` with line numbers."""
    raw = Path(path).read_text().splitlines()
    lines = [(i + 1, ln.strip()) for i, ln in enumerate(raw)]
    lines = [(n, ln) for n, ln in lines if ln and not ln.startswith("#")]
    pos = 0

    def take():
        nonlocal pos
        if pos >= len(lines):
            raise MeshError(f"line {len(raw) + 1}: unexpected end of file")
        item = lines[pos]
        pos += 1
        return item

    def header(n, ln, key):
        parts = ln.split()
        if len(parts) != 2 or parts[0] != key:
            raise MeshError(f"line {n}: expected '{key} <count>', got {ln!r}")
        try:
            count = int(parts[1])
        except ValueError:
            raise MeshError(f"line {n}: bad count {parts[1]!r}") from None
        if count < 0:
            raise MeshError(f"line {n}: negative count")
        return count

    n, ln = take()
    if ln.split() != ["POLYMESH", "1"]:
        raise MeshError(f"line {n}: expected header 'POLYMESH 1', got {ln!r}")
    nv = header(*take(), "VERTICES")
    verts = np.empty((nv, 2))
    for i in range(nv):
        n, ln = take()
        parts = ln.split()
        try:
            if len(parts) != 2:
                raise ValueError
            verts[i] = [float(parts[0]), float(parts[1])]
        except ValueError:
            raise MeshError(f"line {n}: expected 'x y', got {ln!r}") from None
        if not np.all(np.isfinite(verts[i])):
            raise MeshError(f"line {n}: non-finite coordinate")
    ne = header(*take(), "ELEMENTS")
    loops = []
    for _ in range(ne):
        n, ln = take()
        try:
            ids = [int(s) for s in ln.split()]
        except ValueError:
            raise MeshError(f"line {n}: expected vertex indices, got {ln!r}") from None
        if len(ids) < 3:
            raise MeshError(f"line {n}: element needs at least 3 vertices")
        if min(ids) < 0 or max(ids) >= nv:
            raise MeshError(f"line {n}: vertex index out of range")
        loops.append(ids)
    layers = None
    if pos < len(lines):
        n, ln = take()
        parts = ln.split()
        if parts[0] != "LAYERS":
            raise MeshError(f"line {n}: unexpected content {ln!r}")
        vals = parts[1:]
        while len(vals) < ne and pos < len(lines):
            vals += take()[1].split()
        try:
            layers = [int(v) for v in vals]
        except ValueError:
            raise MeshError(f"line {n}: bad layer labels") from None
        if len(layers) != ne:
            raise MeshError(f"line {n}: expected {ne} layer labels, got {len(layers)}")
    if pos < len(lines):
        n, ln = lines[pos]
        raise MeshError(f"line {n}: trailing content {ln!r}")

    total = sum(abs(signed_area(verts[ids])) for ids in loops)
    tag = detect_domain(verts, total)
    return build_indexed_mesh(verts, loops, layers=layers, domain_tag=tag)


def mesh_summary(mesh: Mesh) -> dict:
    return {
        "vertices": mesh.n_vertices,
        "edges": len(mesh.edges),
        "elements": len(mesh.elements),
        "boundary_edges": sum(ed.is_boundary for ed in mesh.edges),
        "area": mesh.total_area(),
        "n_layers": mesh.n_layers,
        "domain": mesh.domain_tag,
        "max_diameter": max(e.diameter for e in mesh.elements),
        "min_diameter": min(e.diameter for e in mesh.elements),
        "sigma": mesh.grading_sigma if mesh.grading_sigma is not None else math.nan,
    }
