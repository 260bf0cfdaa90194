"""Global harmonic VEM system: degrees, DoF numbering, assembly and solve."""

from __future__ import annotations

import logging
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass
from typing import Callable, Sequence

import numpy as np
import scipy.sparse as sps
import scipy.sparse.linalg as spla

from .element import LocalOperators, StabChoice, local_stiffness
from .mesh import Mesh
from .quadrature import gauss_lobatto

log = logging.getLogger(__name__)


class SolverError(RuntimeError):
    """Assembly or factorization failure."""


@dataclass(frozen=True)
class DegreeDistribution:
    mode: str
    element_degrees: np.ndarray
    edge_degrees: np.ndarray

    @property
    def max_degree(self) -> int:
        return int(self.element_degrees.max())


def _edge_max_rule(mesh: Mesh, element_degrees: np.ndarray) -> np.ndarray:
    return np.array([max(element_degrees[k] for k in ed.elements) for ed in mesh.edges], dtype=int)


def assign_degrees(mesh: Mesh, mode: str = "uniform", base: int = 1) -> DegreeDistribution:
    """Element degrees, and edge degrees by the maximum rule.

    ``uniform``: every element gets ``base``. ``layer_graded``: an element in
    layer j gets ``j + 1``.
    """
    if mode == "uniform":
        if base < 1:
            raise ValueError(f"degree must be >= 1, got {base}")
        pe = np.full(len(mesh.elements), int(base), dtype=int)
    elif mode in ("layer_graded", "graded"):
        layers = mesh.layers()
        if np.any(layers < 0):
            raise ValueError("layer-graded degrees need layer labels on every element")
        pe = layers.astype(int) + 1
        mode = "layer_graded"
    else:
        raise ValueError(f"unknown degree mode {mode!r}")
    return DegreeDistribution(mode, pe, _edge_max_rule(mesh, pe))


def custom_degrees(mesh: Mesh, element_degrees: Sequence[int]) -> DegreeDistribution:
    pe = np.asarray(element_degrees, dtype=int)
    if pe.shape != (len(mesh.elements),) or pe.min() < 1:
        raise ValueError("need one degree >= 1 per element")
    return DegreeDistribution("custom", pe, _edge_max_rule(mesh, pe))


@dataclass(frozen=True)
class GlobalDofLayout:
    """Global numbering: vertices by id, then interior edge nodes by edge id.

    Interior nodes of an edge are numbered from ``endpoints[0]`` to
    ``endpoints[1]``.
    """

    n_dofs: int
    edge_offsets: np.ndarray
    edge_degrees: np.ndarray
    positions: np.ndarray
    is_dirichlet: np.ndarray

    @property
    def free(self) -> np.ndarray:
        return np.flatnonzero(~self.is_dirichlet)

    @property
    def dirichlet(self) -> np.ndarray:
        return np.flatnonzero(self.is_dirichlet)

    def element_dofs(self, mesh: Mesh, element) -> np.ndarray:
        """Global indices of an element's local DoFs (local layout order)."""
        dofs = list(element.vertex_loop)
        for eid, fwd in zip(element.edge_loop, element.edge_forward):
            p = self.edge_degrees[eid]
            ids = self.edge_offsets[eid] + np.arange(p - 1)
            dofs.extend(ids if fwd else ids[::-1])
        return np.asarray(dofs, dtype=int)


def build_global_layout(mesh: Mesh, degrees: DegreeDistribution) -> GlobalDofLayout:
    nv = mesh.n_vertices
    pe = degrees.edge_degrees
    counts = pe - 1
    offsets = nv + np.concatenate([[0], np.cumsum(counts)[:-1]]).astype(int)
    n = int(nv + counts.sum())
    positions = np.empty((n, 2))
    positions[:nv] = mesh.vertices
    dirichlet = np.zeros(n, dtype=bool)
    for ed in mesh.edges:
        a, b = mesh.vertices[ed.endpoints[0]], mesh.vertices[ed.endpoints[1]]
        inner = np.asarray(gauss_lobatto(int(pe[ed.id])).nodes[1:-1])
        sl = slice(offsets[ed.id], offsets[ed.id] + counts[ed.id])
        positions[sl] = 0.5 * (a + b) + 0.5 * inner[:, None] * (b - a)
        if ed.is_boundary:
            dirichlet[list(ed.endpoints)] = True
            dirichlet[sl] = True
    positions.setflags(write=False)
    return GlobalDofLayout(n, offsets, pe.copy(), positions, dirichlet)


def interpolate_dirichlet(g: Callable[[np.ndarray], np.ndarray], layout: GlobalDofLayout) -> np.ndarray:
    """Gauss-Lobatto interpolant of ``g``: its values at the boundary DoF nodes."""
    idx = layout.dirichlet
    return np.asarray(g(layout.positions[idx]), dtype=float).reshape(idx.size)


@dataclass
class LinearSystem:
    mesh: Mesh
    degrees: DegreeDistribution
    layout: GlobalDofLayout
    stab: StabChoice
    K: sps.csr_matrix  # full N x N stiffness
    K_free: sps.csr_matrix
    f: np.ndarray
    g_values: np.ndarray
    local: list[LocalOperators]
    element_dofs: list[np.ndarray]


def _local_ops(mesh: Mesh, degrees: DegreeDistribution, stab, stab_kw, k: int) -> LocalOperators:
    e = mesh.elements[k]
    return local_stiffness(
        mesh.element_coords(e),
        [degrees.edge_degrees[eid] for eid in e.edge_loop],
        int(degrees.element_degrees[k]),
        stab,
        **stab_kw,
    )


def assemble(
    mesh: Mesh,
    degrees: DegreeDistribution,
    stab="l2-lumped",
    layout: GlobalDofLayout | None = None,
    g_values: np.ndarray | None = None,
    workers: int | None = None,
    stab_kw: dict | None = None,
) -> LinearSystem:
    """Scatter local stiffness matrices and eliminate Dirichlet DoFs.

    Local operators may be built by a thread pool; the scatter runs serially
    in element order, so the result does not depend on ``workers``.
    """
    stab = StabChoice.parse(stab)
    stab_kw = stab_kw or {}
    if layout is None:
        layout = build_global_layout(mesh, degrees)
    ids = range(len(mesh.elements))
    if workers and workers > 1:
        with ThreadPoolExecutor(workers) as pool:
            local = list(pool.map(lambda k: _local_ops(mesh, degrees, stab, stab_kw, k), ids))
    else:
        local = [_local_ops(mesh, degrees, stab, stab_kw, k) for k in ids]

    rows, cols, vals, dofs_all = [], [], [], []
    for e, ops in zip(mesh.elements, local):
        dofs = layout.element_dofs(mesh, e)
        dofs_all.append(dofs)
        r, c = np.meshgrid(dofs, dofs, indexing="ij")
        rows.append(r.ravel())
        cols.append(c.ravel())
        vals.append(ops.K.ravel())
    K = sps.coo_matrix(
        (np.concatenate(vals), (np.concatenate(rows), np.concatenate(cols))),
        shape=(layout.n_dofs, layout.n_dofs),
    ).tocsr()
    free, dirichlet = layout.free, layout.dirichlet
    if g_values is None:
        g_values = np.zeros(dirichlet.size)
    K_free = K[free][:, free].tocsr()
    f = -(K[free][:, dirichlet] @ g_values)
    return LinearSystem(mesh, degrees, layout, stab, K, K_free, f, np.asarray(g_values), local, dofs_all)


@dataclass
class DiscreteSolution:
    system: LinearSystem
    values: np.ndarray
    residual: float

    @property
    def mesh(self) -> Mesh:
        return self.system.mesh

    @property
    def layout(self) -> GlobalDofLayout:
        return self.system.layout

    @property
    def n_dofs(self) -> int:
        return self.system.layout.n_dofs

    def local_values(self, k: int) -> np.ndarray:
        return self.values[self.system.element_dofs[k]]

    def projection_coefficients(self, k: int) -> np.ndarray:
        """Harmonic polynomial coefficients of the projected solution on element k."""
        return self.system.local[k].Pi_poly @ self.local_values(k)


def _cg_jacobi(A, b, rtol=1e-12):
    d = A.diagonal()
    M = spla.LinearOperator(A.shape, matvec=lambda x: x / d)
    x, info = spla.cg(A, b, rtol=rtol, atol=0.0, M=M, maxiter=20 * A.shape[0] + 100)
    if info != 0:
        raise SolverError(f"conjugate gradients did not converge (info={info})")
    return x


def solve(system: LinearSystem, method: str = "direct") -> DiscreteSolution:
    """Solve for the free DoFs; direct sparse LU with a CG fallback."""
    layout = system.layout
    u = np.zeros(layout.n_dofs)
    u[layout.dirichlet] = system.g_values
    A, f = system.K_free, system.f
    if A.shape[0]:
        x = None
        if method == "direct":
            try:
                x = spla.splu(A.tocsc()).solve(f)
                if not np.all(np.isfinite(x)):
                    raise SolverError("non-finite solution from direct solve")
            except (RuntimeError, SolverError) as exc:
                log.warning("direct factorization failed (%s); falling back to CG", exc)
                x = None
        if x is None:
            x = _cg_jacobi(A, f)
        u[layout.free] = x
        nf = np.linalg.norm(f)
        res = np.linalg.norm(A @ x - f) / nf if nf > 0 else np.linalg.norm(A @ x)
    else:
        res = 0.0
    return DiscreteSolution(system, u, float(res))


def solve_dirichlet(
    mesh: Mesh,
    degrees: DegreeDistribution,
    g: Callable[[np.ndarray], np.ndarray],
    stab="l2-lumped",
    **kw,
) -> DiscreteSolution:
    """Convenience pipeline: layout, interpolation, assembly, solve."""
    layout = build_global_layout(mesh, degrees)
    gv = interpolate_dirichlet(g, layout)
    system = assemble(mesh, degrees, stab, layout=layout, g_values=gv, **kw)
    return solve(system)
