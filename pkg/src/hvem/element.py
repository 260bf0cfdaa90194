"""Local operators of the harmonic virtual element on one polygon.

Degrees of freedom live on the element boundary only: values at the
vertices and at the interior Gauss-Lobatto nodes of every edge. Everything
here works on raw counterclockwise vertex coordinates so it can be used (and
tested) without a global mesh.
"""

from __future__ import annotations

import enum
from dataclasses import dataclass
from functools import lru_cache

import numpy as np
import scipy.linalg as spl

from .harmonic_basis import HarmonicBasis
from .mesh import polygon_centroid, polygon_diameter, signed_area
from .quadrature import (
    QuadratureError,
    duffy_pair_rule,
    gauss_legendre,
    gauss_lobatto,
    lagrange_matrix,
)


class ElementError(ValueError):
    """Degenerate element geometry or inconsistent local data."""


class StabChoice(str, enum.Enum):
    L2_EXACT = "l2-exact"
    L2_LUMPED = "l2-lumped"
    H_HALF = "h-half"

    @classmethod
    def parse(cls, value) -> "StabChoice":
        if isinstance(value, cls):
            return value
        key = str(value).strip().lower().replace("_", "-")
        for member in cls:
            if member.value == key:
                return member
        raise ValueError(f"unknown stabilization {value!r}; expected one of {[m.value for m in cls]}")


@dataclass(frozen=True)
class LocalDofLayout:
    """Boundary DoFs of one element.

    Vertex DoFs come first in loop order, then the interior Gauss-Lobatto
    nodes of each edge in loop order. ``edge_dofs[k]`` lists the local DoFs of
    edge ``k`` from vertex ``k`` to vertex ``k + 1`` (endpoints included).
    """

    coords: np.ndarray
    edge_degrees: tuple[int, ...]
    edge_dofs: tuple[np.ndarray, ...]
    positions: np.ndarray
    edge_lengths: np.ndarray

    @property
    def ndofs(self) -> int:
        return self.positions.shape[0]

    @property
    def n_edges(self) -> int:
        return len(self.edge_degrees)

    def edge_endpoints(self, k: int):
        return self.coords[k], self.coords[(k + 1) % self.n_edges]

    @property
    def perimeter(self) -> float:
        return float(self.edge_lengths.sum())


def build_dof_layout(coords, edge_degrees) -> LocalDofLayout:
    coords = np.asarray(coords, dtype=float)
    m = len(coords)
    degrees = tuple(int(p) for p in np.broadcast_to(edge_degrees, (m,)))
    if min(degrees) < 1:
        raise ElementError(f"edge degrees must be >= 1, got {degrees}")
    positions = [coords[k] for k in range(m)]
    edge_dofs = []
    nxt = m
    lengths = np.empty(m)
    for k, p in enumerate(degrees):
        x0, x1 = coords[k], coords[(k + 1) % m]
        lengths[k] = np.hypot(*(x1 - x0))
        if lengths[k] == 0.0:
            raise ElementError(f"edge {k} has zero length")
        inner = gauss_lobatto(p).nodes[1:-1]
        ids = np.arange(nxt, nxt + p - 1)
        nxt += p - 1
        positions.extend(0.5 * (x0 + x1) + 0.5 * t * (x1 - x0) for t in inner)
        edge_dofs.append(np.concatenate([[k], ids, [(k + 1) % m]]).astype(int))
    return LocalDofLayout(
        coords=coords,
        edge_degrees=degrees,
        edge_dofs=tuple(edge_dofs),
        positions=np.array(positions),
        edge_lengths=lengths,
    )


@lru_cache(maxsize=None)
def _gl_nodes(p: int) -> np.ndarray:
    return np.asarray(gauss_lobatto(p).nodes)


def edge_trace_matrix(layout: LocalDofLayout, k: int, t, derivative: bool = False) -> np.ndarray:
    """Values of all local nodal basis functions on edge ``k`` at parameters ``t``.

    ``t`` in [-1, 1] runs from vertex ``k`` to vertex ``k + 1``. Returns an
    array of shape ``(len(t), ndofs)``; derivatives are with respect to ``t``.
    """
    t = np.atleast_1d(np.asarray(t, dtype=float))
    out = np.zeros((t.size, layout.ndofs))
    local = lagrange_matrix(_gl_nodes(layout.edge_degrees[k]), t, derivative=derivative)
    out[:, layout.edge_dofs[k]] = local
    return out


def element_basis(coords, degree: int) -> HarmonicBasis:
    coords = np.asarray(coords, dtype=float)
    c = polygon_centroid(coords)
    return HarmonicBasis((float(c[0]), float(c[1])), polygon_diameter(coords), int(degree))


@dataclass(frozen=True)
class Projector:
    basis: HarmonicBasis
    D: np.ndarray
    G: np.ndarray
    B: np.ndarray
    Pi_poly: np.ndarray
    Pi_dof: np.ndarray

    @property
    def G0(self) -> np.ndarray:
        """Energy Gram matrix: G with the constant row put back to zero."""
        g0 = self.G.copy()
        g0[0, :] = 0.0
        return 0.5 * (g0 + g0.T)


def compute_projector(coords, layout: LocalDofLayout, degree: int) -> Projector:
    """Energy projection onto harmonic polynomials of degree ``degree``.

    Rows k >= 1 of ``G`` and ``B`` hold boundary integrals of the normal
    derivative of basis function k against basis functions and nodal DoF
    functions; row 0 is the boundary-mean condition fixing constants. Each
    edge uses Gauss-Legendre with ``max(p, p_e) + 1`` points, which is exact.
    """
    basis = element_basis(coords, degree)
    nb, nd = basis.dim, layout.ndofs
    G = np.zeros((nb, nb))
    B = np.zeros((nb, nd))
    perim = layout.perimeter
    for k in range(layout.n_edges):
        x0, x1 = layout.edge_endpoints(k)
        rule = gauss_legendre(max(degree, layout.edge_degrees[k]) + 1)
        t = np.asarray(rule.nodes)
        w = np.asarray(rule.weights) * 0.5 * layout.edge_lengths[k]
        pts = 0.5 * (x0 + x1) + 0.5 * t[:, None] * (x1 - x0)
        q = basis.eval(pts)
        dn = basis.normal_derivative_trace(x0, x1, t)
        phi = edge_trace_matrix(layout, k, t)
        G[1:] += dn[:, 1:].T @ (w[:, None] * q)
        B[1:] += dn[:, 1:].T @ (w[:, None] * phi)
        G[0] += w @ q / perim
        B[0] += w @ phi / perim
    D = basis.eval(layout.positions)
    try:
        lu = spl.lu_factor(G, check_finite=True)
    except (ValueError, np.linalg.LinAlgError) as exc:
        raise ElementError(f"projector matrix is singular: {exc}") from exc
    if np.any(np.abs(np.diag(lu[0])) <= 1e-14 * np.abs(G).max()):
        raise ElementError("projector matrix is singular (degenerate element)")
    Pi_poly = spl.lu_solve(lu, B)
    return Projector(basis, D, G, B, Pi_poly, D @ Pi_poly)


def stab_l2_lumped(layout: LocalDofLayout, degree: int, h: float) -> np.ndarray:
    """Diagonal stabilization from Gauss-Lobatto lumping of ``p/h (u, v)_{0,dE}``."""
    diag = np.zeros(layout.ndofs)
    for k, p in enumerate(layout.edge_degrees):
        eta = np.asarray(gauss_lobatto(p).weights)
        np.add.at(diag, layout.edge_dofs[k], 0.5 * layout.edge_lengths[k] * eta)
    return np.diag(degree / h * diag)


def boundary_mass(layout: LocalDofLayout) -> np.ndarray:
    """Exact ``(u, v)_{0, dE}`` for the nodal DoF basis."""
    M = np.zeros((layout.ndofs, layout.ndofs))
    for k, p in enumerate(layout.edge_degrees):
        rule = gauss_legendre(p + 1)
        V = lagrange_matrix(_gl_nodes(p), rule.nodes)
        local = 0.5 * layout.edge_lengths[k] * V.T @ (np.asarray(rule.weights)[:, None] * V)
        idx = layout.edge_dofs[k]
        M[np.ix_(idx, idx)] += local
    return M


def stab_l2_exact(layout: LocalDofLayout, degree: int, h: float) -> np.ndarray:
    """Stabilization ``p/h (u, v)_{0,dE}`` with exact edge mass matrices."""
    return degree / h * boundary_mass(layout)


def _segment_distance(a0, a1, b0, b1) -> float:
    def pt_seg(p, s0, s1):
        d = s1 - s0
        t = np.clip(np.dot(p - s0, d) / np.dot(d, d), 0.0, 1.0)
        return float(np.hypot(*(s0 + t * d - p)))

    return min(pt_seg(a0, b0, b1), pt_seg(a1, b0, b1), pt_seg(b0, a0, a1), pt_seg(b1, a0, a1))


def _gram(diff: np.ndarray, weights: np.ndarray) -> np.ndarray:
    return diff.T @ (weights[:, None] * diff)


def stab_h_half(
    layout: LocalDofLayout, m: int | None = None, include_l2: bool = False
) -> np.ndarray:
    """Aronszajn-Slobodeckij ``H^{1/2}(dE)`` stabilization.

    The double integral over ``dE x dE`` is split into edge pairs:

    * identical edges: the divided difference ``(u(s) - u(t)) / (s - t)`` is a
      polynomial, integrated exactly by a tensor Gauss rule;
    * edges sharing a vertex: Duffy-regularized tensor Gauss rule;
    * disjoint edges: tensor Gauss rule, with both edges split into pieces
      when they are close compared to their length.

    ``include_l2`` adds the unscaled boundary L2 product.
    """
    n = layout.n_edges
    if n < 3:
        raise ElementError("element needs at least 3 edges")
    pmax = max(layout.edge_degrees)
    if m is None:
        m = max(2 * pmax + 2, 16)
    nd = layout.ndofs
    S = np.zeros((nd, nd))
    coords = layout.coords
    scale = layout.edge_lengths.max()

    # identical edges
    for k, p in enumerate(layout.edge_degrees):
        rule = gauss_legendre(p + 1)
        t = np.asarray(rule.nodes)
        w = np.asarray(rule.weights)
        phi = edge_trace_matrix(layout, k, t)
        dphi = edge_trace_matrix(layout, k, t, derivative=True)
        t1, t2 = np.meshgrid(np.arange(t.size), np.arange(t.size), indexing="ij")
        t1, t2 = t1.ravel(), t2.ravel()
        off = t1 != t2
        dd = np.empty((t1.size, nd))
        dd[off] = (phi[t1[off]] - phi[t2[off]]) / (t[t1[off]] - t[t2[off]])[:, None]
        dd[~off] = dphi[t1[~off]]
        S += _gram(dd, w[t1] * w[t2])

    gl = gauss_legendre(m)
    for i in range(n):
        for j in range(i + 1, n):
            adjacent = j == i + 1 or (i == 0 and j == n - 1)
            if adjacent:
                # shared vertex index and orientation of both edges away from it
                if j == i + 1:
                    v = j
                    tau_i = lambda s: 1.0 - 2.0 * s  # edge i ends at v
                    tau_j = lambda s: -1.0 + 2.0 * s  # edge j starts at v
                else:
                    v = 0
                    tau_i = lambda s: -1.0 + 2.0 * s  # edge 0 starts at v
                    tau_j = lambda s: 1.0 - 2.0 * s  # edge n-1 ends at v
                pv = coords[v]
                a = coords[(i + 1) % n if v == i else i] - pv
                b = coords[(j + 1) % n if v == j else j] - pv
                na, nb = np.hypot(*a), np.hypot(*b)
                cross = a[0] * b[1] - a[1] * b[0]
                if abs(cross) <= 1e-13 * na * nb and np.dot(a, b) > 0:
                    raise QuadratureError(f"edges {i} and {j} overlap (zero interior angle)")
                ds, dt, dw = duffy_pair_rule(m, a, b)
                diff = edge_trace_matrix(layout, i, tau_i(ds)) - edge_trace_matrix(layout, j, tau_j(dt))
                r2 = (a[0] * ds - b[0] * dt) ** 2 + (a[1] * ds - b[1] * dt) ** 2
                S += _gram(diff, 2.0 * na * nb * dw / r2)
            else:
                a0, a1 = layout.edge_endpoints(i)
                b0, b1 = layout.edge_endpoints(j)
                dist = _segment_distance(a0, a1, b0, b1)
                if dist <= 1e-13 * scale:
                    raise QuadratureError(f"edges {i} and {j} overlap or intersect")
                longest = max(layout.edge_lengths[i], layout.edge_lengths[j])
                pieces = int(min(8, max(1, np.ceil(longest / (2.0 * dist)))))
                edges_t = np.linspace(-1.0, 1.0, pieces + 1)
                ts, ws = [], []
                for lo, hi in zip(edges_t[:-1], edges_t[1:]):
                    x, w = gl.mapped(lo, hi)
                    ts.append(x)
                    ws.append(w)
                tq, wq = np.concatenate(ts), np.concatenate(ws)
                phi_i = edge_trace_matrix(layout, i, tq)
                phi_j = edge_trace_matrix(layout, j, tq)
                xi = 0.5 * (a0 + a1) + 0.5 * tq[:, None] * (a1 - a0)
                eta = 0.5 * (b0 + b1) + 0.5 * tq[:, None] * (b1 - b0)
                I, J = np.meshgrid(np.arange(tq.size), np.arange(tq.size), indexing="ij")
                I, J = I.ravel(), J.ravel()
                r2 = ((xi[I] - eta[J]) ** 2).sum(axis=1)
                jac = 0.25 * layout.edge_lengths[i] * layout.edge_lengths[j]
                S += _gram(phi_i[I] - phi_j[J], 2.0 * jac * wq[I] * wq[J] / r2)
    if include_l2:
        S += boundary_mass(layout)
    return 0.5 * (S + S.T)


@dataclass(frozen=True)
class LocalOperators:
    layout: LocalDofLayout
    projector: Projector
    S: np.ndarray
    K: np.ndarray
    degree: int
    stab: StabChoice

    # shorthands for the projector pieces
    @property
    def D(self):
        return self.projector.D

    @property
    def G(self):
        return self.projector.G

    @property
    def B(self):
        return self.projector.B

    @property
    def Pi_poly(self):
        return self.projector.Pi_poly

    @property
    def Pi_dof(self):
        return self.projector.Pi_dof


def stabilization(layout: LocalDofLayout, stab, degree: int, h: float, **kw) -> np.ndarray:
    stab = StabChoice.parse(stab)
    if stab is StabChoice.L2_LUMPED:
        return stab_l2_lumped(layout, degree, h)
    if stab is StabChoice.L2_EXACT:
        return stab_l2_exact(layout, degree, h)
    return stab_h_half(layout, **kw)


def local_stiffness(coords, edge_degrees, degree: int, stab="l2-lumped", **stab_kw) -> LocalOperators:
    """Local stiffness ``Pi^T G0 Pi + (I - Pi_dof)^T S (I - Pi_dof)``.

    ``degree`` is the harmonic polynomial degree of the element; edge degrees
    may be larger (maximum rule at interfaces).
    """
    coords = np.asarray(coords, dtype=float)
    h = polygon_diameter(coords)
    if signed_area(coords) <= 1e-14 * h * h:
        raise ElementError("element has zero or negative area (vertices must be ccw)")
    layout = build_dof_layout(coords, edge_degrees)
    proj = compute_projector(coords, layout, degree)
    stab = StabChoice.parse(stab)
    S = stabilization(layout, stab, degree, h, **stab_kw)
    R = np.eye(layout.ndofs) - proj.Pi_dof
    K = proj.Pi_poly.T @ proj.G0 @ proj.Pi_poly + R.T @ S @ R
    K = 0.5 * (K + K.T)
    return LocalOperators(layout, proj, S, K, int(degree), stab)
