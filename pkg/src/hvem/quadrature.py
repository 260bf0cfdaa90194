"""One-dimensional quadrature rules and singular double-integral schemes.

All rules live on the reference interval [-1, 1]. Nodes are computed by
Newton iteration on Legendre polynomials started from Chebyshev points, so
results are deterministic across runs and platforms.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from functools import lru_cache
from typing import Callable

import numpy as np
from numpy.polynomial import legendre as npleg

_NEWTON_TOL = 1e-15
_NEWTON_MAXIT = 100


class QuadratureError(ValueError):
    """Raised for invalid rule parameters or degenerate integration geometry."""


@dataclass(frozen=True)
class QuadratureRule1D:
    """Nodes and positive weights on [-1, 1]."""

    nodes: np.ndarray
    weights: np.ndarray
    exactness_degree: int

    def __post_init__(self):
        self.nodes.setflags(write=False)
        self.weights.setflags(write=False)

    @property
    def npoints(self) -> int:
        return self.nodes.size

    def mapped(self, a: float, b: float) -> tuple[np.ndarray, np.ndarray]:
        """Nodes and weights affinely mapped to [a, b]."""
        half = 0.5 * (b - a)
        return a + half * (self.nodes + 1.0), half * self.weights

    def integrate(self, f: Callable[[np.ndarray], np.ndarray], a=-1.0, b=1.0):
        x, w = self.mapped(a, b)
        return np.tensordot(w, f(x), axes=(0, 0))


def _legendre_and_derivative(n: int, x: np.ndarray):
    """Return P_n(x), P_{n-1}(x) by the three-term recurrence."""
    p_prev = np.ones_like(x)
    if n == 0:
        return p_prev, np.zeros_like(x)
    p = x.copy()
    for k in range(2, n + 1):
        p, p_prev = ((2 * k - 1) * x * p - (k - 1) * p_prev) / k, p
    return p, p_prev


def _symmetrize(nodes: np.ndarray, weights: np.ndarray):
    nodes = 0.5 * (nodes - nodes[::-1])
    weights = 0.5 * (weights + weights[::-1])
    return nodes, weights


@lru_cache(maxsize=None)
def gauss_legendre(m: int) -> QuadratureRule1D:
    """Gauss-Legendre rule with ``m`` points, exact up to degree 2m-1."""
    if m < 1:
        raise QuadratureError(f"point count must be >= 1, got {m}")
    k = np.arange(1, m + 1)
    # Chebyshev-type initial guess, ascending
    x = -np.cos(np.pi * (k - 0.25) / (m + 0.5))
    for _ in range(_NEWTON_MAXIT):
        p, p_prev = _legendre_and_derivative(m, x)
        dp = m * (x * p - p_prev) / (x * x - 1.0)
        dx = p / dp
        x = x - dx
        if np.max(np.abs(dx)) < _NEWTON_TOL:
            break
    p, p_prev = _legendre_and_derivative(m, x)
    dp = m * (x * p - p_prev) / (x * x - 1.0)
    w = 2.0 / ((1.0 - x * x) * dp * dp)
    x, w = _symmetrize(x, w)
    return QuadratureRule1D(x, w, 2 * m - 1)


@lru_cache(maxsize=None)
def gauss_lobatto(p: int) -> QuadratureRule1D:
    """Gauss-Lobatto rule with ``p + 1`` points (endpoints included).

    Exact for polynomials of degree ``2p - 1``. The interior nodes are the
    roots of P'_p, found by Newton iteration on ``x P_p - P_{p-1}`` started
    from the Chebyshev-Gauss-Lobatto points.
    """
    if p < 1:
        raise QuadratureError(f"Gauss-Lobatto degree must be >= 1, got {p}")
    x = -np.cos(np.pi * np.arange(p + 1) / p)
    for _ in range(_NEWTON_MAXIT):
        pn, pn1 = _legendre_and_derivative(p, x)
        dx = (x * pn - pn1) / ((p + 1) * pn)
        x = x - dx
        if np.max(np.abs(dx)) < _NEWTON_TOL:
            break
    x[0], x[-1] = -1.0, 1.0
    pn, _ = _legendre_and_derivative(p, x)
    w = 2.0 / (p * (p + 1) * pn * pn)
    x, w = _symmetrize(x, w)
    return QuadratureRule1D(x, w, 2 * p - 1)


def lagrange_matrix(nodes: np.ndarray, t: np.ndarray, derivative: bool = False):
    """Values (or derivatives) of the Lagrange basis on ``nodes`` at ``t``.

    Returns an array of shape ``(len(t), len(nodes))``. Uses a Legendre
    Vandermonde change of basis, which is well conditioned on Lobatto nodes.
    """
    nodes = np.asarray(nodes, dtype=float)
    t = np.atleast_1d(np.asarray(t, dtype=float))
    deg = nodes.size - 1
    coeffs = np.linalg.inv(npleg.legvander(nodes, deg))
    if derivative:
        if deg == 0:
            return np.zeros((t.size, 1))
        dcoeffs = npleg.legder(coeffs, axis=0)
        return npleg.legvander(t, deg - 1) @ dcoeffs
    return npleg.legvander(t, deg) @ coeffs


@dataclass(frozen=True)
class CompositeRule:
    """Base rule repeated on geometrically graded subintervals of [0, 1].

    Breakpoints are ``0, q^d, q^(d-1), ..., q, 1`` when accumulating at the
    left endpoint (mirrored for ``endpoint="right"``). Nodes of a right rule
    closer to 1 than machine precision round to 1.0; for integrands singular
    at the right end, parametrize from that end and use a left rule.
    """

    base: QuadratureRule1D
    depth: int
    ratio: float
    endpoint: str = "left"

    def breakpoints(self) -> np.ndarray:
        pts = np.concatenate([[0.0], self.ratio ** np.arange(self.depth, 0, -1), [1.0]])
        if self.endpoint == "right":
            pts = 1.0 - pts[::-1]
        return pts

    def nodes_weights(self, a: float = 0.0, b: float = 1.0):
        """Composite nodes and weights mapped to [a, b]."""
        bp = a + (b - a) * self.breakpoints()
        xs, ws = [], []
        for lo, hi in zip(bp[:-1], bp[1:]):
            x, w = self.base.mapped(lo, hi)
            xs.append(x)
            ws.append(w)
        return np.concatenate(xs), np.concatenate(ws)

    def integrate(self, f, a: float = 0.0, b: float = 1.0):
        x, w = self.nodes_weights(a, b)
        return np.tensordot(w, f(x), axes=(0, 0))


def composite_graded(
    base: QuadratureRule1D | None = None,
    depth: int = 20,
    ratio: float = 0.15,
    endpoint: str = "left",
) -> CompositeRule:
    """Build a graded composite rule on [0, 1] refined toward ``endpoint``.

    The default 16-point Gauss-Legendre base integrates ``x^(-1/3)`` to about
    1e-13 with the default depth and ratio.
    """
    if base is None:
        base = gauss_legendre(16)
    if depth < 1:
        raise QuadratureError(f"depth must be >= 1, got {depth}")
    if not 0.0 < ratio < 1.0:
        raise QuadratureError(f"ratio must lie in (0, 1), got {ratio}")
    if endpoint not in ("left", "right"):
        raise QuadratureError(f"endpoint must be 'left' or 'right', got {endpoint!r}")
    return CompositeRule(base, depth, ratio, endpoint)


def _graded_z_rule(m: int, zstar: float | None, width: float):
    """Gauss pieces on [0, 1] refined geometrically toward a near-pole at ``zstar``."""
    x, w = gauss_legendre(m).mapped(0.0, 1.0)
    if zstar is None:
        return x, w
    c = min(max(zstar, 0.0), 1.0)
    width = max(width, abs(zstar - c))
    if width >= 0.5:
        return x, w
    pts = {0.0, 1.0, c}
    d = width
    while d < 1.0:
        pts.update(v for v in (c - d, c + d) if 0.0 < v < 1.0)
        d *= 2.0
    bp = np.array(sorted(pts))
    xs, ws = [], []
    for lo, hi in zip(bp[:-1], bp[1:]):
        xi, wi = gauss_legendre(m).mapped(lo, hi)
        xs.append(xi)
        ws.append(wi)
    return np.concatenate(xs), np.concatenate(ws)


def duffy_pair_rule(m: int, a=None, b=None):
    """Points and weights on (0,1)^2 for integrands singular at the origin.

    The square is split along its diagonal and each triangle is mapped to the
    unit square with ``s = t z``; the Jacobian ``t`` removes the singularity of
    kernels behaving like ``1/|s a - t b|^2`` times a quadratic numerator.

    When the edge vectors ``a`` and ``b`` are given, the ``z`` direction is
    refined toward the near-pole of ``|z a - b|^-2`` that appears for nearly
    folded edge pairs.

    Returns ``(s, t, w)`` with ``sum(w * F(s, t))`` approximating the
    integral of ``F`` over the unit square.
    """
    x, wx = gauss_legendre(m).mapped(0.0, 1.0)
    zs1 = zs2 = None
    wd1 = wd2 = 1.0
    if a is not None and b is not None:
        a = np.asarray(a, dtype=float)
        b = np.asarray(b, dtype=float)
        na2, nb2 = float(a @ a), float(b @ b)
        sin = abs(a[0] * b[1] - a[1] * b[0]) / math.sqrt(na2 * nb2)
        ab = float(a @ b)
        zs1, wd1 = ab / na2, sin * math.sqrt(nb2 / na2)
        zs2, wd2 = ab / nb2, sin * math.sqrt(na2 / nb2)
    out = []
    for zstar, width, swap in ((zs1, wd1, False), (zs2, wd2, True)):
        z, wz = _graded_z_rule(m, zstar, width)
        tt, zz = np.meshgrid(x, z, indexing="ij")
        ww = (np.outer(wx, wz) * tt).ravel()
        tt, zz = tt.ravel(), zz.ravel()
        # first triangle s = t z (s <= t), second t = s z (t <= s)
        out.append((tt, tt * zz, ww) if swap else (tt * zz, tt, ww))
    s = np.concatenate([out[0][0], out[1][0]])
    t = np.concatenate([out[0][1], out[1][1]])
    w = np.concatenate([out[0][2], out[1][2]])
    return s, t, w


def duffy_pair_integral(
    F: Callable[[np.ndarray, np.ndarray], np.ndarray],
    m: int = 16,
    a: np.ndarray | None = None,
    b: np.ndarray | None = None,
):
    """Integrate a common-vertex kernel ``F(s, t)`` over the unit square.

    When the edge vectors ``a`` and ``b`` (from the shared vertex) are given,
    the result is scaled by ``|a| |b|`` and degenerate angles are rejected.
    """
    scale = 1.0
    if a is not None and b is not None:
        a = np.asarray(a, dtype=float)
        b = np.asarray(b, dtype=float)
        na, nb = np.linalg.norm(a), np.linalg.norm(b)
        cross = a[0] * b[1] - a[1] * b[0]
        if abs(cross) <= 1e-14 * na * nb and np.dot(a, b) > 0:
            raise QuadratureError("edges overlap: interior angle is 0 or 2*pi")
        scale = na * nb
    s, t, w = duffy_pair_rule(m, a, b)
    return scale * np.tensordot(w, F(s, t), axes=(0, 0))
