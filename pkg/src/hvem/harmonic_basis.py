"""Scaled harmonic polynomial basis on a polygon.

The basis of the space of harmonic polynomials of degree <= p is ordered as
``1, Re z, Im z, Re z^2, Im z^2, ..., Re z^p, Im z^p`` with the complex
variable ``z = ((x, y) - center) / scale``.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np


def _complex_powers(z: np.ndarray, p: int) -> np.ndarray:
    """Array of shape (..., p + 1) holding z^0, ..., z^p."""
    out = np.empty(z.shape + (p + 1,), dtype=complex)
    out[..., 0] = 1.0
    for k in range(1, p + 1):
        out[..., k] = out[..., k - 1] * z
    return out


@dataclass(frozen=True)
class HarmonicBasis:
    center: tuple[float, float]
    scale: float
    degree: int

    @property
    def dim(self) -> int:
        return 2 * self.degree + 1

    def _zeta(self, pts) -> np.ndarray:
        pts = np.asarray(pts, dtype=float)
        return ((pts[..., 0] - self.center[0]) + 1j * (pts[..., 1] - self.center[1])) / self.scale

    def eval(self, pts) -> np.ndarray:
        """Basis values at ``pts`` (shape (..., 2)); returns (..., 2p+1)."""
        zp = _complex_powers(self._zeta(pts), self.degree)
        out = np.empty(zp.shape[:-1] + (self.dim,))
        out[..., 0] = 1.0
        out[..., 1::2] = zp[..., 1:].real
        out[..., 2::2] = zp[..., 1:].imag
        return out

    def eval_gradient(self, pts) -> np.ndarray:
        """Gradients at ``pts``; returns (..., 2, 2p+1) with x/y on axis -2.

        Uses d/dx z^k = k z^(k-1) / scale and d/dy z^k = i k z^(k-1) / scale.
        """
        p = self.degree
        zp = _complex_powers(self._zeta(pts), max(p - 1, 0))
        shape = zp.shape[:-1]
        grad = np.zeros(shape + (2, self.dim))
        if p == 0:
            return grad
        dz = np.arange(1, p + 1) * zp[..., :p] / self.scale
        grad[..., 0, 1::2] = dz.real
        grad[..., 0, 2::2] = dz.imag
        grad[..., 1, 1::2] = -dz.imag
        grad[..., 1, 2::2] = dz.real
        return grad

    def normal_derivative_trace(self, x0, x1, t) -> np.ndarray:
        """Outward normal derivatives along the edge ``x0 -> x1``.

        The edge is traversed counterclockwise with respect to the element,
        so the outward normal is the tangent rotated clockwise. ``t`` is the
        reference parameter in [-1, 1]; returns (len(t), 2p+1).
        """
        x0 = np.asarray(x0, dtype=float)
        x1 = np.asarray(x1, dtype=float)
        tangent = x1 - x0
        length = np.hypot(*tangent)
        if length == 0.0:
            raise ValueError("degenerate edge of zero length")
        normal = np.array([tangent[1], -tangent[0]]) / length
        t = np.atleast_1d(np.asarray(t, dtype=float))
        pts = 0.5 * (x0 + x1) + 0.5 * t[:, None] * tangent
        grad = self.eval_gradient(pts)
        return normal[0] * grad[:, 0, :] + normal[1] * grad[:, 1, :]
