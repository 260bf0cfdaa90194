import numpy as np
import pytest

from hvem.quadrature import composite_graded, gauss_legendre

# acceptance lines collected by test_acceptance.py, printed in the summary
ACCEPTANCE_LINES: list[str] = []


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE_LINES:
        terminalreporter.section("acceptance criteria")
        for line in ACCEPTANCE_LINES:
            terminalreporter.write_line(line)


def random_star_polygon(rng, n_vertices=None, aspect=None):
    """Random simple polygon, star-shaped about its center, ccw."""
    n = n_vertices or int(rng.integers(3, 11))
    while True:
        ang = np.sort(rng.uniform(0.0, 2 * np.pi, n))
        gaps = np.diff(np.concatenate([ang, [ang[0] + 2 * np.pi]]))
        if gaps.min() > 0.15 and gaps.max() < np.pi - 0.1:
            break
    rad = rng.uniform(0.4, 1.0, n)
    xy = np.stack([rad * np.cos(ang), rad * np.sin(ang)], axis=1)
    stretch = aspect if aspect is not None else rng.uniform(0.25, 1.0)
    rot = rng.uniform(0, 2 * np.pi)
    R = np.array([[np.cos(rot), -np.sin(rot)], [np.sin(rot), np.cos(rot)]])
    xy = (xy * np.array([1.0, stretch])) @ R.T
    return xy * rng.uniform(0.1, 3.0) + rng.uniform(-2, 2, 2)


@pytest.fixture
def rng():
    return np.random.default_rng(20240611)


def triangle_integral(f, apex, b, c, m=20, singular_apex=False):
    """Integrate f over triangle (apex, b, c) with the collapsed map
    x = apex + r (b - apex + s (c - b)); the radial rule is graded when the
    integrand is singular at the apex."""
    if singular_apex:
        r, wr = composite_graded().nodes_weights(0.0, 1.0)
    else:
        r, wr = gauss_legendre(m).mapped(0.0, 1.0)
    s, ws = gauss_legendre(m).mapped(0.0, 1.0)
    R, S = np.meshgrid(r, s, indexing="ij")
    W = np.outer(wr, ws) * R
    pts = apex + R[..., None] * ((b - apex) + S[..., None] * (c - b))
    area2 = abs((b[0] - apex[0]) * (c[1] - apex[1]) - (b[1] - apex[1]) * (c[0] - apex[0]))
    return float(np.sum(W * f(pts)) * area2)


def fan_integral(f, xy, corner=None, m=20):
    """Integral over a star-shaped polygon by fan triangulation from its centroid,
    or from ``corner`` when the polygon has that vertex (singular integrands)."""
    from hvem.mesh import polygon_centroid

    n = len(xy)
    if corner is not None:
        d = np.hypot(*(xy - corner).T)
        k0 = int(np.argmin(d))
        if d[k0] < 1e-12:
            total = 0.0
            for k in range(n):
                a, b = xy[k], xy[(k + 1) % n]
                if k == k0 or (k + 1) % n == k0:
                    continue
                total += triangle_integral(f, xy[k0], a, b, m, singular_apex=True)
            return total
    c = polygon_centroid(xy)
    return sum(triangle_integral(f, c, xy[k], xy[(k + 1) % n], m) for k in range(n))
