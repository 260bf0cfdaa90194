"""Test problems, computable error, convergence drivers and fits."""

from __future__ import annotations

import csv
import io
import math
import time
from dataclasses import dataclass, field
from pathlib import Path
from typing import Callable, Sequence

import numpy as np

from .element import StabChoice
from .generators import generate_graded_mesh, generate_hexagonal_mesh, generate_square_mesh
from .mesh import Mesh
from .quadrature import composite_graded, gauss_legendre
from .solver import DiscreteSolution, assign_degrees, solve_dirichlet

ALPHA = 2.0 / 3.0

# |u|_{1,Omega}^2 for the L-shape singular solution. Evaluated once as the
# boundary integral of u * du/dn over the four outer sides (u vanishes on the
# two sides meeting at the corner) with mpmath at 30 digits; the test suite
# cross-checks it with graded 2D quadrature.
LSHAPE_SEMINORM_SQ = 1.8362266618751626
LSHAPE_SEMINORM = math.sqrt(LSHAPE_SEMINORM_SQ)

DOMAIN_POLYGONS = {
    "unit-square": np.array([(0.0, 0.0), (1.0, 0.0), (1.0, 1.0), (0.0, 1.0)]),
    "L-shape": np.array([(0.0, 0.0), (0.0, -1.0), (1.0, -1.0), (1.0, 1.0), (-1.0, 1.0), (-1.0, 0.0)]),
}

CSV_COLUMNS = ("n", "h", "N", "sqrtN", "error", "seconds")


class StudyError(ValueError):
    """Invalid study configuration or data that cannot be fitted."""


@dataclass(frozen=True)
class TestProblem:
    __test__ = False  # keep pytest from collecting this class

    name: str
    u: Callable[[np.ndarray], np.ndarray]
    grad: Callable[[np.ndarray], np.ndarray]  # (..., 2) -> (..., 2)
    domain: str
    seminorm: float
    singular_corner: tuple[float, float] | None = None

    def g(self, pts: np.ndarray) -> np.ndarray:
        return self.u(pts)


def _exp_sin_u(pts):
    pts = np.asarray(pts, dtype=float)
    return np.exp(pts[..., 0]) * np.sin(pts[..., 1])


def _exp_sin_grad(pts):
    pts = np.asarray(pts, dtype=float)
    ex = np.exp(pts[..., 0])
    return np.stack([ex * np.sin(pts[..., 1]), ex * np.cos(pts[..., 1])], axis=-1)


def exp_sin_problem() -> TestProblem:
    """u = exp(x) sin(y) on the unit square."""
    return TestProblem(
        "exp-sin", _exp_sin_u, _exp_sin_grad, "unit-square", math.sqrt((math.e**2 - 1.0) / 2.0)
    )


def _lshape_theta(x, y):
    th = np.arctan2(y, x)
    return np.where(th < -0.75 * np.pi, th + 2.0 * np.pi, th)


def _lshape_u(pts):
    pts = np.asarray(pts, dtype=float)
    x, y = pts[..., 0], pts[..., 1]
    r = np.hypot(x, y)
    return r**ALPHA * np.sin(ALPHA * (_lshape_theta(x, y) + 0.5 * np.pi))


def _lshape_grad(pts):
    pts = np.asarray(pts, dtype=float)
    x, y = pts[..., 0], pts[..., 1]
    r = np.hypot(x, y)
    th = _lshape_theta(x, y)
    phi = ALPHA * (th + 0.5 * np.pi)
    with np.errstate(divide="ignore", invalid="ignore"):
        c = ALPHA * r ** (ALPHA - 1.0)
    return np.stack([c * np.sin(phi - th), c * np.cos(phi - th)], axis=-1)


def lshape_singular_problem() -> TestProblem:
    """u = r^(2/3) sin(2/3 (theta + pi/2)) on the L-shape, zero on the corner sides."""
    return TestProblem(
        "lshape-singular", _lshape_u, _lshape_grad, "L-shape", LSHAPE_SEMINORM, (0.0, 0.0)
    )


def boundary_seminorm(u, grad, polygon: np.ndarray, m: int = 40) -> float:
    """sqrt of the boundary integral of u du/dn over a ccw polygon (u harmonic)."""
    rule = gauss_legendre(m)
    total = 0.0
    for k in range(len(polygon)):
        a, b = polygon[k], polygon[(k + 1) % len(polygon)]
        t, w = rule.mapped(0.0, 1.0)
        pts = a + t[:, None] * (b - a)
        d = b - a
        normal = np.array([d[1], -d[0]])  # outward, scaled by the length
        total += float(np.sum(w * u(pts) * (grad(pts) @ normal)))
    return math.sqrt(max(total, 0.0))


def harmonic_polynomial_problem(
    degree: int, part: str = "re", domain: str = "unit-square", center=(0.3, 0.2)
) -> TestProblem:
    """u = Re or Im of (z - center)^degree, with its normalizer by boundary integral."""
    if degree < 1:
        raise StudyError("harmonic polynomial degree must be >= 1")
    if part not in ("re", "im"):
        raise StudyError(f"part must be 're' or 'im', got {part!r}")
    c = complex(*center)
    pick = np.real if part == "re" else np.imag

    def u(pts):
        pts = np.asarray(pts, dtype=float)
        z = pts[..., 0] + 1j * pts[..., 1] - c
        return pick(z**degree)

    def grad(pts):
        pts = np.asarray(pts, dtype=float)
        z = pts[..., 0] + 1j * pts[..., 1] - c
        dz = degree * z ** (degree - 1)
        # d/dx f = f'(z), d/dy f = i f'(z)
        return np.stack([pick(dz), pick(1j * dz)], axis=-1)

    norm = boundary_seminorm(u, grad, DOMAIN_POLYGONS[domain])
    return TestProblem(f"harmonic-{part}{degree}", u, grad, domain, norm)


PROBLEMS = {"exp-sin": exp_sin_problem, "lshape-singular": lshape_singular_problem}


def get_problem(name: str) -> TestProblem:
    try:
        return PROBLEMS[name]()
    except KeyError:
        raise StudyError(f"unknown problem {name!r}; expected one of {sorted(PROBLEMS)}") from None


def element_error_sq(solution: DiscreteSolution, k: int, problem: TestProblem) -> float:
    """|u - q|^2_{1,E} as the boundary integral of d_n(u - q) (u - q)."""
    mesh = solution.mesh
    e = mesh.elements[k]
    ops = solution.system.local[k]
    basis = ops.projector.basis
    coef = solution.projection_coefficients(k)
    xy = mesh.element_coords(e)
    pmax = int(max(ops.layout.edge_degrees))
    rule = gauss_legendre(max(2 * pmax + 8, 24))
    corner = None if problem.singular_corner is None else np.asarray(problem.singular_corner)
    tol = 1e-12 * mesh.diameter()
    total = 0.0
    n = len(xy)
    for j in range(n):
        a, b = xy[j], xy[(j + 1) % n]
        d = b - a
        if corner is not None and min(np.hypot(*(a - corner)), np.hypot(*(b - corner))) <= tol:
            # parametrize from the corner so nodes near it keep full precision
            t, w = composite_graded().nodes_weights(0.0, 1.0)
            start, vec = (a, d) if np.hypot(*(a - corner)) <= tol else (b, -d)
        else:
            t, w = rule.mapped(0.0, 1.0)
            start, vec = a, d
        pts = start + t[:, None] * vec
        normal = np.array([d[1], -d[0]])
        diff = problem.u(pts) - basis.eval(pts) @ coef
        dgrad = problem.grad(pts) - np.einsum("...ij,j->...i", basis.eval_gradient(pts), coef)
        total += float(np.sum(w * diff * (dgrad @ normal)))
    return total


def computable_error(solution: DiscreteSolution, problem: TestProblem) -> float:
    """Normalized broken H1 error of the projected discrete solution."""
    if solution is None or solution.values is None:
        raise StudyError("solution has not been computed")
    sq = sum(max(element_error_sq(solution, k, problem), 0.0) for k in range(len(solution.mesh.elements)))
    return math.sqrt(sq) / problem.seminorm


@dataclass(frozen=True)
class StudyRow:
    n: int
    h: float
    N: int
    error: float
    seconds: float

    @property
    def sqrtN(self) -> float:
        return math.sqrt(self.N)


@dataclass(frozen=True)
class FitResult:
    kind: str  # "algebraic" or "exponential"
    value: float  # rate r, or slope b in exp(-b sqrt(N))
    intercept: float
    r_squared: float


@dataclass
class StudyResult:
    rows: list[StudyRow]
    fit: FitResult | None
    meta: dict = field(default_factory=dict)


def fit(rows: Sequence[StudyRow], kind: str) -> FitResult:
    """Least-squares fit of log(error) against log(h) or sqrt(N).

    ``algebraic`` returns the rate r in error ~ h^r; ``exponential`` returns b
    in error ~ exp(-b sqrt(N)).
    """
    if len(rows) < 2:
        raise StudyError(f"need at least 2 rows to fit, got {len(rows)}")
    err = np.array([r.error for r in rows], dtype=float)
    if np.any(~(err > 0)):
        raise StudyError("errors must be positive to fit on a log scale")
    if kind == "algebraic":
        x = np.log([r.h for r in rows])
    elif kind == "exponential":
        x = np.array([r.sqrtN for r in rows])
    else:
        raise StudyError(f"unknown fit type {kind!r}")
    y = np.log(err)
    slope, intercept = np.polyfit(x, y, 1)
    resid = y - (slope * x + intercept)
    ss_tot = float(np.sum((y - y.mean()) ** 2))
    r2 = 1.0 - float(np.sum(resid**2)) / ss_tot if ss_tot > 0 else 1.0
    r2 = min(max(r2, 0.0), 1.0)
    value = slope if kind == "algebraic" else -slope
    return FitResult(kind, float(value), float(intercept), r2)


H_FAMILIES = {"square": generate_square_mesh, "hexagonal": generate_hexagonal_mesh}


def _timed_solve(mesh, degrees, problem, stab, timing, workers):
    t0 = time.perf_counter()
    sol = solve_dirichlet(mesh, degrees, problem.g, stab, workers=workers)
    err = computable_error(sol, problem)
    seconds = time.perf_counter() - t0 if timing else 0.0
    return sol, err, seconds


def run_h_study(
    problem: TestProblem | None = None,
    family: str | Sequence[Mesh] = "square",
    p: int = 1,
    levels: Sequence[int] = (4, 8, 16, 32),
    stab="l2-lumped",
    timing: bool = True,
    workers: int | None = None,
) -> StudyResult:
    """Uniform-degree study on a mesh sequence; h is the largest element diameter."""
    problem = problem or exp_sin_problem()
    if isinstance(family, str):
        if family not in H_FAMILIES:
            raise StudyError(f"unknown h-study family {family!r}")
        meshes = [(n, H_FAMILIES[family](n)) for n in levels]
        label = family
    else:
        meshes = list(enumerate(family))
        label = "imported"
    if len(meshes) < 2:
        raise StudyError("an h-study needs at least 2 levels")
    rows = []
    for n, mesh in meshes:
        degrees = assign_degrees(mesh, "uniform", p)
        sol, err, sec = _timed_solve(mesh, degrees, problem, stab, timing, workers)
        h = max(e.diameter for e in mesh.elements)
        rows.append(StudyRow(int(n), h, sol.n_dofs, err, sec))
    meta = dict(kind="h", family=label, p=p, stab=StabChoice.parse(stab).value, problem=problem.name)
    return StudyResult(rows, fit(rows, "algebraic"), meta)


def run_hp_study(
    problem: TestProblem | None = None,
    family: str = "a",
    sigma: float = 0.5,
    degrees: str = "uniform",
    n_max: int | None = None,
    stab="l2-lumped",
    timing: bool = True,
    workers: int | None = None,
) -> StudyResult:
    """Graded-mesh study for n = 0..n_max with p = n + 1 or p_E = j + 1."""
    problem = problem or lshape_singular_problem()
    if degrees not in ("uniform", "graded"):
        raise StudyError(f"degree mode must be 'uniform' or 'graded', got {degrees!r}")
    if n_max is None:
        n_max = 6 if degrees == "uniform" else 8
    rows = []
    for n in range(n_max + 1):
        mesh = generate_graded_mesh(family, sigma, n)
        if degrees == "uniform":
            dist = assign_degrees(mesh, "uniform", n + 1)
        else:
            dist = assign_degrees(mesh, "layer_graded")
        sol, err, sec = _timed_solve(mesh, dist, problem, stab, timing, workers)
        h = max(e.diameter for e in mesh.elements)
        rows.append(StudyRow(n, h, sol.n_dofs, err, sec))
    meta = dict(
        kind="hp", family=family, sigma=sigma, degrees=degrees,
        stab=StabChoice.parse(stab).value, problem=problem.name,
    )
    fr = fit(rows, "exponential") if len(rows) >= 2 else None
    return StudyResult(rows, fr, meta)


def rows_to_csv(rows: Sequence[StudyRow]) -> str:
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(CSV_COLUMNS)
    for r in rows:
        w.writerow([r.n, repr(r.h), r.N, repr(r.sqrtN), repr(r.error), f"{r.seconds:.6f}"])
    return buf.getvalue()


def write_csv(rows: Sequence[StudyRow], path) -> None:
    Path(path).write_text(rows_to_csv(rows))


def read_csv(path) -> list[StudyRow]:
    with open(path, newline="") as fh:
        rd = csv.DictReader(fh)
        return [
            StudyRow(int(d["n"]), float(d["h"]), int(d["N"]), float(d["error"]), float(d["seconds"]))
            for d in rd
        ]


def gnuplot_script(csv_path, kind: str, title: str = "") -> str:
    """A gnuplot script plotting the study CSV on log-scaled error axes."""
    name = Path(csv_path).name
    if kind == "hp":
        xlabel, using, xlog = "sqrt(N)", "4:5", ""
    else:
        xlabel, using, xlog = "h", "2:5", "set logscale x\n"
    return (
        "set datafile separator ','\n"
        "set key autotitle columnhead\n"
        "set logscale y\n"
        f"{xlog}"
        f"set xlabel '{xlabel}'\n"
        "set ylabel 'relative error'\n"
        f"set title '{title}'\n"
        f"plot '{name}' using {using} with linespoints title 'error'\n"
    )
