"""Command-line interface: ``hvem mesh``, ``hvem solve`` and ``hvem study``."""

from __future__ import annotations

import argparse
import csv
import logging
import sys
from pathlib import Path

import numpy as np

from .element import StabChoice
from .generators import FAMILIES, generate_graded_mesh, generate_hexagonal_mesh, generate_square_mesh
from .mesh import MeshError, assign_layers, mesh_summary, read_mesh, write_mesh
from .quadrature import gauss_legendre, gauss_lobatto
from .solver import assign_degrees, solve_dirichlet
from .study import (
    StudyError,
    computable_error,
    get_problem,
    gnuplot_script,
    run_h_study,
    run_hp_study,
    write_csv,
)

log = logging.getLogger("hvem")

STAB_NAMES = [s.value for s in StabChoice]


def parse_degree_option(text: str) -> tuple[str, int]:
    """``uniform:3`` -> ("uniform", 3); ``graded`` -> ("layer_graded", 0)."""
    if text == "graded":
        return "layer_graded", 0
    kind, _, value = text.partition(":")
    if kind == "uniform" and value.isdigit() and int(value) >= 1:
        return "uniform", int(value)
    raise argparse.ArgumentTypeError(f"degree option must be 'uniform:<p>' or 'graded', got {text!r}")


def dump_quadrature(p: int, out) -> None:
    w = csv.writer(out, lineterminator="\n")
    w.writerow(["rule", "index", "node", "weight"])
    for name, rule in (("gauss-lobatto", gauss_lobatto(p)), ("gauss-legendre", gauss_legendre(p))):
        for i, (x, wt) in enumerate(zip(rule.nodes, rule.weights)):
            w.writerow([name, i, repr(float(x)), repr(float(wt))])


def _cmd_mesh(args) -> int:
    if args.family in FAMILIES:
        if args.layers < 1:
            raise MeshError("--layers must be >= 1")
        mesh = generate_graded_mesh(args.family, args.sigma, args.layers - 1)
    elif args.family == "square":
        mesh = generate_square_mesh(args.n)
    else:
        mesh = generate_hexagonal_mesh(args.n)
    write_mesh(mesh, args.out)
    s = mesh_summary(mesh)
    print(f"wrote {args.out}: {s['elements']} elements, {s['vertices']} vertices, {s['edges']} edges")
    return 0


def _dump_operators(solution, directory: Path) -> None:
    directory.mkdir(parents=True, exist_ok=True)
    for k, ops in enumerate(solution.system.local):
        dofs = solution.system.element_dofs[k]
        with open(directory / f"element_{k:05d}.csv", "w", newline="") as fh:
            w = csv.writer(fh, lineterminator="\n")
            w.writerow(["matrix", "row", "col", "value"])
            for name, mat in (("K", ops.K), ("S", ops.S), ("Pi_poly", ops.Pi_poly)):
                for (i, j), v in np.ndenumerate(mat):
                    w.writerow([name, i, j, repr(float(v))])
            w.writerow(["dofs", "", "", " ".join(map(str, dofs))])


def _cmd_solve(args) -> int:
    mesh = read_mesh(args.mesh)
    problem = get_problem(args.problem)
    if mesh.domain_tag != problem.domain:
        raise StudyError(f"problem {problem.name!r} lives on {problem.domain}, mesh is {mesh.domain_tag}")
    mode, base = args.p
    if mode == "layer_graded" and np.any(mesh.layers() < 0):
        mesh = assign_layers(mesh)
    degrees = assign_degrees(mesh, mode, base if mode == "uniform" else 1)
    sol = solve_dirichlet(mesh, degrees, problem.g, args.stab, workers=args.workers)
    err = computable_error(sol, problem)
    with open(args.out, "w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(["index", "x", "y", "value"])
        for i, ((x, y), v) in enumerate(zip(sol.layout.positions, sol.values)):
            w.writerow([i, repr(float(x)), repr(float(y)), repr(float(v))])
    if args.dump_operators:
        _dump_operators(sol, Path(args.dump_operators))
    print(f"N={sol.n_dofs} error={err:.6e} residual={sol.residual:.2e}")
    return 0


def _cmd_study(args) -> int:
    timing = not args.no_timing
    if args.kind == "h":
        problem = get_problem(args.problem or "exp-sin")
        res = run_h_study(
            problem, args.family or "square", args.p, args.levels, args.stab, timing, args.workers
        )
    else:
        problem = get_problem(args.problem or "lshape-singular")
        res = run_hp_study(
            problem, args.family or "a", args.sigma, args.degrees, args.nmax, args.stab, timing, args.workers
        )
    write_csv(res.rows, args.out)
    for r in res.rows:
        print(f"n={r.n:3d} N={r.N:6d} error={r.error:.4e}")
    if res.fit is not None:
        label = "rate" if res.fit.kind == "algebraic" else "b"
        print(f"fit {res.fit.kind}: {label}={res.fit.value:.4f} R2={res.fit.r_squared:.4f}")
    if args.emit_gnuplot:
        gp = Path(args.out).with_suffix(".gp")
        title = " ".join(f"{k}={v}" for k, v in res.meta.items())
        gp.write_text(gnuplot_script(args.out, args.kind, title))
        print(f"wrote {gp}")
    return 0


def build_parser() -> argparse.ArgumentParser:
    ap = argparse.ArgumentParser(prog="hvem", description="Harmonic virtual element solver for the Laplace equation.")
    ap.add_argument("--dump-quadrature", type=int, metavar="P", help="print Gauss-Lobatto/Legendre rules as CSV and exit")
    ap.add_argument("-v", "--verbose", action="store_true")
    sub = ap.add_subparsers(dest="command")

    m = sub.add_parser("mesh", help="generate a mesh file")
    m.add_argument("--family", required=True, choices=[*FAMILIES, "square", "hexagonal"])
    m.add_argument("--sigma", type=float, default=0.5)
    m.add_argument("--layers", type=int, default=4, help="number of layers n+1 (graded families)")
    m.add_argument("--n", type=int, default=4, help="resolution (square/hexagonal)")
    m.add_argument("--out", required=True)
    m.set_defaults(func=_cmd_mesh)

    s = sub.add_parser("solve", help="solve a Dirichlet problem on a mesh file")
    s.add_argument("--mesh", required=True)
    s.add_argument("--p", type=parse_degree_option, default=("uniform", 1), help="uniform:<p> or graded")
    s.add_argument("--stab", choices=STAB_NAMES, default="l2-lumped")
    s.add_argument("--problem", default="lshape-singular", choices=["lshape-singular", "exp-sin"])
    s.add_argument("--out", required=True)
    s.add_argument("--dump-operators", metavar="DIR", help="write per-element local operators as CSV")
    s.add_argument("--workers", type=int, default=None)
    s.set_defaults(func=_cmd_solve)

    st = sub.add_parser("study", help="run an h or hp convergence study")
    st.add_argument("--kind", choices=["h", "hp"], default="hp")
    st.add_argument("--family", default=None, help="a|b|c for hp, square|hexagonal for h")
    st.add_argument("--sigma", type=float, default=0.5)
    st.add_argument("--degrees", choices=["uniform", "graded"], default="uniform")
    st.add_argument("--nmax", type=int, default=None)
    st.add_argument("--p", type=int, default=1, help="uniform degree for h studies")
    st.add_argument("--levels", type=int, nargs="+", default=[4, 8, 16, 32])
    st.add_argument("--stab", choices=STAB_NAMES, default="l2-lumped")
    st.add_argument("--problem", default=None, choices=["lshape-singular", "exp-sin"])
    st.add_argument("--out", required=True)
    st.add_argument("--emit-gnuplot", action="store_true")
    st.add_argument("--no-timing", action="store_true", help="write 0 in the seconds column")
    st.add_argument("--workers", type=int, default=None)
    st.set_defaults(func=_cmd_study)
    return ap


def main(argv=None) -> int:
    ap = build_parser()
    args = ap.parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING, format="%(levelname)s %(message)s")
    if args.dump_quadrature is not None:
        dump_quadrature(args.dump_quadrature, sys.stdout)
        return 0
    if args.command is None:
        ap.print_help()
        return 2
    try:
        return args.func(args)
    except (MeshError, StudyError, ValueError, OSError) as exc:
        print(f"hvem: error: {exc}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
