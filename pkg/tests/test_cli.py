import subprocess
import sys

import pytest

from hvem.cli import main, parse_degree_option
from hvem.mesh import read_mesh


def test_degree_spec_parsing():
    assert parse_degree_option("uniform:3") == ("uniform", 3)
    assert parse_degree_option("graded") == ("layer_graded", 0)
    for bad in ("uniform", "uniform:0", "cubic:2"):
        with pytest.raises(Exception):
            parse_degree_option(bad)


def test_mesh_then_solve(tmp_path, capsys):
    mesh_path = tmp_path / "mesh.pm"
    assert main(["mesh", "--family", "a", "--sigma", "0.5", "--layers", "4", "--out", str(mesh_path)]) == 0
    m = read_mesh(mesh_path)
    assert m.n_layers == 4 and m.domain_tag == "L-shape"
    out = tmp_path / "sol.csv"
    ops = tmp_path / "ops"
    rc = main(["solve", "--mesh", str(mesh_path), "--p", "uniform:3", "--stab", "l2-lumped",
               "--problem", "lshape-singular", "--out", str(out), "--dump-operators", str(ops)])
    assert rc == 0
    lines = out.read_text().splitlines()
    assert lines[0] == "index,x,y,value"
    assert "error=" in capsys.readouterr().out
    assert len(list(ops.glob("element_*.csv"))) == len(m.elements)


def test_solve_rejects_domain_mismatch(tmp_path, capsys):
    mesh_path = tmp_path / "sq.pm"
    main(["mesh", "--family", "square", "--n", "2", "--out", str(mesh_path)])
    rc = main(["solve", "--mesh", str(mesh_path), "--problem", "lshape-singular", "--out", str(tmp_path / "x.csv")])
    assert rc == 1
    assert "error" in capsys.readouterr().err


def test_study_csv_is_deterministic(tmp_path):
    args = ["study", "--kind", "hp", "--family", "a", "--sigma", "0.5", "--degrees", "uniform",
            "--nmax", "3", "--stab", "l2-lumped", "--no-timing"]
    a, b = tmp_path / "a.csv", tmp_path / "b.csv"
    assert main(args + ["--out", str(a)]) == 0
    assert main(args + ["--out", str(b), "--emit-gnuplot"]) == 0
    assert a.read_bytes() == b.read_bytes()
    assert a.read_text().splitlines()[0] == "n,h,N,sqrtN,error,seconds"
    assert (tmp_path / "b.gp").exists()


def test_h_study_cli(tmp_path, capsys):
    out = tmp_path / "h.csv"
    assert main(["study", "--kind", "h", "--family", "hexagonal", "--p", "2", "--levels", "2", "4",
                 "--out", str(out)]) == 0
    assert "fit algebraic" in capsys.readouterr().out


def test_dump_quadrature(capsys):
    assert main(["--dump-quadrature", "3"]) == 0
    lines = capsys.readouterr().out.splitlines()
    assert lines[0] == "rule,index,node,weight" and len(lines) == 1 + 4 + 3


def test_console_entry_point_runs():
    proc = subprocess.run([sys.executable, "-m", "hvem.cli", "--help"], capture_output=True, text=True)
    assert proc.returncode == 0 and "study" in proc.stdout
