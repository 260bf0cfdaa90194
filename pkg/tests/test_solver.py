import numpy as np
import pytest

from hvem.element import local_stiffness
from hvem.generators import generate_graded_mesh, generate_hexagonal_mesh, generate_square_mesh
from hvem.mesh import build_mesh
from hvem.solver import (
    _cg_jacobi,
    assemble,
    assign_degrees,
    build_global_layout,
    custom_degrees,
    interpolate_dirichlet,
    solve,
    solve_dirichlet,
)
from hvem.study import harmonic_polynomial_problem


def test_uniform_and_graded_degrees():
    m = generate_graded_mesh("a", 0.5, 3)
    uni = assign_degrees(m, "uniform", 4)
    assert np.all(uni.element_degrees == 4) and np.all(uni.edge_degrees == 4)
    gr = assign_degrees(m, "layer_graded")
    assert np.array_equal(gr.element_degrees, m.layers() + 1)
    for ed in m.edges:
        assert gr.edge_degrees[ed.id] == max(gr.element_degrees[k] for k in ed.elements)


def test_graded_degrees_need_layers():
    with pytest.raises(ValueError):
        assign_degrees(generate_square_mesh(2), "layer_graded")
    with pytest.raises(ValueError):
        assign_degrees(generate_square_mesh(2), "uniform", 0)


@pytest.mark.parametrize(
    "mesh",
    [generate_square_mesh(3), generate_hexagonal_mesh(2), generate_graded_mesh("b", 0.4, 3)],
    ids=["square", "hexagonal", "graded-b"],
)
def test_global_numbering_matches_local_positions(mesh, rng):
    deg = custom_degrees(mesh, rng.integers(1, 5, len(mesh.elements)))
    layout = build_global_layout(mesh, deg)
    assert layout.n_dofs == mesh.n_vertices + int((deg.edge_degrees - 1).sum())
    for e in mesh.elements:
        ops = local_stiffness(
            mesh.element_coords(e), [deg.edge_degrees[i] for i in e.edge_loop], deg.element_degrees[e.id]
        )
        dofs = layout.element_dofs(mesh, e)
        assert np.allclose(layout.positions[dofs], ops.layout.positions, atol=1e-14)


def test_dirichlet_set_is_the_boundary():
    m = generate_square_mesh(3)
    layout = build_global_layout(m, assign_degrees(m, "uniform", 3))
    on_bnd = np.isclose(layout.positions, 0).any(axis=1) | np.isclose(layout.positions, 1).any(axis=1)
    assert np.array_equal(on_bnd, layout.is_dirichlet)


def test_single_free_dof_against_dense_oracle():
    m = generate_square_mesh(2)
    deg = assign_degrees(m, "uniform", 1)
    g = lambda pts: pts[:, 0] ** 2 - pts[:, 1] ** 2 + pts[:, 0]
    layout = build_global_layout(m, deg)
    system = assemble(m, deg, "l2-lumped", layout, interpolate_dirichlet(g, layout))
    assert system.K_free.shape == (1, 1)
    dense = np.zeros((layout.n_dofs, layout.n_dofs))
    for e in m.elements:
        K = local_stiffness(m.element_coords(e), [1] * 4, 1, "l2-lumped").K
        idx = np.array(e.vertex_loop)
        dense[np.ix_(idx, idx)] += K
    assert np.allclose(system.K.toarray(), dense, atol=1e-14)
    free = layout.free[0]
    gd = interpolate_dirichlet(g, layout)
    expected = -(dense[free, layout.dirichlet] @ gd) / dense[free, free]
    sol = solve(system)
    assert abs(sol.values[free] - expected) < 1e-13


@pytest.mark.parametrize("stab", ["l2-lumped", "l2-exact", "h-half"])
def test_patch_test_reproduces_harmonic_polynomial(stab):
    m = generate_hexagonal_mesh(2)
    prob = harmonic_polynomial_problem(3, "re")
    sol = solve_dirichlet(m, assign_degrees(m, "uniform", 3), prob.g, stab)
    assert np.abs(sol.values - prob.u(sol.layout.positions)).max() < 1e-11
    assert sol.residual < 1e-12


def test_parallel_assembly_is_identical():
    m = generate_graded_mesh("a", 0.5, 3)
    deg = assign_degrees(m, "layer_graded")
    a = assemble(m, deg, "h-half", workers=None)
    b = assemble(m, deg, "h-half", workers=4)
    assert (a.K != b.K).nnz == 0


def test_cg_fallback_agrees_with_direct():
    m = generate_square_mesh(6)
    prob = harmonic_polynomial_problem(2, "im")
    deg = assign_degrees(m, "uniform", 2)
    sol = solve_dirichlet(m, deg, prob.g)
    x = _cg_jacobi(sol.system.K_free, sol.system.f)
    assert np.allclose(x, sol.values[sol.layout.free], atol=1e-10)
    sol_cg = solve(sol.system, method="cg")
    assert np.allclose(sol_cg.values, sol.values, atol=1e-10)


def test_stiffness_symmetric_and_constants_in_kernel():
    m = generate_graded_mesh("b", 0.5, 2)
    system = assemble(m, assign_degrees(m, "layer_graded"))
    K = system.K.toarray()
    assert np.allclose(K, K.T, atol=1e-13)
    assert np.abs(K @ np.ones(len(K))).max() < 1e-11


def test_no_free_dofs():
    m = build_mesh([[(0, 0), (1, 0), (1, 1), (0, 1)]])
    sol = solve_dirichlet(m, assign_degrees(m, "uniform", 2), lambda p: p[:, 0])
    assert sol.residual == 0.0 and sol.layout.free.size == 0
