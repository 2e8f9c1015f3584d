"""Jacobi-preconditioned CG on known systems and on benchmark-sized FEM ones."""

import numpy as np
import pytest
import scipy.sparse as sp

from monodomain.errors import SolverDivergence
from monodomain.fem import ConductivitySet, FeSpace, assemble_mass, assemble_stiffness
from monodomain.geometry import ElementKind, SlabSpec, build_slab_mesh, slab_fiber_field
from monodomain.linalg import JacobiCg, solve_cg


def test_identity_converges_in_one_iteration():
    b = np.array([1.0, -2.0, 3.0, 0.5, 0.0])
    x, iterations, _ = solve_cg(sp.identity(5, format="csr"), b)
    assert np.allclose(x, b)
    assert iterations <= 1


def test_two_by_two_closed_form():
    A = sp.csr_matrix(np.array([[4.0, 1.0], [1.0, 3.0]]))
    x, _, _ = solve_cg(A, np.array([1.0, 2.0]), tolerance=1e-14)
    np.testing.assert_allclose(x, [1.0 / 11.0, 7.0 / 11.0], atol=1e-13)


def test_zero_rhs_returns_zero_without_iterating():
    A = sp.csr_matrix(np.array([[4.0, 1.0], [1.0, 3.0]]))
    x, iterations, _ = solve_cg(A, np.zeros(2))
    assert (x == 0).all()
    assert iterations == 0


@pytest.fixture(scope="module")
def benchmark_system():
    """The coarse benchmark operator alpha/dt * M + K."""
    mesh = build_slab_mesh(SlabSpec((3e-3, 7e-3, 20e-3), 0.5e-3, ElementKind.HEX8))
    space = FeSpace(mesh)
    fibers = slab_fiber_field(mesh, 0, 0.0, 0.0)
    K = assemble_stiffness(
        space, ConductivitySet().add(1, 0.95298e-4, 0.12576e-4, 0.12576e-4), fibers
    )
    A = (1.5 / 5e-5) * assemble_mass(space) + K
    rng = np.random.default_rng(1)
    return A.tocsr(), rng.standard_normal(space.num_dofs) * 1e-8


def test_benchmark_sized_system_converges_fast(benchmark_system):
    A, b = benchmark_system
    solver = JacobiCg(A, tolerance=1e-10, max_iterations=2000)
    x, iterations, _ = solver.solve(b)
    assert iterations < 200
    assert np.linalg.norm(b - A @ x) <= 1e-10 * np.linalg.norm(b)


def test_warm_start_skips_iterations(benchmark_system):
    A, b = benchmark_system
    solver = JacobiCg(A, tolerance=1e-10, max_iterations=2000)
    x, _, _ = solver.solve(b)
    _, warm_iterations, _ = solver.solve(b, initial_guess=x)
    assert warm_iterations == 0


def test_solver_is_deterministic(benchmark_system):
    A, b = benchmark_system
    x1, it1, res1 = JacobiCg(A, 1e-10, 2000).solve(b)
    x2, it2, res2 = JacobiCg(A, 1e-10, 2000).solve(b)
    assert it1 == it2
    assert res1 == res2
    assert np.array_equal(x1, x2)


def test_agrees_with_scipy(benchmark_system):
    A, b = benchmark_system
    x, _, _ = solve_cg(A, b, tolerance=1e-12)
    reference = sp.linalg.spsolve(A.tocsc(), b)
    assert np.linalg.norm(x - reference) <= 1e-9 * np.linalg.norm(reference)


def test_divergence_raises_with_context(benchmark_system):
    A, b = benchmark_system
    with pytest.raises(SolverDivergence) as err:
        solve_cg(A, b, tolerance=1e-15, max_iterations=2)
    assert "2" in str(err.value)


def test_jacobi_preconditioning_beats_identity_scaling():
    """On a badly row-scaled SPD matrix, Jacobi-CG needs far fewer
    iterations than the same matrix pre-balanced by hand would show
    unscaled; here: it must still converge quickly despite conditioning."""
    n = 200
    diag = np.logspace(0, 6, n)
    A = sp.diags(diag).tocsr()
    b = np.ones(n)
    x, iterations, _ = solve_cg(A, b, tolerance=1e-12, max_iterations=50)
    np.testing.assert_allclose(x, 1.0 / diag, rtol=1e-10)
    assert iterations <= 2  # perfectly preconditioned diagonal system
