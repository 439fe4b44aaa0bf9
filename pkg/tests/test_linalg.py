"""Krylov solver checks against dense direct solutions."""

import numpy as np
import pytest
import scipy.sparse as sp

from chmhd.grid import GridSpec, neumann_scalar
from chmhd.linalg import CsrMatrix, SolveReport, SolverConfig, SolverError, solve
from chmhd.operators import StencilContext


def test_csr_wrapper_validates():
    with pytest.raises(ValueError):
        CsrMatrix(np.ones((3, 4)))
    A = CsrMatrix(np.eye(3))
    assert A.n == 3
    assert np.allclose(A.matvec(np.r_[1.0, 2.0, 3.0]), [1, 2, 3])


def test_cg_matches_dense_spd():
    rng = np.random.default_rng(0)
    n = 40
    Q = rng.standard_normal((n, n))
    A = Q.T @ Q + n * np.eye(n)
    b = rng.standard_normal(n)
    want = np.linalg.solve(A, b)
    x, rep = solve(sp.csr_matrix(A), b, SolverConfig(method="cg", rel_tol=1e-12))
    assert rep.converged
    assert np.allclose(x, want, atol=1e-8)
    assert rep.res_history[-1] <= rep.target


def test_bicgstab_matches_dense_nonsymmetric():
    rng = np.random.default_rng(1)
    n = 50
    A = np.eye(n) + 0.3 * rng.standard_normal((n, n)) / np.sqrt(n)
    b = rng.standard_normal(n)
    want = np.linalg.solve(A, b)
    for precond in ("jacobi", "none"):
        x, rep = solve(sp.csr_matrix(A), b,
                       SolverConfig(method="bicgstab", rel_tol=1e-12, precond=precond))
        assert rep.converged
        assert np.allclose(x, want, atol=1e-8)


def test_zero_rhs_short_circuits():
    A = sp.eye(10, format="csr")
    x, rep = solve(A, np.zeros(10))
    assert rep.converged and rep.n_iter == 0
    assert np.all(x == 0.0)


def test_singular_neumann_poisson_with_constant_nullspace():
    g = GridSpec(12, 10, lx=1.0, ly=1.3)
    ctx = StencilContext(g, {"p": neumann_scalar()})
    L = ctx.lap_mat("p")                      # singular, negative semidefinite
    rng = np.random.default_rng(2)
    b = rng.standard_normal(g.n_cells)
    b -= b.mean()
    cfg = SolverConfig(method="cg", rel_tol=1e-11, nullspace="constants")
    x, rep = solve(-L, -b, cfg)
    assert rep.converged
    assert abs(x.mean()) < 1e-12
    assert np.abs(L @ x - b).max() < 1e-8


def test_unconverged_raises_with_report():
    rng = np.random.default_rng(3)
    n = 30
    Q = rng.standard_normal((n, n))
    A = sp.csr_matrix(Q.T @ Q + n * np.eye(n))
    b = rng.standard_normal(n)
    with pytest.raises(SolverError) as exc:
        solve(A, b, SolverConfig(method="cg", rel_tol=1e-14, abs_tol=0.0, max_iter=2))
    assert isinstance(exc.value.report, SolveReport)
    assert not exc.value.report.converged
    assert exc.value.x.shape == (n,)
    # same failure is reported, not raised, when asked
    x, rep = solve(A, b, SolverConfig(method="cg", rel_tol=1e-14, abs_tol=0.0,
                                      max_iter=2, raise_on_fail=False))
    assert not rep.converged


def test_warm_start_converges_immediately():
    rng = np.random.default_rng(4)
    n = 25
    Q = rng.standard_normal((n, n))
    A = Q.T @ Q + n * np.eye(n)
    b = rng.standard_normal(n)
    want = np.linalg.solve(A, b)
    x, rep = solve(sp.csr_matrix(A), b, SolverConfig(method="cg"), x0=want)
    assert rep.converged and rep.n_iter == 0


def test_lu_matches_dense_solve():
    rng = np.random.default_rng(6)
    n = 40
    A = sp.csr_matrix(rng.standard_normal((n, n)) + n * np.eye(n))
    b = rng.standard_normal(n)
    x, rep = solve(A, b, SolverConfig(method="lu", rel_tol=1e-9))
    assert rep.converged and rep.method == "lu"
    assert np.abs(x - np.linalg.solve(A.toarray(), b)).max() < 1e-10
    # second solve reuses the factorization cached on the matrix object
    x2, rep2 = solve(A, 2.0 * b, SolverConfig(method="lu", rel_tol=1e-9))
    assert np.abs(x2 - 2.0 * x).max() < 1e-9
    assert hasattr(A, "_lu_cache")


def test_lu_on_singular_neumann_poisson():
    g = GridSpec(10, 8, lx=1.0, ly=1.0)
    ctx = StencilContext(g, {"p": neumann_scalar()})
    L = (-ctx.lap_mat("p")).tocsr()
    rng = np.random.default_rng(9)
    b = rng.standard_normal(g.n_cells)
    b -= b.mean()
    x, rep = solve(L, b, SolverConfig(method="lu", rel_tol=1e-10,
                                      nullspace="constants"))
    assert rep.converged
    assert abs(x.mean()) < 1e-12
    assert np.abs(L @ x - b).max() < 1e-10
    # agrees with the iterative path up to the shared tolerance
    xi, _ = solve(L, b, SolverConfig(method="cg", rel_tol=1e-12,
                                     nullspace="constants"))
    assert np.abs(x - xi).max() < 1e-8
