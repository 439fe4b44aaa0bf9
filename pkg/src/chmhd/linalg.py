"""Sparse linear algebra: CSR wrapper and preconditioned Krylov solvers.

Storage and mat-vec delegate to scipy.sparse; the iteration loops (PCG for
symmetric positive definite systems, right-preconditioned BiCGStab for the
nonsymmetric ones) live here so convergence control, nullspace projection,
and reporting follow one contract.

Residual acceptance is ||r|| <= max(rel_tol * ||b||, abs_tol), always
confirmed against a freshly computed true residual before a solve is
declared converged.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np
import scipy.sparse as sp

__all__ = ["CsrMatrix", "SolverConfig", "SolveReport", "SolverError", "solve"]

_TINY = 1e-300


class CsrMatrix:
    """Square CSR operator; thin validated wrapper over scipy storage."""

    def __init__(self, mat):
        m = sp.csr_matrix(mat)
        if m.shape[0] != m.shape[1]:
            raise ValueError(f"matrix must be square, got {m.shape}")
        self.m = m

    @property
    def shape(self):
        return self.m.shape

    @property
    def n(self) -> int:
        return self.m.shape[0]

    def matvec(self, x: np.ndarray) -> np.ndarray:
        return self.m @ x

    def diagonal(self) -> np.ndarray:
        return self.m.diagonal()


@dataclass
class SolverConfig:
    method: str = "bicgstab"          # "cg" | "bicgstab" | "lu"
    rel_tol: float = 1e-10
    abs_tol: float = 1e-13
    max_iter: int | None = None       # default: max(100, 10*sqrt(n))
    precond: str = "jacobi"           # "jacobi" | "none"
    nullspace: str = "none"           # "none" | "constants"
    raise_on_fail: bool = True

    def resolved_max_iter(self, n: int) -> int:
        if self.max_iter is not None:
            return self.max_iter
        return max(100, 10 * int(np.sqrt(n)) + 10)


@dataclass
class SolveReport:
    converged: bool
    n_iter: int
    res_norm: float
    target: float
    method: str
    res_history: list = field(default_factory=list)
    reason: str = ""


class SolverError(RuntimeError):
    """Carries the partial solution and report of a failed solve."""

    def __init__(self, message: str, report: SolveReport, x: np.ndarray):
        super().__init__(message)
        self.report = report
        self.x = x


def _as_op(A):
    if isinstance(A, CsrMatrix):
        return A
    if hasattr(A, "matvec") and hasattr(A, "diagonal") and hasattr(A, "n"):
        return A          # duck-typed operator (e.g. low-rank-corrected chain)
    return CsrMatrix(A)


def _make_precond(A: CsrMatrix, kind: str):
    if kind == "none":
        return lambda r: r
    if kind == "jacobi":
        d = A.diagonal().copy()
        d[np.abs(d) < _TINY] = 1.0
        inv = 1.0 / d
        return lambda r: inv * r
    raise ValueError(f"unknown preconditioner {kind!r}")


def _deflate(x: np.ndarray) -> np.ndarray:
    return x - x.mean()


def solve(A, b: np.ndarray, config: SolverConfig | None = None,
          x0: np.ndarray | None = None) -> tuple:
    """Solve A x = b; returns (x, SolveReport).

    Zero right-hand sides short-circuit to x = 0.  With
    nullspace="constants" the rhs and the solution are projected to zero
    mean (consistent singular systems such as pure-Neumann pressure
    operators).  Raises SolverError on non-convergence unless
    config.raise_on_fail is False.
    """
    cfg = config or SolverConfig()
    op = _as_op(A)
    b = np.asarray(b, dtype=float)
    if b.shape != (op.n,):
        raise ValueError(f"rhs shape {b.shape} does not match matrix {op.shape}")

    if cfg.nullspace == "constants":
        b = _deflate(b)

    bnorm = np.linalg.norm(b)
    target = max(cfg.rel_tol * bnorm, cfg.abs_tol)
    if bnorm == 0.0:
        x = np.zeros(op.n)
        return x, SolveReport(True, 0, 0.0, target, cfg.method, [0.0], "zero rhs")

    x = np.zeros(op.n) if x0 is None else np.array(x0, dtype=float)
    if cfg.nullspace == "constants":
        x = _deflate(x)

    max_iter = cfg.resolved_max_iter(op.n)

    if cfg.method == "lu":
        x, rep = _direct(A, op, b, cfg, target)
    elif cfg.method == "cg":
        prec = _make_precond(op, cfg.precond)
        x, rep = _pcg(op, b, x, prec, target, max_iter)
    elif cfg.method == "bicgstab":
        prec = _make_precond(op, cfg.precond)
        x, rep = _bicgstab(op, b, x, prec, target, max_iter)
    else:
        raise ValueError(f"unknown method {cfg.method!r}")

    if cfg.nullspace == "constants":
        x = _deflate(x)
    if not rep.converged and cfg.raise_on_fail:
        raise SolverError(
            f"{cfg.method} stalled at ||r|| = {rep.res_norm:.3e} "
            f"(target {target:.3e}, {rep.n_iter} iterations): {rep.reason}",
            rep, x)
    return x, rep


def _true_res(op, b, x):
    return b - op.matvec(x)


def _direct(A, op, b, cfg, target):
    """Sparse LU, factored once per matrix object and cached on it.

    Singular pure-Neumann operators (nullspace="constants") are made
    invertible by pinning unknown 0; with a zero-mean rhs the pinned
    solution solves the original system exactly, and the mean is removed
    afterwards.
    """
    import scipy.sparse.linalg as spla

    lu = getattr(A, "_lu_cache", None)
    pinned = cfg.nullspace == "constants"
    if lu is None:
        m = A.m if isinstance(A, CsrMatrix) else sp.csr_matrix(A)
        m = m.tocsc().astype(float)
        if pinned:
            m = m.tolil()
            m[0, :] = 0.0
            m[0, 0] = 1.0
            m = m.tocsc()
        lu = spla.splu(m)
        try:
            A._lu_cache = lu
        except AttributeError:
            pass
    rhs = b.copy()
    if pinned:
        rhs[0] = 0.0
    x = lu.solve(rhs)
    if pinned:
        x = _deflate(x)
    res = float(np.linalg.norm(_true_res(op, b, x)))
    return x, SolveReport(res <= target, 1, res, target, "lu", [res],
                          "direct factorization")


def _pcg(op, b, x, prec, target, max_iter):
    r = _true_res(op, b, x)
    hist = [float(np.linalg.norm(r))]
    if hist[0] <= target:
        return x, SolveReport(True, 0, hist[0], target, "cg", hist)
    z = prec(r)
    p = z.copy()
    rz = np.dot(r, z)
    for k in range(1, max_iter + 1):
        Ap = op.matvec(p)
        pAp = np.dot(p, Ap)
        if pAp <= 0.0:
            return x, SolveReport(False, k, hist[-1], target, "cg", hist,
                                  "indefinite or singular direction")
        alpha = rz / pAp
        x = x + alpha * p
        r = r - alpha * Ap
        rn = float(np.linalg.norm(r))
        hist.append(rn)
        if rn <= target:
            r = _true_res(op, b, x)          # recursion drift check
            rn = float(np.linalg.norm(r))
            hist[-1] = rn
            if rn <= target:
                return x, SolveReport(True, k, rn, target, "cg", hist)
        z = prec(r)
        rz_new = np.dot(r, z)
        p = z + (rz_new / rz) * p
        rz = rz_new
    return x, SolveReport(False, max_iter, hist[-1], target, "cg", hist,
                          "max iterations")


def _bicgstab(op, b, x, prec, target, max_iter):
    r = _true_res(op, b, x)
    hist = [float(np.linalg.norm(r))]
    if hist[0] <= target:
        return x, SolveReport(True, 0, hist[0], target, "bicgstab", hist)
    r_hat = r.copy()
    rho = alpha = omega = 1.0
    v = np.zeros_like(b)
    p = np.zeros_like(b)
    for k in range(1, max_iter + 1):
        rho_new = np.dot(r_hat, r)
        if abs(rho_new) < _TINY or abs(omega) < _TINY:
            return x, SolveReport(False, k, hist[-1], target, "bicgstab", hist,
                                  "breakdown (rho or omega vanished)")
        beta = (rho_new / rho) * (alpha / omega)
        p = r + beta * (p - omega * v)
        p_hat = prec(p)
        v = op.matvec(p_hat)
        denom = np.dot(r_hat, v)
        if abs(denom) < _TINY:
            return x, SolveReport(False, k, hist[-1], target, "bicgstab", hist,
                                  "breakdown (r_hat . v vanished)")
        alpha = rho_new / denom
        s = r - alpha * v
        sn = float(np.linalg.norm(s))
        if sn <= target:
            x = x + alpha * p_hat
            r = _true_res(op, b, x)
            rn = float(np.linalg.norm(r))
            hist.append(rn)
            if rn <= target:
                return x, SolveReport(True, k, rn, target, "bicgstab", hist)
            rho = rho_new
            continue
        s_hat = prec(s)
        t = op.matvec(s_hat)
        tt = np.dot(t, t)
        if tt < _TINY:
            return x, SolveReport(False, k, sn, target, "bicgstab", hist,
                                  "breakdown (t vanished)")
        omega = np.dot(t, s) / tt
        x = x + alpha * p_hat + omega * s_hat
        r = s - omega * t
        rn = float(np.linalg.norm(r))
        hist.append(rn)
        if rn <= target:
            r = _true_res(op, b, x)
            rn = float(np.linalg.norm(r))
            hist[-1] = rn
            if rn <= target:
                return x, SolveReport(True, k, rn, target, "bicgstab", hist)
        rho = rho_new
    return x, SolveReport(False, max_iter, hist[-1], target, "bicgstab", hist,
                          "max iterations")
