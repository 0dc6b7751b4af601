"""Minimal dense linear algebra for the least-squares classifier baselines.

Matrices are plain 2-D float64 numpy arrays in row-major order. The module
provides exactly what the batch and streaming solvers need: products, Gram
matrices, a ridge solver built on a symmetric positive-definite Cholesky
factorization, and an independent Gauss-Jordan inverse used as a
cross-checking oracle. The Cholesky and substitution kernels are written
out here (rather than delegated) so operation counters can observe them.
"""

from __future__ import annotations

import math

import numpy as np

from .opcount import active_counter

Matrix = np.ndarray

GJ_PIVOT_TOL = 1e-12
RIDGE_RESIDUAL_TOL = 1e-8


class SingularMatrixError(ValueError):
    """Raised when a factorization or inversion meets a singular system."""


def _as_matrix(a, name: str) -> Matrix:
    m = np.asarray(a, dtype=np.float64)
    if m.ndim != 2:
        raise ValueError(f"{name} must be 2-D, got shape {m.shape}")
    if not np.isfinite(m).all():
        raise ValueError(f"{name} contains non-finite entries")
    return m


def matmul(a: Matrix, b: Matrix) -> Matrix:
    a = _as_matrix(a, "a")
    b = _as_matrix(b, "b")
    if a.shape[1] != b.shape[0]:
        raise ValueError(
            f"matmul dimension mismatch: {a.shape} x {b.shape}"
        )
    counter = active_counter()
    if counter is not None:
        n, k = a.shape
        m = b.shape[1]
        counter.count("matmul", mults=n * m * k, adds=n * m * max(k - 1, 0))
    return a @ b


def gram(h: Matrix) -> Matrix:
    """Compute HᵀH with exactly symmetric output (upper triangle mirrored)."""
    h = _as_matrix(h, "h")
    g = h.T @ h
    counter = active_counter()
    if counter is not None:
        n, m = h.shape
        pairs = m * (m + 1) // 2
        counter.count("gram", mults=pairs * n, adds=pairs * max(n - 1, 0))
    upper = np.triu(g)
    return upper + np.triu(g, 1).T


def cholesky_factor(a: Matrix) -> Matrix:
    """Lower-triangular L with L Lᵀ = A for symmetric positive-definite A."""
    a = _as_matrix(a, "a")
    m, m2 = a.shape
    if m != m2:
        raise ValueError(f"cholesky_factor needs a square matrix, got {a.shape}")
    counter = active_counter()
    L = np.zeros_like(a)
    # A rank-deficient input can leave a pivot that is positive only through
    # rounding noise; reject pivots below an eps-scale relative tolerance.
    scale = float(np.max(np.abs(np.diagonal(a)))) if m else 0.0
    tol = m * np.finfo(np.float64).eps * scale
    for j in range(m):
        col = a[j:, j] - L[j:, :j] @ L[j, :j]
        diag = col[0]
        if diag <= tol or not math.isfinite(diag):
            raise SingularMatrixError(
                "matrix is not positive definite; for a rank-deficient "
                "Gram system retry with lambda > 0"
            )
        root = math.sqrt(diag)
        L[j, j] = root
        L[j + 1:, j] = col[1:] / root
        if counter is not None:
            counter.count("factor",
                          mults=(m - j) * j + (m - j - 1) + 1,
                          adds=(m - j) * j)
    return L


def solve_lower(L: Matrix, b: Matrix) -> Matrix:
    """Solve L y = b by forward substitution (L lower-triangular)."""
    m = L.shape[0]
    y = np.array(b, dtype=np.float64, copy=True)
    counter = active_counter()
    nrhs = y.shape[1]
    for i in range(m):
        if i:
            y[i] -= L[i, :i] @ y[:i]
        y[i] /= L[i, i]
        if counter is not None:
            counter.count("solve", mults=(i + 1) * nrhs, adds=i * nrhs)
    return y


def solve_upper(U: Matrix, b: Matrix) -> Matrix:
    """Solve U y = b by back substitution (U upper-triangular)."""
    m = U.shape[0]
    y = np.array(b, dtype=np.float64, copy=True)
    counter = active_counter()
    nrhs = y.shape[1]
    for i in range(m - 1, -1, -1):
        tail = m - i - 1
        if tail:
            y[i] -= U[i, i + 1:] @ y[i + 1:]
        y[i] /= U[i, i]
        if counter is not None:
            counter.count("solve", mults=(tail + 1) * nrhs, adds=tail * nrhs)
    return y


def ridge_solve(h: Matrix, t: Matrix, lam: float = 0.0) -> Matrix:
    """Solve (HᵀH + λI) W = Hᵀ T through an SPD Cholesky factorization.

    The solution is verified against the normal equations: the residual
    infinity norm must stay below RIDGE_RESIDUAL_TOL times the magnitude
    of the right-hand side, otherwise the system is reported as too
    ill-conditioned to trust.
    """
    h = _as_matrix(h, "h")
    t = _as_matrix(t, "t")
    if h.shape[0] != t.shape[0]:
        raise ValueError(
            f"ridge_solve row mismatch: H is {h.shape}, T is {t.shape}"
        )
    if lam < 0.0:
        raise ValueError(f"lambda must be nonnegative, got {lam}")
    g = gram(h)
    g[np.diag_indices_from(g)] += lam
    rhs = h.T @ t
    counter = active_counter()
    if counter is not None:
        n, m = h.shape
        counter.count("gram", mults=m * t.shape[1] * n,
                      adds=m * t.shape[1] * max(n - 1, 0))
    L = cholesky_factor(g)
    w = solve_upper(L.T, solve_lower(L, rhs))

    residual = np.abs(g @ w - rhs).max()
    scale = max(np.abs(rhs).max(), 1.0)
    if not (residual <= RIDGE_RESIDUAL_TOL * scale):
        raise SingularMatrixError(
            f"ridge system too ill-conditioned: residual {residual:.3e} "
            f"exceeds {RIDGE_RESIDUAL_TOL:.0e} x {scale:.3e}; "
            "retry with lambda > 0"
        )
    return w


def gauss_jordan_inverse(a: Matrix) -> Matrix:
    """Invert a square matrix by Gauss-Jordan elimination with partial pivoting.

    Kept free of the Cholesky machinery above so it can serve as an
    independent oracle for ridge_solve and the streaming-solver init.
    """
    a = _as_matrix(a, "a")
    m, m2 = a.shape
    if m != m2:
        raise ValueError(f"cannot invert non-square matrix of shape {a.shape}")
    aug = np.hstack([a, np.eye(m)])
    for col in range(m):
        pivot_row = col + int(np.argmax(np.abs(aug[col:, col])))
        pivot = aug[pivot_row, col]
        if abs(pivot) < GJ_PIVOT_TOL:
            raise SingularMatrixError(
                f"singular matrix: pivot magnitude {abs(pivot):.3e} below "
                f"{GJ_PIVOT_TOL:.0e} at column {col}"
            )
        if pivot_row != col:
            aug[[col, pivot_row]] = aug[[pivot_row, col]]
        aug[col] /= aug[col, col]
        others = [r for r in range(m) if r != col]
        aug[others] -= np.outer(aug[others, col], aug[col])
    inv = aug[:, m:]
    if not np.isfinite(inv).all():
        raise SingularMatrixError("inverse contains non-finite entries")
    return inv
