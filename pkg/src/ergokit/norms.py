"""Vector s-pseudonorms, small dense matrix norms, and the PSD matrix square root.

For 0 < s < 1 the vector "norm" is the pseudonorm sum(|x_i|^s) with no outer
root; it satisfies the triangle inequality but not homogeneity.  For s >= 1 it
is the genuine l_s norm.  The two branches coincide at s = 1.
"""

import math

import numpy as np

# All eigen-based routines are restricted to tiny dense matrices; determinism
# across platforms matters more here than asymptotic speed.
MAX_EIG_DIM = 8

_JACOBI_REL_TOL = 1e-14
_JACOBI_MAX_SWEEPS = 60


def vector_s_norm(x, s):
    """s-pseudonorm for 0 < s < 1, l_s norm for s >= 1."""
    s = float(s)
    if s <= 0:
        raise ValueError(f"s must be positive, got {s}")
    a = np.abs(np.asarray(x, dtype=float))
    if s >= 1.0:
        return float(np.sum(a ** s) ** (1.0 / s))
    return float(np.sum(a ** s))


def matrix_col_sum_norm(a_mat, s):
    """Maximum over columns of the vector_s_norm of the column."""
    s = float(s)
    if s <= 0:
        raise ValueError(f"s must be positive, got {s}")
    m = np.abs(np.asarray(a_mat, dtype=float))
    if m.ndim != 2:
        raise ValueError("expected a 2-d matrix")
    col = np.sum(m ** s, axis=0)
    if s >= 1.0:
        col = col ** (1.0 / s)
    return float(np.max(col))


def frobenius_norm(a_mat):
    """Square root of the sum of squared entries."""
    m = np.asarray(a_mat, dtype=float)
    return float(math.sqrt(np.sum(m * m)))


def operator_norm(a_mat, p):
    """Operator norm for p in {1, 2, inf}; p=2 via the largest singular value."""
    m = np.asarray(a_mat, dtype=float)
    if m.ndim != 2 or m.shape[0] != m.shape[1]:
        raise ValueError("expected a square matrix")
    if p == 1:
        return float(np.max(np.sum(np.abs(m), axis=0)))
    if p == math.inf:
        return float(np.max(np.sum(np.abs(m), axis=1)))
    if p == 2:
        w, _ = symmetric_eigh(m.T @ m)
        return float(math.sqrt(max(0.0, float(np.max(w)))))
    raise ValueError(f"unsupported operator norm order {p!r} (use 1, 2 or inf)")


def symmetric_eigh(m_sym):
    """Eigen-decomposition of a small symmetric matrix by cyclic Jacobi sweeps.

    Parameters
    ----------
    m_sym : array-like, shape (n, n), n <= 8
        Symmetric matrix.  Mild asymmetry is not checked here; callers that
        need a symmetry guarantee must validate before calling.

    Returns
    -------
    w : ndarray, shape (n,)
        Eigenvalues, in the order produced by the sweeps (not sorted).
    v : ndarray, shape (n, n)
        Orthogonal matrix with eigenvectors as columns, m_sym = v @ diag(w) @ v.T.

    Notes
    -----
    Rotations are applied in the fixed row-major pair order (0,1), (0,2), ...
    so the result is bit-reproducible across platforms.  Convergence is
    declared when the off-diagonal Frobenius mass drops below
    1e-14 * ||m_sym||_F.
    """
    a = np.array(m_sym, dtype=float)
    n = a.shape[0]
    if a.ndim != 2 or a.shape[1] != n:
        raise ValueError("expected a square matrix")
    if n > MAX_EIG_DIM:
        raise ValueError(f"dimension {n} exceeds the supported maximum {MAX_EIG_DIM}")
    v = np.eye(n)
    target = _JACOBI_REL_TOL * frobenius_norm(a)
    for _ in range(_JACOBI_MAX_SWEEPS):
        off = math.sqrt(2.0 * float(np.sum(np.triu(a, 1) ** 2)))
        if off <= target:
            return np.diag(a).copy(), v
        for p in range(n - 1):
            for q in range(p + 1, n):
                apq = a[p, q]
                if apq == 0.0:
                    continue
                # Stable symmetric Schur rotation: pick the smaller tangent.
                tau = (a[q, q] - a[p, p]) / (2.0 * apq)
                if tau >= 0.0:
                    t = 1.0 / (tau + math.sqrt(1.0 + tau * tau))
                else:
                    t = -1.0 / (-tau + math.sqrt(1.0 + tau * tau))
                c = 1.0 / math.sqrt(1.0 + t * t)
                s = t * c
                col_p = a[:, p].copy()
                col_q = a[:, q].copy()
                a[:, p] = c * col_p - s * col_q
                a[:, q] = s * col_p + c * col_q
                row_p = a[p, :].copy()
                row_q = a[q, :].copy()
                a[p, :] = c * row_p - s * row_q
                a[q, :] = s * row_p + c * row_q
                a[p, q] = 0.0
                a[q, p] = 0.0
                vec_p = v[:, p].copy()
                vec_q = v[:, q].copy()
                v[:, p] = c * vec_p - s * vec_q
                v[:, q] = s * vec_p + c * vec_q
    raise ArithmeticError("jacobi iteration did not converge")


def psd_sqrt(m_sym, tol=1e-10):
    """Unique positive semidefinite square root of a symmetric PSD matrix.

    Eigenvalues in [-tol * (1 + ||M||_F), 0) are treated as rounding artifacts
    and clamped to zero; anything below that bound raises.

    Parameters
    ----------
    m_sym : array-like, shape (n, n), n <= 8
    tol : float
        Relative tolerance for both the symmetry check and the negative
        eigenvalue clamp.

    Returns
    -------
    ndarray, shape (n, n)
        Symmetric matrix S with S @ S == m_sym up to the same tolerance scale.
    """
    m = np.asarray(m_sym, dtype=float)
    if m.ndim != 2 or m.shape[0] != m.shape[1]:
        raise ValueError("expected a square matrix")
    scale = 1.0 + frobenius_norm(m)
    if frobenius_norm(m - m.T) > tol * scale:
        raise ValueError("matrix is not symmetric within tolerance")
    w, v = symmetric_eigh((m + m.T) / 2.0)
    floor = -tol * scale
    if np.min(w) < floor:
        raise ValueError(
            f"matrix is not positive semidefinite: eigenvalue {np.min(w):.6g} "
            f"below {floor:.6g}"
        )
    # Rounding noise can leave eigenvalues slightly positive as well as
    # slightly negative; sqrt would amplify +1e-16 to 1e-8, so clamp both
    # sides.  The positive clamp is divided by the dimension cap so that the
    # reconstruction error stays within tol * scale even if every eigenvalue
    # sits at the clamp.
    w = np.where(w < tol * scale / MAX_EIG_DIM, 0.0, w)
    root = (v * np.sqrt(w)) @ v.T
    return (root + root.T) / 2.0
