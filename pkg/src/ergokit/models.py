"""Model families for X_t = f(X_{t-1}) + g(X_{t-1}) e_t and the step operator.

Three families are provided: a generic callable pair, a bivariate threshold
model whose volatility matrix switches on the closed quadrant
C = {x <= 0, y <= 0}, and a two-dimensional BEKK-ARCH(1) model with
volatility (B + (Ax)(Ax)^T)^(1/2).  All specs are immutable value objects and
every evaluation operation is pure.
"""

import math
from dataclasses import dataclass
from typing import Callable

import numpy as np

from .norms import frobenius_norm, psd_sqrt, symmetric_eigh

# Relative threshold below which det(B) is treated as zero when choosing the
# closed-form determinant path.
_DET_B_REL_TOL = 1e-12

# Region labels for ThresholdAffine2D.
REGION_C = "C"
REGION_COMPLEMENT = "complement_of_C"
REGION_D1 = "D1"
REGION_D2 = "D2"

# Region labels for BekkArch.
REGION_ON_L = "on_L"
REGION_OFF_L = "off_L"
REGION_EVERYWHERE_SINGULAR = "everywhere_singular"
REGION_EVERYWHERE_REGULAR = "everywhere_regular"


def _as_pair(values, name):
    t = tuple(float(v) for v in values)
    if len(t) != 2 or not all(math.isfinite(v) for v in t):
        raise ValueError(f"{name} must be a pair of finite reals")
    return t


def _as_2x2(values, name):
    rows = tuple(tuple(float(v) for v in row) for row in values)
    ok = len(rows) == 2 and all(len(r) == 2 for r in rows)
    if not ok or not all(math.isfinite(v) for r in rows for v in r):
        raise ValueError(f"{name} must be a finite 2x2 matrix")
    return rows


@dataclass(frozen=True)
class GenericModel:
    """Model given by arbitrary callables f: R^n -> R^n and g: R^n -> R^(n x n)."""

    dim: int
    f: Callable
    g: Callable

    def __post_init__(self):
        if not 1 <= self.dim <= 8:
            raise ValueError(f"dim must be in 1..8, got {self.dim}")


@dataclass(frozen=True)
class ThresholdAffine2D:
    """Bivariate threshold model with affine mean and switching volatility.

    The mean is a + b_mat @ x.  The volatility matrix keeps only its first
    column on the closed quadrant C = {x <= 0, y <= 0} (entries
    d_c[0] * x + d_const[0] and d_c[1] * y + d_const[1]); elsewhere the main
    2x2 block d_main scales column 1 by x and column 2 by y, and d_const is
    still added to the first column.  The matrix is therefore singular on C
    by construction and discontinuous on the boundary of C.
    """

    a: tuple
    b_mat: tuple
    d_main: tuple
    d_c: tuple
    d_const: tuple

    def __post_init__(self):
        object.__setattr__(self, "a", _as_pair(self.a, "a"))
        object.__setattr__(self, "b_mat", _as_2x2(self.b_mat, "b_mat"))
        object.__setattr__(self, "d_main", _as_2x2(self.d_main, "d_main"))
        object.__setattr__(self, "d_c", _as_pair(self.d_c, "d_c"))
        object.__setattr__(self, "d_const", _as_pair(self.d_const, "d_const"))

    @property
    def dim(self):
        return 2


@dataclass(frozen=True)
class AffineMap:
    """Callable x -> offset + matrix @ x with tuple-stored coefficients."""

    matrix: tuple
    offset: tuple

    def __post_init__(self):
        object.__setattr__(self, "matrix", _as_2x2(self.matrix, "matrix"))
        object.__setattr__(self, "offset", _as_pair(self.offset, "offset"))

    def __call__(self, x):
        ((m11, m12), (m21, m22)) = self.matrix
        o1, o2 = self.offset
        x1, x2 = float(x[0]), float(x[1])
        return np.array([o1 + m11 * x1 + m12 * x2, o2 + m21 * x1 + m22 * x2])


@dataclass(frozen=True)
class BekkArch:
    """Two-dimensional BEKK-ARCH(1) model with autoregressive term f.

    The volatility matrix is the PSD square root of
    b_mat + (a_mat @ x)(a_mat @ x)^T; b_mat must be symmetric positive
    semidefinite but is allowed to be singular.
    """

    f: Callable
    a_mat: tuple
    b_mat: tuple

    def __post_init__(self):
        object.__setattr__(self, "a_mat", _as_2x2(self.a_mat, "a_mat"))
        object.__setattr__(self, "b_mat", _as_2x2(self.b_mat, "b_mat"))
        b = np.asarray(self.b_mat)
        scale = 1.0 + frobenius_norm(b)
        if frobenius_norm(b - b.T) > 1e-10 * scale:
            raise ValueError("b_mat must be symmetric")
        w, _ = symmetric_eigh(b)
        if float(np.min(w)) < -1e-10 * scale:
            raise ValueError("b_mat must be positive semidefinite")

    @property
    def dim(self):
        return 2


def _in_c(x1, x2):
    # C is closed: its boundary belongs to the region.
    return x1 <= 0.0 and x2 <= 0.0


def _threshold_g_entries(model, x1, x2):
    """Row-major entries (g11, g12, g21, g22) of the threshold volatility."""
    d41, d42 = model.d_const
    if _in_c(x1, x2):
        d31, d32 = model.d_c
        return d31 * x1 + d41, 0.0, d32 * x2 + d42, 0.0
    ((d11, d12), (d21, d22)) = model.d_main
    return d11 * x1 + d41, d12 * x2, d21 * x1 + d42, d22 * x2


def eval_f(model, x):
    """Mean map f(x) as a length-dim array."""
    if isinstance(model, ThresholdAffine2D):
        a1, a2 = model.a
        ((b11, b12), (b21, b22)) = model.b_mat
        x1, x2 = float(x[0]), float(x[1])
        return np.array([a1 + b11 * x1 + b12 * x2, a2 + b21 * x1 + b22 * x2])
    if isinstance(model, BekkArch):
        out = np.asarray(model.f(x), dtype=float)
        return out
    if isinstance(model, GenericModel):
        out = np.asarray(model.f(x), dtype=float)
        if out.shape != (model.dim,) or not np.all(np.isfinite(out)):
            raise ValueError(f"model f produced a non-finite or misshaped value at x={x!r}")
        return out
    raise ValueError(f"unknown model spec {model!r}")


def eval_g(model, x):
    """Volatility matrix g(x) as a dim x dim array."""
    if isinstance(model, ThresholdAffine2D):
        g11, g12, g21, g22 = _threshold_g_entries(model, float(x[0]), float(x[1]))
        return np.array([[g11, g12], [g21, g22]])
    if isinstance(model, BekkArch):
        v = AffineMap(model.a_mat, (0.0, 0.0))(x)
        b = np.asarray(model.b_mat)
        return psd_sqrt(b + np.outer(v, v))
    if isinstance(model, GenericModel):
        out = np.asarray(model.g(x), dtype=float)
        if out.shape != (model.dim, model.dim) or not np.all(np.isfinite(out)):
            raise ValueError(f"model g produced a non-finite or misshaped value at x={x!r}")
        return out
    raise ValueError(f"unknown model spec {model!r}")


def step(model, x, u):
    """One transition: f(x) + g(x) @ u."""
    x = np.asarray(x, dtype=float)
    u = np.asarray(u, dtype=float)
    if x.shape != u.shape:
        raise ValueError("state and control dimensions differ")
    return eval_f(model, x) + eval_g(model, x) @ u


def iterate(model, x0, controls):
    """Fold `step` over the control sequence; empty controls return x0."""
    x = np.asarray(x0, dtype=float)
    for u in controls:
        x = step(model, x, u)
    return x


def _bekk_det_closed_form(b_mat, v1, v2):
    ((b11, b12), (_, b22)) = b_mat
    return b11 * v2 * v2 + b22 * v1 * v1 - 2.0 * b12 * v1 * v2


def g_determinant(model, x):
    """Determinant of the model's volatility structure at x.

    For BekkArch this is det(b_mat + (Ax)(Ax)^T), computed by the rank-one
    closed form when det(b_mat) vanishes within tolerance and by the direct
    2x2 determinant otherwise; the two paths agree where both apply.  For
    ThresholdAffine2D it is the determinant of g(x) itself.
    """
    if isinstance(model, ThresholdAffine2D):
        g11, g12, g21, g22 = _threshold_g_entries(model, float(x[0]), float(x[1]))
        return g11 * g22 - g12 * g21
    if isinstance(model, BekkArch):
        ((b11, b12), (b21, b22)) = model.b_mat
        det_b = b11 * b22 - b12 * b21
        ((a11, a12), (a21, a22)) = model.a_mat
        x1, x2 = float(x[0]), float(x[1])
        v1 = a11 * x1 + a12 * x2
        v2 = a21 * x1 + a22 * x2
        norm_sq = b11 * b11 + b12 * b12 + b21 * b21 + b22 * b22
        if abs(det_b) <= _DET_B_REL_TOL * (1.0 + norm_sq):
            return _bekk_det_closed_form(model.b_mat, v1, v2)
        m11 = b11 + v1 * v1
        m12 = b12 + v1 * v2
        m21 = b21 + v2 * v1
        m22 = b22 + v2 * v2
        return m11 * m22 - m12 * m21
    raise ValueError("g_determinant supports ThresholdAffine2D and BekkArch only")


def bekk_line_normal(a_mat, b_mat):
    """Degeneracy class of det(b_mat + (Ax)(Ax)^T) over x in R^2.

    Returns (kind, normal): kind is one of the Bekk region constants
    REGION_EVERYWHERE_REGULAR / REGION_EVERYWHERE_SINGULAR, or REGION_ON_L
    with `normal` = (c1, c2) such that the determinant vanishes exactly on
    the line {c1 x1 + c2 x2 = 0}.

    For rank-one b_mat = w w^T with w = (sqrt(b11), sigma sqrt(b22)) the
    determinant equals (c1 x1 + c2 x2)^2 where
    c1 = a11 sqrt(b22) - sigma a21 sqrt(b11),
    c2 = a12 sqrt(b22) - sigma a22 sqrt(b11),
    and sigma = sign(b12) resolves the rank-one factorization sign
    (sigma = +1 when b12 = 0).
    """
    b = np.asarray(b_mat, dtype=float)
    a = np.asarray(a_mat, dtype=float)
    scale = 1.0 + frobenius_norm(b)
    if frobenius_norm(b - b.T) > 1e-10 * scale:
        raise ValueError("b_mat must be symmetric")
    w, _ = symmetric_eigh(b)
    w_min, w_max = float(np.min(w)), float(np.max(w))
    tol_eig = 1e-10 * scale
    if w_min < -tol_eig:
        raise ValueError("b_mat must be positive semidefinite")
    if w_min > tol_eig:
        return REGION_EVERYWHERE_REGULAR, None
    if w_max <= tol_eig:
        # b_mat ~ 0: the volatility is the rank-one (Ax)(Ax)^T everywhere.
        return REGION_EVERYWHERE_SINGULAR, None
    b11 = max(float(b[0, 0]), 0.0)
    b22 = max(float(b[1, 1]), 0.0)
    sigma = -1.0 if b[0, 1] < 0.0 else 1.0
    r11 = math.sqrt(b11)
    r22 = math.sqrt(b22)
    c1 = a[0, 0] * r22 - sigma * a[1, 0] * r11
    c2 = a[0, 1] * r22 - sigma * a[1, 1] * r11
    tol_c = 1e-12 * (1.0 + frobenius_norm(a) * (r11 + r22))
    if abs(c1) <= tol_c and abs(c2) <= tol_c:
        return REGION_EVERYWHERE_SINGULAR, None
    return REGION_ON_L, (c1, c2)


def classify_region(model, x):
    """Total classification of the state for the two built-in families.

    ThresholdAffine2D: "C" (closed quadrant), "D1" ({x = 0, y > 0}),
    "D2" ({x > 0, y = 0}) or "complement_of_C".  BekkArch:
    "everywhere_regular" / "everywhere_singular" when the degeneracy class
    does not depend on x, else "on_L" / "off_L" with a scale-invariant
    membership test (so positive rescaling never changes the tag).
    """
    x1, x2 = float(x[0]), float(x[1])
    if isinstance(model, ThresholdAffine2D):
        if _in_c(x1, x2):
            return REGION_C
        if x1 == 0.0 and x2 > 0.0:
            return REGION_D1
        if x1 > 0.0 and x2 == 0.0:
            return REGION_D2
        return REGION_COMPLEMENT
    if isinstance(model, BekkArch):
        kind, normal = bekk_line_normal(model.a_mat, model.b_mat)
        if kind != REGION_ON_L:
            return kind
        c1, c2 = normal
        lhs = abs(c1 * x1 + c2 * x2)
        bound = 1e-9 * math.hypot(c1, c2) * math.hypot(x1, x2)
        return REGION_ON_L if lhs <= bound else REGION_OFF_L
    raise ValueError("classify_region supports ThresholdAffine2D and BekkArch only")
