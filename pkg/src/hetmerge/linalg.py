"""Dense linear-algebra helpers: products, pseudo-inverse, block diagonals,
and permutation utilities.

All public operations work on 2-D float64 arrays with finite entries and are
pure functions; arrays are never modified in place.
"""

from __future__ import annotations

import numpy as np

from .errors import ShapeError, ValidationError

DEFAULT_PINV_TOL = 1e-10


def as_matrix(a, name: str = "matrix") -> np.ndarray:
    """Coerce `a` to a C-contiguous float64 2-D array, rejecting NaN/Inf."""
    m = np.ascontiguousarray(a, dtype=np.float64)
    if m.ndim != 2:
        raise ValidationError(f"{name} must be 2-D, got ndim={m.ndim}")
    if not np.isfinite(m).all():
        raise ValidationError(f"{name} contains non-finite entries")
    return m


def as_vector(a, name: str = "vector") -> np.ndarray:
    """Coerce `a` to a contiguous float64 1-D array, rejecting NaN/Inf."""
    v = np.ascontiguousarray(a, dtype=np.float64)
    if v.ndim != 1:
        raise ValidationError(f"{name} must be 1-D, got ndim={v.ndim}")
    if not np.isfinite(v).all():
        raise ValidationError(f"{name} contains non-finite entries")
    return v


def matmul(a, b) -> np.ndarray:
    """Matrix product with an explicit shape check.

    Raises ShapeError naming both shapes when a.cols != b.rows.
    """
    a = as_matrix(a, "a")
    b = as_matrix(b, "b")
    if a.shape[1] != b.shape[0]:
        raise ShapeError(f"cannot multiply {a.shape} by {b.shape}")
    return a @ b


def pseudo_inverse(a, tol: float = DEFAULT_PINV_TOL) -> np.ndarray:
    """Moore-Penrose pseudo-inverse via SVD.

    `tol` is relative to the largest singular value; singular values below
    tol * s_max are treated as zero.
    """
    a = as_matrix(a, "a")
    if not tol > 0:
        raise ValidationError(f"tol must be positive, got {tol}")
    return np.linalg.pinv(a, rcond=tol)


def block_diag(a, b) -> np.ndarray:
    """Block-diagonal assembly: `a` top-left, `b` bottom-right, zeros elsewhere."""
    a = as_matrix(a, "a")
    b = as_matrix(b, "b")
    out = np.zeros((a.shape[0] + b.shape[0], a.shape[1] + b.shape[1]))
    out[: a.shape[0], : a.shape[1]] = a
    out[a.shape[0] :, a.shape[1] :] = b
    return out


def is_permutation(mapping) -> bool:
    """True when `mapping` is a bijection on {0..n-1}."""
    p = np.asarray(mapping)
    if p.ndim != 1 or p.size == 0:
        return False
    if not np.issubdtype(p.dtype, np.integer):
        return False
    return np.array_equal(np.sort(p), np.arange(p.size))


def check_permutation(mapping) -> np.ndarray:
    p = np.asarray(mapping, dtype=np.int64)
    if not is_permutation(p):
        raise ValidationError("mapping is not a permutation of 0..n-1")
    return p


def permutation_matrix(mapping) -> np.ndarray:
    """Expand an index permutation to its 0/1 matrix.

    Convention: (P @ v)[i] == v[mapping[i]], i.e. row i selects source index
    mapping[i].  P @ P.T == I exactly.
    """
    p = check_permutation(mapping)
    out = np.zeros((p.size, p.size))
    out[np.arange(p.size), p] = 1.0
    return out


def invert_permutation(mapping) -> np.ndarray:
    """Index form of the inverse permutation."""
    p = check_permutation(mapping)
    inv = np.empty_like(p)
    inv[p] = np.arange(p.size)
    return inv
