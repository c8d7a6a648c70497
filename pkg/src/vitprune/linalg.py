"""Dense real-matrix kernels used by every other module.

All computation is in float64 regardless of storage precision, so results do
not depend on accumulation order at the tolerances the rest of the package
asserts. Everything here is a pure function of its inputs.
"""

from __future__ import annotations

import numpy as np
from scipy.special import erf

from .errors import InputError

_SQRT2 = np.sqrt(2.0)


def as_matrix(a) -> np.ndarray:
    """Coerce to a 2-D float64 array without copying when possible."""
    m = np.asarray(a, dtype=np.float64)
    if m.ndim != 2:
        raise InputError(f"expected a 2-D matrix, got ndim={m.ndim}")
    return m


def matmul(a, b) -> np.ndarray:
    """Matrix product with an explicit inner-dimension check."""
    a = as_matrix(a)
    b = as_matrix(b)
    if a.shape[1] != b.shape[0]:
        raise InputError(f"matmul dimension mismatch: {a.shape} x {b.shape}")
    return a @ b


def row_softmax(a) -> np.ndarray:
    """Softmax over each row, stabilized by per-row max subtraction."""
    a = as_matrix(a)
    shifted = a - a.max(axis=1, keepdims=True)
    e = np.exp(shifted)
    return e / e.sum(axis=1, keepdims=True)


def layer_norm(a, gamma, beta, eps: float = 1e-6) -> np.ndarray:
    """Per-row normalization (biased variance) followed by affine scale/shift."""
    a = as_matrix(a)
    gamma = np.asarray(gamma, dtype=np.float64)
    beta = np.asarray(beta, dtype=np.float64)
    if gamma.shape != (a.shape[1],) or beta.shape != (a.shape[1],):
        raise InputError(
            f"gamma/beta must have length {a.shape[1]}, "
            f"got {gamma.shape} and {beta.shape}"
        )
    if eps <= 0:
        raise InputError("eps must be positive")
    mean = a.mean(axis=1, keepdims=True)
    var = a.var(axis=1, keepdims=True)  # biased, matching inference-time LN
    return (a - mean) / np.sqrt(var + eps) * gamma + beta


def gelu(x):
    """Exact Gaussian-error-function GELU, x * Phi(x); elementwise on arrays."""
    x = np.asarray(x, dtype=np.float64)
    return x * 0.5 * (1.0 + erf(x / _SQRT2))


def pairwise_sqdist(a) -> np.ndarray:
    """Squared Euclidean distances between rows.

    The result is exactly symmetric with an exactly zero diagonal; tiny
    negative values from cancellation are clamped to zero.
    """
    a = as_matrix(a)
    g = a @ a.T
    g = (g + g.T) * 0.5  # force bitwise symmetry before broadcasting
    sq = np.diag(g)
    d2 = sq[:, None] + sq[None, :] - 2.0 * g
    np.maximum(d2, 0.0, out=d2)
    np.fill_diagonal(d2, 0.0)
    return d2


def cosine_similarity(u, v) -> float:
    """Cosine of the angle between two vectors, clipped into [-1, 1]."""
    u = np.asarray(u, dtype=np.float64).ravel()
    v = np.asarray(v, dtype=np.float64).ravel()
    nu = np.linalg.norm(u)
    nv = np.linalg.norm(v)
    if nu == 0.0 or nv == 0.0:
        raise InputError("cosine similarity is undefined for a zero-norm vector")
    return float(np.clip(np.dot(u, v) / (nu * nv), -1.0, 1.0))


def column_median(a) -> np.ndarray:
    """Per-column median; for an even row count, the midpoint of the two
    central values (any point between them is l1-optimal, the midpoint is
    deterministic)."""
    a = as_matrix(a)
    if a.shape[0] == 0:
        raise InputError("column_median of an empty matrix")
    return np.median(a, axis=0)
