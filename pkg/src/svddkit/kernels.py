"""Gaussian kernel evaluation and dense kernel-matrix construction.

The Gaussian kernel used throughout the package is

    k(x, y) = exp(-||x - y||^2 / (2 s^2))

where ``s`` is the bandwidth. Squared distances are accumulated as
sum((x_d - y_d)^2) over coordinates rather than via the
||x||^2 + ||y||^2 - 2 x.y expansion; the direct form does not cancel
catastrophically at small distances, which matters in the small-bandwidth
regime.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

__all__ = [
    "KernelMatrix",
    "gaussian_kernel",
    "kernel_matrix",
    "pairwise_sq_dists",
    "cross_kernel",
    "kernel_row",
]

# Row-chunk size for pairwise distance assembly; bounds the (chunk, n, m)
# workspace while keeping numpy calls coarse.
_CHUNK_ROWS = 512


@dataclass(frozen=True)
class KernelMatrix:
    """Dense Gaussian kernel matrix with its bandwidth.

    Invariants: symmetric, unit diagonal, entries in (0, 1], positive
    semidefinite.
    """

    values: np.ndarray
    bandwidth: float

    @property
    def n(self) -> int:
        return self.values.shape[0]


def _check_bandwidth(s: float) -> float:
    s = float(s)
    if not np.isfinite(s) or s <= 0.0:
        raise ValueError(f"bandwidth must be a finite positive real, got {s}")
    return s


def gaussian_kernel(x, y, bandwidth: float) -> float:
    """Evaluate the Gaussian kernel between two vectors.

    Raises ValueError on dimension mismatch or non-positive bandwidth.
    """
    s = _check_bandwidth(bandwidth)
    x = np.asarray(x, dtype=np.float64)
    y = np.asarray(y, dtype=np.float64)
    if x.shape != y.shape:
        raise ValueError(f"dimension mismatch: {x.shape} vs {y.shape}")
    d2 = float(np.sum((x - y) ** 2))
    return float(np.exp(-d2 / (2.0 * s * s)))


def pairwise_sq_dists(points: np.ndarray) -> np.ndarray:
    """All-pairs squared Euclidean distances, computed by direct differences.

    Exactly symmetric bitwise: (a-b)^2 and (b-a)^2 are identical floats and
    the coordinate sums run in the same order for both triangles.
    """
    pts = np.ascontiguousarray(points, dtype=np.float64)
    n = pts.shape[0]
    d2 = np.empty((n, n), dtype=np.float64)
    for lo in range(0, n, _CHUNK_ROWS):
        hi = min(lo + _CHUNK_ROWS, n)
        diff = pts[lo:hi, None, :] - pts[None, :, :]
        np.sum(diff * diff, axis=2, out=d2[lo:hi])
    return d2


def sq_dists_to_point(points: np.ndarray, z: np.ndarray) -> np.ndarray:
    """Squared distances from every row of ``points`` to the vector ``z``."""
    diff = points - z[None, :]
    return np.sum(diff * diff, axis=1)


def kernel_row(points: np.ndarray, i: int, bandwidth: float) -> np.ndarray:
    """Row i of the kernel matrix of ``points``, without forming the matrix."""
    d2 = sq_dists_to_point(points, points[i])
    return np.exp(d2 / (-2.0 * bandwidth * bandwidth))


def cross_kernel(a: np.ndarray, b: np.ndarray, bandwidth: float) -> np.ndarray:
    """Kernel values between every row of ``a`` and every row of ``b``.

    Returns an (n_a, n_b) array. Rows of ``a`` are processed in chunks so the
    intermediate difference tensor stays bounded.
    """
    s = _check_bandwidth(bandwidth)
    a = np.asarray(a, dtype=np.float64)
    b = np.asarray(b, dtype=np.float64)
    if a.shape[1] != b.shape[1]:
        raise ValueError(f"dimension mismatch: {a.shape[1]} vs {b.shape[1]}")
    out = np.empty((a.shape[0], b.shape[0]), dtype=np.float64)
    inv = -1.0 / (2.0 * s * s)
    for lo in range(0, a.shape[0], _CHUNK_ROWS):
        hi = min(lo + _CHUNK_ROWS, a.shape[0])
        diff = a[lo:hi, None, :] - b[None, :, :]
        np.exp(np.sum(diff * diff, axis=2) * inv, out=out[lo:hi])
    return out


def kernel_matrix(data, bandwidth: float) -> KernelMatrix:
    """Gaussian kernel matrix of a dataset (or raw point array).

    The upper triangle is computed and mirrored so the result is exactly
    symmetric regardless of floating-point summation order.
    """
    s = _check_bandwidth(bandwidth)
    pts = data.points if hasattr(data, "points") else np.asarray(data, dtype=np.float64)
    if pts.ndim != 2 or pts.shape[0] < 1:
        raise ValueError("kernel_matrix needs a nonempty n x m point array")
    d2 = pairwise_sq_dists(pts)
    k = np.exp(d2 * (-1.0 / (2.0 * s * s)))
    # Mirror the upper triangle and pin the diagonal at exactly 1.
    k = np.triu(k, 1)
    k = k + k.T
    np.fill_diagonal(k, 1.0)
    return KernelMatrix(values=k, bandwidth=s)
