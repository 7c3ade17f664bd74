"""Kernels and kernel coordinates.

A point x is represented by K_x, the vector of kernel evaluations between x
and a fixed set of reference points. The kernelized distance
(K_x - K_s)^T B B^T (K_x - K_s) then has exactly the form of the linear
factored distance, so kernel-mode training reuses the linear machinery on
kernel coordinates with B in place of W~.
"""

from dataclasses import dataclass

import numpy as np
from scipy.spatial.distance import cdist

from .config import KernelKind
from .errors import ConfigError, DataError


@dataclass(frozen=True, eq=False)
class KernelDescriptor:
    """A kernel together with the reference points that define coordinates."""

    kind: KernelKind
    reference_points: np.ndarray  # d x M_ref
    sigma: float = 1.0

    def __post_init__(self):
        object.__setattr__(self, "kind", KernelKind(self.kind))
        ref = np.asarray(self.reference_points, dtype=float)
        if ref.ndim != 2 or ref.shape[1] == 0:
            raise ConfigError("reference_points must be a non-empty d x M_ref matrix")
        if not np.all(np.isfinite(ref)):
            raise ConfigError("reference_points contain non-finite values")
        if self.kind == KernelKind.RBF and not self.sigma > 0:
            raise ConfigError(f"rbf sigma must be positive, got {self.sigma}")
        object.__setattr__(self, "reference_points", ref)

    @property
    def input_dim(self) -> int:
        return self.reference_points.shape[0]

    @property
    def size(self) -> int:
        return self.reference_points.shape[1]

    def gram(self, left: np.ndarray, right: np.ndarray) -> np.ndarray:
        """Kernel matrix between the columns of left and right."""
        if self.kind == KernelKind.LINEAR:
            return left.T @ right
        sq = cdist(left.T, right.T, metric="sqeuclidean")
        return np.exp(-sq / (2.0 * self.sigma ** 2))


@dataclass(frozen=True, eq=False)
class KernelCoordinates:
    """M_ref x N matrix whose column j holds the kernel coordinates of point j."""

    coords: np.ndarray


def kernel_eval(a: np.ndarray, b: np.ndarray, kd: KernelDescriptor) -> float:
    """k(a, b): a^T b for linear, exp(-||a - b||^2 / (2 sigma^2)) for rbf."""
    a = np.asarray(a, dtype=float)
    b = np.asarray(b, dtype=float)
    if kd.kind == KernelKind.LINEAR:
        return float(a @ b)
    diff = a - b
    return float(np.exp(-(diff @ diff) / (2.0 * kd.sigma ** 2)))


def to_kernel_coordinates(points: np.ndarray, kd: KernelDescriptor) -> KernelCoordinates:
    """Entry (r, j) is k(reference_r, point_j)."""
    points = np.asarray(points, dtype=float)
    if points.ndim == 1:
        points = points[:, np.newaxis]
    if points.shape[0] != kd.input_dim:
        raise DataError(f"expected points of dimension {kd.input_dim}, got {points.shape[0]}")
    return KernelCoordinates(kd.gram(kd.reference_points, points))


def kernelized_distance(k_x: np.ndarray, k_p: np.ndarray, factor_b: np.ndarray) -> float:
    """||B^T (K_x - K_p)||^2."""
    k_x = np.asarray(k_x, dtype=float)
    k_p = np.asarray(k_p, dtype=float)
    factor_b = np.asarray(factor_b, dtype=float)
    if k_x.shape != k_p.shape or factor_b.ndim != 2 or factor_b.shape[0] != k_x.shape[0]:
        raise DataError(
            f"dimension mismatch: k_x {k_x.shape}, k_p {k_p.shape}, B {factor_b.shape}"
        )
    z = factor_b.T @ (k_x - k_p)
    return float(z @ z)
