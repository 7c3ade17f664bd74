"""Per-prototype low-rank metrics, distances and nearest-prototype queries.

Every prototype s carries a factor W~s of shape d x p; its metric is
Ws = W~s W~s^T, so distances are computed as ||W~s^T (x - ps)||^2 without
ever forming Ws.
"""

from dataclasses import dataclass
from typing import Optional, Sequence

import numpy as np

from .errors import CoverageError, DataError

# Points per block in distance_matrix
_CHUNK = 256


@dataclass(frozen=True, eq=False)
class FactorMetric:
    """Factor W~ of one prototype's PSD metric W = W~ W~^T."""

    factor: np.ndarray

    def __post_init__(self):
        factor = np.asarray(self.factor, dtype=float)
        if factor.ndim != 2:
            raise DataError("factor must be a d x p matrix")
        if not 1 <= factor.shape[1] <= factor.shape[0]:
            raise DataError(f"rank {factor.shape[1]} outside 1..{factor.shape[0]}")
        if not np.all(np.isfinite(factor)):
            raise DataError("factor has non-finite entries")
        object.__setattr__(self, "factor", factor)

    @property
    def rank(self) -> int:
        return self.factor.shape[1]

    def matrix(self) -> np.ndarray:
        """The full d x d metric. Only for inspection."""
        return self.factor @ self.factor.T


class PrototypeSet:
    """S labeled prototypes, each paired with its own factor metric.

    positions is d x S (columns are prototypes) and factors is stored as one
    S x d x p array; the trainer mutates both in place.
    """

    def __init__(self, positions: np.ndarray, labels: np.ndarray, factors: np.ndarray):
        positions = np.array(positions, dtype=float)
        labels = np.array(labels, dtype=int)
        factors = np.array(factors, dtype=float)
        if positions.ndim != 2:
            raise DataError("positions must be a d x S matrix")
        d, s = positions.shape
        if labels.shape != (s,):
            raise DataError(f"expected {s} prototype labels, got shape {labels.shape}")
        if factors.ndim != 3 or factors.shape[:2] != (s, d):
            raise DataError(f"factors must have shape ({s}, {d}, p), got {factors.shape}")
        if not 1 <= factors.shape[2] <= d:
            raise DataError(f"rank {factors.shape[2]} outside 1..{d}")
        self.positions = positions
        self.labels = labels
        self.factors = factors

    @classmethod
    def from_metrics(
        cls, positions: np.ndarray, labels: Sequence[int], metrics: Sequence[FactorMetric]
    ) -> "PrototypeSet":
        ranks = {m.rank for m in metrics}
        if len(ranks) > 1:
            raise DataError(f"all metrics must share one rank, got {sorted(ranks)}")
        return cls(positions, np.asarray(labels), np.stack([m.factor for m in metrics]))

    @property
    def dim(self) -> int:
        return self.positions.shape[0]

    @property
    def size(self) -> int:
        return self.positions.shape[1]

    @property
    def rank(self) -> int:
        return self.factors.shape[2]

    @property
    def metrics(self) -> list[FactorMetric]:
        return [FactorMetric(self.factors[s]) for s in range(self.size)]

    def copy(self) -> "PrototypeSet":
        return PrototypeSet(self.positions, self.labels, self.factors)

    def check_coverage(self, class_count: int):
        missing = sorted(set(range(1, class_count + 1)) - set(self.labels.tolist()))
        if missing:
            raise CoverageError(f"classes without prototypes: {missing}")

    def check_index(self, proto_index: int):
        if not 0 <= proto_index < self.size:
            raise IndexError(f"prototype index {proto_index} outside 0..{self.size - 1}")

    def check_point(self, x: np.ndarray) -> np.ndarray:
        x = np.asarray(x, dtype=float)
        if x.shape != (self.dim,):
            raise DataError(f"expected a point of dimension {self.dim}, got shape {x.shape}")
        return x


def squared_distance(x: np.ndarray, proto_index: int, ps: PrototypeSet) -> float:
    """(x - ps)^T W~s W~s^T (x - ps), evaluated in factored form."""
    z = project(x, proto_index, ps)
    return float(z @ z)


def project(x: np.ndarray, proto_index: int, ps: PrototypeSet) -> np.ndarray:
    """W~s^T (x - ps): the point seen through prototype s's metric."""
    x = ps.check_point(x)
    ps.check_index(proto_index)
    return ps.factors[proto_index].T @ (x - ps.positions[:, proto_index])


def distances_to_all(x: np.ndarray, ps: PrototypeSet) -> np.ndarray:
    """Squared distance from one point to every prototype, each under its own metric."""
    diff = x[:, np.newaxis] - ps.positions
    proj = np.einsum("sdp,ds->sp", ps.factors, diff)
    return np.einsum("sp,sp->s", proj, proj)


def distance_matrix(points: np.ndarray, ps: PrototypeSet) -> np.ndarray:
    """N x S squared distances between the columns of points and all prototypes."""
    points = np.asarray(points, dtype=float)
    if points.ndim != 2 or points.shape[0] != ps.dim:
        raise DataError(f"expected points of shape ({ps.dim}, N), got {points.shape}")
    out = np.empty((points.shape[1], ps.size))
    for start in range(0, points.shape[1], _CHUNK):
        block = points[:, start:start + _CHUNK]
        diff = block[:, :, np.newaxis] - ps.positions[:, np.newaxis, :]
        proj = np.einsum("sdp,dns->nsp", ps.factors, diff)
        out[start:start + block.shape[1]] = np.einsum("nsp,nsp->ns", proj, proj)
    return out


def nearest_prototypes(points: np.ndarray, ps: PrototypeSet) -> np.ndarray:
    """Index of the nearest prototype for every column of points; ties go to the lowest index."""
    return np.argmin(distance_matrix(points, ps), axis=1)


def nearest_by_label(
    x: np.ndarray, label: int, ps: PrototypeSet, same: bool, distances: Optional[np.ndarray] = None
) -> tuple[int, float]:
    """Nearest prototype with (same=True) or without the given label."""
    if distances is None:
        distances = distances_to_all(ps.check_point(x), ps)
    mask = ps.labels == label if same else ps.labels != label
    if not mask.any():
        kind = "same-class" if same else "different-class"
        raise CoverageError(f"no {kind} prototype for label {label}")
    masked = np.where(mask, distances, np.inf)
    index = int(np.argmin(masked))
    return index, float(distances[index])


def nearest_same_class(x: np.ndarray, label: int, ps: PrototypeSet) -> tuple[int, float]:
    """Nearest prototype carrying label, as (index, squared distance)."""
    return nearest_by_label(x, label, ps, same=True)


def nearest_diff_class(x: np.ndarray, label: int, ps: PrototypeSet) -> tuple[int, float]:
    """Nearest prototype not carrying label, as (index, squared distance)."""
    return nearest_by_label(x, label, ps, same=False)
