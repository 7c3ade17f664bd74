"""Sigmoid approximation of the prototype-NN error rate and its gradients.

For a sample x with nearest same-class prototype a and nearest
different-class prototype b:

    R(x) = d_a(x) / d_b(x),    J = mean_x S_beta(R(x)),
    S_beta(z) = 1 / (1 + exp(beta (1 - z))).

R < 1 exactly when the prototype-NN rule labels x correctly, so for large
beta J approaches the training error rate.
"""

from dataclasses import dataclass

import numpy as np
from scipy.special import expit

from .config import LossConfig
from .data import Dataset
from .metric_core import PrototypeSet, distance_matrix, distances_to_all, nearest_by_label


def sigmoid(z, beta: float):
    """S_beta(z); saturates without overflow. Accepts scalars or arrays."""
    s = expit(beta * (np.asarray(z, dtype=float) - 1.0))
    return float(s) if np.ndim(s) == 0 else s


def sigmoid_derivative(z, beta: float):
    """beta * S(z) * (1 - S(z)), with 1 - S evaluated directly to keep precision."""
    t = beta * (np.asarray(z, dtype=float) - 1.0)
    ds = beta * expit(t) * expit(-t)
    return float(ds) if np.ndim(ds) == 0 else ds


@dataclass(frozen=True)
class RatioRecord:
    same_index: int
    diff_index: int
    d_same: float
    d_diff: float
    value: float


@dataclass(frozen=True, eq=False)
class SampleGradients:
    """Gradients of S_beta(R(x)) w.r.t. the four parameters one sample touches."""

    grad_factor_same: np.ndarray
    grad_factor_diff: np.ndarray
    grad_proto_same: np.ndarray
    grad_proto_diff: np.ndarray
    ratio: float
    same_index: int
    diff_index: int

    def blocks(self) -> dict[str, np.ndarray]:
        return {
            "factor_same": self.grad_factor_same,
            "factor_diff": self.grad_factor_diff,
            "proto_same": self.grad_proto_same,
            "proto_diff": self.grad_proto_diff,
        }

    def max_abs(self) -> float:
        return max(float(np.max(np.abs(g))) for g in self.blocks().values())


def ratio(x: np.ndarray, label: int, ps: PrototypeSet, cfg: LossConfig) -> RatioRecord:
    """Nearest same/different-class prototypes and R = d_same / max(d_diff, floor)."""
    x = ps.check_point(x)
    distances = distances_to_all(x, ps)
    same_index, d_same = nearest_by_label(x, label, ps, same=True, distances=distances)
    diff_index, d_diff = nearest_by_label(x, label, ps, same=False, distances=distances)
    return RatioRecord(
        same_index=same_index,
        diff_index=diff_index,
        d_same=d_same,
        d_diff=d_diff,
        value=d_same / max(d_diff, cfg.denom_floor),
    )


def ratios(ds: Dataset, ps: PrototypeSet, cfg: LossConfig) -> np.ndarray:
    """R(x) for every point of ds, vectorized."""
    ps.check_coverage(ds.class_count)
    distances = distance_matrix(ds.features, ps)
    same = ds.labels[:, np.newaxis] == ps.labels[np.newaxis, :]
    d_same = np.where(same, distances, np.inf).min(axis=1)
    d_diff = np.where(~same, distances, np.inf).min(axis=1)
    return d_same / np.maximum(d_diff, cfg.denom_floor)


def objective(ds: Dataset, ps: PrototypeSet, cfg: LossConfig) -> float:
    """J = (1/M) sum_i S_beta(R(x_i)), a value in [0, 1]."""
    return float(np.mean(sigmoid(ratios(ds, ps, cfg), cfg.beta)))


def sample_gradients(x: np.ndarray, label: int, ps: PrototypeSet, cfg: LossConfig) -> SampleGradients:
    """Analytic gradients of S_beta(R(x)) for the current nearest-prototype assignment.

    With u = x - p_same, v = x - p_diff, D = max(d_diff, floor) and
    g = S'_beta(R):

        dW~same = (2g / D) u u^T W~same
        dW~diff = -(2gR / D) v v^T W~diff
        dp_same = -(2g / D) W~same W~same^T u
        dp_diff = (2gR / D) W~diff W~diff^T v
    """
    record = ratio(x, label, ps, cfg)
    return gradients_for_assignment(x, ps, cfg, record.same_index, record.diff_index)


def gradients_for_assignment(
    x: np.ndarray, ps: PrototypeSet, cfg: LossConfig, same_index: int, diff_index: int
) -> SampleGradients:
    """Gradients with the same/different-class prototypes held fixed."""
    w_same = ps.factors[same_index]
    w_diff = ps.factors[diff_index]
    u = x - ps.positions[:, same_index]
    v = x - ps.positions[:, diff_index]
    proj_u = w_same.T @ u
    proj_v = w_diff.T @ v
    d_same = float(proj_u @ proj_u)
    denom = max(float(proj_v @ proj_v), cfg.denom_floor)
    r = d_same / denom
    g = float(sigmoid_derivative(r, cfg.beta))

    scale_same = 2.0 * g / denom
    scale_diff = 2.0 * g * r / denom
    return SampleGradients(
        grad_factor_same=scale_same * np.outer(u, proj_u),
        grad_factor_diff=-scale_diff * np.outer(v, proj_v),
        grad_proto_same=-scale_same * (w_same @ proj_u),
        grad_proto_diff=scale_diff * (w_diff @ proj_v),
        ratio=r,
        same_index=same_index,
        diff_index=diff_index,
    )
