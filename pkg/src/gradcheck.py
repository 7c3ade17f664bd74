"""Central-difference verification of the analytic sample gradients."""

import logging
from dataclasses import dataclass, field
from typing import Callable

import numpy as np

from .config import LossConfig
from .metric_core import PrototypeSet
from .objective import SampleGradients, ratio, sample_gradients, sigmoid

logger = logging.getLogger(__name__)

GradientFunction = Callable[[np.ndarray, int, PrototypeSet, LossConfig], SampleGradients]

BLOCKS = ("factor_same", "factor_diff", "proto_same", "proto_diff")
RATIO_WINDOW = (0.5, 2.0)


@dataclass
class GradCheckResult:
    max_rel_error: float
    per_block: dict[str, float]
    trials: int
    tolerance: float
    worst_trial: int = -1
    ratios: list[float] = field(default_factory=list)
    ratio_window: tuple[float, float] = RATIO_WINDOW

    @property
    def passed(self) -> bool:
        return self.max_rel_error <= self.tolerance

    @property
    def out_of_window(self) -> int:
        """Trials whose ratio fell outside ratio_window after every redraw."""
        low, high = self.ratio_window
        return sum(1 for r in self.ratios if not low <= r <= high)

    def to_dict(self) -> dict:
        return {
            "max_rel_error": self.max_rel_error,
            "per_block": self.per_block,
            "trials": self.trials,
            "tolerance": self.tolerance,
            "worst_trial": self.worst_trial,
            "ratio_window": list(self.ratio_window),
            "ratio_range": [min(self.ratios), max(self.ratios)] if self.ratios else None,
            "out_of_window": self.out_of_window,
            "passed": self.passed,
        }


def loss_at(x: np.ndarray, ps: PrototypeSet, cfg: LossConfig, same_index: int, diff_index: int) -> float:
    """S_beta(R(x)) with the nearest-prototype assignment frozen."""
    zs = ps.factors[same_index].T @ (x - ps.positions[:, same_index])
    zd = ps.factors[diff_index].T @ (x - ps.positions[:, diff_index])
    return sigmoid(float(zs @ zs) / max(float(zd @ zd), cfg.denom_floor), cfg.beta)


def finite_difference_gradients(
    x: np.ndarray, ps: PrototypeSet, cfg: LossConfig, same_index: int, diff_index: int, h: float = 1e-5
) -> dict[str, np.ndarray]:
    """Centered differences of loss_at for the four parameter blocks."""
    targets = {
        "factor_same": ps.factors[same_index],
        "factor_diff": ps.factors[diff_index],
        "proto_same": ps.positions[:, same_index],
        "proto_diff": ps.positions[:, diff_index],
    }
    grads = {}
    for name, param in targets.items():
        grad = np.zeros(param.shape)
        for idx in np.ndindex(param.shape):
            original = param[idx]
            param[idx] = original + h
            f_plus = loss_at(x, ps, cfg, same_index, diff_index)
            param[idx] = original - h
            f_minus = loss_at(x, ps, cfg, same_index, diff_index)
            param[idx] = original
            grad[idx] = (f_plus - f_minus) / (2 * h)
        grads[name] = grad
    return grads


def relative_error(analytic: np.ndarray, numeric: np.ndarray) -> float:
    """||a - n|| / ||a + n||, zero when both vanish."""
    denom = np.linalg.norm(analytic + numeric)
    diff = np.linalg.norm(analytic - numeric)
    if denom == 0.0:
        return 0.0 if diff == 0.0 else np.inf
    return float(diff / denom)


def random_instance(
    rng: np.random.Generator, dim: int, rank: int, prototypes: int, cfg: LossConfig,
    ratio_window: tuple[float, float] = RATIO_WINDOW, attempts: int = 1000,
) -> tuple[np.ndarray, int, PrototypeSet]:
    """A random (x, label, prototype set) whose ratio falls inside ratio_window.

    Outside the window the sigmoid derivative is tiny and relative errors
    are dominated by rounding.
    """
    labels = np.arange(prototypes) % 2 + 1
    for _ in range(attempts):
        positions = rng.standard_normal((dim, prototypes))
        factors = rng.standard_normal((prototypes, dim, rank)) / np.sqrt(dim)
        ps = PrototypeSet(positions, labels, factors)
        x = rng.standard_normal(dim)
        label = int(rng.integers(1, 3))
        r = ratio(x, label, ps, cfg).value
        if ratio_window[0] <= r <= ratio_window[1]:
            return x, label, ps
    logger.warning(f"No instance with ratio in {ratio_window} after {attempts} draws; using R={r:.3g}")
    return x, label, ps


def check_gradients(
    dim: int = 5,
    rank: int = 3,
    prototypes: int = 4,
    trials: int = 200,
    beta: float = 10.0,
    seed: int = 0,
    tolerance: float = 1e-4,
    h: float = 1e-5,
    gradient_fn: GradientFunction = sample_gradients,
    ratio_window: tuple[float, float] = RATIO_WINDOW,
) -> GradCheckResult:
    """Compare gradient_fn with central differences on random instances.

    Instances are redrawn until their ratio lies in ratio_window; the result
    records the window and every sampled ratio.
    """
    cfg = LossConfig(beta=beta)
    rng = np.random.default_rng(seed)
    per_block = {name: 0.0 for name in BLOCKS}
    worst, worst_trial = 0.0, -1
    ratios = []
    for trial in range(trials):
        x, label, ps = random_instance(rng, dim, rank, prototypes, cfg, ratio_window)
        analytic = gradient_fn(x, label, ps, cfg)
        numeric = finite_difference_gradients(x, ps, cfg, analytic.same_index, analytic.diff_index, h)
        ratios.append(analytic.ratio)
        for name, grad in analytic.blocks().items():
            err = relative_error(grad, numeric[name])
            per_block[name] = max(per_block[name], err)
            if err > worst:
                worst, worst_trial = err, trial
    logger.info(f"Gradient check over {trials} trials: max relative error {worst:.3e}")
    return GradCheckResult(worst, per_block, trials, tolerance, worst_trial, ratios, tuple(ratio_window))
