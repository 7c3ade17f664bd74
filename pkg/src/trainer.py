"""Joint learning of prototype positions and their local metrics.

Each epoch visits the training points in a seeded random order. For every
point the nearest same-class and different-class prototypes are found, the
four gradients of S_beta(R(x)) are computed, and each of the four touched
tensors (two factors, two prototype columns) takes one Adadelta step.
After the epoch J is recomputed; training stops when J changes by at most
epsilon_converge or max_epochs is reached.
"""

import logging
from dataclasses import dataclass, field
from typing import Callable, Optional

import numpy as np
from pydantic import BaseModel

from .config import LossConfig, Mode, TrainConfig
from .data import Dataset, ScalingRecord, standardize
from .errors import ConfigError, DataError, TrainingAborted
from .kernel import KernelDescriptor, to_kernel_coordinates
from .metric_core import PrototypeSet, nearest_prototypes
from .objective import objective, sample_gradients

logger = logging.getLogger(__name__)


@dataclass(eq=False)
class AdadeltaState:
    """Decaying averages of squared gradients and squared updates for one tensor."""

    avg_sq_grad: np.ndarray
    avg_sq_update: np.ndarray
    rho: float = 0.95
    eps_ada: float = 1e-6

    @classmethod
    def for_parameter(cls, param: np.ndarray, rho: float = 0.95, eps_ada: float = 1e-6) -> "AdadeltaState":
        return cls(np.zeros_like(param, dtype=float), np.zeros_like(param, dtype=float), rho, eps_ada)


def adadelta_step(state: AdadeltaState, grad: np.ndarray) -> np.ndarray:
    """Advance state by one gradient and return the update to add to the parameter."""
    grad = np.asarray(grad, dtype=float)
    if grad.shape != state.avg_sq_grad.shape:
        raise DataError(f"gradient shape {grad.shape} does not match state {state.avg_sq_grad.shape}")
    if not np.all(np.isfinite(grad)):
        raise TrainingAborted("non-finite gradient")
    rho, eps = state.rho, state.eps_ada
    state.avg_sq_grad *= rho
    state.avg_sq_grad += (1.0 - rho) * grad * grad
    delta = -np.sqrt(state.avg_sq_update + eps) / np.sqrt(state.avg_sq_grad + eps) * grad
    state.avg_sq_update *= rho
    state.avg_sq_update += (1.0 - rho) * delta * delta
    return delta


class TrainingSummary(BaseModel):
    """What happened during one training run."""

    initial_objective: float
    final_objective: float
    objective_history: list[float]
    epochs: int
    best_epoch: int
    converged: bool
    initial_accuracy: float
    final_accuracy: float


@dataclass(eq=False)
class Model:
    """A trained prototype set plus everything needed to map raw points into its space."""

    prototype_set: PrototypeSet
    mode: Mode
    beta: float
    scaling: ScalingRecord
    summary: TrainingSummary
    kernel: Optional[KernelDescriptor] = None
    class_names: Optional[list[str]] = None
    feature_names: Optional[list[str]] = None
    categories: dict[str, list[str]] = field(default_factory=dict)

    def __post_init__(self):
        self.mode = Mode(self.mode)
        if self.mode == Mode.KERNEL and self.kernel is None:
            raise ConfigError("kernel-mode model needs a kernel descriptor")

    @property
    def input_dim(self) -> int:
        return self.scaling.mean.shape[0]

    def transform(self, points: np.ndarray) -> np.ndarray:
        """Raw d x N points to model space (standardized, then kernel coordinates in kernel mode)."""
        points = np.asarray(points, dtype=float)
        if points.ndim == 1:
            points = points[:, np.newaxis]
        scaled = self.scaling.transform(points)
        if self.kernel is not None:
            return to_kernel_coordinates(scaled, self.kernel).coords
        return scaled

    def nearest(self, points: np.ndarray) -> np.ndarray:
        return nearest_prototypes(self.transform(points), self.prototype_set)

    def predict_many(self, points: np.ndarray) -> np.ndarray:
        return self.prototype_set.labels[self.nearest(points)]


def initialize(ds: Dataset, cfg: TrainConfig, rng: Optional[np.random.Generator] = None) -> PrototypeSet:
    """Sample prototypes_per_class points per class; factors start near the truncated identity."""
    rng = rng if rng is not None else np.random.default_rng(cfg.seed)
    ds.check_coverage()
    sizes = ds.class_sizes()
    small = [k + 1 for k, n in enumerate(sizes) if n < cfg.prototypes_per_class]
    if small:
        raise DataError(
            f"classes {small} have fewer than {cfg.prototypes_per_class} members"
        )
    total = cfg.prototypes_per_class * ds.class_count
    if total == ds.size:
        logger.warning(f"Every one of the {ds.size} training points is a prototype")
    rank = cfg.resolved_rank(ds.dim)

    chosen = []
    for k in range(1, ds.class_count + 1):
        members = np.flatnonzero(ds.labels == k)
        chosen.extend(rng.choice(members, size=cfg.prototypes_per_class, replace=False))
    chosen = np.asarray(chosen, dtype=int)

    base = np.eye(ds.dim)[:, :rank]
    factors = base[np.newaxis, :, :] + cfg.init_noise * rng.standard_normal((total, ds.dim, rank))
    return PrototypeSet(ds.features[:, chosen], ds.labels[chosen], factors)


def training_accuracy(ds: Dataset, ps: PrototypeSet) -> float:
    """Fraction of ds labeled correctly by the prototype-NN rule."""
    predicted = ps.labels[nearest_prototypes(ds.features, ps)]
    return float(np.mean(predicted == ds.labels))


def visit_sample(
    ps: PrototypeSet,
    x: np.ndarray,
    label: int,
    loss: LossConfig,
    step: Callable[[str, int, np.ndarray, np.ndarray], np.ndarray],
) -> bool:
    """One inner-loop visit: update the two factors and two prototypes nearest to x.

    step(kind, index, param, grad) returns the update for one tensor. Returns
    False when every gradient underflowed to zero and nothing was touched.
    """
    grads = sample_gradients(x, label, ps, loss)
    if grads.max_abs() == 0.0:
        return False
    a, b = grads.same_index, grads.diff_index
    d_wa = step("factor", a, ps.factors[a], grads.grad_factor_same)
    d_wb = step("factor", b, ps.factors[b], grads.grad_factor_diff)
    d_pa = step("proto", a, ps.positions[:, a], grads.grad_proto_same)
    d_pb = step("proto", b, ps.positions[:, b], grads.grad_proto_diff)
    ps.factors[a] += d_wa
    ps.factors[b] += d_wb
    ps.positions[:, a] += d_pa
    ps.positions[:, b] += d_pb
    touched = (ps.factors[a], ps.factors[b], ps.positions[:, a], ps.positions[:, b])
    if not all(np.all(np.isfinite(t)) for t in touched):
        raise TrainingAborted("non-finite parameter")
    return True


def optimize(ds: Dataset, cfg: TrainConfig) -> tuple[PrototypeSet, TrainingSummary]:
    """Run the training loop on ds as given (no scaling, no kernel mapping)."""
    rng = np.random.default_rng(cfg.seed)
    ps = initialize(ds, cfg, rng)
    loss = cfg.loss_config()
    states: dict[tuple[str, int], AdadeltaState] = {}

    def step(kind: str, index: int, param: np.ndarray, grad: np.ndarray) -> np.ndarray:
        key = (kind, index)
        if key not in states:
            states[key] = AdadeltaState.for_parameter(param, cfg.rho, cfg.eps_ada)
        return adadelta_step(states[key], grad)

    lam = objective(ds, ps, loss)
    history = [lam]
    initial_accuracy = training_accuracy(ds, ps)
    best_lam, best_ps, best_epoch = lam, ps.copy(), 0
    converged = False
    epochs = 0

    for epoch in range(1, cfg.max_epochs + 1):
        epochs = epoch
        active = 0
        for i in rng.permutation(ds.size):
            try:
                if visit_sample(ps, ds.features[:, i], int(ds.labels[i]), loss, step):
                    active += 1
            except TrainingAborted as e:
                raise TrainingAborted(str(e), epoch=epoch, sample=int(i)) from e

        new_lam = objective(ds, ps, loss)
        history.append(new_lam)
        logger.debug(f"epoch {epoch}: J={new_lam:.6g} active={active}")
        if new_lam < best_lam:
            best_lam, best_ps, best_epoch = new_lam, ps.copy(), epoch
        if active == 0:
            logger.info(f"All samples saturated at epoch {epoch}; stopping")
            converged = True
            break
        if abs(new_lam - lam) <= cfg.epsilon_converge:
            converged = True
            break
        lam = new_lam

    if converged:
        logger.info(f"Converged after {epochs} epochs: J {history[0]:.6g} -> {best_lam:.6g}")
    else:
        logger.info(f"Stopped at max_epochs={cfg.max_epochs}: J {history[0]:.6g} -> {best_lam:.6g}")

    summary = TrainingSummary(
        initial_objective=history[0],
        final_objective=best_lam,
        objective_history=history,
        epochs=epochs,
        best_epoch=best_epoch,
        converged=converged,
        initial_accuracy=initial_accuracy,
        final_accuracy=training_accuracy(ds, best_ps),
    )
    return best_ps, summary


def _scale(ds: Dataset, cfg: TrainConfig) -> tuple[Dataset, ScalingRecord]:
    if cfg.standardize:
        return standardize(ds)
    return ds, ScalingRecord.identity(ds.dim)


def train(ds: Dataset, cfg: TrainConfig) -> Model:
    """Train a model; kernel mode is delegated to train_kernelized."""
    if cfg.mode == Mode.KERNEL:
        return train_kernelized(ds, cfg)
    ds.check_coverage()
    scaled, scaling = _scale(ds, cfg)
    ps, summary = optimize(scaled, cfg)
    return Model(
        prototype_set=ps,
        mode=Mode.LINEAR,
        beta=cfg.beta,
        scaling=scaling,
        summary=summary,
        class_names=ds.class_names,
        feature_names=ds.feature_names,
        categories=ds.categories,
    )


def train_kernelized(ds: Dataset, cfg: TrainConfig) -> Model:
    """Train in kernel coordinates with the (scaled) training points as references."""
    kc = cfg.kernel
    if kc is None:
        raise ConfigError("kernel mode requires a kernel configuration")
    if kc.needs_selection():
        raise ConfigError("rbf sigma is not set; select it first (see evaluation.fit_model)")
    ds.check_coverage()
    scaled, scaling = _scale(ds, cfg)
    descriptor = KernelDescriptor(
        kind=kc.kind,
        reference_points=scaled.features,
        sigma=kc.sigma if kc.sigma is not None else 1.0,
    )
    coords = to_kernel_coordinates(scaled.features, descriptor).coords
    space = scaled.with_features(coords)
    ps, summary = optimize(space, cfg)
    return Model(
        prototype_set=ps,
        mode=Mode.KERNEL,
        beta=cfg.beta,
        scaling=scaling,
        summary=summary,
        kernel=descriptor,
        class_names=ds.class_names,
        feature_names=ds.feature_names,
        categories=ds.categories,
    )
