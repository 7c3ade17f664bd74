"""Prototype-NN prediction, accuracy measures and the cross-validation harness."""

import logging
from typing import Any, Callable, Optional, Protocol

import numpy as np
from joblib import Parallel, delayed
from pydantic import BaseModel, Field
from sklearn.metrics import confusion_matrix
from sklearn.neighbors import NearestNeighbors

from .config import KernelKind, Mode, TrainConfig
from .data import Dataset, make_folds
from .errors import DataError
from .trainer import Model, train

logger = logging.getLogger(__name__)


class Predictor(Protocol):
    def predict_many(self, points: np.ndarray) -> np.ndarray: ...


FitFunction = Callable[[Dataset, TrainConfig], Predictor]


class EvalReport(BaseModel):
    """Test errors over all (repeat, fold) pairs."""

    per_fold_errors: list[float]
    mean_error: float
    std_error: float
    per_class_confusion: list[list[int]]
    folds: int
    repeats: int
    seed: int
    selected_sigmas: list[float] = Field(default_factory=list)
    config: dict[str, Any] = Field(default_factory=dict)


def predict(x: np.ndarray, model: Model) -> int:
    """Label of the nearest prototype to a raw point x."""
    x = np.asarray(x, dtype=float)
    if x.shape != (model.input_dim,):
        raise DataError(f"expected a point of dimension {model.input_dim}, got shape {x.shape}")
    return int(model.predict_many(x[:, np.newaxis])[0])


def loo_accuracy(ds: Dataset, model: Model) -> float:
    """Prototype-NN accuracy over ds.

    Prototypes, not the other points, are the references, so on the training
    set this is the training accuracy of the prototype-NN rule.
    """
    _check_dim(ds, model)
    return float(np.mean(model.predict_many(ds.features) == ds.labels))


def point_loo_accuracy(points: np.ndarray, labels: np.ndarray) -> float:
    """Leave-one-out 1-NN accuracy over points given as rows."""
    points = np.asarray(points, dtype=float)
    labels = np.asarray(labels)
    nn = NearestNeighbors(n_neighbors=2).fit(points)
    _, idx = nn.kneighbors(points)
    # A point's own row is normally its first neighbor; with duplicates it may be second.
    own = idx[:, 0] == np.arange(len(points))
    other = np.where(own, idx[:, 1], idx[:, 0])
    return float(np.mean(labels[other] == labels))


def _check_dim(ds: Dataset, model: Model):
    if ds.dim != model.input_dim:
        raise DataError(f"dataset has {ds.dim} features, model expects {model.input_dim}")


def _errors(ds: Dataset, predicted: np.ndarray) -> tuple[float, np.ndarray]:
    error = float(np.mean(predicted != ds.labels))
    labels = np.arange(1, ds.class_count + 1)
    return error, confusion_matrix(ds.labels, predicted, labels=labels)


def select_sigma(ds: Dataset, cfg: TrainConfig, seed: int = 0) -> float:
    """Pick the rbf width with the lowest inner stratified CV error on ds.

    Ties go to the earliest grid value.
    """
    kc = cfg.kernel
    grid = kc.grid()
    folds = min(kc.grid_folds, int(ds.class_sizes().min()))
    if folds < 2:
        logger.warning(f"Too few points per class for sigma selection; using {grid[0]}")
        return grid[0]
    plan = make_folds(ds, folds, 1, seed)[0]

    best_sigma, best_error = grid[0], np.inf
    for sigma in grid:
        candidate = cfg.model_copy(update={"kernel": kc.model_copy(update={"sigma": sigma})})
        errors = []
        for fold in range(folds):
            train_idx, test_idx = plan.split(fold)
            test = ds.subset(test_idx)
            model = train(ds.subset(train_idx), candidate)
            errors.append(float(np.mean(model.predict_many(test.features) != test.labels)))
        error = float(np.mean(errors))
        logger.debug(f"sigma={sigma:g}: inner CV error {error:.4f}")
        if error < best_error:
            best_sigma, best_error = sigma, error
    logger.info(f"Selected sigma={best_sigma:g} (inner CV error {best_error:.4f})")
    return best_sigma


def resolve_kernel(ds: Dataset, cfg: TrainConfig) -> TrainConfig:
    """cfg with the rbf width fixed, selecting it on ds when unset."""
    if cfg.mode != Mode.KERNEL or not cfg.kernel.needs_selection():
        return cfg
    sigma = select_sigma(ds, cfg, seed=cfg.seed)
    return cfg.model_copy(update={"kernel": cfg.kernel.model_copy(update={"sigma": sigma})})


def fit_model(ds: Dataset, cfg: TrainConfig) -> Model:
    """Train, selecting the rbf width first when the configuration leaves it open."""
    return train(ds, resolve_kernel(ds, cfg))


def _run_fold(ds: Dataset, cfg: TrainConfig, fit: FitFunction, train_idx, test_idx):
    training = ds.subset(train_idx)
    test = ds.subset(test_idx)
    model = fit(training, cfg)
    error, confusion = _errors(test, model.predict_many(test.features))
    sigma = None
    if isinstance(model, Model) and model.kernel is not None and model.kernel.kind == KernelKind.RBF:
        sigma = model.kernel.sigma
    return error, confusion, sigma


def cross_validate(
    ds: Dataset,
    cfg: TrainConfig,
    folds: int = 10,
    repeats: int = 5,
    seed: int = 0,
    threads: int = 1,
    fit: FitFunction = fit_model,
) -> EvalReport:
    """
    Repeated stratified k-fold evaluation.

    Scaling statistics and sigma selection are computed inside fit from the
    training split only.

    Args:
        ds: full dataset
        cfg: training configuration
        folds: folds per repeat
        repeats: independent fold plans
        seed: fold-plan seed
        threads: folds evaluated concurrently
        fit: training function; any returned object with predict_many works

    Returns:
        EvalReport with folds * repeats errors
    """
    plans = make_folds(ds, folds, repeats, seed)
    tasks = [(plan, fold) for plan in plans for fold in range(folds)]
    results = Parallel(n_jobs=threads, prefer="threads")(
        delayed(_run_fold)(ds, cfg, fit, *plan.split(fold)) for plan, fold in tasks
    )

    errors = [r[0] for r in results]
    for (plan, fold), error in zip(tasks, errors):
        logger.info(f"repeat {plan.repeat_index} fold {fold}: error {error:.4f}")
    confusion = np.sum([r[1] for r in results], axis=0)
    return EvalReport(
        per_fold_errors=errors,
        mean_error=float(np.mean(errors)),
        std_error=float(np.std(errors)),
        per_class_confusion=confusion.astype(int).tolist(),
        folds=folds,
        repeats=repeats,
        seed=seed,
        selected_sigmas=[r[2] for r in results if r[2] is not None],
        config=cfg.model_dump(mode="json"),
    )


def holdout_report(ds: Dataset, model: Model, config: Optional[dict] = None) -> EvalReport:
    """One-fold report for a trained model on a held-out dataset."""
    _check_dim(ds, model)
    error, confusion = _errors(ds, model.predict_many(ds.features))
    sigmas = [model.kernel.sigma] if model.kernel is not None and model.kernel.kind == KernelKind.RBF else []
    return EvalReport(
        per_fold_errors=[error],
        mean_error=error,
        std_error=0.0,
        per_class_confusion=confusion.astype(int).tolist(),
        folds=1,
        repeats=1,
        seed=0,
        selected_sigmas=sigmas,
        config=config or {},
    )
