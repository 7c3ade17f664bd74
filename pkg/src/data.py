"""Dataset ingestion, standardization, fold planning and synthetic data."""

import logging
from dataclasses import dataclass, field, replace
from enum import Enum
from pathlib import Path
from typing import Optional, Sequence

import numpy as np
import pandas as pd
from sklearn.model_selection import StratifiedKFold

from .errors import DataError

logger = logging.getLogger(__name__)


@dataclass(frozen=True, eq=False)
class Dataset:
    """Labeled points stored column-wise: features is d x M, labels are 1..K."""

    features: np.ndarray
    labels: np.ndarray
    class_count: int
    feature_names: Optional[list[str]] = None
    class_names: Optional[list[str]] = None
    categories: dict[str, list[str]] = field(default_factory=dict)

    def __post_init__(self):
        features = np.array(self.features, dtype=float)
        labels = np.array(self.labels, dtype=int)
        if features.ndim != 2:
            raise DataError("features must be a d x M matrix")
        if labels.ndim != 1 or labels.shape[0] != features.shape[1]:
            raise DataError(
                f"expected {features.shape[1]} labels, got shape {labels.shape}"
            )
        if features.shape[0] < 1:
            raise DataError("dataset needs at least one feature")
        if not np.all(np.isfinite(features)):
            raise DataError("features contain NaN or infinite values")
        if self.class_count < 2:
            raise DataError("dataset needs at least two classes")
        if labels.size and (labels.min() < 1 or labels.max() > self.class_count):
            raise DataError(f"labels must lie in 1..{self.class_count}")
        if self.feature_names is not None and len(self.feature_names) != features.shape[0]:
            raise DataError("feature_names length does not match d")
        features.setflags(write=False)
        labels.setflags(write=False)
        object.__setattr__(self, "features", features)
        object.__setattr__(self, "labels", labels)

    @property
    def dim(self) -> int:
        return self.features.shape[0]

    @property
    def size(self) -> int:
        return self.features.shape[1]

    def class_sizes(self) -> np.ndarray:
        """Member count of classes 1..K (index 0 is class 1)."""
        return np.bincount(self.labels, minlength=self.class_count + 1)[1:]

    def check_coverage(self):
        """Raise DataError unless M >= 2 and every class has a member."""
        if self.size < 2:
            raise DataError("dataset needs at least two points")
        missing = [k + 1 for k, n in enumerate(self.class_sizes()) if n == 0]
        if missing:
            raise DataError(f"classes without members: {missing}")

    def subset(self, indices: Sequence[int]) -> "Dataset":
        indices = np.asarray(indices, dtype=int)
        return replace(
            self,
            features=self.features[:, indices],
            labels=self.labels[indices],
        )

    def with_features(self, features: np.ndarray, feature_names: Optional[list[str]] = None) -> "Dataset":
        """Same labels over a new feature matrix (e.g. kernel coordinates)."""
        return replace(self, features=features, feature_names=feature_names, categories={})


@dataclass(frozen=True, eq=False)
class ScalingRecord:
    """Per-feature mean and standard deviation learned on a training split."""

    mean: np.ndarray
    std: np.ndarray

    @classmethod
    def identity(cls, dim: int) -> "ScalingRecord":
        return cls(mean=np.zeros(dim), std=np.ones(dim))

    def transform(self, features: np.ndarray) -> np.ndarray:
        features = np.asarray(features, dtype=float)
        if features.shape[0] != self.mean.shape[0]:
            raise DataError(
                f"expected {self.mean.shape[0]} features, got {features.shape[0]}"
            )
        mean = self.mean.reshape((-1,) + (1,) * (features.ndim - 1))
        std = self.std.reshape((-1,) + (1,) * (features.ndim - 1))
        return (features - mean) / std

    def apply(self, ds: Dataset) -> Dataset:
        return replace(ds, features=self.transform(ds.features))

    def to_dict(self) -> dict:
        return {"mean": self.mean.tolist(), "std": self.std.tolist()}


def standardize(ds: Dataset) -> tuple[Dataset, ScalingRecord]:
    """Zero mean, unit sample standard deviation per feature.

    Constant features map to 0.
    """
    if ds.size < 2:
        raise DataError("standardization needs at least two points")
    mean = ds.features.mean(axis=1)
    std = ds.features.std(axis=1, ddof=1)
    std = np.where(std > 0, std, 1.0)
    record = ScalingRecord(mean=mean, std=std)
    return record.apply(ds), record


def load_csv(
    path: str | Path,
    label_column: str | int,
    categorical_columns: Sequence[str | int] = (),
    class_names: Optional[Sequence[str]] = None,
    categories: Optional[dict[str, list[str]]] = None,
) -> Dataset:
    """
    Load a comma-separated, headered UTF-8 file.

    Args:
        path: CSV file
        label_column: label column name or zero-based index
        categorical_columns: columns expanded into one binary feature per value
        class_names: fixed label order (labels outside it are rejected);
            defaults to first-appearance order
        categories: fixed category lists per categorical column, as recorded
            on a training Dataset

    Returns:
        Dataset with labels re-encoded to 1..K
    """
    path = Path(path)
    if not path.exists():
        raise DataError(f"file not found: {path}")

    try:
        frame = pd.read_csv(
            path,
            dtype=str,
            keep_default_na=False,
            na_filter=False,
            encoding="utf-8",
            skipinitialspace=True,
        )
    except pd.errors.ParserError as e:
        raise DataError(f"ragged rows in {path}: {e}") from e
    except pd.errors.EmptyDataError as e:
        raise DataError(f"{path} is empty") from e

    # Short rows are padded with NaN even with na_filter disabled.
    if frame.isna().any().any():
        bad = int(np.flatnonzero(frame.isna().any(axis=1).to_numpy())[0])
        raise DataError(f"ragged row {bad + 2} in {path}")

    columns = list(frame.columns)
    label_name = _resolve_column(columns, label_column)
    categorical = [_resolve_column(columns, c) for c in categorical_columns]
    if label_name in categorical:
        raise DataError(f"label column '{label_name}' cannot also be categorical")

    raw_labels = frame[label_name].str.strip()
    if (raw_labels == "").any():
        row = int(np.flatnonzero((raw_labels == "").to_numpy())[0])
        raise DataError(f"missing label in column '{label_name}', row {row + 2}")
    if class_names is None:
        codes, uniques = pd.factorize(raw_labels)
        names = [str(u) for u in uniques]
    else:
        names = [str(c) for c in class_names]
        unknown = sorted(set(raw_labels) - set(names))
        if unknown:
            raise DataError(f"labels not seen in training: {unknown}")
        codes = pd.Categorical(raw_labels, categories=names).codes
    labels = np.asarray(codes, dtype=int) + 1
    if len(names) < 2:
        raise DataError(f"{path} contains a single class")

    blocks: list[np.ndarray] = []
    feature_names: list[str] = []
    recorded: dict[str, list[str]] = {}
    for name in columns:
        if name == label_name:
            continue
        values = frame[name].str.strip()
        if (values == "").any():
            row = int(np.flatnonzero((values == "").to_numpy())[0])
            raise DataError(f"missing value in column '{name}', row {row + 2}")
        if name in categorical:
            known = (categories or {}).get(name)
            levels = list(known) if known is not None else [str(v) for v in pd.unique(values)]
            unseen = sorted(set(values) - set(levels))
            if unseen:
                raise DataError(f"column '{name}' has unseen categories {unseen}")
            onehot = pd.get_dummies(pd.Categorical(values, categories=levels), dtype=float)
            blocks.append(onehot.to_numpy().T)
            feature_names.extend(f"{name}={level}" for level in levels)
            recorded[name] = levels
        else:
            numeric = pd.to_numeric(values, errors="coerce")
            if numeric.isna().any():
                row = int(np.flatnonzero(numeric.isna().to_numpy())[0])
                raise DataError(
                    f"non-numeric value '{values.iloc[row]}' in column '{name}', row {row + 2}"
                )
            blocks.append(numeric.to_numpy(dtype=float)[np.newaxis, :])
            feature_names.append(name)

    if not blocks:
        raise DataError(f"{path} has no feature columns")

    ds = Dataset(
        features=np.vstack(blocks),
        labels=labels,
        class_count=len(names),
        feature_names=feature_names,
        class_names=names,
        categories=recorded,
    )
    if class_names is None:
        ds.check_coverage()
    logger.info(f"Loaded {path}: d={ds.dim}, M={ds.size}, K={ds.class_count}")
    return ds


def _resolve_column(columns: list[str], column: str | int) -> str:
    if isinstance(column, int) or (isinstance(column, str) and column.isdigit() and column not in columns):
        index = int(column)
        if not 0 <= index < len(columns):
            raise DataError(f"column index {index} out of range (0..{len(columns) - 1})")
        return columns[index]
    if column not in columns:
        raise DataError(f"column '{column}' not found; available: {columns}")
    return column


def write_csv(ds: Dataset, path: str | Path):
    """Write features plus a trailing `label` column in the loader's format."""
    names = ds.feature_names or [f"x{j + 1}" for j in range(ds.dim)]
    frame = pd.DataFrame(ds.features.T, columns=names)
    if ds.class_names:
        frame["label"] = [ds.class_names[k - 1] for k in ds.labels]
    else:
        frame["label"] = ds.labels
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    frame.to_csv(path, index=False, float_format="%.17g")


@dataclass(frozen=True, eq=False)
class FoldPlan:
    """Stratified assignment of every point to one of F test folds."""

    fold_assignments: np.ndarray
    fold_count: int
    repeat_index: int
    seed: int

    def split(self, fold: int) -> tuple[np.ndarray, np.ndarray]:
        """(train indices, test indices) for one fold."""
        test = self.fold_assignments == fold
        return np.flatnonzero(~test), np.flatnonzero(test)


def make_folds(ds: Dataset, fold_count: int, repeats: int = 1, seed: int = 0) -> list[FoldPlan]:
    """Independent stratified fold plans, deterministic given seed."""
    if fold_count < 2:
        raise DataError("fold_count must be at least 2")
    if repeats < 1:
        raise DataError("repeats must be at least 1")
    sizes = ds.class_sizes()
    small = [k + 1 for k, n in enumerate(sizes) if 0 < n < fold_count]
    if small:
        raise DataError(f"classes {small} have fewer than {fold_count} members")

    seeds = np.random.SeedSequence(seed).generate_state(repeats)
    plans = []
    for r in range(repeats):
        splitter = StratifiedKFold(n_splits=fold_count, shuffle=True, random_state=int(seeds[r]))
        assignments = np.empty(ds.size, dtype=int)
        for fold, (_, test) in enumerate(splitter.split(np.zeros(ds.size), ds.labels)):
            assignments[test] = fold
        plans.append(FoldPlan(assignments, fold_count, r, seed))
    return plans


class SyntheticKind(str, Enum):
    TWO_GAUSSIANS = "two_gaussians"
    CONCENTRIC_CIRCLES = "concentric_circles"
    HELIX = "helix"


DEFAULT_NOISE = {
    SyntheticKind.TWO_GAUSSIANS: 1.0,
    SyntheticKind.CONCENTRIC_CIRCLES: 0.08,
    SyntheticKind.HELIX: 0.05,
}


def generate_synthetic(
    kind: str | SyntheticKind,
    n: int,
    noise: Optional[float] = None,
    seed: int = 0,
    centers: Optional[Sequence[Sequence[float]]] = None,
    classes: int = 2,
) -> Dataset:
    """
    Generate one of the artificial datasets.

    Args:
        kind: two_gaussians, concentric_circles or helix
        n: total number of points, split as evenly as possible over classes
        noise: Gaussian noise std (defaults per kind)
        seed: random seed
        centers: two_gaussians class centers
        classes: helix strand count

    Returns:
        Dataset whose points are grouped by class
    """
    try:
        kind = SyntheticKind(kind)
    except ValueError:
        raise DataError(
            f"unknown synthetic kind '{kind}'; choose from {[k.value for k in SyntheticKind]}"
        ) from None
    if n < 4:
        raise DataError("synthetic datasets need n >= 4")
    if noise is None:
        noise = DEFAULT_NOISE[kind]
    if noise < 0:
        raise DataError("noise must be non-negative")

    rng = np.random.default_rng(seed)

    if kind == SyntheticKind.TWO_GAUSSIANS:
        centers = np.asarray(centers if centers is not None else [(-2.5, 0.0), (2.5, 0.0)], dtype=float)
        if centers.shape[0] != 2:
            raise DataError("two_gaussians needs exactly two centers")
        counts = _split_counts(n, 2)
        blocks = [
            c[:, np.newaxis] + noise * rng.standard_normal((centers.shape[1], m))
            for c, m in zip(centers, counts)
        ]
    elif kind == SyntheticKind.CONCENTRIC_CIRCLES:
        counts = _split_counts(n, 2)
        blocks = []
        for radius, m in zip((1.0, 2.0), counts):
            theta = rng.uniform(0.0, 2 * np.pi, m)
            ring = radius * np.vstack([np.cos(theta), np.sin(theta)])
            blocks.append(ring + noise * rng.standard_normal((2, m)))
    else:
        if classes < 2:
            raise DataError("helix needs at least two strands")
        counts = _split_counts(n, classes)
        blocks = []
        for j, m in enumerate(counts):
            t = rng.uniform(0.0, 4 * np.pi, m)
            phase = 2 * np.pi * j / classes
            curve = np.vstack([np.cos(t + phase), np.sin(t + phase), t / (2 * np.pi)])
            blocks.append(curve + noise * rng.standard_normal((3, m)))

    labels = np.concatenate([np.full(b.shape[1], k + 1) for k, b in enumerate(blocks)])
    ds = Dataset(
        features=np.hstack(blocks),
        labels=labels,
        class_count=len(blocks),
        feature_names=[f"x{j + 1}" for j in range(blocks[0].shape[0])],
        class_names=[str(k + 1) for k in range(len(blocks))],
    )
    ds.check_coverage()
    return ds


def _split_counts(n: int, k: int) -> list[int]:
    base, extra = divmod(n, k)
    return [base + (1 if j < extra else 0) for j in range(k)]
