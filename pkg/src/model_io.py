"""JSON model files with bit-exact matrices."""

import json
from pathlib import Path
from typing import Optional

import numpy as np
from pydantic import BaseModel, Field, ValidationError

from .config import KernelKind, Mode
from .data import ScalingRecord
from .errors import ModelFormatError
from .kernel import KernelDescriptor
from .metric_core import PrototypeSet
from .trainer import Model, TrainingSummary

FORMAT_VERSION = 1


class Matrix(BaseModel):
    """Row-major array with its shape; entries are hexadecimal floats."""

    shape: list[int]
    data: list[str]

    @classmethod
    def from_array(cls, array: np.ndarray) -> "Matrix":
        array = np.asarray(array, dtype=float)
        return cls(shape=list(array.shape), data=[float(v).hex() for v in array.ravel(order="C")])

    def to_array(self) -> np.ndarray:
        values = np.array([float.fromhex(v) for v in self.data], dtype=float)
        if values.size != int(np.prod(self.shape)):
            raise ModelFormatError(f"matrix of shape {self.shape} has {values.size} entries")
        return values.reshape(self.shape, order="C")


class KernelSection(BaseModel):
    kind: KernelKind
    sigma: float
    reference_points: Matrix


class ModelFile(BaseModel):
    """On-disk layout of a trained model."""

    format_version: int
    mode: Mode
    beta: float
    rank: int
    prototype_positions: Matrix
    prototype_labels: list[int]
    factors: Matrix
    scaling_mean: Matrix
    scaling_std: Matrix
    kernel: Optional[KernelSection] = None
    class_names: Optional[list[str]] = None
    feature_names: Optional[list[str]] = None
    categories: dict[str, list[str]] = Field(default_factory=dict)
    summary: TrainingSummary


def to_model_file(model: Model) -> ModelFile:
    ps = model.prototype_set
    kernel = None
    if model.kernel is not None:
        kernel = KernelSection(
            kind=model.kernel.kind,
            sigma=model.kernel.sigma,
            reference_points=Matrix.from_array(model.kernel.reference_points),
        )
    return ModelFile(
        format_version=FORMAT_VERSION,
        mode=model.mode,
        beta=model.beta,
        rank=ps.rank,
        prototype_positions=Matrix.from_array(ps.positions),
        prototype_labels=ps.labels.tolist(),
        factors=Matrix.from_array(ps.factors),
        scaling_mean=Matrix.from_array(model.scaling.mean),
        scaling_std=Matrix.from_array(model.scaling.std),
        kernel=kernel,
        class_names=model.class_names,
        feature_names=model.feature_names,
        categories=model.categories,
        summary=model.summary,
    )


def from_model_file(mf: ModelFile) -> Model:
    if mf.format_version != FORMAT_VERSION:
        raise ModelFormatError(
            f"unsupported model format_version {mf.format_version} (expected {FORMAT_VERSION})"
        )
    ps = PrototypeSet(
        mf.prototype_positions.to_array(),
        np.asarray(mf.prototype_labels, dtype=int),
        mf.factors.to_array(),
    )
    if ps.rank != mf.rank:
        raise ModelFormatError(f"declared rank {mf.rank} does not match factors ({ps.rank})")
    kernel = None
    if mf.kernel is not None:
        kernel = KernelDescriptor(
            kind=mf.kernel.kind,
            reference_points=mf.kernel.reference_points.to_array(),
            sigma=mf.kernel.sigma,
        )
    return Model(
        prototype_set=ps,
        mode=mf.mode,
        beta=mf.beta,
        scaling=ScalingRecord(mf.scaling_mean.to_array(), mf.scaling_std.to_array()),
        summary=mf.summary,
        kernel=kernel,
        class_names=mf.class_names,
        feature_names=mf.feature_names,
        categories=mf.categories,
    )


def save_model(model: Model, path: str | Path):
    """Write model as JSON."""
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    with open(path, "w") as f:
        json.dump(to_model_file(model).model_dump(mode="json"), f, indent=1)


def load_model(path: str | Path) -> Model:
    """Read a model written by save_model."""
    path = Path(path)
    if not path.exists():
        raise ModelFormatError(f"model file not found: {path}")
    try:
        with open(path) as f:
            raw = json.load(f)
    except json.JSONDecodeError as e:
        raise ModelFormatError(f"{path} is not valid JSON: {e}") from e
    if not isinstance(raw, dict) or raw.get("format_version") != FORMAT_VERSION:
        version = raw.get("format_version") if isinstance(raw, dict) else None
        raise ModelFormatError(
            f"unsupported model format_version {version} (expected {FORMAT_VERSION})"
        )
    try:
        mf = ModelFile.model_validate(raw)
    except ValidationError as e:
        raise ModelFormatError(f"invalid model file {path}: {e}") from e
    return from_model_file(mf)
