"""LMDL - local Mahalanobis distance learning for prototype-based classification."""

from .config import get_settings, KernelConfig, KernelKind, LossConfig, Mode, TrainConfig
from .data import Dataset, generate_synthetic, load_csv, make_folds, standardize
from .errors import ConfigError, CoverageError, DataError, LMDLError, ModelFormatError, TrainingAborted
from .evaluation import cross_validate, fit_model, loo_accuracy, predict
from .gradcheck import check_gradients
from .metric_core import PrototypeSet, squared_distance
from .model_io import load_model, save_model
from .trainer import Model, train, train_kernelized

__version__ = "0.1.0"
__all__ = [
    "get_settings",
    "KernelConfig",
    "KernelKind",
    "LossConfig",
    "Mode",
    "TrainConfig",
    "Dataset",
    "generate_synthetic",
    "load_csv",
    "make_folds",
    "standardize",
    "ConfigError",
    "CoverageError",
    "DataError",
    "LMDLError",
    "ModelFormatError",
    "TrainingAborted",
    "cross_validate",
    "fit_model",
    "loo_accuracy",
    "predict",
    "check_gradients",
    "PrototypeSet",
    "squared_distance",
    "load_model",
    "save_model",
    "Model",
    "train",
    "train_kernelized",
]
