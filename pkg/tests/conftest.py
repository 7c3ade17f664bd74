import pandas as pd
import pytest
from sklearn.datasets import load_breast_cancer, load_iris, load_wine

from src.config import reset_settings, TrainConfig
from src.data import Dataset, generate_synthetic


def _bundled(loader) -> Dataset:
    bunch = loader()
    return Dataset(
        features=bunch.data.T,
        labels=bunch.target + 1,
        class_count=len(bunch.target_names),
        feature_names=list(bunch.feature_names),
        class_names=[str(n) for n in bunch.target_names],
    )


@pytest.fixture(autouse=True)
def fresh_settings(monkeypatch):
    for var in ("LMDL_SEED", "LMDL_THREADS", "LMDL_LOG_LEVEL"):
        monkeypatch.delenv(var, raising=False)
    reset_settings()
    yield
    reset_settings()


@pytest.fixture
def iris() -> Dataset:
    return _bundled(load_iris)


@pytest.fixture
def wine() -> Dataset:
    return _bundled(load_wine)


@pytest.fixture
def cancer() -> Dataset:
    return _bundled(load_breast_cancer)


@pytest.fixture
def iris_csv(tmp_path):
    bunch = load_iris()
    frame = pd.DataFrame(bunch.data, columns=["sepal_length", "sepal_width", "petal_length", "petal_width"])
    frame["species"] = [bunch.target_names[t] for t in bunch.target]
    path = tmp_path / "iris.csv"
    frame.to_csv(path, index=False)
    return path


@pytest.fixture
def gaussians() -> Dataset:
    return generate_synthetic("two_gaussians", 100, noise=0.5, seed=1, centers=[(-4.0, 0.0), (4.0, 0.0)])


@pytest.fixture
def quick_config() -> TrainConfig:
    return TrainConfig(prototypes_per_class=2, max_epochs=30, seed=3)
