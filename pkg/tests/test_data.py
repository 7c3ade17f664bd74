import numpy as np
import pytest

from src.data import (
    Dataset,
    generate_synthetic,
    load_csv,
    make_folds,
    ScalingRecord,
    standardize,
    write_csv,
)
from src.errors import DataError


def _write(tmp_path, text, name="data.csv"):
    path = tmp_path / name
    path.write_text(text)
    return path


class TestLoadCsv:
    def test_iris_shape(self, iris_csv):
        ds = load_csv(iris_csv, "species")
        assert (ds.dim, ds.size, ds.class_count) == (4, 150, 3)
        assert ds.class_names == ["setosa", "versicolor", "virginica"]
        assert ds.feature_names == ["sepal_length", "sepal_width", "petal_length", "petal_width"]

    def test_label_by_index(self, iris_csv):
        ds = load_csv(iris_csv, 4)
        assert ds.class_count == 3

    def test_categorical_one_hot(self, tmp_path):
        path = _write(tmp_path, "color,size,label\nred,1.5,a\nblue,2.0,b\nred,0.5,a\n")
        ds = load_csv(path, "label", ["color"])
        assert ds.feature_names == ["color=red", "color=blue", "size"]
        np.testing.assert_array_equal(ds.features[:2].T, [[1, 0], [0, 1], [1, 0]])
        np.testing.assert_array_equal(ds.features[2], [1.5, 2.0, 0.5])
        assert ds.categories == {"color": ["red", "blue"]}
        np.testing.assert_array_equal(ds.labels, [1, 2, 1])

    def test_recorded_categories_fix_encoding(self, tmp_path):
        path = _write(tmp_path, "color,label\nblue,a\nred,b\n")
        ds = load_csv(path, "label", ["color"], categories={"color": ["red", "blue"]})
        np.testing.assert_array_equal(ds.features.T, [[0, 1], [1, 0]])

    def test_unseen_category_rejected(self, tmp_path):
        path = _write(tmp_path, "color,label\ngreen,a\nred,b\n")
        with pytest.raises(DataError, match="unseen categories"):
            load_csv(path, "label", ["color"], categories={"color": ["red", "blue"]})

    def test_non_numeric_value(self, tmp_path):
        path = _write(tmp_path, "x,y,label\n1,2,a\nabc,3,b\n")
        with pytest.raises(DataError, match="'x', row 3"):
            load_csv(path, "label")

    def test_ragged_row(self, tmp_path):
        path = _write(tmp_path, "x,y,label\n1,2,a\n3,4,b,9\n")
        with pytest.raises(DataError, match="ragged"):
            load_csv(path, "label")

    def test_missing_value(self, tmp_path):
        path = _write(tmp_path, "x,y,label\n1,,a\n3,4,b\n")
        with pytest.raises(DataError, match="missing value in column 'y'"):
            load_csv(path, "label")

    def test_missing_label(self, tmp_path):
        path = _write(tmp_path, "x,label\n1,a\n2,\n3,b\n4,a\n")
        with pytest.raises(DataError, match="missing label in column 'label', row 3"):
            load_csv(path, "label")

    def test_one_hot_groups_sum_to_one(self, tmp_path):
        path = _write(
            tmp_path,
            "color,shape,size,label\nred,box,1,a\nblue,ball,2,b\ngreen,box,3,a\nred,cone,4,b\nblue,ball,5,a\n",
        )
        ds = load_csv(path, "label", ["color", "shape"])
        for column, levels in ds.categories.items():
            rows = [j for j, name in enumerate(ds.feature_names) if name.startswith(f"{column}=")]
            assert len(rows) == len(levels)
            np.testing.assert_array_equal(ds.features[rows].sum(axis=0), np.ones(ds.size))

    def test_missing_label_column(self, tmp_path):
        path = _write(tmp_path, "x,y,label\n1,2,a\n3,4,b\n")
        with pytest.raises(DataError, match="'species'"):
            load_csv(path, "species")

    def test_single_class(self, tmp_path):
        path = _write(tmp_path, "x,label\n1,a\n2,a\n")
        with pytest.raises(DataError, match="single class"):
            load_csv(path, "label")

    def test_missing_file(self, tmp_path):
        with pytest.raises(DataError, match="not found"):
            load_csv(tmp_path / "nope.csv", "label")

    def test_fixed_class_names(self, tmp_path):
        path = _write(tmp_path, "x,label\n1,b\n2,a\n")
        ds = load_csv(path, "label", class_names=["a", "b"])
        np.testing.assert_array_equal(ds.labels, [2, 1])

    def test_label_outside_class_names(self, tmp_path):
        path = _write(tmp_path, "x,label\n1,b\n2,c\n")
        with pytest.raises(DataError, match="not seen in training"):
            load_csv(path, "label", class_names=["a", "b"])

    def test_written_synthetic_data_reloads(self, tmp_path):
        ds = generate_synthetic("helix", 30, seed=4, classes=3)
        write_csv(ds, tmp_path / "helix.csv")
        loaded = load_csv(tmp_path / "helix.csv", "label")
        np.testing.assert_allclose(loaded.features, ds.features, rtol=1e-12)
        np.testing.assert_array_equal(loaded.labels, ds.labels)


class TestDataset:
    def test_features_read_only_copy(self):
        features = np.zeros((2, 3))
        ds = Dataset(features, [1, 2, 1], 2)
        assert features.flags.writeable
        assert not ds.features.flags.writeable

    def test_label_range_checked(self):
        with pytest.raises(DataError, match=r"1\.\.2"):
            Dataset(np.zeros((2, 3)), [1, 3, 1], 2)

    def test_label_count_checked(self):
        with pytest.raises(DataError):
            Dataset(np.zeros((2, 3)), [1, 2], 2)

    def test_coverage(self):
        ds = Dataset(np.zeros((1, 3)), [1, 1, 1], 2)
        with pytest.raises(DataError, match=r"\[2\]"):
            ds.check_coverage()

    def test_subset(self, iris):
        sub = iris.subset([0, 50, 100])
        np.testing.assert_array_equal(sub.labels, [1, 2, 3])
        assert sub.class_names == iris.class_names


class TestStandardize:
    def test_two_points_sample_convention(self):
        ds = Dataset(np.array([[1.0, 3.0]]), [1, 2], 2)
        scaled, record = standardize(ds)
        np.testing.assert_allclose(scaled.features[0], [-1 / np.sqrt(2), 1 / np.sqrt(2)])
        assert record.mean[0] == 2.0
        assert record.std[0] == pytest.approx(np.sqrt(2))

    def test_constant_feature(self):
        ds = Dataset(np.array([[5.0, 5.0, 5.0], [1.0, 2.0, 3.0]]), [1, 2, 1], 2)
        scaled, _ = standardize(ds)
        np.testing.assert_array_equal(scaled.features[0], [0.0, 0.0, 0.0])

    def test_idempotent(self, iris):
        once, _ = standardize(iris)
        twice, _ = standardize(once)
        np.testing.assert_allclose(twice.features, once.features, atol=1e-12)

    def test_record_applies_training_statistics(self, iris):
        _, record = standardize(iris.subset(range(0, 150, 2)))
        held_out = record.transform(iris.features[:, 1::2])
        expected = (iris.features[:, 1::2] - record.mean[:, None]) / record.std[:, None]
        np.testing.assert_allclose(held_out, expected)

    def test_record_reproduces_standardized_data(self, wine):
        scaled, record = standardize(wine)
        np.testing.assert_allclose(record.transform(wine.features), scaled.features, rtol=0, atol=1e-12)
        np.testing.assert_allclose(record.apply(wine).features, scaled.features, rtol=0, atol=1e-12)

    def test_record_dimension_mismatch(self):
        with pytest.raises(DataError):
            ScalingRecord.identity(3).transform(np.zeros((2, 4)))


class TestFolds:
    def test_one_point_per_class_per_fold(self):
        ds = Dataset(np.arange(10.0)[None, :], [1] * 5 + [2] * 5, 2)
        plan = make_folds(ds, 5, seed=11)[0]
        for fold in range(5):
            _, test = plan.split(fold)
            assert sorted(ds.labels[test].tolist()) == [1, 2]

    def test_deterministic(self, iris):
        a = make_folds(iris, 10, repeats=3, seed=5)
        b = make_folds(iris, 10, repeats=3, seed=5)
        for pa, pb in zip(a, b):
            np.testing.assert_array_equal(pa.fold_assignments, pb.fold_assignments)

    def test_repeats_differ(self, iris):
        a, b = make_folds(iris, 10, repeats=2, seed=5)
        assert not np.array_equal(a.fold_assignments, b.fold_assignments)

    def test_every_point_tested_once_and_folds_balanced(self, wine):
        for plan in make_folds(wine, 10, repeats=3, seed=2):
            tests = [plan.split(fold)[1] for fold in range(10)]
            np.testing.assert_array_equal(np.sort(np.concatenate(tests)), np.arange(wine.size))
            sizes = [len(t) for t in tests]
            assert max(sizes) - min(sizes) <= 1
            per_class = np.array([np.bincount(wine.labels[t], minlength=4)[1:] for t in tests])
            assert np.all(per_class.max(axis=0) - per_class.min(axis=0) <= 1)
            for fold, test in enumerate(tests):
                train, _ = plan.split(fold)
                assert np.intersect1d(train, test).size == 0
                assert train.size + test.size == wine.size

    def test_small_class_rejected(self):
        ds = Dataset(np.arange(13.0)[None, :], [1] * 3 + [2] * 10, 2)
        with pytest.raises(DataError, match=r"\[1\]"):
            make_folds(ds, 10)


class TestSynthetic:
    def test_circles_without_noise(self):
        ds = generate_synthetic("concentric_circles", 200, noise=0.0, seed=0)
        radii = np.linalg.norm(ds.features, axis=0)
        np.testing.assert_allclose(radii[ds.labels == 1], 1.0)
        np.testing.assert_allclose(radii[ds.labels == 2], 2.0)
        assert ds.class_sizes().tolist() == [100, 100]

    def test_coincident_gaussians(self):
        ds = generate_synthetic("two_gaussians", 20, noise=0.0, centers=[(1.0, 1.0), (1.0, 1.0)])
        np.testing.assert_array_equal(ds.features, np.ones((2, 20)))

    def test_deterministic(self):
        a = generate_synthetic("helix", 90, seed=2)
        b = generate_synthetic("helix", 90, seed=2)
        np.testing.assert_array_equal(a.features, b.features)

    def test_helix_strands(self):
        ds = generate_synthetic("helix", 301, classes=3)
        assert ds.dim == 3
        assert ds.class_sizes().tolist() == [101, 100, 100]

    def test_unknown_kind(self):
        with pytest.raises(DataError, match="unknown synthetic kind"):
            generate_synthetic("spiral", 100)
