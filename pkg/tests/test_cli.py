import json

import pandas as pd
import pytest

from src.cli import main
from src.model_io import load_model


def _run(capsys, *argv) -> tuple[int, dict]:
    code = main(list(argv))
    out = capsys.readouterr().out.strip().splitlines()
    return code, (json.loads(out[-1]) if out else {})


@pytest.fixture
def gaussians_csv(tmp_path, capsys):
    path = tmp_path / "g.csv"
    code, _ = _run(capsys, "synth", "--kind", "two_gaussians", "--n", "60", "--seed", "1", "--out", str(path))
    assert code == 0
    return path


class TestSynth:
    def test_circles(self, tmp_path, capsys):
        path = tmp_path / "c.csv"
        code, payload = _run(capsys, "synth", "--kind", "concentric_circles", "--n", "200", "--seed", "7", "--out", str(path))
        assert code == 0
        frame = pd.read_csv(path)
        assert len(frame) == 200
        assert frame["label"].nunique() == 2
        assert payload["rows"] == 200

    def test_helix_has_three_features(self, tmp_path, capsys):
        path = tmp_path / "h.csv"
        code, payload = _run(capsys, "synth", "--kind", "helix", "--n", "300", "--out", str(path))
        assert code == 0
        assert payload["features"] == 3
        assert list(pd.read_csv(path).columns) == ["x1", "x2", "x3", "label"]

    def test_unknown_kind(self, tmp_path, capsys):
        code, _ = _run(capsys, "synth", "--kind", "unknown", "--out", str(tmp_path / "u.csv"))
        assert code == 1

    def test_seed_from_environment(self, tmp_path, capsys, monkeypatch):
        monkeypatch.setenv("LMDL_SEED", "7")
        _run(capsys, "synth", "--kind", "helix", "--n", "50", "--out", str(tmp_path / "a.csv"))
        _run(capsys, "synth", "--kind", "helix", "--n", "50", "--seed", "7", "--out", str(tmp_path / "b.csv"))
        assert (tmp_path / "a.csv").read_text() == (tmp_path / "b.csv").read_text()


class TestTrain:
    def test_iris(self, tmp_path, capsys, iris_csv):
        out = tmp_path / "m.json"
        code, payload = _run(
            capsys, "train", "--data", str(iris_csv), "--label", "species",
            "--beta", "10", "--prototypes-per-class", "5", "--max-epochs", "20", "--out", str(out),
        )
        assert code == 0
        assert payload["prototypes"] == 15
        assert payload["final_objective"] <= payload["initial_objective"]
        assert {"epochs", "elapsed_seconds", "sigma"} <= set(payload)
        assert load_model(out).prototype_set.size == 15

    def test_kernel_mode_records_sigma(self, tmp_path, capsys, gaussians_csv):
        out = tmp_path / "k.json"
        code, payload = _run(
            capsys, "train", "--data", str(gaussians_csv), "--mode", "kernel", "--kernel", "rbf",
            "--sigma-grid", "0.5,1", "--grid-folds", "2", "--prototypes-per-class", "1",
            "--rank", "3", "--max-epochs", "3", "--out", str(out),
        )
        assert code == 0
        assert payload["sigma"] in (0.5, 1.0)
        assert load_model(out).kernel.sigma == payload["sigma"]

    def test_config_file_with_override(self, tmp_path, capsys, gaussians_csv):
        config = tmp_path / "train.toml"
        config.write_text("[train]\nprototypes_per_class = 2\nmax_epochs = 4\nbeta = 20.0\n")
        out = tmp_path / "m.json"
        code, payload = _run(
            capsys, "train", "--data", str(gaussians_csv), "--config", str(config),
            "--prototypes-per-class", "3", "--out", str(out),
        )
        assert code == 0
        assert payload["prototypes"] == 6
        assert payload["epochs"] <= 4
        assert load_model(out).beta == 20.0

    def test_missing_label_column(self, tmp_path, capsys, caplog, gaussians_csv):
        code, _ = _run(capsys, "train", "--data", str(gaussians_csv), "--label", "species", "--out", str(tmp_path / "m.json"))
        assert code == 1
        assert "species" in caplog.text

    def test_invalid_flag_value(self, tmp_path, capsys, gaussians_csv):
        code, _ = _run(capsys, "train", "--data", str(gaussians_csv), "--beta", "-1", "--out", str(tmp_path / "m.json"))
        assert code == 1

    def test_usage_error(self, capsys):
        with pytest.raises(SystemExit) as exc:
            main(["train", "--out", "m.json"])
        assert exc.value.code == 1


class TestEvaluate:
    def test_cross_validation(self, capsys, gaussians_csv):
        code, payload = _run(
            capsys, "evaluate", "--data", str(gaussians_csv), "--folds", "3", "--repeats", "2",
            "--prototypes-per-class", "1", "--max-epochs", "5",
        )
        assert code == 0
        assert len(payload["per_fold_errors"]) == 6
        assert payload["mean_error"] <= 0.1

    def test_tiny_toy_set(self, tmp_path, capsys):
        path = tmp_path / "toy.csv"
        path.write_text("x,label\n0.0,a\n0.1,a\n5.0,b\n5.1,b\n")
        code, payload = _run(
            capsys, "evaluate", "--data", str(path), "--folds", "2", "--repeats", "1", "--prototypes-per-class", "1",
        )
        assert code == 0
        assert len(payload["per_fold_errors"]) == 2

    def test_saved_model(self, tmp_path, capsys, gaussians_csv):
        model = tmp_path / "m.json"
        _run(capsys, "train", "--data", str(gaussians_csv), "--prototypes-per-class", "1", "--max-epochs", "5", "--out", str(model))
        report = tmp_path / "report.json"
        code, payload = _run(capsys, "evaluate", "--data", str(gaussians_csv), "--model", str(model), "--out", str(report))
        assert code == 0
        assert payload["folds"] == 1
        assert json.loads(report.read_text()) == payload

    def test_dimension_mismatch(self, tmp_path, capsys, gaussians_csv, iris_csv):
        model = tmp_path / "m.json"
        _run(capsys, "train", "--data", str(gaussians_csv), "--prototypes-per-class", "1", "--max-epochs", "2", "--out", str(model))
        code, _ = _run(capsys, "evaluate", "--data", str(iris_csv), "--label", "species", "--model", str(model))
        assert code == 1


class TestProject:
    def test_rank_two_export(self, tmp_path, capsys):
        data = tmp_path / "h.csv"
        _run(capsys, "synth", "--kind", "helix", "--n", "80", "--seed", "2", "--out", str(data))
        model = tmp_path / "m.json"
        _run(capsys, "train", "--data", str(data), "--rank", "2", "--max-epochs", "10", "--out", str(model))
        out = tmp_path / "p.csv"
        code, payload = _run(capsys, "project", "--data", str(data), "--model", str(model), "--out", str(out))
        assert code == 0
        frame = pd.read_csv(out)
        assert list(frame.columns) == ["coord_1", "coord_2", "label", "predicted", "prototype"]
        assert len(frame) == 80
        assert 0.0 <= payload["projected_loo_accuracy"] <= 1.0

    def test_prototype_projects_to_origin(self, tmp_path, capsys, gaussians_csv):
        model_path = tmp_path / "m.json"
        _run(capsys, "train", "--data", str(gaussians_csv), "--prototypes-per-class", "1", "--max-epochs", "5",
             "--no-standardize", "--out", str(model_path))
        ps = load_model(model_path).prototype_set
        rows = ["x1,x2,label"]
        for s in range(ps.size):
            x1, x2 = (float(v) for v in ps.positions[:, s])
            rows.append(f"{x1!r},{x2!r},{ps.labels[s]}")
        data = tmp_path / "protos.csv"
        data.write_text("\n".join(rows) + "\n")
        out = tmp_path / "p.csv"
        code, _ = _run(capsys, "project", "--data", str(data), "--model", str(model_path), "--out", str(out))
        assert code == 0
        frame = pd.read_csv(out)
        assert frame[["coord_1", "coord_2"]].abs().to_numpy().max() <= 1e-9
        assert frame["prototype"].tolist() == list(range(ps.size))


class TestGradcheck:
    def test_defaults(self, capsys):
        code, payload = _run(capsys, "gradcheck")
        assert code == 0
        assert payload["passed"]
        assert payload["trials"] == 200
        assert payload["ratio_window"] == [0.5, 2.0]
        assert payload["out_of_window"] == 0
        assert 0.5 <= payload["ratio_range"][0] <= payload["ratio_range"][1] <= 2.0

    def test_rank_one(self, capsys):
        code, _ = _run(capsys, "gradcheck", "--rank", "1", "--trials", "50")
        assert code == 0

    def test_corrupted(self, capsys):
        code, payload = _run(capsys, "gradcheck", "--corrupt", "--trials", "20")
        assert code == 3
        assert not payload["passed"]

    def test_invalid_rank(self, capsys):
        code, _ = _run(capsys, "gradcheck", "--rank", "9")
        assert code == 1


@pytest.mark.parametrize(
    "argv",
    [
        ("train", "--prototypes-per-class", "1", "--max-epochs", "3"),
        ("evaluate", "--folds", "2", "--repeats", "1", "--prototypes-per-class", "1", "--max-epochs", "3"),
        ("gradcheck", "--trials", "5"),
    ],
)
def test_output_keys_stable_across_runs(argv, tmp_path, capsys, gaussians_csv):
    keys = []
    for seed in ("1", "2"):
        extra = ["--seed", seed]
        if argv[0] != "gradcheck":
            extra += ["--data", str(gaussians_csv)]
        if argv[0] == "train":
            extra += ["--out", str(tmp_path / f"m{seed}.json")]
        code, payload = _run(capsys, *argv, *extra)
        assert code == 0
        keys.append(set(payload))
    assert keys[0] == keys[1]
