"""End-to-end tests for the svd-rnd command line."""

import numpy as np
import pytest
import yaml

from svd_rnd.cli import EXIT_NUMERICAL, EXIT_OK, EXIT_VALIDATION, main
from svd_rnd.services import data_io
from svd_rnd.services.detection import write_scores
from svd_rnd.services.effective_rank import select_k

SHAPE = "3,8,8"


def _run(*args) -> int:
    return main([str(a) for a in args])


def _synth(kind, n, out, seed=0) -> int:
    return _run("synth", "--kind", kind, "--n", n, "--shape", SHAPE, "--seed", seed, "--out", out)


def _recipe_manifest(name, kind, n, seed):
    return {
        "name": name,
        "recipe": {"kind": kind, "n": n, "shape": [3, 8, 8], "seed": seed},
        "count": n,
        "shape": [3, 8, 8],
    }


@pytest.fixture
def experiment(tmp_path):
    """A small b_train=1 experiment over synthetic corpora."""
    config = {
        "train": _recipe_manifest("train", "smooth_textures", 40, 0),
        "test_in": _recipe_manifest("test_in", "smooth_textures", 20, 1),
        "test_ood": [_recipe_manifest("noise", "highfreq_noise", 20, 2)],
        "training": {
            "b_train": 1,
            "degradations": [{"kind": "svd_blur", "k": 3}],
            "feature_dim": 16,
            "batch_size": 16,
            "epochs": 2,
        },
        "seeds": [0],
    }
    path = tmp_path / "experiment.yaml"
    path.write_text(yaml.safe_dump(config))
    return path


@pytest.fixture
def corpus(tmp_path):
    out = tmp_path / "train.rndt"
    assert _synth("smooth_textures", 12, out, seed=4) == EXIT_OK
    return out


@pytest.fixture
def model(experiment, tmp_path):
    out = tmp_path / "model.ckpt"
    assert _run("train", "--config", experiment, "--out", out) == EXIT_OK
    return out


class TestDatasetCommands:
    """Tests for synth, blur, effective-rank and select-k."""

    def test_synth_writes_container_manifest_and_stamp(self, corpus):
        assert data_io.read_container(corpus).shape == (12, 3, 8, 8)
        manifest = yaml.safe_load(corpus.with_suffix(".yaml").read_text())
        assert manifest["recipe"]["seed"] == 4
        stamp = yaml.safe_load(corpus.with_name("train.rndt.stamp.yaml").read_text())
        assert stamp["command"] == "synth"
        assert stamp["seeds"] == [4]
        assert "torch" in stamp["versions"]

    def test_manifest_regenerates_container(self, corpus):
        regenerated = data_io.load_dataset(data_io.load_manifest(corpus.with_suffix(".yaml")))
        np.testing.assert_array_equal(regenerated.images, data_io.read_container(corpus))

    def test_blur(self, corpus, tmp_path):
        out = tmp_path / "blurred.rndt"
        assert _run("blur", "--method", "svd", "--param", 3, "--in", corpus, "--out", out) == 0
        assert data_io.read_container(out).shape == (12, 3, 8, 8)

    def test_blur_bad_param(self, corpus, tmp_path):
        out = tmp_path / "x.rndt"
        code = _run("blur", "--method", "gauss", "--param", "3by5", "--in", corpus, "--out", out)
        assert code == EXIT_VALIDATION

    def test_effective_rank_report(self, corpus, tmp_path):
        out = tmp_path / "rank.yaml"
        assert _run("effective-rank", "--in", corpus, "--out", out) == EXIT_OK
        report = yaml.safe_load(out.read_text())
        assert report["count"] == 12
        assert report["effective_rank"] == pytest.approx(2.0 ** report["dataset_ler"])

    def test_effective_rank_markdown(self, corpus, tmp_path):
        out = tmp_path / "rank.md"
        assert _run("effective-rank", "--in", corpus, "--out", out) == EXIT_OK
        assert out.read_text().startswith("# Dataset Effective Rank: train")

    def test_select_k_matches_library(self, corpus, tmp_path):
        out = tmp_path / "select.yaml"
        assert _run("select-k", "--in", corpus, "--b", 1, "--out", out) == EXIT_OK
        expected = select_k(data_io.read_container(corpus), 1)
        assert yaml.safe_load(out.read_text())["chosen_k"] == expected.chosen_k

    def test_select_k_rejects_zero_b(self, corpus):
        assert _run("select-k", "--in", corpus, "--b", 0) == EXIT_VALIDATION

    def test_blur_carries_labels_per_variant(self, tmp_path):
        data = tmp_path / "data.rndt"
        _synth("blobs", 4, data)
        labels = data_io.write_containers(
            tmp_path / "labels.rndt", [np.array([0, 1, 2, 3], dtype=np.uint8)]
        )
        manifest = tmp_path / "data.yaml"
        manifest.write_text(
            yaml.safe_dump(
                {
                    "name": "data",
                    "source": "data.rndt",
                    "labels_source": "labels.rndt",
                    "count": 4,
                    "shape": [3, 8, 8],
                }
            )
        )
        out, labels_out = tmp_path / "rot.rndt", tmp_path / "rot_labels.rndt"
        args = ("--in", manifest, "--out", out, "--labels-out", labels_out)
        assert _run("blur", "--method", "geom", "--param", "rotate", *args) == EXIT_OK
        assert data_io.read_container(out).shape == (12, 3, 8, 8)
        assert data_io.read_container(labels_out).tolist() == [0, 0, 0, 1, 1, 1, 2, 2, 2, 3, 3, 3]
        assert labels.is_file()

    def test_blur_labels_need_labelled_input(self, corpus, tmp_path):
        args = ("--in", corpus, "--out", tmp_path / "x.rndt", "--labels-out", tmp_path / "y.rndt")
        assert _run("blur", "--method", "svd", "--param", 3, *args) == EXIT_VALIDATION

    def test_rotate_non_square_exits_with_validation_code(self, tmp_path):
        data = tmp_path / "wide.rndt"
        synth_args = ("--kind", "blobs", "--n", 2, "--shape", "1,8,6", "--out", data)
        assert _run("synth", *synth_args) == EXIT_OK
        args = ("--in", data, "--out", tmp_path / "rot.rndt")
        assert _run("blur", "--method", "geom", "--param", "rotate", *args) == EXIT_VALIDATION

    def test_stamp_versions_are_plain_strings(self, corpus):
        stamp = yaml.safe_load(corpus.with_name("train.rndt.stamp.yaml").read_text())
        assert set(stamp["versions"]) == {"svd_rnd", "numpy", "scipy", "torch", "scikit-learn"}
        assert all(type(v) is str for v in stamp["versions"].values())

    def test_missing_input(self, tmp_path):
        assert _run("effective-rank", "--in", tmp_path / "absent.rndt") == EXIT_VALIDATION


class TestEvalCommand:
    """Tests for eval."""

    def test_perfect_separation_fixture(self, tmp_path, capsys):
        in_path = write_scores(np.array([0.1, 0.2, 0.3]), tmp_path / "in.csv")
        ood_path = write_scores(np.array([0.8, 0.9]), tmp_path / "ood.csv")
        out = tmp_path / "report.yaml"
        code = _run(
            "eval", "--in-scores", in_path, "--ood-scores", ood_path, "--table-row", "--out", out
        )
        assert code == EXIT_OK
        (report,) = yaml.safe_load(out.read_text())["reports"]
        for name in ("auroc", "aupr_in", "aupr_out", "detection_accuracy", "tnr_at_95tpr"):
            assert report[name] == 1.0
        assert "RND | 100.0 | 100.0 | 100.0 | 100.0 | 100.0" in capsys.readouterr().out

    def test_name_count_mismatch(self, tmp_path):
        path = write_scores(np.array([0.1]), tmp_path / "in.csv")
        code = _run("eval", "--in-scores", path, "--ood-scores", path, "--names", "a,b")
        assert code == EXIT_VALIDATION

    def test_missing_scores(self, tmp_path):
        code = _run("eval", "--in-scores", tmp_path / "a.csv", "--ood-scores", tmp_path / "b.csv")
        assert code == EXIT_VALIDATION


class TestPipeline:
    """synth, train, score, eval and the probes chained through the CLI."""

    def test_train_writes_step_log(self, model):
        steps = model.with_name("model.ckpt.steps.csv").read_text().splitlines()
        assert steps[0] == "step,dataset_index,loss,lr"
        # 40 images in batches of 16: 3 rounds x 2 datasets x 2 epochs
        assert len(steps) == 1 + 12
        stamp = yaml.safe_load(model.with_name("model.ckpt.stamp.yaml").read_text())
        assert stamp["command"] == "train"

    def test_score_then_eval(self, model, tmp_path):
        in_data, ood_data = tmp_path / "in.rndt", tmp_path / "ood.rndt"
        _synth("smooth_textures", 10, in_data, seed=9)
        _synth("highfreq_noise", 10, ood_data, seed=9)
        in_scores, ood_scores = tmp_path / "in.csv", tmp_path / "noise.csv"
        assert _run("score", "--model", model, "--data", in_data, "--out", in_scores) == 0
        assert _run("score", "--model", model, "--data", ood_data, "--out", ood_scores) == 0

        report = tmp_path / "eval.md"
        code = _run(
            "eval",
            "--in-scores",
            in_scores,
            "--ood-scores",
            ood_scores,
            "--label",
            "SVD-RND",
            "--out",
            report,
        )
        assert code == EXIT_OK
        text = report.read_text()
        assert text.startswith("# Detection Metrics: SVD-RND")
        assert "| noise | 10 | 10 |" in text

    def test_score_is_byte_identical_on_rerun(self, model, tmp_path):
        data = tmp_path / "in.rndt"
        _synth("smooth_textures", 10, data, seed=5)
        first, second = tmp_path / "first.csv", tmp_path / "second.csv"
        assert _run("score", "--model", model, "--data", data, "--out", first) == EXIT_OK
        assert _run("score", "--model", model, "--data", data, "--out", second) == EXIT_OK
        assert first.read_bytes() == second.read_bytes()

    def test_typicality_scores(self, model, tmp_path):
        data, out = tmp_path / "in.rndt", tmp_path / "typ.csv"
        _synth("smooth_textures", 10, data, seed=3)
        args = ("--model", model, "--data", data, "--scorer", "typicality", "--out", out)
        code = _run("score", *args)
        assert code == EXIT_OK
        assert len(out.read_text().splitlines()) == 11

    def test_linear_probe(self, model, tmp_path):
        data = tmp_path / "data.rndt"
        _synth("blobs", 20, data)
        labels = data_io.write_containers(
            tmp_path / "labels.rndt", [np.arange(20, dtype=np.uint8) % 2]
        )
        out = tmp_path / "probe.yaml"
        code = _run("probe", "--model", model, "--data", data, "--labels", labels, "--out", out)
        assert code == EXIT_OK
        report = yaml.safe_load(out.read_text())
        assert 0.0 <= report["accuracy"] <= 1.0
        assert report["classes"] == 2

    def test_orthogonal_probe(self, model, tmp_path):
        data, out = tmp_path / "data.rndt", tmp_path / "ortho.yaml"
        _synth("blobs", 20, data)
        args = ("--model", model, "--data", data, "--alphas", "5,10", "--seeds", 2, "--out", out)
        code = _run("orthogonal-probe", *args)
        assert code == EXIT_OK
        rows = yaml.safe_load(out.read_text())["rows"]
        assert [r["label"] for r in rows[:2]] == ["original", "svd_blur(k=3)"]
        assert len(rows) == 4

    def test_train_fraction_too_small(self, experiment, tmp_path):
        out = tmp_path / "m.ckpt"
        code = _run("train", "--config", experiment, "--out", out, "--train-fraction", 0.1)
        assert code == EXIT_VALIDATION

    def test_divergence_exits_with_numerical_code(self, experiment, tmp_path):
        config = yaml.safe_load(experiment.read_text())
        config["training"].update({"base_lr": 1e30, "annealed_lr": 1e30})
        experiment.write_text(yaml.safe_dump(config))
        code = _run("train", "--config", experiment, "--out", tmp_path / "m.ckpt")
        assert code == EXIT_NUMERICAL

    def test_invalid_config(self, experiment, tmp_path):
        config = yaml.safe_load(experiment.read_text())
        config["training"]["b_train"] = 2
        experiment.write_text(yaml.safe_dump(config))
        code = _run("train", "--config", experiment, "--out", tmp_path / "m.ckpt")
        assert code == EXIT_VALIDATION

    def test_sweep_k(self, experiment, tmp_path):
        out = tmp_path / "sweep.yaml"
        assert _run("sweep-k", "--config", experiment, "--grid", "2,5", "--out", out) == 0
        report = yaml.safe_load(out.read_text())
        assert report["chosen"] in ("2", "5")
        assert len(report["rows"]) == 2

    def test_train_defaults_to_output_dir(self, experiment, tmp_path):
        config = yaml.safe_load(experiment.read_text())
        config["output_dir"] = str(tmp_path / "runs")
        experiment.write_text(yaml.safe_dump(config))
        assert _run("train", "--config", experiment, "--seed", 3) == EXIT_OK
        assert (tmp_path / "runs" / "train-seed3.ckpt").is_file()
