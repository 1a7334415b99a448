"""Tests for detection module."""

import numpy as np
import pytest

from svd_rnd import config
from svd_rnd.errors import InputValidationError
from svd_rnd.models import (
    DegradationKind,
    DegradationSpec,
    OrthogonalProbeSpec,
    Scorer,
    TrainConfig,
)
from svd_rnd.services.degradations import orthogonal_perturb
from svd_rnd.services.detection import (
    orthogonal_probe,
    read_scores,
    score,
    score_records,
    typicality_score,
    uncertainty,
    write_scores,
)
from svd_rnd.services.rnd_trainer import train
from svd_rnd.services.synthetic import synth_generate

SHAPE = (3, 8, 8)


@pytest.fixture(scope="module")
def model():
    images = synth_generate("smooth_textures", 32, SHAPE, seed=0).images
    return train(images, TrainConfig(b_train=0, feature_dim=16, batch_size=16, epochs=2))


@pytest.fixture(scope="module")
def images():
    return synth_generate("checker", 10, SHAPE, seed=1).images


@pytest.fixture(scope="module")
def corpus():
    return synth_generate("smooth_textures", 48, SHAPE, seed=5).images


@pytest.fixture(scope="module")
def fitted(corpus):
    """A plain RND model trained long enough for its residual to settle."""
    return train(corpus, TrainConfig(b_train=0, feature_dim=16, batch_size=16, epochs=30))


class TestUncertainty:
    """Tests for uncertainty and typicality_score."""

    def test_stack_gives_one_score_per_image(self, model, images):
        scores = uncertainty(model, images)
        assert scores.shape == (10,)
        assert np.all(scores >= 0)

    def test_single_image_gives_float(self, model, images):
        value = uncertainty(model, images[3])
        assert isinstance(value, float)
        assert value == pytest.approx(uncertainty(model, images)[3], rel=1e-5)

    def test_batching_does_not_change_scores(self, model, images, monkeypatch):
        full = uncertainty(model, images)
        monkeypatch.setattr(config, "SCORE_BATCH_SIZE", 3)
        np.testing.assert_allclose(uncertainty(model, images), full, rtol=1e-5)

    def test_shape_mismatch_rejected(self, model):
        with pytest.raises(InputValidationError, match="model expects"):
            uncertainty(model, np.zeros((2, 3, 16, 16)))

    def test_typicality_is_distance_to_train_mean(self, model, images):
        expected = np.abs(uncertainty(model, images) - model.train_loss_mean)
        np.testing.assert_allclose(typicality_score(model, images), expected)

    def test_score_dispatches_on_scorer(self, model, images):
        np.testing.assert_array_equal(score(model, images, Scorer.RND), uncertainty(model, images))
        np.testing.assert_array_equal(
            score(model, images, "typicality"), typicality_score(model, images)
        )

    def test_score_needs_a_stack(self, model, images):
        with pytest.raises(InputValidationError, match="stack"):
            score(model, images[0])

    def test_score_records(self):
        records = score_records(np.array([0.5, 1.5]), Scorer.RND)
        assert [r.sample_index for r in records] == [0, 1]
        assert records[1].uncertainty == 1.5
        assert all(r.scorer == Scorer.RND for r in records)

    def test_scores_ignore_auxiliary_targets(self, corpus, images):
        config_b1 = TrainConfig(
            b_train=1,
            degradations=[DegradationSpec(kind=DegradationKind.SVD_BLUR, k=3)],
            feature_dim=16,
            batch_size=16,
            epochs=2,
        )
        model_b1 = train(corpus, config_b1)
        before = uncertainty(model_b1, images)
        typical_before = typicality_score(model_b1, images)
        auxiliary = model_b1.targets[1]
        auxiliary.load_parameter_vector(np.zeros(auxiliary.parameter_count))
        np.testing.assert_array_equal(uncertainty(model_b1, images), before)
        np.testing.assert_array_equal(typicality_score(model_b1, images), typical_before)

    def test_typicality_grows_under_orthogonal_noise(self, fitted, corpus):
        perturbed = np.stack(
            [
                orthogonal_perturb(image, OrthogonalProbeSpec(alpha=20, seed=i))
                for i, image in enumerate(corpus)
            ]
        )
        in_typicality = np.mean(typicality_score(fitted, corpus))
        assert in_typicality <= np.mean(typicality_score(fitted, perturbed))


class TestScoreFiles:
    """Tests for write_scores and read_scores."""

    def test_round_trip_is_exact(self, tmp_path):
        scores = np.random.default_rng(0).random(25) * 1e3
        path = write_scores(scores, tmp_path / "scores.csv")
        assert path.read_text().splitlines()[0] == "sample_index,score"
        np.testing.assert_array_equal(read_scores(path), scores)

    def test_missing_file_rejected(self, tmp_path):
        with pytest.raises(InputValidationError, match="not found"):
            read_scores(tmp_path / "absent.csv")

    def test_header_only_rejected(self, tmp_path):
        path = tmp_path / "empty.csv"
        path.write_text("sample_index,score\n")
        with pytest.raises(InputValidationError, match="no scores"):
            read_scores(path)

    def test_malformed_row_rejected(self, tmp_path):
        path = tmp_path / "bad.csv"
        path.write_text("sample_index,score\n0,abc\n")
        with pytest.raises(InputValidationError, match="malformed"):
            read_scores(path)


class TestOrthogonalProbe:
    """Tests for orthogonal_probe."""

    def test_table_layout(self, model, images):
        table = orthogonal_probe(model, images, alphas=[5.0, 10.0], seeds=[0, 1, 2], blur_k=3)
        labels = [row.label for row in table.rows]
        assert labels == [
            "original",
            "svd_blur(k=3)",
            "orthogonal(alpha=5)",
            "orthogonal(alpha=10)",
        ]
        for row in table.rows[2:]:
            assert len(row.per_seed) == 3
            assert row.mean_uncertainty == min(row.per_seed)
        assert table.rows[0].mean_uncertainty == pytest.approx(
            float(np.mean(uncertainty(model, images)))
        )

    def test_needs_alphas(self, model, images):
        with pytest.raises(InputValidationError, match="alpha"):
            orthogonal_probe(model, images, alphas=[], seeds=[0], blur_k=3)

    def test_needs_seeds(self, model, images):
        with pytest.raises(InputValidationError, match="seed"):
            orthogonal_probe(model, images, alphas=[5.0], seeds=[], blur_k=3)
