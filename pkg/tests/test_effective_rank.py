"""Tests for effective_rank module."""

import numpy as np
import pytest

from svd_rnd.errors import InputValidationError
from svd_rnd.models import ChannelAggregation
from svd_rnd.services.degradations import svd_blur
from svd_rnd.services.effective_rank import (
    blurred_ler_curve,
    dataset_ler,
    dataset_rank_report,
    image_ler,
    image_lers,
    select_k,
    uniform_targets,
)
from svd_rnd.services.synthetic import synth_generate


def _diagonal_channel(values, size=8):
    channel = np.zeros((size, size))
    channel[range(len(values)), range(len(values))] = values
    return channel


def _brute_force_k(images, b_train):
    """Exhaustive sweep: blur the whole dataset per K and take the closest target."""
    ler_train = float(image_lers(images).mean())
    candidates = range(1, min(images.shape[-2:]))
    curve = {k: float(image_lers(svd_blur(images, k)).mean()) for k in candidates}
    chosen = []
    for i in range(1, b_train + 1):
        target = (0.5 + 0.5 * (i - 1) / b_train) * ler_train
        chosen.append(min(curve, key=lambda k: (abs(curve[k] - target), k)))
    return chosen, curve


class TestImageLer:
    """Tests for image_ler."""

    def test_flat_spectrum(self):
        image = _diagonal_channel([1.0, 1.0, 1.0, 1.0])[None]
        report = image_ler(image)
        assert report.per_channel_ler == [pytest.approx(2.0)]
        assert report.effective_rank == pytest.approx(4.0)

    def test_rank_one_channel(self):
        image = np.outer(np.arange(1, 5), np.arange(1, 5))[None].astype(float)
        report = image_ler(image)
        assert report.image_ler == pytest.approx(0.0, abs=1e-12)
        assert report.effective_rank == pytest.approx(1.0)

    def test_channel_mean_rule(self):
        image = np.stack([_diagonal_channel([1.0] * 2), _diagonal_channel([1.0] * 8)])
        report = image_ler(image)
        assert report.effective_rank == pytest.approx(5.0)
        assert report.image_ler == pytest.approx(np.log2(5.0))

    def test_log_aggregation_averages_bits(self):
        image = np.stack([_diagonal_channel([1.0] * 2), _diagonal_channel([1.0] * 8)])
        report = image_ler(image, ChannelAggregation.LOG_EFFECTIVE_RANK)
        assert report.image_ler == pytest.approx(2.0)

    def test_zero_channel_flagged(self):
        image = np.stack([np.zeros((4, 4)), np.eye(4)])
        report = image_ler(image)
        assert report.zero_channels == [0]
        assert report.per_channel_ler[0] == 0.0

    def test_scale_invariant(self):
        image = np.random.default_rng(0).random((3, 8, 8))
        assert image_ler(3.5 * image).image_ler == pytest.approx(image_ler(image).image_ler)

    def test_effective_rank_bounded_by_numerical_rank(self):
        image = _diagonal_channel([1.0, 0.5, 0.25])[None]
        report = image_ler(image)
        assert 1.0 <= report.effective_rank < 3.0


class TestDatasetLer:
    """Tests for dataset_ler."""

    def test_identical_images(self):
        image = np.random.default_rng(1).random((3, 8, 8))
        images = np.stack([image] * 4)
        assert dataset_ler(images) == pytest.approx(image_ler(image).image_ler)

    def test_mean_of_two(self):
        images = np.stack([_diagonal_channel([1.0] * 4)[None], _diagonal_channel([1.0] * 8)[None]])
        assert dataset_ler(images) == pytest.approx((2.0 + 3.0) / 2)

    def test_matches_image_by_image(self):
        images = synth_generate("smooth_textures", 12, (3, 16, 16), seed=2).images
        expected = np.mean([image_ler(img).image_ler for img in images])
        assert dataset_ler(images) == pytest.approx(expected, abs=1e-9)

    def test_empty_rejected(self):
        with pytest.raises(InputValidationError):
            dataset_ler(np.zeros((0, 3, 8, 8)))


class TestUniformTargets:
    """Tests for uniform_targets."""

    def test_closed_form_values(self):
        assert uniform_targets(4.0, 1) == [2.0]
        assert uniform_targets(4.0, 2) == [2.0, 3.0]
        assert uniform_targets(4.0, 3) == pytest.approx([2.0, 8.0 / 3.0, 10.0 / 3.0])
        assert uniform_targets(4.0, 4) == [2.0, 2.5, 3.0, 3.5]

    def test_strictly_increasing_and_bounded(self):
        targets = uniform_targets(3.7, 6)
        assert all(a < b for a, b in zip(targets, targets[1:]))
        assert targets[-1] < 3.7

    def test_b_zero_rejected(self):
        with pytest.raises(InputValidationError):
            uniform_targets(4.0, 0)


class TestSelectK:
    """Tests for blurred_ler_curve and select_k."""

    def test_curve_non_increasing_in_k(self):
        images = synth_generate("highfreq_noise", 6, (3, 12, 12), seed=3).images
        curve = blurred_ler_curve(images, range(1, 12))
        values = [curve[k] for k in range(1, 12)]
        # clamping can nudge a truncated spectrum, so allow a little per-image noise
        assert all(b <= a + 0.05 for a, b in zip(values, values[1:]))

    @pytest.mark.parametrize("seed", [0, 1, 2, 3, 4])
    def test_matches_brute_force(self, seed):
        images = synth_generate("smooth_textures", 10, (3, 12, 12), seed=seed).images
        selection = select_k(images, 1)
        chosen, curve = _brute_force_k(np.asarray(images, dtype=np.float64), 1)
        assert selection.chosen_k == chosen
        for k, value in curve.items():
            assert selection.candidates[k] == pytest.approx(value, abs=1e-9)

    def test_chosen_k_non_increasing(self):
        images = synth_generate("highfreq_noise", 8, (3, 16, 16), seed=5).images
        selection = select_k(images, 3)
        assert len(selection.chosen_k) == 3
        assert all(a >= b for a, b in zip(selection.chosen_k, selection.chosen_k[1:]))
        assert selection.targets == pytest.approx(uniform_targets(selection.ler_train, 3))

    def test_rank_one_dataset_is_degenerate(self):
        base = np.outer(np.linspace(0.1, 1.0, 8), np.linspace(0.2, 0.9, 8))
        images = np.stack([np.stack([base] * 3)] * 4)
        selection = select_k(images, 2)
        assert selection.degenerate
        assert selection.targets == [0.0, 0.0]
        # every candidate is equally close, so the smallest K wins
        assert selection.chosen_k == [1, 1]

    def test_explicit_candidates(self):
        images = synth_generate("smooth_textures", 5, (3, 16, 16), seed=6).images
        selection = select_k(images, 1, candidates=[12, 4, 8])
        assert sorted(selection.candidates) == [4, 8, 12]
        assert selection.chosen_k[0] in (4, 8, 12)

    def test_tiny_images_rejected(self):
        with pytest.raises(InputValidationError, match="cannot be SVD-blurred"):
            select_k(np.ones((2, 1, 1, 1)), 1)

    def test_b_zero_rejected(self):
        with pytest.raises(InputValidationError):
            select_k(np.ones((2, 1, 4, 4)), 0)


class TestDatasetRankReport:
    """Tests for dataset_rank_report."""

    def test_counts_zero_channel_images(self):
        images = np.random.default_rng(7).random((3, 2, 6, 6))
        images[1, 0] = 0.0
        report = dataset_rank_report(images, "mixed")
        assert report.count == 3
        assert report.zero_channel_images == 1
        assert report.effective_rank == pytest.approx(2.0**report.dataset_ler)
