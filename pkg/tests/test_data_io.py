"""Tests for data_io module."""

import struct

import numpy as np
import pytest
import yaml

from svd_rnd.errors import ContainerFormatError, InputValidationError
from svd_rnd.models import DatasetManifest, SourceFormat
from svd_rnd.services.data_io import (
    CIFAR_RECORD_BYTES,
    MAGIC,
    ImageDataset,
    decode_containers,
    encode_container,
    load_dataset,
    load_experiment_config,
    load_manifest,
    read_cifar,
    read_containers,
    resize_bilinear,
    save_dataset,
    split,
    split_indices,
    subsample,
    validation_slice,
    write_containers,
)
from svd_rnd.services.synthetic import synth_generate


def _manifest(source, count, shape=(3, 4, 4), **extra):
    return DatasetManifest(name="test", source=str(source), count=count, shape=shape, **extra)


class TestContainers:
    """Tests for encode_container and decode_containers."""

    def test_header_layout(self):
        blob = encode_container(np.zeros((2, 3), dtype=np.uint8))
        assert blob[:4] == MAGIC
        assert struct.unpack_from("<HBB", blob, 4) == (1, 0, 2)
        assert struct.unpack_from("<2I", blob, 8) == (2, 3)
        assert len(blob) == 8 + 8 + 6

    def test_float_payload_is_little_endian_f4(self):
        blob = encode_container(np.array([1.5], dtype=np.float64))
        assert blob[6] == 1
        assert struct.unpack("<f", blob[-4:]) == (1.5,)

    def test_both_dtypes_are_bit_exact(self):
        rng = np.random.default_rng(0)
        floats = rng.standard_normal((4, 3, 5, 5)).astype(np.float32)
        bytes_ = rng.integers(0, 256, (7, 2), dtype=np.uint8)
        decoded = decode_containers(encode_container(floats) + encode_container(bytes_))
        assert decoded[0].dtype == np.float32 and decoded[1].dtype == np.uint8
        np.testing.assert_array_equal(decoded[0], floats)
        np.testing.assert_array_equal(decoded[1], bytes_)

    def test_bad_magic_reports_offset(self):
        good = encode_container(np.zeros(3, dtype=np.uint8))
        with pytest.raises(ContainerFormatError, match="bad magic") as excinfo:
            decode_containers(good + b"XXXX" + good[4:])
        assert excinfo.value.offset == len(good)

    def test_unknown_dtype_rejected(self):
        blob = bytearray(encode_container(np.zeros(3, dtype=np.uint8)))
        blob[6] = 7
        with pytest.raises(ContainerFormatError, match="dtype code") as excinfo:
            decode_containers(bytes(blob))
        assert excinfo.value.offset == 6

    def test_bad_version_rejected(self):
        blob = bytearray(encode_container(np.zeros(3, dtype=np.uint8)))
        blob[4] = 9
        with pytest.raises(ContainerFormatError, match="version"):
            decode_containers(bytes(blob))

    def test_truncated_payload_rejected(self):
        blob = encode_container(np.zeros((4, 4), dtype=np.float32))
        with pytest.raises(ContainerFormatError, match="truncated payload") as excinfo:
            decode_containers(blob[:-1])
        assert excinfo.value.offset == 16

    def test_truncated_header_rejected(self):
        with pytest.raises(ContainerFormatError, match="header"):
            decode_containers(b"RND")

    def test_file_round_trip(self, tmp_path):
        arrays = [np.arange(6, dtype=np.float32).reshape(2, 3)]
        path = write_containers(tmp_path / "sub" / "x.rndt", arrays)
        np.testing.assert_array_equal(read_containers(path)[0], arrays[0])

    def test_missing_file_rejected(self, tmp_path):
        with pytest.raises(InputValidationError, match="not found"):
            read_containers(tmp_path / "nope.rndt")

    def test_empty_file_rejected(self, tmp_path):
        path = tmp_path / "empty.rndt"
        path.write_bytes(b"")
        with pytest.raises(ContainerFormatError, match="no containers"):
            read_containers(path)


class TestCifar:
    """Tests for read_cifar."""

    def test_single_record_layout(self, tmp_path):
        record = np.zeros(CIFAR_RECORD_BYTES, dtype=np.uint8)
        record[0] = 7
        record[1 : 1 + 1024] = 10
        record[1 + 1024 : 1 + 2048] = 20
        record[1 + 2048 :] = 30
        record[1 + 32 + 5] = 99  # red channel, row 1, column 5
        path = tmp_path / "data_batch_1.bin"
        path.write_bytes(record.tobytes())
        images, labels = read_cifar(path)
        assert images.shape == (1, 3, 32, 32)
        assert labels.tolist() == [7]
        assert images[0, 1, 0, 0] == 20 and images[0, 2, 31, 31] == 30
        assert images[0, 0, 1, 5] == 99

    def test_partial_record_rejected(self, tmp_path):
        path = tmp_path / "bad.bin"
        path.write_bytes(bytes(CIFAR_RECORD_BYTES + 10))
        with pytest.raises(ContainerFormatError) as excinfo:
            read_cifar(path)
        assert excinfo.value.offset == CIFAR_RECORD_BYTES

    def test_load_dataset_scales_cifar(self, tmp_path):
        records = np.full((2, CIFAR_RECORD_BYTES), 255, dtype=np.uint8)
        records[:, 0] = [3, 4]
        path = tmp_path / "batch.bin"
        path.write_bytes(records.tobytes())
        dataset = load_dataset(
            _manifest(path, 2, shape=(3, 32, 32), format=SourceFormat.CIFAR)
        )
        assert dataset.images.dtype == np.float32
        assert float(dataset.images.max()) == 1.0
        assert dataset.labels.tolist() == [3, 4]


class TestLoadDataset:
    """Tests for manifests and load_dataset."""

    def test_u8_scaled_and_ordered(self, tmp_path):
        raw = np.arange(2 * 3 * 4 * 4, dtype=np.uint8).reshape(2, 3, 4, 4)
        path = write_containers(tmp_path / "x.rndt", [raw])
        dataset = load_dataset(_manifest(path, 2))
        np.testing.assert_array_equal(dataset.images, raw.astype(np.float32) / np.float32(255))

    def test_count_takes_prefix(self, tmp_path):
        raw = np.random.default_rng(1).random((5, 3, 4, 4)).astype(np.float32)
        path = write_containers(tmp_path / "x.rndt", [raw])
        np.testing.assert_array_equal(load_dataset(_manifest(path, 3)).images, raw[:3])

    def test_count_above_records_rejected(self, tmp_path):
        path = write_containers(tmp_path / "x.rndt", [np.zeros((2, 3, 4, 4), np.float32)])
        with pytest.raises(InputValidationError, match="exceeds"):
            load_dataset(_manifest(path, 3))

    def test_shape_mismatch_rejected(self, tmp_path):
        path = write_containers(tmp_path / "x.rndt", [np.zeros((2, 3, 4, 4), np.float32)])
        with pytest.raises(InputValidationError, match="manifest says"):
            load_dataset(_manifest(path, 2, shape=(1, 4, 4)))

    def test_resize_on_load(self, tmp_path):
        path = write_containers(tmp_path / "x.rndt", [np.full((1, 3, 8, 8), 0.25, np.float32)])
        dataset = load_dataset(_manifest(path, 1, shape=(3, 4, 4), resize_to=4))
        np.testing.assert_allclose(dataset.images, 0.25)

    def test_save_then_load_with_labels(self, tmp_path):
        generated = synth_generate("blobs", 4, (3, 4, 4), seed=2)
        labelled = ImageDataset(generated.images, generated.manifest, np.array([0, 1, 1, 0]))
        save_dataset(labelled, tmp_path / "x.rndt", tmp_path / "y.rndt")
        manifest = _manifest(tmp_path / "x.rndt", 4, labels_source=str(tmp_path / "y.rndt"))
        loaded = load_dataset(manifest)
        np.testing.assert_array_equal(loaded.images, generated.images)
        assert loaded.labels.tolist() == [0, 1, 1, 0]

    def test_recipe_regenerates_corpus(self):
        generated = synth_generate("checker", 3, (3, 6, 6), seed=4)
        reloaded = load_dataset(generated.manifest)
        np.testing.assert_array_equal(reloaded.images, generated.images)

    def test_manifest_paths_resolve_relative(self, tmp_path):
        (tmp_path / "m.yaml").write_text(
            yaml.safe_dump({"name": "x", "source": "x.rndt", "count": 1, "shape": [3, 4, 4]})
        )
        manifest = load_manifest(tmp_path / "m.yaml")
        assert manifest.source == str(tmp_path / "x.rndt")

    def test_manifest_needs_one_source(self):
        with pytest.raises(ValueError, match="exactly one"):
            DatasetManifest(name="x", count=1, shape=(3, 4, 4))

    def test_validation_slice(self):
        dataset = synth_generate("blobs", 5, (1, 4, 4), seed=0)
        assert len(validation_slice(dataset, limit=3)) == 3
        assert len(validation_slice(dataset, limit=1000)) == 5
        np.testing.assert_array_equal(validation_slice(dataset, 2).images, dataset.images[:2])


class TestResizeBilinear:
    """Tests for resize_bilinear."""

    def test_same_size_is_identity(self):
        image = np.random.default_rng(0).random((3, 32, 32))
        np.testing.assert_array_equal(resize_bilinear(image, 32, 32), image)

    def test_constant_stays_constant(self):
        np.testing.assert_allclose(resize_bilinear(np.full((3, 5, 7), 0.6), 32, 32), 0.6)

    def test_ramp_matches_closed_form(self):
        ramp = np.tile(np.arange(64) / 63.0, (1, 64, 1))
        out = resize_bilinear(ramp, 32, 32)
        np.testing.assert_allclose(out[0], np.tile(np.arange(32) / 31.0, (32, 1)), atol=1e-6)

    def test_preserves_unit_range(self):
        image = np.random.default_rng(1).random((2, 3, 13, 9))
        out = resize_bilinear(image, 32, 32)
        assert out.shape == (2, 3, 32, 32)
        assert out.min() >= 0.0 and out.max() <= 1.0

    def test_zero_size_rejected(self):
        with pytest.raises(InputValidationError):
            resize_bilinear(np.ones((1, 4, 4)), 0, 4)


class TestSplits:
    """Tests for split_indices, split and subsample."""

    def test_identity_split(self):
        data = np.arange(10)
        (part,) = split(data, [1.0], seed=0)
        np.testing.assert_array_equal(part, data)

    def test_halves_partition(self):
        first, second = split_indices(10, [0.5, 0.5], seed=1)
        assert not set(first) & set(second)
        assert sorted(np.concatenate([first, second]).tolist()) == list(range(10))

    def test_same_seed_same_permutation(self):
        a = split_indices(50, [0.3], seed=9)[0]
        b = split_indices(50, [0.3], seed=9)[0]
        np.testing.assert_array_equal(a, b)

    def test_nested_prefixes(self):
        small = set(split_indices(100, [0.2], seed=3)[0])
        large = set(split_indices(100, [0.6], seed=3)[0])
        assert small <= large

    def test_split_dataset_keeps_labels(self):
        generated = synth_generate("blobs", 6, (1, 4, 4), seed=0)
        dataset = ImageDataset(generated.images, generated.manifest, np.arange(6))
        first, _ = split(dataset, [0.5, 0.5], seed=2)
        for image, label in zip(first.images, first.labels):
            np.testing.assert_array_equal(image, generated.images[label])
        assert first.manifest.count == 3

    def test_empty_split_rejected(self):
        with pytest.raises(InputValidationError, match="empty"):
            split_indices(3, [0.1], seed=0)

    def test_oversubscribed_rejected(self):
        with pytest.raises(InputValidationError, match="sum"):
            split_indices(10, [0.6, 0.6], seed=0)

    def test_subsample_below_minimum_rejected(self):
        with pytest.raises(InputValidationError, match="fewer than one batch"):
            subsample(np.arange(20), 0.25, seed=0, min_count=8)

    def test_subsample_full_is_untouched(self):
        data = np.arange(5)
        assert subsample(data, 1.0, seed=0) is data


class TestExperimentConfig:
    """Tests for load_experiment_config."""

    def test_inline_and_file_manifests(self, tmp_path):
        (tmp_path / "ood.yaml").write_text(
            yaml.safe_dump(
                {
                    "name": "noise",
                    "recipe": {"kind": "highfreq_noise", "n": 4, "shape": [3, 8, 8]},
                    "count": 4,
                    "shape": [3, 8, 8],
                }
            )
        )
        recipe = {"kind": "smooth_textures", "n": 8, "shape": [3, 8, 8]}
        config = {
            "train": {"name": "train", "recipe": recipe, "count": 8, "shape": [3, 8, 8]},
            "test_in": {"name": "in", "recipe": recipe, "count": 8, "shape": [3, 8, 8]},
            "test_ood": ["ood.yaml"],
            "training": {"b_train": 1, "degradations": [{"kind": "svd_blur", "k": 5}]},
        }
        (tmp_path / "exp.yaml").write_text(yaml.safe_dump(config))
        experiment = load_experiment_config(tmp_path / "exp.yaml")
        assert experiment.test_ood[0].name == "noise"
        assert experiment.training.b_train == 1
        assert experiment.seeds == [0]

    def test_degradation_count_must_match(self, tmp_path):
        recipe = {"kind": "smooth_textures", "n": 8, "shape": [3, 8, 8]}
        manifest = {"name": "t", "recipe": recipe, "count": 8, "shape": [3, 8, 8]}
        config = {"train": manifest, "test_in": manifest, "training": {"b_train": 2}}
        (tmp_path / "exp.yaml").write_text(yaml.safe_dump(config))
        with pytest.raises(ValueError, match="degradations"):
            load_experiment_config(tmp_path / "exp.yaml")

    def test_missing_config_rejected(self, tmp_path):
        with pytest.raises(InputValidationError, match="not found"):
            load_experiment_config(tmp_path / "absent.yaml")
