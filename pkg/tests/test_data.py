import numpy as np
import pytest

from duoclust.data import (
    RECORD_BYTES,
    BlobsConfig,
    LabeledDataset,
    epoch_batches,
    generate_blobs,
    load_cifar10_binary,
    load_dataset_csv,
    sample_minibatch,
    save_dataset_csv,
)


class TestLabeledDataset:
    def test_length_mismatch_rejected(self):
        with pytest.raises(ValueError, match="equal length"):
            LabeledDataset(np.zeros((3, 2)), np.zeros(2, dtype=int), num_classes=2)

    def test_label_out_of_range_rejected(self):
        with pytest.raises(ValueError, match="num_classes"):
            LabeledDataset(np.zeros((2, 2)), np.array([0, 2]), num_classes=2)

    def test_vector_accessors(self):
        feats = np.arange(6.0).reshape(3, 2)
        ds = LabeledDataset(feats, np.array([0, 1, 0]), num_classes=2)
        assert len(ds) == 3
        assert not ds.is_image
        assert ds.feature_dim == 2
        np.testing.assert_array_equal(ds.as_float_matrix(), feats)
        np.testing.assert_array_equal(ds.as_float_matrix([2, 0]), feats[[2, 0]])

    def test_image_accessors_flatten_and_scale(self):
        imgs = np.zeros((2, 2, 2, 3), dtype=np.uint8)
        imgs[1] = 255
        ds = LabeledDataset(imgs, np.array([0, 1]), num_classes=2)
        assert ds.is_image
        assert ds.feature_dim == 12
        mat = ds.as_float_matrix()
        assert mat.shape == (2, 12)
        np.testing.assert_array_equal(mat[0], np.zeros(12))
        np.testing.assert_array_equal(mat[1], np.ones(12))


class TestGenerateBlobs:
    def test_shapes_and_balance(self):
        ds = generate_blobs(BlobsConfig())
        assert ds.features.shape == (200, 16)
        assert ds.num_classes == 4
        np.testing.assert_array_equal(np.bincount(ds.labels), [50, 50, 50, 50])

    def test_zero_sigma_collapses_each_cluster(self):
        ds = generate_blobs(BlobsConfig(k=3, dim=4, n_per_cluster=5, sigma=0.0))
        reps = []
        for c in range(3):
            rows = ds.features[ds.labels == c]
            np.testing.assert_array_equal(rows, np.tile(rows[0], (5, 1)))
            reps.append(rows[0])
        for i in range(3):
            for j in range(i + 1, 3):
                assert np.abs(reps[i] - reps[j]).max() > 1e-6

    def test_deterministic_per_seed(self):
        a = generate_blobs(BlobsConfig(seed=11))
        b = generate_blobs(BlobsConfig(seed=11))
        c = generate_blobs(BlobsConfig(seed=12))
        np.testing.assert_array_equal(a.features, b.features)
        np.testing.assert_array_equal(a.labels, b.labels)
        assert np.abs(a.features - c.features).max() > 1e-6

    def test_nearest_center_recovers_labels(self):
        # Independent oracle: with centers this far apart almost every point
        # sits closest to its own cluster mean.
        ds = generate_blobs(BlobsConfig())
        means = np.stack([ds.features[ds.labels == c].mean(axis=0) for c in range(4)])
        d2 = ((ds.features[:, None, :] - means[None, :, :]) ** 2).sum(axis=2)
        assigned = d2.argmin(axis=1)
        assert (assigned == ds.labels).mean() >= 0.99

    @pytest.mark.parametrize(
        "kwargs",
        [dict(k=1), dict(dim=0), dict(n_per_cluster=0), dict(sigma=-1.0),
         dict(center_scale=-1.0)],
    )
    def test_invalid_config_rejected(self, kwargs):
        with pytest.raises(ValueError):
            BlobsConfig(**kwargs)


class TestBinaryImageLoader:
    def make_records(self, labels):
        rng = np.random.default_rng(0)
        chunks = []
        for lab in labels:
            pixels = rng.integers(0, 256, size=RECORD_BYTES - 1, dtype=np.uint8)
            chunks.append(bytes([lab]) + pixels.tobytes())
        return b"".join(chunks)

    def test_round_trip_layout(self, tmp_path):
        raw = self.make_records([3, 7])
        path = tmp_path / "batch.bin"
        path.write_bytes(raw)
        ds = load_cifar10_binary(path)
        assert ds.features.shape == (2, 32, 32, 3)
        assert ds.features.dtype == np.uint8
        assert ds.num_classes == 10
        np.testing.assert_array_equal(ds.labels, [3, 7])
        # Record layout: label byte, then 1024-byte planes R, G, B, each
        # row-major 32x32, so pixel (y, x, c) lives at 1 + c*1024 + y*32 + x.
        for rec in range(2):
            base = rec * RECORD_BYTES
            for y, x, c in [(0, 0, 0), (0, 1, 0), (1, 0, 1), (31, 31, 2), (5, 17, 2)]:
                assert ds.features[rec, y, x, c] == raw[base + 1 + c * 1024 + y * 32 + x]

    def test_truncated_file_rejected_with_offset(self, tmp_path):
        path = tmp_path / "bad.bin"
        path.write_bytes(self.make_records([1]) + b"\x00" * 100)
        with pytest.raises(ValueError, match=r"last complete record ends at byte 3073"):
            load_cifar10_binary(path)

    def test_empty_file_rejected(self, tmp_path):
        path = tmp_path / "empty.bin"
        path.write_bytes(b"")
        with pytest.raises(ValueError, match="truncated"):
            load_cifar10_binary(path)

    def test_label_byte_out_of_range(self, tmp_path):
        path = tmp_path / "badlabel.bin"
        path.write_bytes(self.make_records([0, 10]))
        with pytest.raises(ValueError, match=r"label byte 10 >= 10 at byte offset 3073"):
            load_cifar10_binary(path)


class TestCsvRoundTrip:
    def test_exact_round_trip(self, tmp_path):
        ds = generate_blobs(BlobsConfig(k=2, dim=3, n_per_cluster=4))
        path = tmp_path / "data.csv"
        save_dataset_csv(path, ds)
        back = load_dataset_csv(path)
        np.testing.assert_array_equal(back.features, ds.features)
        np.testing.assert_array_equal(back.labels, ds.labels)
        assert back.num_classes == 2

    def test_sidecar_num_classes_survives(self, tmp_path):
        ds = LabeledDataset(np.eye(3), np.array([0, 1, 2]), num_classes=5)
        path = tmp_path / "data.csv"
        save_dataset_csv(path, ds)
        assert load_dataset_csv(path).num_classes == 5
        (tmp_path / "data.csv.meta.json").unlink()
        assert load_dataset_csv(path).num_classes == 3

    def test_non_integer_label_rejected(self, tmp_path):
        path = tmp_path / "frac.csv"
        path.write_text("0.5,1.0,2.0\n")
        with pytest.raises(ValueError, match="non-integer label"):
            load_dataset_csv(path)

    def test_non_finite_feature_rejected(self, tmp_path):
        path = tmp_path / "nan.csv"
        path.write_text("0,nan,2.0\n")
        with pytest.raises(ValueError):
            load_dataset_csv(path)

    def test_needs_label_and_feature(self, tmp_path):
        path = tmp_path / "thin.csv"
        path.write_text("0\n1\n")
        with pytest.raises(ValueError, match="label plus at least one feature"):
            load_dataset_csv(path)

    def test_image_dataset_not_exportable(self, tmp_path):
        imgs = np.zeros((1, 2, 2, 3), dtype=np.uint8)
        ds = LabeledDataset(imgs, np.array([0]), num_classes=10)
        with pytest.raises(ValueError, match="vector"):
            save_dataset_csv(tmp_path / "x.csv", ds)


class TestBatching:
    def test_sample_minibatch_properties(self):
        rng = np.random.default_rng(0)
        idx = sample_minibatch(20, 8, rng)
        assert idx.shape == (8,)
        assert len(set(idx.tolist())) == 8
        assert idx.min() >= 0 and idx.max() < 20

    def test_sample_minibatch_deterministic(self):
        a = sample_minibatch(50, 10, np.random.default_rng(3))
        b = sample_minibatch(50, 10, np.random.default_rng(3))
        np.testing.assert_array_equal(a, b)

    def test_sample_minibatch_rejects_bad_sizes(self):
        rng = np.random.default_rng(0)
        with pytest.raises(ValueError):
            sample_minibatch(5, 6, rng)
        with pytest.raises(ValueError):
            sample_minibatch(5, 0, rng)

    def test_epoch_batches_partition(self):
        rng = np.random.default_rng(1)
        batches = epoch_batches(10, 3, rng)
        assert len(batches) == 3
        flat = np.concatenate(batches)
        assert flat.shape == (9,)
        assert len(set(flat.tolist())) == 9

    def test_epoch_batches_full_cover_when_divisible(self):
        rng = np.random.default_rng(2)
        batches = epoch_batches(12, 4, rng)
        flat = np.sort(np.concatenate(batches))
        np.testing.assert_array_equal(flat, np.arange(12))

    def test_epoch_batches_single_batch_is_permutation(self):
        rng = np.random.default_rng(3)
        (batch,) = epoch_batches(7, 7, rng)
        np.testing.assert_array_equal(np.sort(batch), np.arange(7))

    def test_epoch_batches_rejects_oversize(self):
        with pytest.raises(ValueError):
            epoch_batches(5, 6, np.random.default_rng(0))
