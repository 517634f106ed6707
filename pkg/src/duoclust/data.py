"""Dataset ingestion: synthetic Gaussian blobs, the classic 3073-byte binary
image batch format, CSV round-trips and epoch-wise mini-batch sampling.

Ground-truth labels ride along for evaluation only; the trainer consumes
features exclusively.
"""

from __future__ import annotations

import json
from dataclasses import dataclass

import numpy as np

from .linalg import require_finite

RECORD_BYTES = 3073  # 1 label byte + 32*32*3 pixel bytes, planar R/G/B
_IMAGE_SIDE = 32
_NUM_IMAGE_CLASSES = 10


@dataclass
class LabeledDataset:
    """Feature matrix (N x d float) or image stack (N x H x W x 3 uint8) plus labels."""

    features: np.ndarray
    labels: np.ndarray
    num_classes: int

    def __post_init__(self):
        self.labels = np.asarray(self.labels, dtype=np.int64)
        if len(self.features) != len(self.labels):
            raise ValueError("features and labels must have equal length")
        if self.labels.size and (self.labels.min() < 0 or self.labels.max() >= self.num_classes):
            raise ValueError("labels outside [0, num_classes)")

    def __len__(self) -> int:
        return len(self.features)

    @property
    def is_image(self) -> bool:
        return self.features.ndim == 4

    @property
    def feature_dim(self) -> int:
        if self.is_image:
            return int(np.prod(self.features.shape[1:]))
        return self.features.shape[1]

    def as_float_matrix(self, indices=None) -> np.ndarray:
        """Features as a float64 matrix; images flattened and scaled to [0, 1]."""
        rows = self.features if indices is None else self.features[indices]
        if self.is_image:
            return rows.reshape(len(rows), -1).astype(np.float64) / 255.0
        return np.asarray(rows, dtype=np.float64)


@dataclass(frozen=True)
class BlobsConfig:
    k: int = 4
    dim: int = 16
    n_per_cluster: int = 50
    center_scale: float = 5.0
    sigma: float = 0.5
    seed: int = 0

    def __post_init__(self):
        if self.k < 2:
            raise ValueError("need at least 2 clusters")
        if self.dim < 1 or self.n_per_cluster < 1:
            raise ValueError("dim and n_per_cluster must be >= 1")
        if self.sigma < 0.0 or self.center_scale < 0.0:
            raise ValueError("sigma and center_scale must be >= 0")


def generate_blobs(config: BlobsConfig) -> LabeledDataset:
    """k isotropic Gaussian clusters around random centers; deterministic per seed."""
    rng = np.random.default_rng(config.seed)
    centers = rng.normal(0.0, config.center_scale, size=(config.k, config.dim))
    features = np.concatenate(
        [
            center + rng.normal(0.0, config.sigma, size=(config.n_per_cluster, config.dim))
            for center in centers
        ]
    )
    labels = np.repeat(np.arange(config.k), config.n_per_cluster)
    return LabeledDataset(features=features, labels=labels, num_classes=config.k)


def load_cifar10_binary(path) -> LabeledDataset:
    """Decode a binary batch file of 3073-byte records (label, then planar RGB)."""
    with open(path, "rb") as fh:
        raw = fh.read()
    if len(raw) == 0 or len(raw) % RECORD_BYTES != 0:
        complete = len(raw) // RECORD_BYTES
        raise ValueError(
            f"truncated file: {len(raw)} bytes is not a multiple of {RECORD_BYTES} "
            f"(last complete record ends at byte {complete * RECORD_BYTES})"
        )
    records = np.frombuffer(raw, dtype=np.uint8).reshape(-1, RECORD_BYTES)
    labels = records[:, 0].astype(np.int64)
    bad = np.flatnonzero(labels >= _NUM_IMAGE_CLASSES)
    if bad.size:
        offset = int(bad[0]) * RECORD_BYTES
        raise ValueError(f"label byte {int(labels[bad[0]])} >= 10 at byte offset {offset}")
    images = (
        records[:, 1:]
        .reshape(-1, 3, _IMAGE_SIDE, _IMAGE_SIDE)
        .transpose(0, 2, 3, 1)
        .copy()
    )
    return LabeledDataset(features=images, labels=labels, num_classes=_NUM_IMAGE_CLASSES)


def sample_minibatch(n_samples: int, batch_size: int, rng: np.random.Generator) -> np.ndarray:
    """batch_size indices drawn uniformly without replacement."""
    if batch_size > n_samples or batch_size < 1:
        raise ValueError(f"batch size {batch_size} not in [1, {n_samples}]")
    return rng.permutation(n_samples)[:batch_size]


def epoch_batches(n_samples: int, batch_size: int, rng: np.random.Generator) -> list[np.ndarray]:
    """Shuffled partition into floor(N/B) batches of exactly B; remainder dropped."""
    if batch_size > n_samples or batch_size < 1:
        raise ValueError(f"batch size {batch_size} not in [1, {n_samples}]")
    perm = rng.permutation(n_samples)
    iterations = n_samples // batch_size
    return [perm[i * batch_size : (i + 1) * batch_size] for i in range(iterations)]


def save_dataset_csv(path, dataset: LabeledDataset, meta: dict | None = None) -> None:
    """Rows of `label,f1,...,fd` plus a JSON sidecar (<path>.meta.json)."""
    if dataset.is_image:
        raise ValueError("CSV export only supports vector datasets")
    with open(path, "w", encoding="utf-8") as fh:
        for label, row in zip(dataset.labels, dataset.features):
            fh.write(str(int(label)) + "," + ",".join(f"{x:.17g}" for x in row) + "\n")
    sidecar = {"num_classes": dataset.num_classes, "n_samples": len(dataset)}
    if meta:
        sidecar.update(meta)
    with open(str(path) + ".meta.json", "w", encoding="utf-8") as fh:
        json.dump(sidecar, fh, indent=2, sort_keys=True)
        fh.write("\n")


def load_dataset_csv(path) -> LabeledDataset:
    rows = np.loadtxt(path, delimiter=",", dtype=np.float64, ndmin=2)
    if rows.shape[1] < 2:
        raise ValueError("dataset rows need a label plus at least one feature")
    require_finite(rows, "dataset file")
    labels = rows[:, 0].astype(np.int64)
    if np.any(rows[:, 0] != labels):
        raise ValueError("non-integer label column")
    features = rows[:, 1:]
    num_classes = int(labels.max()) + 1
    try:
        with open(str(path) + ".meta.json", "r", encoding="utf-8") as fh:
            num_classes = int(json.load(fh).get("num_classes", num_classes))
    except FileNotFoundError:
        pass
    return LabeledDataset(features=features, labels=labels, num_classes=num_classes)
