"""Training loop: per iteration, sample a repeated mini-batch, build two views,
push both through the model, take one Adam step on the combined contrastive
loss of the main and over-clustering heads.

Labels inside the dataset are used only for the per-epoch evaluation record;
the gradient path sees features alone.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .augment import AugmentSpec, augment_image, augment_rows, repeat_batch
from .data import LabeledDataset, epoch_batches, sample_minibatch
from .grads import dual_loss_grad
from .linalg import pairwise_cosine_cols, pairwise_cosine_rows, softmax_rows
from .losses import check_temperature
from .metrics import ClusteringReport, score_clustering
from .model import Model, ModelConfig
from .optim import Adam

DIVERGENCE_PATIENCE = 5


class TrainingDivergedError(RuntimeError):
    """Loss or parameters left the finite/plausible regime."""


def default_batch_size(num_clusters: int) -> int:
    """Batch size scales with the target cluster count (12.5 per cluster)."""
    return round(12.5 * num_clusters)


@dataclass(frozen=True)
class TrainConfig:
    model: ModelConfig
    augment: AugmentSpec = AugmentSpec()
    tau: float = 0.5
    batch_size: int | None = None  # None -> default_batch_size(C)
    repeat: int | None = None  # None -> augment.repeat
    epochs: int = 200
    lr: float = 1e-3
    over_cluster_weight: float = 1.0
    sample_weight: float = 1.0
    class_weight: float = 1.0
    augment_both: bool = False
    seed: int = 0

    def __post_init__(self):
        check_temperature(self.tau)
        if self.batch_size is None:
            object.__setattr__(self, "batch_size", default_batch_size(self.model.num_clusters))
        if self.repeat is None:
            object.__setattr__(self, "repeat", self.augment.repeat)
        if self.model.num_clusters < 2:
            raise ValueError("training needs at least 2 clusters")
        if self.batch_size < 2:
            raise ValueError("batch_size must be >= 2")
        if self.repeat < 1:
            raise ValueError("repeat must be >= 1")
        if self.epochs < 1:
            raise ValueError("epochs must be >= 1")
        if self.lr <= 0.0:
            raise ValueError("lr must be positive")
        if self.over_cluster_weight < 0.0:
            raise ValueError("over_cluster_weight must be >= 0")
        if self.sample_weight < 0.0 or self.class_weight < 0.0:
            raise ValueError("loss weights must be >= 0")
        if self.sample_weight + self.class_weight == 0.0:
            raise ValueError("at least one loss weight must be positive")

    @property
    def distinct_per_batch(self) -> int:
        """Distinct samples drawn per iteration; repeating fills the batch to B."""
        return -(-self.batch_size // self.repeat)

    def iterations_per_epoch(self, n_samples: int) -> int:
        return n_samples // self.distinct_per_batch


@dataclass(frozen=True)
class IterationLog:
    """Per-iteration snapshot handed to the optional hook (testing/diagnostics)."""

    epoch: int
    iteration: int
    indices: np.ndarray
    probs_main: np.ndarray
    probs_main_aug: np.ndarray
    probs_over: np.ndarray
    probs_over_aug: np.ndarray
    sample_loss: float
    class_loss: float

    @property
    def total_loss(self) -> float:
        return self.sample_loss + self.class_loss


@dataclass(frozen=True)
class EpochRecord:
    epoch: int
    sample_loss: float
    class_loss: float
    total_loss: float
    report: ClusteringReport


@dataclass
class TrainHistory:
    records: list[EpochRecord] = field(default_factory=list)

    def __len__(self) -> int:
        return len(self.records)

    @property
    def final(self) -> EpochRecord:
        if not self.records:
            raise ValueError("empty history")
        return self.records[-1]


def _augmented_view(dataset: LabeledDataset, indices: np.ndarray,
                    spec: AugmentSpec, rng: np.random.Generator) -> np.ndarray:
    if dataset.is_image:
        out = np.stack([augment_image(img, spec, rng) for img in dataset.features[indices]])
        return out.reshape(len(out), -1).astype(np.float64) / 255.0
    return augment_rows(dataset.features[indices].astype(np.float64), spec, rng)


def make_views(dataset: LabeledDataset, indices: np.ndarray, spec: AugmentSpec,
               rng: np.random.Generator, augment_both: bool = False):
    """(x, x') pair for a batch: raw view plus an augmented one by default.

    With augment_both the first view is augmented too (drawn before the
    second, so rng consumption order is fixed).
    """
    if augment_both:
        x = _augmented_view(dataset, indices, spec, rng)
    else:
        x = dataset.as_float_matrix(indices)
    x_aug = _augmented_view(dataset, indices, spec, rng)
    return x, x_aug


def evaluate(model: Model, dataset: LabeledDataset) -> ClusteringReport:
    """Score the model's main-head argmax labels on the full dataset, no augmentation."""
    preds = model.predict(dataset.as_float_matrix())
    return score_clustering(dataset.labels, preds)


def train(config: TrainConfig, dataset: LabeledDataset,
          iteration_hook=None) -> tuple[Model, TrainHistory]:
    """Run the full epoch/iteration loop; deterministic given config.seed."""
    if len(dataset) == 0:
        raise ValueError("dataset is empty")
    if config.model.input_dim != dataset.feature_dim:
        raise ValueError(
            f"model input_dim {config.model.input_dim} != dataset feature dim {dataset.feature_dim}"
        )
    m_distinct = config.distinct_per_batch
    if m_distinct > len(dataset):
        raise ValueError(
            f"batch needs {m_distinct} distinct samples, dataset has {len(dataset)}"
        )

    model = Model(config.model)
    optimizer = Adam(model.parameters(), lr=config.lr)
    data_seq, aug_seq = np.random.SeedSequence(config.seed).spawn(2)
    data_rng = np.random.default_rng(data_seq)
    aug_rng = np.random.default_rng(aug_seq)

    w_over = config.over_cluster_weight
    loss_ceiling = 10.0 * np.log(max(config.batch_size, config.model.num_clusters))
    high_loss_streak = 0
    history = TrainHistory()

    for epoch in range(1, config.epochs + 1):
        sample_sum = 0.0
        class_sum = 0.0
        batches = epoch_batches(len(dataset), m_distinct, data_rng)
        for it, distinct in enumerate(batches):
            indices = repeat_batch(distinct, config.repeat)[: config.batch_size]
            x, x_aug = make_views(dataset, indices, config.augment, aug_rng,
                                  config.augment_both)

            logits, logits_over, cache = model.forward(x)
            logits_a, logits_over_a, cache_a = model.forward(x_aug)
            bd_main, g_main = dual_loss_grad(
                logits, logits_a, config.tau,
                sample_weight=config.sample_weight, class_weight=config.class_weight)
            bd_over, g_over = dual_loss_grad(
                logits_over, logits_over_a, config.tau,
                sample_weight=config.sample_weight, class_weight=config.class_weight)

            sample_loss = bd_main.sample_loss + w_over * bd_over.sample_loss
            class_loss = bd_main.class_loss + w_over * bd_over.class_loss
            total = sample_loss + class_loss
            if not np.isfinite(total):
                raise TrainingDivergedError(
                    f"non-finite loss at epoch {epoch} iteration {it}"
                )

            grads = model.backward(cache, g_main.d_logits, w_over * g_over.d_logits)
            grads_aug = model.backward(cache_a, g_main.d_logits_aug,
                                       w_over * g_over.d_logits_aug)
            optimizer.step(model.parameters(),
                           [g + ga for g, ga in zip(grads, grads_aug)])
            for p in model.parameters():
                if not np.all(np.isfinite(p)):
                    raise TrainingDivergedError(
                        f"non-finite parameters at epoch {epoch} iteration {it}"
                    )

            sample_sum += sample_loss
            class_sum += class_loss
            if iteration_hook is not None:
                iteration_hook(IterationLog(
                    epoch=epoch, iteration=it, indices=indices,
                    probs_main=softmax_rows(logits),
                    probs_main_aug=softmax_rows(logits_a),
                    probs_over=softmax_rows(logits_over),
                    probs_over_aug=softmax_rows(logits_over_a),
                    sample_loss=sample_loss, class_loss=class_loss))

        iters = len(batches)
        epoch_sample = sample_sum / iters
        epoch_class = class_sum / iters
        epoch_total = epoch_sample + epoch_class
        history.records.append(EpochRecord(
            epoch=epoch, sample_loss=epoch_sample, class_loss=epoch_class,
            total_loss=epoch_total, report=evaluate(model, dataset)))

        if epoch_total > loss_ceiling:
            high_loss_streak += 1
            if high_loss_streak >= DIVERGENCE_PATIENCE:
                raise TrainingDivergedError(
                    f"total loss above {loss_ceiling:.3g} for "
                    f"{DIVERGENCE_PATIENCE} consecutive epochs (epoch {epoch})"
                )
        else:
            high_loss_streak = 0

    return model, history


@dataclass(frozen=True)
class AffinityExport:
    """One diagnostic batch: cross-view row affinities M and column affinities N."""

    m: np.ndarray  # B x B, row cosines between the two views
    n: np.ndarray  # C x C, column cosines between the two views
    indices: np.ndarray
    labels: np.ndarray


def export_affinity(model: Model, dataset: LabeledDataset, batch_size: int,
                    augment: AugmentSpec | None = None, sort_by_truth: bool = True,
                    rng: np.random.Generator | None = None,
                    augment_both: bool = False) -> AffinityExport:
    """M and N for one batch through the main head; rows sorted by true label when asked."""
    if rng is None:
        rng = np.random.default_rng(0)
    if augment is None:
        augment = AugmentSpec()
    indices = sample_minibatch(len(dataset), batch_size, rng)
    labels = dataset.labels[indices]
    if sort_by_truth:
        order = np.argsort(labels, kind="stable")
        indices = indices[order]
        labels = labels[order]
    x, x_aug = make_views(dataset, indices, augment, rng, augment_both)
    u = softmax_rows(model.forward(x)[0])
    u_aug = softmax_rows(model.forward(x_aug)[0])
    return AffinityExport(
        m=pairwise_cosine_rows(u, u_aug),
        n=pairwise_cosine_cols(u, u_aug),
        indices=indices,
        labels=labels,
    )


def block_contrast_score(matrix: np.ndarray, labels) -> float:
    """Mean within-class entry minus mean between-class entry of a B x B affinity."""
    labels = np.asarray(labels)
    m = np.asarray(matrix, dtype=np.float64)
    if m.ndim != 2 or m.shape[0] != m.shape[1] or m.shape[0] != labels.size:
        raise ValueError("matrix must be square with one label per row")
    within = labels[:, None] == labels[None, :]
    if within.all() or not within.any():
        raise ValueError("need at least two classes present in the batch")
    return float(m[within].mean() - m[~within].mean())
