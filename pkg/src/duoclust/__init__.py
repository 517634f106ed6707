"""duoclust: doubly contrastive deep clustering on a small MLP.

Trains a classification head so that matching sample rows and matching class
columns of two augmented views agree under InfoNCE, then reads cluster labels
straight off the argmax.
"""

from .augment import AugmentSpec, augment_image, augment_rows, augment_vector, repeat_batch
from .data import (
    BlobsConfig,
    LabeledDataset,
    epoch_batches,
    generate_blobs,
    load_cifar10_binary,
    load_dataset_csv,
    sample_minibatch,
    save_dataset_csv,
)
from .grads import GradPair, dual_loss_grad, finite_diff_check, model_loss_gradcheck
from .linalg import (
    DegenerateVectorError,
    cosine,
    l2_normalize,
    load_matrix_csv,
    pairwise_cosine_cols,
    pairwise_cosine_rows,
    save_matrix_csv,
    softmax_rows,
)
from .losses import (
    LossBreakdown,
    class_contrastive,
    density_ratio,
    dual_contrastive_loss,
    info_nce,
    sample_contrastive,
)
from .metrics import (
    ClusteringReport,
    accuracy_dominating,
    accuracy_optimal,
    ari,
    contingency_table,
    nmi,
    score_clustering,
)
from .model import Model, ModelConfig
from .optim import Adam
from .train import (
    AffinityExport,
    TrainConfig,
    TrainHistory,
    TrainingDivergedError,
    block_contrast_score,
    default_batch_size,
    evaluate,
    export_affinity,
    train,
)

__version__ = "0.1.0"

__all__ = [
    "Adam",
    "AffinityExport",
    "AugmentSpec",
    "BlobsConfig",
    "ClusteringReport",
    "DegenerateVectorError",
    "GradPair",
    "LabeledDataset",
    "LossBreakdown",
    "Model",
    "ModelConfig",
    "TrainConfig",
    "TrainHistory",
    "TrainingDivergedError",
    "accuracy_dominating",
    "accuracy_optimal",
    "ari",
    "augment_image",
    "augment_rows",
    "augment_vector",
    "block_contrast_score",
    "class_contrastive",
    "contingency_table",
    "cosine",
    "default_batch_size",
    "density_ratio",
    "dual_contrastive_loss",
    "dual_loss_grad",
    "epoch_batches",
    "evaluate",
    "export_affinity",
    "finite_diff_check",
    "generate_blobs",
    "info_nce",
    "l2_normalize",
    "load_cifar10_binary",
    "load_dataset_csv",
    "load_matrix_csv",
    "model_loss_gradcheck",
    "nmi",
    "pairwise_cosine_cols",
    "pairwise_cosine_rows",
    "repeat_batch",
    "sample_contrastive",
    "sample_minibatch",
    "save_dataset_csv",
    "save_matrix_csv",
    "score_clustering",
    "softmax_rows",
    "train",
]
