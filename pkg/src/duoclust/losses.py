"""Contrastive objectives over a batch of cluster assignments and its augmented twin.

The sample-wise loss is an InfoNCE over the rows of the two assignment
batches (each sample's class distribution vs. its augmented version); the
class-wise loss is the same construction over columns (each class's
in-batch sample distribution). Both use temperature-scaled cosine
similarity, and the training objective is their sum.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .linalg import as_matrix, pairwise_cosine_cols, pairwise_cosine_rows

# Tolerance when checking that similarity entries stay inside [-1, 1].
_SIM_SLACK = 1e-8


@dataclass(frozen=True)
class LossBreakdown:
    """Sample-wise and class-wise loss components; total is their sum."""

    sample_loss: float
    class_loss: float

    @property
    def total(self) -> float:
        return self.sample_loss + self.class_loss


def check_temperature(tau: float) -> float:
    tau = float(tau)
    if not (tau > 0.0) or not math.isfinite(tau):
        raise ValueError(f"temperature must be a positive finite real, got {tau}")
    return tau


def density_ratio(cos_value: float, tau: float) -> float:
    """exp(cos/tau): the positive score assigned to a similarity value."""
    tau = check_temperature(tau)
    c = float(cos_value)
    if not (-1.0 - _SIM_SLACK <= c <= 1.0 + _SIM_SLACK):
        raise ValueError(f"cosine value {c} outside [-1, 1]")
    return math.exp(c / tau)


def info_nce(sim, tau: float) -> float:
    """Mean negative log-softmax of the diagonal of a square similarity matrix.

    Row i classifies its positive (entry [i, i]) against the whole row at
    temperature tau. Stabilized by per-row max subtraction; always >= 0.
    """
    tau = check_temperature(tau)
    s = as_matrix(sim, "similarity matrix")
    n = s.shape[0]
    if s.shape[1] != n:
        raise ValueError(f"similarity matrix must be square, got {s.shape}")
    if s.min() < -1.0 - _SIM_SLACK or s.max() > 1.0 + _SIM_SLACK:
        raise ValueError("similarity entries outside [-1, 1]")
    scaled = s / tau
    row_max = scaled.max(axis=1, keepdims=True)
    lse = np.log(np.exp(scaled - row_max).sum(axis=1)) + row_max[:, 0]
    return float(np.mean(lse - np.diagonal(scaled)))


def _check_pair(probs, probs_aug) -> tuple[np.ndarray, np.ndarray]:
    u = as_matrix(probs, "probs")
    v = as_matrix(probs_aug, "probs_aug")
    if u.shape != v.shape:
        raise ValueError(f"shape mismatch: {u.shape} vs {v.shape}")
    return u, v


def sample_contrastive(probs, probs_aug, tau: float, symmetric: bool = False) -> float:
    """InfoNCE over rows: pulls each assignment toward its augmented twin.

    Anchors are the rows of `probs` scored against all rows of `probs_aug`
    (one-directional). With `symmetric=True` the reverse direction is
    averaged in as well.
    """
    u, v = _check_pair(probs, probs_aug)
    sim = pairwise_cosine_rows(u, v)
    loss = info_nce(sim, tau)
    if symmetric:
        loss = 0.5 * (loss + info_nce(sim.T, tau))
    return loss


def class_contrastive(probs, probs_aug, tau: float, symmetric: bool = False) -> float:
    """InfoNCE over columns: pulls each class's in-batch distribution to its twin.

    A column of exact zeros (a class never predicted) is degenerate and
    raises; softmax outputs are strictly positive, so this only fires on
    raw user input.
    """
    u, v = _check_pair(probs, probs_aug)
    sim = pairwise_cosine_cols(u, v)
    loss = info_nce(sim, tau)
    if symmetric:
        loss = 0.5 * (loss + info_nce(sim.T, tau))
    return loss


def dual_contrastive_loss(probs, probs_aug, tau: float, symmetric: bool = False) -> LossBreakdown:
    """Sample-wise plus class-wise contrastive loss, reported separately."""
    return LossBreakdown(
        sample_loss=sample_contrastive(probs, probs_aug, tau, symmetric=symmetric),
        class_loss=class_contrastive(probs, probs_aug, tau, symmetric=symmetric),
    )
