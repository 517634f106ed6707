"""Analytic gradients of the dual contrastive loss w.r.t. pre-softmax logits.

The composition is fixed (softmax -> row l2-normalize -> pairwise cosine ->
InfoNCE, over rows and over columns), so the backward pass is a small
hand-derived reverse sweep rather than a general autodiff graph. A central
finite-difference harness verifies it.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Callable

import numpy as np

from .linalg import require_finite, softmax_rows
from .losses import LossBreakdown, check_temperature, dual_contrastive_loss


@dataclass(frozen=True)
class GradPair:
    """Gradients w.r.t. the original and augmented logits (same shapes)."""

    d_logits: np.ndarray
    d_logits_aug: np.ndarray


def softmax_rows_backward(probs: np.ndarray, d_probs: np.ndarray) -> np.ndarray:
    """Backward through row softmax: dz = p * (dp - sum(dp * p))."""
    inner = np.sum(d_probs * probs, axis=1, keepdims=True)
    return probs * (d_probs - inner)


def _contrastive_pair(a: np.ndarray, b: np.ndarray, tau: float):
    """InfoNCE over row cosines of (a, b); returns (loss, dloss/da, dloss/db).

    Rows of `a` are the anchors. The value matches losses.info_nce applied
    to the pairwise row-cosine matrix.
    """
    n = a.shape[0]
    a_norms = np.linalg.norm(a, axis=1, keepdims=True)
    b_norms = np.linalg.norm(b, axis=1, keepdims=True)
    a_hat = a / a_norms
    b_hat = b / b_norms
    sim = a_hat @ b_hat.T

    scaled = sim / tau
    row_max = scaled.max(axis=1, keepdims=True)
    exp_shift = np.exp(scaled - row_max)
    lse = np.log(exp_shift.sum(axis=1)) + row_max[:, 0]
    loss = float(np.mean(lse - np.diagonal(scaled)))

    # d loss / d sim = (softmax(sim/tau) - I) / (n * tau)
    d_sim = exp_shift / exp_shift.sum(axis=1, keepdims=True)
    d_sim[np.arange(n), np.arange(n)] -= 1.0
    d_sim /= n * tau

    d_a_hat = d_sim @ b_hat
    d_b_hat = d_sim.T @ a_hat
    # Backward through row l2 normalization: project out the radial component.
    d_a = (d_a_hat - np.sum(d_a_hat * a_hat, axis=1, keepdims=True) * a_hat) / a_norms
    d_b = (d_b_hat - np.sum(d_b_hat * b_hat, axis=1, keepdims=True) * b_hat) / b_norms
    return loss, d_a, d_b


def _directional(a: np.ndarray, b: np.ndarray, tau: float, symmetric: bool):
    loss, d_a, d_b = _contrastive_pair(a, b, tau)
    if not symmetric:
        return loss, d_a, d_b
    loss_rev, d_b_rev, d_a_rev = _contrastive_pair(b, a, tau)
    return (
        0.5 * (loss + loss_rev),
        0.5 * (d_a + d_a_rev),
        0.5 * (d_b + d_b_rev),
    )


def dual_loss_grad(
    logits,
    logits_aug,
    tau: float,
    sample_weight: float = 1.0,
    class_weight: float = 1.0,
    symmetric: bool = False,
) -> tuple[LossBreakdown, GradPair]:
    """Loss and exact gradients of the weighted dual contrastive objective.

    Returns the breakdown of `sample_weight * sample + class_weight * class`
    (components reported already weighted) together with the gradients of
    that objective w.r.t. both logits matrices. With unit weights the value
    equals dual_contrastive_loss on the softmaxed logits.
    """
    tau = check_temperature(tau)
    z = np.asarray(logits, dtype=np.float64)
    z_aug = np.asarray(logits_aug, dtype=np.float64)
    if z.shape != z_aug.shape or z.ndim != 2:
        raise ValueError(f"logit shapes must match and be 2-D: {z.shape} vs {z_aug.shape}")
    require_finite(z, "logits")
    require_finite(z_aug, "augmented logits")

    u = softmax_rows(z)
    v = softmax_rows(z_aug)

    sample_loss, d_u, d_v = _directional(u, v, tau, symmetric)
    class_loss, d_ut, d_vt = _directional(u.T, v.T, tau, symmetric)

    d_u_total = sample_weight * d_u + class_weight * d_ut.T
    d_v_total = sample_weight * d_v + class_weight * d_vt.T

    d_z = softmax_rows_backward(u, d_u_total)
    d_z_aug = softmax_rows_backward(v, d_v_total)
    require_finite(d_z, "logit gradients")
    require_finite(d_z_aug, "augmented logit gradients")

    breakdown = LossBreakdown(
        sample_loss=sample_weight * sample_loss,
        class_loss=class_weight * class_loss,
    )
    return breakdown, GradPair(d_logits=d_z, d_logits_aug=d_z_aug)


def finite_diff_check(
    f: Callable[[np.ndarray], float],
    x: np.ndarray,
    analytic: np.ndarray,
    step: float = 1e-5,
) -> float:
    """Max relative error between central differences of `f` at `x` and `analytic`.

    Relative error uses denominator max(|analytic|, |numeric|, 1e-8) per entry.
    """
    if step <= 0:
        raise ValueError("step must be positive")
    x = np.asarray(x, dtype=np.float64)
    analytic = np.asarray(analytic, dtype=np.float64)
    if x.shape != analytic.shape:
        raise ValueError(f"gradient shape {analytic.shape} does not match input {x.shape}")
    worst = 0.0
    for idx in np.ndindex(*x.shape):
        probe = x.copy()
        probe[idx] = x[idx] + step
        plus = f(probe)
        probe[idx] = x[idx] - step
        minus = f(probe)
        numeric = (plus - minus) / (2.0 * step)
        denom = max(abs(float(analytic[idx])), abs(numeric), 1e-8)
        worst = max(worst, abs(numeric - float(analytic[idx])) / denom)
    return worst


def model_loss_gradcheck(config, batch_size: int, tau: float = 0.5, seed: int = 0,
                         step: float = 1e-5, over_weight: float = 1.0) -> float:
    """End-to-end check: backbone + both heads + dual loss vs finite differences.

    Builds a fresh model and two random input views, flattens every parameter
    into one vector and returns the worst relative error between the analytic
    parameter gradient and central differences of the recomputed loss.
    """
    from .model import Model

    if batch_size < 1:
        raise ValueError("batch_size must be >= 1")
    rng = np.random.default_rng(seed)
    model = Model(config)
    x = rng.normal(size=(batch_size, config.input_dim))
    x_aug = rng.normal(size=(batch_size, config.input_dim))
    params = model.parameters()

    def set_flat(vec: np.ndarray) -> None:
        offset = 0
        for p in params:
            p[...] = vec[offset : offset + p.size].reshape(p.shape)
            offset += p.size

    def total_loss(vec: np.ndarray) -> float:
        set_flat(vec)
        lm, lo, _ = model.forward(x)
        lma, loa, _ = model.forward(x_aug)
        bd_main = dual_contrastive_loss(softmax_rows(lm), softmax_rows(lma), tau)
        bd_over = dual_contrastive_loss(softmax_rows(lo), softmax_rows(loa), tau)
        return bd_main.total + over_weight * bd_over.total

    x0 = np.concatenate([p.ravel() for p in params])
    lm, lo, cache = model.forward(x)
    lma, loa, cache_a = model.forward(x_aug)
    _, g_main = dual_loss_grad(lm, lma, tau)
    _, g_over = dual_loss_grad(lo, loa, tau)
    grads = model.backward(cache, g_main.d_logits, over_weight * g_over.d_logits)
    grads_aug = model.backward(cache_a, g_main.d_logits_aug,
                               over_weight * g_over.d_logits_aug)
    analytic = np.concatenate([(g + ga).ravel() for g, ga in zip(grads, grads_aug)])
    try:
        return finite_diff_check(total_loss, x0, analytic, step)
    finally:
        set_flat(x0)
