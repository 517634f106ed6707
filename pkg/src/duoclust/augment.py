"""Stochastic input transformations producing the second (augmented) view.

Vector mode perturbs feature vectors with a random scale and additive
Gaussian noise; image mode applies pad-and-crop, horizontal flip,
brightness/contrast jitter and random grayscale to H x W x 3 byte images.
Every transform is the identity when its stochastic parameters are zeroed.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

# Rec. 601 luma weights for grayscale conversion.
_LUMA = np.array([0.299, 0.587, 0.114])


@dataclass(frozen=True)
class AugmentSpec:
    mode: str = "vector"  # "vector" or "image"
    noise_sigma: float = 0.4
    scale_range: tuple[float, float] = (0.9, 1.1)
    crop_padding: int = 4
    flip_prob: float = 0.5
    jitter_strength: float = 0.4
    grayscale_prob: float = 0.2
    repeat: int = 3

    def __post_init__(self):
        if self.mode not in ("vector", "image"):
            raise ValueError(f"unknown augmentation mode {self.mode!r}")
        lo, hi = self.scale_range
        if not (0.0 < lo <= hi):
            raise ValueError(f"scale_range must satisfy 0 < lo <= hi, got {self.scale_range}")
        if self.noise_sigma < 0.0:
            raise ValueError("noise_sigma must be >= 0")
        for name in ("flip_prob", "grayscale_prob"):
            p = getattr(self, name)
            if not (0.0 <= p <= 1.0):
                raise ValueError(f"{name} must be in [0, 1]")
        if self.crop_padding < 0 or self.jitter_strength < 0.0:
            raise ValueError("crop_padding and jitter_strength must be >= 0")
        if self.repeat < 1:
            raise ValueError("repeat must be >= 1")


def augment_vector(x: np.ndarray, spec: AugmentSpec, rng: np.random.Generator) -> np.ndarray:
    """x' = s * x + noise with s ~ U[lo, hi], noise ~ N(0, sigma^2 I)."""
    x = np.asarray(x, dtype=np.float64)
    lo, hi = spec.scale_range
    scale = rng.uniform(lo, hi)
    noise = rng.normal(0.0, spec.noise_sigma, size=x.shape)
    return scale * x + noise


def augment_image(img: np.ndarray, spec: AugmentSpec, rng: np.random.Generator) -> np.ndarray:
    """Pad-and-crop, flip, jitter, grayscale, in that fixed order; uint8 out."""
    img = np.asarray(img)
    if img.ndim != 3 or img.shape[2] != 3 or img.shape[0] < 1 or img.shape[1] < 1:
        raise ValueError(f"expected an H x W x 3 image, got shape {img.shape}")
    height, width = img.shape[:2]
    out = img.astype(np.float64)

    if spec.crop_padding > 0:
        pad = spec.crop_padding
        padded = np.zeros((height + 2 * pad, width + 2 * pad, 3))
        padded[pad : pad + height, pad : pad + width] = out
        off_y = int(rng.integers(0, 2 * pad + 1))
        off_x = int(rng.integers(0, 2 * pad + 1))
        out = padded[off_y : off_y + height, off_x : off_x + width]

    if spec.flip_prob > 0 and rng.random() < spec.flip_prob:
        out = out[:, ::-1, :]

    if spec.jitter_strength > 0:
        s = spec.jitter_strength
        brightness = 1.0 + rng.uniform(-s, s)
        contrast = 1.0 + rng.uniform(-s, s)
        out = out * brightness
        mean = out.mean()
        out = (out - mean) * contrast + mean

    if spec.grayscale_prob > 0 and rng.random() < spec.grayscale_prob:
        luma = out @ _LUMA
        out = np.repeat(luma[:, :, None], 3, axis=2)

    return np.clip(np.rint(out), 0, 255).astype(np.uint8)


def augment_rows(features: np.ndarray, spec: AugmentSpec, rng: np.random.Generator) -> np.ndarray:
    """Augment each row of a feature matrix independently (vector mode)."""
    return np.stack([augment_vector(row, spec, rng) for row in features])


def repeat_batch(indices, r: int) -> np.ndarray:
    """Each index repeated r consecutive times; copies get independent draws later."""
    if r < 1:
        raise ValueError("repeat factor must be >= 1")
    return np.repeat(np.asarray(indices, dtype=np.intp), r)
