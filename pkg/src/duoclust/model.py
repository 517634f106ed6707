"""Small MLP with a main clustering head and an auxiliary over-clustering head.

Hidden layers are affine + ReLU; both heads are affine. Parameters live in
plain float64 arrays; forward caches activations so backward can produce
exact parameter gradients from upstream head gradients.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field

import numpy as np

from .linalg import require_finite, softmax_rows

CHECKPOINT_FORMAT = "duoclust-checkpoint-v1"


@dataclass(frozen=True)
class ModelConfig:
    input_dim: int
    hidden_dims: tuple[int, ...] = (64,)
    num_clusters: int = 4
    over_clusters: int = 28
    seed: int = 0

    def __post_init__(self):
        object.__setattr__(self, "hidden_dims", tuple(int(h) for h in self.hidden_dims))
        if self.input_dim < 1 or any(h < 1 for h in self.hidden_dims):
            raise ValueError("all layer dimensions must be >= 1")
        if self.num_clusters < 1:
            raise ValueError("need at least 1 cluster")
        if self.over_clusters < self.num_clusters:
            raise ValueError("over-clustering head must have at least as many clusters")

    def to_dict(self) -> dict:
        return {
            "input_dim": self.input_dim,
            "hidden_dims": list(self.hidden_dims),
            "num_clusters": self.num_clusters,
            "over_clusters": self.over_clusters,
            "seed": self.seed,
        }

    @classmethod
    def from_dict(cls, d: dict) -> "ModelConfig":
        return cls(
            input_dim=int(d["input_dim"]),
            hidden_dims=tuple(d["hidden_dims"]),
            num_clusters=int(d["num_clusters"]),
            over_clusters=int(d["over_clusters"]),
            seed=int(d["seed"]),
        )


@dataclass
class ForwardCache:
    """Activations retained by forward() for the matching backward() call."""

    inputs: list[np.ndarray]  # input to each hidden layer, then to the heads
    pre_acts: list[np.ndarray]  # pre-ReLU values per hidden layer
    batch_size: int


class Model:
    """Backbone MLP plus two affine heads (main clusters, over-clusters)."""

    def __init__(self, config: ModelConfig):
        self.config = config
        rng = np.random.default_rng(config.seed)
        dims = [config.input_dim, *config.hidden_dims]
        self.weights: list[np.ndarray] = []
        self.biases: list[np.ndarray] = []
        for fan_in, fan_out in zip(dims[:-1], dims[1:]):
            self.weights.append(self._init_weight(rng, fan_in, fan_out))
            self.biases.append(np.zeros(fan_out))
        feat = dims[-1]
        self.head_main_w = self._init_weight(rng, feat, config.num_clusters)
        self.head_main_b = np.zeros(config.num_clusters)
        self.head_over_w = self._init_weight(rng, feat, config.over_clusters)
        self.head_over_b = np.zeros(config.over_clusters)

    @staticmethod
    def _init_weight(rng: np.random.Generator, fan_in: int, fan_out: int) -> np.ndarray:
        bound = np.sqrt(6.0 / fan_in)
        return rng.uniform(-bound, bound, size=(fan_in, fan_out))

    def parameters(self) -> list[np.ndarray]:
        """All parameter arrays in a fixed declaration order."""
        params: list[np.ndarray] = []
        for w, b in zip(self.weights, self.biases):
            params.extend([w, b])
        params.extend([self.head_main_w, self.head_main_b, self.head_over_w, self.head_over_b])
        return params

    def forward(self, x) -> tuple[np.ndarray, np.ndarray, ForwardCache]:
        """Run the batch through backbone and both heads.

        Returns (main logits B x C, over logits B x C_over, cache).
        """
        h = np.asarray(x, dtype=np.float64)
        if h.ndim != 2 or h.shape[1] != self.config.input_dim:
            raise ValueError(
                f"expected input of shape (B, {self.config.input_dim}), got {h.shape}"
            )
        require_finite(h, "model input")
        inputs = []
        pre_acts = []
        for w, b in zip(self.weights, self.biases):
            inputs.append(h)
            z = h @ w + b
            pre_acts.append(z)
            h = np.maximum(z, 0.0)
        inputs.append(h)
        logits_main = h @ self.head_main_w + self.head_main_b
        logits_over = h @ self.head_over_w + self.head_over_b
        cache = ForwardCache(inputs=inputs, pre_acts=pre_acts, batch_size=h.shape[0])
        return logits_main, logits_over, cache

    def backward(
        self, cache: ForwardCache, d_logits_main: np.ndarray, d_logits_over: np.ndarray
    ) -> list[np.ndarray]:
        """Parameter gradients for one forward pass, aligned with parameters()."""
        d_main = np.asarray(d_logits_main, dtype=np.float64)
        d_over = np.asarray(d_logits_over, dtype=np.float64)
        if len(cache.inputs) != len(self.weights) + 1 or len(cache.pre_acts) != len(self.weights):
            raise ValueError("cache does not match this model's layer structure")
        if d_main.shape != (cache.batch_size, self.config.num_clusters):
            raise ValueError(f"main-head gradient has wrong shape {d_main.shape}")
        if d_over.shape != (cache.batch_size, self.config.over_clusters):
            raise ValueError(f"over-head gradient has wrong shape {d_over.shape}")

        feat = cache.inputs[-1]
        d_head_main_w = feat.T @ d_main
        d_head_main_b = d_main.sum(axis=0)
        d_head_over_w = feat.T @ d_over
        d_head_over_b = d_over.sum(axis=0)
        d_h = d_main @ self.head_main_w.T + d_over @ self.head_over_w.T

        d_weights: list[np.ndarray] = []
        d_biases: list[np.ndarray] = []
        for layer in reversed(range(len(self.weights))):
            d_z = d_h * (cache.pre_acts[layer] > 0.0)
            d_weights.append(cache.inputs[layer].T @ d_z)
            d_biases.append(d_z.sum(axis=0))
            d_h = d_z @ self.weights[layer].T

        grads: list[np.ndarray] = []
        for d_w, d_b in zip(reversed(d_weights), reversed(d_biases)):
            grads.extend([d_w, d_b])
        grads.extend([d_head_main_w, d_head_main_b, d_head_over_w, d_head_over_b])
        return grads

    def predict(self, x) -> np.ndarray:
        """Cluster labels: argmax over the main head, ties to the lowest index."""
        logits, _, _ = self.forward(x)
        return np.argmax(logits, axis=1)

    def predict_probs(self, x) -> np.ndarray:
        logits, _, _ = self.forward(x)
        return softmax_rows(logits)

    # Checkpoint format: a single JSON document with the config first and the
    # parameter arrays (nested lists, repr-precision floats) in declaration
    # order, so save/load round-trips bit-exactly and files are reproducible.
    def save(self, path) -> None:
        payload = {
            "format": CHECKPOINT_FORMAT,
            "config": self.config.to_dict(),
            "params": [p.tolist() for p in self.parameters()],
        }
        with open(path, "w", encoding="utf-8") as fh:
            json.dump(payload, fh)
            fh.write("\n")

    @classmethod
    def load(cls, path) -> "Model":
        with open(path, "r", encoding="utf-8") as fh:
            try:
                payload = json.load(fh)
            except json.JSONDecodeError as exc:
                raise ValueError(f"checkpoint {path} is not valid JSON: {exc}") from None
        if not isinstance(payload, dict) or payload.get("format") != CHECKPOINT_FORMAT:
            raise ValueError(f"checkpoint {path} has unknown format")
        model = cls(ModelConfig.from_dict(payload["config"]))
        params = model.parameters()
        stored = payload["params"]
        if len(stored) != len(params):
            raise ValueError("checkpoint parameter count does not match config")
        for target, values in zip(params, stored):
            arr = np.asarray(values, dtype=np.float64)
            if arr.shape != target.shape:
                raise ValueError(
                    f"checkpoint parameter shape {arr.shape} != expected {target.shape}"
                )
            require_finite(arr, "checkpoint parameter")
            target[...] = arr
        return model
