"""Dense float64 matrix helpers: softmax, l2 normalization, cosine affinities.

All public functions validate that inputs are finite and raise ValueError
(or DegenerateVectorError) otherwise, so downstream modules can assume
finite arrays. Matrices are plain numpy arrays in row-major float64.
"""

from __future__ import annotations

import numpy as np

# Vectors with l2 norm below this are treated as degenerate. Softmax output
# rows always have norm >= 1/sqrt(C) so they can never trip this.
EPS_NORM = 1e-12


class DegenerateVectorError(ValueError):
    """A vector with near-zero norm where a direction is required."""


def as_matrix(a, name: str = "matrix") -> np.ndarray:
    """Coerce to a 2-D float64 array and check finiteness."""
    arr = np.asarray(a, dtype=np.float64)
    if arr.ndim != 2:
        raise ValueError(f"{name} must be 2-D, got shape {arr.shape}")
    require_finite(arr, name)
    return arr


def require_finite(arr: np.ndarray, name: str = "array") -> None:
    if not np.all(np.isfinite(arr)):
        raise ValueError(f"{name} contains non-finite values")


def softmax_rows(logits) -> np.ndarray:
    """Row-wise softmax, stabilized by per-row max subtraction.

    Every output row is strictly positive and sums to 1.
    """
    z = as_matrix(logits, "logits")
    shifted = z - z.max(axis=1, keepdims=True)
    e = np.exp(shifted)
    return e / e.sum(axis=1, keepdims=True)


def validate_prob_batch(probs: np.ndarray, tol: float = 1e-9) -> None:
    """Check the assignment-batch invariants: entries in [0, 1], rows sum to 1."""
    p = as_matrix(probs, "probs")
    if p.min() < -tol or p.max() > 1.0 + tol:
        raise ValueError("probability entries outside [0, 1]")
    row_sums = p.sum(axis=1)
    if np.max(np.abs(row_sums - 1.0)) > tol:
        raise ValueError("probability rows do not sum to 1")


def l2_normalize(v) -> np.ndarray:
    """Scale a vector to unit l2 norm; direction is preserved."""
    vec = np.asarray(v, dtype=np.float64)
    if vec.ndim != 1:
        raise ValueError(f"expected a 1-D vector, got shape {vec.shape}")
    require_finite(vec, "vector")
    norm = float(np.linalg.norm(vec))
    if norm <= EPS_NORM:
        raise DegenerateVectorError(f"vector norm {norm:g} below {EPS_NORM:g}")
    return vec / norm


def cosine(u, v) -> float:
    """Cosine similarity u.v / (|u||v|). In [0, 1] for non-negative inputs."""
    a = np.asarray(u, dtype=np.float64)
    b = np.asarray(v, dtype=np.float64)
    if a.shape != b.shape or a.ndim != 1:
        raise ValueError(f"cosine needs equal-length vectors, got {a.shape} and {b.shape}")
    return float(np.dot(l2_normalize(a), l2_normalize(b)))


def _normalize_rows(a: np.ndarray, name: str) -> np.ndarray:
    norms = np.linalg.norm(a, axis=1)
    bad = np.flatnonzero(norms <= EPS_NORM)
    if bad.size:
        raise DegenerateVectorError(f"row {int(bad[0])} of {name} has near-zero norm")
    return a / norms[:, None]


def pairwise_cosine_rows(a, b) -> np.ndarray:
    """Cosine similarity between every row of `a` and every row of `b`.

    Result is len(a) x len(b); entry [i, j] = cosine(a[i], b[j]).
    """
    am = as_matrix(a, "first matrix")
    bm = as_matrix(b, "second matrix")
    if am.shape != bm.shape:
        raise ValueError(f"shape mismatch: {am.shape} vs {bm.shape}")
    return _normalize_rows(am, "first matrix") @ _normalize_rows(bm, "second matrix").T


def pairwise_cosine_cols(a, b) -> np.ndarray:
    """Cosine similarity between columns: entry [i, j] = cosine(a[:, i], b[:, j])."""
    am = as_matrix(a, "first matrix")
    bm = as_matrix(b, "second matrix")
    if am.shape != bm.shape:
        raise ValueError(f"shape mismatch: {am.shape} vs {bm.shape}")
    try:
        left = _normalize_rows(am.T, "first matrix")
        right = _normalize_rows(bm.T, "second matrix")
    except DegenerateVectorError as exc:
        raise DegenerateVectorError(str(exc).replace("row", "column", 1)) from None
    return left @ right.T


def save_matrix_csv(path, a) -> None:
    """One row per line, comma-separated, 9 significant digits, no header."""
    m = as_matrix(a, "matrix")
    with open(path, "w", encoding="utf-8") as fh:
        for row in m:
            fh.write(",".join(f"{x:.9g}" for x in row) + "\n")


def load_matrix_csv(path) -> np.ndarray:
    m = np.loadtxt(path, delimiter=",", dtype=np.float64, ndmin=2)
    require_finite(m, "matrix file")
    return m
