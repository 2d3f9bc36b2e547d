"""Quality/Diversity metrics and feature-distribution distances.

Quality is the mean embedding cosine to the target description; Diversity
the mean pairwise embedding cosine distance among generations.  Similar
domains are scored on 1000 images with 5 repeats; distribution distances
use 5000 generated images against all training images (Frechet) and 50000
for the kernel variant.  Means are accumulated with ``math.fsum`` so
reductions are order-independent.
"""
from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np
import torch

from .errors import ConfigurationError, ShapeError
from .losses import EmbeddingBackend

SIMILAR_EVAL_IMAGES = 1000
EVAL_REPEATS = 5
FRECHET_GENERATED_IMAGES = 5000
KERNEL_GENERATED_IMAGES = 50000


@dataclass(frozen=True)
class MetricReport:
    metric_name: str
    value: float
    n_images: int
    repeats: int
    per_repeat_values: tuple[float, ...]

    def __post_init__(self):
        if self.repeats < 1 or len(self.per_repeat_values) != self.repeats:
            raise ConfigurationError("repeats must match per_repeat_values")

    def to_dict(self) -> dict:
        return {
            "metric": self.metric_name,
            "value": self.value,
            "n_images": self.n_images,
            "repeats": self.repeats,
            "per_repeat": list(self.per_repeat_values),
            "spread": max(self.per_repeat_values) - min(self.per_repeat_values),
        }


def _single(name: str, value: float, n_images: int) -> MetricReport:
    return MetricReport(name, value, n_images, 1, (value,))


def _normalized(emb: torch.Tensor) -> torch.Tensor:
    return emb / emb.norm(dim=-1, keepdim=True).clamp_min(1e-12)


def quality(
    images: torch.Tensor, target_embedding: torch.Tensor, backend: EmbeddingBackend
) -> MetricReport:
    """Mean cosine similarity of image embeddings to the target embedding."""
    if images.dim() != 4 or images.shape[0] < 1:
        raise ConfigurationError("quality needs at least one image")
    emb = _normalized(backend.image_encode(images))
    target = target_embedding / target_embedding.norm().clamp_min(1e-12)
    cosines = (emb @ target).tolist()
    return _single("quality", math.fsum(cosines) / len(cosines), images.shape[0])


def diversity(images: torch.Tensor, backend: EmbeddingBackend) -> MetricReport:
    """Mean pairwise cosine distance (1 - cos) among image embeddings."""
    if images.dim() != 4 or images.shape[0] < 2:
        raise ConfigurationError("diversity needs at least two images")
    emb = _normalized(backend.image_encode(images))
    n = emb.shape[0]
    dists = [
        1.0 - float(emb[i] @ emb[j]) for i in range(n) for j in range(i + 1, n)
    ]
    return _single("diversity", math.fsum(dists) / len(dists), n)


def aggregate_repeats(reports: list[MetricReport]) -> MetricReport:
    """Fold per-repeat reports into one; value is the mean of repeats."""
    if not reports:
        raise ConfigurationError("no reports to aggregate")
    values = tuple(r.value for r in reports)
    return MetricReport(
        metric_name=reports[0].metric_name,
        value=math.fsum(values) / len(values),
        n_images=reports[0].n_images,
        repeats=len(values),
        per_repeat_values=values,
    )


def feature_stats(features: torch.Tensor) -> tuple[np.ndarray, np.ndarray]:
    """Mean and covariance of a feature set, as float64 numpy arrays."""
    f = features.detach().to(torch.float64).numpy()
    mu = f.mean(axis=0)
    cov = np.cov(f, rowvar=False)
    return mu, np.atleast_2d(cov)


def _psd_sqrt(mat: np.ndarray) -> np.ndarray:
    sym = (mat + mat.T) / 2.0
    vals, vecs = np.linalg.eigh(sym)
    vals = np.clip(vals, 0.0, None)
    return (vecs * np.sqrt(vals)) @ vecs.T


def frechet_distance(
    stats_a: tuple[np.ndarray, np.ndarray], stats_b: tuple[np.ndarray, np.ndarray]
) -> float:
    """|mu1-mu2|^2 + Tr(S1 + S2 - 2 (S1 S2)^(1/2)).

    The matrix square root is taken through symmetric eigendecompositions
    (sqrt(S1) S2 sqrt(S1) is PSD up to rounding; negative eigenvalues are
    clamped at zero).
    """
    mu_a, cov_a = np.asarray(stats_a[0], dtype=np.float64), np.asarray(stats_a[1], dtype=np.float64)
    mu_b, cov_b = np.asarray(stats_b[0], dtype=np.float64), np.asarray(stats_b[1], dtype=np.float64)
    if mu_a.shape != mu_b.shape or cov_a.shape != cov_b.shape:
        raise ShapeError("feature statistics have mismatched dimensions")
    root_a = _psd_sqrt(cov_a)
    inner = root_a @ cov_b @ root_a
    vals = np.clip(np.linalg.eigvalsh((inner + inner.T) / 2.0), 0.0, None)
    tr_sqrt = float(np.sqrt(vals).sum())
    gap = float(((mu_a - mu_b) ** 2).sum())
    return gap + float(np.trace(cov_a) + np.trace(cov_b)) - 2.0 * tr_sqrt


def _poly3_kernel(x: np.ndarray, y: np.ndarray) -> np.ndarray:
    d = x.shape[1]
    return (x @ y.T / d + 1.0) ** 3


def kernel_distance(
    features_a: torch.Tensor | np.ndarray,
    features_b: torch.Tensor | np.ndarray,
) -> float:
    """Unbiased squared-MMD estimate under a degree-3 polynomial kernel.

    For equal sample counts this is the paired U-statistic (within-set and
    aligned cross diagonals excluded), which is exactly zero when the two
    sets are duplicates; for unequal counts the three-term estimator with a
    full cross mean is used.
    """
    a = np.asarray(features_a, dtype=np.float64)
    b = np.asarray(features_b, dtype=np.float64)
    if a.ndim != 2 or b.ndim != 2 or a.shape[0] < 2 or b.shape[0] < 2:
        raise ConfigurationError("kernel distance needs two sets of >= 2 feature rows")
    if a.shape[1] != b.shape[1]:
        raise ShapeError("feature dimensions differ")
    m, n = a.shape[0], b.shape[0]
    k_aa = _poly3_kernel(a, a)
    k_bb = _poly3_kernel(b, b)
    k_ab = _poly3_kernel(a, b)
    term_a = (k_aa.sum() - np.trace(k_aa)) / (m * (m - 1))
    term_b = (k_bb.sum() - np.trace(k_bb)) / (n * (n - 1))
    if m == n:
        cross = (k_ab.sum() - np.trace(k_ab)) / (m * (m - 1))
    else:
        cross = k_ab.sum() / (m * n)
    return float(term_a + term_b - 2.0 * cross)
