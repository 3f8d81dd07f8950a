"""Representation similarity: linear CKA between layers and Pearson
correlation between individual neurons.

Linear CKA is invariant to neuron permutation and isotropic scaling, which is
what lets layers be compared before any alignment has been computed.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import ValidationError
from .features import FeatureCache
from .linalg import as_matrix

NEG_INF = -np.inf
_ZERO_VAR_RTOL = 1e-12


def _centered_samples_view(f: np.ndarray) -> np.ndarray:
    """Samples-by-neurons view with each neuron's mean over samples removed."""
    x = f.T
    return x - x.mean(axis=0, keepdims=True)


def linear_cka(x, y) -> float:
    """Linear centered kernel alignment between two neurons-by-samples
    feature matrices sharing a sample count.

    Returns ||Yc.T @ Xc||_F^2 / (||Xc.T @ Xc||_F * ||Yc.T @ Yc||_F) in [0, 1];
    defined as 0.0 when either centered matrix is all zero (dead layer).
    """
    x = as_matrix(x, "x")
    y = as_matrix(y, "y")
    if x.shape[1] != y.shape[1]:
        raise ValidationError(f"sample counts differ: {x.shape[1]} vs {y.shape[1]}")
    if x.shape[1] < 2:
        raise ValidationError("CKA needs at least 2 samples")
    xc = _centered_samples_view(x)
    yc = _centered_samples_view(y)
    num = np.linalg.norm(yc.T @ xc) ** 2
    den = np.linalg.norm(xc.T @ xc) * np.linalg.norm(yc.T @ yc)
    if den == 0.0:
        return 0.0
    return float(num / den)


@dataclass(frozen=True)
class LayerSimMatrix:
    """All-pairs layer similarity; rows index model A layers, cols model B."""

    values: np.ndarray
    row_model: str = ""
    col_model: str = ""
    batch_fingerprint: str = ""

    def __post_init__(self):
        object.__setattr__(self, "values", as_matrix(self.values, "values"))

    @property
    def shape(self):
        return self.values.shape


def layer_similarity_matrix(cache_a: FeatureCache, cache_b: FeatureCache) -> LayerSimMatrix:
    """C[i, j] = linear_cka(layer i of A, layer j of B), all pairs."""
    if cache_a.batch_fingerprint != cache_b.batch_fingerprint:
        raise ValidationError("feature caches come from different calibration batches")
    values = np.zeros((len(cache_a), len(cache_b)))
    for i, fa in enumerate(cache_a.entries):
        for j, fb in enumerate(cache_b.entries):
            values[i, j] = linear_cka(fa, fb)
    return LayerSimMatrix(
        values=values,
        row_model=cache_a.model_fingerprint,
        col_model=cache_b.model_fingerprint,
        batch_fingerprint=cache_a.batch_fingerprint,
    )


@dataclass(frozen=True)
class NeuronCorrMatrix:
    """Pearson correlation over the concatenated neuron set [A; B]; the
    diagonal is masked to -inf so self-pairs never win a similarity search."""

    values: np.ndarray
    n_a: int
    n_b: int


def _row_correlations(stacked: np.ndarray) -> np.ndarray:
    centered = stacked - stacked.mean(axis=1, keepdims=True)
    gram = centered @ centered.T
    # taking the squared norms off the gram diagonal (same accumulation order
    # as the off-diagonal dots) keeps corr of duplicated rows at exactly 1.0
    sq = np.diag(gram).copy()
    mean_scale = 1.0 + np.abs(stacked.mean(axis=1))
    m = stacked.shape[1]
    dead = np.sqrt(np.maximum(sq, 0.0) / max(m - 1, 1)) < _ZERO_VAR_RTOL * mean_scale
    denom = np.sqrt(np.outer(sq, sq))
    denom[dead, :] = 1.0
    denom[:, dead] = 1.0
    corr = gram / denom
    corr[dead, :] = 0.0
    corr[:, dead] = 0.0
    return np.clip(corr, -1.0, 1.0)


def neuron_correlation(feat_a, feat_b) -> NeuronCorrMatrix:
    """Correlation across samples between every pair of neurons of [A; B].

    Zero-variance neurons correlate 0 with everything.
    """
    feat_a = as_matrix(feat_a, "feat_a")
    feat_b = as_matrix(feat_b, "feat_b")
    if feat_a.shape[1] != feat_b.shape[1]:
        raise ValidationError(
            f"sample counts differ: {feat_a.shape[1]} vs {feat_b.shape[1]}"
        )
    stacked = np.concatenate([feat_a, feat_b], axis=0)
    corr = _row_correlations(stacked)
    np.fill_diagonal(corr, NEG_INF)
    return NeuronCorrMatrix(values=corr, n_a=feat_a.shape[0], n_b=feat_b.shape[0])
