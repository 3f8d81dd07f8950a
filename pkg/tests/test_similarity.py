import math

import numpy as np
import pytest

from hetmerge.errors import ValidationError
from hetmerge.features import CalibrationBatch, capture_features
from hetmerge.similarity import (
    layer_similarity_matrix,
    linear_cka,
    neuron_correlation,
)

from test_model import make_mlp


def pearson_oracle(u, v):
    """Direct covariance formula for one neuron pair."""
    mu, mv = sum(u) / len(u), sum(v) / len(v)
    cov = sum((a - mu) * (b - mv) for a, b in zip(u, v))
    su = math.sqrt(sum((a - mu) ** 2 for a in u))
    sv = math.sqrt(sum((b - mv) ** 2 for b in v))
    if su == 0.0 or sv == 0.0:
        return 0.0
    return cov / (su * sv)


class TestLinearCKA:
    def test_self_similarity_is_one(self):
        x = np.random.default_rng(0).normal(size=(6, 40))
        assert linear_cka(x, x) == pytest.approx(1.0, abs=1e-12)

    def test_permutation_invariance(self):
        rng = np.random.default_rng(1)
        x = rng.normal(size=(8, 30))
        p = rng.permutation(8)
        assert linear_cka(x[p], x) == pytest.approx(1.0, abs=1e-10)

    def test_scale_invariance(self):
        x = np.random.default_rng(2).normal(size=(5, 25))
        for c in (2.0, -0.3, 1e4):
            assert linear_cka(c * x, x) == pytest.approx(1.0, abs=1e-10)

    def test_invariance_sweep(self):
        rng = np.random.default_rng(3)
        for _ in range(50):
            n_x, n_y, m = rng.integers(2, 10, size=3)
            x = rng.normal(size=(n_x, m + 2))
            y = rng.normal(size=(n_y, m + 2))
            base = linear_cka(x, y)
            p, q = rng.permutation(n_x), rng.permutation(n_y)
            assert abs(linear_cka(x[p], y[q]) - base) < 1e-10
            assert abs(linear_cka(x, y) - linear_cka(y, x)) < 1e-12
            assert -1e-9 <= base <= 1 + 1e-9

    def test_zero_features_give_zero(self):
        x = np.zeros((4, 10))
        y = np.random.default_rng(4).normal(size=(3, 10))
        assert linear_cka(x, y) == 0.0
        assert linear_cka(x, x) == 0.0

    def test_sample_count_mismatch(self):
        with pytest.raises(ValidationError, match="sample counts"):
            linear_cka(np.zeros((3, 10)), np.zeros((3, 11)))

    def test_needs_two_samples(self):
        with pytest.raises(ValidationError, match="2 samples"):
            linear_cka(np.zeros((3, 1)), np.zeros((3, 1)))


class TestLayerSimMatrix:
    def _caches(self, dims_a, dims_b, seed=0):
        rng = np.random.default_rng(seed)
        batch = CalibrationBatch(rng.normal(size=(24, 4)))
        a = capture_features(make_mlp(seed=seed, dims=dims_a), batch)
        b = capture_features(make_mlp(seed=seed + 1, dims=dims_b), batch)
        return a, b

    def test_self_similarity_diagonal(self):
        cache, _ = self._caches((4, 5, 6), (4, 5))
        sim = layer_similarity_matrix(cache, cache)
        assert np.allclose(np.diag(sim.values), 1.0, atol=1e-10)

    def test_shape(self):
        a, b = self._caches((4, 5, 5, 5, 5, 5, 6), (4, 5, 5, 3))
        sim = layer_similarity_matrix(a, b)
        assert sim.shape == (6, 3)

    def test_matches_per_pair_oracle(self):
        a, b = self._caches((4, 5, 6), (4, 3, 7), seed=5)
        sim = layer_similarity_matrix(a, b)
        for i, fa in enumerate(a.entries):
            for j, fb in enumerate(b.entries):
                assert sim.values[i, j] == linear_cka(fa, fb)

    def test_batch_fingerprint_mismatch(self):
        rng = np.random.default_rng(6)
        b1 = CalibrationBatch(rng.normal(size=(10, 4)))
        b2 = CalibrationBatch(rng.normal(size=(10, 4)))
        m = make_mlp(seed=6)
        with pytest.raises(ValidationError, match="batch"):
            layer_similarity_matrix(capture_features(m, b1), capture_features(m, b2))


class TestNeuronCorrelation:
    def test_duplicated_neuron_is_exactly_one(self):
        f = np.random.default_rng(7).normal(size=(4, 20))
        corr = neuron_correlation(f, f)
        n = 4
        for i in range(n):
            assert corr.values[i, i + n] == 1.0

    def test_negated_neuron_is_exactly_minus_one(self):
        f = np.random.default_rng(8).normal(size=(3, 15))
        corr = neuron_correlation(f, -f)
        for i in range(3):
            assert corr.values[i, i + 3] == -1.0

    def test_matches_scalar_pearson_oracle(self):
        rng = np.random.default_rng(9)
        fa = rng.normal(size=(4, 12))
        fb = rng.normal(size=(4, 12))
        corr = neuron_correlation(fa, fb)
        stacked = np.concatenate([fa, fb])
        for i in range(8):
            for j in range(8):
                if i == j:
                    assert corr.values[i, j] == -np.inf
                else:
                    oracle = pearson_oracle(stacked[i], stacked[j])
                    assert abs(corr.values[i, j] - oracle) < 1e-12

    def test_symmetric_and_bounded(self):
        rng = np.random.default_rng(10)
        fa, fb = rng.normal(size=(5, 30)), rng.normal(size=(6, 30))
        v = neuron_correlation(fa, fb).values
        off = ~np.eye(11, dtype=bool)
        assert np.abs(v[off] - v.T[off]).max() < 1e-12
        assert (v[off] >= -1.0).all() and (v[off] <= 1.0).all()

    def test_zero_variance_neuron_correlates_zero(self):
        rng = np.random.default_rng(11)
        fa = rng.normal(size=(2, 10))
        fb = np.vstack([np.full(10, 3.7), rng.normal(size=10)])
        v = neuron_correlation(fa, fb).values
        assert np.all(v[2, [0, 1, 3]] == 0.0)
        assert np.all(v[[0, 1, 3], 2] == 0.0)

    def test_sample_count_mismatch(self):
        with pytest.raises(ValidationError, match="sample counts"):
            neuron_correlation(np.zeros((2, 5)), np.zeros((2, 6)))
