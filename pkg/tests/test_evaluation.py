import math

import numpy as np
import pytest

from hetmerge.data import Dataset
from hetmerge.errors import ValidationError
from hetmerge.evaluation import (
    BARRIER_POINTS,
    cross_entropy_loss,
    evaluate,
    interpolate,
    loss_barrier,
)
from hetmerge.merger import average_weights
from hetmerge.model import DENSE, LINEAR, Head, LayerSpec, ModelBundle, forward

from test_model import make_mlp


def two_head_model(seed=0, dims=(4, 6)):
    rng = np.random.default_rng(seed)
    layers = (LayerSpec(DENSE, dims[0], dims[1], LINEAR),)
    weights = (rng.normal(size=(dims[1], dims[0])),)
    biases = (rng.normal(size=dims[1]),)
    heads = (
        Head("a", (0, 1), rng.normal(size=(2, dims[1])), rng.normal(size=2)),
        Head("b", (2, 3), rng.normal(size=(2, dims[1])), rng.normal(size=2)),
    )
    return ModelBundle(layers=layers, weights=weights, biases=biases, heads=heads)


def accuracy_oracle(model, dataset):
    """Scalar argmax-count reference for joint and per-task accuracy."""
    joint_labels = [lbl for h in model.heads for lbl in h.labels]
    logits = forward(model, dataset.x)
    joint_hits = 0
    per_task_hits = {h.task: 0 for h in model.heads}
    per_task_n = {h.task: 0 for h in model.heads}
    for row, y in zip(logits, dataset.y):
        best = max(range(len(row)), key=lambda i: row[i])
        if joint_labels[best] == y:
            joint_hits += 1
    for h in model.heads:
        mask = [i for i, y in enumerate(dataset.y) if y in h.labels]
        per_task_n[h.task] = len(mask)
        sub = forward(model, dataset.x[mask], head=h.task)
        for row, y in zip(sub, dataset.y[mask]):
            best = max(range(len(row)), key=lambda i: row[i])
            if h.labels[best] == y:
                per_task_hits[h.task] += 1
    per_task = {t: per_task_hits[t] / per_task_n[t] for t in per_task_hits}
    return joint_hits / len(dataset), per_task


class TestEvaluate:
    def test_constant_correct_model_scores_one(self):
        model = ModelBundle(
            layers=(LayerSpec(DENSE, 2, 2, LINEAR),),
            weights=(np.zeros((2, 2)),),
            biases=(np.zeros(2),),
            heads=(Head("a", (0,), np.zeros((1, 2)), np.zeros(1)),),
        )
        ds = Dataset(np.random.default_rng(0).normal(size=(10, 2)), np.zeros(10, dtype=int))
        report = evaluate(model, ds)
        assert report.joint_acc == 1.0
        assert report.per_task_acc["a"] == 1.0

    def test_untrained_model_is_near_chance(self):
        rng = np.random.default_rng(1)
        model = ModelBundle(
            layers=(LayerSpec(DENSE, 4, 8, LINEAR),),
            weights=(rng.normal(size=(8, 4)),),
            biases=(np.zeros(8),),
            heads=(Head("a", (0, 1), rng.normal(size=(2, 8)), np.zeros(2)),),
        )
        ds = Dataset(rng.normal(size=(1000, 4)), rng.integers(0, 2, size=1000))
        report = evaluate(model, ds)
        assert abs(report.joint_acc - 0.5) < 0.1

    def test_matches_scalar_oracle(self):
        model = two_head_model(seed=2)
        rng = np.random.default_rng(3)
        ds = Dataset(rng.normal(size=(60, 4)), rng.integers(0, 4, size=60))
        report = evaluate(model, ds)
        joint, per_task = accuracy_oracle(model, ds)
        assert report.joint_acc == pytest.approx(joint, abs=1e-12)
        for task in per_task:
            assert report.per_task_acc[task] == pytest.approx(per_task[task], abs=1e-12)
        assert report.avg_acc == pytest.approx(
            np.mean(list(per_task.values())), abs=1e-12
        )
        assert report.total == 60

    def test_missing_head_rejected(self):
        model = make_mlp(seed=4, labels=(0, 1, 2))
        ds = Dataset(np.zeros((4, 4)), np.array([0, 1, 2, 7]))
        with pytest.raises(ValidationError, match="7"):
            evaluate(model, ds)

    def test_order_independence(self):
        model = two_head_model(seed=5)
        rng = np.random.default_rng(6)
        x, y = rng.normal(size=(40, 4)), rng.integers(0, 4, size=40)
        perm = rng.permutation(40)
        r1 = evaluate(model, Dataset(x, y))
        r2 = evaluate(model, Dataset(x[perm], y[perm]))
        assert r1.joint_acc == r2.joint_acc
        assert r1.per_task_acc == r2.per_task_acc


class TestInterpolate:
    def test_endpoints_are_exact(self):
        a, b = make_mlp(seed=7), make_mlp(seed=8)
        at1 = interpolate(a, b, 1.0)
        at0 = interpolate(a, b, 0.0)
        for w1, w2 in zip(at1.weights, a.weights):
            assert np.array_equal(w1, w2)
        for w1, w2 in zip(at0.weights, b.weights):
            assert np.array_equal(w1, w2)

    def test_midpoint_equals_average_weights(self):
        a, b = make_mlp(seed=9), make_mlp(seed=10)
        mid = interpolate(a, b, 0.5)
        avg = average_weights(a, b)
        for w1, w2 in zip(mid.weights, avg.weights):
            assert np.abs(w1 - w2).max() < 1e-15

    def test_self_interpolation_is_fixed_point(self):
        a = make_mlp(seed=11)
        for lam in (0.0, 0.05, 0.3, 0.77, 1.0):
            out = interpolate(a, a, lam)
            for w1, w2 in zip(out.weights, a.weights):
                assert np.abs(w1 - w2).max() < 1e-15

    def test_lambda_bounds(self):
        a = make_mlp(seed=12)
        with pytest.raises(ValidationError, match="lambda"):
            interpolate(a, a, 1.5)

    def test_architecture_mismatch(self):
        with pytest.raises(ValidationError):
            interpolate(make_mlp(seed=13), make_mlp(seed=13, dims=(4, 7, 5)), 0.5)


def cross_entropy_oracle(model, dataset):
    """Scalar softmax cross-entropy over the joint label space."""
    joint_labels = [lbl for h in model.heads for lbl in h.labels]
    index = {lbl: i for i, lbl in enumerate(joint_labels)}
    logits = forward(model, dataset.x)
    total = 0.0
    for row, y in zip(logits, dataset.y):
        z = max(row)
        logsum = z + math.log(sum(math.exp(v - z) for v in row))
        total += logsum - row[index[int(y)]]
    return total / len(dataset)


class TestLossBarrier:
    def _pair_and_data(self, seed=14):
        rng = np.random.default_rng(seed)
        a = make_mlp(seed=seed, labels=(0, 1, 2))
        b = make_mlp(seed=seed + 1, labels=(0, 1, 2))
        ds = Dataset(rng.normal(size=(50, 4)), rng.integers(0, 3, size=50))
        return a, b, ds

    def test_grid_is_21_evenly_spaced_points(self):
        a, b, ds = self._pair_and_data()
        report = loss_barrier(a, b, ds)
        assert len(report.lambdas) == BARRIER_POINTS == 21
        assert np.array_equal(report.lambdas, np.linspace(0.0, 1.0, 21))

    def test_self_barrier_is_zero(self):
        a, _, ds = self._pair_and_data(seed=16)
        report = loss_barrier(a, a, ds)
        assert abs(report.barrier) < 1e-12

    def test_symmetry(self):
        a, b, ds = self._pair_and_data(seed=18)
        r1 = loss_barrier(a, b, ds)
        r2 = loss_barrier(b, a, ds)
        assert r1.barrier == pytest.approx(r2.barrier, abs=1e-10)

    def test_matches_scalar_recomputation(self):
        a, b, ds = self._pair_and_data(seed=20)
        report = loss_barrier(a, b, ds)
        losses = [
            cross_entropy_oracle(interpolate(a, b, lam), ds) for lam in report.lambdas
        ]
        assert np.abs(np.asarray(losses) - report.losses).max() < 1e-10
        expected = max(losses) - 0.5 * (losses[-1] + losses[0])
        assert report.barrier == pytest.approx(expected, abs=1e-10)
        assert report.loss_a == pytest.approx(losses[-1], abs=1e-10)
        assert report.loss_b == pytest.approx(losses[0], abs=1e-10)

    def test_barrier_not_below_endpoint_gap(self):
        a, b, ds = self._pair_and_data(seed=22)
        report = loss_barrier(a, b, ds)
        assert report.barrier >= -(abs(report.loss_a - report.loss_b) / 2 + 1e-9)

    def test_threads_do_not_change_results(self):
        a, b, ds = self._pair_and_data(seed=24)
        serial = loss_barrier(a, b, ds, threads=1)
        parallel = loss_barrier(a, b, ds, threads=4)
        assert np.array_equal(serial.losses, parallel.losses)

    def test_reports_serialize(self):
        a, b, ds = self._pair_and_data(seed=26)
        report = loss_barrier(a, b, ds)
        doc = report.to_json()
        assert len(doc["losses"]) == 21
        csv = report.to_csv()
        assert csv.startswith("lambda,loss\n")
        assert len(csv.strip().splitlines()) == 22

    def test_cross_entropy_matches_oracle(self):
        model = two_head_model(seed=28)
        rng = np.random.default_rng(29)
        ds = Dataset(rng.normal(size=(30, 4)), rng.integers(0, 4, size=30))
        assert cross_entropy_loss(model, ds) == pytest.approx(
            cross_entropy_oracle(model, ds), abs=1e-12
        )
