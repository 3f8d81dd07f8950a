"""Joint/per-task accuracy, weight interpolation, and the loss barrier."""

from __future__ import annotations

import io
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass

import numpy as np

from .data import Dataset
from .errors import ValidationError
from .model import Head, ModelBundle, forward

BARRIER_POINTS = 21


@dataclass(frozen=True)
class EvalReport:
    joint_acc: float
    per_task_acc: dict
    avg_acc: float
    task_counts: dict
    total: int

    def to_json(self) -> dict:
        return {
            "joint_acc": self.joint_acc,
            "avg_acc": self.avg_acc,
            "per_task_acc": dict(self.per_task_acc),
            "task_counts": dict(self.task_counts),
            "total": self.total,
        }

    def render_table(self) -> str:
        tasks = list(self.per_task_acc)
        header = ["Joint", "Avg"] + [f"Task {t}" for t in tasks]
        values = [self.joint_acc, self.avg_acc] + [self.per_task_acc[t] for t in tasks]
        width = max(9, max(len(h) for h in header) + 2)
        lines = [
            "".join(h.rjust(width) for h in header),
            "".join(f"{v*100:.2f}".rjust(width) for v in values),
        ]
        return "\n".join(lines)


def _joint_labels(model: ModelBundle) -> np.ndarray:
    labels = []
    for h in model.heads:
        labels.extend(h.labels)
    return np.asarray(labels, dtype=np.int64)


def evaluate(model: ModelBundle, dataset: Dataset, tasks=None) -> EvalReport:
    """Joint accuracy over the concatenated heads, plus accuracy of each task
    restricted to its own samples and head.

    `tasks` optionally restricts/maps task -> label tuple; defaults to the
    model's heads.
    """
    if tasks is None:
        tasks = {h.task: h.labels for h in model.heads}
    covered = set()
    for labels in tasks.values():
        covered.update(labels)
    present = set(int(v) for v in np.unique(dataset.y))
    missing = present - covered
    if missing:
        raise ValidationError(f"no head covers labels {sorted(missing)}")

    joint_labels = _joint_labels(model)
    logits = forward(model, dataset.x)
    pred = joint_labels[np.argmax(logits, axis=1)]
    joint_acc = float(np.mean(pred == dataset.y))

    per_task, counts = {}, {}
    for task, labels in tasks.items():
        label_arr = np.asarray(labels, dtype=np.int64)
        mask = np.isin(dataset.y, label_arr)
        counts[task] = int(mask.sum())
        if counts[task] == 0:
            continue  # task absent from this dataset; leave it out of the averages
        head_logits = forward(model, dataset.x[mask], head=task)
        head_labels = np.asarray(model.head(task).labels, dtype=np.int64)
        task_pred = head_labels[np.argmax(head_logits, axis=1)]
        per_task[task] = float(np.mean(task_pred == dataset.y[mask]))
    avg = float(np.mean(list(per_task.values()))) if per_task else 0.0
    return EvalReport(
        joint_acc=joint_acc,
        per_task_acc=per_task,
        avg_acc=avg,
        task_counts=counts,
        total=len(dataset),
    )


def _check_interpolable(a: ModelBundle, b: ModelBundle) -> None:
    if a.layers != b.layers:
        raise ValidationError("architectures differ; cannot interpolate")
    if len(a.heads) != len(b.heads) or any(
        ha.task != hb.task or ha.labels != hb.labels or ha.weight.shape != hb.weight.shape
        for ha, hb in zip(a.heads, b.heads)
    ):
        raise ValidationError("head structures differ; cannot interpolate")


def interpolate(a: ModelBundle, b: ModelBundle, lam: float) -> ModelBundle:
    """Entrywise convex combination lam * a + (1 - lam) * b."""
    if not 0.0 <= lam <= 1.0:
        raise ValidationError(f"lambda must be in [0, 1], got {lam}")
    _check_interpolable(a, b)
    mix = lambda x, y: lam * x + (1.0 - lam) * y
    heads = tuple(
        Head(task=ha.task, labels=ha.labels, weight=mix(ha.weight, hb.weight), bias=mix(ha.bias, hb.bias))
        for ha, hb in zip(a.heads, b.heads)
    )
    return ModelBundle(
        layers=a.layers,
        weights=tuple(mix(wa, wb) for wa, wb in zip(a.weights, b.weights)),
        biases=tuple(mix(ba, bb) for ba, bb in zip(a.biases, b.biases)),
        heads=heads,
        metadata={"interpolated": lam},
    )


def cross_entropy_loss(model: ModelBundle, dataset: Dataset) -> float:
    """Mean softmax cross-entropy over the joint label space."""
    joint_labels = _joint_labels(model)
    index_of = {int(lbl): i for i, lbl in enumerate(joint_labels)}
    try:
        targets = np.asarray([index_of[int(v)] for v in dataset.y], dtype=np.int64)
    except KeyError as e:
        raise ValidationError(f"no head covers label {e.args[0]}") from e
    logits = forward(model, dataset.x)
    shifted = logits - logits.max(axis=1, keepdims=True)
    logz = np.log(np.exp(shifted).sum(axis=1))
    return float(np.mean(logz - shifted[np.arange(len(dataset)), targets]))


@dataclass(frozen=True)
class BarrierReport:
    lambdas: np.ndarray
    losses: np.ndarray
    loss_a: float
    loss_b: float
    barrier: float

    def to_json(self) -> dict:
        return {
            "lambdas": self.lambdas.tolist(),
            "losses": self.losses.tolist(),
            "loss_a": self.loss_a,
            "loss_b": self.loss_b,
            "barrier": self.barrier,
        }

    def to_csv(self) -> str:
        buf = io.StringIO()
        buf.write("lambda,loss\n")
        for lam, loss in zip(self.lambdas, self.losses):
            buf.write(f"{lam},{loss}\n")
        return buf.getvalue()

    def render_table(self) -> str:
        lines = ["lambda    loss"]
        for lam, loss in zip(self.lambdas, self.losses):
            lines.append(f"{lam:6.2f}  {loss:.6f}")
        lines.append(f"barrier = {self.barrier:.6f}")
        return "\n".join(lines)


def loss_barrier(
    a: ModelBundle, b: ModelBundle, dataset: Dataset, threads: int = 1
) -> BarrierReport:
    """Loss along the 21-point interpolation grid and the barrier: the worst
    interpolated loss minus the endpoint average.

    lambda = 0 is model B, lambda = 1 is model A.
    """
    _check_interpolable(a, b)
    lambdas = np.linspace(0.0, 1.0, BARRIER_POINTS)

    def loss_at(lam: float) -> float:
        return cross_entropy_loss(interpolate(a, b, lam), dataset)

    if threads > 1:
        with ThreadPoolExecutor(max_workers=threads) as pool:
            losses = np.asarray(list(pool.map(loss_at, lambdas)))
    else:
        losses = np.asarray([loss_at(lam) for lam in lambdas])
    loss_a, loss_b = float(losses[-1]), float(losses[0])
    barrier = float(losses.max() - 0.5 * (loss_a + loss_b))
    return BarrierReport(
        lambdas=lambdas, losses=losses, loss_a=loss_a, loss_b=loss_b, barrier=barrier
    )
