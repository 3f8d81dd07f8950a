"""Synthetic two-task classification data and a deterministic numpy SGD
trainer, so merging experiments run reproducibly with no framework
dependency.

Two tasks share one Gaussian-mixture input family but own disjoint label
ranges: task A gets labels 0..k-1, task B gets k..2k-1.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .data import Dataset, concat_datasets
from .errors import HetmergeError, ValidationError
from .model import DENSE, RELU, RESIDUAL, Head, LayerSpec, ModelBundle

TASK_A = "a"
TASK_B = "b"


@dataclass(frozen=True)
class TaskSpec:
    classes_per_task: int = 5
    input_dim: int = 16
    samples_per_class: int = 600
    train_fraction: float = 2.0 / 3.0
    mean_scale: float = 2.5
    noise_scale: float = 1.0
    dist_seed: int = 0

    def __post_init__(self):
        if self.classes_per_task < 1:
            raise ValidationError("need at least one class per task")
        if not 0.0 < self.train_fraction < 1.0:
            raise ValidationError("train_fraction must be in (0, 1)")
        if self.samples_per_class < 2:
            raise ValidationError("need at least 2 samples per class")


@dataclass(frozen=True)
class ToyTasks:
    task_a_train: Dataset
    task_a_test: Dataset
    task_b_train: Dataset
    task_b_test: Dataset

    @property
    def joint_train(self) -> Dataset:
        return concat_datasets(self.task_a_train, self.task_b_train)

    @property
    def joint_test(self) -> Dataset:
        return concat_datasets(self.task_a_test, self.task_b_test)


def gen_tasks(spec: TaskSpec, seed: int = 0) -> ToyTasks:
    """Gaussian-mixture train/test splits for both tasks.

    Cluster means come from spec.dist_seed (the task identity); samples come
    from `seed`, so different seeds resample the same underlying tasks.
    """
    k, d = spec.classes_per_task, spec.input_dim
    mean_rng = np.random.default_rng(spec.dist_seed)
    means = mean_rng.normal(0.0, spec.mean_scale, size=(2 * k, d))
    sample_rng = np.random.default_rng(seed)
    n_train = int(round(spec.samples_per_class * spec.train_fraction))

    def build(class_ids) -> tuple[Dataset, Dataset]:
        xs_tr, ys_tr, xs_te, ys_te = [], [], [], []
        for c in class_ids:
            pts = sample_rng.normal(
                means[c], spec.noise_scale, size=(spec.samples_per_class, d)
            )
            xs_tr.append(pts[:n_train])
            ys_tr.append(np.full(n_train, c))
            xs_te.append(pts[n_train:])
            ys_te.append(np.full(spec.samples_per_class - n_train, c))
        train = Dataset(np.concatenate(xs_tr), np.concatenate(ys_tr))
        test = Dataset(np.concatenate(xs_te), np.concatenate(ys_te))
        return train, test

    a_train, a_test = build(range(k))
    b_train, b_test = build(range(k, 2 * k))
    return ToyTasks(a_train, a_test, b_train, b_test)


def mlp_arch(depth: int, width: int, in_dim: int = 16) -> tuple[LayerSpec, ...]:
    """Plain ReLU MLP hidden stack: in_dim -> width -> ... -> width."""
    if depth < 1:
        raise ValidationError("depth must be >= 1")
    layers = [LayerSpec(DENSE, in_dim, width, RELU)]
    layers += [LayerSpec(DENSE, width, width, RELU) for _ in range(depth - 1)]
    return tuple(layers)


def residual_arch(blocks: int, width: int, in_dim: int = 16) -> tuple[LayerSpec, ...]:
    """A dense stem followed by `blocks` ReLU residual blocks."""
    if blocks < 1:
        raise ValidationError("blocks must be >= 1")
    layers = [LayerSpec(DENSE, in_dim, width, RELU)]
    layers += [LayerSpec(RESIDUAL, width, width, RELU) for _ in range(blocks)]
    return tuple(layers)


def _init_bundle(arch, labels, rng) -> tuple[list, list, np.ndarray, np.ndarray]:
    weights, biases = [], []
    for spec in arch:
        bound = 1.0 / np.sqrt(spec.in_dim)
        weights.append(rng.uniform(-bound, bound, size=(spec.out_dim, spec.in_dim)))
        biases.append(np.zeros(spec.out_dim))
    hidden = arch[-1].out_dim
    bound = 1.0 / np.sqrt(hidden)
    head_w = rng.uniform(-bound, bound, size=(len(labels), hidden))
    head_b = np.zeros(len(labels))
    return weights, biases, head_w, head_b


def train_mlp(
    arch,
    data: Dataset,
    task: str = TASK_A,
    seed: int = 0,
    epochs: int = 20,
    lr: float = 0.05,
    batch_size: int = 32,
) -> ModelBundle:
    """Minibatch SGD with softmax cross-entropy; fully determined by `seed`.

    Returns the bundle with training provenance (and the per-epoch loss
    history) in its metadata.
    """
    arch = tuple(arch)
    if arch[0].in_dim != data.x.shape[1]:
        raise ValidationError(
            f"architecture expects {arch[0].in_dim}-dim inputs, data has {data.x.shape[1]}"
        )
    labels = data.labels
    local = {lbl: i for i, lbl in enumerate(labels)}
    targets = np.asarray([local[int(v)] for v in data.y], dtype=np.int64)

    rng = np.random.default_rng(seed)
    weights, biases, head_w, head_b = _init_bundle(arch, labels, rng)
    n = len(data)
    history = []
    # overflow surfaces as a non-finite loss, which aborts with diagnostics
    with np.errstate(over="ignore", invalid="ignore"):
        for _ in range(epochs):
            order = rng.permutation(n)
            epoch_loss = 0.0
            for start in range(0, n, batch_size):
                idx = order[start : start + batch_size]
                x0, t = data.x[idx], targets[idx]
                bsz = len(idx)

                xs, zs = [x0], []
                x = x0
                for spec, w, b in zip(arch, weights, biases):
                    z = x @ w.T + b
                    if spec.kind == RESIDUAL:
                        z = x + z
                    zs.append(z)
                    x = np.maximum(z, 0.0) if spec.activation == RELU else z
                    xs.append(x)
                logits = x @ head_w.T + head_b

                shifted = logits - logits.max(axis=1, keepdims=True)
                expl = np.exp(shifted)
                probs = expl / expl.sum(axis=1, keepdims=True)
                batch_loss = float(
                    np.mean(np.log(expl.sum(axis=1)) - shifted[np.arange(bsz), t])
                )
                if not np.isfinite(batch_loss):
                    raise HetmergeError(
                        f"non-finite loss at epoch {len(history)}, step {start // batch_size}: "
                        f"{batch_loss}; lower the learning rate (lr={lr})"
                    )
                epoch_loss += batch_loss * bsz

                dlogits = probs
                dlogits[np.arange(bsz), t] -= 1.0
                dlogits /= bsz
                d_head_w = dlogits.T @ xs[-1]
                d_head_b = dlogits.sum(axis=0)
                dx = dlogits @ head_w
                grads_w, grads_b = [], []
                for li in range(len(arch) - 1, -1, -1):
                    spec = arch[li]
                    dz = dx * (zs[li] > 0.0) if spec.activation == RELU else dx
                    grads_w.append(dz.T @ xs[li])
                    grads_b.append(dz.sum(axis=0))
                    dx = dz @ weights[li]
                    if spec.kind == RESIDUAL:
                        dx = dx + dz
                grads_w.reverse()
                grads_b.reverse()

                head_w = head_w - lr * d_head_w
                head_b = head_b - lr * d_head_b
                weights = [w - lr * g for w, g in zip(weights, grads_w)]
                biases = [b - lr * g for b, g in zip(biases, grads_b)]
            history.append(epoch_loss / n)

    head = Head(task=task, labels=labels, weight=head_w, bias=head_b)
    return ModelBundle(
        layers=arch,
        weights=tuple(weights),
        biases=tuple(biases),
        heads=(head,),
        metadata={
            "task": task,
            "seed": seed,
            "epochs": epochs,
            "lr": lr,
            "batch_size": batch_size,
            "loss_history": history,
        },
    )
