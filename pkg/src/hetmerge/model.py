"""Model intermediate representation: layer specs, weight storage, forward
execution, and the function-preserving depth extensions.

Weights are stored out_dim x in_dim (rows are output neurons), so permuting
neurons is a row permutation.  Dense layers compute act(x @ W.T + b); residual
layers add the input back before the activation: act(x + x @ W.T + b).
"""

from __future__ import annotations

import hashlib
from dataclasses import dataclass, field, replace

import numpy as np

from . import container
from .errors import ValidationError
from .linalg import as_matrix, as_vector

DENSE = "Dense"
RESIDUAL = "ResidualDense"
RELU = "ReLU"
LINEAR = "Linear"

IDENTITY_DENSE = "IdentityDense"
ZERO_RESIDUAL = "ZeroResidual"


@dataclass(frozen=True)
class LayerSpec:
    kind: str
    in_dim: int
    out_dim: int
    activation: str

    def __post_init__(self):
        if self.kind not in (DENSE, RESIDUAL):
            raise ValidationError(f"unknown layer kind {self.kind!r}")
        if self.activation not in (RELU, LINEAR):
            raise ValidationError(f"unknown activation {self.activation!r}")
        if self.in_dim < 1 or self.out_dim < 1:
            raise ValidationError("layer dims must be positive")
        if self.kind == RESIDUAL and self.in_dim != self.out_dim:
            raise ValidationError(
                f"residual layer needs in_dim == out_dim, got {self.in_dim} != {self.out_dim}"
            )


@dataclass(frozen=True)
class Head:
    """Per-task output head mapping the final hidden layer to global labels."""

    task: str
    labels: tuple[int, ...]
    weight: np.ndarray
    bias: np.ndarray

    def __post_init__(self):
        object.__setattr__(self, "weight", as_matrix(self.weight, f"head {self.task} weight"))
        object.__setattr__(self, "bias", as_vector(self.bias, f"head {self.task} bias"))
        object.__setattr__(self, "labels", tuple(int(v) for v in self.labels))
        if self.weight.shape[0] != len(self.labels):
            raise ValidationError(
                f"head {self.task}: {self.weight.shape[0]} output rows vs {len(self.labels)} labels"
            )
        if self.bias.shape[0] != self.weight.shape[0]:
            raise ValidationError(f"head {self.task}: bias length mismatch")


@dataclass(frozen=True)
class ModelBundle:
    layers: tuple[LayerSpec, ...]
    weights: tuple[np.ndarray, ...]
    biases: tuple[np.ndarray, ...]
    heads: tuple[Head, ...]
    metadata: dict = field(default_factory=dict)

    def __post_init__(self):
        object.__setattr__(self, "layers", tuple(self.layers))
        object.__setattr__(self, "heads", tuple(self.heads))
        if not self.layers:
            raise ValidationError("model needs at least one layer")
        if not self.heads:
            raise ValidationError("model needs at least one head")
        weights = tuple(as_matrix(w, f"layer{i}.weight") for i, w in enumerate(self.weights))
        biases = tuple(as_vector(b, f"layer{i}.bias") for i, b in enumerate(self.biases))
        object.__setattr__(self, "weights", weights)
        object.__setattr__(self, "biases", biases)
        if len(weights) != len(self.layers) or len(biases) != len(self.layers):
            raise ValidationError("one weight matrix and bias vector per layer required")
        for i, (spec, w, b) in enumerate(zip(self.layers, weights, biases)):
            if w.shape != (spec.out_dim, spec.in_dim):
                raise ValidationError(
                    f"layer{i}.weight shape {w.shape} != ({spec.out_dim}, {spec.in_dim})"
                )
            if b.shape != (spec.out_dim,):
                raise ValidationError(f"layer{i}.bias shape {b.shape} != ({spec.out_dim},)")
            if i > 0 and spec.in_dim != self.layers[i - 1].out_dim:
                raise ValidationError(
                    f"layer{i} in_dim {spec.in_dim} != layer{i-1} out_dim {self.layers[i-1].out_dim}"
                )
        hidden = self.layers[-1].out_dim
        seen = set()
        for h in self.heads:
            if h.task in seen:
                raise ValidationError(f"duplicate head task {h.task!r}")
            seen.add(h.task)
            if h.weight.shape[1] != hidden:
                raise ValidationError(
                    f"head {h.task}: in_dim {h.weight.shape[1]} != final hidden dim {hidden}"
                )

    @property
    def depth(self) -> int:
        return len(self.layers)

    @property
    def input_dim(self) -> int:
        return self.layers[0].in_dim

    @property
    def hidden_dim(self) -> int:
        return self.layers[-1].out_dim

    def head(self, task: str) -> Head:
        for h in self.heads:
            if h.task == task:
                return h
        raise ValidationError(f"no head for task {task!r}")

    def with_metadata(self, **updates) -> "ModelBundle":
        md = dict(self.metadata)
        md.update(updates)
        return replace(self, metadata=md)


def _apply_activation(z: np.ndarray, activation: str) -> np.ndarray:
    if activation == RELU:
        return np.maximum(z, 0.0)
    return z


def layer_outputs(bundle: ModelBundle, batch) -> list[np.ndarray]:
    """Post-activation output of every layer for `batch` (samples in rows)."""
    x = as_matrix(batch, "batch")
    if x.shape[1] != bundle.input_dim:
        raise ValidationError(
            f"batch has {x.shape[1]} columns but model expects {bundle.input_dim}"
        )
    outs = []
    for spec, w, b in zip(bundle.layers, bundle.weights, bundle.biases):
        z = x @ w.T + b
        if spec.kind == RESIDUAL:
            z = x + z
        x = _apply_activation(z, spec.activation)
        outs.append(x)
    return outs


def forward(bundle: ModelBundle, batch, head: str | None = None) -> np.ndarray:
    """Logits for `batch`; `head` selects a task, None concatenates all heads."""
    hidden = layer_outputs(bundle, batch)[-1]
    if head is None:
        parts = [hidden @ h.weight.T + h.bias for h in bundle.heads]
        return np.concatenate(parts, axis=1)
    h = bundle.head(head)
    return hidden @ h.weight.T + h.bias


@dataclass(frozen=True)
class ExtensionPlan:
    """Depth extension: for each source layer i, `counts[i]` pass-through
    layers are inserted directly after it."""

    mode: str
    counts: tuple[int, ...]

    def __post_init__(self):
        if self.mode not in (IDENTITY_DENSE, ZERO_RESIDUAL):
            raise ValidationError(f"unknown extension mode {self.mode!r}")
        counts = tuple(int(c) for c in self.counts)
        object.__setattr__(self, "counts", counts)
        if any(c < 0 for c in counts):
            raise ValidationError("insertion counts must be non-negative")

    @property
    def total_insertions(self) -> int:
        return sum(self.counts)


def extension_plan_from_segments(plan, mode: str) -> ExtensionPlan:
    """Build the ExtensionPlan matching a depth-alignment SegmentPlan: segment
    i of the deep model gets the shallow layer i first and len(segment)-1
    pass-through layers after it."""
    counts = []
    prev = 0
    for g in plan.g:
        counts.append(g - prev - 1)
        prev = g
    return ExtensionPlan(mode=mode, counts=tuple(counts))


def extend_model(bundle: ModelBundle, plan: ExtensionPlan) -> ModelBundle:
    """Insert pass-through layers; the result computes the same function.

    IdentityDense inserts W=I, b=0, Linear activation dense layers.
    ZeroResidual inserts W=0, b=0, Linear activation residual layers (the
    shortcut passes features through unchanged).
    """
    if len(plan.counts) != bundle.depth:
        raise ValidationError(
            f"plan covers {len(plan.counts)} layers but model has {bundle.depth}"
        )
    layers, weights, biases = [], [], []
    for spec, w, b, count in zip(bundle.layers, bundle.weights, bundle.biases, plan.counts):
        layers.append(spec)
        weights.append(w)
        biases.append(b)
        dim = spec.out_dim
        for _ in range(count):
            if plan.mode == IDENTITY_DENSE:
                layers.append(LayerSpec(DENSE, dim, dim, LINEAR))
                weights.append(np.eye(dim))
            else:
                if spec.kind != RESIDUAL:
                    raise ValidationError(
                        f"ZeroResidual insertion after non-residual layer ({spec.kind})"
                    )
                layers.append(LayerSpec(RESIDUAL, dim, dim, LINEAR))
                weights.append(np.zeros((dim, dim)))
            biases.append(np.zeros(dim))
    return ModelBundle(
        layers=tuple(layers),
        weights=tuple(weights),
        biases=tuple(biases),
        heads=bundle.heads,
        metadata=dict(bundle.metadata, extended_by=plan.total_insertions),
    )


# --- container round trip ---------------------------------------------------


def _bundle_payload(bundle: ModelBundle):
    layers = [
        {"kind": s.kind, "in_dim": s.in_dim, "out_dim": s.out_dim, "activation": s.activation}
        for s in bundle.layers
    ]
    heads = [{"task": h.task, "labels": list(h.labels)} for h in bundle.heads]
    tensors = {}
    for i, (w, b) in enumerate(zip(bundle.weights, bundle.biases)):
        tensors[f"layer{i}.weight"] = w
        tensors[f"layer{i}.bias"] = b
    for h in bundle.heads:
        tensors[f"head{h.task}.weight"] = h.weight
        tensors[f"head{h.task}.bias"] = h.bias
    return layers, heads, tensors


def save_model(bundle: ModelBundle, path) -> None:
    layers, heads, tensors = _bundle_payload(bundle)
    container.write_container(
        path, tensors, layers=layers, heads=heads, metadata=bundle.metadata
    )


def load_model(path) -> ModelBundle:
    header, tensors = container.read_container(path)
    layers = tuple(
        LayerSpec(s["kind"], int(s["in_dim"]), int(s["out_dim"]), s["activation"])
        for s in header["layers"]
    )
    if not layers:
        raise ValidationError(f"{path}: container has no layers")
    weights, biases = [], []
    for i in range(len(layers)):
        for part, store in (("weight", weights), ("bias", biases)):
            name = f"layer{i}.{part}"
            if name not in tensors:
                raise ValidationError(f"{path}: missing tensor {name}")
            store.append(tensors[name])
    heads = []
    for spec in header["heads"]:
        task = spec["task"]
        for part in ("weight", "bias"):
            if f"head{task}.{part}" not in tensors:
                raise ValidationError(f"{path}: missing tensor head{task}.{part}")
        heads.append(
            Head(
                task=task,
                labels=tuple(spec["labels"]),
                weight=tensors[f"head{task}.weight"],
                bias=tensors[f"head{task}.bias"],
            )
        )
    return ModelBundle(
        layers=layers,
        weights=tuple(weights),
        biases=tuple(biases),
        heads=tuple(heads),
        metadata=header.get("metadata", {}),
    )


def model_fingerprint(bundle: ModelBundle) -> str:
    """Stable content hash of a bundle (metadata excluded)."""
    digest = hashlib.sha256()
    for spec in bundle.layers:
        digest.update(f"{spec.kind}|{spec.in_dim}|{spec.out_dim}|{spec.activation};".encode())
    for w, b in zip(bundle.weights, bundle.biases):
        digest.update(np.ascontiguousarray(w).tobytes())
        digest.update(np.ascontiguousarray(b).tobytes())
    for h in bundle.heads:
        digest.update(f"{h.task}|{h.labels};".encode())
        digest.update(np.ascontiguousarray(h.weight).tobytes())
        digest.update(np.ascontiguousarray(h.bias).tobytes())
    return digest.hexdigest()
