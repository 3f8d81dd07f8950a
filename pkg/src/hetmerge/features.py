"""Activation capture: run a calibration batch through a model and keep the
post-activation representation at every layer boundary.

Feature matrices follow the neurons-by-samples orientation used everywhere
downstream (rows are neurons).
"""

from __future__ import annotations

import hashlib
from dataclasses import dataclass, field

import numpy as np

from . import container
from .data import Dataset
from .errors import ValidationError
from .linalg import as_matrix
from .model import ModelBundle, layer_outputs, model_fingerprint

DEFAULT_CALIBRATION_SIZE = 512


@dataclass(frozen=True)
class CalibrationBatch:
    inputs: np.ndarray
    labels: np.ndarray | None = None
    seed: int | None = None

    def __post_init__(self):
        object.__setattr__(self, "inputs", as_matrix(self.inputs, "inputs"))
        if self.inputs.shape[0] < 2:
            raise ValidationError("calibration batch needs at least 2 samples")

    @property
    def size(self) -> int:
        return self.inputs.shape[0]

    @property
    def fingerprint(self) -> str:
        digest = hashlib.sha256()
        digest.update(str(self.inputs.shape).encode())
        digest.update(np.ascontiguousarray(self.inputs).tobytes())
        return digest.hexdigest()


def sample_calibration(
    ds: Dataset, size: int = DEFAULT_CALIBRATION_SIZE, seed: int = 0
) -> CalibrationBatch:
    """Draw a fixed-seed calibration batch from a dataset (without replacement
    when it is large enough)."""
    rng = np.random.default_rng(seed)
    replace = len(ds) < size
    idx = rng.choice(len(ds), size=min(size, len(ds)) if not replace else size, replace=replace)
    return CalibrationBatch(inputs=ds.x[idx], labels=ds.y[idx], seed=seed)


@dataclass(frozen=True)
class FeatureCache:
    """One neurons-by-samples activation matrix per layer, in layer order."""

    entries: tuple[np.ndarray, ...]
    model_fingerprint: str
    batch_fingerprint: str
    input_dim: int = 0
    sample_count: int = field(default=0)

    def __post_init__(self):
        object.__setattr__(self, "entries", tuple(self.entries))
        if not self.entries:
            raise ValidationError("feature cache cannot be empty")
        m = self.entries[0].shape[1]
        for i, f in enumerate(self.entries):
            if f.ndim != 2 or f.shape[1] != m:
                raise ValidationError(f"cache entry {i} sample count differs")
        if self.sample_count == 0:
            object.__setattr__(self, "sample_count", m)

    def __len__(self) -> int:
        return len(self.entries)

    def __getitem__(self, i: int) -> np.ndarray:
        return self.entries[i]


def capture_features(bundle: ModelBundle, batch: CalibrationBatch) -> FeatureCache:
    """Post-activation features at every layer for the calibration batch."""
    outs = layer_outputs(bundle, batch.inputs)
    return FeatureCache(
        entries=tuple(np.ascontiguousarray(o.T) for o in outs),
        model_fingerprint=model_fingerprint(bundle),
        batch_fingerprint=batch.fingerprint,
        input_dim=bundle.input_dim,
    )


def save_feature_cache(cache: FeatureCache, path) -> None:
    tensors = {f"feat.layer{i}": f for i, f in enumerate(cache.entries)}
    container.write_container(
        path,
        tensors,
        metadata={
            "model_fingerprint": cache.model_fingerprint,
            "batch_fingerprint": cache.batch_fingerprint,
            "input_dim": cache.input_dim,
            "sample_count": cache.sample_count,
        },
    )


def load_feature_cache(path) -> FeatureCache:
    header, tensors = container.read_container(path)
    entries = []
    i = 0
    while f"feat.layer{i}" in tensors:
        entries.append(tensors[f"feat.layer{i}"])
        i += 1
    if not entries:
        raise ValidationError(f"{path}: no feat.layer{{i}} tensors found")
    md = header.get("metadata", {})
    return FeatureCache(
        entries=tuple(entries),
        model_fingerprint=md.get("model_fingerprint", ""),
        batch_fingerprint=md.get("batch_fingerprint", ""),
        input_dim=int(md.get("input_dim", 0)),
    )
