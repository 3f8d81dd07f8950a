"""Labeled datasets and their container persistence."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from . import container
from .errors import ValidationError
from .linalg import as_matrix


@dataclass(frozen=True)
class Dataset:
    """Rows of inputs with integer global labels."""

    x: np.ndarray
    y: np.ndarray

    def __post_init__(self):
        object.__setattr__(self, "x", as_matrix(self.x, "x"))
        y = np.ascontiguousarray(self.y, dtype=np.int64)
        if y.ndim != 1 or y.shape[0] != self.x.shape[0]:
            raise ValidationError("y must be 1-D with one label per row of x")
        object.__setattr__(self, "y", y)

    def __len__(self) -> int:
        return self.x.shape[0]

    @property
    def labels(self) -> tuple[int, ...]:
        return tuple(int(v) for v in np.unique(self.y))


def save_dataset(ds: Dataset, path, metadata: dict | None = None) -> None:
    container.write_container(path, {"x": ds.x, "y": ds.y}, metadata=metadata or {})


def load_dataset(path) -> Dataset:
    header, tensors = container.read_container(path)
    for name in ("x", "y"):
        if name not in tensors:
            raise ValidationError(f"{path}: dataset container missing tensor {name!r}")
    # labels ride as f32 in the container; small ints survive the trip exactly
    return Dataset(x=tensors["x"], y=tensors["y"].astype(np.int64))


def concat_datasets(*parts: Dataset) -> Dataset:
    return Dataset(
        x=np.concatenate([p.x for p in parts], axis=0),
        y=np.concatenate([p.y for p in parts], axis=0),
    )
