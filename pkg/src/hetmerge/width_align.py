"""Width alignment: project both models' neurons into one shared space.

A MergeMap generalizes the permutation matrices of equal-width alignment to
possibly non-square merge/unmerge transforms built from neuron groups.  The
merge matrix averages each group's members; the unmerge matrix hands the
merged value back to every member, so merge @ unmerge is the identity by
construction (the entries are exact rationals).
"""

from __future__ import annotations

import warnings
from dataclasses import dataclass

import numpy as np
from scipy.optimize import linear_sum_assignment

from .errors import ValidationError
from .features import FeatureCache
from .linalg import as_matrix, pseudo_inverse
from .similarity import _row_correlations, neuron_correlation

PERMUTE = "permute"
ZIP = "zip"

DEFAULT_SCALES = (0.5, 0.5)


@dataclass(frozen=True)
class MergeMap:
    """Shared-space projection for one layer boundary.

    `groups` records which concatenated neuron indices (A first, then B
    offset by n_a) were fused into each shared neuron.
    """

    merge: np.ndarray
    unmerge: np.ndarray
    groups: tuple[tuple[int, ...], ...]
    n_a: int
    n_b: int
    scale_a: float = 0.5
    scale_b: float = 0.5

    @property
    def r(self) -> int:
        return self.merge.shape[0]

    def to_json(self) -> dict:
        return {
            "r": self.r,
            "n_a": self.n_a,
            "n_b": self.n_b,
            "scale_a": self.scale_a,
            "scale_b": self.scale_b,
            "groups": [list(g) for g in self.groups],
        }


def merge_map_from_groups(
    groups,
    n_a: int,
    n_b: int,
    scale_a: float = 0.5,
    scale_b: float = 0.5,
    unmerge_mode: str = "membership",
) -> MergeMap:
    """Build the merge/unmerge pair for a partition of the concatenated
    neuron set.

    With the default half/half scales every merge row is 1/|group| at its
    members.  Non-default scales reweight mixed groups per model
    (scale/model member count); single-model groups stay uniform.  The
    unmerge is the 0/1 membership matrix, or the Moore-Penrose inverse of the
    merge when unmerge_mode="pinv".
    """
    total = n_a + n_b
    groups = tuple(tuple(sorted(int(i) for i in g)) for g in groups)
    seen = [False] * total
    for g in groups:
        if not g:
            raise ValidationError("empty neuron group")
        for idx in g:
            if idx < 0 or idx >= total:
                raise ValidationError(f"neuron index {idx} out of range 0..{total-1}")
            if seen[idx]:
                raise ValidationError(f"neuron index {idx} appears in two groups")
            seen[idx] = True
    if not all(seen):
        raise ValidationError("groups must cover every neuron exactly once")

    default_scales = (scale_a, scale_b) == DEFAULT_SCALES
    if not default_scales and abs(scale_a + scale_b - 1.0) > 1e-9:
        raise ValidationError(f"scales must sum to 1, got {scale_a} + {scale_b}")

    r = len(groups)
    merge = np.zeros((r, total))
    unmerge = np.zeros((total, r))
    for gi, members in enumerate(groups):
        a_members = [c for c in members if c < n_a]
        b_members = [c for c in members if c >= n_a]
        if default_scales or not a_members or not b_members:
            for c in members:
                merge[gi, c] = 1.0 / len(members)
        else:
            for c in a_members:
                merge[gi, c] = scale_a / len(a_members)
            for c in b_members:
                merge[gi, c] = scale_b / len(b_members)
        unmerge[list(members), gi] = 1.0
    if unmerge_mode == "pinv":
        unmerge = pseudo_inverse(merge)
    elif unmerge_mode != "membership":
        raise ValidationError(f"unknown unmerge_mode {unmerge_mode!r}")
    return MergeMap(
        merge=merge,
        unmerge=unmerge,
        groups=groups,
        n_a=n_a,
        n_b=n_b,
        scale_a=scale_a,
        scale_b=scale_b,
    )


def identity_pair_map(n: int, scale_a: float = 0.5, scale_b: float = 0.5) -> MergeMap:
    """Pair neuron i of A with neuron i of B; used for the input boundary
    where both models read the same raw coordinates."""
    return merge_map_from_groups(
        [(i, n + i) for i in range(n)], n, n, scale_a=scale_a, scale_b=scale_b
    )


def _centered_cosine(feat_a: np.ndarray, feat_b: np.ndarray) -> np.ndarray:
    """Cosine similarity between centered activation rows; dead neurons get 0."""
    ac = feat_a - feat_a.mean(axis=1, keepdims=True)
    bc = feat_b - feat_b.mean(axis=1, keepdims=True)
    na = np.linalg.norm(ac, axis=1)
    nb = np.linalg.norm(bc, axis=1)
    na_safe = np.where(na == 0.0, 1.0, na)
    nb_safe = np.where(nb == 0.0, 1.0, nb)
    sim = (ac / na_safe[:, None]) @ (bc / nb_safe[:, None]).T
    sim[na == 0.0, :] = 0.0
    sim[:, nb == 0.0] = 0.0
    return sim


def permutation_match(
    feat_a, feat_b, scale_a: float = 0.5, scale_b: float = 0.5
) -> MergeMap:
    """One-to-one matching of equal-width layers by maximum-weight assignment
    on centered cosine similarity; equivalent to permuting B onto A and
    averaging."""
    feat_a = as_matrix(feat_a, "feat_a")
    feat_b = as_matrix(feat_b, "feat_b")
    n = feat_a.shape[0]
    if n == 0:
        raise ValidationError("cannot match zero neurons")
    if feat_b.shape[0] != n:
        raise ValidationError(
            f"widths differ ({n} vs {feat_b.shape[0]}); use elastic_zip for "
            "width-heterogeneous layers"
        )
    if feat_a.shape[1] != feat_b.shape[1]:
        raise ValidationError("sample counts differ")
    sim = _centered_cosine(feat_a, feat_b)
    rows, cols = linear_sum_assignment(sim, maximize=True)
    pairing = dict(zip(rows.tolist(), cols.tolist()))
    groups = [(i, n + pairing[i]) for i in range(n)]
    return merge_map_from_groups(groups, n, n, scale_a=scale_a, scale_b=scale_b)


def matched_similarity(feat_a, feat_b, mapping: MergeMap) -> float:
    """Sum of centered cosine similarities over a map's matched pairs."""
    sim = _centered_cosine(as_matrix(feat_a), as_matrix(feat_b))
    total = 0.0
    for g in mapping.groups:
        a = [c for c in g if c < mapping.n_a]
        b = [c - mapping.n_a for c in g if c >= mapping.n_a]
        if len(a) == 1 and len(b) == 1:
            total += sim[a[0], b[0]]
    return total


def _masked_upper(corr: np.ndarray) -> np.ndarray:
    out = corr.copy()
    out[np.tril_indices_from(out)] = -np.inf
    return out


def elastic_zip(
    feat_a,
    feat_b,
    r: int,
    scale_a: float = 0.5,
    scale_b: float = 0.5,
    recompute: bool = True,
) -> MergeMap:
    """Greedy agglomeration of the most-correlated neuron pairs (within or
    across models) until `r` groups remain.

    After each fusion the group's feature is the unweighted mean of its
    original members and, with recompute=True (default), its correlations
    against the remaining groups are recomputed; recompute=False keeps the
    original neuron-level correlations and scores group pairs by average
    linkage.  Ties break on the smallest (group, group) index pair.
    """
    feat_a = as_matrix(feat_a, "feat_a")
    feat_b = as_matrix(feat_b, "feat_b")
    n_a, n_b = feat_a.shape[0], feat_b.shape[0]
    total = n_a + n_b
    if feat_a.shape[1] != feat_b.shape[1]:
        raise ValidationError("sample counts differ")
    if not 1 <= r <= total:
        raise ValidationError(f"r must be in 1..{total}, got {r}")

    stacked = np.concatenate([feat_a, feat_b], axis=0)
    base_corr = neuron_correlation(feat_a, feat_b).values
    finite = base_corr[np.isfinite(base_corr)]
    if finite.size and np.all(finite == 0.0):
        warnings.warn(
            "all neuron correlations are zero (constant features); "
            "zipping proceeds on index order",
            RuntimeWarning,
        )

    groups: list[tuple[int, ...]] = [(i,) for i in range(total)]
    if recompute:
        feats = stacked.copy()
        scores = _masked_upper(base_corr)
    else:
        linkage = base_corr.copy()
        np.fill_diagonal(linkage, 0.0)
        scores = _masked_upper(linkage)

    while len(groups) > r:
        flat = int(np.argmax(scores))
        gi, gj = divmod(flat, scores.shape[1])
        size_i, size_j = len(groups[gi]), len(groups[gj])
        merged = tuple(sorted(groups[gi] + groups[gj]))
        groups[gi] = merged
        groups.pop(gj)
        if recompute:
            feats[gi] = stacked[list(merged)].mean(axis=0)
            feats = np.delete(feats, gj, axis=0)
            scores = _masked_upper(_row_correlations(feats))
        else:
            row = (size_i * linkage[gi] + size_j * linkage[gj]) / (size_i + size_j)
            linkage[gi, :] = row
            linkage[:, gi] = row
            linkage = np.delete(np.delete(linkage, gj, axis=0), gj, axis=1)
            np.fill_diagonal(linkage, 0.0)
            scores = _masked_upper(linkage)
    groups.sort(key=lambda g: g[0])
    return merge_map_from_groups(
        groups, n_a, n_b, scale_a=scale_a, scale_b=scale_b
    )


@dataclass(frozen=True)
class AlignmentPlan:
    """Per-boundary MergeMaps: index 0 is the fixed input boundary (both
    models read the raw input), index i > 0 the output boundary of layer i."""

    boundaries: tuple[MergeMap, ...]
    strategy: str = PERMUTE
    model_a: str = ""
    model_b: str = ""
    batch_fingerprint: str = ""

    def __post_init__(self):
        object.__setattr__(self, "boundaries", tuple(self.boundaries))
        if len(self.boundaries) < 2:
            raise ValidationError("plan needs the input boundary plus one layer boundary")

    @property
    def depth(self) -> int:
        return len(self.boundaries) - 1

    def to_json(self) -> dict:
        return {
            "strategy": self.strategy,
            "model_a": self.model_a,
            "model_b": self.model_b,
            "batch_fingerprint": self.batch_fingerprint,
            "boundaries": [b.to_json() for b in self.boundaries],
        }


def build_alignment_plan(
    cache_a: FeatureCache,
    cache_b: FeatureCache,
    strategy: str,
    input_dim: int,
    r=None,
    segment_plan=None,
    scale_a: float = 0.5,
    scale_b: float = 0.5,
    zip_recompute: bool = True,
) -> AlignmentPlan:
    """One MergeMap per layer boundary from equal-depth feature caches.

    For depth-heterogeneous pairs, `cache_b` must come from the extended
    shallow model (its features repeat at inserted positions, so every layer
    of a deep segment aligns against the same shallow feature matrix).
    `r` is an int or per-boundary sequence; default max(width_a, width_b).
    """
    if len(cache_a) != len(cache_b):
        raise ValidationError(
            f"caches have different depths ({len(cache_a)} vs {len(cache_b)}); "
            "extend the shallow model first"
        )
    if cache_a.batch_fingerprint != cache_b.batch_fingerprint:
        raise ValidationError("feature caches come from different calibration batches")
    if segment_plan is not None and segment_plan.deep_depth != len(cache_a):
        raise ValidationError(
            f"segment plan spans {segment_plan.deep_depth} layers, caches have {len(cache_a)}"
        )
    if strategy not in (PERMUTE, ZIP):
        raise ValidationError(f"unknown strategy {strategy!r}")

    depth = len(cache_a)
    if r is None or isinstance(r, int):
        r_per = [r] * depth
    else:
        r_per = list(r)
        if len(r_per) != depth:
            raise ValidationError(f"need {depth} per-boundary r values, got {len(r_per)}")

    boundaries = [identity_pair_map(input_dim, scale_a=scale_a, scale_b=scale_b)]
    for i in range(depth):
        fa, fb = cache_a[i], cache_b[i]
        if strategy == PERMUTE:
            boundaries.append(permutation_match(fa, fb, scale_a=scale_a, scale_b=scale_b))
        else:
            ri = r_per[i] if r_per[i] is not None else max(fa.shape[0], fb.shape[0])
            boundaries.append(
                elastic_zip(
                    fa, fb, ri, scale_a=scale_a, scale_b=scale_b, recompute=zip_recompute
                )
            )
    return AlignmentPlan(
        boundaries=tuple(boundaries),
        strategy=strategy,
        model_a=cache_a.model_fingerprint,
        model_b=cache_b.model_fingerprint,
        batch_fingerprint=cache_a.batch_fingerprint,
    )
