"""Depth alignment: segment the deeper model so its segment count matches the
shallower model's layer count.

Two dynamic programs share one table shape (shallow-depth x deep-depth):

* segment-wise (SMA): each shallow layer is credited with the similarity of
  the deep layer that ends its segment;
* layer-wise (LMA): deep layers skipped after i segments have closed are
  additionally credited against shallow layer i-1 (the recurrence's skip
  term), so runs of similar internal layers pull boundaries with them.

Backtracking pins the first segment end to 1 and the last to the deep depth,
so the reported score is the best value over all scan paths while the
reported segmentation always spans the full deep model.  An exhaustive
enumerator over the same path semantics serves as the correctness oracle.
"""

from __future__ import annotations

import itertools
from dataclasses import dataclass

import numpy as np

from .errors import ValidationError
from .linalg import as_matrix

SMA = "SMA"
LMA = "LMA"
ORACLE = "Oracle"

ENUMERATION_BOUND = 14


@dataclass(frozen=True)
class SegmentPlan:
    """Segment ends `g` (1-based deep-layer indices): segment i covers deep
    layers g[i-1]+1 .. g[i], with g[0] taken as 0."""

    g: tuple[int, ...]
    score: float
    method: str

    def __post_init__(self):
        g = tuple(int(v) for v in self.g)
        object.__setattr__(self, "g", g)
        if not g:
            raise ValidationError("segment plan cannot be empty")
        for i, v in enumerate(g):
            if v < i + 1:
                raise ValidationError(f"g[{i}] = {v} violates g[i] >= i+1")
            if i > 0 and v <= g[i - 1]:
                raise ValidationError("g must be strictly increasing")

    @property
    def n_segments(self) -> int:
        return len(self.g)

    @property
    def deep_depth(self) -> int:
        return self.g[-1]

    def segments(self) -> list[tuple[int, int]]:
        """Inclusive 1-based (start, end) per segment."""
        out, prev = [], 0
        for end in self.g:
            out.append((prev + 1, end))
            prev = end
        return out

    def to_json(self) -> dict:
        return {"method": self.method, "g": list(self.g), "score": self.score}


def _sim_values(c) -> np.ndarray:
    values = c.values if hasattr(c, "values") else c
    return as_matrix(values, "similarity matrix")


def _check_feasible(cvals: np.ndarray) -> tuple[int, int]:
    m, n = cvals.shape
    if n < 1:
        raise ValidationError("need at least one shallow layer")
    if m < n:
        raise ValidationError(
            f"infeasible: deep model has {m} layers but shallow has {n}; "
            "alignment needs at least as many deep layers as shallow ones"
        )
    return m, n


def _fill_table(cvals: np.ndarray, lma: bool) -> np.ndarray:
    """DP table with 1-based padding; t[i, j] is the best path value after
    consuming i shallow and j deep layers."""
    m, n = cvals.shape
    t = np.zeros((n + 1, m + 1))
    running = 0.0
    for i in range(1, n + 1):
        running = running + cvals[i - 1, i - 1]
        t[i, i] = running
    for i in range(1, n + 1):
        for j in range(i + 1, m + 1):
            skip = t[i, j - 1]
            if lma and i >= 2:
                skip = skip + cvals[j - 1, i - 2]
            t[i, j] = max(skip, t[i - 1, j - 1] + cvals[j - 1, i - 1])
    return t


def _backtrack(t: np.ndarray, cvals: np.ndarray, lma: bool) -> tuple[int, ...]:
    n, m = t.shape[0] - 1, t.shape[1] - 1
    g = [0] * n
    g[0] = 1
    g[n - 1] = m
    i, j = n - 1, m - 1
    while i >= 2:
        while j >= i + 1:
            skip = t[i, j - 1]
            if lma:
                skip = skip + cvals[j - 1, i - 2]
            if t[i, j] != skip:
                break
            j -= 1
        g[i - 1] = j
        i -= 1
        j -= 1
    return tuple(g)


def dp_table(c, method: str = SMA) -> np.ndarray:
    """The filled table, shallow-depth x deep-depth (row i, col j 0-based
    correspond to i+1 shallow / j+1 deep layers consumed)."""
    cvals = _sim_values(c)
    _check_feasible(cvals)
    return _fill_table(cvals, lma=(method == LMA))[1:, 1:]


def _align(c, lma: bool, method: str) -> SegmentPlan:
    cvals = _sim_values(c)
    m, n = _check_feasible(cvals)
    t = _fill_table(cvals, lma)
    return SegmentPlan(g=_backtrack(t, cvals, lma), score=float(t[n, m]), method=method)


def sma_align(c) -> SegmentPlan:
    """Segment-wise alignment: maximize similarity at segment-ending layers."""
    return _align(c, lma=False, method=SMA)


def lma_align(c) -> SegmentPlan:
    """Layer-wise alignment: additionally credit layers scanned inside open
    segments against the previous shallow layer."""
    return _align(c, lma=True, method=LMA)


def _path_score(cvals: np.ndarray, ends: tuple[int, ...], lma: bool) -> float:
    """Score of the scan path whose segment ends are `ends`, accumulated in
    deep-layer order exactly as the DP does."""
    n = len(ends)
    score = 0.0
    level = 0
    for j in range(1, cvals.shape[0] + 1):
        if level < n and j == ends[level]:
            level += 1
            score = score + cvals[j - 1, level - 1]
        elif lma and level >= 2:
            score = score + cvals[j - 1, level - 2]
    return score


def _pin(ends: tuple[int, ...], m: int) -> tuple[int, ...]:
    if len(ends) == 1:
        return (m,)
    return (1,) + ends[1:-1] + (m,)


def brute_force_align(c, method: str = SMA) -> SegmentPlan:
    """Exhaustive oracle: enumerate every monotone scan path, score it with
    the recurrence's path semantics, return the maximum.

    The reported segmentation pins the first and last ends exactly like the
    DP's backtracking; ties prefer the lexicographically smallest plan.
    """
    if method not in (SMA, LMA):
        raise ValidationError(f"unknown method {method!r}")
    cvals = _sim_values(c)
    m, n = _check_feasible(cvals)
    if m > ENUMERATION_BOUND:
        raise ValidationError(
            f"deep depth {m} exceeds the enumeration bound {ENUMERATION_BOUND}"
        )
    lma = method == LMA
    best_score = -np.inf
    best_plan: tuple[int, ...] | None = None
    for ends in itertools.combinations(range(1, m + 1), n):
        s = _path_score(cvals, ends, lma)
        if s > best_score:
            best_score, best_plan = s, _pin(ends, m)
        elif s == best_score:
            pinned = _pin(ends, m)
            if pinned < best_plan:
                best_plan = pinned
    return SegmentPlan(g=best_plan, score=float(best_score), method=ORACLE)


def best_alignment_path(c, method: str = SMA) -> tuple[tuple[int, ...], float]:
    """Raw argmax scan path (before end-pinning), for diagnostics: the
    lexicographically smallest maximizer and its score."""
    if method not in (SMA, LMA):
        raise ValidationError(f"unknown method {method!r}")
    cvals = _sim_values(c)
    m, n = _check_feasible(cvals)
    if m > ENUMERATION_BOUND:
        raise ValidationError(
            f"deep depth {m} exceeds the enumeration bound {ENUMERATION_BOUND}"
        )
    lma = method == LMA
    best: tuple[int, ...] | None = None
    best_score = -np.inf
    for ends in itertools.combinations(range(1, m + 1), n):
        s = _path_score(cvals, ends, lma)
        if s > best_score:
            best_score, best = s, ends
    return best, float(best_score)
