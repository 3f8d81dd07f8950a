"""Weight assembly: vanilla averaging, aligned averaging through merge maps,
and the depth-heterogeneous merges built on the identity / zero-residual
extensions.

Per merged layer i, W*_i = merge_i @ blockdiag(W_i^A, W_i^B) @ unmerge_{i-1};
biases ride through the output-side merge only (they are fed by a constant
input shared by both models).  Each task's head is composed with its own
model's slice of the final unmerge, so heads are never fused across tasks.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .depth_align import SegmentPlan
from .errors import ValidationError
from .linalg import block_diag
from .model import (
    IDENTITY_DENSE,
    RESIDUAL,
    ZERO_RESIDUAL,
    ExtensionPlan,
    Head,
    LayerSpec,
    ModelBundle,
    extend_model,
    extension_plan_from_segments,
    model_fingerprint,
)
from .width_align import AlignmentPlan, MergeMap, identity_pair_map


@dataclass(frozen=True)
class MergeRecipe:
    """Everything needed to reproduce a merge: the depth plan, the width
    alignment, the extension mode, and the mixing scales."""

    alignment: AlignmentPlan
    depth_plan: SegmentPlan | None = None
    extension_mode: str = IDENTITY_DENSE
    scales: tuple[float, float] = (0.5, 0.5)
    width_strategy: str = "permute"
    depth_method: str = "homo"

    def to_metadata(self) -> dict:
        return {
            "width_strategy": self.width_strategy,
            "depth_method": self.depth_method,
            "extension_mode": self.extension_mode,
            "scales": list(self.scales),
            "depth_plan": None if self.depth_plan is None else self.depth_plan.to_json(),
            "alignment": self.alignment.to_json(),
        }


def _check_same_architecture(a: ModelBundle, b: ModelBundle) -> None:
    if a.layers != b.layers:
        raise ValidationError("architectures differ; aligned merging is required")


def _merge_heads(
    heads_a, heads_b, eff_a, eff_b, scale_a: float, scale_b: float
) -> tuple[Head, ...]:
    """Combine per-task heads; a task present on both sides is averaged with
    the mixing scales, others are carried over unchanged."""
    merged = []
    tasks_b = {h.task: h for h in heads_b}
    for ha in heads_a:
        wa, ba = eff_a(ha)
        if ha.task in tasks_b:
            hb = tasks_b.pop(ha.task)
            if hb.labels != ha.labels:
                raise ValidationError(
                    f"head {ha.task!r} has different label sets in the two models"
                )
            wb, bb = eff_b(hb)
            merged.append(
                Head(
                    task=ha.task,
                    labels=ha.labels,
                    weight=scale_a * wa + scale_b * wb,
                    bias=scale_a * ba + scale_b * bb,
                )
            )
        else:
            merged.append(Head(task=ha.task, labels=ha.labels, weight=wa, bias=ba))
    for hb in tasks_b.values():
        wb, bb = eff_b(hb)
        merged.append(Head(task=hb.task, labels=hb.labels, weight=wb, bias=bb))
    return tuple(merged)


def average_weights(a: ModelBundle, b: ModelBundle) -> ModelBundle:
    """Entrywise half/half average of two architecture-identical models."""
    _check_same_architecture(a, b)
    weights = tuple(0.5 * wa + 0.5 * wb for wa, wb in zip(a.weights, b.weights))
    biases = tuple(0.5 * ba + 0.5 * bb for ba, bb in zip(a.biases, b.biases))
    identity = lambda h: (h.weight, h.bias)
    heads = _merge_heads(a.heads, b.heads, identity, identity, 0.5, 0.5)
    return ModelBundle(
        layers=a.layers,
        weights=weights,
        biases=biases,
        heads=heads,
        metadata={"merged": "average_weights"},
    )


def identity_alignment_plan(
    a: ModelBundle, b: ModelBundle, scale_a: float = 0.5, scale_b: float = 0.5
) -> AlignmentPlan:
    """Pair neuron i of A with neuron i of B at every boundary; aligned
    averaging through this plan is vanilla weight averaging."""
    if a.depth != b.depth:
        raise ValidationError("identity alignment needs equal depths")
    if a.input_dim != b.input_dim:
        raise ValidationError("identity alignment needs equal input dims")
    boundaries = [identity_pair_map(a.input_dim, scale_a=scale_a, scale_b=scale_b)]
    for sa, sb in zip(a.layers, b.layers):
        if sa.out_dim != sb.out_dim:
            raise ValidationError(
                f"identity alignment needs equal widths, got {sa.out_dim} vs {sb.out_dim}"
            )
        boundaries.append(identity_pair_map(sa.out_dim, scale_a=scale_a, scale_b=scale_b))
    return AlignmentPlan(
        boundaries=tuple(boundaries),
        strategy="identity",
        model_a=model_fingerprint(a),
        model_b=model_fingerprint(b),
    )


def _validate_plan_fingerprints(a: ModelBundle, b: ModelBundle, plan: AlignmentPlan):
    if plan.model_a and plan.model_a != model_fingerprint(a):
        raise ValidationError("alignment plan was built for a different model A")
    if plan.model_b and plan.model_b != model_fingerprint(b):
        raise ValidationError("alignment plan was built for a different model B")


def aligned_average(a: ModelBundle, b: ModelBundle, plan: AlignmentPlan) -> ModelBundle:
    """Merge equal-depth models through per-boundary merge/unmerge maps."""
    if a.depth != b.depth:
        raise ValidationError(
            f"depths differ ({a.depth} vs {b.depth}); extend the shallow model first"
        )
    if plan.depth != a.depth:
        raise ValidationError(
            f"plan covers {plan.depth} boundaries but models have {a.depth} layers"
        )
    if a.input_dim != b.input_dim:
        raise ValidationError("models read different input dimensions")
    _validate_plan_fingerprints(a, b, plan)

    maps = plan.boundaries
    if maps[0].n_a != a.input_dim or maps[0].n_b != b.input_dim:
        raise ValidationError("input boundary map does not match the input dimension")

    layers, weights, biases = [], [], []
    for i, (sa, sb) in enumerate(zip(a.layers, b.layers)):
        if sa.kind != sb.kind:
            raise ValidationError(
                f"layer {i}: kind mismatch ({sa.kind} vs {sb.kind})"
            )
        mo, mi = maps[i + 1], maps[i]
        if mo.n_a != sa.out_dim or mo.n_b != sb.out_dim:
            raise ValidationError(
                f"boundary {i+1} map sized for ({mo.n_a},{mo.n_b}) but layers emit "
                f"({sa.out_dim},{sb.out_dim})"
            )
        if sa.kind == RESIDUAL and mo.r != mi.r:
            raise ValidationError(
                f"residual layer {i} needs equal shared widths, got {mi.r} -> {mo.r}"
            )
        w = mo.merge @ block_diag(a.weights[i], b.weights[i]) @ mi.unmerge
        bias = mo.merge @ np.concatenate([a.biases[i], b.biases[i]])
        layers.append(LayerSpec(sa.kind, mi.r, mo.r, sa.activation))
        weights.append(w)
        biases.append(bias)

    last = maps[-1]
    slice_a = last.unmerge[: last.n_a, :]
    slice_b = last.unmerge[last.n_a :, :]
    eff_a = lambda h: (h.weight @ slice_a, h.bias)
    eff_b = lambda h: (h.weight @ slice_b, h.bias)
    heads = _merge_heads(a.heads, b.heads, eff_a, eff_b, last.scale_a, last.scale_b)
    return ModelBundle(
        layers=tuple(layers),
        weights=tuple(weights),
        biases=tuple(biases),
        heads=heads,
        metadata={"merged": "aligned_average", "strategy": plan.strategy},
    )


def merge_depth_hetero(a: ModelBundle, b: ModelBundle, recipe: MergeRecipe) -> ModelBundle:
    """Merge a deeper model A with a shallower B: extend B with identity
    layers per the depth plan, then aligned-average.  Segment-leading layers
    combine both weight matrices; layers inside a segment combine A's weight
    with B's identity chain."""
    if recipe.extension_mode != IDENTITY_DENSE:
        raise ValidationError("dense depth-heterogeneous merging uses IdentityDense extension")
    return _merge_extended(a, b, recipe)


def merge_depth_hetero_residual(
    a: ModelBundle, b: ModelBundle, recipe: MergeRecipe
) -> ModelBundle:
    """Residual variant: B is extended with zero-weight residual blocks, whose
    contribution to layers inside a segment vanishes exactly."""
    if recipe.extension_mode != ZERO_RESIDUAL:
        raise ValidationError("residual depth-heterogeneous merging uses ZeroResidual extension")
    if recipe.depth_plan is not None:
        for (start, end) in recipe.depth_plan.segments():
            if end - start == 0:
                continue
            for li in range(start - 1, end):
                if a.layers[li].kind != RESIDUAL:
                    raise ValidationError(
                        f"layer {li} of the deep model is {a.layers[li].kind}, "
                        "but a multi-layer residual segment covers it"
                    )
    return _merge_extended(a, b, recipe)


def _merge_extended(a: ModelBundle, b: ModelBundle, recipe: MergeRecipe) -> ModelBundle:
    if a.depth < b.depth:
        raise ValidationError(
            f"model A must be at least as deep as B ({a.depth} < {b.depth})"
        )
    if recipe.depth_plan is None:
        if a.depth != b.depth:
            raise ValidationError("a depth plan is required when depths differ")
        eplan = ExtensionPlan(mode=recipe.extension_mode, counts=(0,) * b.depth)
    else:
        if recipe.depth_plan.n_segments != b.depth:
            raise ValidationError(
                f"depth plan has {recipe.depth_plan.n_segments} segments, "
                f"model B has {b.depth} layers"
            )
        if recipe.depth_plan.deep_depth != a.depth:
            raise ValidationError(
                f"depth plan spans {recipe.depth_plan.deep_depth} layers, "
                f"model A has {a.depth}"
            )
        eplan = extension_plan_from_segments(recipe.depth_plan, recipe.extension_mode)
    b_ext = extend_model(b, eplan)
    merged = aligned_average(a, b_ext, recipe.alignment)
    return merged.with_metadata(**recipe.to_metadata())


def permute_to_reference(b: ModelBundle, plan: AlignmentPlan) -> ModelBundle:
    """Re-express B in A's neuron basis using a permutation-pair plan; the
    result computes the same function with relabeled neurons."""
    if plan.depth != b.depth:
        raise ValidationError("plan depth does not match the model")

    def pair_perm(m: MergeMap) -> np.ndarray:
        if m.r != m.n_a or m.n_a != m.n_b:
            raise ValidationError("rebasing needs one-to-one pair maps")
        sigma = np.full(m.r, -1, dtype=np.int64)
        for g in m.groups:
            a_side = [c for c in g if c < m.n_a]
            b_side = [c - m.n_a for c in g if c >= m.n_a]
            if len(a_side) != 1 or len(b_side) != 1:
                raise ValidationError("rebasing needs one-to-one pair maps")
            sigma[a_side[0]] = b_side[0]
        return sigma

    perms = [np.arange(b.input_dim)] + [pair_perm(m) for m in plan.boundaries[1:]]
    weights, biases = [], []
    for i in range(b.depth):
        weights.append(b.weights[i][perms[i + 1]][:, perms[i]])
        biases.append(b.biases[i][perms[i + 1]])
    heads = tuple(
        Head(task=h.task, labels=h.labels, weight=h.weight[:, perms[-1]], bias=h.bias)
        for h in b.heads
    )
    return ModelBundle(
        layers=b.layers,
        weights=tuple(weights),
        biases=tuple(biases),
        heads=heads,
        metadata=dict(b.metadata, rebased=True),
    )
