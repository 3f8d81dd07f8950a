"""End-to-end heterogeneous merge: a 6-layer width-64 task-A model and a
3-layer width-32 task-B model fused into one two-headed model, evaluated on
the joint test set.

The same pipeline is available from the command line:

  hetmerge merge --a deep.hmm1 --b shallow.hmm1 --calib joint_train.hmm1 \
      --depth-method lma --strategy zip --r 64 --out merged.hmm1

Run:  python3 demos/03_hetero_merge_pipeline.py
"""

from hetmerge import (
    MergeRecipe,
    TaskSpec,
    build_alignment_plan,
    capture_features,
    evaluate,
    extend_model,
    extension_plan_from_segments,
    gen_tasks,
    layer_similarity_matrix,
    lma_align,
    merge_depth_hetero,
    mlp_arch,
    sample_calibration,
    train_mlp,
)
from hetmerge.model import IDENTITY_DENSE

spec = TaskSpec()
tasks = gen_tasks(spec, seed=0)

print("training single-task models ...")
deep = train_mlp(mlp_arch(6, 64), tasks.task_a_train, task="a", seed=1, epochs=20)
shallow = train_mlp(mlp_arch(3, 32), tasks.task_b_train, task="b", seed=2, epochs=20)

batch = sample_calibration(tasks.joint_train, size=512, seed=0)
cache_deep = capture_features(deep, batch)

print("aligning depths (layer-wise DP) ...")
segments = lma_align(layer_similarity_matrix(cache_deep, capture_features(shallow, batch)))
print(f"  segment ends: {list(segments.g)}")

print("extending the shallow model with identity layers and zipping widths (r = 64) ...")
extended = extend_model(shallow, extension_plan_from_segments(segments, IDENTITY_DENSE))
alignment = build_alignment_plan(
    cache_deep,
    capture_features(extended, batch),
    strategy="zip",
    input_dim=spec.input_dim,
    r=64,
    segment_plan=segments,
)
recipe = MergeRecipe(
    alignment=alignment,
    depth_plan=segments,
    width_strategy="zip",
    depth_method="lma",
)
merged = merge_depth_hetero(deep, shallow, recipe)
print(f"  merged model: depth {merged.depth}, widths {[s.out_dim for s in merged.layers]}, "
      f"heads {[h.task for h in merged.heads]}")

joint = tasks.joint_test
report = evaluate(merged, joint)
# a single-task model is always wrong on the other task's samples
single_a = evaluate(deep, tasks.task_a_test).per_task_acc["a"] * len(tasks.task_a_test) / len(joint)
single_b = evaluate(shallow, tasks.task_b_test).per_task_acc["b"] * len(tasks.task_b_test) / len(joint)

print("\njoint-test accuracy:")
print(f"  task-A model alone : {single_a:.3f}")
print(f"  task-B model alone : {single_b:.3f}")
print(f"  merged model       : {report.joint_acc:.3f}  "
      f"(per task: {', '.join(f'{t}={v:.3f}' for t, v in report.per_task_acc.items())})")
print("\n" + report.render_table())
