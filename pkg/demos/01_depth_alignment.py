"""Depth alignment walkthrough: train a 6-layer and a 3-layer MLP on the same
inputs, compare their layer representations with linear CKA, and segment the
deeper model with both dynamic programs.

Run:  python3 demos/01_depth_alignment.py
"""

import numpy as np

from hetmerge import (
    TaskSpec,
    brute_force_align,
    capture_features,
    gen_tasks,
    layer_similarity_matrix,
    lma_align,
    mlp_arch,
    sample_calibration,
    sma_align,
    train_mlp,
)
from hetmerge.depth_align import dp_table

spec = TaskSpec()
tasks = gen_tasks(spec, seed=0)

print("training a deep (6x64) and a shallow (3x32) model on task A / task B ...")
deep = train_mlp(mlp_arch(6, 64), tasks.task_a_train, task="a", seed=1, epochs=20)
shallow = train_mlp(mlp_arch(3, 32), tasks.task_b_train, task="b", seed=2, epochs=20)

batch = sample_calibration(tasks.joint_train, size=512, seed=0)
cache_deep = capture_features(deep, batch)
cache_shallow = capture_features(shallow, batch)

sim = layer_similarity_matrix(cache_deep, cache_shallow)
print("\nlayer similarity (rows = deep layers, cols = shallow layers):")
print(np.round(sim.values, 3))

for name, align in (("segment-wise", sma_align), ("layer-wise", lma_align)):
    plan = align(sim)
    print(f"\n{name} ({plan.method}):")
    print(f"  segment ends g = {list(plan.g)}  (deep layers per shallow layer)")
    print(f"  segments      = {plan.segments()}")
    print(f"  score         = {plan.score:.4f}")
    oracle = brute_force_align(sim, method=plan.method)
    print(f"  exhaustive oracle agrees: score {oracle.score:.4f}, g = {list(oracle.g)}")

print("\nSMA scan table (row i, col j = best value using i+1 shallow, j+1 deep layers):")
print(np.round(dp_table(sim, "SMA"), 3))
