"""Elastic neuron zipping on two layers of different widths: correlate every
neuron pair across the concatenated set, then greedily fuse the most similar
pairs (within or across models) until r neurons remain.

Run:  python3 demos/02_elastic_zipping.py
"""

import numpy as np

from hetmerge import elastic_zip, neuron_correlation

rng = np.random.default_rng(0)

# a 6-neuron layer and a 4-neuron layer observed on 200 shared samples;
# three of B's neurons are noisy copies of A neurons, one is novel
samples = 200
base = rng.normal(size=(6, samples))
feat_a = base
feat_b = np.vstack([
    base[0] + 0.05 * rng.normal(size=samples),
    base[3] + 0.05 * rng.normal(size=samples),
    base[5] + 0.05 * rng.normal(size=samples),
    rng.normal(size=samples),
])

corr = neuron_correlation(feat_a, feat_b)
print("neuron correlations (A neurons 0-5, B neurons 6-9, diagonal masked):")
with np.printoptions(precision=2, suppress=True):
    print(np.where(np.isfinite(corr.values), corr.values, np.nan))

for r in (6, 5, 8):
    mapping = elastic_zip(feat_a, feat_b, r=r)
    print(f"\nzip to r = {r}:")
    for gi, group in enumerate(mapping.groups):
        names = [f"A{i}" if i < 6 else f"B{i-6}" for i in group]
        print(f"  shared neuron {gi}: {' + '.join(names)}")
    err = np.abs(mapping.merge @ mapping.unmerge - np.eye(mapping.r)).max()
    print(f"  merge @ unmerge deviates from identity by {err:.2e}")

print("\nwith r = 6, the three B copies fuse with their A sources and the")
print("novel B neuron survives as its own shared slot.")
