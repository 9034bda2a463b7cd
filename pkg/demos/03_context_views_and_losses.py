"""Context-view generation and the contrastive loss family.

Shows the crop-pair ordering chain, the index bookkeeping that aligns the
two views' overlap, latent masking, and the temporal / instance-wise /
hierarchical losses with their closed-form degenerate values.

Run:  python demos/03_context_views_and_losses.py
"""

import numpy as np

from cleer.augment import apply_crop, apply_mask, sample_crop_pair, sample_mask
from cleer.losses import hcl_loss, icl_loss, tcl_loss
from cleer.tensor import DiffTensor

rng = np.random.default_rng(3)
T_len = 20

pair = sample_crop_pair(T_len, rng)
print(f"crop pair over T={T_len}: view1 [{pair.a1}, {pair.b1}],"
      f" view2 [{pair.a2}, {pair.b2}], overlap {pair.overlap}"
      f" (length {pair.overlap_length})")

segment = np.arange(T_len, dtype=float).reshape(T_len, 1)
v1 = apply_crop(segment, pair.view1)
v2 = apply_crop(segment, pair.view2)
off1, off2 = pair.overlap_offsets()
k = pair.overlap_length
print("overlap timestamps via view1:", v1[off1:off1 + k, 0].astype(int))
print("overlap timestamps via view2:", v2[off2:off2 + k, 0].astype(int))

mask = sample_mask(8, 0.5, rng)
z = DiffTensor(np.ones((1, 8, 2)))
masked = apply_mask(z, mask)
print("mask bits:", mask.bits, "-> latent kept at:",
      np.nonzero(masked.data[0, :, 0])[0])

# Degenerate closed forms: a single timestamp or a single instance
z1 = DiffTensor(rng.standard_normal((4, 1, 8)))
print("temporal loss at K=1 (always 0):",
      float(tcl_loss(z1, DiffTensor(rng.standard_normal((4, 1, 8)))).data))
zb = DiffTensor(np.zeros((3, 6, 8)))
print("instance loss on all-zero vectors, B=3 (= ln 5):",
      float(icl_loss(zb, zb).data), "vs", float(np.log(5)))

# Hierarchy: lengths halve (ceil) until 1
za = DiffTensor(rng.standard_normal((2, 11, 4)))
zc = DiffTensor(rng.standard_normal((2, 11, 4)))
loss, breakdown = hcl_loss(za, zc)
print("hierarchical loss:", float(loss.data))
for lv in breakdown.per_level:
    print(f"  level {lv.level}: length {lv.length:2d}  temporal {lv.tcl:.3f}"
          f"  instance {lv.icl:.3f}")
