"""Backpropagation that stops at the first unfrozen block.

Run:  python demos/03_truncated_backprop.py

Frozen blocks form a prefix of the network, so the backward pass can simply
start at the loss and stop at block k: no gradient is computed below it.
"""
import numpy as np

from freezeout.autodiff import softmax_cross_entropy
from freezeout.layers import ModelSpec, build

net = build(ModelSpec("mlp-plain", [16], (2,), 3, depth=5), seed=0)
rng = np.random.default_rng(0)
x, y = rng.standard_normal((32, 2)), rng.integers(0, 3, 32)

# %% Full backward pass as reference.
_, g = softmax_cross_entropy(net.forward(x), y)
full = net.backward_from(g, 0)
print("blocks:", len(net), " forward MACs per example:", net.forward_flops())

# %% Truncate the same forward pass at every k: kept gradients are unchanged,
# nothing is computed for the blocks below k.
for k in range(len(net) + 1):
    before = net.counters["backward_macs"]
    _, g = softmax_cross_entropy(net.forward(x), y)
    grads = net.backward_from(g, k)
    same = all(np.array_equal(grads[i][n], full[i][n]) for i in range(k, len(net))
               for n in grads[i])
    print(f"k={k}: backward MACs {net.counters['backward_macs'] - before:5d}, "
          f"skipped blocks {[i for i, gr in enumerate(grads) if gr is None]}, "
          f"kept gradients identical: {same}")

# %% Frozen blocks also switch batch norm to its running statistics and leave them alone.
net.freeze_prefix(2)
bn = net.blocks[0].buffers
snap = {n: a.copy() for n, a in bn.items()}
net.forward(x * 10 + 3)
print("\nfrozen block 0 running stats untouched:",
      all(np.array_equal(snap[n], bn[n]) for n in bn))
