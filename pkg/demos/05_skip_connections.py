"""Plain, residual and dense networks under the same schedule.

Run:  python demos/05_skip_connections.py

FreezeOut freezes whole blocks; a residual block keeps its identity shortcut
and a dense block keeps reading every earlier output, frozen or not.
"""
from freezeout.layers import ModelSpec, build
from freezeout.training import TrainConfig, train

# %% Parameter counts and per-block MACs for the three MLP families.
for arch in ("mlp-plain", "mlp-residual", "mlp-dense"):
    net = build(ModelSpec(arch, [16], (2,), 2, depth=5), seed=0)
    n_params = sum(a.size for *_, a in net.parameters())
    print(f"{arch:>13}: {len(net)} blocks, {n_params:5d} parameters, MACs {net.forward_flops()}")

# %% Train each with and without freezing.
print()
for arch in ("mlp-plain", "mlp-residual", "mlp-dense", "cnn-plain", "cnn-residual"):
    for enabled in (False, True):
        cfg = TrainConfig()
        cfg.model.architecture = arch
        cfg.model.depth = 5
        cfg.model.widths = [16] if arch.startswith("mlp") else [8]
        cfg.train.n_itr = 400
        if arch.startswith("cnn"):
            cfg.data.kind = "toy-images"
            cfg.train.batch_size = 32
        cfg.freezeout.enabled = enabled
        s = train(cfg).summary
        label = "cubic-scaled 0.8" if enabled else "baseline"
        print(f"{arch:>13} {label:>16}: acc {s['final_accuracy']:.3f}, "
              f"savings {s['measured_savings']:.3f}")
