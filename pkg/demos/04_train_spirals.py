"""Accuracy versus compute on two spirals.

Run:  python demos/04_train_spirals.py

An 8-block MLP trained with the recommended cubic-scaled schedule at several
t_0, against the plain cosine baseline. Lower t_0 saves more backward
compute; t_0 = 0.8 should cost next to nothing in accuracy.
"""
import numpy as np

from freezeout.sweep import aggregate, run_sweep
from freezeout.training import TrainConfig

cfg = TrainConfig()  # two-spirals, widths 32, 7 hidden blocks + head
rows = run_sweep(cfg, [0.8, 0.5, 0.3], ["cubic-scaled"], seeds=[0, 1, 2], baseline=True)

# %% Per-run results.
for r in rows:
    print(f"{r['strategy']:>13} t0={r['t0']:.1f} seed={r['seed']}: "
          f"acc {r['final_accuracy']:.3f}  savings {r['measured_savings']:.3f}")

# %% Mean and standard deviation per setting.
print()
for g in aggregate(rows):
    print(f"{g['strategy']:>13} t0={g['t0']:.1f}: acc {g['accuracy_mean']:.3f} "
          f"+- {g['accuracy_std']:.3f}, savings {g['measured_savings_mean']:.3f} "
          f"(predicted {g['predicted_savings']:.3f})")
