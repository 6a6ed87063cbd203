"""Per-layer learning-rate schedules, the four strategies side by side.

Run:  python demos/01_schedules.py [out.csv]

With an output path the full (iteration, t, layer, lr, frozen) table for the
recommended strategy is written as CSV, ready for any plotting tool.
"""
import sys

import numpy as np

from freezeout.schedule import (STRATEGIES, ScheduleParams, dump_schedule, layer_schedules,
                                lr_at, write_schedule_csv)

# %% Freeze times. t_0 is always the pre-cube value: cubic 0.5 freezes layer 0 at 0.125.
for strategy in STRATEGIES:
    scheds = layer_schedules(ScheduleParams(0.5, 0.1, 5, strategy))
    print(f"{strategy.name:>16}  t_i  = " + "  ".join(f"{s.t_i:.4f}" for s in scheds))
    print(f"{'':>16}  a_i0 = " + "  ".join(f"{s.alpha_0:.4f}" for s in scheds))

# %% Each layer follows half a cosine that reaches zero exactly at its own t_i.
scheds = layer_schedules(ScheduleParams(0.5, 0.1, 5, "linear-unscaled"))
print("\n   t   " + "".join(f"layer{i:<4}" for i in range(5)))
for t in np.linspace(0, 1, 11):
    print(f"{t:5.2f}  " + "".join(f"{lr_at(s, t):<9.4f}" for s in scheds))

# %% Scaled strategies start layer i at alpha / t_i, so every curve has the same area.
for name in ("linear-unscaled", "cubic-scaled"):
    areas = []
    for s in layer_schedules(ScheduleParams(0.5, 0.1, 5, name)):
        t = np.linspace(0, s.t_i, 100_000)
        areas.append(np.trapezoid([lr_at(s, v) for v in t], t))
    print(f"\n{name}: area under each curve = " + ", ".join(f"{a:.6f}" for a in areas))
print("alpha / 2 =", 0.1 / 2)

# %% The recommended defaults (cubic-scaled, t_0 = 0.8) as a CSV table.
rows = dump_schedule(ScheduleParams(0.8, 0.1, 5, "cubic-scaled"), 1000)
if len(sys.argv) > 1:
    with open(sys.argv[1], "w", newline="") as fh:
        write_schedule_csv(rows, fh)
    print(f"\nwrote {len(rows)} rows to {sys.argv[1]}")
else:
    print("\nfirst rows of the cubic-scaled t_0=0.8 table:")
    print("\n".join(write_schedule_csv(rows[:6]).splitlines()))
