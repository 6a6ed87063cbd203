"""How much backward compute does freezing save?

Run:  python demos/02_cost_model.py

Forward passes always cost c_i per example; the backward pass of layer i
(about the same again) stops at t_i, so total cost is sum (1 + t_i) c_i n.
"""
from freezeout.cost_model import CostProfile, estimate_speedup, layer_contributions
from freezeout.layers import ModelSpec, build
from freezeout.schedule import ScheduleParams, compute_t_schedule
from freezeout.training import TrainConfig, train

# %% Four equal layers, linear spacing from 0.5: t = 0.5, 0.667, 0.833, 1.
profile = CostProfile([1, 1, 1, 1], 1)
ts = compute_t_schedule(ScheduleParams(0.5, 0.1, 4, "linear-unscaled"))
est = estimate_speedup(profile, ts, "linear")
print("t_i          ", [round(t, 4) for t in ts])
print("contributions", [round(x, 4) for x in layer_contributions(profile, ts)])
print(f"C = {est.baseline_cost}, C_f = {est.freezeout_cost:.4f}")
print(f"raw speedup {est.raw_speedup:.4f}, corrected (x1.3, linear only) "
      f"{est.corrected_speedup:.4f}")

# %% A real profile: MACs per block of a small CNN. Early blocks are the expensive ones,
# which is why freezing them first pays off.
net = build(ModelSpec("cnn-plain", [8, 16, 16], (1, 16, 16), 4, depth=3), seed=0)
c = net.forward_flops()
print("\ncnn-plain block MACs:", c)
for name in ("linear-unscaled", "linear-scaled", "cubic-unscaled", "cubic-scaled"):
    for t0 in (0.8, 0.5, 0.3):
        ts = compute_t_schedule(ScheduleParams(t0, 0.1, len(c), name))
        e = estimate_speedup(CostProfile(c, 1000), ts, name.split("-")[0])
        print(f"  {name:>16} t0={t0}: raw {e.raw_speedup:.3f}  corrected {e.corrected_speedup:.3f}")

# %% The trainer counts the MACs it actually spends; compare against the prediction.
cfg = TrainConfig()
cfg.train.n_itr = 300
cfg.freezeout.t0 = 0.5
s = train(cfg).summary
print(f"\ntrained MLP, cubic-scaled t0=0.5: measured {s['measured_savings']:.4f}, "
      f"predicted {s['predicted_savings']:.4f}")
