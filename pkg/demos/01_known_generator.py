"""
Rejecting a sinusoid with a known generator
===========================================

A double integrator ``x1' = x2, x2' = 3 u + d`` is hit by a 2 rad/s sinusoid
plus a constant offset. We run the same plant twice: once with the plain
extended-state observer (BADRC) and once with the internal-model observer
(IADRC) that is told the frequency of the disturbance.
"""

# %%
import numpy as np

from iadrc import compute_metrics, load_config, build_scenario, run_scenario
from _plotting import save_lines

cfg = load_config("paper-knownS")
print("plant order", cfg["plant"]["order"], "with b_n =", cfg["plant"]["b_n"])
print("ESO poles", cfg["controller"]["observer_poles"])

# %%
# The main run uses the internal-model observer; the baseline swaps the mode.
iadrc = run_scenario(build_scenario(cfg))
badrc = run_scenario(build_scenario(cfg, mode="BADRC"))

# %%
# Steady-state error on x1 over the last quarter of the horizon.
for label, trace in (("BADRC", badrc), ("IADRC", iadrc)):
    m = compute_metrics(trace)
    print(f"{label}: x1 steady RMS {m.steady_rms['x1']:.3e}")

# %%
# The ESO estimate of the disturbance trails the true signal by a fixed lag,
# which is what leaves BADRC with a residual oscillation.
m = compute_metrics(badrc)
print(f"BADRC estimate lags the disturbance by {100 * m.phase_lag_fraction:.1f}% of a period")

# %%
# The internal-model split: d2 is the sinusoid, reconstructed from the xi filter.
tail = iadrc.t > 0.75 * iadrc.t[-1]
err = np.max(np.abs(iadrc["d2_hat"][tail] - iadrc["d2"][tail]))
print(f"IADRC sup |d2_hat - d2| on the tail: {err:.2e}")

save_lines("01_states", iadrc.t, {"x1 BADRC": badrc["x1"], "x1 IADRC": iadrc["x1"]},
           "x1", "Output under both observers")
save_lines("01_disturbance", iadrc.t, {"d2": iadrc["d2"], "d2_hat": iadrc["d2_hat"]},
           "disturbance", "Internal-model estimate of the sinusoid")
