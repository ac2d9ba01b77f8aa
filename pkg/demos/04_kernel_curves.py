"""Reported vs Bayesian beliefs, smoothed with a Gaussian kernel."""
import numpy as np

from obslearn.estimate import CurveKind, curve_inputs, kernel_regression
from obslearn.sim import SimConfig, simulate_experiment

panel = simulate_experiment(SimConfig(master_seed=5))

for kind in (CurveKind.BELIEF_INDIVIDUAL, CurveKind.BELIEF_SOCIAL):
    xs, ys = curve_inputs(panel, kind)
    curve = kernel_regression(xs, ys, bandwidth=15)
    ok = ~np.isnan(curve.estimates)
    gap = np.mean(np.abs(curve.estimates[ok] - curve.grid[ok]))
    print(f"{kind:18s} mean distance from the diagonal: {gap:5.2f} points")
    for g in (10, 30, 50, 70, 90):
        print(f"   Bayes {g:3d} -> reported {curve.estimates[g]:6.2f}  (n_eff {curve.n_effective[g]:.0f})")

# choice curves: how often X is picked at each stated belief
xs, ys = curve_inputs(panel, CurveKind.CHOICE_SOCIAL)
curve = kernel_regression(xs, ys)
print("P(choose X) at belief 40/50/60:", np.round(curve.estimates[[40, 50, 60]], 3))
