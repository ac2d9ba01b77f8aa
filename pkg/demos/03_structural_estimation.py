"""Recover c, beta and beta_tilde from a simulated panel."""
from obslearn.estimate import (
    fit_beta_logit,
    fit_beta_tilde_nls,
    fit_c_ols,
    grid_scan,
    nls_objective,
)
from obslearn.panel import Condition, Treatment
from obslearn.sim import SimConfig, simulate_experiment

panel = simulate_experiment(SimConfig(n_subjects={Treatment.BASE: 150}, covariates=None, master_seed=3))

# step one: updating bias from reported beliefs, then choice precision
c = fit_c_ols(panel)
print(f"c_hat    = {c.estimate:.4f} (se {c.std_error:.4f}), {c.n_dropped} rounds at 0/100 dropped")
rep = fit_beta_logit(panel, Condition.INDIVIDUAL, "reported")
bay = fit_beta_logit(panel, Condition.INDIVIDUAL, "bayes")
print(f"beta_hat = {rep.estimate:.4f} using reported beliefs")
print(f"beta_hat = {bay.estimate:.4f} pretending beliefs are Bayesian (biased down)")

# step two: how precise do subjects think the neighbour is?
bt = fit_beta_tilde_nls(panel, c.estimate)
f, n, _ = nls_objective(panel, c.estimate)
print(f"beta_tilde_hat = {bt.estimate:.5f} (se {bt.std_error:.5f}) from {n} social rounds")
print(f"grid-scan check: {grid_scan(f, 0.0, 1.0):.5f}")
