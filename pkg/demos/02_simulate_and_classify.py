"""Simulate the four treatments and break irrational choices down."""
from obslearn.classify import rate_tables
from obslearn.sim import SimConfig, simulate_experiment

panel = simulate_experiment(SimConfig(master_seed=7))
print(panel)
print(len(panel.pool), "neighbour-pool rounds,", len(panel.subjects_only), "subject rounds")

tables = rate_tables(panel)

# irrational = posterior error (belief points the wrong way) + reasoning error
print(tables["condition"][["condition", "n", "rate", "posterior_rate", "reasoning_rate"]].round(3))

# following a person is hard, following a bot or a visible ball is not
soc = tables["treatment"].query("condition == 'SOC'")
print(soc[["treatment", "n", "rate", "rate_se"]].round(3))

# canonical structures: every round relabelled to a white ball / a guess of X
canon = tables["structure_canonical"].query("condition == 'SOC'")
print(canon.sort_values("rate", ascending=False).head(5)[["canon_theta_x", "canon_theta_y", "n", "rate"]].round(3))
