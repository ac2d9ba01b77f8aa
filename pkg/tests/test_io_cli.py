import filecmp
import subprocess
import sys

import pandas as pd
import pytest

from obslearn import __version__
from obslearn.cli import EXIT_CONFIG, EXIT_DATA, EXIT_NUMERIC, main
from obslearn.io import (
    CONFIG_KEYS,
    PANEL_COLUMNS,
    PanelParseError,
    SchemaVersionError,
    build_run_config,
    load_config,
    parse_config_text,
    read_panel,
    write_panel,
    write_table,
)
from obslearn.panel import Treatment
from obslearn.sim import ConfigError, SimConfig, simulate_experiment

HEADER = ("session_id,subject_id,treatment,condition,condition_order,round,white_in_x,black_in_y,true_state,"
          "ball,ball_shown,neighbor_id,neighbor_guess,choice,reported_posterior_pct,gender,education_years,age,"
          "prob_stat,neighbor_gender,neighbor_education_years,neighbor_age,neighbor_prob_stat")

SMALL = "n_base = 3\nn_demo = 3\nn_bot = 3\nn_ball = 3\npool_size = 25\n"


@pytest.fixture(scope="module")
def small_panel():
    cfg = SimConfig(n_subjects={t: 3 for t in (Treatment.BASE, Treatment.DEMOGRAPHICS, Treatment.BOT,
                                               Treatment.BALL)}, pool_size=25, master_seed=4)
    return simulate_experiment(cfg)


def test_panel_header_exact(tmp_path, small_panel):
    path = tmp_path / "panel.csv"
    write_panel(small_panel, path, master_seed=4)
    lines = path.read_text().splitlines()
    assert lines[0] == f"# obslearn-panel schema=1 version={__version__} master_seed=4"
    assert lines[1] == HEADER == ",".join(PANEL_COLUMNS)
    # optional fields stay present but empty
    assert all(line.count(",") == len(PANEL_COLUMNS) - 1 for line in lines[1:])


def test_panel_round_trip(tmp_path, small_panel):
    path = tmp_path / "panel.csv"
    write_panel(small_panel, path)
    assert read_panel(path) == small_panel


def _corrupt(tmp_path, small_panel, fn):
    path = tmp_path / "panel.csv"
    write_panel(small_panel, path)
    lines = path.read_text().splitlines()
    path.write_text("\n".join(fn(lines)) + "\n")
    return path


@pytest.mark.parametrize("fn, message", [
    (lambda L: L[:2] + [L[2].replace(",X,", ",Q,", 1)] + L[3:], "line 3"),
    (lambda L: L[:2] + [L[2] + ",extra"] + L[3:], "line 3"),
    (lambda L: [L[0], L[1].replace("ball_shown", "shown")] + L[2:], "column"),
    (lambda L: L[:3] + [L[3].replace(",64,", ",164,").replace(",6,", ",16,", 1)] + L[4:], "line 4"),
])
def test_panel_parse_errors(tmp_path, small_panel, fn, message):
    path = _corrupt(tmp_path, small_panel, fn)
    with pytest.raises(PanelParseError, match=message):
        read_panel(path)


def test_panel_schema_mismatch(tmp_path, small_panel):
    path = _corrupt(tmp_path, small_panel, lambda L: [L[0].replace("schema=1", "schema=2")] + L[1:])
    with pytest.raises(SchemaVersionError):
        read_panel(path)


def test_write_table_header(tmp_path):
    path = tmp_path / "t.csv"
    write_table(pd.DataFrame({"a": [1]}), path, 9)
    assert path.read_text().splitlines()[0] == f"# obslearn report version={__version__} master_seed=9"


def test_config_parsing(tmp_path):
    values = parse_config_text("# comment\nmaster_seed = 5\nwinsorize = true\nbandwidth=10  # inline\n")
    assert values == {"master_seed": 5, "winsorize": True, "bandwidth": 10.0}
    cfg = build_run_config(values)
    assert cfg.sim.master_seed == 5 and cfg.winsorize and cfg.bandwidth == 10.0
    defaults = build_run_config({})
    assert defaults.sim.population.c.mean == CONFIG_KEYS["c"][1]
    assert sum(defaults.sim.n_subjects.values()) == 151


@pytest.mark.parametrize("text", [
    "unknown_key = 1",
    "master_seed = 1\nmaster_seed = 2",
    "master_seed = abc",
    "just words",
    "bandwidth = -1",
    "posterior_source = guess",
    "rounds_per_condition = 5",
    "n_base = 0\nn_demo = 0\nn_bot = 0\nn_ball = 0",
    "n_base = -2",
])
def test_config_errors(text):
    with pytest.raises(ConfigError):
        build_run_config(parse_config_text(text))


def test_load_config_overrides(tmp_path):
    path = tmp_path / "run.cfg"
    path.write_text("master_seed = 1\n")
    assert load_config(str(path), {"master_seed": 7}).sim.master_seed == 7
    with pytest.raises(ConfigError):
        load_config(str(tmp_path / "missing.cfg"))


def test_cli_exit_codes(tmp_path):
    bad = tmp_path / "bad.cfg"
    bad.write_text("nonsense = 1\n")
    assert main(["report", "--config", str(bad), "--out", str(tmp_path / "o")]) == EXIT_CONFIG
    broken = tmp_path / "broken.csv"
    broken.write_text("not a panel\n")
    assert main(["classify", "--panel", str(broken), "--out", str(tmp_path / "o")]) == EXIT_DATA
    assert main(["classify", "--panel", str(tmp_path / "nope.csv"), "--out", str(tmp_path / "o")]) == EXIT_DATA


def test_cli_numerical_failure(tmp_path, small_panel):
    # a panel with pool rounds only has no subject data to estimate from
    path = tmp_path / "pool.csv"
    write_panel(small_panel.pool, path)
    assert main(["estimate", "--panel", str(path), "--out", str(tmp_path / "o")]) == EXIT_NUMERIC


def test_cli_pipeline(tmp_path):
    cfg = tmp_path / "run.cfg"
    cfg.write_text(SMALL)
    out = tmp_path / "out"
    assert main(["simulate", "--config", str(cfg), "--seed", "3", "--out", str(out)]) == 0
    panel = out / "panel.csv"
    assert panel.exists()
    for sub in ("classify", "estimate", "kernel", "test"):
        assert main([sub, "--config", str(cfg), "--panel", str(panel), "--out", str(out)]) == 0
    est = pd.read_csv(out / "estimates.csv", comment="#")
    assert {"c", "beta_reported", "beta_bayes", "beta", "beta_tilde"} <= set(est["parameter"])
    assert (out / "rates_condition.csv").exists()
    assert (out / "curve_belief_social.csv").exists()
    tests = pd.read_csv(out / "tests.csv", comment="#")
    assert "social_vs_individual_paired" in set(tests["test"])
    # reading the panel back gives the same classification as the simulated one
    out2 = tmp_path / "out2"
    assert main(["classify", "--config", str(cfg), "--seed", "3", "--out", str(out2)]) == 0
    assert filecmp.cmp(out / "rates_condition.csv", out2 / "rates_condition.csv", shallow=False)


def test_cli_flags(tmp_path):
    cfg = tmp_path / "run.cfg"
    cfg.write_text(SMALL)
    out = tmp_path / "o"
    args = ["estimate", "--config", str(cfg), "--out", str(out), "--posterior-source", "bayes", "--winsorize",
            "--include-bot-nls", "--bandwidth", "5"]
    assert main(args) == 0
    est = pd.read_csv(out / "estimates.csv", comment="#").set_index("parameter")
    assert est.loc["beta", "estimate"] == est.loc["beta_bayes", "estimate"]


def test_module_entry_point(tmp_path):
    res = subprocess.run([sys.executable, "-m", "obslearn", "--help"], capture_output=True, text=True)
    assert res.returncode == 0 and "--posterior-source" in res.stdout
    res = subprocess.run([sys.executable, "-m", "obslearn", "report", "--bandwidth", "x"], capture_output=True)
    assert res.returncode == 2
