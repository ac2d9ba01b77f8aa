"""Command-line pipeline: simulate, classify, estimate, kernel, test, report.

Exit codes: 0 success, 2 configuration error, 3 data error, 4 numerical failure.
"""
from __future__ import annotations

import argparse
import logging
import math
import sys
import warnings
from pathlib import Path

import numpy as np
import pandas as pd

from .classify import rate_tables
from .estimate import (
    CurveKind,
    EstimationError,
    SeparationWarning,
    curve_inputs,
    fit_beta_logit,
    fit_beta_tilde_nls,
    fit_c_ols,
    fit_irrationality_logit,
    fit_subject_ols,
    kernel_regression,
)
from .io import (
    PanelParseError,
    RunConfig,
    load_config,
    panel_master_seed,
    read_panel,
    write_panel,
    write_table,
)
from .panel import Condition, MalformedRecordError, Panel, Treatment
from .sim import ConfigError, simulate_experiment
from .stats import anderson_darling_2, paired_rate_test, prop_test_one, two_prop_test

log = logging.getLogger("obslearn")

EXIT_OK, EXIT_CONFIG, EXIT_DATA, EXIT_NUMERIC = 0, 2, 3, 4
SUBCOMMANDS = ("simulate", "classify", "estimate", "kernel", "test", "report")


class NumericalFailure(RuntimeError):
    pass


# -- stages ------------------------------------------------------------------

def run_classify(panel: Panel, cfg: RunConfig, out: Path) -> dict[str, pd.DataFrame]:
    tables = rate_tables(panel, cfg.tie_is_posterior_error)
    for name, df in tables.items():
        write_table(df, out / f"rates_{name}.csv", cfg.sim.master_seed)
    return tables


def _row(name, res, truth=None):
    return {
        "parameter": name,
        "estimate": res.estimate,
        "std_error": res.std_error,
        "n_used": res.n_used,
        "n_dropped": res.n_dropped,
        "converged": res.converged,
        "iterations": res.iterations,
        "objective": res.objective_at_optimum,
        "at_bound": res.at_bound,
        "generator_value": truth,
    }


def _regression_frame(fit) -> pd.DataFrame:
    df = pd.DataFrame({"term": fit.names, "coef": fit.coef, "std_error": fit.se})
    if fit.ame is not None:
        df["ame"] = [math.nan if n == "const" else fit.ame_of(n) for n in fit.names]
    df["n"] = fit.n
    df["r2"] = fit.r2 if fit.r2 is not None else math.nan
    df["adj_r2"] = fit.adj_r2 if fit.adj_r2 is not None else math.nan
    df["pseudo_r2"] = fit.pseudo_r2 if fit.pseudo_r2 is not None else math.nan
    return df


def run_estimate(panel: Panel, cfg: RunConfig, out: Path, simulated: bool = True) -> tuple[pd.DataFrame, list[str]]:
    """Structural step one and two plus the covariate regressions.

    Structural failures raise NumericalFailure; a regression that cannot be
    fitted (e.g. no irrational choices at all) is skipped with a note. For a
    simulated panel the generating values are listed next to the estimates.
    """
    pop = cfg.sim.population
    stake = cfg.sim.stake
    notes: list[str] = []
    rows = []
    try:
        with warnings.catch_warnings(record=True) as caught:
            warnings.simplefilter("always", SeparationWarning)
            c_hat = fit_c_ols(panel, Condition.INDIVIDUAL, cfg.winsorize)
            rows.append(_row("c", c_hat, pop.c.mean))
            rows.append(_row("beta_reported", fit_beta_logit(panel, Condition.INDIVIDUAL, "reported", stake),
                             pop.beta.mean))
            rows.append(_row("beta_bayes", fit_beta_logit(panel, Condition.INDIVIDUAL, "bayes", stake), None))
            # the headline beta follows the configured posterior source
            rows.append(dict(rows[-1] if cfg.posterior_source == "bayes" else rows[-2], parameter="beta",
                             generator_value=pop.beta.mean))
            if panel.select(treatment=(Treatment.BASE, Treatment.DEMOGRAPHICS), condition=Condition.SOCIAL).records:
                rows.append(_row("c_social_rational_neighbor",
                                 fit_c_ols(panel, Condition.SOCIAL, cfg.winsorize), None))
                rows.append(_row("beta_tilde", fit_beta_tilde_nls(
                    panel, c_hat.estimate, stake, cfg.include_bot_nls, cfg.winsorize, (0.0, cfg.nls_upper)),
                    pop.beta_tilde.mean))
        for w in caught:
            notes.append(f"warning: {w.message}")
    except EstimationError as e:
        raise NumericalFailure(str(e)) from e
    est = pd.DataFrame(rows)
    if not simulated:
        est["generator_value"] = None
    write_table(est, out / "estimates.csv", cfg.sim.master_seed)

    regressions = [
        ("subject_ols_IND", lambda: fit_subject_ols(panel, Condition.INDIVIDUAL)),
        ("subject_ols_SOC", lambda: fit_subject_ols(panel, Condition.SOCIAL)),
    ]
    if panel.select(treatment=Treatment.DEMOGRAPHICS).records:
        regressions += [
            ("irrationality_logit_subject", lambda: fit_irrationality_logit(panel, covariates_neighbor=())),
            ("irrationality_logit_full", lambda: fit_irrationality_logit(panel)),
        ]
    for name, fn in regressions:
        try:
            write_table(_regression_frame(fn()), out / f"{name}.csv", cfg.sim.master_seed)
        except (EstimationError, ValueError, np.linalg.LinAlgError) as e:
            notes.append(f"{name} skipped: {e}")
    return est, notes


def run_kernel(panel: Panel, cfg: RunConfig, out: Path) -> dict[str, pd.DataFrame]:
    curves = {}
    for kind in CurveKind.ALL:
        xs, ys = curve_inputs(panel, kind)
        if xs.size == 0:
            continue
        curve = kernel_regression(xs, ys, cfg.bandwidth)
        df = pd.DataFrame({"grid": curve.grid, "mean": curve.estimates, "sd": curve.sd,
                           "n_effective": curve.n_effective})
        write_table(df, out / f"curve_{kind}.csv", cfg.sim.master_seed)
        curves[kind] = df
    return curves


def _test_row(name, res):
    return {"test": name, "method": res.method, "statistic": res.statistic, "p_value": res.p_value,
            "n1": res.n1, "n2": res.n2, "degenerate": res.degenerate}


def run_tests(panel: Panel, cfg: RunConfig, out: Path, tables=None) -> pd.DataFrame:
    tables = tables if tables is not None else rate_tables(panel, cfg.tie_is_posterior_error)
    rows = []
    subjects = panel.subjects_only

    # tie rounds: do subjects pick box X / follow the neighbour at chance?
    ind_tie = [r for r in subjects.select(condition=Condition.INDIVIDUAL) if r.structure.is_tie]
    if ind_tie:
        k = sum(r.choice.value == "X" for r in ind_tie)
        rows.append(_test_row("tie_individual_choose_X_vs_half", prop_test_one(k, len(ind_tie), 0.5)))
    soc_tie = [r for r in subjects.select(condition=Condition.SOCIAL) if r.structure.is_tie]
    if soc_tie:
        k = sum(r.choice is not r.neighbor_guess for r in soc_tie)
        rows.append(_test_row("tie_social_deviate_vs_half", prop_test_one(k, len(soc_tie), 0.5)))

    subj = tables["subject"].pivot_table(index="subject_id", columns="condition", values="rate")
    if {"IND", "SOC"} <= set(subj.columns):
        subj = subj.dropna()
        if len(subj) >= 2:
            rows.append(_test_row("social_vs_individual_paired", paired_rate_test(subj["SOC"], subj["IND"])))
            rows.append(_test_row("social_vs_individual_anderson_darling",
                                  anderson_darling_2(subj["SOC"], subj["IND"])))

    cond = tables["condition"].set_index("condition")
    if {"IND", "SOC"} <= set(cond.index):
        s, i = cond.loc["SOC"], cond.loc["IND"]
        rows.append(_test_row("social_vs_individual_two_prop",
                              two_prop_test(s.irrational, s.n, i.irrational, i.n)))
        rows.append(_test_row("posterior_error_social_vs_individual",
                              two_prop_test(s.posterior_err, s.n, i.posterior_err, i.n)))
        rows.append(_test_row("reasoning_error_social_vs_individual",
                              two_prop_test(s.reasoning_err, s.n, i.reasoning_err, i.n)))
    between = tables["between"].set_index("condition")
    if {"IND", "SOC"} <= set(between.index):
        s, i = between.loc["SOC"], between.loc["IND"]
        rows.append(_test_row("between_subject_social_vs_individual",
                              two_prop_test(s.irrational, s.n, i.irrational, i.n)))

    tr = tables["treatment"]
    soc = tr[tr["condition"] == "SOC"].set_index("treatment")
    pairs = [("BASE", "DEMO"), ("BASE", "BOT"), ("DEMO", "BOT"), ("BOT", "BALL"), ("BASE", "BALL")]
    for a, b in pairs:
        if a in soc.index and b in soc.index:
            rows.append(_test_row(f"social_{a}_vs_{b}", two_prop_test(
                soc.loc[a, "irrational"], soc.loc[a, "n"], soc.loc[b, "irrational"], soc.loc[b, "n"])))
    if "BALL" in soc.index and "IND" in cond.index:
        i = cond.loc["IND"]
        rows.append(_test_row("social_BALL_vs_individual", two_prop_test(
            soc.loc["BALL", "irrational"], soc.loc["BALL", "n"], i.irrational, i.n)))

    df = pd.DataFrame(rows)
    write_table(df, out / "tests.csv", cfg.sim.master_seed)
    return df


def _summary(cfg: RunConfig, panel: Panel, tables, est, notes, tests) -> str:
    lines = [f"obslearn report  master_seed={cfg.sim.master_seed}", ""]
    lines.append(f"records: {len(panel)} ({len(panel.subjects_only)} subject rounds, "
                 f"{len(panel.pool)} pool rounds), subjects: {len(panel.subjects_only.by_subject)}")
    lines.append("")
    lines.append("irrationality by condition (rate / posterior error / reasoning error):")
    for _, r in tables["condition"].iterrows():
        lines.append(f"  {r.condition}: {r.rate:.3f} / {r.posterior_rate:.3f} / {r.reasoning_rate:.3f}  (n={r.n})")
    lines.append("social irrationality by treatment:")
    tr = tables["treatment"]
    for _, r in tr[tr["condition"] == "SOC"].iterrows():
        lines.append(f"  {r.treatment}: {r.rate:.3f}  (n={r.n})")
    lines.append("between-subject (first condition only):")
    for _, r in tables["between"].iterrows():
        lines.append(f"  {r.condition}: {r.rate:.3f}  (n={r.n})")
    lines.append("")
    lines.append("structural estimates:")
    for _, r in est.iterrows():
        gen = "" if r.generator_value is None or pd.isna(r.generator_value) else f"  [generator {r.generator_value}]"
        flag = "  (at bound)" if r.at_bound else ""
        lines.append(f"  {r.parameter}: {r.estimate:.4f} (se {r.std_error:.4f}, n={r.n_used}){gen}{flag}")
    lines.append("")
    lines.append("tests:")
    for _, r in tests.iterrows():
        lines.append(f"  {r.test}: stat={r.statistic:.3f} p={r.p_value:.4g}")
    if notes:
        lines.append("")
        lines.append("notes:")
        lines.extend(f"  {n}" for n in notes)
    return "\n".join(lines) + "\n"


# -- entry point -------------------------------------------------------------

def _load_panel(args, cfg: RunConfig) -> Panel:
    if args.panel:
        return read_panel(args.panel)
    return simulate_experiment(cfg.sim, workers=cfg.workers)


def run(subcommand: str, cfg: RunConfig, panel_path=None) -> int:
    """Run one subcommand with a ready configuration; returns the exit status."""
    args = argparse.Namespace(panel=panel_path)
    return _dispatch(subcommand, cfg, args)


def _dispatch(subcommand: str, cfg: RunConfig, args) -> int:
    out = Path(cfg.out_dir)
    out.mkdir(parents=True, exist_ok=True)
    try:
        if subcommand == "simulate":
            panel = simulate_experiment(cfg.sim, workers=cfg.workers)
            write_panel(panel, out / "panel.csv", cfg.sim.master_seed)
            return EXIT_OK
        panel = _load_panel(args, cfg)
        panel.check_neighbors()
        if subcommand == "classify":
            run_classify(panel, cfg, out)
        elif subcommand == "estimate":
            _, notes = run_estimate(panel, cfg, out, simulated=args.panel is None)
            for n in notes:
                log.warning(n)
        elif subcommand == "kernel":
            run_kernel(panel, cfg, out)
        elif subcommand == "test":
            run_tests(panel, cfg, out)
        elif subcommand == "report":
            if args.panel is None:
                write_panel(panel, out / "panel.csv", cfg.sim.master_seed)
            tables = run_classify(panel, cfg, out)
            est, notes = run_estimate(panel, cfg, out, simulated=args.panel is None)
            run_kernel(panel, cfg, out)
            tests = run_tests(panel, cfg, out, tables)
            (out / "summary.txt").write_text(_summary(cfg, panel, tables, est, notes, tests))
        else:
            raise ConfigError(f"unknown subcommand {subcommand!r}")
    except (PanelParseError, MalformedRecordError, FileNotFoundError) as e:
        log.error("data error: %s", e)
        return EXIT_DATA
    except NumericalFailure as e:
        log.error("numerical failure: %s", e)
        return EXIT_NUMERIC
    return EXIT_OK


def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="obslearn", description=__doc__.splitlines()[0])
    p.add_argument("subcommand", choices=SUBCOMMANDS)
    p.add_argument("--config", help="flat key=value configuration file")
    p.add_argument("--seed", type=int, help="master seed (overrides the config)")
    p.add_argument("--out", help="output directory (overrides the config)")
    p.add_argument("--panel", help="read this panel CSV instead of simulating")
    p.add_argument("--bandwidth", type=float, help="kernel bandwidth on the 0-100 scale")
    p.add_argument("--posterior-source", choices=("reported", "bayes"))
    p.add_argument("--winsorize", action="store_true", help="clamp reports to [1, 99] instead of dropping 0/100")
    p.add_argument("--include-bot-nls", action="store_true", help="use bot-treatment rounds in the beta_tilde fit")
    p.add_argument("-v", "--verbose", action="store_true")
    return p


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s: %(message)s")
    overrides = {}
    if args.seed is not None:
        overrides["master_seed"] = args.seed
    if args.out is not None:
        overrides["out"] = args.out
    if args.bandwidth is not None:
        overrides["bandwidth"] = args.bandwidth
    if args.posterior_source is not None:
        overrides["posterior_source"] = args.posterior_source
    if args.winsorize:
        overrides["winsorize"] = True
    if args.include_bot_nls:
        overrides["include_bot_nls"] = True
    try:
        if args.panel and args.seed is None and args.subcommand != "simulate" and Path(args.panel).exists():
            # report headers carry the seed the panel was generated with
            seed = panel_master_seed(args.panel)
            if seed is not None:
                overrides["master_seed"] = seed
        cfg = load_config(args.config, overrides)
    except ConfigError as e:
        log.error("config error: %s", e)
        return EXIT_CONFIG
    return _dispatch(args.subcommand, cfg, args)


if __name__ == "__main__":
    sys.exit(main())
