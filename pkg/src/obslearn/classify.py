"""Rationality labels, posterior/reasoning decomposition and rate tables."""
from __future__ import annotations

import enum

import numpy as np
import pandas as pd

from .env import canonicalize, rational_choice
from .panel import Condition, MalformedRecordError, Panel, TrialRecord, Treatment


class ErrorLabel(str, enum.Enum):
    RATIONAL = "rational"
    POSTERIOR_ERROR = "posterior_error"
    REASONING_ERROR = "reasoning_error"
    EXCLUDED = "excluded"

    @property
    def irrational(self) -> bool:
        return self in (ErrorLabel.POSTERIOR_ERROR, ErrorLabel.REASONING_ERROR)


def benchmark_choice(record: TrialRecord):
    """The box a rational subject should pick, or None when the round is excluded."""
    record.validate()
    if record.condition is Condition.INDIVIDUAL:
        return rational_choice(record.structure, record.ball)
    if record.structure.is_tie:
        return None
    if record.treatment is Treatment.BALL and rational_choice(record.structure, record.ball) != record.neighbor_guess:
        return None
    return record.neighbor_guess


def classify_record(record: TrialRecord, tie_is_posterior_error: bool = True) -> ErrorLabel:
    """Label one round.

    An irrational choice is a posterior error when the recovered belief does
    not favour the correct box (confidence in it at most 50, or strictly
    below 50 with ``tie_is_posterior_error=False``) and a reasoning error
    otherwise.
    """
    correct = benchmark_choice(record)
    if correct is None:
        return ErrorLabel.EXCLUDED
    if record.choice is correct:
        return ErrorLabel.RATIONAL
    # choice != correct, so confidence in the correct box is the complement
    conf_correct = 100 - record.reported_posterior_pct
    wrong_direction = conf_correct <= 50 if tie_is_posterior_error else conf_correct < 50
    return ErrorLabel.POSTERIOR_ERROR if wrong_direction else ErrorLabel.REASONING_ERROR


def label_frame(panel: Panel, tie_is_posterior_error: bool = True, include_pool: bool = False) -> pd.DataFrame:
    """One row per record with its label and the grouping keys used by the rate tables."""
    rows = []
    for r in panel:
        if r.is_pool and not include_pool:
            continue
        label = classify_record(r, tie_is_posterior_error)
        c = canonicalize(r)
        first = r.condition_order.first is r.condition
        rows.append({
            "subject_id": r.subject_id,
            "treatment": r.treatment.value,
            "condition": r.condition.value,
            "first_condition": first,
            "theta_x": r.structure.theta_x,
            "theta_y": r.structure.theta_y,
            "canon_theta_x": c.structure.theta_x,
            "canon_theta_y": c.structure.theta_y,
            "label": label.value,
        })
    df = pd.DataFrame(rows, columns=[
        "subject_id", "treatment", "condition", "first_condition", "theta_x", "theta_y",
        "canon_theta_x", "canon_theta_y", "label",
    ])
    return df


def _tabulate(df: pd.DataFrame, keys: list[str]) -> pd.DataFrame:
    used = df[df["label"] != ErrorLabel.EXCLUDED.value]
    counts = pd.DataFrame({
        "n": used.groupby(keys).size(),
        "posterior_err": (used["label"] == ErrorLabel.POSTERIOR_ERROR.value).groupby([used[k] for k in keys]).sum(),
        "reasoning_err": (used["label"] == ErrorLabel.REASONING_ERROR.value).groupby([used[k] for k in keys]).sum(),
    })
    counts["irrational"] = counts["posterior_err"] + counts["reasoning_err"]
    counts = counts.astype(int).reset_index()
    n = counts["n"].to_numpy(dtype=float)
    for col, out in (("irrational", "rate"), ("posterior_err", "posterior_rate"), ("reasoning_err", "reasoning_rate")):
        p = counts[col].to_numpy() / n
        counts[out] = p
        counts[out + "_se"] = np.sqrt(p * (1 - p) / n)
    return counts[keys + ["n", "irrational", "posterior_err", "reasoning_err",
                          "rate", "rate_se", "posterior_rate", "posterior_rate_se",
                          "reasoning_rate", "reasoning_rate_se"]]


def rate_tables(panel: Panel, tie_is_posterior_error: bool = True) -> dict[str, pd.DataFrame]:
    """All tabulations of irrational choices.

    Keys: ``condition`` (aggregate and the posterior/reasoning split),
    ``subject`` (per-subject rates for histograms and regressions),
    ``treatment`` (treatment x condition), ``structure`` (per information
    structure), ``structure_canonical`` (after relabelling every round to a
    white ball / guess of X) and ``between`` (only each subject's first
    condition).
    """
    df = label_frame(panel, tie_is_posterior_error)
    return {
        "condition": _tabulate(df, ["condition"]),
        "subject": _tabulate(df, ["subject_id", "treatment", "condition"]),
        "treatment": _tabulate(df, ["treatment", "condition"]),
        "structure": _tabulate(df, ["condition", "theta_x", "theta_y"]),
        "structure_canonical": _tabulate(df, ["condition", "canon_theta_x", "canon_theta_y"]),
        "between": _tabulate(df[df["first_condition"].astype(bool)], ["condition"]),
    }


def subject_rates(panel: Panel, condition: Condition, treatments=None) -> pd.Series:
    """Per-subject irrationality rate in one condition, indexed by subject id."""
    sub = panel.subjects_only.select(treatment=treatments, condition=condition)
    table = _tabulate(label_frame(sub), ["subject_id"])
    return table.set_index("subject_id")["rate"]

