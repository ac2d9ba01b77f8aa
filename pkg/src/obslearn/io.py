"""Panel CSV reading/writing and the flat ``key=value`` run configuration."""
from __future__ import annotations

import csv
import dataclasses
import io
import math
import os
from pathlib import Path
from typing import Optional

import pandas as pd

from . import __version__
from .agents import AgentKind
from .env import InformationStructure, Signal, State
from .panel import Condition, ConditionOrder, Panel, TrialRecord, Treatment
from .sim import ConfigError, Covariates, ParamDist, Population, SimConfig

PANEL_SCHEMA = "obslearn-panel"
PANEL_SCHEMA_VERSION = 1
PANEL_COLUMNS = (
    "session_id", "subject_id", "treatment", "condition", "condition_order", "round",
    "white_in_x", "black_in_y", "true_state", "ball", "ball_shown", "neighbor_id",
    "neighbor_guess", "choice", "reported_posterior_pct", "gender", "education_years",
    "age", "prob_stat", "neighbor_gender", "neighbor_education_years", "neighbor_age",
    "neighbor_prob_stat",
)
_OPTIONAL_INT = ("neighbor_gender", "neighbor_education_years", "neighbor_age", "neighbor_prob_stat")


class PanelParseError(ValueError):
    pass


class SchemaVersionError(PanelParseError):
    pass


def comment_header(master_seed: Optional[int], kind: str = "report") -> str:
    seed = "" if master_seed is None else master_seed
    return f"# obslearn {kind} version={__version__} master_seed={seed}\n"


def _fmt(v) -> str:
    if v is None:
        return ""
    if isinstance(v, bool):
        return "1" if v else "0"
    if hasattr(v, "value"):
        return v.value
    return str(v)


def write_panel(panel: Panel, path, master_seed: Optional[int] = None) -> None:
    path = Path(path)
    with open(path, "w", newline="") as fh:
        fh.write(f"# {PANEL_SCHEMA} schema={PANEL_SCHEMA_VERSION} version={__version__} "
                 f"master_seed={'' if master_seed is None else master_seed}\n")
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(PANEL_COLUMNS)
        for r in panel:
            row = {
                **{k: getattr(r, k) for k in PANEL_COLUMNS if hasattr(r, k)},
                "white_in_x": r.structure.white_in_x,
                "black_in_y": r.structure.black_in_y,
            }
            w.writerow([_fmt(row[c]) for c in PANEL_COLUMNS])


def _parse_enum(enum_cls, value, column, line):
    try:
        return enum_cls(value)
    except ValueError:
        raise PanelParseError(f"line {line}: bad {column} value {value!r}") from None


def _parse_int(value, column, line, optional=False):
    if value == "":
        if optional:
            return None
        raise PanelParseError(f"line {line}: missing value for {column}")
    try:
        return int(value)
    except ValueError:
        raise PanelParseError(f"line {line}: {column} must be an integer, got {value!r}") from None


def read_panel(path) -> Panel:
    """Parse a panel CSV written by :func:`write_panel`; errors name the line and column."""
    with open(path, newline="") as fh:
        first = fh.readline()
        parts = first.lstrip("#").split()
        if not first.startswith("#") or not parts or parts[0] != PANEL_SCHEMA:
            raise SchemaVersionError(f"line 1: missing '# {PANEL_SCHEMA} schema=...' header")
        fields = dict(p.split("=", 1) for p in parts[1:] if "=" in p)
        if fields.get("schema") != str(PANEL_SCHEMA_VERSION):
            raise SchemaVersionError(
                f"line 1: panel schema {fields.get('schema')!r} is not supported (expected {PANEL_SCHEMA_VERSION})")
        reader = csv.reader(fh)
        try:
            header = next(reader)
        except StopIteration:
            raise PanelParseError("line 2: missing column header") from None
        missing = [c for c in PANEL_COLUMNS if c not in header]
        if missing:
            raise PanelParseError(f"line 2: missing required column(s): {', '.join(missing)}")
        extra = [c for c in header if c not in PANEL_COLUMNS]
        if extra:
            raise PanelParseError(f"line 2: unknown column(s): {', '.join(extra)}")
        records = []
        for lineno, row in enumerate(reader, start=3):
            if len(row) != len(header):
                raise PanelParseError(f"line {lineno}: expected {len(header)} fields, got {len(row)}")
            d = dict(zip(header, row))
            try:
                structure = InformationStructure(_parse_int(d["white_in_x"], "white_in_x", lineno),
                                                 _parse_int(d["black_in_y"], "black_in_y", lineno))
            except ValueError as e:
                if isinstance(e, PanelParseError):
                    raise
                raise PanelParseError(f"line {lineno}: {e}") from None
            if d["ball_shown"] not in ("0", "1"):
                raise PanelParseError(f"line {lineno}: ball_shown must be 0 or 1")
            rec = TrialRecord(
                session_id=d["session_id"],
                subject_id=d["subject_id"],
                treatment=_parse_enum(Treatment, d["treatment"], "treatment", lineno),
                condition=_parse_enum(Condition, d["condition"], "condition", lineno),
                condition_order=_parse_enum(ConditionOrder, d["condition_order"], "condition_order", lineno),
                round=_parse_int(d["round"], "round", lineno),
                structure=structure,
                true_state=_parse_enum(State, d["true_state"], "true_state", lineno),
                ball=None if d["ball"] == "" else _parse_enum(Signal, d["ball"], "ball", lineno),
                ball_shown=d["ball_shown"] == "1",
                neighbor_id=d["neighbor_id"] or None,
                neighbor_guess=None if d["neighbor_guess"] == "" else _parse_enum(State, d["neighbor_guess"],
                                                                                 "neighbor_guess", lineno),
                choice=_parse_enum(State, d["choice"], "choice", lineno),
                reported_posterior_pct=_parse_int(d["reported_posterior_pct"], "reported_posterior_pct", lineno),
                gender=_parse_int(d["gender"], "gender", lineno),
                education_years=_parse_int(d["education_years"], "education_years", lineno),
                age=_parse_int(d["age"], "age", lineno),
                prob_stat=_parse_int(d["prob_stat"], "prob_stat", lineno),
                **{c: _parse_int(d[c], c, lineno, optional=True) for c in _OPTIONAL_INT},
            )
            try:
                rec.validate()
            except ValueError as e:
                raise PanelParseError(f"line {lineno}: {e}") from None
            records.append(rec)
    return Panel(records)


def panel_master_seed(path) -> Optional[int]:
    """Master seed recorded in a panel file's first line, if any."""
    with open(path, newline="") as fh:
        first = fh.readline()
    for part in first.lstrip("#").split():
        key, _, value = part.partition("=")
        if key == "master_seed" and value.isdigit():
            return int(value)
    return None


def write_table(df: pd.DataFrame, path, master_seed: Optional[int]) -> None:
    buf = io.StringIO()
    df.to_csv(buf, index=False, lineterminator="\n")
    with open(path, "w", newline="") as fh:
        fh.write(comment_header(master_seed))
        fh.write(buf.getvalue())


# -- run configuration -------------------------------------------------------

@dataclasses.dataclass(frozen=True)
class RunConfig:
    sim: SimConfig
    out_dir: str = "out"
    bandwidth: float = 15.0
    posterior_source: str = "reported"
    winsorize: bool = False
    include_bot_nls: bool = False
    nls_upper: float = 1.0
    tie_is_posterior_error: bool = True
    workers: int = 1
    verbose: bool = False


_BOOL = {"true": True, "1": True, "yes": True, "false": False, "0": False, "no": False}

# key -> (type, default); every documented key
CONFIG_KEYS = {
    "master_seed": (int, 0),
    "n_base": (int, 40),
    "n_demo": (int, 34),
    "n_bot": (int, 38),
    "n_ball": (int, 39),
    "pool_size": (int, 94),
    "rounds_per_condition": (int, 21),
    "stake": (float, 12.0),
    "order_randomization": (bool, True),
    "fixed_order": (str, "IND_FIRST"),
    "pool_with_replacement": (bool, True),
    "agent_kind": (str, "structural"),
    "c": (float, 0.888),
    "c_sd": (float, 0.0),
    "c_min": (float, 0.0),
    "c_max": (float, math.inf),
    "beta": (float, 0.472),
    "beta_sd": (float, 0.0),
    "beta_min": (float, 0.0),
    "beta_max": (float, math.inf),
    "beta_tilde": (float, 0.038),
    "beta_tilde_sd": (float, 0.0),
    "beta_tilde_min": (float, 0.0),
    "beta_tilde_max": (float, math.inf),
    "c_tilde": (float, None),
    "c_tilde_sd": (float, 0.0),
    "report_noise_sd": (float, 0.0),
    "beta_tilde_bot": (float, 1000.0),
    "beta_shift_prob_stat": (float, 0.0),
    "beta_tilde_shift_neighbor_prob_stat": (float, 0.0),
    "covariates": (bool, True),
    "gender_rate": (float, 0.728),
    "prob_stat_rate": (float, 0.695),
    "education_mean": (float, 14.76),
    "education_sd": (float, 1.95),
    "age_mean": (float, 20.0),
    "age_sd": (float, 1.80),
    "out": (str, "out"),
    "bandwidth": (float, 15.0),
    "posterior_source": (str, "reported"),
    "winsorize": (bool, False),
    "include_bot_nls": (bool, False),
    "nls_upper": (float, 1.0),
    "tie_is_posterior_error": (bool, True),
    "workers": (int, 1),
    "verbose": (bool, False),
}


def _convert(key: str, raw: str, lineno: Optional[int] = None):
    typ = CONFIG_KEYS[key][0]
    where = f"line {lineno}: " if lineno else ""
    try:
        if typ is bool:
            return _BOOL[raw.strip().lower()]
        return typ(raw.strip())
    except (KeyError, ValueError):
        raise ConfigError(f"{where}bad value for {key}: {raw!r}") from None


def parse_config_text(text: str) -> dict:
    values = {}
    for lineno, line in enumerate(text.splitlines(), start=1):
        line = line.split("#", 1)[0].strip()
        if not line:
            continue
        if "=" not in line:
            raise ConfigError(f"line {lineno}: expected key=value, got {line!r}")
        key, raw = (s.strip() for s in line.split("=", 1))
        if key not in CONFIG_KEYS:
            raise ConfigError(f"line {lineno}: unknown key {key!r}")
        if key in values:
            raise ConfigError(f"line {lineno}: duplicate key {key!r}")
        values[key] = _convert(key, raw, lineno)
    return values


def build_run_config(values: dict) -> RunConfig:
    """Turn parsed key/values (missing keys take defaults) into a validated RunConfig."""
    unknown = set(values) - set(CONFIG_KEYS)
    if unknown:
        raise ConfigError(f"unknown key(s): {', '.join(sorted(unknown))}")
    v = {k: d for k, (_, d) in CONFIG_KEYS.items()}
    v.update(values)
    try:
        kind = AgentKind(v["agent_kind"])
        order = ConditionOrder(v["fixed_order"])
    except ValueError as e:
        raise ConfigError(str(e)) from None
    if v["posterior_source"] not in ("reported", "bayes"):
        raise ConfigError("posterior_source must be 'reported' or 'bayes'")
    if not v["bandwidth"] > 0:
        raise ConfigError("bandwidth must be positive")
    if not v["nls_upper"] > 0:
        raise ConfigError("nls_upper must be positive")
    population = Population(
        c=ParamDist(v["c"], v["c_sd"], v["c_min"], v["c_max"]),
        beta=ParamDist(v["beta"], v["beta_sd"], v["beta_min"], v["beta_max"]),
        beta_tilde=ParamDist(v["beta_tilde"], v["beta_tilde_sd"], v["beta_tilde_min"], v["beta_tilde_max"]),
        c_tilde=None if v["c_tilde"] is None else ParamDist(v["c_tilde"], v["c_tilde_sd"]),
        report_noise_sd=v["report_noise_sd"],
        beta_tilde_bot=v["beta_tilde_bot"],
        kind=kind,
        beta_shift_prob_stat=v["beta_shift_prob_stat"],
        beta_tilde_shift_neighbor_prob_stat=v["beta_tilde_shift_neighbor_prob_stat"],
    )
    covariates = Covariates(v["gender_rate"], v["prob_stat_rate"], v["education_mean"], v["education_sd"],
                            v["age_mean"], v["age_sd"]) if v["covariates"] else None
    n_subjects = {t: n for t, n in ((Treatment.BASE, v["n_base"]), (Treatment.DEMOGRAPHICS, v["n_demo"]),
                                    (Treatment.BOT, v["n_bot"]), (Treatment.BALL, v["n_ball"])) if n > 0}
    if any(n < 0 for n in (v["n_base"], v["n_demo"], v["n_bot"], v["n_ball"])):
        raise ConfigError("subject counts must be non-negative")
    if not n_subjects:
        raise ConfigError("at least one treatment needs subjects")
    try:
        sim = SimConfig(
            n_subjects=n_subjects,
            population=population,
            covariates=covariates,
            stake=v["stake"],
            rounds_per_condition=v["rounds_per_condition"],
            master_seed=v["master_seed"],
            order_randomization=v["order_randomization"],
            fixed_order=order,
            pool_size=v["pool_size"],
            pool_with_replacement=v["pool_with_replacement"],
        )
    except ValueError as e:
        raise ConfigError(str(e)) from None
    sim.validate()
    return RunConfig(
        sim=sim,
        out_dir=v["out"],
        bandwidth=v["bandwidth"],
        posterior_source=v["posterior_source"],
        winsorize=v["winsorize"],
        include_bot_nls=v["include_bot_nls"],
        nls_upper=v["nls_upper"],
        tie_is_posterior_error=v["tie_is_posterior_error"],
        workers=v["workers"],
        verbose=v["verbose"],
    )


def load_config(path: Optional[str], overrides: Optional[dict] = None) -> RunConfig:
    values = {}
    if path is not None:
        if not os.path.exists(path):
            raise ConfigError(f"config file not found: {path}")
        with open(path) as fh:
            values = parse_config_text(fh.read())
    values.update(overrides or {})
    return build_run_config(values)
