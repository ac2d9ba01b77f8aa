"""Trial records and the panel container shared by simulation, I/O and estimation."""
from __future__ import annotations

import dataclasses
import enum
from collections import defaultdict
from functools import cached_property
from typing import Iterable, Iterator, Optional

from .env import InformationStructure, Signal, State

BOT_ID = "BOT"


class Treatment(str, enum.Enum):
    BASE = "BASE"
    DEMOGRAPHICS = "DEMO"
    BOT = "BOT"
    BALL = "BALL"
    # pre-recorded neighbours; they only play the individual condition
    POOL = "POOL"


SUBJECT_TREATMENTS = (Treatment.BASE, Treatment.DEMOGRAPHICS, Treatment.BOT, Treatment.BALL)


class Condition(str, enum.Enum):
    INDIVIDUAL = "IND"
    SOCIAL = "SOC"


class ConditionOrder(str, enum.Enum):
    INDIVIDUAL_FIRST = "IND_FIRST"
    SOCIAL_FIRST = "SOC_FIRST"

    @property
    def first(self) -> Condition:
        return Condition.INDIVIDUAL if self is ConditionOrder.INDIVIDUAL_FIRST else Condition.SOCIAL


class MalformedRecordError(ValueError):
    pass


@dataclasses.dataclass(frozen=True)
class TrialRecord:
    session_id: str
    subject_id: str
    treatment: Treatment
    condition: Condition
    condition_order: ConditionOrder
    round: int
    structure: InformationStructure
    true_state: State
    ball: Optional[Signal]
    ball_shown: bool
    neighbor_id: Optional[str]
    neighbor_guess: Optional[State]
    choice: State
    reported_posterior_pct: int
    gender: int
    education_years: int
    age: int
    prob_stat: int
    neighbor_gender: Optional[int] = None
    neighbor_education_years: Optional[int] = None
    neighbor_age: Optional[int] = None
    neighbor_prob_stat: Optional[int] = None
    # simulator-side subjective P(X); never serialized
    latent_posterior: Optional[float] = dataclasses.field(default=None, compare=False, repr=False)

    def validate(self) -> None:
        """Raise MalformedRecordError if the condition-specific fields are inconsistent."""
        if not 0 <= self.reported_posterior_pct <= 100:
            raise MalformedRecordError(f"reported_posterior_pct out of range: {self.reported_posterior_pct}")
        if self.condition is Condition.INDIVIDUAL:
            if self.ball is None:
                raise MalformedRecordError("individual record without a ball")
            if self.neighbor_guess is not None or self.neighbor_id is not None:
                raise MalformedRecordError("individual record carries neighbour fields")
        else:
            if self.treatment is Treatment.POOL:
                raise MalformedRecordError("pool records must be individual-condition")
            if self.neighbor_guess is None:
                raise MalformedRecordError("social record without a neighbour guess")
            if self.treatment is Treatment.BALL and self.ball is None:
                raise MalformedRecordError("ball-treatment social record without the neighbour's ball")
            if self.ball_shown != (self.treatment is Treatment.BALL):
                raise MalformedRecordError("ball_shown must be set exactly for ball-treatment social records")

    @property
    def reported_prob_x(self) -> float:
        """Reported P(X) in [0, 1], recovered from confidence in the chosen box."""
        pct = self.reported_posterior_pct
        return (pct if self.choice is State.X else 100 - pct) / 100.0

    @property
    def is_pool(self) -> bool:
        return self.treatment is Treatment.POOL


class Panel:
    """Ordered collection of trial records with subject and cell indices."""

    def __init__(self, records: Iterable[TrialRecord]):
        self.records: tuple[TrialRecord, ...] = tuple(records)

    def __len__(self):
        return len(self.records)

    def __iter__(self) -> Iterator[TrialRecord]:
        return iter(self.records)

    def __getitem__(self, i):
        return self.records[i]

    def __eq__(self, other):
        return isinstance(other, Panel) and self.records == other.records

    def __repr__(self):
        return f"Panel({len(self.records)} records, {len(self.by_subject)} subjects)"

    @cached_property
    def by_subject(self) -> dict[str, list[TrialRecord]]:
        out: dict[str, list[TrialRecord]] = defaultdict(list)
        for r in self.records:
            out[r.subject_id].append(r)
        return dict(out)

    @cached_property
    def by_cell(self) -> dict[tuple[Treatment, Condition], list[TrialRecord]]:
        out: dict[tuple[Treatment, Condition], list[TrialRecord]] = defaultdict(list)
        for r in self.records:
            out[(r.treatment, r.condition)].append(r)
        return dict(out)

    @property
    def session_ids(self) -> list[str]:
        return list(dict.fromkeys(r.session_id for r in self.records))

    @property
    def pool(self) -> "Panel":
        return Panel(r for r in self.records if r.is_pool)

    @property
    def subjects_only(self) -> "Panel":
        return Panel(r for r in self.records if not r.is_pool)

    def select(self, treatment=None, condition=None) -> "Panel":
        """Filter by treatment(s) and/or condition; arguments accept a value or a collection."""

        def as_set(v):
            if v is None:
                return None
            if isinstance(v, (Treatment, Condition)):
                return {v}
            return set(v)

        ts, cs = as_set(treatment), as_set(condition)
        return Panel(
            r for r in self.records
            if (ts is None or r.treatment in ts) and (cs is None or r.condition in cs)
        )

    def check_neighbors(self) -> None:
        """Every social record must point at a pool subject present in the panel or the bot."""
        pool_ids = {r.subject_id for r in self.records if r.is_pool}
        for r in self.records:
            if r.condition is Condition.SOCIAL and r.neighbor_id != BOT_ID and r.neighbor_id not in pool_ids:
                raise MalformedRecordError(f"unresolved neighbour {r.neighbor_id!r} for subject {r.subject_id}")

    def to_frame(self):
        import pandas as pd

        rows = []
        for r in self.records:
            rows.append({
                "session_id": r.session_id,
                "subject_id": r.subject_id,
                "treatment": r.treatment.value,
                "condition": r.condition.value,
                "condition_order": r.condition_order.value,
                "round": r.round,
                "white_in_x": r.structure.white_in_x,
                "black_in_y": r.structure.black_in_y,
                "true_state": r.true_state.value,
                "ball": None if r.ball is None else r.ball.value,
                "ball_shown": r.ball_shown,
                "neighbor_id": r.neighbor_id,
                "neighbor_guess": None if r.neighbor_guess is None else r.neighbor_guess.value,
                "choice": r.choice.value,
                "reported_posterior_pct": r.reported_posterior_pct,
                "gender": r.gender,
                "education_years": r.education_years,
                "age": r.age,
                "prob_stat": r.prob_stat,
                "neighbor_gender": r.neighbor_gender,
                "neighbor_education_years": r.neighbor_education_years,
                "neighbor_age": r.neighbor_age,
                "neighbor_prob_stat": r.neighbor_prob_stat,
            })
        return pd.DataFrame(rows)
