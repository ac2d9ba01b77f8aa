"""Two-box urn environment: states, ball signals, information structures.

Likelihoods and the Bayesian posterior are computed with
:class:`fractions.Fraction` so they can serve as exact references; callers
that want floats use :func:`bayes_posterior`.
"""
from __future__ import annotations

import dataclasses
import enum
from fractions import Fraction
from typing import TYPE_CHECKING, Optional

if TYPE_CHECKING:
    from .panel import TrialRecord

BALLS_PER_BOX = 10
THETA_COUNTS = (5, 6, 7, 8, 9, 10)


class State(str, enum.Enum):
    X = "X"
    Y = "Y"

    def other(self) -> "State":
        return State.Y if self is State.X else State.X


class Signal(str, enum.Enum):
    """Ball colour. White is signal ``x``, black is signal ``y``."""

    WHITE = "W"
    BLACK = "B"

    def other(self) -> "Signal":
        return Signal.BLACK if self is Signal.WHITE else Signal.WHITE


class ImpossibleSignalError(ValueError):
    """Both boxes assign probability zero to the observed signal."""


@dataclasses.dataclass(frozen=True, order=True)
class InformationStructure:
    """Ball counts: white balls in box X and black balls in box Y (out of 10)."""

    white_in_x: int
    black_in_y: int

    def __post_init__(self):
        for name in ("white_in_x", "black_in_y"):
            v = getattr(self, name)
            if not isinstance(v, int) or isinstance(v, bool) or not 0 <= v <= BALLS_PER_BOX:
                raise ValueError(f"{name} must be an integer in [0, {BALLS_PER_BOX}], got {v!r}")

    @classmethod
    def from_thetas(cls, theta_x: float, theta_y: float) -> "InformationStructure":
        return cls(round(theta_x * BALLS_PER_BOX), round(theta_y * BALLS_PER_BOX))

    @property
    def theta_x(self) -> float:
        return self.white_in_x / BALLS_PER_BOX

    @property
    def theta_y(self) -> float:
        return self.black_in_y / BALLS_PER_BOX

    @property
    def is_canonical(self) -> bool:
        return self.white_in_x >= self.black_in_y and self.black_in_y >= THETA_COUNTS[0]

    @property
    def is_tie(self) -> bool:
        """True when both boxes hold the same number of white balls."""
        return self.white_in_x == BALLS_PER_BOX - self.black_in_y

    def swapped(self) -> "InformationStructure":
        """Structure after exchanging box labels and ball colours."""
        return InformationStructure(self.black_in_y, self.white_in_x)

    def likelihood(self, signal: Signal, state: State) -> Fraction:
        return likelihood(self, signal, state)

    def __str__(self):
        return f"({self.theta_x:.1f},{self.theta_y:.1f})"


def likelihood(structure: InformationStructure, signal: Signal, state: State) -> Fraction:
    """Exact P(signal | state)."""
    white_x = structure.white_in_x
    white_y = BALLS_PER_BOX - structure.black_in_y
    white = white_x if state is State.X else white_y
    count = white if signal is Signal.WHITE else BALLS_PER_BOX - white
    return Fraction(count, BALLS_PER_BOX)


def bayes_posterior_exact(structure: InformationStructure, signal: Signal) -> Fraction:
    """P(X | signal) under the uniform prior, as an exact fraction."""
    px = likelihood(structure, signal, State.X)
    py = likelihood(structure, signal, State.Y)
    if px + py == 0:
        raise ImpossibleSignalError(f"signal {signal.name} impossible under {structure}")
    return px / (px + py)


def bayes_posterior(structure: InformationStructure, signal: Signal) -> float:
    return float(bayes_posterior_exact(structure, signal))


def rational_choice(structure: InformationStructure, signal: Signal) -> Optional[State]:
    """Box holding strictly more balls of the observed colour, or None on a tie."""
    px = likelihood(structure, signal, State.X)
    py = likelihood(structure, signal, State.Y)
    if px > py:
        return State.X
    if py > px:
        return State.Y
    return None


def enumerate_structures() -> list[InformationStructure]:
    """The 21 canonical structures with theta_x >= theta_y, lexicographic."""
    return [
        InformationStructure(wx, by)
        for wx in THETA_COUNTS
        for by in THETA_COUNTS
        if wx >= by
    ]


def needs_flip(record: "TrialRecord") -> bool:
    from .panel import Condition

    if record.condition is Condition.INDIVIDUAL:
        return record.ball is Signal.BLACK
    return record.neighbor_guess is State.Y


def canonicalize(record: "TrialRecord") -> "TrialRecord":
    """Relabel boxes so the individual signal is white / the social guess is X.

    Box X and box Y trade places and ball colours are exchanged, so the
    structure (theta_x, theta_y) becomes (theta_y, theta_x). Reported
    confidence refers to the chosen box and needs no change.
    """
    if not needs_flip(record):
        return record

    def flip(v):
        return None if v is None else v.other()

    return dataclasses.replace(
        record,
        structure=record.structure.swapped(),
        true_state=record.true_state.other(),
        ball=flip(record.ball),
        neighbor_guess=flip(record.neighbor_guess),
        choice=record.choice.other(),
        latent_posterior=None if record.latent_posterior is None else 1.0 - record.latent_posterior,
    )
