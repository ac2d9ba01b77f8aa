"""Behavioural model: biased (Grether) updating followed by logistic choice.

In the social condition a subject sees a neighbour's guess rather than a
ball. The guess is an informative signal whose likelihoods depend on how
the subject believes the neighbour behaves, i.e. on the believed precision
``beta_tilde`` and believed updating exponent ``c_tilde``.
"""
from __future__ import annotations

import dataclasses
import enum
import math
from typing import Optional

import numpy as np
from scipy.special import expit

from .env import (
    InformationStructure,
    Signal,
    State,
    bayes_posterior,
    likelihood,
    rational_choice,
)
from .panel import Condition, Treatment

DEFAULT_STAKE = 12.0


class AgentKind(str, enum.Enum):
    STRUCTURAL = "structural"
    RATIONAL = "rational"
    BOT = "bot"


class DegenerateInputError(ValueError):
    pass


@dataclasses.dataclass(frozen=True)
class AgentParams:
    """Behavioural parameters of one agent.

    ``beta`` is measured per dollar of stake. ``beta_tilde_bot`` is the
    precision the agent attributes to the announced bot rule; the default
    makes the bot effectively rational.
    """

    c: float = 1.0
    beta: float = 0.472
    beta_tilde: float = 0.038
    c_tilde: Optional[float] = None  # None means "same as c"
    report_noise_sd: float = 0.0
    kind: AgentKind = AgentKind.STRUCTURAL
    beta_tilde_bot: float = 1000.0

    def __post_init__(self):
        for name in ("c", "beta", "beta_tilde", "report_noise_sd", "beta_tilde_bot"):
            v = getattr(self, name)
            if not (v >= 0 and (math.isfinite(v) or name in ("beta", "beta_tilde", "beta_tilde_bot"))):
                raise ValueError(f"{name} must be finite and non-negative, got {v!r}")
        if self.c_tilde is not None and not (self.c_tilde >= 0 and math.isfinite(self.c_tilde)):
            raise ValueError(f"c_tilde must be finite and non-negative, got {self.c_tilde!r}")

    @property
    def believed_c(self) -> float:
        return self.c if self.c_tilde is None else self.c_tilde

    @classmethod
    def rational(cls) -> "AgentParams":
        return cls(c=1.0, beta=math.inf, beta_tilde=math.inf, kind=AgentKind.RATIONAL)


def grether(p_x: float, p_y: float, c: float) -> float:
    """p_x**c / (p_x**c + p_y**c) with 0**0 == 1."""
    if p_x == 0 and p_y == 0:
        raise DegenerateInputError("both likelihoods are zero")
    if c == 0:
        return 0.5
    if p_x == 0:
        return 0.0
    if p_y == 0:
        return 1.0
    # ratio form avoids overflow for large c
    return 1.0 / (1.0 + (p_y / p_x) ** c)


def grether_posterior(structure: InformationStructure, signal: Signal, c: float) -> float:
    """Subjective P(X | ball) for updating exponent ``c`` (c=1 is Bayes)."""
    return grether(
        float(likelihood(structure, signal, State.X)),
        float(likelihood(structure, signal, State.Y)),
        c,
    )


def logit_choice_prob(beta, prob_x, stake: float = DEFAULT_STAKE):
    """Probability of choosing X: 1 / (1 + exp(-beta (2 prob_x - 1) stake)).

    Accepts scalars or arrays. ``beta = inf`` gives the best response, with
    0.5 at indifference. Large finite beta saturates to exactly 0 or 1.
    """
    z = (2.0 * np.asarray(prob_x, dtype=float) - 1.0) * stake
    if np.isinf(beta):
        out = np.where(z > 0, 1.0, np.where(z < 0, 0.0, 0.5))
    else:
        out = expit(beta * z)
    return float(out) if np.ndim(out) == 0 else out


def believed_neighbor_choice_prob(
    structure: InformationStructure,
    signal: Signal,
    beta_tilde: float,
    c_tilde: float,
    stake: float = DEFAULT_STAKE,
) -> float:
    """Believed probability that a neighbour who saw ``signal`` guesses X."""
    return logit_choice_prob(beta_tilde, grether_posterior(structure, signal, c_tilde), stake)


@dataclasses.dataclass(frozen=True)
class GuessLikelihoods:
    """Believed probabilities of each neighbour guess under each state."""

    x_given_X: float
    y_given_X: float
    x_given_Y: float
    y_given_Y: float

    def __iter__(self):
        return iter((self.x_given_X, self.y_given_X, self.x_given_Y, self.y_given_Y))

    def for_guess(self, guess: State) -> tuple[float, float]:
        """(P(guess | X), P(guess | Y))."""
        if guess is State.X:
            return self.x_given_X, self.x_given_Y
        return self.y_given_X, self.y_given_Y


def social_signal_likelihoods(
    structure: InformationStructure,
    beta_tilde: float,
    c_tilde: float,
    stake: float = DEFAULT_STAKE,
) -> GuessLikelihoods:
    """Mix the ball likelihoods with the believed neighbour choice rule."""
    q_white = believed_neighbor_choice_prob(structure, Signal.WHITE, beta_tilde, c_tilde, stake)
    q_black = believed_neighbor_choice_prob(structure, Signal.BLACK, beta_tilde, c_tilde, stake)
    wx = float(likelihood(structure, Signal.WHITE, State.X))
    wy = float(likelihood(structure, Signal.WHITE, State.Y))
    bx, by = 1.0 - wx, 1.0 - wy
    x_given_X = q_white * wx + q_black * bx
    x_given_Y = q_white * wy + q_black * by
    y_given_X = (1.0 - q_white) * wx + (1.0 - q_black) * bx
    y_given_Y = (1.0 - q_white) * wy + (1.0 - q_black) * by
    return GuessLikelihoods(x_given_X, y_given_X, x_given_Y, y_given_Y)


def social_posterior(
    structure: InformationStructure,
    guess: State,
    c: float,
    beta_tilde: float,
    c_tilde: Optional[float] = None,
    stake: float = DEFAULT_STAKE,
) -> float:
    """Subjective P(X | neighbour guess); ``c_tilde`` defaults to ``c``."""
    lik = social_signal_likelihoods(structure, beta_tilde, c if c_tilde is None else c_tilde, stake)
    return grether(*lik.for_guess(guess), c)


def bot_choice(structure: InformationStructure, signal: Signal, rng: np.random.Generator) -> State:
    """Majority-colour rule; a fair coin when the boxes are identical."""
    choice = rational_choice(structure, signal)
    if choice is None:
        return State.X if rng.random() < 0.5 else State.Y
    return choice


def subjective_posterior(
    params: AgentParams,
    treatment: Treatment,
    condition: Condition,
    structure: InformationStructure,
    ball: Optional[Signal] = None,
    neighbor_guess: Optional[State] = None,
    stake: float = DEFAULT_STAKE,
) -> float:
    """The agent's P(X) given what the round shows them."""
    if params.kind is AgentKind.RATIONAL:
        if condition is Condition.INDIVIDUAL or treatment is Treatment.BALL:
            return bayes_posterior(structure, ball)
        return social_posterior(structure, neighbor_guess, 1.0, math.inf, 1.0, stake)

    if condition is Condition.INDIVIDUAL:
        return grether_posterior(structure, ball, params.c)
    if treatment is Treatment.BALL:
        # the guess adds nothing once the ball is visible; contradicting guesses are ignored
        return grether_posterior(structure, ball, params.c)
    if treatment is Treatment.BOT:
        # announced rule is the majority rule, i.e. an unbiased updater
        return social_posterior(structure, neighbor_guess, params.c, params.beta_tilde_bot, 1.0, stake)
    return social_posterior(structure, neighbor_guess, params.c, params.beta_tilde, params.believed_c, stake)
