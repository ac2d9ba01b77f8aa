import math

import numpy as np
import pytest
from hypothesis import given, strategies as st
from mpmath import mp, mpf

from obslearn.agents import (
    AgentParams,
    DegenerateInputError,
    believed_neighbor_choice_prob,
    bot_choice,
    grether,
    grether_posterior,
    logit_choice_prob,
    social_posterior,
    social_signal_likelihoods,
    subjective_posterior,
)
from obslearn.env import InformationStructure, Signal, State, bayes_posterior_exact, enumerate_structures
from obslearn.panel import Condition, Treatment

S76 = InformationStructure.from_thetas(0.7, 0.6)

# golden values from a 40-digit mpmath evaluation at c = 0.888, beta_tilde = 0.038
GOLD_GRETHER = 0.62173967324823781
GOLD_Q_WHITE = 0.52772816781703867
GOLD_Q_BLACK = 0.46603530034605758
GOLD_X_GIVEN_X = 0.50922030757574434
GOLD_X_GIVEN_Y = 0.49071244733445001
GOLD_SOCIAL_X = 0.50821824103349786


def mp_oracle(c, bt, wx, wy, stake=12):
    mp.dps = 40
    c, bt = mpf(c), mpf(bt)
    wx, wy = mpf(wx), mpf(wy)

    def gr(a, b):
        return a**c / (a**c + b**c)

    def lg(p):
        return 1 / (1 + mp.exp(-bt * (2 * p - 1) * stake))

    qw, qb = lg(gr(wx, wy)), lg(gr(1 - wx, 1 - wy))
    xx = qw * wx + qb * (1 - wx)
    xy = qw * wy + qb * (1 - wy)
    return gr(wx, wy), qw, qb, xx, xy, gr(xx, xy)


def test_mpmath_oracle_reproduces_frozen_values():
    vals = mp_oracle("0.888", "0.038", "0.7", "0.4")
    frozen = (GOLD_GRETHER, GOLD_Q_WHITE, GOLD_Q_BLACK, GOLD_X_GIVEN_X, GOLD_X_GIVEN_Y, GOLD_SOCIAL_X)
    for v, g in zip(vals, frozen):
        assert float(v) == pytest.approx(g, abs=1e-15)


def test_grether_golden():
    assert grether_posterior(S76, Signal.WHITE, 0.888) == pytest.approx(GOLD_GRETHER, abs=1e-12)


def test_logit_golden():
    assert logit_choice_prob(0.472, 0.75, 12) == pytest.approx(0.944380746988452, abs=1e-12)


def test_neighbor_choice_golden():
    q = believed_neighbor_choice_prob(S76, Signal.WHITE, 0.038, 0.888)
    assert q == pytest.approx(GOLD_Q_WHITE, abs=1e-12)
    assert believed_neighbor_choice_prob(S76, Signal.BLACK, 0.038, 0.888) == pytest.approx(GOLD_Q_BLACK, abs=1e-12)


def test_social_likelihoods_golden():
    lik = social_signal_likelihoods(S76, 0.038, 0.888)
    assert lik.x_given_X == pytest.approx(GOLD_X_GIVEN_X, abs=1e-12)
    assert lik.x_given_Y == pytest.approx(GOLD_X_GIVEN_Y, abs=1e-12)
    assert lik.x_given_X + lik.y_given_X == pytest.approx(1.0, abs=1e-15)
    assert lik.x_given_Y + lik.y_given_Y == pytest.approx(1.0, abs=1e-15)


def test_social_posterior_golden():
    assert social_posterior(S76, State.X, 0.888, 0.038) == pytest.approx(GOLD_SOCIAL_X, abs=1e-12)


@pytest.mark.parametrize("s", enumerate_structures(), ids=str)
def test_grether_c1_is_bayes(s):
    for sig in Signal:
        assert abs(grether_posterior(s, sig, 1.0) - float(bayes_posterior_exact(s, sig))) < 1e-12


def test_grether_edge_cases():
    assert grether(0.3, 0.0, 2.0) == 1.0
    assert grether(0.0, 0.3, 2.0) == 0.0
    assert grether(0.3, 0.7, 0.0) == 0.5
    assert grether(0.0, 0.7, 0.0) == 0.5  # 0**0 == 1
    with pytest.raises(DegenerateInputError):
        grether(0.0, 0.0, 1.0)
    # large c saturates without overflow
    assert grether(0.7, 0.4, 1e6) == 1.0


@given(st.floats(0.01, 0.99), st.floats(0.01, 0.99), st.floats(0.0, 5.0))
def test_grether_log_odds_scale(px, py, c):
    p = grether(px, py, c)
    assert 0.0 <= p <= 1.0
    if 1e-6 < p < 1 - 1e-6:
        assert math.log(p / (1 - p)) == pytest.approx(c * math.log(px / py), abs=1e-7)


def test_logit_limits():
    assert logit_choice_prob(math.inf, 0.6) == 1.0
    assert logit_choice_prob(math.inf, 0.4) == 0.0
    assert logit_choice_prob(math.inf, 0.5) == 0.5
    assert logit_choice_prob(0.0, 0.9) == 0.5
    assert logit_choice_prob(1e6, 0.9) == 1.0
    arr = logit_choice_prob(0.472, np.array([0.25, 0.5, 0.75]))
    assert arr.shape == (3,)
    assert arr[0] + arr[2] == pytest.approx(1.0)


@given(st.floats(0.0, 10.0), st.floats(0.0, 1.0), st.floats(0.0, 1.0))
def test_logit_monotone(beta, p1, p2):
    lo, hi = sorted((p1, p2))
    assert logit_choice_prob(beta, lo) <= logit_choice_prob(beta, hi)


def test_rational_neighbor_reduces_to_ball():
    # a fully rational believed neighbour makes the guess as informative as the ball
    for s in enumerate_structures():
        if s.is_tie:
            continue
        px, py = social_signal_likelihoods(s, math.inf, 1.0).for_guess(State.X)
        assert px == pytest.approx(float(s.likelihood(Signal.WHITE, State.X)))
        assert py == pytest.approx(float(s.likelihood(Signal.WHITE, State.Y)))


def test_uninformative_neighbor():
    for s in enumerate_structures():
        assert social_posterior(s, State.X, 0.888, 0.0) == pytest.approx(0.5)


@given(st.floats(0.001, 5.0), st.floats(0.0, 0.5))
def test_social_posterior_between_half_and_ball(c, beta_tilde):
    s = S76
    p = social_posterior(s, State.X, c, beta_tilde, 1.0)
    assert 0.5 - 1e-12 <= p <= grether_posterior(s, Signal.WHITE, c) + 1e-12


def test_bot_choice():
    rng = np.random.default_rng(0)
    assert bot_choice(S76, Signal.WHITE, rng) is State.X
    tie = InformationStructure.from_thetas(0.5, 0.5)
    picks = [bot_choice(tie, Signal.WHITE, rng) for _ in range(2000)]
    assert 0.45 < np.mean([p is State.X for p in picks]) < 0.55


def test_subjective_posterior_dispatch():
    params = AgentParams(c=0.888, beta=0.472, beta_tilde=0.038)
    base = subjective_posterior(params, Treatment.BASE, Condition.SOCIAL, S76, neighbor_guess=State.X)
    assert base == pytest.approx(social_posterior(S76, State.X, 0.888, 0.038))
    ind = subjective_posterior(params, Treatment.BASE, Condition.INDIVIDUAL, S76, ball=Signal.WHITE)
    assert ind == pytest.approx(GOLD_GRETHER)
    ball = subjective_posterior(params, Treatment.BALL, Condition.SOCIAL, S76, ball=Signal.WHITE,
                                neighbor_guess=State.X)
    assert ball == pytest.approx(GOLD_GRETHER)
    bot = subjective_posterior(params, Treatment.BOT, Condition.SOCIAL, S76, neighbor_guess=State.X)
    assert bot == pytest.approx(social_posterior(S76, State.X, 0.888, 1000.0, 1.0))
    rational = subjective_posterior(AgentParams.rational(), Treatment.BASE, Condition.SOCIAL, S76,
                                    neighbor_guess=State.X)
    assert rational == pytest.approx(7 / 11)


@pytest.mark.parametrize("field", ["c", "report_noise_sd"])
def test_params_validation(field):
    with pytest.raises(ValueError):
        AgentParams(**{field: -0.1})
    with pytest.raises(ValueError):
        AgentParams(**{field: math.nan})
