"""Seeded generator of synthetic experiment panels.

Every subject draws from its own Philox stream keyed by
``(master_seed, treatment, subject index)``, so the panel does not depend
on generation order or on the number of worker threads.
"""
from __future__ import annotations

import dataclasses
import math
from concurrent.futures import ThreadPoolExecutor
from typing import Optional

import numpy as np

from .agents import (
    DEFAULT_STAKE,
    AgentKind,
    AgentParams,
    bot_choice,
    logit_choice_prob,
    subjective_posterior,
)
from .env import InformationStructure, Signal, State, enumerate_structures, likelihood
from .panel import (
    BOT_ID,
    SUBJECT_TREATMENTS,
    Condition,
    ConditionOrder,
    Panel,
    TrialRecord,
    Treatment,
)

_STREAM_TAG = {
    Treatment.POOL: 0,
    Treatment.BASE: 1,
    Treatment.DEMOGRAPHICS: 2,
    Treatment.BOT: 3,
    Treatment.BALL: 4,
}
_ORDER_TAG = 100


class ConfigError(ValueError):
    pass


@dataclasses.dataclass(frozen=True)
class ParamDist:
    """Normal draw clipped to [low, high]; sd=0 is a point mass."""

    mean: float
    sd: float = 0.0
    low: float = 0.0
    high: float = math.inf

    def draw(self, rng: np.random.Generator) -> float:
        if self.sd == 0:
            return self.mean
        return float(np.clip(rng.normal(self.mean, self.sd), self.low, self.high))


@dataclasses.dataclass(frozen=True)
class Population:
    """Distribution of behavioural parameters across subjects.

    The two shift terms plant covariate effects: ``beta_shift_prob_stat`` is
    added to the own precision of subjects with a prob/stat course, and
    ``beta_tilde_shift_neighbor_prob_stat`` to the believed precision of a
    prob/stat neighbour when the neighbour's demographics are visible.
    """

    c: ParamDist = ParamDist(0.888)
    beta: ParamDist = ParamDist(0.472)
    beta_tilde: ParamDist = ParamDist(0.038)
    c_tilde: Optional[ParamDist] = None
    report_noise_sd: float = 0.0
    beta_tilde_bot: float = 1000.0
    kind: AgentKind = AgentKind.STRUCTURAL
    beta_shift_prob_stat: float = 0.0
    beta_tilde_shift_neighbor_prob_stat: float = 0.0

    def draw(self, rng: np.random.Generator, prob_stat: int = 0) -> AgentParams:
        if self.kind is AgentKind.RATIONAL:
            return AgentParams.rational()
        c = self.c.draw(rng)
        beta = self.beta.draw(rng) + self.beta_shift_prob_stat * prob_stat
        beta_tilde = self.beta_tilde.draw(rng)
        c_tilde = None if self.c_tilde is None else self.c_tilde.draw(rng)
        return AgentParams(
            c=c,
            beta=beta,
            beta_tilde=beta_tilde,
            c_tilde=c_tilde,
            report_noise_sd=self.report_noise_sd,
            kind=self.kind,
            beta_tilde_bot=self.beta_tilde_bot,
        )


@dataclasses.dataclass(frozen=True)
class Covariates:
    """Subject characteristics; defaults are the pooled summary statistics of the lab sample."""

    gender_rate: float = 0.728
    prob_stat_rate: float = 0.695
    education_mean: float = 14.76
    education_sd: float = 1.95
    age_mean: float = 20.0
    age_sd: float = 1.80

    def draw(self, rng: np.random.Generator) -> tuple[int, int, int, int]:
        """(female, education_years, age, prob_stat)."""
        female = int(rng.random() < self.gender_rate)
        prob_stat = int(rng.random() < self.prob_stat_rate)
        education = int(np.clip(np.rint(rng.normal(self.education_mean, self.education_sd)), 8, 30))
        age = int(np.clip(np.rint(rng.normal(self.age_mean, self.age_sd)), 18, 80))
        return female, education, age, prob_stat


@dataclasses.dataclass(frozen=True)
class SimConfig:
    n_subjects: dict = dataclasses.field(default_factory=lambda: {
        Treatment.BASE: 40,
        Treatment.DEMOGRAPHICS: 34,
        Treatment.BOT: 38,
        Treatment.BALL: 39,
    })
    population: Population = Population()
    covariates: Optional[Covariates] = Covariates()
    stake: float = DEFAULT_STAKE
    rounds_per_condition: int = 21
    master_seed: int = 0
    order_randomization: bool = True
    fixed_order: ConditionOrder = ConditionOrder.INDIVIDUAL_FIRST
    pool_size: int = 94
    pool_with_replacement: bool = True

    def validate(self) -> None:
        n_structures = len(enumerate_structures())
        if self.rounds_per_condition < 1 or self.rounds_per_condition % n_structures:
            raise ConfigError(f"rounds_per_condition must be a positive multiple of {n_structures}")
        if self.pool_size < 1:
            raise ConfigError("pool_size must be at least 1")
        if self.stake <= 0:
            raise ConfigError("stake must be positive")
        if not 0 <= self.master_seed < 2**64:
            raise ConfigError("master_seed must be a 64-bit unsigned integer")
        for t, n in self.n_subjects.items():
            if t not in SUBJECT_TREATMENTS:
                raise ConfigError(f"unknown treatment {t!r}")
            if n < 1:
                raise ConfigError(f"n_subjects for {t.value} must be positive")
        if Treatment.DEMOGRAPHICS in self.n_subjects and self.covariates is None:
            raise ConfigError("the demographics treatment needs covariate distributions")
        if self.covariates is not None:
            cv = self.covariates
            for name in ("gender_rate", "prob_stat_rate"):
                if not 0 <= getattr(cv, name) <= 1:
                    raise ConfigError(f"{name} must lie in [0, 1]")
            if cv.education_sd < 0 or cv.age_sd < 0:
                raise ConfigError("covariate standard deviations must be non-negative")
        if self.population.report_noise_sd < 0:
            raise ConfigError("report_noise_sd must be non-negative")
        if not self.pool_with_replacement and self.pool_size < self.rounds_per_condition:
            raise ConfigError("sampling neighbours without replacement needs pool_size >= rounds_per_condition")


def _stream(master_seed: int, tag: int, index: int) -> np.random.Generator:
    seq = np.random.SeedSequence(entropy=master_seed, spawn_key=(tag, index))
    return np.random.Generator(np.random.Philox(seq))


def report_posterior(prob_x: float, choice: State, noise_sd: float, rng: np.random.Generator) -> int:
    """Confidence (integer percent) that ``choice`` is correct.

    Gaussian noise is added on the percent scale, then the value is rounded
    half-up and clamped to [0, 100]. With ``noise_sd == 0`` no draw is made.
    """
    if noise_sd < 0:
        raise ValueError("noise_sd must be non-negative")
    conf = 100.0 * (prob_x if choice is State.X else 1.0 - prob_x)
    if noise_sd > 0:
        conf += rng.normal(0.0, noise_sd)
    # guard against 63.5 being stored as 63.4999...
    return int(min(100, max(0, math.floor(round(conf, 9) + 0.5))))


def _draw_state(rng) -> State:
    return State.X if rng.random() < 0.5 else State.Y


def _draw_ball(structure: InformationStructure, state: State, rng) -> Signal:
    p_white = float(likelihood(structure, Signal.WHITE, state))
    return Signal.WHITE if rng.random() < p_white else Signal.BLACK


def _draw_choice(params: AgentParams, prob_x: float, stake: float, rng) -> State:
    return State.X if rng.random() < logit_choice_prob(params.beta, prob_x, stake) else State.Y


def _schedule(config: SimConfig, rng) -> list[InformationStructure]:
    structures = enumerate_structures() * (config.rounds_per_condition // len(enumerate_structures()))
    return [structures[i] for i in rng.permutation(len(structures))]


def _pool_subject(config: SimConfig, index: int, seed: int) -> list[TrialRecord]:
    rng = _stream(seed, _STREAM_TAG[Treatment.POOL], index)
    cov = config.covariates.draw(rng) if config.covariates is not None else (0, 0, 0, 0)
    params = config.population.draw(rng, prob_stat=cov[3])
    subject_id = f"POOL-{index + 1:03d}"
    records = []
    for k, structure in enumerate(_schedule(config, rng)):
        state = _draw_state(rng)
        ball = _draw_ball(structure, state, rng)
        post = subjective_posterior(params, Treatment.POOL, Condition.INDIVIDUAL, structure, ball, stake=config.stake)
        choice = _draw_choice(params, post, config.stake, rng)
        reported = report_posterior(post, choice, params.report_noise_sd, rng)
        records.append(TrialRecord(
            session_id="S-POOL",
            subject_id=subject_id,
            treatment=Treatment.POOL,
            condition=Condition.INDIVIDUAL,
            condition_order=ConditionOrder.INDIVIDUAL_FIRST,
            round=k + 1,
            structure=structure,
            true_state=state,
            ball=ball,
            ball_shown=False,
            neighbor_id=None,
            neighbor_guess=None,
            choice=choice,
            reported_posterior_pct=reported,
            gender=cov[0],
            education_years=cov[1],
            age=cov[2],
            prob_stat=cov[3],
            latent_posterior=post,
        ))
    return records


def simulate_pool(config: SimConfig, seed: Optional[int] = None) -> Panel:
    """Neighbour pool: ``pool_size`` subjects playing the individual condition once."""
    config.validate()
    seed = config.master_seed if seed is None else seed
    records = []
    for i in range(config.pool_size):
        records.extend(_pool_subject(config, i, seed))
    return Panel(records)


def _condition_orders(config: SimConfig, treatment: Treatment, n: int) -> list[ConditionOrder]:
    if not config.order_randomization:
        return [config.fixed_order] * n
    # balanced assignment so both orders appear whenever n >= 2
    rng = _stream(config.master_seed, _ORDER_TAG + _STREAM_TAG[treatment], 0)
    orders = [ConditionOrder.INDIVIDUAL_FIRST, ConditionOrder.SOCIAL_FIRST] * (n // 2 + 1)
    orders = orders[:n]
    return [orders[i] for i in rng.permutation(n)]


class _PoolIndex:
    def __init__(self, pool: Panel):
        self.by_structure: dict[InformationStructure, list[TrialRecord]] = {}
        for r in pool:
            self.by_structure.setdefault(r.structure, []).append(r)

    def draw(self, structure, rng, exclude: set) -> TrialRecord:
        candidates = self.by_structure[structure]
        if exclude:
            candidates = [r for r in candidates if r.subject_id not in exclude]
        return candidates[int(rng.integers(len(candidates)))]


def _subject(config: SimConfig, treatment: Treatment, index: int, order: ConditionOrder,
             pool: _PoolIndex) -> list[TrialRecord]:
    rng = _stream(config.master_seed, _STREAM_TAG[treatment], index)
    cov = config.covariates.draw(rng) if config.covariates is not None else (0, 0, 0, 0)
    params = config.population.draw(rng, prob_stat=cov[3])
    stake = config.stake
    subject_id = f"{treatment.value}-{index + 1:03d}"
    common = dict(
        session_id=f"S-{treatment.value}",
        subject_id=subject_id,
        treatment=treatment,
        condition_order=order,
        gender=cov[0],
        education_years=cov[1],
        age=cov[2],
        prob_stat=cov[3],
    )
    conditions = [Condition.INDIVIDUAL, Condition.SOCIAL]
    if order is ConditionOrder.SOCIAL_FIRST:
        conditions.reverse()

    records = []
    for condition in conditions:
        used_neighbors: set = set()
        for k, structure in enumerate(_schedule(config, rng)):
            if condition is Condition.INDIVIDUAL:
                state = _draw_state(rng)
                ball = _draw_ball(structure, state, rng)
                post = subjective_posterior(params, treatment, condition, structure, ball, stake=stake)
                extra = dict(true_state=state, ball=ball, ball_shown=False, neighbor_id=None, neighbor_guess=None)
            elif treatment is Treatment.BOT:
                state = _draw_state(rng)
                bot_ball = _draw_ball(structure, state, rng)
                guess = bot_choice(structure, bot_ball, rng)
                post = subjective_posterior(params, treatment, condition, structure, None, guess, stake)
                extra = dict(true_state=state, ball=None, ball_shown=False, neighbor_id=BOT_ID, neighbor_guess=guess)
            else:
                nb = pool.draw(structure, rng, used_neighbors)
                if not config.pool_with_replacement:
                    used_neighbors.add(nb.subject_id)
                shown = treatment is Treatment.BALL
                ball = nb.ball if shown else None
                post = subjective_posterior(params, treatment, condition, structure, ball, nb.choice, stake)
                extra = dict(true_state=nb.true_state, ball=ball, ball_shown=shown,
                             neighbor_id=nb.subject_id, neighbor_guess=nb.choice)
                if treatment is Treatment.DEMOGRAPHICS:
                    extra.update(neighbor_gender=nb.gender, neighbor_education_years=nb.education_years,
                                 neighbor_age=nb.age, neighbor_prob_stat=nb.prob_stat)
                    shift = config.population.beta_tilde_shift_neighbor_prob_stat
                    if shift and nb.prob_stat:
                        believed = dataclasses.replace(params, beta_tilde=params.beta_tilde + shift)
                        post = subjective_posterior(believed, treatment, condition, structure, None, nb.choice, stake)
            choice = _draw_choice(params, post, stake, rng)
            reported = report_posterior(post, choice, params.report_noise_sd, rng)
            records.append(TrialRecord(
                condition=condition,
                round=k + 1,
                structure=structure,
                choice=choice,
                reported_posterior_pct=reported,
                latent_posterior=post,
                **common,
                **extra,
            ))
    return records


def simulate_experiment(config: SimConfig, workers: int = 1, pool: Optional[Panel] = None) -> Panel:
    """Full experiment: neighbour pool followed by every treatment's subjects.

    ``workers`` > 1 generates subjects on a thread pool; the output is the
    same because each subject owns its random stream and results are merged
    in a fixed order.
    """
    config.validate()
    if pool is None:
        pool = simulate_pool(config)
    index = _PoolIndex(pool)

    jobs = []
    for treatment in SUBJECT_TREATMENTS:
        n = config.n_subjects.get(treatment, 0)
        if not n:
            continue
        for i, order in enumerate(_condition_orders(config, treatment, n)):
            jobs.append((treatment, i, order))

    def run(job):
        return _subject(config, job[0], job[1], job[2], index)

    if workers > 1:
        with ThreadPoolExecutor(max_workers=workers) as ex:
            chunks = list(ex.map(run, jobs))
    else:
        chunks = [run(j) for j in jobs]

    records = list(pool)
    for chunk in chunks:
        records.extend(chunk)
    return Panel(records)
