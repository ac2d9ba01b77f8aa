"""Two-step structural estimation, kernel curves and covariate regressions.

Step one uses individual-condition rounds: the updating exponent ``c`` by
OLS of reported log-odds on log likelihood ratios (no intercept), and the
choice precision ``beta`` by logit maximum likelihood. Step two fixes
``c`` and fits the believed neighbour precision ``beta_tilde`` by
non-linear least squares on reported social log-odds.
"""
from __future__ import annotations

import dataclasses
import math
import warnings
from typing import Callable, Optional, Sequence

import numpy as np
from scipy.special import expit, log_expit

from .agents import DEFAULT_STAKE, social_posterior, social_signal_likelihoods
from .classify import ErrorLabel, classify_record, subject_rates
from .env import BALLS_PER_BOX, Signal, State, bayes_posterior, likelihood
from .panel import Condition, Panel, TrialRecord, Treatment

GOLDEN = (math.sqrt(5.0) - 1.0) / 2.0
NLS_TREATMENTS = (Treatment.BASE, Treatment.DEMOGRAPHICS)
SUBJECT_COVARIATES = ("gender", "education_years", "age", "prob_stat")
NEIGHBOR_COVARIATES = ("neighbor_gender", "neighbor_education_years", "neighbor_age", "neighbor_prob_stat")

# which error type each stage/condition cell of the belief-choice data identifies
IDENTIFICATION_MAP = {
    (Condition.INDIVIDUAL, "belief"): ("A",),
    (Condition.INDIVIDUAL, "choice"): ("B",),
    (Condition.SOCIAL, "belief"): ("A", "C"),
    (Condition.SOCIAL, "choice"): ("B",),
}


class EstimationError(RuntimeError):
    pass


class InsufficientDataError(EstimationError):
    pass


class ConvergenceError(EstimationError):
    pass


class SeparationError(EstimationError):
    pass


class SeparationWarning(UserWarning):
    pass


class RankDeficiencyError(EstimationError):
    pass


@dataclasses.dataclass(frozen=True)
class EstimationResult:
    estimate: float
    std_error: float
    n_used: int
    n_dropped: int
    converged: bool
    iterations: int
    objective_at_optimum: float
    at_bound: bool = False


@dataclasses.dataclass(frozen=True)
class KernelCurve:
    grid: np.ndarray
    estimates: np.ndarray
    sd: np.ndarray
    bandwidth: float
    n_effective: np.ndarray


@dataclasses.dataclass(frozen=True)
class RegressionFit:
    names: tuple[str, ...]
    coef: np.ndarray
    cov: np.ndarray
    n: int
    r2: Optional[float] = None
    adj_r2: Optional[float] = None
    pseudo_r2: Optional[float] = None
    ame: Optional[np.ndarray] = None

    @property
    def se(self) -> np.ndarray:
        return np.sqrt(np.diag(self.cov))

    def __getitem__(self, name: str) -> float:
        return float(self.coef[self.names.index(name)])

    def ame_of(self, name: str) -> float:
        # AMEs are stored for the non-intercept terms only
        slopes = [n for n in self.names if n != "const"]
        return float(self.ame[slopes.index(name)])


# -- data extraction ---------------------------------------------------------

def _records(panel: Panel, condition: Condition, treatments=None) -> list[TrialRecord]:
    if condition is Condition.SOCIAL and treatments is None:
        treatments = NLS_TREATMENTS
    return [r for r in panel.select(treatment=treatments, condition=condition) if not r.is_pool]


def _reported_pct_x(r: TrialRecord, winsorize: bool) -> float:
    pct = 100.0 * r.reported_prob_x
    if winsorize:
        pct = min(99.0, max(1.0, pct))
    return pct


def _rational_guess_likelihoods(r: TrialRecord) -> tuple[float, float]:
    return social_signal_likelihoods(r.structure, math.inf, 1.0).for_guess(r.neighbor_guess)


def benchmark_posterior(r: TrialRecord) -> float:
    """Bayesian P(X): from the ball alone, or from the guess of a rational neighbour."""
    if r.condition is Condition.INDIVIDUAL:
        return bayes_posterior(r.structure, r.ball)
    return social_posterior(r.structure, r.neighbor_guess, 1.0, math.inf, 1.0)


# -- step one -----------------------------------------------------------------

def fit_c_ols(panel: Panel, condition: Condition = Condition.INDIVIDUAL, winsorize: bool = False,
              treatments=None) -> EstimationResult:
    """OLS through the origin of reported log-odds on log likelihood ratios.

    Individual rounds use the ball likelihoods. Social rounds use the guess
    likelihoods implied by a rational neighbour. Rounds reported at 0 or 100
    (unless ``winsorize``) or with a zero likelihood are dropped.
    """
    xs, ys, dropped = [], [], 0
    for r in _records(panel, condition, treatments):
        if condition is Condition.INDIVIDUAL:
            px = float(likelihood(r.structure, r.ball, State.X))
            py = float(likelihood(r.structure, r.ball, State.Y))
        else:
            px, py = _rational_guess_likelihoods(r)
        pct = _reported_pct_x(r, winsorize)
        if px <= 0 or py <= 0 or pct <= 0 or pct >= 100:
            dropped += 1
            continue
        xs.append(math.log(px / py))
        ys.append(math.log(pct / (100.0 - pct)))
    n = len(xs)
    if n < 2:
        raise InsufficientDataError(f"only {n} usable rounds for the c regression")
    x, y = np.array(xs), np.array(ys)
    sxx = float(x @ x)
    if sxx == 0:
        raise InsufficientDataError("all log likelihood ratios are zero")
    slope = float(x @ y) / sxx
    resid = y - slope * x
    ssr = float(resid @ resid)
    se = math.sqrt(ssr / (n - 1) / sxx)
    return EstimationResult(slope, se, n, dropped, True, 1, ssr)


class PosteriorSource:
    REPORTED = "reported"
    BAYESIAN = "bayes"


def _logit_ll(beta: float, z: np.ndarray, d: np.ndarray) -> float:
    eta = beta * z
    return float(np.sum(np.where(d, log_expit(eta), log_expit(-eta))))


def logit_beta_mle(z, d, max_iter: int = 100, tol: float = 1e-10) -> EstimationResult:
    """MLE of beta in P(d=1) = 1 / (1 + exp(-beta z)) by Newton with step halving."""
    z = np.asarray(z, dtype=float)
    d = np.asarray(d, dtype=bool)
    n = z.size
    if n == 0 or not np.any(z != 0):
        raise InsufficientDataError("no informative observations for beta")
    sign = np.where(d, 1.0, -1.0) * z
    if np.all(sign >= 0) or np.all(sign <= 0):
        warnings.warn("choices are perfectly separated by the posterior; the likelihood is monotone in beta",
                      SeparationWarning, stacklevel=2)
        est = math.inf if np.all(sign >= 0) else -math.inf
        return EstimationResult(est, math.nan, n, 0, False, 0, 0.0)

    beta = 0.0
    ll = _logit_ll(beta, z, d)
    for it in range(1, max_iter + 1):
        p = expit(beta * z)
        grad = float(np.sum((d - p) * z))
        info = float(np.sum(p * (1 - p) * z * z))
        step = grad / info
        new_beta, new_ll = beta + step, _logit_ll(beta + step, z, d)
        halvings = 0
        while new_ll < ll and halvings < 50:
            step /= 2
            new_beta, new_ll = beta + step, _logit_ll(beta + step, z, d)
            halvings += 1
        delta = new_ll - ll
        beta, ll = new_beta, new_ll
        if abs(delta) < tol:
            p = expit(beta * z)
            info = float(np.sum(p * (1 - p) * z * z))
            return EstimationResult(beta, 1.0 / math.sqrt(info), n, 0, True, it, ll)
    raise ConvergenceError(f"beta MLE did not converge in {max_iter} iterations")


def logit_beta_score(beta: float, z, d) -> float:
    """Derivative of the beta log-likelihood."""
    z = np.asarray(z, dtype=float)
    return float(np.sum((np.asarray(d, dtype=float) - expit(beta * z)) * z))


def fit_beta_logit(panel: Panel, condition: Condition = Condition.INDIVIDUAL,
                   posterior_source: str = PosteriorSource.REPORTED, stake: float = DEFAULT_STAKE,
                   treatments=None) -> EstimationResult:
    """Choice precision from binary choices given a posterior.

    ``posterior_source`` is ``"reported"`` (the subject's stated belief) or
    ``"bayes"`` (the Bayesian posterior, the usual assumption when beliefs
    are not elicited).
    """
    if posterior_source not in (PosteriorSource.REPORTED, PosteriorSource.BAYESIAN):
        raise ValueError(f"unknown posterior source {posterior_source!r}")
    recs = _records(panel, condition, treatments)
    if posterior_source == PosteriorSource.REPORTED:
        post = np.array([r.reported_prob_x for r in recs])
    else:
        post = np.array([benchmark_posterior(r) for r in recs])
    z = (2.0 * post - 1.0) * stake
    d = np.array([r.choice is State.X for r in recs])
    return logit_beta_mle(z, d)


# -- step two -----------------------------------------------------------------

def _grether_vec(px, py, c):
    if c == 0:
        return np.full_like(px, 0.5)
    with np.errstate(divide="ignore"):
        log_odds = c * (np.log(px) - np.log(py))
    # zero likelihoods give +-inf log-odds, which expit maps to 1 or 0
    return expit(log_odds)


def nls_objective(panel: Panel, c_hat: float, stake: float = DEFAULT_STAKE, include_bot: bool = False,
                  winsorize: bool = False) -> tuple[Callable[[float], float], int, int]:
    """Sum of squared log-odds residuals as a function of beta_tilde.

    Returns ``(objective, n_used, n_dropped)``. The believed neighbour
    exponent is held at ``c_hat``.
    """
    treatments = NLS_TREATMENTS + ((Treatment.BOT,) if include_bot else ())
    cells: dict = {}
    dropped = 0
    for r in _records(panel, Condition.SOCIAL, treatments):
        pct = _reported_pct_x(r, winsorize)
        if pct <= 0 or pct >= 100:
            dropped += 1
            continue
        y = math.log(pct / (100.0 - pct))
        key = (r.structure.white_in_x, r.structure.black_in_y, r.neighbor_guess is State.X)
        n, s1, s2 = cells.get(key, (0, 0.0, 0.0))
        cells[key] = (n + 1, s1 + y, s2 + y * y)
    n_used = sum(v[0] for v in cells.values())
    if n_used < 2:
        raise InsufficientDataError(f"only {n_used} usable social rounds")

    keys = sorted(cells)
    wx = np.array([k[0] / BALLS_PER_BOX for k in keys])
    wy = np.array([1.0 - k[1] / BALLS_PER_BOX for k in keys])
    guess_x = np.array([k[2] for k in keys])
    cnt = np.array([cells[k][0] for k in keys], dtype=float)
    s1 = np.array([cells[k][1] for k in keys])
    s2 = np.array([cells[k][2] for k in keys])
    # believed neighbour posterior after each ball colour
    post_white = _grether_vec(wx, wy, c_hat)
    post_black = _grether_vec(1.0 - wx, 1.0 - wy, c_hat)
    z_white = (2.0 * post_white - 1.0) * stake
    z_black = (2.0 * post_black - 1.0) * stake

    def predicted(beta_tilde: float) -> np.ndarray:
        qw = expit(beta_tilde * z_white)
        qb = expit(beta_tilde * z_black)
        lx_x = qw * wx + qb * (1.0 - wx)
        lx_y = qw * wy + qb * (1.0 - wy)
        ly_x = (1.0 - qw) * wx + (1.0 - qb) * (1.0 - wx)
        ly_y = (1.0 - qw) * wy + (1.0 - qb) * (1.0 - wy)
        with np.errstate(divide="ignore"):
            return c_hat * np.where(guess_x, np.log(lx_x) - np.log(lx_y), np.log(ly_x) - np.log(ly_y))

    def objective(beta_tilde: float) -> float:
        f = predicted(beta_tilde)
        return float(np.sum(s2 - 2.0 * f * s1 + cnt * f * f))

    return objective, n_used, dropped


def golden_section(f: Callable[[float], float], a: float, b: float, tol: float) -> tuple[float, int]:
    """Minimize a unimodal ``f`` on [a, b] until the bracket is narrower than ``tol``."""
    c = b - GOLDEN * (b - a)
    d = a + GOLDEN * (b - a)
    fc, fd = f(c), f(d)
    it = 0
    while b - a > tol:
        it += 1
        if fc <= fd:
            b, d, fd = d, c, fc
            c = b - GOLDEN * (b - a)
            fc = f(c)
        else:
            a, c, fc = c, d, fd
            d = a + GOLDEN * (b - a)
            fd = f(d)
    return (a + b) / 2.0, it


def grid_scan(f: Callable[[float], float], lo: float, hi: float, n: int = 10_000) -> float:
    """Argmin of ``f`` over ``n`` evenly spaced points; a brute-force reference."""
    grid = np.linspace(lo, hi, n)
    return float(grid[int(np.argmin([f(g) for g in grid]))])


def fit_beta_tilde_nls(panel: Panel, c_hat: float, stake: float = DEFAULT_STAKE, include_bot: bool = False,
                       winsorize: bool = False, bounds: tuple[float, float] = (0.0, 1.0),
                       rtol: float = 1e-10, n_bracket: int = 65) -> EstimationResult:
    """Believed neighbour precision by 1-D least squares on social log-odds.

    A coarse scan over ``bounds`` brackets the minimum, golden-section search
    refines it to ``rtol`` times the search width. An optimum on the upper
    bound is reported with ``at_bound=True`` and ``converged=False``: the data
    are then consistent with a rational-neighbour belief.
    """
    objective, n_used, dropped = nls_objective(panel, c_hat, stake, include_bot, winsorize)
    lo, hi = bounds
    grid = np.linspace(lo, hi, n_bracket)
    values = [objective(g) for g in grid]
    i = int(np.argmin(values))
    a, b = grid[max(i - 1, 0)], grid[min(i + 1, n_bracket - 1)]
    tol = rtol * (hi - lo)
    est, it = golden_section(objective, a, b, tol)
    est = min(max(est, lo), hi)
    at_upper = hi - est <= 10 * tol
    at_lower = est - lo <= 10 * tol
    ssr = objective(est)

    h = max(1e-4 * abs(est), 1e-6)
    if est - h < lo:
        # one-sided second difference at the lower bound
        d2 = (objective(est + 2 * h) - 2 * objective(est + h) + ssr) / h**2
    elif est + h > hi:
        d2 = (objective(est - 2 * h) - 2 * objective(est - h) + ssr) / h**2
    else:
        d2 = (objective(est + h) - 2 * ssr + objective(est - h)) / h**2
    sigma2 = ssr / max(n_used - 1, 1)
    se = math.sqrt(2.0 * sigma2 / d2) if d2 > 0 else math.nan
    return EstimationResult(float(est), se, n_used, dropped, not at_upper, it, ssr,
                            at_bound=bool(at_upper or at_lower))


# -- kernel curves -----------------------------------------------------------

def kernel_regression(xs, ys, bandwidth: float = 15.0, grid=None, weight_floor: float = 1e-12) -> KernelCurve:
    """Nadaraya-Watson regression with a Gaussian kernel.

    Grid points whose total kernel weight is below ``weight_floor`` are NaN.
    The local weighted standard deviation and Kish effective sample size are
    returned alongside the mean.
    """
    xs = np.asarray(xs, dtype=float).ravel()
    ys = np.asarray(ys, dtype=float).ravel()
    if xs.size == 0:
        raise ValueError("kernel regression needs at least one point")
    if xs.shape != ys.shape:
        raise ValueError("xs and ys must have the same length")
    if not bandwidth > 0:
        raise ValueError("bandwidth must be positive")
    grid = np.arange(0.0, 101.0) if grid is None else np.asarray(grid, dtype=float)
    u = (grid[:, None] - xs[None, :]) / bandwidth
    w = np.exp(-0.5 * u * u) / math.sqrt(2.0 * math.pi)
    total = w.sum(axis=1)
    ok = total >= weight_floor
    safe = np.where(ok, total, 1.0)
    mean = (w @ ys) / safe
    var = (w @ (ys * ys)) / safe - mean**2
    # keep the constant-y case exact
    mean = np.where(ok, np.clip(mean, ys.min(), ys.max()), np.nan)
    sd = np.where(ok, np.sqrt(np.maximum(var, 0.0)), np.nan)
    n_eff = np.where(ok, total**2 / np.maximum((w * w).sum(axis=1), 1e-300), 0.0)
    return KernelCurve(grid, mean, sd, float(bandwidth), n_eff)


class CurveKind:
    BELIEF_INDIVIDUAL = "belief_individual"
    BELIEF_SOCIAL = "belief_social"
    CHOICE_INDIVIDUAL = "choice_individual"
    CHOICE_SOCIAL = "choice_social"
    ALL = (BELIEF_INDIVIDUAL, BELIEF_SOCIAL, CHOICE_INDIVIDUAL, CHOICE_SOCIAL)


def curve_inputs(panel: Panel, which: str, treatments=None) -> tuple[np.ndarray, np.ndarray]:
    """Scatter for a belief curve (Bayesian vs reported P(X), both in percent)
    or a choice curve (reported P(X) in percent vs an indicator of choosing X).
    Excluded rounds are left out."""
    if which not in CurveKind.ALL:
        raise ValueError(f"unknown curve {which!r}")
    condition = Condition.INDIVIDUAL if which.endswith("individual") else Condition.SOCIAL
    xs, ys = [], []
    for r in panel.subjects_only.select(treatment=treatments, condition=condition):
        if classify_record(r) is ErrorLabel.EXCLUDED:
            continue
        reported = 100.0 * r.reported_prob_x
        if which.startswith("belief"):
            xs.append(100.0 * benchmark_posterior(r))
            ys.append(reported)
        else:
            xs.append(reported)
            ys.append(1.0 if r.choice is State.X else 0.0)
    return np.array(xs), np.array(ys)


# -- covariate regressions ---------------------------------------------------

def _check_rank(X: np.ndarray) -> None:
    if np.linalg.matrix_rank(X) < X.shape[1]:
        raise RankDeficiencyError("design matrix is rank deficient")


def ols(y, X, names: Sequence[str], add_intercept: bool = True) -> RegressionFit:
    """OLS with conventional standard errors."""
    y = np.asarray(y, dtype=float)
    X = np.asarray(X, dtype=float).reshape(len(y), -1)
    names = tuple(names)
    if add_intercept:
        X = np.column_stack([np.ones(len(y)), X])
        names = ("const",) + names
    n, k = X.shape
    if n <= k:
        raise InsufficientDataError(f"{n} observations for {k} coefficients")
    _check_rank(X)
    xtx_inv = np.linalg.inv(X.T @ X)
    beta = xtx_inv @ (X.T @ y)
    resid = y - X @ beta
    ssr = float(resid @ resid)
    sigma2 = ssr / (n - k)
    centered = y - y.mean()
    sst = float(centered @ centered)
    r2 = 1.0 - ssr / sst if sst > 0 else 0.0
    adj = 1.0 - (1.0 - r2) * (n - 1) / (n - k) if sst > 0 else 0.0
    return RegressionFit(names, beta, sigma2 * xtx_inv, n, r2=r2, adj_r2=adj)


def fit_subject_ols(panel: Panel, condition: Condition, covariates: Sequence[str] = SUBJECT_COVARIATES,
                    treatments=None) -> RegressionFit:
    """Per-subject irrationality rate (in percent) on subject characteristics."""
    rates = subject_rates(panel, condition, treatments)
    first = {sid: recs[0] for sid, recs in panel.subjects_only.by_subject.items()}
    X = np.array([[getattr(first[sid], c) for c in covariates] for sid in rates.index], dtype=float)
    return ols(100.0 * rates.to_numpy(), X, covariates)


def logit_regression(y, X, names: Sequence[str], clusters=None, cov_type: str = "cluster",
                     add_intercept: bool = True, max_iter: int = 100, tol: float = 1e-10) -> RegressionFit:
    """Binary logit by Newton-Raphson with average marginal effects.

    ``cov_type``: ``"nonrobust"`` (inverse information), ``"robust"``
    (sandwich, each observation its own cluster) or ``"cluster"`` (sandwich
    over ``clusters``). Both sandwich forms carry the G/(G-1) factor.
    """
    y = np.asarray(y, dtype=float)
    X = np.asarray(X, dtype=float).reshape(len(y), -1)
    names = tuple(names)
    if add_intercept:
        X = np.column_stack([np.ones(len(y)), X])
        names = ("const",) + names
    n, k = X.shape
    if n <= k:
        raise InsufficientDataError(f"{n} observations for {k} coefficients")
    _check_rank(X)

    def loglik(b):
        eta = X @ b
        return float(np.sum(y * log_expit(eta) + (1 - y) * log_expit(-eta)))

    b = np.zeros(k)
    ll = loglik(b)
    for _ in range(max_iter):
        p = expit(X @ b)
        grad = X.T @ (y - p)
        info = (X * (p * (1 - p))[:, None]).T @ X
        step = np.linalg.solve(info, grad)
        new_b, new_ll = b + step, loglik(b + step)
        halvings = 0
        while new_ll < ll and halvings < 50:
            step = step / 2
            new_b, new_ll = b + step, loglik(b + step)
            halvings += 1
        delta = new_ll - ll
        b, ll = new_b, new_ll
        if np.max(np.abs(b)) > 50:
            raise SeparationError("coefficients diverge; outcome is (quasi-)separated by the covariates")
        if abs(delta) < tol:
            break
    else:
        raise ConvergenceError(f"logit did not converge in {max_iter} iterations")

    p = expit(X @ b)
    info = (X * (p * (1 - p))[:, None]).T @ X
    bread = np.linalg.inv(info)
    if cov_type == "nonrobust":
        cov = bread
    else:
        scores = X * (y - p)[:, None]
        if cov_type == "robust":
            groups = scores
        elif cov_type == "cluster":
            if clusters is None:
                raise ValueError("cluster covariance needs cluster labels")
            labels, inv = np.unique(np.asarray(clusters), return_inverse=True)
            groups = np.zeros((labels.size, k))
            np.add.at(groups, inv, scores)
        else:
            raise ValueError(f"unknown cov_type {cov_type!r}")
        G = groups.shape[0]
        if G < 2:
            raise InsufficientDataError("need at least two clusters")
        cov = G / (G - 1) * bread @ (groups.T @ groups) @ bread
    cov = (cov + cov.T) / 2

    ll_null_p = y.mean()
    ll_null = float(np.sum(y * math.log(ll_null_p) + (1 - y) * math.log(1 - ll_null_p))) if 0 < ll_null_p < 1 else 0.0
    pseudo = 1.0 - ll / ll_null if ll_null != 0 else 0.0
    slope_idx = [i for i, nm in enumerate(names) if nm != "const"]
    ame = np.mean(p * (1 - p)) * b[slope_idx]
    return RegressionFit(names, b, cov, n, pseudo_r2=pseudo, ame=ame)


def fit_irrationality_logit(panel: Panel, covariates_subject: Sequence[str] = SUBJECT_COVARIATES,
                            covariates_neighbor: Sequence[str] = NEIGHBOR_COVARIATES,
                            cluster_by_subject: bool = True) -> RegressionFit:
    """Logit of social irrationality on subject and neighbour characteristics.

    Uses the social rounds of the demographics treatment, where subjects see
    their neighbour's characteristics; excluded rounds are dropped.
    """
    rows, ys, groups = [], [], []
    cols = tuple(covariates_subject) + tuple(covariates_neighbor)
    for r in panel.select(treatment=Treatment.DEMOGRAPHICS, condition=Condition.SOCIAL):
        label = classify_record(r)
        if label is ErrorLabel.EXCLUDED:
            continue
        vals = [getattr(r, c) for c in cols]
        if any(v is None for v in vals):
            raise ValueError(f"record of {r.subject_id} lacks neighbour covariates")
        rows.append(vals)
        ys.append(1.0 if label.irrational else 0.0)
        groups.append(r.subject_id)
    if not rows:
        raise InsufficientDataError("no demographics-treatment social rounds")
    cov_type = "cluster" if cluster_by_subject else "nonrobust"
    return logit_regression(ys, rows, cols, clusters=groups, cov_type=cov_type)
