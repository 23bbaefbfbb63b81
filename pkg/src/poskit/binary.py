"""Binary endpoints summarized as risk differences.

A normal random-effects model on the risk-difference scale would spill
probability mass outside [-1, 1], so responder counts are analyzed on two
unbounded scales instead: study log-odds ratios feed a normal-normal
hierarchical model, and control-arm responder totals feed an exact-binomial
model whose study log-odds follow a normal random-effects distribution. The
two fits use independent priors and run separately; draws are paired by index
and transformed back to response probabilities, which keeps every simulated
risk difference strictly inside (-1, 1).
"""

from __future__ import annotations

import math
import warnings
from dataclasses import dataclass

import numpy as np

from .core import HeterogeneityPrior, MixturePrior
from .distributions import expit, logit, norm_logpdf
from .errors import ConvergenceError, DomainError
from .mcmc import ChainDiagnostics, McmcConfig, sample
from .meta_analysis import ESS_WARN_FLOOR, RHAT_LIMIT
from .rng import stream


@dataclass(frozen=True)
class ArmCounts:
    """Responder counts per arm for one study."""

    study_id: str
    n_treat: int
    r_treat: int
    n_ctrl: int
    r_ctrl: int

    def __post_init__(self):
        if self.n_treat < 1 or self.n_ctrl < 1:
            raise DomainError(f"study {self.study_id!r}: arm sizes must be >= 1")
        for r, n, arm in ((self.r_treat, self.n_treat, "treat"), (self.r_ctrl, self.n_ctrl, "ctrl")):
            if not 0 <= r <= n:
                raise DomainError(f"study {self.study_id!r}: {arm} responders out of range")


@dataclass(frozen=True)
class NormalPrior:
    mean: float
    sd: float

    def __post_init__(self):
        if self.sd <= 0:
            raise DomainError("prior sd must be strictly positive")

    def logpdf(self, x):
        return norm_logpdf(x, self.mean, self.sd)


def log_odds_ratio(counts: ArmCounts) -> tuple[float, float]:
    """Study log-odds ratio and its standard error from the 2x2 table.

    Adds 0.5 to all four cells when any cell is zero (Haldane-Anscombe).
    """
    a = float(counts.r_treat)
    b = float(counts.n_treat - counts.r_treat)
    c = float(counts.r_ctrl)
    d = float(counts.n_ctrl - counts.r_ctrl)
    if min(a, b, c, d) == 0.0:
        a, b, c, d = a + 0.5, b + 0.5, c + 0.5, d + 0.5
    est = math.log((a * d) / (b * c))
    se = math.sqrt(1.0 / a + 1.0 / b + 1.0 / c + 1.0 / d)
    return est, se


@dataclass(frozen=True)
class BinaryPosterior:
    """Paired draws from the two independent hierarchical fits."""

    mu_log_or: np.ndarray
    tau_log_or: np.ndarray
    mu_ctrl_logodds: np.ndarray
    tau_ctrl: np.ndarray
    or_diagnostics: ChainDiagnostics
    ctrl_diagnostics: ChainDiagnostics

    @property
    def n_draws(self) -> int:
        return self.mu_log_or.shape[0]


def fit_binary(
    counts: list[ArmCounts],
    or_tau_prior: HeterogeneityPrior,
    ctrl_tau_prior: HeterogeneityPrior,
    or_mu_prior: MixturePrior | NormalPrior,
    ctrl_mu_prior: NormalPrior,
    cfg: McmcConfig,
) -> BinaryPosterior:
    """Run the log-odds-ratio and control-response fits on the same config."""
    if not counts:
        raise DomainError("need at least one study")
    all_empty = all(c.r_treat == 0 and c.r_ctrl == 0 for c in counts)
    all_full = all(c.r_treat == c.n_treat and c.r_ctrl == c.n_ctrl for c in counts)
    if all_empty or all_full:
        raise DomainError("every study has all-zero or all-full cells; log-odds inestimable")

    n_st = len(counts)
    ests, ses = zip(*(log_odds_ratio(c) for c in counts))
    ests = np.array(ests)
    ses = np.array(ses)

    if isinstance(or_mu_prior, MixturePrior) and or_mu_prior.n_endpoints != 1:
        raise DomainError("binary pathway supports a single endpoint")

    def or_density(x: np.ndarray) -> np.ndarray:
        mu, log_tau, eps = x[:, 0], x[:, 1], x[:, 2:]
        tau = np.exp(log_tau)
        if isinstance(or_mu_prior, MixturePrior):
            lp = or_mu_prior.logpdf(mu[:, None])
        else:
            lp = or_mu_prior.logpdf(mu)
        lp = lp - 0.5 * (tau / or_tau_prior.scale_z) ** 2 + log_tau
        lp = lp + np.sum(norm_logpdf(eps), axis=1)
        theta = mu[:, None] + tau[:, None] * eps
        resid = (ests[None, :] - theta) / ses[None, :]
        return lp - 0.5 * np.sum(resid * resid, axis=1)

    pooled_or = float(np.sum(ests / ses**2) / np.sum(1.0 / ses**2))
    or_init = np.concatenate([[pooled_or, math.log(max(or_tau_prior.median, 1e-12))], np.zeros(n_st)])

    n_ctrl = np.array([c.n_ctrl for c in counts], dtype=float)
    r_ctrl = np.array([c.r_ctrl for c in counts], dtype=float)

    def ctrl_density(x: np.ndarray) -> np.ndarray:
        mu, log_tau, eps = x[:, 0], x[:, 1], x[:, 2:]
        tau = np.exp(log_tau)
        lam = mu[:, None] + tau[:, None] * eps
        lp = ctrl_mu_prior.logpdf(mu)
        lp = lp - 0.5 * (tau / ctrl_tau_prior.scale_z) ** 2 + log_tau
        lp = lp + np.sum(norm_logpdf(eps), axis=1)
        # exact binomial log likelihood, binomial coefficients dropped
        lp = lp + np.sum(r_ctrl[None, :] * lam - n_ctrl[None, :] * np.logaddexp(0.0, lam), axis=1)
        return lp

    p_pool = float(np.clip(r_ctrl.sum() / n_ctrl.sum(), 1e-3, 1.0 - 1e-3))
    ctrl_init = np.concatenate(
        [[logit(p_pool), math.log(max(ctrl_tau_prior.median, 1e-12))], np.zeros(n_st)]
    )

    blocks = [[0], [1]] + [[2 + j] for j in range(n_st)]
    results = []
    for density, init, names in (
        (or_density, or_init, ["mu_log_or", "log_tau_or"]),
        (ctrl_density, ctrl_init, ["mu_ctrl_logodds", "log_tau_ctrl"]),
    ):
        full_names = names + [f"eps_{j}" for j in range(n_st)]
        res = sample(density, init, cfg, blocks=blocks, param_names=full_names)
        if res.diagnostics.max_rhat() > RHAT_LIMIT:
            raise ConvergenceError(
                f"split-Rhat exceeded {RHAT_LIMIT} in the {names[0]} fit",
                rhat=res.diagnostics.rhat_table(),
            )
        if res.diagnostics.min_ess() < ESS_WARN_FLOOR:
            warnings.warn(
                f"bulk ESS below {ESS_WARN_FLOOR:.0f} in the {names[0]} fit",
                RuntimeWarning,
                stacklevel=2,
            )
        results.append(res)

    or_res, ctrl_res = results
    return BinaryPosterior(
        mu_log_or=or_res.draws[:, 0],
        tau_log_or=np.exp(or_res.draws[:, 1]),
        mu_ctrl_logodds=ctrl_res.draws[:, 0],
        tau_ctrl=np.exp(ctrl_res.draws[:, 1]),
        or_diagnostics=or_res.diagnostics,
        ctrl_diagnostics=ctrl_res.diagnostics,
    )


@dataclass(frozen=True)
class BinaryMapDraws:
    """Per-trial log-odds ratios and response probabilities, shape (L, K)."""

    eta3: np.ndarray
    p_ctrl3: np.ndarray
    p_treat3: np.ndarray

    def __post_init__(self):
        for arr in (self.p_ctrl3, self.p_treat3):
            if np.any((arr <= 0.0) | (arr >= 1.0)):
                raise DomainError("response probabilities must lie strictly in (0, 1)")
        if not (self.eta3.shape == self.p_ctrl3.shape == self.p_treat3.shape):
            raise DomainError("draw arrays must share one shape")

    def risk_difference(self) -> np.ndarray:
        return self.p_treat3 - self.p_ctrl3

    @property
    def n_draws(self) -> int:
        return self.eta3.shape[0]


def transform_to_probs(eta_draws: np.ndarray, p_ctrl_draws: np.ndarray) -> BinaryMapDraws:
    """Pair log-odds-ratio and control-probability draws into arm probabilities."""
    eta = np.atleast_2d(np.asarray(eta_draws, dtype=float).T).T
    p_ctrl = np.atleast_2d(np.asarray(p_ctrl_draws, dtype=float).T).T
    if eta.shape != p_ctrl.shape:
        raise DomainError("eta and control-probability draws must align")
    if np.any((p_ctrl <= 0.0) | (p_ctrl >= 1.0)):
        raise DomainError("control probabilities must lie strictly in (0, 1)")
    p_treat = expit(logit(p_ctrl) + eta)
    return BinaryMapDraws(eta3=eta, p_ctrl3=p_ctrl, p_treat3=p_treat)


def sample_binary_phase3(
    posterior: BinaryPosterior,
    or_tau_prior: HeterogeneityPrior,
    ctrl_tau_prior: HeterogeneityPrior,
    n_trials: int,
    seed: int,
) -> BinaryMapDraws:
    """Predictive draws of per-trial log-odds ratios and control probabilities.

    Phase III heterogeneity sds come fresh from their priors, mirroring the
    continuous pathway.
    """
    if n_trials < 1:
        raise DomainError("need at least one phase III trial")
    L = posterior.n_draws
    rng = stream(seed, 0)
    tau_or = np.abs(rng.standard_normal(L)) * or_tau_prior.scale_z
    tau_ct = np.abs(rng.standard_normal(L)) * ctrl_tau_prior.scale_z
    eta = posterior.mu_log_or[:, None] + tau_or[:, None] * rng.standard_normal((L, n_trials))
    lam = posterior.mu_ctrl_logodds[:, None] + tau_ct[:, None] * rng.standard_normal((L, n_trials))
    return transform_to_probs(eta, expit(lam))
