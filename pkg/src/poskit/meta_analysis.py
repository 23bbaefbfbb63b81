"""Bayesian hierarchical meta-analysis of early-phase effect estimates.

The model: per-study estimates are (bivariate) normal around study-specific
effects with known Fisher information and within-patient correlation; the
study effects are exchangeable draws around the program-level mean with
half-normal priors on the between-study sds; the program-level mean carries
the two-component mixture prior.

Sampling uses the non-centered re-expression theta_j = mu + L(tau, rho) eps_j
and log-transformed heterogeneity sds, which keeps the posterior well behaved
when the data favor small heterogeneity.
"""

from __future__ import annotations

import math
import warnings
from dataclasses import dataclass

import numpy as np

from .core import EndpointSpec, HeterogeneityPrior, MixturePrior, StudyEstimate
from .distributions import norm_logpdf
from .errors import ConvergenceError, DomainError
from .mcmc import ChainDiagnostics, McmcConfig, McmcResult, sample

RHAT_LIMIT = 1.05
ESS_WARN_FLOOR = 400.0
CORRELATION_CONDITIONING_LIMIT = 1.0 - 1e-6


@dataclass(frozen=True)
class MetaAnalysisInput:
    """Everything the hierarchical fit needs besides sampler settings."""

    studies: tuple[StudyEstimate, ...]
    endpoints: tuple[EndpointSpec, ...]
    tau_priors: tuple[HeterogeneityPrior, ...]
    mu_prior: MixturePrior
    rho: float = 0.0
    kappa: float | None = None

    def __post_init__(self):
        n_ep = len(self.endpoints)
        if n_ep not in (1, 2):
            raise DomainError("meta-analysis supports 1 or 2 endpoints")
        if not self.studies:
            raise DomainError("need at least one study")
        for s in self.studies:
            if s.n_endpoints != n_ep:
                raise DomainError(
                    f"study {s.study_id!r} reports {s.n_endpoints} endpoints, expected {n_ep}"
                )
        if len(self.tau_priors) != n_ep:
            raise DomainError("need one heterogeneity prior per endpoint")
        if self.mu_prior.n_endpoints != n_ep:
            raise DomainError("mixture prior dimension must match the endpoint count")
        if n_ep == 1:
            if self.rho != 0.0:
                raise DomainError("rho must be 0 with a single endpoint")
            if self.kappa is not None:
                raise DomainError("kappa must be absent with a single endpoint")
        else:
            if abs(self.rho) >= CORRELATION_CONDITIONING_LIMIT:
                raise DomainError("between-effect correlation too close to +/-1 to condition on")
            for k in self._kappas():
                if abs(k) >= CORRELATION_CONDITIONING_LIMIT:
                    raise DomainError("within-study correlation too close to +/-1 to condition on")

    def _kappas(self) -> list[float]:
        default = 0.0 if self.kappa is None else self.kappa
        return [s.kappa if s.kappa is not None else default for s in self.studies]

    @property
    def n_endpoints(self) -> int:
        return len(self.endpoints)

    @property
    def n_studies(self) -> int:
        return len(self.studies)


@dataclass(frozen=True)
class PosteriorDraws:
    """Pooled posterior draws from the hierarchical fit.

    ``mu`` is (L, E); ``tau2`` holds the phase-II heterogeneity sd draws,
    also (L, E); ``theta2`` the study-specific effects (L, J, E).
    """

    mu: np.ndarray
    tau2: np.ndarray
    theta2: np.ndarray
    diagnostics: ChainDiagnostics
    endpoint_ids: tuple[str, ...]

    def __post_init__(self):
        if self.mu.shape[0] != self.tau2.shape[0]:
            raise DomainError("mu and tau2 must have the same number of draws")
        if np.any(self.tau2 < 0):
            raise DomainError("heterogeneity draws must be nonnegative")

    @property
    def n_draws(self) -> int:
        return self.mu.shape[0]


def _log_density_factory(inp: MetaAnalysisInput):
    """Vectorized joint log density over the unconstrained parameter vector."""
    n_ep = inp.n_endpoints
    n_st = inp.n_studies
    theta_hat = np.array([s.theta_hat for s in inp.studies])     # (J, E)
    se = np.array([[1.0 / math.sqrt(i) for i in s.fisher_info] for s in inp.studies])
    kappas = np.array(inp._kappas())
    z_scales = np.array([p.scale_z for p in inp.tau_priors])
    prior = inp.mu_prior
    rho = inp.rho

    if n_ep == 1:
        dim = 2 + n_st

        def log_density(x: np.ndarray) -> np.ndarray:
            mu = x[:, 0]
            log_tau = x[:, 1]
            eps = x[:, 2:]
            tau = np.exp(log_tau)
            theta = mu[:, None] + tau[:, None] * eps          # (C, J)
            lp = prior.logpdf(mu[:, None])
            # half-normal prior on tau plus the log-transform Jacobian
            lp = lp - 0.5 * (tau / z_scales[0]) ** 2 + log_tau
            lp = lp + np.sum(norm_logpdf(eps), axis=1)
            resid = (theta_hat[None, :, 0] - theta) / se[None, :, 0]
            lp = lp - 0.5 * np.sum(resid * resid, axis=1)
            return lp

        blocks = [[0], [1]] + [[2 + j] for j in range(n_st)]
        names = ["mu", "log_tau"] + [f"eps_{j}" for j in range(n_st)]
        return log_density, blocks, names, dim

    dim = 4 + 2 * n_st
    sqrt_1mr2 = math.sqrt(1.0 - rho * rho)
    kap_norm = -0.5 * np.log1p(-kappas ** 2)                      # (J,)
    one_minus_k2 = 1.0 - kappas ** 2

    def log_density(x: np.ndarray) -> np.ndarray:
        mu = x[:, 0:2]
        log_tau = x[:, 2:4]
        tau = np.exp(log_tau)
        eps = x[:, 4:].reshape(x.shape[0], n_st, 2)               # (C, J, 2)
        theta_p = mu[:, None, 0] + tau[:, None, 0] * eps[:, :, 0]
        theta_s = mu[:, None, 1] + tau[:, None, 1] * (
            rho * eps[:, :, 0] + sqrt_1mr2 * eps[:, :, 1]
        )
        lp = prior.logpdf(mu)
        lp = lp - 0.5 * np.sum((tau / z_scales[None, :]) ** 2, axis=1) + np.sum(log_tau, axis=1)
        lp = lp + np.sum(norm_logpdf(eps), axis=(1, 2))
        zp = (theta_hat[None, :, 0] - theta_p) / se[None, :, 0]
        zs = (theta_hat[None, :, 1] - theta_s) / se[None, :, 1]
        quad = (zp * zp - 2.0 * kappas[None, :] * zp * zs + zs * zs) / one_minus_k2[None, :]
        lp = lp - 0.5 * np.sum(quad, axis=1) - np.sum(kap_norm)
        return lp

    blocks = [[0, 1], [2], [3]] + [[4 + 2 * j, 5 + 2 * j] for j in range(n_st)]
    names = ["mu_P", "mu_S", "log_tau_P", "log_tau_S"]
    for j in range(n_st):
        names += [f"eps_{j}_P", f"eps_{j}_S"]
    return log_density, blocks, names, dim


def _initial_point(inp: MetaAnalysisInput) -> np.ndarray:
    theta_hat = np.array([s.theta_hat for s in inp.studies])
    infos = np.array([s.fisher_info for s in inp.studies])
    pooled = np.sum(theta_hat * infos, axis=0) / np.sum(infos, axis=0)
    log_tau0 = [math.log(max(p.median, 1e-12)) for p in inp.tau_priors]
    eps0 = np.zeros(inp.n_studies * inp.n_endpoints)
    return np.concatenate([pooled, log_tau0, eps0])


def fit(inp: MetaAnalysisInput, cfg: McmcConfig) -> PosteriorDraws:
    """Fit the hierarchical model and return pooled posterior draws.

    Fails with :class:`~poskit.errors.ConvergenceError` when any parameter's
    split-R-hat exceeds 1.05; low bulk ESS only warns.
    """
    log_density, blocks, names, _ = _log_density_factory(inp)
    init = _initial_point(inp)
    result = sample(log_density, init, cfg, blocks=blocks, param_names=names)
    diag = result.diagnostics
    if diag.max_rhat() > RHAT_LIMIT:
        raise ConvergenceError(
            f"split-Rhat exceeded {RHAT_LIMIT} for at least one parameter",
            rhat=diag.rhat_table(),
        )
    if diag.min_ess() < ESS_WARN_FLOOR:
        warnings.warn(
            f"bulk ESS below {ESS_WARN_FLOOR:.0f} for at least one parameter",
            RuntimeWarning,
            stacklevel=2,
        )
    return _assemble(inp, result)


def _assemble(inp: MetaAnalysisInput, result: McmcResult) -> PosteriorDraws:
    draws = result.draws
    n_ep = inp.n_endpoints
    n_st = inp.n_studies
    mu = draws[:, :n_ep]
    tau = np.exp(draws[:, n_ep : 2 * n_ep])
    eps = draws[:, 2 * n_ep :].reshape(draws.shape[0], n_st, n_ep)
    theta2 = np.empty_like(eps)
    theta2[:, :, 0] = mu[:, None, 0] + tau[:, None, 0] * eps[:, :, 0]
    if n_ep == 2:
        rho = inp.rho
        theta2[:, :, 1] = mu[:, None, 1] + tau[:, None, 1] * (
            rho * eps[:, :, 0] + math.sqrt(1.0 - rho * rho) * eps[:, :, 1]
        )
    return PosteriorDraws(
        mu=mu,
        tau2=tau,
        theta2=theta2,
        diagnostics=result.diagnostics,
        endpoint_ids=tuple(e.id for e in inp.endpoints),
    )


@dataclass(frozen=True)
class OraclePosterior:
    """Exact two-component posterior for one study / one endpoint / tau = 0."""

    weights: tuple[float, float]
    means: tuple[float, float]
    sds: tuple[float, float]

    def mean(self) -> float:
        return self.weights[0] * self.means[0] + self.weights[1] * self.means[1]

    def sd(self) -> float:
        second = sum(w * (s * s + m * m) for w, m, s in zip(self.weights, self.means, self.sds))
        return math.sqrt(second - self.mean() ** 2)


def oracle_posterior_mixture(theta_hat: float, info: float, prior: MixturePrior) -> OraclePosterior:
    """Conjugate posterior under the mixture prior with heterogeneity disabled.

    Component weights update by prior weight times the marginal likelihood
    N(theta_hat; component mean, component var + 1/info); each component's
    posterior is the usual normal-normal update.
    """
    if prior.n_endpoints != 1:
        raise DomainError("oracle requires a single-endpoint mixture prior")
    if info <= 0:
        raise DomainError("info must be strictly positive")
    prior_means = (0.0, prior.tpp_mean[0])
    prior_sds = (prior.null_sds[0], prior.tpp_sds[0])
    prior_weights = (prior.omega, 1.0 - prior.omega)

    log_marg = []
    post_means = []
    post_sds = []
    for m, s in zip(prior_means, prior_sds):
        marg_var = s * s + 1.0 / info
        log_marg.append(float(norm_logpdf(theta_hat, m, math.sqrt(marg_var))))
        prec = info + 1.0 / (s * s)
        post_means.append((info * theta_hat + m / (s * s)) / prec)
        post_sds.append(1.0 / math.sqrt(prec))

    log_w = []
    for w, lm in zip(prior_weights, log_marg):
        log_w.append(-np.inf if w == 0.0 else math.log(w) + lm)
    norm = np.logaddexp(log_w[0], log_w[1])
    weights = tuple(float(np.exp(lw - norm)) for lw in log_w)
    return OraclePosterior(weights=weights, means=tuple(post_means), sds=tuple(post_sds))


def posterior_summary(
    draws: np.ndarray,
    quantiles: tuple[float, ...] = (0.025, 0.25, 0.5, 0.75, 0.975),
) -> dict[str, float]:
    """Mean and type-7 (linear-interpolation) quantiles of a draw vector."""
    draws = np.asarray(draws, dtype=float)
    if draws.size == 0:
        raise DomainError("cannot summarize an empty draw vector")
    out = {"mean": float(draws.mean())}
    for q in quantiles:
        out[f"q{q:g}"] = float(np.quantile(draws, q, method="linear"))
    return out
