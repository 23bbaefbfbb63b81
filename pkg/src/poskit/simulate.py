"""Monte Carlo simulation of the planned phase III program.

Works on the benefit-positive scale throughout: significance means the
standardized estimate exceeds the upper critical value, and pooled estimates
must exceed thresholds. Callers holding benefit-negative scales re-orient
before entering (the pipeline does this at ingestion).

Per posterior draw, every trial is simulated from the canonical sampling
model at its design information, even after an earlier endpoint has already
failed, so per-endpoint diagnostics stay complete.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np
from scipy.special import erfcx

from .core import TrialDesign
from .distributions import norm_cdf, norm_quantile
from .errors import DomainError
from .map_prior import MapDraws
from .rng import stream


@dataclass(frozen=True)
class SuccessRule:
    """Which endpoints must clear which hurdle.

    ``significance``: p < alpha in all trials. ``tpp``: inverse-variance
    pooled estimate beyond the TPP threshold. ``trend``: pooled estimate on
    the benefit side of zero.
    """

    significance: tuple[str, ...]
    tpp: tuple[str, ...] = ()
    trend: tuple[str, ...] = ()

    def __post_init__(self):
        if not self.significance:
            raise DomainError("success rule needs at least one significance endpoint")
        overlap = set(self.tpp) & set(self.trend)
        if overlap:
            raise DomainError(f"endpoints {sorted(overlap)} listed as both TPP and trend-only")

    def all_ids(self) -> set[str]:
        return set(self.significance) | set(self.tpp) | set(self.trend)


@dataclass(frozen=True)
class EndpointDiagnostics:
    p_significant_all_trials: float
    p_pooled_beyond_tpp: float | None
    p_pooled_trend: float


@dataclass(frozen=True)
class ProgramOutcome:
    """Staged Monte Carlo pass probabilities with binomial standard errors."""

    n_draws: int
    n_significant: int
    n_efficacy: int
    per_endpoint: dict[str, EndpointDiagnostics] = field(default_factory=dict)

    @property
    def p_significance(self) -> float:
        return self.n_significant / self.n_draws

    @property
    def p_efficacy(self) -> float:
        return self.n_efficacy / self.n_draws

    @property
    def se_significance(self) -> float:
        p = self.p_significance
        return math.sqrt(p * (1.0 - p) / self.n_draws)

    @property
    def se_efficacy(self) -> float:
        p = self.p_efficacy
        return math.sqrt(p * (1.0 - p) / self.n_draws)


def simulate_program(
    map_draws: MapDraws,
    endpoint_ids: tuple[str, ...],
    designs: tuple[TrialDesign, ...],
    rule: SuccessRule,
    tpp_thresholds: dict[str, float] | None = None,
    kappa: float = 0.0,
    seed: int = 0,
) -> ProgramOutcome:
    """Simulate every trial for every draw and apply the success rule.

    ``endpoint_ids`` names the endpoint axis of ``map_draws.theta3``;
    ``designs`` has one entry per trial, each holding design information for
    every endpoint it measures and alphas for the tested ones.
    """
    n_ep = map_draws.n_endpoints
    if len(endpoint_ids) != n_ep:
        raise DomainError("endpoint_ids must match the endpoint axis of the draws")
    if len(designs) != map_draws.n_trials:
        raise DomainError("need one trial design per simulated trial")
    if not -1.0 <= kappa <= 1.0:
        raise DomainError("kappa must lie in [-1, 1]")
    unknown = rule.all_ids() - set(endpoint_ids)
    if unknown:
        raise DomainError(f"success rule references unknown endpoints {sorted(unknown)}")
    thresholds = dict(tpp_thresholds or {})
    missing_thr = set(rule.tpp) - set(thresholds)
    if missing_thr:
        raise DomainError(f"missing TPP thresholds for {sorted(missing_thr)}")
    for d in designs:
        for eid in endpoint_ids:
            if eid not in d.info_levels:
                raise DomainError(f"trial {d.phase!r} lacks design information for {eid!r}")
        for eid in rule.significance:
            if eid not in d.alpha:
                raise DomainError(f"trial {d.phase!r} lacks a test level for {eid!r}")

    col = {eid: i for i, eid in enumerate(endpoint_ids)}
    L, K = map_draws.n_draws, map_draws.n_trials
    rng = stream(seed, 0)

    # Simulated estimates per (draw, trial, endpoint), correlated within trial.
    z = rng.standard_normal((L, K, n_ep))
    if n_ep == 2 and kappa != 0.0:
        z1 = z[:, :, 1].copy()
        z[:, :, 1] = kappa * z[:, :, 0] + math.sqrt(1.0 - kappa * kappa) * z1

    infos = np.array([[d.info_levels[eid] for eid in endpoint_ids] for d in designs])  # (K, E)
    ses = 1.0 / np.sqrt(infos)
    estimates = map_draws.theta3 + z * ses[None, :, :]

    # Significance: standardized estimate above the critical value in all trials.
    sig_all = np.ones(L, dtype=bool)
    sig_by_ep: dict[str, np.ndarray] = {}
    for eid in rule.significance:
        e = col[eid]
        crit = np.array([norm_quantile(1.0 - d.alpha[eid]) for d in designs])  # (K,)
        zstat = estimates[:, :, e] * np.sqrt(infos[None, :, e])
        ok = np.all(zstat > crit[None, :], axis=1)
        sig_by_ep[eid] = ok
        sig_all &= ok

    # Pooled inverse-variance means per endpoint across the K trials.
    pooled = np.sum(estimates * infos[None, :, :], axis=1) / np.sum(infos, axis=0)[None, :]

    efficacy = sig_all.copy()
    for eid in rule.tpp:
        efficacy &= pooled[:, col[eid]] > thresholds[eid]
    for eid in rule.trend:
        efficacy &= pooled[:, col[eid]] > 0.0

    per_endpoint = {}
    for eid in endpoint_ids:
        e = col[eid]
        per_endpoint[eid] = EndpointDiagnostics(
            p_significant_all_trials=float(sig_by_ep[eid].mean()) if eid in sig_by_ep else float("nan"),
            p_pooled_beyond_tpp=(
                float((pooled[:, e] > thresholds[eid]).mean()) if eid in thresholds else None
            ),
            p_pooled_trend=float((pooled[:, e] > 0.0).mean()),
        )

    return ProgramOutcome(
        n_draws=L,
        n_significant=int(sig_all.sum()),
        n_efficacy=int(efficacy.sum()),
        per_endpoint=per_endpoint,
    )


def pooled_estimate(estimates, infos) -> float:
    """Inverse-variance weighted mean of per-trial estimates."""
    estimates = np.asarray(estimates, dtype=float)
    infos = np.asarray(infos, dtype=float)
    if estimates.size == 0 or estimates.shape != infos.shape:
        raise DomainError("need equally many estimates and informations, at least one")
    if np.any(infos <= 0):
        raise DomainError("informations must be strictly positive")
    return float(np.sum(estimates * infos) / np.sum(infos))


def analytic_power(mu: float, info: float, alpha: float) -> float:
    """Probability the standardized estimate clears the one-sided critical value."""
    if info <= 0:
        raise DomainError("info must be strictly positive")
    if not 0.0 < alpha < 1.0:
        raise DomainError("alpha must lie in (0, 1)")
    return float(norm_cdf(mu * math.sqrt(info) - norm_quantile(1.0 - alpha)))


def conditional_mle_bias(theta: float, info: float, alpha: float) -> float:
    """Expected overshoot of the estimate given significance was achieved.

    Truncated-normal mean above the critical value: hazard of the standard
    normal at a = z_{1-alpha} - theta*sqrt(info), scaled by the standard
    error. Evaluated via erfcx so deep truncations stay finite.
    """
    if info <= 0:
        raise DomainError("info must be strictly positive")
    if not 0.0 < alpha < 1.0:
        raise DomainError("alpha must lie in (0, 1)")
    a = float(norm_quantile(1.0 - alpha)) - theta * math.sqrt(info)
    # hazard(a) = phi(a) / (1 - Phi(a)) = sqrt(2/pi) / erfcx(a / sqrt(2))
    hazard = math.sqrt(2.0 / math.pi) / float(erfcx(a / math.sqrt(2.0)))
    return hazard / math.sqrt(info)


def truncated_significant_mean_mc(
    theta: float, info: float, alpha: float, n: int, seed: int
) -> float:
    """Monte Carlo mean of the estimate conditional on significance.

    Independent check for :func:`conditional_mle_bias`: draws estimates until
    ``n`` significant ones accumulate is avoided by direct filtering, so the
    caller should pick theta/alpha/info leaving a non-trivial pass rate.
    """
    rng = stream(seed, 0)
    se = 1.0 / math.sqrt(info)
    crit = float(norm_quantile(1.0 - alpha)) * se
    draws = theta + se * rng.standard_normal(n)
    passed = draws[draws > crit]
    if passed.size == 0:
        raise DomainError("no significant draws; increase n or move theta")
    return float(passed.mean())
