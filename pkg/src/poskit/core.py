"""Shared domain types: endpoints, study estimates, priors and trial designs.

Sign convention: every effect scale declares a ``direction``. The pipeline
re-orients all quantities to benefit-positive at ingestion and flips back at
reporting; the types below accept either orientation and validate tail
conditions on whichever side of zero the threshold sits.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Sequence

import numpy as np

from .distributions import (
    HALF_NORMAL_MEDIAN_FACTOR,
    bivariate_norm_logpdf,
    norm_cdf,
    norm_logpdf,
    norm_quantile,
)
from .errors import DomainError

ENDPOINT_KINDS = (
    "continuous-normal",
    "log-hazard-ratio",
    "log-rate-ratio",
    "log-odds-ratio",
    "risk-difference-binary",
)

DIRECTIONS = ("benefit-positive", "benefit-negative")

# Probability left in the "wrong" tail when sizing mixture components.
COMPONENT_TAIL_PROB = 0.01
COMPONENT_TAIL_Z = float(norm_quantile(1.0 - COMPONENT_TAIL_PROB))

HETEROGENEITY_CATEGORIES = ("very-small", "small", "moderate", "substantial", "large")

# Provisional multipliers of the unit-information sd; ascending in category.
# Direct scale entry is always permitted and overrides these.
DEFAULT_CATEGORY_MULTIPLIERS = {
    "very-small": 0.0625,
    "small": 0.125,
    "moderate": 0.25,
    "substantial": 0.5,
    "large": 1.0,
}


@dataclass(frozen=True)
class EndpointSpec:
    """One efficacy endpoint: its scale, orientation and market-access threshold."""

    id: str
    kind: str
    direction: str
    tpp_threshold: float

    def __post_init__(self):
        if self.kind not in ENDPOINT_KINDS:
            raise DomainError(f"unknown endpoint kind {self.kind!r}")
        if self.direction not in DIRECTIONS:
            raise DomainError(f"unknown direction {self.direction!r}")
        if self.oriented_threshold() <= 0:
            raise DomainError(
                f"endpoint {self.id!r}: tpp_threshold must sit strictly on the "
                f"benefit side of 0 under direction {self.direction!r}"
            )

    @property
    def sign(self) -> float:
        return 1.0 if self.direction == "benefit-positive" else -1.0

    def oriented_threshold(self) -> float:
        """TPP threshold on the internal benefit-positive scale."""
        return self.sign * self.tpp_threshold

    def orient(self, value):
        """Map a raw effect value onto the benefit-positive scale (self-inverse)."""
        return self.sign * np.asarray(value, dtype=float)


@dataclass(frozen=True)
class StudyEstimate:
    """Per-study effect estimates with their Fisher information.

    ``theta_hat`` and ``fisher_info`` are tuples aligned with the declared
    endpoint order (length 1 or 2). ``kappa`` is the within-patient
    correlation of the two endpoint responses; only meaningful (and only
    allowed) when two endpoints are reported.
    """

    study_id: str
    theta_hat: tuple[float, ...]
    fisher_info: tuple[float, ...]
    kappa: float | None = None

    def __post_init__(self):
        if len(self.theta_hat) != len(self.fisher_info):
            raise DomainError(f"study {self.study_id!r}: estimate/information length mismatch")
        if len(self.theta_hat) not in (1, 2):
            raise DomainError(f"study {self.study_id!r}: expected 1 or 2 endpoints")
        if any(i <= 0 for i in self.fisher_info):
            raise DomainError(f"study {self.study_id!r}: fisher_info must be strictly positive")
        if self.kappa is not None:
            if len(self.theta_hat) == 1:
                raise DomainError(f"study {self.study_id!r}: kappa requires two endpoints")
            if not -1.0 <= self.kappa <= 1.0:
                raise DomainError(f"study {self.study_id!r}: kappa must lie in [-1, 1]")

    @property
    def n_endpoints(self) -> int:
        return len(self.theta_hat)


@dataclass(frozen=True)
class HeterogeneityPrior:
    """Half-normal prior HN(scale_z^2) for a between-study heterogeneity sd."""

    scale_z: float
    category: str | None = None
    unit_info_sd: float | None = None

    def __post_init__(self):
        if self.scale_z <= 0:
            raise DomainError("heterogeneity scale_z must be strictly positive")
        if self.category is not None and self.category not in HETEROGENEITY_CATEGORIES:
            raise DomainError(f"unknown heterogeneity category {self.category!r}")

    @classmethod
    def from_category(
        cls,
        category: str,
        unit_info_sd: float,
        multipliers: dict[str, float] | None = None,
    ) -> "HeterogeneityPrior":
        """Scale chosen so the prior median equals multiplier * unit-information sd."""
        if unit_info_sd <= 0:
            raise DomainError("unit_info_sd must be strictly positive")
        table = DEFAULT_CATEGORY_MULTIPLIERS if multipliers is None else multipliers
        if category not in table:
            raise DomainError(f"unknown heterogeneity category {category!r}")
        median = table[category] * unit_info_sd
        return cls(
            scale_z=half_normal_scale_from_median(median),
            category=category,
            unit_info_sd=unit_info_sd,
        )

    @property
    def median(self) -> float:
        return self.scale_z * HALF_NORMAL_MEDIAN_FACTOR


@dataclass(frozen=True)
class MixturePrior:
    """Two-component normal mixture prior for the average treatment effect.

    Component 1 ("null") is centered at zero; component 2 ("TPP") at the
    thresholds. :meth:`from_thresholds` builds the calibrated shape, whose
    component sds put probability ``COMPONENT_TAIL_PROB`` beyond the opposite
    component's center (checked by :meth:`validate_tails`). Direct
    construction permits arbitrary component sds, which analyses and tests
    occasionally need. Supports one or two endpoints; ``rho`` is the shared
    within-component correlation (ignored for one endpoint).
    """

    omega: float
    null_mean: tuple[float, ...]
    tpp_mean: tuple[float, ...]
    null_sds: tuple[float, ...]
    tpp_sds: tuple[float, ...]
    rho: float = 0.0

    def __post_init__(self):
        if not 0.0 <= self.omega <= 1.0:
            raise DomainError("mixture weight omega must lie in [0, 1]")
        d = len(self.tpp_mean)
        if d not in (1, 2):
            raise DomainError("mixture prior supports 1 or 2 endpoints")
        if not (len(self.null_mean) == len(self.null_sds) == len(self.tpp_sds) == d):
            raise DomainError("mixture prior field lengths disagree")
        if any(m != 0.0 for m in self.null_mean):
            raise DomainError("null component must be centered at zero")
        if any(s <= 0 for s in self.null_sds) or any(s <= 0 for s in self.tpp_sds):
            raise DomainError("component sds must be strictly positive")
        if d == 2 and not -1.0 < self.rho < 1.0:
            raise DomainError("rho must lie strictly in (-1, 1)")

    @classmethod
    def from_thresholds(
        cls,
        omega: float,
        thresholds: Sequence[float],
        rho: float = 0.0,
    ) -> "MixturePrior":
        thresholds = tuple(float(t) for t in thresholds)
        sds = tuple(solve_component_sd(t) for t in thresholds)
        prior = cls(
            omega=omega,
            null_mean=(0.0,) * len(thresholds),
            tpp_mean=thresholds,
            null_sds=sds,
            tpp_sds=sds,
            rho=rho,
        )
        prior.validate_tails()
        return prior

    @property
    def n_endpoints(self) -> int:
        return len(self.tpp_mean)

    def validate_tails(self, tol: float = 1e-8) -> None:
        """Check the 1%-tail conditions that define the component sds."""
        for delta, s1, s2 in zip(self.tpp_mean, self.null_sds, self.tpp_sds):
            if delta == 0.0:
                raise DomainError("TPP component mean must be nonzero")
            # Null component mass beyond the threshold, on the threshold's side.
            null_tail = float(norm_cdf(-abs(delta) / s1))
            # TPP component mass on the wrong side of zero.
            tpp_tail = float(norm_cdf(-abs(delta) / s2))
            if abs(null_tail - COMPONENT_TAIL_PROB) > tol:
                raise DomainError(
                    f"null component tail {null_tail:.3e} differs from {COMPONENT_TAIL_PROB}"
                )
            if abs(tpp_tail - COMPONENT_TAIL_PROB) > tol:
                raise DomainError(
                    f"TPP component tail {tpp_tail:.3e} differs from {COMPONENT_TAIL_PROB}"
                )

    def component_logpdfs(self, mu: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
        """Log densities of the two components at mu (last axis = endpoints)."""
        mu = np.asarray(mu, dtype=float)
        if self.n_endpoints == 1:
            x = mu[..., 0] if mu.ndim > 1 else mu
            lp1 = norm_logpdf(x, 0.0, self.null_sds[0])
            lp2 = norm_logpdf(x, self.tpp_mean[0], self.tpp_sds[0])
        else:
            x, y = mu[..., 0], mu[..., 1]
            lp1 = bivariate_norm_logpdf(x, y, 0.0, 0.0, self.null_sds[0], self.null_sds[1], self.rho)
            lp2 = bivariate_norm_logpdf(
                x, y, self.tpp_mean[0], self.tpp_mean[1], self.tpp_sds[0], self.tpp_sds[1], self.rho
            )
        return lp1, lp2

    def logpdf(self, mu: np.ndarray) -> np.ndarray:
        """Marginal mixture log density, vectorized over leading axes."""
        lp1, lp2 = self.component_logpdfs(mu)
        if self.omega == 0.0:
            return lp2
        if self.omega == 1.0:
            return lp1
        return np.logaddexp(lp1 + math.log(self.omega), lp2 + math.log(1.0 - self.omega))


@dataclass(frozen=True)
class TrialDesign:
    """Planned analysis of one trial: design information and test levels.

    ``info_levels`` maps endpoint id to the design Fisher information.
    ``alpha`` maps endpoint id to the one-sided significance level; endpoints
    absent from ``alpha`` are not tested in this trial.
    """

    phase: str
    info_levels: dict[str, float]
    alpha: dict[str, float] = field(default_factory=dict)

    def __post_init__(self):
        if not self.info_levels:
            raise DomainError("trial design needs at least one endpoint information level")
        for eid, info in self.info_levels.items():
            if info <= 0:
                raise DomainError(f"design information for {eid!r} must be strictly positive")
        for eid, a in self.alpha.items():
            if eid not in self.info_levels:
                raise DomainError(f"alpha given for unknown endpoint {eid!r}")
            if not 0.0 < a < 0.5:
                raise DomainError(f"alpha for {eid!r} must lie in (0, 0.5)")


def half_normal_scale_from_median(median: float) -> float:
    """Half-normal scale whose prior median equals ``median``."""
    if median < 0:
        raise DomainError("half-normal median must be nonnegative")
    return median / HALF_NORMAL_MEDIAN_FACTOR


def unit_information_sd(endpoint: EndpointSpec, **nuisance) -> float:
    """Standard error of an effect estimate from two responses or one event.

    Continuous endpoints need ``response_sd``; log-odds ratios need the common
    ``response_prob``; the event-driven scales (log hazard/rate ratio) use the
    single-event convention and need nothing.
    """
    kind = endpoint.kind
    if kind == "continuous-normal":
        sd = nuisance.get("response_sd")
        if sd is None:
            raise DomainError("continuous endpoint needs nuisance parameter response_sd")
        if sd <= 0:
            raise DomainError("response_sd must be strictly positive")
        return sd * math.sqrt(2.0)
    if kind in ("log-hazard-ratio", "log-rate-ratio"):
        return 1.0
    if kind == "log-odds-ratio":
        p = nuisance.get("response_prob")
        if p is None:
            raise DomainError("log-odds endpoint needs nuisance parameter response_prob")
        if not 0.0 < p < 1.0:
            raise DomainError("response_prob must lie strictly in (0, 1)")
        return math.sqrt(2.0 / (p * (1.0 - p)))
    raise DomainError(f"no unit-information sd convention for endpoint kind {kind!r}")


def solve_component_sd(delta: float) -> float:
    """Mixture component sd leaving 1% mass beyond the opposite center.

    Solves P{X >= |delta|} = 0.01 for X ~ N(0, sd^2); the same sd serves the
    TPP component by symmetry.
    """
    if delta == 0.0:
        raise DomainError("TPP threshold must be nonzero to size mixture components")
    return abs(delta) / COMPONENT_TAIL_Z
