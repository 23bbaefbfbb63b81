"""Meta-analytic-predictive sampling of phase III study effects.

Each posterior draw of the program-level mean is paired with a fresh draw of
the phase III heterogeneity sds from their half-normal priors (phase III
heterogeneity is never learned from phase II data), and the K trial-specific
effects are then drawn around that mean. Row ``l`` of the output derives from
row ``l`` of the posterior, so downstream stages stay aligned by position.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Callable

import numpy as np

from .core import HeterogeneityPrior
from .errors import DomainError
from .meta_analysis import PosteriorDraws
from .rng import stream


@dataclass(frozen=True)
class Phase3HeterogeneitySpec:
    """Half-normal priors for the phase III between-study sds."""

    tau_priors: tuple[HeterogeneityPrior, ...]
    rho: float = 0.0

    def __post_init__(self):
        if len(self.tau_priors) not in (1, 2):
            raise DomainError("expected 1 or 2 phase III heterogeneity priors")
        if len(self.tau_priors) == 2 and not -1.0 < self.rho < 1.0:
            raise DomainError("rho must lie strictly in (-1, 1)")


@dataclass(frozen=True)
class MapDraws:
    """Sampled phase III effects: theta3 is (L, K, E), tau3 is (L, E)."""

    theta3: np.ndarray
    tau3: np.ndarray
    source_mu_index: np.ndarray

    def __post_init__(self):
        if self.theta3.ndim != 3:
            raise DomainError("theta3 must have shape (draws, trials, endpoints)")
        if self.tau3.shape != (self.theta3.shape[0], self.theta3.shape[2]):
            raise DomainError("tau3 shape must match (draws, endpoints)")

    @property
    def n_draws(self) -> int:
        return self.theta3.shape[0]

    @property
    def n_trials(self) -> int:
        return self.theta3.shape[1]

    @property
    def n_endpoints(self) -> int:
        return self.theta3.shape[2]


def sample_phase3_effects(
    posterior: PosteriorDraws,
    spec: Phase3HeterogeneitySpec,
    n_trials: int,
    seed: int,
) -> MapDraws:
    """Draw trial-specific phase III effects for every posterior row."""
    if n_trials < 1:
        raise DomainError("need at least one phase III trial")
    n_ep = posterior.mu.shape[1]
    if len(spec.tau_priors) != n_ep:
        raise DomainError("phase III heterogeneity priors must match the endpoint count")
    L = posterior.n_draws
    rng = stream(seed, 0)

    scales = np.array([p.scale_z for p in spec.tau_priors])
    tau3 = np.abs(rng.standard_normal((L, n_ep))) * scales[None, :]

    z = rng.standard_normal((L, n_trials, n_ep))
    theta3 = np.empty((L, n_trials, n_ep))
    theta3[:, :, 0] = posterior.mu[:, None, 0] + tau3[:, None, 0] * z[:, :, 0]
    if n_ep == 2:
        rho = spec.rho
        mix = rho * z[:, :, 0] + math.sqrt(1.0 - rho * rho) * z[:, :, 1]
        theta3[:, :, 1] = posterior.mu[:, None, 1] + tau3[:, None, 1] * mix
    return MapDraws(theta3=theta3, tau3=tau3, source_mu_index=np.arange(L))


def predictive_prob(
    draws: MapDraws,
    predicate: Callable[[np.ndarray], np.ndarray],
) -> tuple[float, float]:
    """Monte Carlo probability of a predicate over the sampled effects.

    ``predicate`` receives the full (L, K, E) array and must return one
    boolean per draw. Returns the fraction and its binomial standard error.
    """
    hits = np.asarray(predicate(draws.theta3), dtype=bool)
    if hits.shape != (draws.n_draws,):
        raise DomainError("predicate must return one boolean per draw")
    p = float(hits.mean())
    se = math.sqrt(p * (1.0 - p) / draws.n_draws)
    return p, se
