"""Bridging early-phase evidence to different phase III endpoints.

Experts supply 10th/50th/90th percentiles of the phase III effect conditional
on a handful of anchor values of the early-phase effect. Percentile curves
are interpolated linearly between anchors (and extrapolated with the nearest
segment's slope), a parametric shape is fitted to each interpolated triple,
and one variate per posterior draw is sampled from it. Both endpoints consume
the same early-phase draw, which is what induces their dependence.

Draws whose extrapolated percentiles cross are rejected and the early-phase
value resampled from the supplied pool; more than 0.5% rejections aborts the
run rather than silently distorting the tail.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Mapping, Sequence

import numpy as np
from scipy.special import ndtri
from scipy.stats import t as student_t

from .errors import DomainError, SchemaError
from .rng import stream

PERCENTILE_LEVELS = (10, 50, 90)
_Z90 = float(ndtri(0.9))
STUDENT_DFS = (3.0, 5.0, 10.0)
REJECTION_LIMIT_FRACTION = 0.005
_DEGENERATE_SPREAD_TOL = 1e-12
_LOGNORMAL_SKEW_TOL = 1e-9


@dataclass(frozen=True)
class ConditionalQuantileSet:
    """Elicited percentile triple of a target effect at each anchor value."""

    conditioning_values: tuple[float, ...]
    p10: tuple[float, ...]
    p50: tuple[float, ...]
    p90: tuple[float, ...]
    map_percentiles: tuple[float, ...] | None = None

    def __post_init__(self):
        n = len(self.conditioning_values)
        if n < 2:
            raise DomainError("need at least two conditioning anchors")
        if not (len(self.p10) == len(self.p50) == len(self.p90) == n):
            raise DomainError("percentile rows must match the anchor count")
        if any(b <= a for a, b in zip(self.conditioning_values, self.conditioning_values[1:])):
            raise DomainError("conditioning anchors must be strictly ascending")
        for lo, mid, hi in zip(self.p10, self.p50, self.p90):
            if not lo < mid < hi:
                raise DomainError("each anchor needs p10 < p50 < p90")
        if self.map_percentiles is not None and len(self.map_percentiles) != n:
            raise DomainError("map_percentiles must match the anchor count")

    @classmethod
    def from_dict(cls, doc: Mapping) -> "ConditionalQuantileSet":
        try:
            return cls(
                conditioning_values=tuple(float(v) for v in doc["conditioning_values"]),
                p10=tuple(float(v) for v in doc["p10"]),
                p50=tuple(float(v) for v in doc["p50"]),
                p90=tuple(float(v) for v in doc["p90"]),
                map_percentiles=(
                    tuple(float(v) for v in doc["map_percentiles"])
                    if "map_percentiles" in doc
                    else None
                ),
            )
        except KeyError as exc:
            raise SchemaError(f"conditional quantile set is missing field {exc}") from exc

    def row(self, p: int) -> tuple[float, ...]:
        if p not in PERCENTILE_LEVELS:
            raise DomainError(f"percentile must be one of {PERCENTILE_LEVELS}")
        return {10: self.p10, 50: self.p50, 90: self.p90}[p]


def _interp_extrap(x, xs: np.ndarray, ys: np.ndarray):
    """Piecewise-linear interpolation, linear extrapolation at each end."""
    x = np.asarray(x, dtype=float)
    out = np.interp(x, xs, ys)
    left = x < xs[0]
    if np.any(left):
        slope = (ys[1] - ys[0]) / (xs[1] - xs[0])
        out = np.where(left, ys[0] + slope * (x - xs[0]), out)
    right = x > xs[-1]
    if np.any(right):
        slope = (ys[-1] - ys[-2]) / (xs[-1] - xs[-2])
        out = np.where(right, ys[-1] + slope * (x - xs[-1]), out)
    return out


def interpolate_percentile(qs: ConditionalQuantileSet, p: int, a):
    """Percentile-p of the conditional prior at conditioning value(s) ``a``."""
    xs = np.asarray(qs.conditioning_values, dtype=float)
    ys = np.asarray(qs.row(p), dtype=float)
    out = _interp_extrap(a, xs, ys)
    return float(out) if np.ndim(a) == 0 else out


@dataclass(frozen=True)
class QuantileFit:
    """One fitted three-percentile shape with an inverse-cdf sampler.

    Families: ``normal`` and location-scale ``student-t-{3,5,10}`` store
    (location, scale); the shifted ``log-normal-right``/``-left`` store
    (shift, log-scale, shape).
    """

    family: str
    params: tuple[float, ...]
    residual: float

    def quantile(self, u):
        u = np.asarray(u, dtype=float)
        if np.any((u <= 0.0) | (u >= 1.0)):
            raise DomainError("quantile argument must lie strictly in (0, 1)")
        if self.family == "normal":
            m, s = self.params
            return m + s * ndtri(u)
        if self.family.startswith("student-t-"):
            m, s = self.params
            df = float(self.family.rsplit("-", 1)[1])
            return m + s * student_t.ppf(u, df)
        if self.family == "log-normal-right":
            c, m, s = self.params
            return c + np.exp(m + s * ndtri(u))
        if self.family == "log-normal-left":
            c, m, s = self.params
            return c - np.exp(m - s * ndtri(u))
        raise DomainError(f"unknown family {self.family!r}")

    def sample(self, rng: np.random.Generator, n: int):
        return self.quantile(rng.random(n))


def _ls_location_scale(q: np.ndarray, ref: np.ndarray) -> tuple[float, float, float]:
    """Least-squares (location, scale) against reference quantiles; returns residual."""
    scale = float(np.dot(q - q.mean(), ref - ref.mean()) / np.dot(ref - ref.mean(), ref - ref.mean()))
    loc = float(q.mean() - scale * ref.mean())
    resid = float(np.sum((q - loc - scale * ref) ** 2))
    return loc, scale, resid


def fit_parametric(p10: float, p50: float, p90: float) -> QuantileFit:
    """Best-fitting shape for one percentile triple.

    Candidates: normal, location-scale Student-t (df 3, 5, 10) and the shifted
    log-normal in both orientations. Least-squares residual on the three
    quantiles decides; earlier candidates win ties, so symmetric triples
    always resolve to normal.
    """
    if not p10 < p50 < p90:
        raise DomainError("percentiles must satisfy p10 < p50 < p90")
    q = np.array([p10, p50, p90], dtype=float)
    spread = p90 - p10
    eps = 1e-12 * max(1.0, spread * spread)

    candidates: list[QuantileFit] = []
    loc, scale, resid = _ls_location_scale(q, np.array([-_Z90, 0.0, _Z90]))
    candidates.append(QuantileFit("normal", (loc, scale), resid))
    for df in STUDENT_DFS:
        tq = float(student_t.ppf(0.9, df))
        loc, scale, resid = _ls_location_scale(q, np.array([-tq, 0.0, tq]))
        candidates.append(QuantileFit(f"student-t-{df:g}", (loc, scale), resid))

    # Shifted log-normal solves the triple exactly on its skew side; the
    # quantile-gap ratio equals exp(shape * z90).
    r = (p90 - p50) / (p50 - p10)
    if r > 1.0 + _LOGNORMAL_SKEW_TOL:
        shape = math.log(r) / _Z90
        log_scale = math.log((p90 - p50) / (r - 1.0))
        shift = p50 - math.exp(log_scale)
        fit = QuantileFit("log-normal-right", (shift, log_scale, shape), 0.0)
        candidates.append(_with_residual(fit, q))
    elif r < 1.0 - _LOGNORMAL_SKEW_TOL:
        shape = -math.log(r) / _Z90
        log_scale = math.log((p50 - p10) / (1.0 / r - 1.0))
        shift = p50 + math.exp(log_scale)
        fit = QuantileFit("log-normal-left", (shift, log_scale, shape), 0.0)
        candidates.append(_with_residual(fit, q))

    best = candidates[0]
    for cand in candidates[1:]:
        if cand.residual < best.residual - eps:
            best = cand
    return best


def _with_residual(fit: QuantileFit, q: np.ndarray) -> QuantileFit:
    pred = fit.quantile(np.array([0.1, 0.5, 0.9]))
    return QuantileFit(fit.family, fit.params, float(np.sum((q - pred) ** 2)))


@dataclass(frozen=True)
class MarginalPriorDraws:
    """Paired marginal draws for the bridged endpoints.

    ``draws`` is (L, n_endpoints); row ``l`` of every endpoint used the same
    early-phase value, recorded by ``source_index`` into the supplied pool.
    """

    draws: np.ndarray
    source_index: np.ndarray
    rejections: int
    family_counts: tuple[dict[str, int], ...]

    @property
    def n_draws(self) -> int:
        return self.draws.shape[0]


def sample_marginal(
    theta_star_draws: np.ndarray,
    sets: Sequence[ConditionalQuantileSet],
    seed: int,
) -> MarginalPriorDraws:
    """Two-stage marginal sampling of the bridged phase III effects."""
    theta_pool = np.asarray(theta_star_draws, dtype=float)
    if theta_pool.ndim != 1 or theta_pool.size < 1:
        raise DomainError("theta_star_draws must be a nonempty vector")
    if not 1 <= len(sets) <= 2:
        raise DomainError("expected one or two conditional quantile sets")
    L = theta_pool.size
    n_ep = len(sets)
    rng = stream(seed, 0)

    source = np.arange(L)
    theta = theta_pool.copy()
    rejections = 0
    pending = np.arange(L)
    triples = np.empty((n_ep, 3, L))
    for _ in range(1000):
        for e, qs in enumerate(sets):
            for pi, p in enumerate(PERCENTILE_LEVELS):
                triples[e, pi, pending] = interpolate_percentile(qs, p, theta[pending])
        lo, mid, hi = triples[:, 0, pending], triples[:, 1, pending], triples[:, 2, pending]
        spread_ok = (hi - lo) > _DEGENERATE_SPREAD_TOL * np.maximum(1.0, np.abs(mid))
        ordered = (lo < mid) & (mid < hi)
        bad = np.any(spread_ok & ~ordered, axis=0)
        if not np.any(bad):
            break
        rejections += int(bad.sum())
        if rejections > REJECTION_LIMIT_FRACTION * L:
            raise DomainError(
                f"{rejections} of {L} draws produced crossing percentiles after "
                "extrapolation; the quantile curves cannot support this prior's tails"
            )
        pending = pending[bad]
        replacement = rng.integers(0, L, size=pending.size)
        source[pending] = replacement
        theta[pending] = theta_pool[replacement]
    else:
        raise DomainError("could not find non-crossing percentile triples after 1000 passes")

    uniforms = np.clip(rng.random((L, n_ep)), 1e-16, 1.0 - 1e-16)
    draws = np.empty((L, n_ep))
    family_counts: list[dict[str, int]] = []
    for e in range(n_ep):
        values, counts = _sample_triples_vectorized(
            triples[e, 0], triples[e, 1], triples[e, 2], uniforms[:, e]
        )
        draws[:, e] = values
        family_counts.append(counts)

    return MarginalPriorDraws(
        draws=draws,
        source_index=source,
        rejections=rejections,
        family_counts=tuple(family_counts),
    )


def _sample_triples_vectorized(lo, mid, hi, u):
    """Fit-and-invert for many triples at once.

    Classifies each triple the way :func:`fit_parametric` would (degenerate ->
    point mass; symmetric -> normal; otherwise the exact shifted log-normal)
    and evaluates the fitted quantile function at ``u``.
    """
    lo, mid, hi, u = map(np.asarray, (lo, mid, hi, u))
    out = np.empty_like(mid)
    counts: dict[str, int] = {}

    spread = hi - lo
    degenerate = spread <= _DEGENERATE_SPREAD_TOL * np.maximum(1.0, np.abs(mid))
    r = np.where(degenerate, 1.0, (hi - mid) / np.where(degenerate, 1.0, mid - lo))
    symmetric = ~degenerate & (np.abs(r - 1.0) <= _LOGNORMAL_SKEW_TOL)
    right = ~degenerate & (r > 1.0 + _LOGNORMAL_SKEW_TOL)
    left = ~degenerate & ~symmetric & ~right

    if np.any(degenerate):
        out[degenerate] = mid[degenerate]
        counts["degenerate"] = int(degenerate.sum())
    if np.any(symmetric):
        s = (hi[symmetric] - lo[symmetric]) / (2.0 * _Z90)
        out[symmetric] = mid[symmetric] + s * ndtri(u[symmetric])
        counts["normal"] = int(symmetric.sum())
    if np.any(right):
        rr = r[right]
        shape = np.log(rr) / _Z90
        scale = (hi[right] - mid[right]) / (rr - 1.0)
        shift = mid[right] - scale
        out[right] = shift + scale * np.exp(shape * ndtri(u[right]))
        counts["log-normal-right"] = int(right.sum())
    if np.any(left):
        rr = r[left]
        shape = -np.log(rr) / _Z90
        scale = (mid[left] - lo[left]) / (1.0 / rr - 1.0)
        shift = mid[left] + scale
        out[left] = shift - scale * np.exp(-shape * ndtri(u[left]))
        counts["log-normal-left"] = int(left.sum())
    return out, counts
