"""Benchmark calibration of the mixture-prior weight.

The weight on the skeptical component is chosen so the unconditional
probability of efficacy success across a standard development program,
averaged over the mixture prior, equals the tailored industry benchmark.
Between-study heterogeneity is deliberately ignored here: a single common
effect underpins every trial of the hypothetical standard program.

One endpoint admits a closed form in terms of two single-fold integrals (the
per-component success probabilities); two endpoints fall back to Monte Carlo
over component draws and trial noise.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Literal, Sequence

import numpy as np
from scipy.integrate import quad

from .core import solve_component_sd
from .distributions import norm_cdf, norm_pdf, norm_quantile
from .errors import CalibrationError, DomainError
from .rng import stream

QUAD_ABS_TOL = 1e-8
QUAD_HALF_WIDTH_SDS = 8.0


@dataclass(frozen=True)
class ProgramStage:
    """One stage of a standard program: identical trials, one test level."""

    phase: str
    n_trials: int
    alpha: float
    power: float

    def __post_init__(self):
        if self.n_trials < 1:
            raise DomainError("stage trial count must be >= 1")
        if not 0.0 < self.alpha < 1.0:
            raise DomainError("stage alpha must lie in (0, 1)")
        if not 0.0 < self.power < 1.0:
            raise DomainError("stage power must lie in (0, 1)")


@dataclass(frozen=True)
class StandardProgramSpec:
    """The hypothetical program whose success probability is benchmarked."""

    stages: tuple[ProgramStage, ...]

    def __post_init__(self):
        if not self.stages:
            raise DomainError("program needs at least one stage")

    @classmethod
    def traditional(cls, oncology: bool = False) -> "StandardProgramSpec":
        """One phase IIb trial plus one (oncology) or two pivotal trials."""
        return cls(
            stages=(
                ProgramStage("IIb", 1, 0.05, 0.8),
                ProgramStage("III", 1 if oncology else 2, 0.025, 0.9),
            )
        )

    @classmethod
    def accelerated(cls, oncology: bool = False) -> "StandardProgramSpec":
        """Adds the proof-of-concept stage in front of the traditional program."""
        return cls(
            stages=(ProgramStage("IIa", 1, 0.1, 0.8),) + cls.traditional(oncology).stages
        )


@dataclass(frozen=True)
class CalibrationResult:
    omega: float
    null_success: float     # program success probability under the null component
    tpp_success: float      # ... under the TPP component
    target: float
    omega_se: float | None = None


def design_information(delta: float, alpha: float, power: float) -> float:
    """Fisher information giving the stated one-sided power at effect delta."""
    if delta == 0.0:
        raise DomainError("delta must be nonzero")
    z = float(norm_quantile(1.0 - alpha)) + float(norm_quantile(power))
    return z * z / (delta * delta)


def success_given_mu(mu, program: StandardProgramSpec, delta: float):
    """Probability of efficacy success in every trial of the program, given mu.

    Each stage's trials test at design information for effect |delta|; all
    trials must individually clear their critical values. Vectorized over mu.
    """
    mu = np.asarray(mu, dtype=float)
    out = np.ones_like(mu)
    for st in program.stages:
        info = design_information(abs(delta), st.alpha, st.power)
        crit = float(norm_quantile(1.0 - st.alpha))
        out = out * norm_cdf(mu * math.sqrt(info) - crit) ** st.n_trials
    return out


def component_success_integrals(
    program: StandardProgramSpec, delta: float
) -> tuple[float, float]:
    """Per-component unconditional success probabilities by adaptive quadrature."""
    d = abs(delta)
    sd = solve_component_sd(d)
    half = QUAD_HALF_WIDTH_SDS * sd

    def integrand(mu, center):
        return float(success_given_mu(mu, program, d) * norm_pdf(mu, center, sd))

    a_val, _ = quad(integrand, -half, half, args=(0.0,), epsabs=QUAD_ABS_TOL, limit=200)
    b_val, _ = quad(integrand, d - half, d + half, args=(d,), epsabs=QUAD_ABS_TOL, limit=200)
    return float(a_val), float(b_val)


def calibrate_omega_single(
    target: float, program: StandardProgramSpec, delta: float
) -> CalibrationResult:
    """Closed-form mixture weight for one endpoint.

    ``target`` is the product of the per-stage efficacy-success benchmarks.
    Raises :class:`~poskit.errors.CalibrationError` when no weight in [0, 1]
    can reach the target, reporting both attainable bounds.
    """
    if not 0.0 < target < 1.0:
        raise DomainError("calibration target must lie strictly in (0, 1)")
    a_val, b_val = component_success_integrals(program, delta)
    lo, hi = min(a_val, b_val), max(a_val, b_val)
    if math.isclose(a_val, b_val, rel_tol=0.0, abs_tol=1e-12):
        raise CalibrationError(
            f"component success probabilities coincide (A = B = {a_val:.6g}); "
            "the mixture weight is unidentified"
        )
    if not lo <= target <= hi:
        raise CalibrationError(
            f"benchmark target {target:.6g} is unattainable: the prior can only "
            f"reach [{lo:.6g}, {hi:.6g}]"
        )
    omega = (target - b_val) / (a_val - b_val)
    return CalibrationResult(
        omega=float(min(1.0, max(0.0, omega))),
        null_success=a_val,
        tpp_success=b_val,
        target=target,
    )


def select_phase2_endpoint(unit_info_sds: Sequence[float]) -> int:
    """Index of the endpoint carrying the least information per patient.

    At any common sample size the Fisher information is proportional to the
    inverse squared unit-information sd, so the largest sd wins.
    """
    sds = [float(s) for s in unit_info_sds]
    if len(sds) != 2 or any(s <= 0 for s in sds):
        raise DomainError("expected two positive unit-information sds")
    return int(np.argmax(sds))


def calibrate_omega_mc(
    target: float,
    program: StandardProgramSpec,
    deltas: Sequence[float],
    rho: float,
    n_draws: int = 200_000,
    seed: int = 0,
    phase2_endpoint: int | Literal["either"] = 0,
    unit_info_sds: Sequence[float] | None = None,
    kappa: float | None = None,
) -> CalibrationResult:
    """Monte Carlo mixture weight for two endpoints.

    Success means clearing the phase II test on the designated endpoint (or
    on either endpoint, when requested and unit-information sds are supplied
    to size the second test), then clearing both endpoints in every later
    trial. Trial noise shares the within-trial correlation ``kappa``
    (defaults to ``rho``). The reported standard error for omega comes from
    the delta method over the two component estimates.
    """
    if not 0.0 < target < 1.0:
        raise DomainError("calibration target must lie strictly in (0, 1)")
    deltas = tuple(abs(float(d)) for d in deltas)
    if len(deltas) != 2 or any(d == 0.0 for d in deltas):
        raise DomainError("expected two nonzero TPP thresholds")
    if not -1.0 <= rho <= 1.0:
        raise DomainError("rho must lie in [-1, 1]")
    if n_draws < 10_000:
        raise DomainError("n_draws too small for a stable calibration")
    kap = rho if kappa is None else float(kappa)
    if phase2_endpoint == "either":
        if unit_info_sds is None:
            raise DomainError("'either' phase II success needs unit-information sds")
        ui = tuple(float(s) for s in unit_info_sds)
    elif phase2_endpoint not in (0, 1):
        raise DomainError("phase2_endpoint must be 0, 1 or 'either'")

    sds = np.array([solve_component_sd(d) for d in deltas])
    estimates = []
    ses = []
    for comp, center in enumerate((np.zeros(2), np.array(deltas))):
        rng = stream(seed, comp)
        zc = rng.standard_normal((n_draws, 2))
        mu = np.empty((n_draws, 2))
        mu[:, 0] = center[0] + sds[0] * zc[:, 0]
        mu[:, 1] = center[1] + sds[1] * (rho * zc[:, 0] + math.sqrt(1 - rho * rho) * zc[:, 1])

        ok = np.ones(n_draws, dtype=bool)
        for si, st in enumerate(program.stages):
            crit = float(norm_quantile(1.0 - st.alpha))
            infos = np.array([design_information(d, st.alpha, st.power) for d in deltas])
            first_stage = si == 0
            for _ in range(st.n_trials):
                e = rng.standard_normal((n_draws, 2))
                e[:, 1] = kap * e[:, 0] + math.sqrt(1 - kap * kap) * e[:, 1]
                if first_stage:
                    # phase II: a single test on the designated endpoint(s)
                    if phase2_endpoint == "either":
                        # trial sized for the low-information endpoint; the other
                        # endpoint's information scales by the ui-sd ratio
                        lead = select_phase2_endpoint(ui)
                        other = 1 - lead
                        i_lead = design_information(deltas[lead], st.alpha, st.power)
                        i_other = i_lead * (ui[lead] / ui[other]) ** 2
                        info_vec = np.zeros(2)
                        info_vec[lead], info_vec[other] = i_lead, i_other
                        z_all = mu * np.sqrt(info_vec)[None, :] + e
                        ok &= np.any(z_all > crit, axis=1)
                    else:
                        idx = int(phase2_endpoint)
                        zstat = mu[:, idx] * math.sqrt(infos[idx]) + e[:, idx]
                        ok &= zstat > crit
                else:
                    z_all = mu * np.sqrt(infos)[None, :] + e
                    ok &= np.all(z_all > crit, axis=1)
        p = float(ok.mean())
        estimates.append(p)
        ses.append(math.sqrt(p * (1.0 - p) / n_draws))

    a_hat, b_hat = estimates
    se_a, se_b = ses
    spread = abs(a_hat - b_hat)
    if spread < 5.0 * math.hypot(se_a, se_b):
        raise CalibrationError(
            f"component success probabilities too close to resolve omega "
            f"(A = {a_hat:.4g}, B = {b_hat:.4g}); increase n_draws"
        )
    omega_raw = (target - b_hat) / (a_hat - b_hat)
    omega = float(min(1.0, max(0.0, omega_raw)))
    se = math.sqrt(
        (omega_raw / (a_hat - b_hat)) ** 2 * se_a ** 2
        + ((1.0 - omega_raw) / (a_hat - b_hat)) ** 2 * se_b ** 2
    )
    return CalibrationResult(
        omega=omega, null_success=a_hat, tpp_success=b_hat, target=target, omega_se=se
    )


def downweight_tpp(omega: float, multiplier: float) -> float:
    """Shift weight toward skepticism by discounting the TPP component.

    The TPP mass is multiplied by ``multiplier`` and the mixture renormalized,
    so the returned weight is omega / (omega + (1 - omega) * multiplier).
    """
    if not 0.0 <= omega <= 1.0:
        raise DomainError("omega must lie in [0, 1]")
    if not 0.0 < multiplier <= 1.0:
        raise DomainError("multiplier must lie in (0, 1]")
    return omega / (omega + (1.0 - omega) * multiplier)
