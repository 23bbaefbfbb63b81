"""Tailored industry benchmarks and safety-attrition algebra.

Benchmark success probabilities either arrive directly from the user or are
evaluated from supplied logistic-model coefficient tables (model fitting is
out of scope; only evaluation is supported). Phase II benchmarks split into
IIa and IIb by square root, assuming risks are discharged equally across the
two stages. Safety-showstopper rates given failure are industry constants
pinned per therapeutic stratum.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Mapping

from .distributions import expit
from .errors import DomainError, SchemaError

PHASES = ("IIa", "IIb", "III", "submission")
EFFICACY_PHASES = ("IIa", "IIb", "III")

# Feature vocabularies for benchmark models; unknown levels are hard errors.
FEATURE_LEVELS: dict[str, tuple[str, ...]] = {
    "disease_area": (
        "allergy-respiratory",
        "autoimmune-immunology-dermatology-rheumatology",
        "cardiovascular-metabolic-renal",
        "endocrine",
        "haematology",
        "infectious-diseases",
        "neurology",
        "oncology",
        "ophthalmology",
        "psychiatry",
        "others",
    ),
    "molecule": ("small-molecule", "protein-antibody", "protein-other", "other"),
    "lifecycle_class": ("new-molecular-entity", "lifecycle-management", "biosimilar"),
}
TARGET_FLAGS = ("receptor", "enzyme", "other")
ROUTE_FLAGS = ("oral", "intramuscular", "intravenous", "subcutaneous", "topical", "other")
BOOLEAN_FEATURES = ("sponsor_top20", "breakthrough", "special_protocol")

# Conditional P{SSE | fail} by stratum; phase II applies to both IIa and IIb.
SSE_GIVEN_FAIL = {
    "non-oncology": {"IIa": 0.101, "IIb": 0.101, "III": 0.15},
    "oncology": {"IIa": 0.093, "IIb": 0.093, "III": 0.01},
}


@dataclass(frozen=True)
class ProgramFeatures:
    """Program characteristics the benchmark models may condition on."""

    disease_area: str
    molecule: str
    lifecycle_class: str
    target: tuple[str, ...] = ()
    route: tuple[str, ...] = ()
    sponsor_top20: bool = False
    breakthrough: bool = False
    special_protocol: bool = False

    def __post_init__(self):
        for feat in ("disease_area", "molecule", "lifecycle_class"):
            level = getattr(self, feat)
            if level not in FEATURE_LEVELS[feat]:
                raise DomainError(f"unknown {feat} level {level!r}")
        for t in self.target:
            if t not in TARGET_FLAGS:
                raise DomainError(f"unknown target flag {t!r}")
        for r in self.route:
            if r not in ROUTE_FLAGS:
                raise DomainError(f"unknown route flag {r!r}")

    def indicators(self) -> dict[str, dict[str, bool]]:
        """Active level per feature, for coefficient lookup."""
        out: dict[str, dict[str, bool]] = {
            "disease_area": {self.disease_area: True},
            "molecule": {self.molecule: True},
            "lifecycle_class": {self.lifecycle_class: True},
            "target": {t: True for t in self.target},
            "route": {r: True for r in self.route},
        }
        for b in BOOLEAN_FEATURES:
            out[b] = {"yes": getattr(self, b)}
        return out


def eval_logistic(features: ProgramFeatures, model: Mapping) -> float:
    """Evaluate a supplied logistic model at the program's feature levels.

    ``model`` is ``{"intercept": float, "features": {feature: {level: coef}}}``.
    Every feature the model uses must map the program's active level to a
    coefficient (reference levels are declared with coefficient 0.0); unknown
    feature or level names in the table are schema errors.
    """
    if "intercept" not in model:
        raise SchemaError("logistic model is missing its intercept")
    lin = float(model["intercept"])
    table = model.get("features", {})
    active = features.indicators()
    known_levels = dict(FEATURE_LEVELS)
    known_levels["target"] = TARGET_FLAGS
    known_levels["route"] = ROUTE_FLAGS
    for b in BOOLEAN_FEATURES:
        known_levels[b] = ("yes",)
    for feat, level_coefs in table.items():
        if feat not in known_levels:
            raise SchemaError(f"logistic model references unknown feature {feat!r}")
        for level in level_coefs:
            if level not in known_levels[feat]:
                raise SchemaError(f"feature {feat!r} has unknown level {level!r}")
        for level, on in active.get(feat, {}).items():
            if not on:
                continue
            if level not in level_coefs:
                raise SchemaError(
                    f"model uses feature {feat!r} but has no coefficient for "
                    f"supplied level {level!r}"
                )
            lin += float(level_coefs[level])
    return float(expit(lin))


def efficacy_success_benchmark(p_success: float, p_sse_given_fail: float) -> float:
    """Benchmark probability of efficacy success within a phase.

    Failures are either efficacy- or safety-driven (mutually exclusive), so
    failing on efficacy given failure has probability 1 - P{SSE | fail}.
    """
    if not 0.0 < p_success < 1.0 or not 0.0 < p_sse_given_fail < 1.0:
        raise DomainError("probabilities must lie strictly in (0, 1)")
    return 1.0 - (1.0 - p_success) * (1.0 - p_sse_given_fail)


def prob_no_sse(p_success: float, p_sse_given_fail: float) -> float:
    """Unconditional probability of no safety showstopper in a phase."""
    if not 0.0 < p_success <= 1.0 or not 0.0 < p_sse_given_fail <= 1.0:
        raise DomainError("probabilities must lie in (0, 1]")
    return 1.0 - (1.0 - p_success) * p_sse_given_fail


def phase2b_split(p_phase2: float) -> float:
    """Phase IIb share of a whole-phase-II benchmark (equal risk discharge)."""
    if not 0.0 < p_phase2 <= 1.0:
        raise DomainError("phase II benchmark must lie in (0, 1]")
    return math.sqrt(p_phase2)


@dataclass(frozen=True)
class SseTable:
    """Conditional SSE-given-failure probabilities by phase."""

    by_phase: dict[str, float]

    def __post_init__(self):
        for phase, p in self.by_phase.items():
            if phase not in EFFICACY_PHASES:
                raise DomainError(f"unknown phase {phase!r} in SSE table")
            if not 0.0 < p < 1.0:
                raise DomainError(f"SSE probability for {phase!r} out of (0, 1)")

    @classmethod
    def for_stratum(cls, stratum: str) -> "SseTable":
        if stratum not in SSE_GIVEN_FAIL:
            raise DomainError(f"unknown therapeutic stratum {stratum!r}")
        return cls(by_phase=dict(SSE_GIVEN_FAIL[stratum]))


@dataclass(frozen=True)
class BenchmarkSet:
    """Per-phase success, efficacy-success and SSE benchmarks."""

    p_success: dict[str, float]
    p_efficacy: dict[str, float]
    p_sse_given_fail: dict[str, float]
    provenance: str = "user-supplied"

    def __post_init__(self):
        for name, table, phases in (
            ("p_success", self.p_success, PHASES),
            ("p_efficacy", self.p_efficacy, EFFICACY_PHASES),
            ("p_sse_given_fail", self.p_sse_given_fail, EFFICACY_PHASES),
        ):
            for phase, p in table.items():
                if phase not in phases:
                    raise DomainError(f"{name}: unknown phase {phase!r}")
                if not 0.0 < p < 1.0:
                    raise DomainError(f"{name}[{phase!r}] out of (0, 1)")

    @classmethod
    def from_probabilities(
        cls,
        p_success: Mapping[str, float],
        p_efficacy: Mapping[str, float],
        sse: SseTable,
    ) -> "BenchmarkSet":
        return cls(
            p_success=dict(p_success),
            p_efficacy=dict(p_efficacy),
            p_sse_given_fail=dict(sse.by_phase),
            provenance="user-supplied",
        )

    @classmethod
    def from_coefficients(
        cls,
        features: ProgramFeatures,
        models: Mapping[str, Mapping],
        sse: SseTable,
    ) -> "BenchmarkSet":
        """Evaluate the three stage models and derive the per-phase tables.

        ``models`` must supply ``phase2``, ``phase3`` and ``submission`` model
        documents. Phase II success and efficacy values split into IIa and IIb
        by square root.
        """
        for key in ("phase2", "phase3", "submission"):
            if key not in models:
                raise SchemaError(f"coefficient document is missing the {key!r} model")
        p2 = eval_logistic(features, models["phase2"])
        p3 = eval_logistic(features, models["phase3"])
        pbs = eval_logistic(features, models["submission"])
        p2b = phase2b_split(p2)
        eff2 = efficacy_success_benchmark(p2, sse.by_phase["IIb"])
        eff3 = efficacy_success_benchmark(p3, sse.by_phase["III"])
        return cls(
            p_success={"IIa": p2b, "IIb": p2b, "III": p3, "submission": pbs},
            p_efficacy={"IIa": phase2b_split(eff2), "IIb": phase2b_split(eff2), "III": eff3},
            p_sse_given_fail=dict(sse.by_phase),
            provenance="evaluated-from-coefficients",
        )

    def no_sse_phase3(self) -> float:
        if "III" not in self.p_success or "III" not in self.p_sse_given_fail:
            raise DomainError("benchmark set lacks phase III entries")
        return prob_no_sse(self.p_success["III"], self.p_sse_given_fail["III"])

    def efficacy_target(self, phases: tuple[str, ...]) -> float:
        """Product of efficacy benchmarks over the stages of a standard program."""
        out = 1.0
        for phase in phases:
            if phase not in self.p_efficacy:
                raise DomainError(f"no efficacy benchmark for phase {phase!r}")
            out *= self.p_efficacy[phase]
        return out
