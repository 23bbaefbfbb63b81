"""Risk scorecard and the conditional probability of approval and access.

A program's five low/medium/high risk ratings index a table of fitted
conditional success probabilities elicited from experts against a crude 90%
approval anchor. The fitted value is converted into a multiplicative odds
adjustment and applied to the program's tailored approval benchmark.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Mapping

from .distributions import expit, logit
from .errors import DomainError, SchemaError

RISK_LEVELS = ("low", "medium", "high")
RISK_FACTORS = ("r1", "r2", "r3", "r4", "r5")
LEVEL_CODES = {"low": "A", "medium": "B", "high": "C"}

# Crude historical approval rate the expert survey anchored on.
APPROVAL_ANCHOR = 0.9
_EP_OVERFLOW_GUARD = 1.0 - 1e-9


@dataclass(frozen=True)
class RiskScorecard:
    """Five qualitative ratings: regulatory alignment, unaccounted safety,
    unaccounted TPP, quality and compliance, technical development."""

    r1: str
    r2: str
    r3: str
    r4: str
    r5: str

    def __post_init__(self):
        for name in RISK_FACTORS:
            if getattr(self, name) not in RISK_LEVELS:
                raise DomainError(f"risk {name} must be one of {RISK_LEVELS}")

    def profile_code(self) -> str:
        """Five-letter A/B/C code, r1 through r5."""
        return "".join(LEVEL_CODES[getattr(self, name)] for name in RISK_FACTORS)


@dataclass(frozen=True)
class EpTable:
    """Fitted conditional PoS by risk profile.

    Either a full table keyed by five-letter profile codes, or an additive
    main-effects form: logit(ep) = intercept + per-factor level offsets
    (low is the reference level, offset zero).
    """

    mode: str
    entries: dict[str, float] | None = None
    intercept: float | None = None
    offsets: dict[str, dict[str, float]] | None = None

    def __post_init__(self):
        if self.mode == "table":
            if not self.entries:
                raise SchemaError("full-table mode needs profile entries")
            for code, value in self.entries.items():
                _check_profile_code(code)
                if not 0.0 < value < 1.0:
                    raise SchemaError(f"ep for profile {code} must lie strictly in (0, 1)")
        elif self.mode == "additive":
            if self.intercept is None:
                raise SchemaError("additive mode needs an intercept")
            for factor, by_level in (self.offsets or {}).items():
                if factor not in RISK_FACTORS:
                    raise SchemaError(f"unknown risk factor {factor!r}")
                for level in by_level:
                    if level not in ("medium", "high"):
                        raise SchemaError(
                            f"offset level {level!r} invalid (low is the reference)"
                        )
        else:
            raise SchemaError(f"unknown ep-table mode {self.mode!r}")

    @classmethod
    def from_dict(cls, doc: Mapping) -> "EpTable":
        mode = doc.get("mode")
        if mode == "table":
            return cls(mode="table", entries=dict(doc.get("entries", {})))
        if mode == "additive":
            return cls(
                mode="additive",
                intercept=doc.get("intercept"),
                offsets={k: dict(v) for k, v in doc.get("offsets", {}).items()},
            )
        raise SchemaError("ep table document needs mode 'table' or 'additive'")


def _check_profile_code(code: str) -> None:
    if len(code) != 5 or any(ch not in "ABC" for ch in code):
        raise SchemaError(f"risk profile code {code!r} must be five letters over A/B/C")


def lookup_ep(scorecard: RiskScorecard, table: EpTable) -> float:
    """Fitted conditional PoS for the program's risk profile."""
    if table.mode == "table":
        code = scorecard.profile_code()
        if code not in table.entries:
            raise SchemaError(f"ep table has no entry for profile {code}")
        return float(table.entries[code])
    lin = float(table.intercept)
    for factor in RISK_FACTORS:
        level = getattr(scorecard, factor)
        if level == "low":
            continue
        lin += float((table.offsets or {}).get(factor, {}).get(level, 0.0))
    return float(expit(lin))


def adjustment_factor(ep: float) -> float:
    """Odds multiplier implied by a fitted conditional PoS against the anchor."""
    if not 0.0 < ep < 1.0:
        raise DomainError("ep must lie strictly in (0, 1)")
    if ep > _EP_OVERFLOW_GUARD:
        raise DomainError("ep too close to 1; the odds adjustment overflows")
    anchor_odds = APPROVAL_ANCHOR / (1.0 - APPROVAL_ANCHOR)
    return (ep / (1.0 - ep)) / anchor_odds


def conditional_pos(ep: float, p_bs: float) -> float:
    """Probability of approval and full TPP attainment given a positive program.

    Closed form of applying :func:`adjustment_factor` to the benchmark odds of
    approval after submission.
    """
    if not 0.0 < ep < 1.0 or not 0.0 < p_bs < 1.0:
        raise DomainError("ep and p_bs must lie strictly in (0, 1)")
    numer = (1.0 - APPROVAL_ANCHOR) * ep * p_bs
    denom = APPROVAL_ANCHOR * (1.0 - ep) + p_bs * (ep - APPROVAL_ANCHOR)
    if denom <= 0.0:
        raise DomainError("conditional PoS denominator not positive; inputs invalid")
    return numer / denom


def conditional_pos_via_odds(ep: float, p_bs: float) -> float:
    """Same quantity through the explicit odds route (kept as a cross-check)."""
    odds = adjustment_factor(ep) * (p_bs / (1.0 - p_bs))
    return odds / (1.0 + odds)


def final_pos(p_positive_phase3: float, cond_pos: float) -> float:
    """Program-level PoS: positive-phase-III probability times conditional PoS."""
    if not 0.0 <= p_positive_phase3 <= 1.0 or not 0.0 <= cond_pos <= 1.0:
        raise DomainError("probabilities must lie in [0, 1]")
    return p_positive_phase3 * cond_pos
