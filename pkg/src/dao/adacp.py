"""Adaptive conformal gating of extraction answers.

An initial acceptance threshold is either fixed per task or calibrated
as a conformal quantile of risk scores on annotated pairs; during a
debate it is tightened geometrically each round, so answers must become
more plausible as the discussion accumulates evidence.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from fractions import Fraction
from typing import Sequence

from .backends import ScoringBackend
from .errors import EmptyCalibrationSet


@dataclass(frozen=True)
class CalibrationSet:
    """Annotated (input, gold answer) pairs with optionally cached risks."""

    pairs: tuple[tuple[str, str], ...]
    risks: tuple[float, ...] | None = None

    def __post_init__(self):
        if self.risks is not None and len(self.risks) != len(self.pairs):
            raise ValueError("cached risks must align one-to-one with pairs")


@dataclass(frozen=True)
class AdaCPConfig:
    """Gate parameters.

    `initial_threshold` maps task name ("ed", "eae") to a fixed starting
    threshold; a missing or None entry means the threshold must be
    calibrated from data instead.
    """

    delta: float = 0.1
    beta: float = 0.5
    initial_threshold: dict[str, float | None] = field(
        default_factory=lambda: {"ed": 1.0, "eae": 3.0}
    )

    def __post_init__(self):
        if not 0.0 < self.delta < 1.0:
            raise ValueError(f"delta must be in (0, 1), got {self.delta}")
        if not 0.0 < self.beta <= 1.0:
            raise ValueError(f"beta must be in (0, 1], got {self.beta}")


@dataclass(frozen=True)
class RiskThreshold:
    """The acceptance cutoff at a given debate round; may be +infinity."""

    value: float
    round_index: int = 0


def calibrate(risks: Sequence[float], delta: float) -> RiskThreshold:
    """Conformal quantile of the calibration risks at miscoverage `delta`.

    Returns the ceil((n+1)(1-delta))-th smallest risk (1-based); when the
    index exceeds n the threshold is +infinity (accept everything). The
    index is computed in exact rational arithmetic because a float ceil
    misrounds near integral values of (n+1)(1-delta).
    """
    if not risks:
        raise EmptyCalibrationSet("cannot calibrate from zero risk scores")
    if not 0.0 < delta < 1.0:
        raise ValueError(f"delta must be in (0, 1), got {delta}")
    ordered = sorted(risks)
    n = len(ordered)
    index = math.ceil((n + 1) * (1 - Fraction(delta)))
    if index > n:
        return RiskThreshold(value=math.inf, round_index=0)
    return RiskThreshold(value=float(ordered[index - 1]), round_index=0)


def risk_score(scorer: ScoringBackend, input_text: str, retrieved: str, answer: str) -> float:
    """Risk of `answer` given the input plus whatever has been retrieved.

    Concatenating an empty retrieval block is an identity, so calibration
    (which has no retrieval) and in-debate scoring share one code path.
    """
    if not answer:
        raise ValueError("cannot score an empty answer")
    prompt = input_text if not retrieved else f"{input_text}\n\n{retrieved}"
    return scorer.negative_log_likelihood(prompt, answer)


def accept(risk: float, threshold: RiskThreshold) -> bool:
    """True iff the risk does not exceed the threshold (rejection is strict)."""
    return risk <= threshold.value


def decay_threshold(threshold: RiskThreshold, beta: float) -> RiskThreshold:
    """Tighten the threshold by the constant factor `beta`."""
    if not 0.0 < beta <= 1.0:
        raise ValueError(f"beta must be in (0, 1], got {beta}")
    return RiskThreshold(value=threshold.value * beta, round_index=threshold.round_index + 1)
