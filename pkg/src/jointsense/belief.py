"""Occupancy beliefs for a two-state (idle/busy) primary user.

Each primary user follows a Gilbert-Elliott chain and is observed through a
binary sensor with false-alarm and miss-detection errors.  A belief is the
posterior probability that the channel is busy; the vector form is
``[1 - B, B]`` ordered ``[idle, busy]``.

The scalar functions at the bottom (``*_busy``) are the broadcasting
versions used by the value iteration and the simulator.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .exceptions import DegenerateEvidenceError, ReducibleChainError
from .validation import check_probability

__all__ = [
    "TransitionModel",
    "SensorModel",
    "Belief",
    "predict",
    "correct",
    "outcome_prob",
    "stationary",
    "predict_busy",
    "correct_busy",
    "outcome_prob_busy",
]


@dataclass(frozen=True)
class TransitionModel:
    """Two-state Markov chain of primary occupancy.

    Parameters
    ----------
    p_idle_to_busy : float
        Pr(busy at n | idle at n-1).
    p_busy_to_idle : float
        Pr(idle at n | busy at n-1).
    """

    p_idle_to_busy: float
    p_busy_to_idle: float

    def __post_init__(self):
        check_probability(self.p_idle_to_busy, "p_idle_to_busy")
        check_probability(self.p_busy_to_idle, "p_busy_to_idle")

    @property
    def matrix(self) -> np.ndarray:
        """Column-stochastic matrix; column j is the law of the next state given state j."""
        a, b = self.p_idle_to_busy, self.p_busy_to_idle
        return np.array([[1.0 - a, b], [a, 1.0 - b]])

    @classmethod
    def from_row_matrix(cls, rows) -> "TransitionModel":
        """Build from a row-stochastic layout ``[[P(i->i), P(i->b)], [P(b->i), P(b->b)]]``.

        This is how tabulated scenarios write the chain: rows are indexed by
        the previous state.
        """
        rows = np.asarray(rows, dtype=float)
        if rows.shape != (2, 2):
            raise ValueError(f"transition matrix must be 2x2, got shape {rows.shape}")
        if not np.allclose(rows.sum(axis=1), 1.0, atol=1e-9):
            raise ValueError("transition matrix rows must sum to 1")
        return cls(float(rows[0, 1]), float(rows[1, 0]))

    def to_row_matrix(self) -> list[list[float]]:
        a, b = self.p_idle_to_busy, self.p_busy_to_idle
        return [[1.0 - a, a], [b, 1.0 - b]]


@dataclass(frozen=True)
class SensorModel:
    """Binary spectrum sensor with fixed operating point."""

    p_false_alarm: float
    p_miss_detect: float

    def __post_init__(self):
        check_probability(self.p_false_alarm, "p_false_alarm")
        check_probability(self.p_miss_detect, "p_miss_detect")

    def likelihood(self, outcome: int) -> np.ndarray:
        """Diagonal of the observation matrix: ``[Pr(z|idle), Pr(z|busy)]``."""
        fa, md = self.p_false_alarm, self.p_miss_detect
        if outcome == 1:
            return np.array([fa, 1.0 - md])
        if outcome == 0:
            return np.array([1.0 - fa, md])
        raise ValueError(f"sensor outcome must be 0 or 1, got {outcome!r}")


@dataclass(frozen=True)
class Belief:
    """Probability that the primary user is busy."""

    busy_prob: float

    def __post_init__(self):
        check_probability(self.busy_prob, "busy_prob")

    @property
    def vector(self) -> np.ndarray:
        return np.array([1.0 - self.busy_prob, self.busy_prob])

    def __float__(self) -> float:
        return float(self.busy_prob)


def _clip01(x):
    return np.clip(x, 0.0, 1.0)


def predict_busy(busy, p_idle_to_busy, p_busy_to_idle):
    """Time update of the busy probability (broadcasts)."""
    busy = np.asarray(busy, dtype=float)
    return _clip01(p_idle_to_busy + (1.0 - p_idle_to_busy - p_busy_to_idle) * busy)


def outcome_prob_busy(busy, p_false_alarm, p_miss_detect, outcome):
    """Pr(z = outcome | belief) (broadcasts over ``busy``)."""
    busy = np.asarray(busy, dtype=float)
    if outcome == 1:
        return (1.0 - busy) * p_false_alarm + busy * (1.0 - p_miss_detect)
    return (1.0 - busy) * (1.0 - p_false_alarm) + busy * p_miss_detect


def correct_busy(busy, p_false_alarm, p_miss_detect, outcome):
    """Measurement update of the busy probability (broadcasts).

    Entries whose outcome has zero probability are returned unchanged; the
    caller weights them by that zero probability anyway.
    """
    busy = np.asarray(busy, dtype=float)
    outcome = np.asarray(outcome)
    lik_busy = np.where(outcome == 1, 1.0 - p_miss_detect, p_miss_detect)
    lik_idle = np.where(outcome == 1, p_false_alarm, 1.0 - p_false_alarm)
    num = busy * lik_busy
    den = num + (1.0 - busy) * lik_idle
    safe = np.where(den > 0.0, den, 1.0)
    return _clip01(np.where(den > 0.0, num / safe, busy))


def predict(prior: Belief, model: TransitionModel) -> Belief:
    """Pre-decision belief for the next slot from the current post-decision one."""
    b = model.matrix @ prior.vector
    return Belief(float(_clip01(b[1])))


def outcome_prob(prior: Belief, sensor: SensorModel, outcome: int) -> float:
    """Probability of observing ``outcome`` when sensing under ``prior``."""
    return float(sensor.likelihood(outcome) @ prior.vector)


def correct(prior: Belief, sensor: SensorModel, outcome: int) -> Belief:
    """Bayes correction of ``prior`` after observing ``outcome``.

    Raises
    ------
    DegenerateEvidenceError
        If ``outcome`` is impossible under ``prior``.
    """
    weighted = sensor.likelihood(outcome) * prior.vector
    evidence = weighted.sum()
    if evidence <= 0.0:
        raise DegenerateEvidenceError(
            f"outcome {outcome} has zero probability under belief {prior.busy_prob}"
        )
    return Belief(float(_clip01(weighted[1] / evidence)))


def stationary(model: TransitionModel) -> Belief:
    """Stationary busy probability of the chain.

    Raises
    ------
    ReducibleChainError
        If both transition probabilities are zero (every belief is stationary).
    """
    total = model.p_idle_to_busy + model.p_busy_to_idle
    if total <= 0.0:
        raise ReducibleChainError("chain never changes state; stationary law is not unique")
    return Belief(model.p_idle_to_busy / total)
