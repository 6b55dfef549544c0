"""Per-channel sensing POMDP: value function over the belief and decision rules.

Once the multipliers are fixed, the sensing problem separates across
channels.  For channel k the only secondary-network quantity that matters is
the nominal IRI vector ``l = [L_SU, L_SU - theta]``; with ``b = [1 - B, B]``
the per-slot reward is ``-xi * s + [l . b^S]_+``.  The stationary value
function is averaged over the fading, so it is a function of the
pre-decision belief ``B`` alone and is tabulated on a uniform grid with
linear interpolation in between.
"""

from __future__ import annotations

import csv
import enum
import warnings
from dataclasses import dataclass, field
from typing import Optional, Sequence

import numpy as np

from .belief import (
    SensorModel,
    TransitionModel,
    correct_busy,
    outcome_prob_busy,
    predict_busy,
)
from .exceptions import ConvergenceWarning, MissingTableError
from .ra import DualState, UserConfig, su_iri_arrays
from .seeding import fading_rng
from .validation import check_discount, check_positive, check_probability

__all__ = [
    "ChannelModel",
    "FadingSample",
    "ValueTable",
    "SensingPolicyKind",
    "REGION_IDLE",
    "REGION_ACCESS",
    "REGION_SENSE",
    "draw_fading_sample",
    "expected_reward_nosense",
    "expected_reward_sense",
    "branch_values",
    "bellman_backup",
    "value_iteration",
    "policy_evaluation",
    "one_step_table",
    "sense_mask",
    "decide",
    "decision_map",
    "write_value_table",
    "read_value_table",
    "write_decision_map",
    "read_decision_map",
]

REGION_IDLE = 0
REGION_ACCESS = 1
REGION_SENSE = 2


@dataclass(frozen=True)
class ChannelModel:
    """Everything the network controller knows about one primary channel.

    Parameters
    ----------
    transition : TransitionModel
    sensor : SensorModel
    sensing_cost : float
        Price paid each time the channel is sensed.
    interference_cap : float
        Bound on the long-term probability of interfering the primary user, in (0, 1].
    snr_db : float
        Average secondary-link SNR on this channel (mean of the exponential gain is ``10**(snr_db/10)``).
    """

    transition: TransitionModel
    sensor: SensorModel
    sensing_cost: float = 1.0
    interference_cap: float = 1.0
    snr_db: float = 0.0

    def __post_init__(self):
        check_positive(self.sensing_cost, "sensing_cost", strict=False)
        check_probability(self.interference_cap, "interference_cap")
        if self.interference_cap == 0.0:
            raise ValueError("interference_cap must be positive")

    @property
    def mean_gain(self) -> float:
        return 10.0 ** (self.snr_db / 10.0)

    # shorthand used throughout the numerics
    @property
    def _params(self):
        t, s = self.transition, self.sensor
        return t.p_idle_to_busy, t.p_busy_to_idle, s.p_false_alarm, s.p_miss_detect


@dataclass(frozen=True)
class FadingSample:
    """Frozen empirical distribution of the gains of one channel, ``draws[j, m]``."""

    draws: np.ndarray
    seed: Optional[int] = None

    def __post_init__(self):
        d = np.asarray(self.draws, dtype=float)
        if d.ndim == 1:
            d = d[:, None]
        if d.ndim != 2 or d.shape[0] == 0:
            raise ValueError("fading sample must be a nonempty (draws, users) array")
        if np.any(d < 0.0) or not np.all(np.isfinite(d)):
            raise ValueError("fading gains must be finite and nonnegative")
        object.__setattr__(self, "draws", d)

    def su_best(self, users: Sequence[UserConfig], duals: DualState, gamma_gap: float = 1.0) -> np.ndarray:
        """Best secondary-only IRI of the channel for every draw."""
        beta = np.array([u.weight_beta for u in users])
        _, _, iri = su_iri_arrays(self.draws, beta[None, :], duals.power_price[None, :], gamma_gap)
        return iri.max(axis=1)


def draw_fading_sample(mean_gains, n_draws: int, seed: int, channel: int) -> FadingSample:
    """Exponential power gains (Rayleigh amplitudes) with per-user means."""
    mean_gains = np.atleast_1d(np.asarray(mean_gains, dtype=float))
    rng = fading_rng(seed, channel)
    return FadingSample(rng.exponential(size=(n_draws, mean_gains.size)) * mean_gains, seed=seed)


@dataclass
class ValueTable:
    """Stationary value function of one channel tabulated on a uniform belief grid."""

    grid: np.ndarray
    values: np.ndarray
    discount: float
    channel_id: int = 0
    interference_price: float = float("nan")
    power_price: Optional[np.ndarray] = None
    seed: Optional[int] = None
    deltas: list = field(default_factory=list, repr=False)

    def __call__(self, busy):
        return np.interp(busy, self.grid, self.values)

    @classmethod
    def zeros(cls, grid_size: int, discount: float, **meta) -> "ValueTable":
        grid = np.linspace(0.0, 1.0, grid_size + 1)
        return cls(grid, np.zeros_like(grid), discount, **meta)

    @property
    def grid_size(self) -> int:
        return len(self.grid) - 1

    def with_values(self, values) -> "ValueTable":
        return ValueTable(
            self.grid,
            np.asarray(values, dtype=float),
            self.discount,
            self.channel_id,
            self.interference_price,
            self.power_price,
            self.seed,
        )


class SensingPolicyKind(str, enum.Enum):
    OPTIMAL = "optimal"
    MYOPIC = "myopic"
    HORIZON1 = "horizon1"
    RULE_OF_THUMB = "rule_of_thumb"
    ALWAYS = "always"
    NEVER = "never"

    @classmethod
    def parse(cls, value) -> "SensingPolicyKind":
        if isinstance(value, cls):
            return value
        try:
            return cls(str(value).lower().replace("-", "_"))
        except ValueError:
            names = ", ".join(k.value for k in cls)
            raise ValueError(f"unknown sensing policy {value!r}; choose one of {names}") from None

    @property
    def needs_table(self) -> bool:
        return self in (SensingPolicyKind.OPTIMAL, SensingPolicyKind.HORIZON1)


# -- short-term rewards ---------------------------------------------------


def _l_dot(su_best, theta, weight_idle, weight_busy):
    """``l . (w_idle, w_busy)`` with ``l = [L_SU, L_SU - theta]``."""
    return su_best * (weight_idle + weight_busy) - theta * weight_busy


def expected_reward_nosense(l, busy) -> float:
    """``[l . b]_+`` for an IRI vector ``l = [l_idle, l_busy]``."""
    l = np.asarray(l, dtype=float)
    busy = float(busy)
    return float(max(l[0] * (1.0 - busy) + l[1] * busy, 0.0))


def expected_reward_sense(l, busy, sensor: SensorModel, cost: float) -> float:
    """``-xi + sum_z [l . D_z b]_+``."""
    l = np.asarray(l, dtype=float)
    busy = float(busy)
    total = -float(cost)
    for z in (0, 1):
        lik = sensor.likelihood(z)
        total += max(l[0] * lik[0] * (1.0 - busy) + l[1] * lik[1] * busy, 0.0)
    return total


def branch_values(su_best, theta, busy, channel: ChannelModel, future: Optional[ValueTable], discount: float):
    """Right-hand sides of the sensing decision for every (belief, IRI) pair.

    ``busy`` and ``su_best`` broadcast against each other.  Returns the
    pair ``(no_sense, sense)`` of total expected values: short-term reward
    plus the discounted value of the next pre-decision belief.  A ``None``
    table stands for the zero value function.
    """
    p01, p10, fa, md = channel._params
    su_best = np.asarray(su_best, dtype=float)
    busy = np.asarray(busy, dtype=float)
    idle = 1.0 - busy

    no_sense = np.maximum(_l_dot(su_best, theta, idle, busy), 0.0)
    sense = -channel.sensing_cost + np.maximum(_l_dot(su_best, theta, idle * fa, busy * (1.0 - md)), 0.0)
    sense = sense + np.maximum(_l_dot(su_best, theta, idle * (1.0 - fa), busy * md), 0.0)

    if future is not None:
        no_sense = no_sense + discount * future(predict_busy(busy, p01, p10))
        for z in (0, 1):
            q = outcome_prob_busy(busy, fa, md, z)
            nxt = predict_busy(correct_busy(busy, fa, md, z), p01, p10)
            sense = sense + discount * q * future(nxt)
    return no_sense, sense


def sense_mask(kind, su_best, theta, busy, channel: ChannelModel, table: Optional[ValueTable] = None, discount=None):
    """Vectorized sensing decisions (boolean array) for any policy kind.

    Exact ties resolve to not sensing.
    """
    kind = SensingPolicyKind.parse(kind)
    su_best = np.asarray(su_best, dtype=float)
    busy = np.asarray(busy, dtype=float)
    shape = np.broadcast_shapes(su_best.shape, busy.shape)
    if kind is SensingPolicyKind.ALWAYS:
        return np.ones(shape, dtype=bool)
    if kind is SensingPolicyKind.NEVER:
        return np.zeros(shape, dtype=bool)
    if kind is SensingPolicyKind.RULE_OF_THUMB:
        return _rule_of_thumb(su_best, theta, busy, channel)
    if kind is SensingPolicyKind.MYOPIC:
        table = None
    elif table is None:
        raise MissingTableError(f"policy {kind.value!r} needs a value table")
    if discount is None:
        discount = table.discount if table is not None else 0.0
    no_sense, sense = branch_values(su_best, theta, busy, channel, table, discount)
    return np.broadcast_to(sense > no_sense, shape)


def _rule_of_thumb(su_best, theta, busy, channel):
    p01, p10 = channel.transition.p_idle_to_busy, channel.transition.p_busy_to_idle
    fa, md = channel.sensor.p_false_alarm, channel.sensor.p_miss_detect
    a = p01 / (p01 + p10) if p01 + p10 > 0 else 0.5
    lo = correct_busy(a, fa, md, 0)
    hi = correct_busy(a, fa, md, 1)
    xi = channel.sensing_cost
    in_iri = (su_best >= xi) & (su_best <= theta - xi)
    in_belief = (busy >= min(lo, hi)) & (busy <= max(lo, hi))
    return in_iri & in_belief


def decide(kind, table: Optional[ValueTable], l, busy, channel: ChannelModel, discount=None) -> int:
    """Sensing decision (0 or 1) for one channel and slot.

    Parameters
    ----------
    kind : SensingPolicyKind or str
    table : ValueTable or None
        Required for ``optimal`` and ``horizon1``.
    l : array-like of 2 floats
        Nominal IRI vector ``[L_SU, L_SU - theta]``.
    busy : float or Belief
        Pre-decision busy probability.
    """
    l = np.asarray(l, dtype=float)
    su_best, theta = l[0], l[0] - l[1]
    return int(sense_mask(kind, su_best, theta, float(busy), channel, table, discount))


# -- value iteration ------------------------------------------------------


def bellman_backup(table: ValueTable, channel: ChannelModel, theta: float, su_best_draws) -> ValueTable:
    """One application of the fading-averaged Bellman operator on the grid.

    ``su_best_draws`` is the best secondary-only IRI of the channel under
    each fading draw, which together with ``theta`` fixes the IRI vector.
    """
    grid = table.grid[:, None]
    no_sense, sense = branch_values(
        np.asarray(su_best_draws, dtype=float)[None, :], theta, grid, channel, table, table.discount
    )
    return table.with_values(np.maximum(no_sense, sense).mean(axis=1))


def value_iteration(
    channel: ChannelModel,
    theta: float,
    su_best_draws,
    discount: float,
    grid_size: int = 200,
    tolerance: float = 1e-6,
    max_iters: int = 5000,
    initial: Optional[ValueTable] = None,
    **meta,
) -> ValueTable:
    """Iterate the Bellman backup until the sup-norm change is at most ``tolerance``.

    The returned table records the successive sup-norm changes in ``deltas``.
    Warns with :class:`ConvergenceWarning` if ``max_iters`` is reached.
    """
    discount = check_discount(discount)
    table = ValueTable.zeros(grid_size, discount, **meta)
    if initial is not None:
        table = table.with_values(np.interp(table.grid, initial.grid, initial.values))
    deltas = []
    for _ in range(max_iters):
        new = bellman_backup(table, channel, theta, su_best_draws)
        delta = float(np.max(np.abs(new.values - table.values)))
        deltas.append(delta)
        table = new
        if delta <= tolerance:
            break
    else:
        warnings.warn(
            f"value iteration stopped after {max_iters} iterations (last change {deltas[-1]:.3g})",
            ConvergenceWarning,
            stacklevel=2,
        )
    table.deltas = deltas
    return table


def one_step_table(channel, theta, su_best_draws, discount, grid_size=200, **meta) -> ValueTable:
    """Horizon-1 value function: a single backup of the zero table."""
    zero = ValueTable.zeros(grid_size, check_discount(discount), **meta)
    return bellman_backup(zero, channel, theta, su_best_draws)


def policy_evaluation(
    kind,
    channel: ChannelModel,
    theta: float,
    su_best_draws,
    discount: float,
    grid_size: int = 200,
    table: Optional[ValueTable] = None,
    tolerance: float = 1e-10,
    max_iters: int = 20000,
) -> ValueTable:
    """Value of a fixed sensing rule on the grid, by iterating its linear Bellman operator.

    ``table`` is the value function the rule consults (only for ``optimal``
    and ``horizon1``); the decisions are frozen before iterating.
    """
    kind = SensingPolicyKind.parse(kind)
    discount = check_discount(discount)
    V = ValueTable.zeros(grid_size, discount, channel_id=getattr(table, "channel_id", 0), interference_price=theta)
    draws = np.asarray(su_best_draws, dtype=float)[None, :]
    grid = V.grid[:, None]
    mask = sense_mask(kind, draws, theta, grid, channel, table)
    deltas = []
    for _ in range(max_iters):
        no_sense, sense = branch_values(draws, theta, grid, channel, V, discount)
        new = V.with_values(np.where(mask, sense, no_sense).mean(axis=1))
        delta = float(np.max(np.abs(new.values - V.values)))
        deltas.append(delta)
        V = new
        if delta <= tolerance:
            break
    else:
        warnings.warn("policy evaluation hit its iteration cap", ConvergenceWarning, stacklevel=2)
    V.deltas = deltas
    return V


# -- decision maps --------------------------------------------------------


def decision_map(
    channel: ChannelModel,
    theta: float,
    table: Optional[ValueTable],
    grid_B: int = 200,
    grid_L: int = 200,
    L_max: float = 10.0,
    kind="optimal",
):
    """Sense / access / idle regions over (belief, secondary-only IRI).

    Returns ``(B_axis, L_axis, regions)`` with ``regions[i, j]`` the label for
    ``B_axis[i]`` and ``L_axis[j]``: 2 = sense, 1 = no sensing and a user
    accesses the channel, 0 = no sensing and the channel stays idle.
    """
    B_axis = np.linspace(0.0, 1.0, grid_B)
    L_axis = np.linspace(0.0, float(L_max), grid_L)
    B, L = B_axis[:, None], L_axis[None, :]
    sense = sense_mask(kind, L, theta, B, channel, table)
    access = (L - theta * B) > 0.0
    regions = np.where(sense, REGION_SENSE, np.where(access, REGION_ACCESS, REGION_IDLE))
    return B_axis, L_axis, regions.astype(int)


# -- CSV ------------------------------------------------------------------


def _fmt(x) -> str:
    return format(float(x), ".17g")


def write_value_table(path, table: ValueTable) -> None:
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(["belief", "value"])
        for b, v in zip(table.grid, table.values):
            w.writerow([_fmt(b), _fmt(v)])


def read_value_table(path, discount: float, channel_id: int = 0, **meta) -> ValueTable:
    grid, values = [], []
    with open(path, newline="") as fh:
        for row in csv.DictReader(fh):
            grid.append(float(row["belief"]))
            values.append(float(row["value"]))
    return ValueTable(np.array(grid), np.array(values), discount, channel_id, **meta)


def write_decision_map(path, B_axis, L_axis, regions) -> None:
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(["B", "L_SU", "region"])
        for i, b in enumerate(B_axis):
            for j, l in enumerate(L_axis):
                w.writerow([_fmt(b), _fmt(l), int(regions[i, j])])


def read_decision_map(path):
    rows = []
    with open(path, newline="") as fh:
        for row in csv.DictReader(fh):
            rows.append((float(row["B"]), float(row["L_SU"]), int(row["region"])))
    B_axis = np.unique([r[0] for r in rows])
    L_axis = np.unique([r[1] for r in rows])
    regions = np.array([r[2] for r in rows]).reshape(len(B_axis), len(L_axis))
    return B_axis, L_axis, regions
