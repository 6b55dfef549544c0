"""Per-slot resource allocation for fixed Lagrange multipliers.

Given the power price of each secondary user and the interference price of
each channel, the optimal allocation decouples: every user picks the power
that maximizes its weighted rate minus priced power (waterfilling), and each
channel goes to the user with the largest positive reward indicator (IRI)
once the interference risk ``theta_k * B^S_k`` is charged.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Optional, Sequence

import numpy as np

from .belief import Belief
from .exceptions import DimensionError, UnboundedObjectiveError
from .validation import check_nonnegative_array, check_positive

LN2 = np.log(2.0)

__all__ = [
    "UserConfig",
    "LinkState",
    "DualState",
    "IriBundle",
    "SlotDecision",
    "optimal_power",
    "su_iri",
    "su_iri_arrays",
    "compute_iri_bundle",
    "allocate",
]


@dataclass(frozen=True)
class UserConfig:
    """Secondary user: priority weight and average-power budget."""

    weight_beta: float = 1.0
    power_cap: float = 1.0

    def __post_init__(self):
        check_positive(self.weight_beta, "weight_beta")
        check_positive(self.power_cap, "power_cap")


@dataclass(frozen=True)
class LinkState:
    """Noise-normalized power gains, ``gains[k, m]`` for channel k and user m."""

    gains: np.ndarray

    def __post_init__(self):
        g = check_nonnegative_array(self.gains, "gains")
        if g.ndim != 2:
            raise DimensionError(f"gains must be a (channels, users) matrix, got shape {g.shape}")
        object.__setattr__(self, "gains", g)

    @property
    def n_channels(self) -> int:
        return self.gains.shape[0]

    @property
    def n_users(self) -> int:
        return self.gains.shape[1]


@dataclass(frozen=True)
class DualState:
    """Power prices (one per user) and interference prices (one per channel)."""

    power_price: np.ndarray
    interference_price: np.ndarray

    def __post_init__(self):
        object.__setattr__(
            self, "power_price", check_nonnegative_array(self.power_price, "power_price").ravel()
        )
        object.__setattr__(
            self,
            "interference_price",
            check_nonnegative_array(self.interference_price, "interference_price").ravel(),
        )

    @classmethod
    def zeros(cls, n_users: int, n_channels: int) -> "DualState":
        return cls(np.zeros(n_users), np.zeros(n_channels))

    def copy(self) -> "DualState":
        return DualState(self.power_price.copy(), self.interference_price.copy())

    def __eq__(self, other):
        if not isinstance(other, DualState):
            return NotImplemented
        return np.array_equal(self.power_price, other.power_price) and np.array_equal(
            self.interference_price, other.interference_price
        )


@dataclass
class IriBundle:
    """All per-slot allocation quantities for one realization of the gains.

    Arrays indexed ``[k, m]`` are per (channel, user); arrays indexed ``[k]``
    are per channel.  ``winner[k] == -1`` means nobody accesses channel k.
    """

    power: np.ndarray
    rate: np.ndarray
    su_iri: np.ndarray
    full_iri: np.ndarray
    su_best: np.ndarray
    iri_vector: np.ndarray
    winner: np.ndarray
    channel_iri: np.ndarray
    post_busy: np.ndarray = field(repr=False)

    def channel_iri_dot(self) -> np.ndarray:
        """Channel IRI from the nominal IRI vector, ``[l_k . b^S_k]_+``."""
        b = np.stack([1.0 - self.post_busy, self.post_busy], axis=-1)
        return np.maximum(np.sum(self.iri_vector * b, axis=-1), 0.0)


@dataclass
class SlotDecision:
    """Sensing and access decisions for one slot.

    ``winner[k]`` is the scheduled user on channel k or -1; ``power[k]`` is
    the effective power loaded by that user (0 when idle).
    """

    winner: np.ndarray
    power: np.ndarray
    sense: Optional[np.ndarray] = None

    def access_matrix(self, n_users: int) -> np.ndarray:
        """Scheduling indicators ``w[k, m]``."""
        w = np.zeros((len(self.winner), n_users), dtype=int)
        for k, m in enumerate(self.winner):
            if m >= 0:
                w[k, m] = 1
        return w


def su_iri_arrays(h, beta, pi, gamma_gap=1.0):
    """Broadcasting waterfilling: returns ``(power, rate, iri)`` arrays.

    ``power = [beta / (pi ln 2) - gap / h]_+``, ``rate = log2(1 + h power / gap)``
    and ``iri = beta * rate - pi * power``.
    """
    h, beta, pi = np.broadcast_arrays(
        np.asarray(h, dtype=float), np.asarray(beta, dtype=float), np.asarray(pi, dtype=float)
    )
    if np.any((pi <= 0.0) & (h > 0.0)):
        raise UnboundedObjectiveError("power price is zero on a link with positive gain")
    with np.errstate(divide="ignore", invalid="ignore"):
        level = beta / (pi * LN2)
        power = np.where(h > 0.0, np.maximum(level - gamma_gap / h, 0.0), 0.0)
        rate = np.log2(1.0 + h * power / gamma_gap)
    iri = np.maximum(beta * rate - pi * power, 0.0)
    return power, rate, iri


def optimal_power(h: float, beta: float, pi: float, gamma_gap: float = 1.0) -> float:
    """Power maximizing ``beta * log2(1 + h p / gap) - pi * p`` over ``p >= 0``.

    Raises
    ------
    UnboundedObjectiveError
        If ``pi == 0`` while ``h > 0``.
    """
    _check_scalar_inputs(h, beta, pi, gamma_gap)
    return float(su_iri_arrays(h, beta, pi, gamma_gap)[0])


def su_iri(h: float, beta: float, pi: float, gamma_gap: float = 1.0):
    """Optimal nominal power, its rate, and the secondary-only IRI for one link."""
    _check_scalar_inputs(h, beta, pi, gamma_gap)
    p, c, l = su_iri_arrays(h, beta, pi, gamma_gap)
    return float(p), float(c), float(l)


def _check_scalar_inputs(h, beta, pi, gamma_gap):
    check_positive(h, "h", strict=False)
    check_positive(beta, "beta")
    check_positive(pi, "pi", strict=False)
    check_positive(gamma_gap, "gamma_gap")


def compute_iri_bundle(
    link: LinkState,
    users: Sequence[UserConfig],
    duals: DualState,
    post_beliefs: Sequence,
    gamma_gap: float = 1.0,
) -> IriBundle:
    """Evaluate the allocation quantities for one slot.

    ``post_beliefs`` holds the post-decision busy probability of each
    channel, as :class:`Belief` objects or floats.
    """
    K, M = link.gains.shape
    if len(users) != M:
        raise DimensionError(f"{len(users)} users configured but gains have {M} columns")
    if duals.power_price.shape != (M,) or duals.interference_price.shape != (K,):
        raise DimensionError("dual state dimensions do not match the link state")
    if len(post_beliefs) != K:
        raise DimensionError(f"{len(post_beliefs)} beliefs given for {K} channels")

    busy = np.array([float(b) for b in post_beliefs])
    beta = np.array([u.weight_beta for u in users])
    power, rate, iri = su_iri_arrays(link.gains, beta[None, :], duals.power_price[None, :], gamma_gap)
    theta = duals.interference_price
    full = iri - (theta * busy)[:, None]
    su_best = iri.max(axis=1)
    best_user = np.argmax(full, axis=1)  # first maximum: lowest index wins ties
    best = full[np.arange(K), best_user]
    winner = np.where(best > 0.0, best_user, -1)
    return IriBundle(
        power=power,
        rate=rate,
        su_iri=iri,
        full_iri=full,
        su_best=su_best,
        iri_vector=np.stack([su_best, su_best - theta], axis=-1),
        winner=winner,
        channel_iri=np.maximum(best, 0.0),
        post_busy=busy,
    )


def allocate(bundle: IriBundle) -> SlotDecision:
    """Scheduling and effective power from an IRI bundle (sensing left unset)."""
    K = len(bundle.winner)
    power = np.zeros(K)
    for k, m in enumerate(bundle.winner):
        if m >= 0:
            power[k] = bundle.power[k, m]
    return SlotDecision(winner=bundle.winner.copy(), power=power)
