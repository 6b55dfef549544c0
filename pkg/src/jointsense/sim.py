"""Closed-loop Monte-Carlo simulation of the slotted cognitive radio.

Every slot runs the five steps of the network controller: acquire the gains,
predict the beliefs, decide which channels to sense, correct the beliefs
with the sensor outcomes, and allocate channels and powers.  Replications
are simulated side by side as the leading axis of every array; each
replication owns an independent random substream (see :mod:`.seeding`),
so common random numbers are shared across policies and multipliers.
"""

from __future__ import annotations

import csv
import math
from dataclasses import dataclass, field, replace
from typing import Optional, Sequence

import numpy as np

from .belief import Belief, SensorModel, TransitionModel, correct_busy, predict_busy, stationary
from .exceptions import ConfigError, DimensionError, MissingTableError
from .ra import DualState, LinkState, UserConfig, su_iri_arrays
from .seeding import replication_streams
from .sensing import ChannelModel, SensingPolicyKind, ValueTable, sense_mask
from .validation import check_discount, check_positive, truncation_horizon

__all__ = [
    "ScenarioConfig",
    "SlotRecord",
    "RunMetrics",
    "SWEEP_AXES",
    "table1_scenario",
    "step_primary",
    "draw_fading",
    "draw_outcome",
    "run",
    "perturb",
    "sweep",
    "write_metrics",
    "read_metrics",
    "write_trace",
]

SWEEP_AXES = ("transition_time", "sensing_cost", "error_prob", "snr")


@dataclass(frozen=True)
class ScenarioConfig:
    """A complete system: primary channels, secondary users and global constants.

    ``snr_db`` overrides the per-channel SNR when given, either as a scalar
    or as a ``(channels, users)`` matrix.  ``initial_beliefs`` overrides the
    stationary initialization of the beliefs.
    """

    channels: tuple
    users: tuple
    discount: float = 0.95
    gamma_gap: float = 1.0
    snr_db: Optional[object] = None
    initial_beliefs: Optional[tuple] = None

    def __post_init__(self):
        object.__setattr__(self, "channels", tuple(self.channels))
        object.__setattr__(self, "users", tuple(self.users))
        if not self.channels or not self.users:
            raise ConfigError("a scenario needs at least one channel and one user")
        for c in self.channels:
            if not isinstance(c, ChannelModel):
                raise ConfigError(f"channels must be ChannelModel instances, got {type(c).__name__}")
        for u in self.users:
            if not isinstance(u, UserConfig):
                raise ConfigError(f"users must be UserConfig instances, got {type(u).__name__}")
        try:
            check_discount(self.discount)
            check_positive(self.gamma_gap, "gamma_gap")
        except (TypeError, ValueError) as exc:
            raise ConfigError(str(exc)) from None
        if self.snr_db is not None:
            snr = np.asarray(self.snr_db, dtype=float)
            if snr.ndim not in (0, 2) or (snr.ndim == 2 and snr.shape != (self.n_channels, self.n_users)):
                raise ConfigError(f"snr_db must be a scalar or a {self.n_channels}x{self.n_users} matrix")
        if self.initial_beliefs is not None:
            init = tuple(float(b) for b in self.initial_beliefs)
            if len(init) != self.n_channels or any(not 0.0 <= b <= 1.0 for b in init):
                raise ConfigError("initial_beliefs must hold one probability per channel")
            object.__setattr__(self, "initial_beliefs", init)
        for c in self.channels:
            t = c.transition
            if t.p_idle_to_busy + t.p_busy_to_idle == 0.0:
                raise ConfigError("a channel whose occupancy never changes has no stationary law")

    @property
    def n_channels(self) -> int:
        return len(self.channels)

    @property
    def n_users(self) -> int:
        return len(self.users)

    @property
    def mean_gains(self) -> np.ndarray:
        """Mean power gain per (channel, user)."""
        if self.snr_db is None:
            snr = np.array([[c.snr_db] * self.n_users for c in self.channels])
        else:
            snr = np.broadcast_to(np.asarray(self.snr_db, dtype=float), (self.n_channels, self.n_users))
        return 10.0 ** (snr / 10.0)

    @property
    def occupancy(self) -> np.ndarray:
        """Stationary busy probability of each channel."""
        return np.array([stationary(c.transition).busy_prob for c in self.channels])

    @property
    def start_beliefs(self) -> np.ndarray:
        if self.initial_beliefs is not None:
            return np.array(self.initial_beliefs)
        return self.occupancy

    @property
    def beta(self) -> np.ndarray:
        return np.array([u.weight_beta for u in self.users])

    @property
    def power_caps(self) -> np.ndarray:
        return np.array([u.power_cap for u in self.users])

    @property
    def interference_caps(self) -> np.ndarray:
        return np.array([c.interference_cap for c in self.channels])

    @property
    def horizon(self) -> int:
        return truncation_horizon(self.discount)


def table1_scenario(discount: float = 0.95) -> ScenarioConfig:
    """The four-channel, four-user default system.

    Transition matrices are tabulated row-wise (rows = previous state), so
    ``[0.95, 0.05; 0.02, 0.98]`` means Pr(idle->busy) = 0.05 and
    Pr(busy->idle) = 0.02; the stationary occupancy is then 5/7.
    """
    rows = [[0.95, 0.05], [0.02, 0.98]]
    spec = [
        # P_FA, P_MD, xi, cap
        (0.09, 0.08, 1.00, 0.30),
        (0.09, 0.08, 1.80, 0.05),
        (0.05, 0.03, 1.00, 0.10),
        (0.05, 0.03, 1.80, 0.10),
    ]
    channels = [
        ChannelModel(TransitionModel.from_row_matrix(rows), SensorModel(fa, md), xi, cap, snr_db=5.0)
        for fa, md, xi, cap in spec
    ]
    users = [UserConfig(1.0, cap) for cap in (20.0, 16.0, 18.0, 10.0)]
    return ScenarioConfig(channels, users, discount=discount, gamma_gap=1.0)


# -- stochastic primitives -------------------------------------------------


def step_primary(state: int, model: TransitionModel, rng: np.random.Generator) -> int:
    """Next occupancy (0 idle / 1 busy) of a primary user."""
    u = rng.random()
    if state == 0:
        return int(u < model.p_idle_to_busy)
    return int(u >= model.p_busy_to_idle)


def draw_fading(scenario: ScenarioConfig, rng: np.random.Generator) -> LinkState:
    """I.i.d. exponential power gains with the scenario's mean SNRs."""
    return LinkState(rng.exponential(size=(scenario.n_channels, scenario.n_users)) * scenario.mean_gains)


def draw_outcome(state: int, sensor: SensorModel, rng: np.random.Generator) -> int:
    """Sensor output given the true occupancy."""
    p_one = 1.0 - sensor.p_miss_detect if state == 1 else sensor.p_false_alarm
    return int(rng.random() < p_one)


# -- records ----------------------------------------------------------------


@dataclass
class SlotRecord:
    """Everything that happened in one slot of one replication.

    ``outcome[k]`` is -1 on channels that were not sensed and ``winner[k]``
    is -1 on channels nobody accessed.
    """

    replication: int
    slot: int
    occupancy: np.ndarray
    gains: np.ndarray
    pre_belief: np.ndarray
    post_belief: np.ndarray
    sense: np.ndarray
    outcome: np.ndarray
    winner: np.ndarray
    power: np.ndarray
    rate: np.ndarray
    reward: np.ndarray
    interference: np.ndarray


@dataclass
class RunMetrics:
    """Discounted averages over a simulation, averaged across replications.

    Per-replication values of the utility are kept in ``per_replication``
    so that policies simulated with the same seed can be compared pairwise.
    """

    policy: str
    U_T: float
    U_SU: float
    sense_cost: float
    power: np.ndarray
    interference: np.ndarray
    sensing_rate: np.ndarray
    lagrangian: float
    ci_halfwidth: float
    n_slots: int
    replications: int
    per_replication: dict = field(default_factory=dict, repr=False)
    trace: Optional[list] = field(default=None, repr=False)


# -- closed loop ------------------------------------------------------------


def _draw_replications(scenario: ScenarioConfig, n_slots: int, replications: int, seed: int):
    K, M = scenario.n_channels, scenario.n_users
    gains = np.empty((replications, n_slots, K, M))
    u_init = np.empty((replications, K))
    u_trans = np.empty((replications, n_slots, K))
    u_obs = np.empty((replications, n_slots, K))
    for r in range(replications):
        rng = replication_streams(seed, r)
        u_init[r] = rng["init"].random(K)
        gains[r] = rng["gains"].exponential(size=(n_slots, K, M))
        u_trans[r] = rng["transitions"].random((n_slots, K))
        u_obs[r] = rng["outcomes"].random((n_slots, K))
    gains *= scenario.mean_gains
    return gains, u_init, u_trans, u_obs


def _check_tables(kind, tables, K):
    if kind.needs_table:
        if tables is None or len(tables) != K or any(t is None for t in tables):
            raise MissingTableError(f"policy {kind.value!r} needs one value table per channel")


def run(
    scenario: ScenarioConfig,
    duals: DualState,
    tables: Optional[Sequence[ValueTable]] = None,
    policy="optimal",
    n_slots: Optional[int] = None,
    replications: int = 50,
    seed: int = 0,
    record_trace: bool = False,
) -> RunMetrics:
    """Simulate the closed loop and return discounted metrics.

    Parameters
    ----------
    scenario : ScenarioConfig
    duals : DualState
        Power and interference prices used by the allocation.
    tables : sequence of ValueTable, optional
        One per channel; needed by the ``optimal`` and ``horizon1`` policies.
    policy : str or SensingPolicyKind
    n_slots : int, optional
        Slots per replication; defaults to the smallest N with discount**N < 1e-4.
    replications : int
    seed : int
        Master seed; replication r uses substream ``(1, r)``.
    record_trace : bool
        Keep a :class:`SlotRecord` per (replication, slot).
    """
    kind = SensingPolicyKind.parse(policy)
    K, M = scenario.n_channels, scenario.n_users
    if duals.power_price.shape != (M,) or duals.interference_price.shape != (K,):
        raise DimensionError("dual state does not match the scenario dimensions")
    _check_tables(kind, tables, K)
    if n_slots is None:
        n_slots = scenario.horizon
    if n_slots < 1 or replications < 1:
        raise ConfigError("n_slots and replications must be positive")

    R = replications
    gains, u_init, u_trans, u_obs = _draw_replications(scenario, n_slots, R, seed)

    chans = scenario.channels
    p01 = np.array([c.transition.p_idle_to_busy for c in chans])
    p10 = np.array([c.transition.p_busy_to_idle for c in chans])
    fa = np.array([c.sensor.p_false_alarm for c in chans])
    md = np.array([c.sensor.p_miss_detect for c in chans])
    xi = np.array([c.sensing_cost for c in chans])
    occ = scenario.occupancy
    beta = scenario.beta
    pi = duals.power_price
    theta = duals.interference_price

    weights = (1.0 - scenario.discount) * scenario.discount ** np.arange(n_slots)
    weights /= weights.sum()

    start = scenario.start_beliefs
    state = (u_init < start).astype(int)
    busy_post = None
    acc = {
        "U_SU": np.zeros(R),
        "U_S": np.zeros(R),
        "lagrangian": np.zeros(R),
        "power": np.zeros((R, M)),
        "interference": np.zeros((R, K)),
        "sensing": np.zeros((R, K)),
    }
    trace = [] if record_trace else None
    users = np.arange(M)

    for n in range(n_slots):
        # T1: gains and the resulting per-user optimal powers
        h = gains[:, n]
        power, rate, iri = su_iri_arrays(h, beta, pi, scenario.gamma_gap)
        best_user = np.argmax(iri, axis=-1)
        su_best = np.take_along_axis(iri, best_user[..., None], -1)[..., 0]

        # T2.1: predict
        if n == 0:
            busy = np.broadcast_to(start, (R, K)).copy()
        else:
            busy = predict_busy(busy_post, p01, p10)

        # T2.2: sensing decisions
        sense = np.empty((R, K), dtype=bool)
        for k in range(K):
            table = tables[k] if tables is not None and kind.needs_table else None
            sense[:, k] = sense_mask(kind, su_best[:, k], theta[k], busy[:, k], chans[k], table)

        # T2.3: sense and correct
        p_one = np.where(state == 1, 1.0 - md, fa)
        outcome = (u_obs[:, n] < p_one).astype(int)
        busy_post = np.where(sense, correct_busy(busy, fa, md, outcome), busy)

        # T3: scheduling and power
        full_best = su_best - theta * busy_post
        access = full_best > 0.0
        win_power = np.take_along_axis(power, best_user[..., None], -1)[..., 0] * access
        win_rate = np.take_along_axis(rate, best_user[..., None], -1)[..., 0] * access
        onehot = (best_user[..., None] == users) & access[..., None]

        u_su = (beta[best_user] * win_rate).sum(axis=1)
        u_s = (xi * sense).sum(axis=1)
        reward = -xi * sense + np.maximum(full_best, 0.0)
        interf = state * access

        w = weights[n]
        acc["U_SU"] += w * u_su
        acc["U_S"] += w * u_s
        acc["lagrangian"] += w * reward.sum(axis=1)
        acc["power"] += w * (onehot * power).sum(axis=1)
        acc["interference"] += w * interf
        acc["sensing"] += w * sense

        if record_trace:
            for r in range(R):
                trace.append(
                    SlotRecord(
                        replication=r,
                        slot=n,
                        occupancy=state[r].copy(),
                        gains=h[r].copy(),
                        pre_belief=busy[r].copy(),
                        post_belief=busy_post[r].copy(),
                        sense=sense[r].astype(int),
                        outcome=np.where(sense[r], outcome[r], -1),
                        winner=np.where(access[r], best_user[r], -1),
                        power=win_power[r].copy(),
                        rate=win_rate[r].copy(),
                        reward=reward[r].copy(),
                        interference=interf[r].copy(),
                    )
                )

        # primary users move on
        u = u_trans[:, n]
        state = np.where(state == 0, u < p01, u >= p10).astype(int)

    u_t = acc["U_SU"] - acc["U_S"]
    half = 1.96 * u_t.std(ddof=1) / math.sqrt(R) if R > 1 else float("inf")
    return RunMetrics(
        policy=kind.value,
        U_T=float(u_t.mean()),
        U_SU=float(acc["U_SU"].mean()),
        sense_cost=float(acc["U_S"].mean()),
        power=acc["power"].mean(axis=0),
        # a channel that is never busy cannot be interfered
        interference=np.divide(acc["interference"].mean(axis=0), occ, out=np.zeros(K), where=occ > 0),
        sensing_rate=acc["sensing"].mean(axis=0),
        lagrangian=float(acc["lagrangian"].mean()),
        ci_halfwidth=float(half),
        n_slots=n_slots,
        replications=R,
        per_replication={"U_T": u_t, "U_SU": acc["U_SU"], "U_S": acc["U_S"], "lagrangian": acc["lagrangian"]},
        trace=trace,
    )


# -- sweeps -----------------------------------------------------------------


def perturb(scenario: ScenarioConfig, axis: str, value: float) -> ScenarioConfig:
    """Copy of ``scenario`` with one parameter family set to ``value``.

    * ``transition_time``: expected number of slots for the chain to mix,
      ``1 / (p01 + p10)``, keeping the stationary occupancy; 1 gives an
      i.i.d. primary user.
    * ``sensing_cost``: every channel's sensing cost.
    * ``error_prob``: both false-alarm and miss-detection probabilities.
    * ``snr``: average SNR in dB on every link.
    """
    value = float(value)
    if axis == "transition_time":
        if value < 1.0:
            raise ConfigError("transition_time must be at least 1 slot")
        chans = []
        for c in scenario.channels:
            a = stationary(c.transition).busy_prob
            chans.append(replace(c, transition=TransitionModel(a / value, (1.0 - a) / value)))
        return replace(scenario, channels=tuple(chans))
    if axis == "sensing_cost":
        return replace(scenario, channels=tuple(replace(c, sensing_cost=value) for c in scenario.channels))
    if axis == "error_prob":
        return replace(
            scenario, channels=tuple(replace(c, sensor=SensorModel(value, value)) for c in scenario.channels)
        )
    if axis == "snr":
        return replace(scenario, channels=tuple(replace(c, snr_db=value) for c in scenario.channels), snr_db=None)
    raise ConfigError(f"unknown sweep axis {axis!r}; choose one of {', '.join(SWEEP_AXES)}")


def sweep(
    scenario: ScenarioConfig,
    axis: str,
    values: Sequence[float],
    policies: Sequence = ("optimal", "myopic", "horizon1", "rule_of_thumb"),
    trainer=None,
    numerics=None,
    replications: int = 50,
    n_slots: Optional[int] = None,
    seed: int = 0,
):
    """Retrain and simulate every policy at every axis value.

    Returns a list of ``(axis_value, RunMetrics)`` pairs ordered by value,
    then by policy.
    """
    from .duals import train  # duals depends on this module

    if axis not in SWEEP_AXES:
        raise ConfigError(f"unknown sweep axis {axis!r}; choose one of {', '.join(SWEEP_AXES)}")
    rows = []
    for value in values:
        sc = perturb(scenario, axis, value)
        for policy in policies:
            result = train(sc, trainer, numerics, seed=seed, policy=policy)
            metrics = run(sc, result.duals, result.tables, policy, n_slots, replications, seed)
            rows.append((float(value), metrics))
    return rows


# -- CSV --------------------------------------------------------------------


def _fmt(x) -> str:
    return format(float(x), ".17g")


def metrics_header(n_users: int, n_channels: int):
    return (
        ["policy", "axis_value", "U_T", "U_SU", "sense_cost"]
        + [f"power_user_{m + 1}" for m in range(n_users)]
        + [f"interf_ch_{k + 1}" for k in range(n_channels)]
        + ["ci_halfwidth"]
    )


def write_metrics(path, rows) -> None:
    """Write ``(axis_value, RunMetrics)`` pairs; ``axis_value`` may be None."""
    rows = list(rows)
    M = len(rows[0][1].power)
    K = len(rows[0][1].interference)
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(metrics_header(M, K))
        for value, m in rows:
            w.writerow(
                [m.policy, "" if value is None else _fmt(value), _fmt(m.U_T), _fmt(m.U_SU), _fmt(m.sense_cost)]
                + [_fmt(p) for p in m.power]
                + [_fmt(i) for i in m.interference]
                + [_fmt(m.ci_halfwidth)]
            )


def read_metrics(path):
    """Rows of a metrics CSV as dicts of floats (``policy`` kept as text)."""
    out = []
    with open(path, newline="") as fh:
        for row in csv.DictReader(fh):
            parsed = {}
            for key, val in row.items():
                if key == "policy":
                    parsed[key] = val
                else:
                    parsed[key] = float(val) if val != "" else None
            out.append(parsed)
    return out


def write_trace(path, trace: Sequence[SlotRecord]) -> None:
    """One row per (replication, slot, channel)."""
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(
            ["replication", "slot", "channel", "occupancy", "pre_belief", "post_belief", "sense", "outcome",
             "winner", "power", "rate", "reward", "interference"]
        )
        for rec in trace:
            for k in range(len(rec.occupancy)):
                w.writerow(
                    [rec.replication, rec.slot, k + 1, int(rec.occupancy[k]), _fmt(rec.pre_belief[k]),
                     _fmt(rec.post_belief[k]), int(rec.sense[k]), int(rec.outcome[k]), int(rec.winner[k]),
                     _fmt(rec.power[k]), _fmt(rec.rate[k]), _fmt(rec.reward[k]), int(rec.interference[k])]
                )
