"""Stationary Lagrange multipliers for the power and interference constraints.

Training alternates two blocks.  With the multipliers fixed, each channel's
value function is recomputed by value iteration.  With the sensing policy
fixed, the multipliers follow projected subgradient ascent on the dual
function, the subgradient being the constraint violation measured by a
common-random-number simulation of the closed loop.
"""

from __future__ import annotations

import csv
import warnings
from dataclasses import dataclass, field
from typing import Optional

import numpy as np

from .exceptions import ConvergenceWarning
from .ra import DualState, su_iri_arrays
from .sensing import (
    SensingPolicyKind,
    ValueTable,
    draw_fading_sample,
    one_step_table,
    value_iteration,
)
from .sim import ScenarioConfig, run
from .validation import check_positive

LN2 = np.log(2.0)

__all__ = [
    "ConstraintTargets",
    "TrainerConfig",
    "SensingNumerics",
    "TrainingResult",
    "estimate_constraints",
    "dual_step",
    "initial_duals",
    "solve_tables",
    "train",
    "write_trace",
    "read_trace",
    "write_duals",
    "read_duals",
]


@dataclass(frozen=True)
class ConstraintTargets:
    """Right-hand sides of the long-term constraints."""

    power_caps: np.ndarray
    interference_caps: np.ndarray
    stationary_occupancy: np.ndarray

    @classmethod
    def from_scenario(cls, scenario: ScenarioConfig) -> "ConstraintTargets":
        return cls(scenario.power_caps, scenario.interference_caps, scenario.occupancy)


@dataclass(frozen=True)
class TrainerConfig:
    """Settings of the dual ascent.

    ``inner_slots`` is the simulated horizon of each replication (default:
    the discount's truncation horizon) and ``replications`` the number of
    common-random-number replications behind every constraint estimate.
    ``tolerance`` (stop a round's dual steps) and ``round_tolerance``
    (declare convergence when the round averages of two consecutive rounds
    agree) are relative to each multiplier's natural scale.
    """

    step_size: float = 0.05
    inner_slots: Optional[int] = None
    replications: int = 50
    outer_rounds: int = 5
    dual_iters: int = 100
    tolerance: float = 1e-3
    round_tolerance: float = 0.05

    def __post_init__(self):
        check_positive(self.step_size, "step_size")
        check_positive(self.tolerance, "tolerance")
        for name in ("replications", "outer_rounds", "dual_iters"):
            if int(getattr(self, name)) < 1:
                raise ValueError(f"{name} must be a positive integer")
        if self.inner_slots is not None and int(self.inner_slots) < 1:
            raise ValueError("inner_slots must be a positive integer")


@dataclass(frozen=True)
class SensingNumerics:
    """Discretization of the value function and of the fading expectation."""

    grid_size: int = 200
    n_fading: int = 500
    tolerance: float = 1e-6
    max_iters: int = 5000

    def __post_init__(self):
        if int(self.grid_size) < 2 or int(self.n_fading) < 1 or int(self.max_iters) < 1:
            raise ValueError("grid_size >= 2, n_fading >= 1 and max_iters >= 1 are required")
        check_positive(self.tolerance, "tolerance")


@dataclass
class TrainingResult:
    duals: DualState
    tables: Optional[list]
    policy: str
    constraints: tuple
    trace: list = field(default_factory=list, repr=False)
    converged: bool = True


def estimate_constraints(scenario, duals, tables=None, policy="optimal", slots=None, replications=50, seed=0):
    """Discounted average power per user and interference probability per channel."""
    m = run(scenario, duals, tables, policy, slots, replications, seed)
    return m.power, m.interference


def dual_step(duals: DualState, measured_power, measured_interference, targets: ConstraintTargets, mu) -> DualState:
    """Projected subgradient ascent step on the dual function.

    ``mu`` is a scalar step or a pair ``(power_steps, interference_steps)``
    of per-multiplier steps.
    """
    if isinstance(mu, tuple):
        mu_p, mu_i = mu
    else:
        mu_p = mu_i = mu
    pi = np.maximum(duals.power_price + mu_p * (np.asarray(measured_power) - targets.power_caps), 0.0)
    theta = np.maximum(
        duals.interference_price + mu_i * (np.asarray(measured_interference) - targets.interference_caps), 0.0
    )
    return DualState(pi, theta)


def _fading_samples(scenario: ScenarioConfig, numerics: SensingNumerics, seed: int):
    gains = scenario.mean_gains
    return [draw_fading_sample(gains[k], numerics.n_fading, seed, k) for k in range(scenario.n_channels)]


def _su_best(scenario, fading, duals):
    beta = scenario.beta
    out = []
    for sample in fading:
        _, _, iri = su_iri_arrays(sample.draws, beta, duals.power_price, scenario.gamma_gap)
        out.append(iri.max(axis=1))
    return out


def _scales(scenario: ScenarioConfig, fading):
    """Natural magnitudes of the multipliers.

    Power price: the one whose water level equals the power cap.
    Interference price: average secondary-only IRI at that power price.
    """
    pi_scale = scenario.beta / (scenario.power_caps * LN2)
    su = _su_best(scenario, fading, DualState(pi_scale, np.zeros(scenario.n_channels)))
    theta_scale = np.array([max(float(s.mean()), 1e-12) for s in su])
    return pi_scale, theta_scale


def initial_duals(scenario: ScenarioConfig, numerics: Optional[SensingNumerics] = None, seed: int = 0) -> DualState:
    """Starting point of the dual ascent (multipliers at their natural scales)."""
    numerics = numerics or SensingNumerics()
    pi_scale, theta_scale = _scales(scenario, _fading_samples(scenario, numerics, seed))
    return DualState(pi_scale, theta_scale)


def solve_tables(scenario, duals, numerics=None, seed=0, policy="optimal", initial=None, fading=None):
    """Value tables of every channel for fixed multipliers (``None`` for table-free policies)."""
    kind = SensingPolicyKind.parse(policy)
    if not kind.needs_table:
        return None
    numerics = numerics or SensingNumerics()
    fading = fading if fading is not None else _fading_samples(scenario, numerics, seed)
    su = _su_best(scenario, fading, duals)
    tables = []
    for k, channel in enumerate(scenario.channels):
        meta = dict(
            channel_id=k + 1,
            interference_price=float(duals.interference_price[k]),
            power_price=duals.power_price.copy(),
            seed=seed,
        )
        theta = duals.interference_price[k]
        if kind is SensingPolicyKind.HORIZON1:
            tables.append(one_step_table(channel, theta, su[k], scenario.discount, numerics.grid_size, **meta))
            continue
        start = initial[k] if initial is not None else None
        tables.append(
            value_iteration(
                channel,
                theta,
                su[k],
                scenario.discount,
                numerics.grid_size,
                numerics.tolerance,
                numerics.max_iters,
                initial=start,
                **meta,
            )
        )
    return tables


def train(
    scenario: ScenarioConfig,
    trainer: Optional[TrainerConfig] = None,
    numerics: Optional[SensingNumerics] = None,
    seed: int = 0,
    policy="optimal",
    initial: Optional[DualState] = None,
) -> TrainingResult:
    """Find stationary multipliers (and value tables) for a sensing policy.

    Each outer round recomputes the tables with the current multipliers and
    then runs up to ``trainer.dual_iters`` dual steps with the tables frozen.
    Steps are normalized per multiplier by the constraint scale: a relative
    violation ``(x - cap) / cap`` moves a multiplier by ``step_size`` times
    its natural magnitude.  The multipliers returned are the running average
    of the iterates of the last round, which damps the oscillation of a
    constant-step subgradient method.
    """
    trainer = trainer or TrainerConfig()
    numerics = numerics or SensingNumerics()
    kind = SensingPolicyKind.parse(policy)
    targets = ConstraintTargets.from_scenario(scenario)
    fading = _fading_samples(scenario, numerics, seed)
    pi_scale, theta_scale = _scales(scenario, fading)
    mu = (
        trainer.step_size * pi_scale / targets.power_caps,
        trainer.step_size * theta_scale / targets.interference_caps,
    )
    scale = np.concatenate([pi_scale, theta_scale])
    duals = initial.copy() if initial is not None else DualState(pi_scale.copy(), theta_scale.copy())
    slots = trainer.inner_slots or scenario.horizon

    M = scenario.n_users
    trace = []
    tables = None
    previous = None
    converged = False
    for rnd in range(trainer.outer_rounds):
        if kind is SensingPolicyKind.OPTIMAL:
            tables = solve_tables(scenario, duals, numerics, seed, kind, initial=tables, fading=fading)
        iterates = []
        for it in range(trainer.dual_iters):
            if kind is SensingPolicyKind.HORIZON1:
                tables = solve_tables(scenario, duals, numerics, seed, kind, fading=fading)
            power, interf = estimate_constraints(scenario, duals, tables, kind, slots, trainer.replications, seed)
            _record(trace, rnd, it, duals, power, interf, targets)
            new = dual_step(duals, power, interf, targets, mu)
            move = np.concatenate([new.power_price - duals.power_price, new.interference_price - duals.interference_price])
            duals = new
            iterates.append(np.concatenate([duals.power_price, duals.interference_price]))
            if np.all(np.abs(move) <= trainer.tolerance * scale):
                break
        avg = np.mean(iterates[len(iterates) // 2:], axis=0)
        duals = DualState(avg[:M], avg[M:])
        converged = previous is not None and bool(np.all(np.abs(avg - previous) <= trainer.round_tolerance * scale))
        previous = avg

    if kind.needs_table:
        tables = solve_tables(scenario, duals, numerics, seed, kind, initial=tables if kind is SensingPolicyKind.OPTIMAL else None, fading=fading)
    power, interf = estimate_constraints(scenario, duals, tables, kind, slots, trainer.replications, seed)
    _record(trace, trainer.outer_rounds, 0, duals, power, interf, targets)
    if not converged:
        warnings.warn(
            "multipliers still moving between the last two training rounds; returning the last average",
            ConvergenceWarning,
            stacklevel=2,
        )
    return TrainingResult(duals, tables, kind.value, (power, interf), trace, converged)


def _record(trace, rnd, it, duals, power, interf, targets):
    for m, (mult, meas, cap) in enumerate(zip(duals.power_price, power, targets.power_caps)):
        trace.append((rnd, it, f"user_{m + 1}", float(mult), float(meas), float(cap)))
    for k, (mult, meas, cap) in enumerate(zip(duals.interference_price, interf, targets.interference_caps)):
        trace.append((rnd, it, f"channel_{k + 1}", float(mult), float(meas), float(cap)))


def _fmt(x) -> str:
    return format(float(x), ".17g")


def write_trace(path, trace) -> None:
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(["round", "iter", "user_or_channel", "multiplier", "measured", "target"])
        for rnd, it, who, mult, meas, tgt in trace:
            w.writerow([rnd, it, who, _fmt(mult), _fmt(meas), _fmt(tgt)])


def read_trace(path):
    with open(path, newline="") as fh:
        return [
            (int(r["round"]), int(r["iter"]), r["user_or_channel"], float(r["multiplier"]),
             float(r["measured"]), float(r["target"]))
            for r in csv.DictReader(fh)
        ]


def write_duals(path, duals: DualState) -> None:
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(["kind", "index", "multiplier"])
        for m, v in enumerate(duals.power_price):
            w.writerow(["power", m + 1, _fmt(v)])
        for k, v in enumerate(duals.interference_price):
            w.writerow(["interference", k + 1, _fmt(v)])


def read_duals(path) -> DualState:
    pi, theta = {}, {}
    with open(path, newline="") as fh:
        for r in csv.DictReader(fh):
            target = pi if r["kind"] == "power" else theta
            target[int(r["index"])] = float(r["multiplier"])
    return DualState(np.array([pi[i] for i in sorted(pi)]), np.array([theta[i] for i in sorted(theta)]))
