"""scikit-learn style front end.

:class:`JointSensingAllocator` bundles the dual training, the per-channel
value functions and the slot-level decision rules behind the familiar
``fit`` / ``predict`` / ``transform`` / ``score`` surface, with
hyper-parameters exposed through ``get_params`` / ``set_params`` so it can
be cloned and swept like any other estimator.
"""

from __future__ import annotations

import numpy as np
from sklearn.base import BaseEstimator
from sklearn.utils.validation import check_is_fitted

from .duals import SensingNumerics, TrainerConfig, train
from .exceptions import DimensionError
from .ra import su_iri_arrays
from .sensing import SensingPolicyKind, decision_map, sense_mask
from .sim import ScenarioConfig, run
from .validation import check_nonnegative_array


class JointSensingAllocator(BaseEstimator):
    """Jointly optimal sensing and resource allocation for one scenario.

    Parameters
    ----------
    policy : str, default="optimal"
        Sensing rule: ``optimal``, ``myopic``, ``horizon1``, ``rule_of_thumb``,
        ``always`` or ``never``.  The multipliers are trained for this rule.
    grid_size : int, default=200
        Number of belief intervals of the value-function grid.
    n_fading : int, default=500
        Fading draws per channel used to average the value function.
    vi_tolerance : float, default=1e-6
    vi_max_iters : int, default=5000
    step_size : float, default=0.05
        Normalized dual subgradient step.
    replications : int, default=50
        Common-random-number replications per constraint estimate.
    inner_slots : int or None, default=None
        Slots per replication; None uses the discount's truncation horizon.
    outer_rounds : int, default=5
    dual_iters : int, default=100
    dual_tolerance : float, default=1e-3
    round_tolerance : float, default=0.05
    random_state : int, default=0
        Master seed for the fading sample and the training simulations.

    Attributes
    ----------
    scenario_ : ScenarioConfig
    duals_ : DualState
    tables_ : list of ValueTable or None
    constraints_ : tuple of ndarray
        Power per user and interference probability per channel at the
        trained multipliers.
    training_trace_ : list of tuple
    converged_ : bool
    """

    def __init__(
        self,
        policy="optimal",
        grid_size=200,
        n_fading=500,
        vi_tolerance=1e-6,
        vi_max_iters=5000,
        step_size=0.05,
        replications=50,
        inner_slots=None,
        outer_rounds=5,
        dual_iters=100,
        dual_tolerance=1e-3,
        round_tolerance=0.05,
        random_state=0,
    ):
        self.policy = policy
        self.grid_size = grid_size
        self.n_fading = n_fading
        self.vi_tolerance = vi_tolerance
        self.vi_max_iters = vi_max_iters
        self.step_size = step_size
        self.replications = replications
        self.inner_slots = inner_slots
        self.outer_rounds = outer_rounds
        self.dual_iters = dual_iters
        self.dual_tolerance = dual_tolerance
        self.round_tolerance = round_tolerance
        self.random_state = random_state

    def _configs(self):
        trainer = TrainerConfig(
            step_size=self.step_size,
            inner_slots=self.inner_slots,
            replications=self.replications,
            outer_rounds=self.outer_rounds,
            dual_iters=self.dual_iters,
            tolerance=self.dual_tolerance,
            round_tolerance=self.round_tolerance,
        )
        numerics = SensingNumerics(self.grid_size, self.n_fading, self.vi_tolerance, self.vi_max_iters)
        return trainer, numerics

    def fit(self, scenario: ScenarioConfig, y=None):
        """Train multipliers (and value tables) for ``scenario``."""
        if not isinstance(scenario, ScenarioConfig):
            raise TypeError(f"fit expects a ScenarioConfig, got {type(scenario).__name__}")
        kind = SensingPolicyKind.parse(self.policy)
        trainer, numerics = self._configs()
        result = train(scenario, trainer, numerics, seed=self.random_state, policy=kind)
        self.scenario_ = scenario
        self.duals_ = result.duals
        self.tables_ = result.tables
        self.constraints_ = result.constraints
        self.training_trace_ = result.trace
        self.converged_ = result.converged
        self.n_channels_ = scenario.n_channels
        self.n_users_ = scenario.n_users
        return self

    def _check_gains(self, gains):
        check_is_fitted(self, "duals_")
        g = check_nonnegative_array(gains, "gains")
        if g.ndim == 2:
            g = g[None]
        if g.ndim != 3 or g.shape[1:] != (self.n_channels_, self.n_users_):
            raise DimensionError(
                f"gains must have shape (n_samples, {self.n_channels_}, {self.n_users_}), got {np.shape(gains)}"
            )
        return g

    def _check_beliefs(self, beliefs, n):
        b = np.asarray(beliefs, dtype=float)
        if b.ndim == 1:
            b = np.broadcast_to(b, (n, self.n_channels_))
        if b.shape != (n, self.n_channels_):
            raise DimensionError(f"beliefs must have shape ({n}, {self.n_channels_}), got {b.shape}")
        if np.any((b < 0.0) | (b > 1.0)):
            raise ValueError("beliefs must lie in [0, 1]")
        return b

    def transform(self, gains):
        """Best secondary-only IRI per channel, shape ``(n_samples, n_channels)``."""
        g = self._check_gains(gains)
        _, _, iri = su_iri_arrays(g, self.scenario_.beta, self.duals_.power_price, self.scenario_.gamma_gap)
        return iri.max(axis=-1)

    def predict(self, gains, beliefs):
        """Sensing decisions (0/1) for pre-decision ``beliefs`` and the observed ``gains``."""
        g = self._check_gains(gains)
        b = self._check_beliefs(beliefs, g.shape[0])
        su_best = self.transform(g)
        kind = SensingPolicyKind.parse(self.policy)
        out = np.empty(b.shape, dtype=int)
        for k, channel in enumerate(self.scenario_.channels):
            table = self.tables_[k] if self.tables_ is not None else None
            out[:, k] = sense_mask(kind, su_best[:, k], self.duals_.interference_price[k], b[:, k], channel, table)
        return out

    def allocate(self, gains, post_beliefs):
        """Scheduled user (-1 for none) and its power on every channel.

        Returns ``(winner, power)``, each of shape ``(n_samples, n_channels)``.
        """
        g = self._check_gains(gains)
        b = self._check_beliefs(post_beliefs, g.shape[0])
        p, _, iri = su_iri_arrays(g, self.scenario_.beta, self.duals_.power_price, self.scenario_.gamma_gap)
        best = np.argmax(iri, axis=-1)
        su_best = np.take_along_axis(iri, best[..., None], -1)[..., 0]
        access = su_best - self.duals_.interference_price * b > 0.0
        power = np.take_along_axis(p, best[..., None], -1)[..., 0] * access
        return np.where(access, best, -1), power

    def simulate(self, n_slots=None, replications=50, seed=None, record_trace=False, policy=None):
        """Closed-loop metrics of the trained policy (see :func:`jointsense.sim.run`)."""
        check_is_fitted(self, "duals_")
        seed = self.random_state if seed is None else seed
        return run(
            self.scenario_,
            self.duals_,
            self.tables_,
            policy or self.policy,
            n_slots,
            replications,
            seed,
            record_trace,
        )

    def score(self, scenario=None, y=None):
        """Discounted total utility of the trained policy on its own seed."""
        check_is_fitted(self, "duals_")
        if scenario is not None and scenario is not self.scenario_:
            return run(scenario, self.duals_, self.tables_, self.policy, None, self.replications, self.random_state).U_T
        return self.simulate(replications=self.replications).U_T

    def decision_map(self, channel: int, grid_B=200, grid_L=200, L_max=None):
        """Sense / access / idle regions of channel ``channel`` (1-based)."""
        check_is_fitted(self, "duals_")
        if not 1 <= channel <= self.n_channels_:
            raise ValueError(f"channel must be in 1..{self.n_channels_}, got {channel}")
        k = channel - 1
        theta = self.duals_.interference_price
        if L_max is None:
            L_max = float(theta.max())
        table = self.tables_[k] if self.tables_ is not None else None
        return decision_map(self.scenario_.channels[k], theta[k], table, grid_B, grid_L, L_max, self.policy)
