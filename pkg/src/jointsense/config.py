"""JSON experiment files.

An experiment file mirrors :class:`ExperimentSpec`::

    {
      "scenario": {
        "discount": 0.95, "gamma_gap": 1.0,
        "channels": [{"transition": [[0.95, 0.05], [0.02, 0.98]],
                      "p_false_alarm": 0.09, "p_miss_detect": 0.08,
                      "sensing_cost": 1.0, "interference_cap": 0.3, "snr_db": 5.0}],
        "users": [{"weight_beta": 1.0, "power_cap": 20.0}]
      },
      "trainer": {"step_size": 0.05, "outer_rounds": 5, ...},
      "sensing": {"grid_size": 200, "n_fading": 500, ...},
      "simulation": {"slots": null, "replications": 50},
      "sweeps": [{"axis": "sensing_cost", "values": [0.0, 1.0], "policies": ["optimal", "myopic"]}],
      "output_dir": "out"
    }

Transition matrices are written row-wise (row = previous state).  The
transition and sensor-error probabilities are required; any other numeric
parameter left out takes the value 1 (``snr_db`` defaults to 0 dB, i.e. a
linear SNR of 1).
"""

from __future__ import annotations

import json
from dataclasses import asdict, dataclass, field, fields
from importlib import resources
from typing import Optional

from .belief import SensorModel, TransitionModel
from .duals import SensingNumerics, TrainerConfig
from .exceptions import ConfigError
from .ra import UserConfig
from .sensing import ChannelModel, SensingPolicyKind
from .sim import SWEEP_AXES, ScenarioConfig

DEFAULT_CONFIG = "default_table1.json"


@dataclass(frozen=True)
class SweepSpec:
    axis: str
    values: tuple
    policies: tuple = ("optimal", "myopic", "horizon1", "rule_of_thumb")

    def __post_init__(self):
        if self.axis not in SWEEP_AXES:
            raise ConfigError(f"unknown sweep axis {self.axis!r}")
        for p in self.policies:
            SensingPolicyKind.parse(p)


@dataclass(frozen=True)
class ExperimentSpec:
    scenario: ScenarioConfig
    trainer: TrainerConfig = field(default_factory=TrainerConfig)
    sensing: SensingNumerics = field(default_factory=SensingNumerics)
    slots: Optional[int] = None
    replications: int = 50
    sweeps: tuple = ()
    output_dir: str = "out"


def _channel(d: dict) -> ChannelModel:
    try:
        transition = TransitionModel.from_row_matrix(d["transition"])
        sensor = SensorModel(float(d["p_false_alarm"]), float(d["p_miss_detect"]))
    except KeyError as exc:
        raise ConfigError(f"channel entry is missing {exc.args[0]!r}") from None
    return ChannelModel(
        transition,
        sensor,
        sensing_cost=float(d.get("sensing_cost", 1.0)),
        interference_cap=float(d.get("interference_cap", 1.0)),
        snr_db=float(d.get("snr_db", 0.0)),
    )


def _known(cls, d: dict, section: str) -> dict:
    names = {f.name for f in fields(cls)}
    unknown = set(d) - names
    if unknown:
        raise ConfigError(f"unknown keys in {section!r}: {', '.join(sorted(unknown))}")
    return d


def scenario_from_dict(d: dict) -> ScenarioConfig:
    if "channels" not in d or "users" not in d:
        raise ConfigError("scenario needs 'channels' and 'users'")
    channels = [_channel(c) for c in d["channels"]]
    users = [UserConfig(float(u.get("weight_beta", 1.0)), float(u.get("power_cap", 1.0))) for u in d["users"]]
    init = d.get("initial_beliefs")
    return ScenarioConfig(
        channels,
        users,
        discount=float(d.get("discount", 0.95)),
        gamma_gap=float(d.get("gamma_gap", 1.0)),
        snr_db=d.get("snr_db"),
        initial_beliefs=tuple(init) if init is not None else None,
    )


def scenario_to_dict(s: ScenarioConfig) -> dict:
    out = {
        "discount": s.discount,
        "gamma_gap": s.gamma_gap,
        "channels": [
            {
                "transition": c.transition.to_row_matrix(),
                "p_false_alarm": c.sensor.p_false_alarm,
                "p_miss_detect": c.sensor.p_miss_detect,
                "sensing_cost": c.sensing_cost,
                "interference_cap": c.interference_cap,
                "snr_db": c.snr_db,
            }
            for c in s.channels
        ],
        "users": [{"weight_beta": u.weight_beta, "power_cap": u.power_cap} for u in s.users],
    }
    if s.snr_db is not None:
        out["snr_db"] = s.snr_db
    if s.initial_beliefs is not None:
        out["initial_beliefs"] = list(s.initial_beliefs)
    return out


def spec_from_dict(d: dict) -> ExperimentSpec:
    try:
        scenario = scenario_from_dict(d["scenario"])
        trainer = TrainerConfig(**_known(TrainerConfig, d.get("trainer", {}), "trainer"))
        sensing = SensingNumerics(**_known(SensingNumerics, d.get("sensing", {}), "sensing"))
        sim = d.get("simulation", {})
        sweeps = tuple(
            SweepSpec(s["axis"], tuple(float(v) for v in s["values"]), tuple(s.get("policies", SweepSpec.policies)))
            for s in d.get("sweeps", [])
        )
    except ConfigError:
        raise
    except (KeyError, TypeError, ValueError) as exc:
        raise ConfigError(f"invalid experiment file: {exc}") from None
    return ExperimentSpec(
        scenario=scenario,
        trainer=trainer,
        sensing=sensing,
        slots=sim.get("slots"),
        replications=int(sim.get("replications", 50)),
        sweeps=sweeps,
        output_dir=d.get("output_dir", "out"),
    )


def spec_to_dict(spec: ExperimentSpec) -> dict:
    return {
        "scenario": scenario_to_dict(spec.scenario),
        "trainer": asdict(spec.trainer),
        "sensing": asdict(spec.sensing),
        "simulation": {"slots": spec.slots, "replications": spec.replications},
        "sweeps": [{"axis": s.axis, "values": list(s.values), "policies": list(s.policies)} for s in spec.sweeps],
        "output_dir": spec.output_dir,
    }


def load_spec(path) -> ExperimentSpec:
    """Read and validate an experiment file.

    Raises
    ------
    FileNotFoundError
    ConfigError
    """
    with open(path) as fh:
        try:
            data = json.load(fh)
        except json.JSONDecodeError as exc:
            raise ConfigError(f"{path}: not valid JSON ({exc})") from None
    try:
        return spec_from_dict(data)
    except (TypeError, ValueError) as exc:
        if isinstance(exc, ConfigError):
            raise
        raise ConfigError(f"{path}: {exc}") from None


def default_spec() -> ExperimentSpec:
    text = resources.files("jointsense").joinpath("data", DEFAULT_CONFIG).read_text()
    return spec_from_dict(json.loads(text))


def default_config_path():
    return resources.files("jointsense").joinpath("data", DEFAULT_CONFIG)
