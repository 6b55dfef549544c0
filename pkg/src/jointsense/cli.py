"""Command-line driver.

Subcommands::

    jointsense train    --config C --seed S --out DIR [--policy P]
    jointsense simulate --config C --artifacts DIR --policy P [--slots N] [--reps R] [--seed S] [--out DIR]
    jointsense map      --config C --artifacts DIR --channel K [--grid-b 200] [--grid-l 200] [--l-max X] [--out DIR]
    jointsense sweep    --config C --axis A --values v1,v2 [--policy p1,p2] [--seed S] [--out DIR]
    jointsense compare  --config C [--seed S] [--reps R] [--slots N] [--out DIR]

Without ``--config`` the bundled Table 1 scenario is used.  Every random
number derives from ``--seed``: fading samples of the value functions use
substream ``(0, k)`` for channel k, simulated replications use ``(1, r)``.
``compare`` trains with ``--seed`` and evaluates with ``--seed + 1`` so the
reported utilities are out of sample.

Exit status: 0 success, 2 usage or configuration error, 3 missing
artifacts, 4 training or value iteration did not converge (outputs are
still written).
"""

from __future__ import annotations

import argparse
import csv
import sys
import warnings
from pathlib import Path

import numpy as np

from . import __version__
from .config import default_spec, load_spec
from .duals import initial_duals, read_duals, solve_tables, train, write_duals, write_trace
from .exceptions import ConfigError, ConvergenceWarning, MissingTableError
from .sensing import SensingPolicyKind, decision_map, read_value_table, write_decision_map, write_value_table
from .sim import SWEEP_AXES, run, sweep, write_metrics

EXIT_OK = 0
EXIT_USAGE = 2
EXIT_MISSING = 3
EXIT_NONCONVERGED = 4

COMPARE_POLICIES = ("optimal", "horizon1", "myopic", "rule_of_thumb")
U64 = 2**64


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        self.print_usage(sys.stderr)
        print(f"{self.prog}: error: {message}", file=sys.stderr)
        raise SystemExit(EXIT_USAGE)


def _seed(text: str) -> int:
    value = int(text)
    if not 0 <= value < U64:
        raise argparse.ArgumentTypeError("seed must be an unsigned 64-bit integer")
    return value


def _positive(text: str) -> int:
    value = int(text)
    if value < 1:
        raise argparse.ArgumentTypeError("must be a positive integer")
    return value


def _floats(text: str):
    try:
        return [float(v) for v in text.split(",") if v.strip()]
    except ValueError:
        raise argparse.ArgumentTypeError(f"expected a comma-separated list of numbers, got {text!r}") from None


def _policies(text: str):
    out = []
    for name in text.split(","):
        try:
            out.append(SensingPolicyKind.parse(name.strip()).value)
        except ValueError as exc:
            raise argparse.ArgumentTypeError(str(exc)) from None
    return out


def build_parser() -> argparse.ArgumentParser:
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--config", type=Path, help="experiment JSON (default: bundled Table 1 scenario)")
    common.add_argument("--seed", type=_seed, default=0, help="master seed (default 0)")
    common.add_argument("--out", type=Path, help="output directory (default: the config's output_dir)")

    p = _Parser(prog="jointsense", description="Joint sensing and resource allocation experiments.")
    p.add_argument("--version", action="version", version=f"%(prog)s {__version__}")
    sub = p.add_subparsers(dest="command", required=True, parser_class=_Parser)

    t = sub.add_parser("train", parents=[common], help="train multipliers and value tables")
    t.add_argument("--policy", default="optimal", type=lambda s: _policies(s)[0])

    s = sub.add_parser("simulate", parents=[common], help="simulate a policy with trained artifacts")
    s.add_argument("--artifacts", type=Path, help="directory written by train (default: --out)")
    s.add_argument("--policy", default="optimal", type=lambda s: _policies(s)[0])
    s.add_argument("--slots", type=_positive)
    s.add_argument("--reps", type=_positive)

    m = sub.add_parser("map", parents=[common], help="export a channel's decision map")
    m.add_argument("--artifacts", type=Path, help="directory written by train (default: --out)")
    m.add_argument("--channel", type=int, required=True, help="1-based channel id")
    m.add_argument("--grid-b", type=_positive, default=200)
    m.add_argument("--grid-l", type=_positive, default=200)
    m.add_argument("--l-max", type=float, help="upper end of the IRI axis (default: largest interference price)")

    w = sub.add_parser("sweep", parents=[common], help="retrain and simulate along one parameter axis")
    w.add_argument("--axis", required=True, choices=SWEEP_AXES)
    w.add_argument("--values", required=True, type=_floats)
    w.add_argument("--policy", type=_policies, default=list(COMPARE_POLICIES), help="comma-separated policies")
    w.add_argument("--slots", type=_positive)
    w.add_argument("--reps", type=_positive)

    c = sub.add_parser("compare", parents=[common], help="train and simulate the four sensing policies")
    c.add_argument("--slots", type=_positive)
    c.add_argument("--reps", type=_positive)
    return p


# -- helpers ----------------------------------------------------------------


def _load(args):
    spec = load_spec(args.config) if args.config is not None else default_spec()
    out = args.out if args.out is not None else Path(spec.output_dir)
    return spec, out


def _artifacts(args, out: Path) -> Path:
    return args.artifacts if getattr(args, "artifacts", None) is not None else out


def _load_duals(directory: Path):
    path = directory / "duals.csv"
    if not path.is_file():
        raise MissingTableError(f"{path} not found; run 'jointsense train' first")
    return read_duals(path)


def _load_tables(directory: Path, spec, duals, kind, seed):
    scenario = spec.scenario
    if kind is SensingPolicyKind.OPTIMAL:
        tables = []
        for k in range(scenario.n_channels):
            path = directory / f"value_{k + 1}.csv"
            if not path.is_file():
                raise MissingTableError(f"{path} not found; run 'jointsense train' first")
            tables.append(
                read_value_table(
                    path,
                    scenario.discount,
                    k + 1,
                    interference_price=float(duals.interference_price[k]),
                    power_price=duals.power_price.copy(),
                    seed=seed,
                )
            )
        return tables
    if kind is SensingPolicyKind.HORIZON1:
        return solve_tables(scenario, duals, spec.sensing, seed, kind)
    return None


def _check_dims(spec, duals):
    if duals.power_price.shape != (spec.scenario.n_users,) or duals.interference_price.shape != (
        spec.scenario.n_channels,
    ):
        raise ConfigError("artifacts do not match the scenario dimensions")


def _summary(label, m) -> str:
    return (
        f"{label:<14} U_T={m.U_T:.6f} +/- {m.ci_halfwidth:.6f}  U_SU={m.U_SU:.6f}  "
        f"sense_cost={m.sense_cost:.6f}  sensing_rate={np.round(m.sensing_rate, 4).tolist()}"
    )


# -- subcommands ------------------------------------------------------------


def cmd_train(args) -> int:
    spec, out = _load(args)
    out.mkdir(parents=True, exist_ok=True)
    result = train(spec.scenario, spec.trainer, spec.sensing, seed=args.seed, policy=args.policy)
    write_duals(out / "duals.csv", result.duals)
    write_trace(out / "training_trace.csv", result.trace)
    if result.tables is not None:
        for k, table in enumerate(result.tables):
            write_value_table(out / f"value_{k + 1}.csv", table)
    power, interf = result.constraints
    print(f"policy={result.policy} converged={result.converged}")
    print("power / cap:        " + " ".join(f"{p:.4f}" for p in power / spec.scenario.power_caps))
    print("interference / cap: " + " ".join(f"{i:.4f}" for i in interf / spec.scenario.interference_caps))
    return EXIT_OK


def cmd_simulate(args) -> int:
    spec, out = _load(args)
    art = _artifacts(args, out)
    kind = SensingPolicyKind.parse(args.policy)
    if not kind.needs_table and not (art / "duals.csv").is_file():
        print("jointsense: note: no duals.csv; using the untrained starting multipliers", file=sys.stderr)
        duals = initial_duals(spec.scenario, spec.sensing, args.seed)
    else:
        duals = _load_duals(art)
    _check_dims(spec, duals)
    tables = _load_tables(art, spec, duals, kind, args.seed)
    reps = args.reps or spec.replications
    slots = args.slots or spec.slots
    metrics = run(spec.scenario, duals, tables, kind, slots, reps, args.seed)
    out.mkdir(parents=True, exist_ok=True)
    write_metrics(out / "metrics.csv", [(None, metrics)])
    print(_summary(kind.value, metrics))
    return EXIT_OK


def cmd_map(args) -> int:
    spec, out = _load(args)
    K = spec.scenario.n_channels
    if not 1 <= args.channel <= K:
        raise ConfigError(f"unknown channel {args.channel}; the scenario has channels 1..{K}")
    art = _artifacts(args, out)
    duals = _load_duals(art)
    _check_dims(spec, duals)
    tables = _load_tables(art, spec, duals, SensingPolicyKind.OPTIMAL, args.seed)
    k = args.channel - 1
    theta = duals.interference_price
    l_max = args.l_max if args.l_max is not None else float(theta.max())
    B, L, regions = decision_map(spec.scenario.channels[k], theta[k], tables[k], args.grid_b, args.grid_l, l_max)
    out.mkdir(parents=True, exist_ok=True)
    write_decision_map(out / f"map_{args.channel}.csv", B, L, regions)
    counts = np.bincount(regions.ravel(), minlength=3)
    print(f"channel {args.channel}: idle={counts[0]} access={counts[1]} sense={counts[2]}")
    return EXIT_OK


def cmd_sweep(args) -> int:
    spec, out = _load(args)
    rows = sweep(
        spec.scenario,
        args.axis,
        args.values,
        args.policy,
        spec.trainer,
        spec.sensing,
        args.reps or spec.replications,
        args.slots or spec.slots,
        args.seed,
    )
    out.mkdir(parents=True, exist_ok=True)
    write_metrics(out / "sweep.csv", rows)
    for value, m in rows:
        print(_summary(f"{args.axis}={value:g}", m) + f"  [{m.policy}]")
    return EXIT_OK


def compare(spec, seed, replications=None, slots=None):
    """Train each baseline on ``seed`` and evaluate it on ``seed + 1``.

    Returns a list of ``(policy, RunMetrics)`` in :data:`COMPARE_POLICIES` order.
    """
    reps = replications or spec.replications
    slots = slots or spec.slots
    eval_seed = (seed + 1) % U64
    rows = []
    for policy in COMPARE_POLICIES:
        result = train(spec.scenario, spec.trainer, spec.sensing, seed=seed, policy=policy)
        rows.append((policy, run(spec.scenario, result.duals, result.tables, policy, slots, reps, eval_seed)))
    return rows


def cmd_compare(args) -> int:
    spec, out = _load(args)
    rows = compare(spec, args.seed, args.reps, args.slots)
    out.mkdir(parents=True, exist_ok=True)
    write_metrics(out / "compare.csv", [(None, m) for _, m in rows])
    with open(out / "compare_paired.csv", "w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(["policy", "reference", "mean_difference", "ci_halfwidth"])
        base = dict(rows)["optimal"].per_replication["U_T"]
        for policy, m in rows:
            u = m.per_replication["U_T"]
            d = base - u
            half = 1.96 * d.std(ddof=1) / np.sqrt(d.size) if d.size > 1 else 0.0
            w.writerow([policy, "optimal", format(float(d.mean()), ".17g"), format(float(half), ".17g")])
    for policy, m in rows:
        print(_summary(policy, m))
    return EXIT_OK


COMMANDS = {
    "train": cmd_train,
    "simulate": cmd_simulate,
    "map": cmd_map,
    "sweep": cmd_sweep,
    "compare": cmd_compare,
}


def main(argv=None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return int(exc.code) if exc.code is not None else EXIT_OK
    try:
        with warnings.catch_warnings(record=True) as caught:
            warnings.simplefilter("always", ConvergenceWarning)
            status = COMMANDS[args.command](args)
    except FileNotFoundError as exc:
        print(f"jointsense: error: {exc.filename or exc}: file not found", file=sys.stderr)
        return EXIT_USAGE
    except MissingTableError as exc:
        print(f"jointsense: error: {exc}", file=sys.stderr)
        return EXIT_MISSING
    except (ConfigError, ValueError) as exc:
        print(f"jointsense: error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    except OSError as exc:
        print(f"jointsense: error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    nonconverged = [w for w in caught if issubclass(w.category, ConvergenceWarning)]
    for w in caught:
        print(f"jointsense: warning: {w.message}", file=sys.stderr)
    if nonconverged and status == EXIT_OK:
        return EXIT_NONCONVERGED
    return status


if __name__ == "__main__":  # pragma: no cover
    sys.exit(main())
