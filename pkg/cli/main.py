"""
Command-line entry point: ``python -m cli <subcommand>`` or ``fednia-sim``.

Subcommands: run, sweep, analyze, poison-audit, validate.
Exit codes: 0 success, 1 unexpected error, 2 usage, 3 configuration,
4 run I/O, 5 dataset format, 6 training/aggregation/defense, 7 evaluation/analysis.
"""
import argparse
import json
import sys
from concurrent.futures import ProcessPoolExecutor
from pathlib import Path
from typing import Any, Callable, Optional, Sequence

import yaml

from attacks.audit import audit_poisoning
from attacks.factory import apply_attack
from attacks.spec import AttackSpec
from config import settings
from config.experiment import ExperimentConfig, dump_experiment, load_experiment, parse_experiment
from data.idx import load_idx
from evaluation.reporting import build_result_matrix, read_reports, write_analysis, write_report
from evaluation.significance import friedman_test
from utils.exceptions import ConfigurationError, FedNIAError, RunIOError
from utils.logger import SimulationLogger, get_logger

logger = get_logger("cli")

SWEEP_AXES = ("delta", "lambda", "aggregator")
AGGREGATOR_CHOICES = ("fedavg", "median", "trimmed_mean", "clipped_noisy", "fednia")


def _common_options() -> argparse.ArgumentParser:
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--seed", type=int, help="Override the master seed")
    common.add_argument("--threads", type=int, help="Worker threads for client training and probing")
    common.add_argument("--output-dir", help="Parent directory for run directories")
    common.add_argument("--dry-run", action="store_true", help="Validate and print, run nothing")
    common.add_argument("--log-level", choices=["DEBUG", "INFO", "WARNING", "ERROR"], help="Console log level")
    return common


def build_parser() -> argparse.ArgumentParser:
    """Build the argument parser with every subcommand."""
    parser = argparse.ArgumentParser(prog="fednia-sim", description="Federated learning poisoning-defense simulator")
    sub = parser.add_subparsers(dest="command", required=True)
    common = _common_options()

    run = sub.add_parser("run", parents=[common], help="Run one experiment")
    run.add_argument("config", help="Experiment YAML file")
    run.set_defaults(handler=cmd_run)

    sweep = sub.add_parser("sweep", parents=[common], help="Run one experiment per axis value")
    sweep.add_argument("config", help="Base experiment YAML file")
    sweep.add_argument("--axis", required=True, choices=SWEEP_AXES)
    sweep.add_argument("--values", required=True, nargs="+", help="Axis values (delta/lambda numbers or aggregator names)")
    sweep.add_argument("--jobs", type=int, default=1, help="Experiments run in parallel processes")
    sweep.set_defaults(handler=cmd_sweep)

    analyze = sub.add_parser("analyze", help="Friedman/Nemenyi analysis of report files")
    analyze.add_argument("reports", nargs="+", help="report.csv files")
    analyze.add_argument("--alpha", type=float, default=0.05, choices=[0.05, 0.10])
    analyze.add_argument("--output-dir", default=".", help="Where ranks.csv and friedman.json go")
    analyze.add_argument("--log-level", choices=["DEBUG", "INFO", "WARNING", "ERROR"])
    analyze.set_defaults(handler=cmd_analyze)

    audit = sub.add_parser("poison-audit", help="Summarize what an attack does to a dataset")
    audit.add_argument("--images", required=True, help="IDX image file")
    audit.add_argument("--labels", required=True, help="IDX label file")
    audit.add_argument("--attack-config", required=True, help="YAML file holding one attack spec")
    audit.add_argument("--output", help="JSON output file (stdout when omitted)")
    audit.add_argument("--seed", type=int, help="Override the attack seed")
    audit.add_argument("--log-level", choices=["DEBUG", "INFO", "WARNING", "ERROR"])
    audit.set_defaults(handler=cmd_poison_audit)

    validate = sub.add_parser("validate", parents=[common], help="Validate a config and print it resolved")
    validate.add_argument("config", help="Experiment YAML file")
    validate.add_argument("--skip-data", action="store_true", help="Do not check dataset paths")
    validate.set_defaults(handler=cmd_validate)
    return parser


def _load_with_overrides(args: argparse.Namespace) -> ExperimentConfig:
    cfg = load_experiment(args.config)
    changes: dict[str, Any] = {}
    if args.seed is not None:
        changes["federation"] = {"seed": args.seed}
    if args.output_dir is not None:
        changes["output_dir"] = args.output_dir
    return cfg.override(changes) if changes else cfg


def _check_dataset_paths(cfg: ExperimentConfig) -> None:
    for path in cfg.dataset.paths():
        if not path.exists():
            raise RunIOError("dataset file not found", path)


def cmd_validate(args: argparse.Namespace) -> int:
    cfg = _load_with_overrides(args)
    if not args.skip_data:
        _check_dataset_paths(cfg)
    print(dump_experiment(cfg), end="")
    return 0


def cmd_run(args: argparse.Namespace) -> int:
    from federation.experiment import run_experiment

    cfg = _load_with_overrides(args)
    if args.dry_run:
        print(dump_experiment(cfg), end="")
        return 0
    _check_dataset_paths(cfg)
    result = run_experiment(cfg, Path(cfg.output_dir) / cfg.name, threads=args.threads)
    print(result.run_dir)
    return 0


def sweep_points(cfg: ExperimentConfig, axis: str, values: Sequence[str]) -> list[ExperimentConfig]:
    """
    One config per axis value.

    Args:
        cfg: Base config
        axis: delta, lambda or aggregator
        values: Raw axis values from the command line

    Returns:
        Configs named ``<base>-<axis><value>``

    Raises:
        ConfigurationError: on an invalid value
    """
    if not values:
        raise ConfigurationError("sweep needs at least one value")
    points = []
    for raw in values:
        if axis == "delta":
            points.append(_delta_point(cfg, _number(raw, axis)))
        elif axis == "lambda":
            lam = _number(raw, axis)
            defense = cfg.defense.model_dump(mode="json", by_alias=True) if cfg.defense else {}
            points.append(cfg.override({"name": f"{cfg.name}-lambda{lam:g}", "defense": {**defense, "lambda": lam}}))
        else:
            points.append(_aggregator_point(cfg, raw))
    return points


def _number(raw: str, axis: str) -> float:
    try:
        return float(raw)
    except ValueError as exc:
        raise ConfigurationError(f"{axis} value {raw!r} is not a number") from exc


def _delta_point(cfg: ExperimentConfig, delta: float) -> ExperimentConfig:
    if not 0.0 <= delta < 0.5:
        raise ConfigurationError(f"delta must lie in [0, 0.5), got {delta}")
    total = cfg.federation.total_clients
    r = int(round(delta * total))
    return cfg.override({
        "name": f"{cfg.name}-delta{delta:g}",
        "federation": {"num_benign": total - r, "num_malicious": r},
        "malicious_ids": None,
        "attacks": _rebased_attacks(cfg, r),
    })


def _rebased_attacks(cfg: ExperimentConfig, r: int) -> list[dict[str, Any]]:
    """
    Attack assignments for a federation with ``r`` malicious clients.

    Explicit client ids keep their order across assignments and are cut
    after the first ``r``. When fewer than ``r`` remain, the assignment
    without ids (or else the last one) takes the clients drawn on top.
    """
    attacks = [a.model_dump(mode="json", by_alias=True) for a in cfg.attacks]
    budget = r
    for attack in attacks:
        if attack["client_ids"] is not None:
            attack["client_ids"] = attack["client_ids"][:budget]
            budget -= len(attack["client_ids"])
    if budget > 0 and attacks and all(a["client_ids"] is not None for a in attacks):
        attacks[-1]["client_ids"] = None
    return attacks


def _aggregator_point(cfg: ExperimentConfig, name: str) -> ExperimentConfig:
    if name not in AGGREGATOR_CHOICES:
        raise ConfigurationError(f"unknown aggregator {name!r}; choose from {', '.join(AGGREGATOR_CHOICES)}")
    aggregator = cfg.aggregator.model_dump(mode="json")
    if name == "fednia":
        defense = cfg.defense.model_dump(mode="json", by_alias=True) if cfg.defense else {}
        return cfg.override({"name": f"{cfg.name}-fednia", "aggregator": {**aggregator, "kind": "fedavg"},
                             "defense": defense})
    return cfg.override({"name": f"{cfg.name}-{name}", "aggregator": {**aggregator, "kind": name}, "defense": None})


def _run_sweep_point(payload: dict[str, Any], run_dir: str, threads: Optional[int]) -> str:
    from federation.experiment import run_experiment

    return str(run_experiment(parse_experiment(payload), run_dir, threads=threads).run_dir)


def cmd_sweep(args: argparse.Namespace) -> int:
    cfg = _load_with_overrides(args)
    points = sweep_points(cfg, args.axis, args.values)
    sweep_dir = Path(cfg.output_dir) / f"{cfg.name}-sweep-{args.axis}"
    if args.dry_run:
        for point in points:
            fed = point.federation
            print(f"{point.name}: k={fed.num_benign} r={fed.num_malicious} method={point.method}")
        return 0
    _check_dataset_paths(cfg)

    jobs = max(1, args.jobs)
    targets = [(p.to_dict(), str(sweep_dir / p.name), args.threads) for p in points]
    if jobs == 1:
        run_dirs = [_run_sweep_point(*t) for t in targets]
    else:
        with ProcessPoolExecutor(max_workers=jobs) as pool:
            run_dirs = list(pool.map(_run_sweep_point, *zip(*targets)))

    combined = read_reports([Path(d) / "report.csv" for d in run_dirs])
    write_report(combined, sweep_dir / "report.csv")
    logger.info(f"Sweep over {args.axis} finished: {len(run_dirs)} runs in {sweep_dir}")
    print(sweep_dir / "report.csv")
    return 0


def cmd_analyze(args: argparse.Namespace) -> int:
    frame = read_reports(args.reports)
    matrix = build_result_matrix(frame)
    result = friedman_test(matrix, args.alpha)
    write_analysis(result, matrix, args.output_dir)
    print(json.dumps(result.to_dict(), indent=2))
    return 0


def cmd_poison_audit(args: argparse.Namespace) -> int:
    path = Path(args.attack_config)
    try:
        payload = yaml.safe_load(path.read_text(encoding="utf-8"))
    except OSError as exc:
        raise RunIOError("cannot read attack config", path) from exc
    except yaml.YAMLError as exc:
        raise ConfigurationError(f"{path}: malformed YAML: {exc}") from exc
    if isinstance(payload, dict) and "spec" in payload:
        payload = payload["spec"]
    spec = AttackSpec.parse(payload if isinstance(payload, dict) else {})
    if args.seed is not None:
        spec = spec.with_seed(args.seed)

    original = load_idx(args.images, args.labels)
    summary = {"attack": spec.model_dump(mode="json"), **audit_poisoning(original, apply_attack(original, spec))}
    text = json.dumps(summary, indent=2)
    if args.output:
        out = Path(args.output)
        try:
            out.parent.mkdir(parents=True, exist_ok=True)
            out.write_text(text + "\n", encoding="utf-8")
        except OSError as exc:
            raise RunIOError("cannot write audit", out) from exc
        logger.info(f"Audit written to {out}")
    else:
        print(text)
    return 0


def main(argv: Optional[Sequence[str]] = None) -> int:
    """
    Parse arguments and dispatch.

    Args:
        argv: Arguments without the program name (defaults to sys.argv)

    Returns:
        Process exit code
    """
    args = build_parser().parse_args(argv)
    SimulationLogger.set_console_level(args.log_level or settings.log_level)
    handler: Callable[[argparse.Namespace], int] = args.handler
    try:
        return handler(args)
    except FedNIAError as exc:
        logger.error(f"{args.command} failed: {exc}")
        return exc.exit_code
    except Exception:  # pylint: disable=broad-except
        logger.exception(f"{args.command} failed unexpectedly")
        return 1


def run() -> None:
    """Console-script entry point."""
    sys.exit(main())
