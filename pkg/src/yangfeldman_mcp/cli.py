"""
Command line for the experiment runners.

    yangfeldman wightman --types out,out,out,out --order 1 --points 28,29,30,31
    yangfeldman check --identity glz --order 1 --backend exact
    yangfeldman reconstruct --state fixture.json --quasifree W.json
    yangfeldman demo-nonquasifree --config demo.cfg --out report.json
    yangfeldman serve

Exit codes: 0 on success, 1 if a check or round trip fails, 2 on a
configuration or engine error.
"""

import argparse
import json
import logging
import os
import sys
from pathlib import Path
from typing import Any, Dict, List, Optional, Sequence

from dotenv import load_dotenv

from .api.engine_helper import init_engine
from .api.errors import ConfigError, YangFeldmanError
from .api.experiments import (
    default_points,
    run_identity_suite,
    run_nonquasifree_demo,
    run_reconstruction_demo,
    run_wightman,
)
from .api.lattice import build_lattice
from .api.star_calc import functional_from_json
from .api.types import ExperimentConfig
from .utils.config_utils import load_config
from .utils.io_utils import dump_propagators, table_rows, write_csv, write_json

logger = logging.getLogger(__name__)

EXPERIMENTS = ("wightman", "check", "reconstruct", "demo-nonquasifree")
EXIT_OK = 0
EXIT_FAILED = 1
EXIT_ERROR = 2


def _int_list(text: str) -> List[int]:
    try:
        return [int(part) for part in text.split(",") if part.strip()]
    except ValueError:
        raise argparse.ArgumentTypeError(f"Expected comma separated integers, got '{text}'") from None


def _common(parser: argparse.ArgumentParser) -> None:
    parser.add_argument("--config", help="key = value config file")
    parser.add_argument("--backend", choices=("exact", "float"), help="number backend for the propagator tables")
    parser.add_argument("--out", help="write the JSON report to this path")
    parser.add_argument("--jobs", type=int, help="worker threads for graph evaluation")
    parser.add_argument("--seed", type=int, help="seed for random instances")
    parser.add_argument("--csv", help="write the table part of the report as CSV")
    parser.add_argument("--dump-propagators", dest="dump_propagators",
                        help="export Gr, D and D+ (.json suffix for JSON, binary otherwise)")


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="yangfeldman",
        description="Perturbative Wightman functions, operator identities and state reconstruction on a lattice.",
    )
    sub = parser.add_subparsers(dest="command")

    wightman = sub.add_parser("wightman", help="truncated Wightman function from graphs")
    _common(wightman)
    wightman.add_argument("--types", default="out,out,out,out", help="comma separated field types (in, loc, out)")
    wightman.add_argument("--points", type=_int_list, help="comma separated site indices")
    wightman.add_argument("--order", type=int, help="single perturbative order; all up to sigma_max when omitted")
    wightman.add_argument("--breakdown", action="store_true", help="report every graph")

    check = sub.add_parser("check", help="operator identity suite")
    _common(check)
    check.add_argument("--identity", help="check name or comma separated names; all when omitted")
    check.add_argument("--order", type=int, help="highest perturbative order checked")
    check.add_argument("--instances", type=int, help="random instances per check")

    rec = sub.add_parser("reconstruct", help="reconstruct Fock amplitudes from Wightman functionals")
    _common(rec)
    rec.add_argument("--state", help="JSON fixture with coefficients, or degrees/seed/active_modes")
    rec.add_argument("--quasifree", help="JSON functional used as the reference W")
    rec.add_argument("--no-scattering", dest="scattering", action="store_false",
                     help="skip the first-order scattering chain")

    demo = sub.add_parser("demo-nonquasifree", help="first-order out 4-point function with metric perturbation")
    _common(demo)
    demo.add_argument("--points", type=_int_list, help="four comma separated site indices")
    demo.add_argument("--nt-scan", dest="nt_scan", type=_int_list, default=[],
                      help="flat lattice heights for the baseline decay trend")

    sub.add_parser("serve", help="start the MCP server (MODE=http for streamable HTTP)")
    return parser


def _load(args: argparse.Namespace, experiment: str) -> ExperimentConfig:
    overrides: Dict[str, Any] = {
        "experiment": experiment,
        "backend": args.backend,
        "jobs": args.jobs,
        "seed": args.seed,
        "output": args.out,
    }
    for key in ("order", "instances", "identity"):
        overrides[key] = getattr(args, key, None)
    return load_config(args.config, overrides)


def _read_json(path: str, what: str) -> Any:
    try:
        return json.loads(Path(path).read_text(encoding="utf-8"))
    except FileNotFoundError:
        raise ConfigError(f"{what} file {path} not found") from None
    except json.JSONDecodeError as exc:
        raise ConfigError(f"{what} file {path} is not valid JSON: {exc}") from None


def _points(config: ExperimentConfig, count: int) -> List[int]:
    lattice = build_lattice(config.lattice)
    last = (lattice.nt - 1) * lattice.nx
    if count == 4:
        return default_points(lattice)
    return [last + (k * lattice.nx) // max(count, 1) for k in range(count)]


def run_experiment(args: argparse.Namespace, config: ExperimentConfig) -> Dict[str, Any]:
    """Dispatch to the runner of config.run.experiment."""
    experiment = config.run.experiment
    if experiment == "wightman":
        types = [t.strip() for t in getattr(args, "types", "out,out,out,out").split(",") if t.strip()]
        points = getattr(args, "points", None) or _points(config, len(types))
        if len(points) != len(types):
            raise ConfigError(f"Got {len(types)} field types for {len(points)} points")
        return run_wightman(config, types, points, breakdown=getattr(args, "breakdown", False),
                            order=getattr(args, "order", None))
    if experiment == "check":
        return run_identity_suite(config)
    if experiment == "reconstruct":
        state = _read_json(args.state, "State") if getattr(args, "state", None) else None
        quasifree = None
        if getattr(args, "quasifree", None):
            quasifree = functional_from_json(_read_json(args.quasifree, "Quasifree functional"))
        return run_reconstruction_demo(config, state=state, quasifree=quasifree,
                                       scattering=getattr(args, "scattering", True))
    if experiment == "demo-nonquasifree":
        return run_nonquasifree_demo(config, points=getattr(args, "points", None),
                                     nt_scan=getattr(args, "nt_scan", []))
    raise ConfigError(f"Unknown experiment '{experiment}'. Available: {', '.join(EXPERIMENTS)}")


def exit_code(report: Dict[str, Any]) -> int:
    """1 if the report carries a failed verdict, 0 otherwise."""
    if report.get("pass") is False or report.get("passed") is False:
        return EXIT_FAILED
    if any(value is False for value in report.get("verdict", {}).values()):
        return EXIT_FAILED
    return EXIT_OK


def configure_logging() -> None:
    level = os.getenv("YF_LOG_LEVEL", "WARNING").upper()
    logging.basicConfig(level=getattr(logging, level, logging.WARNING),
                        format="%(asctime)s %(levelname)s %(name)s: %(message)s")


def main(argv: Optional[Sequence[str]] = None) -> int:
    load_dotenv()
    configure_logging()
    parser = build_parser()
    args = parser.parse_args(argv)

    if args.command == "serve":
        from .main import main as serve

        serve()
        return EXIT_OK

    try:
        if args.command is None:
            config = load_config(os.getenv("YF_CONFIG"))
        else:
            config = _load(args, args.command)
        if getattr(args, "dump_propagators", None):
            target = Path(args.dump_propagators)
            ctx = init_engine(config)
            dump_propagators(ctx.propagators, target, "json" if target.suffix == ".json" else "binary")
            logger.info("Propagators written to %s", target)
        report = run_experiment(args, config)
    except YangFeldmanError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_ERROR

    text = write_json(report, config.run.output)
    if config.run.output is None:
        sys.stdout.write(text)
    if getattr(args, "csv", None):
        write_csv(table_rows(report), args.csv)
    return exit_code(report)


if __name__ == "__main__":
    sys.exit(main())
