"""The ``isac-spu`` command line."""

import argparse
import logging
import sys
from typing import List, Optional, Sequence

import pydantic

from cli import commands, scenario
from common import config, errors
from sensing import budget

logger = logging.getLogger(__name__)


class _Parser(argparse.ArgumentParser):
    """Usage errors exit with status 1 instead of argparse's 2."""

    def error(self, message: str):  # type: ignore[override]
        self.print_usage(sys.stderr)
        self.exit(1, f"{self.prog}: error: {message}\n")


def _float_list(text: str) -> List[float]:
    try:
        return [float(v) for v in text.split(",") if v.strip()]
    except ValueError as e:
        raise argparse.ArgumentTypeError(f"not a comma separated list of numbers: {text}") from e


def build_parser() -> argparse.ArgumentParser:
    """All subcommands and their flags."""
    parser = _Parser(prog="isac-spu", description="OFDM radar sensing processing unit.")
    sub = parser.add_subparsers(dest="command", required=True, parser_class=_Parser)

    def scenario_command(name: str, help_text: str) -> argparse.ArgumentParser:
        command = sub.add_parser(name, help=help_text)
        command.add_argument("--config", help="scenario YAML; defaults apply when omitted")
        command.add_argument("--out", help="output directory (overrides run.output_dir)")
        return command

    simulate = scenario_command("simulate", "write reference/reflected grid pairs")
    simulate.add_argument("--seed", type=int, help="overrides run.seed")

    calibrate = scenario_command("calibrate", "write a clutter reference from clutter-only frames")
    calibrate.add_argument("--seed", type=int, help="overrides run.seed")

    process = scenario_command("process", "detect targets in every frame pair")
    process.add_argument("--frames", help="directory holding the frame grids (default: --out)")
    process.add_argument("--clutter-ref", help="clutter reference grid to subtract")
    process.add_argument("--threshold-db", type=float, help="overrides processing.threshold_db")
    process.add_argument("--csv", action="store_true", help="also export periodograms as CSV")

    tracker = scenario_command("track", "track the detections of a processed run")
    tracker.add_argument("--detections", help="detections JSON-lines (default: OUT/detections)")
    tracker.add_argument(
        "--strongest-only", action="store_true", help="log only the strongest track per frame"
    )

    predict = sub.add_parser("predict-range", help="achievable range from a measured SNR")
    gamma_ref = predict.add_mutually_exclusive_group(required=True)
    gamma_ref.add_argument("--gamma-ref", type=float, help="linear SNR at --r-ref")
    gamma_ref.add_argument("--gamma-ref-db", type=float, help="SNR at --r-ref in dB")
    gamma_min = predict.add_mutually_exclusive_group(required=True)
    gamma_min.add_argument("--gamma-min", type=float, help="minimum usable linear SNR")
    gamma_min.add_argument("--gamma-min-db", type=float, help="minimum usable SNR in dB")
    predict.add_argument("--r-ref", type=float, required=True, help="reference range in m")
    predict.add_argument("--eta", type=float, default=2.0, help="path-loss exponent")
    predict.add_argument("--ranges", type=_float_list, help="comma separated sweep ranges in m")
    predict.add_argument("--format", choices=["text", "csv"], default="text")

    scenario_command("resolutions", "print bin widths and unambiguous intervals")
    return parser


def _load(path: Optional[str]) -> scenario.ScenarioConfig:
    return scenario.load_config(path) if path is not None else scenario.ScenarioConfig()


def _dispatch(args: argparse.Namespace) -> int:
    if args.command == "predict-range":
        gamma_ref = args.gamma_ref
        if gamma_ref is None:
            gamma_ref = budget.db_to_linear(args.gamma_ref_db)
        gamma_min = args.gamma_min
        if gamma_min is None:
            gamma_min = budget.db_to_linear(args.gamma_min_db)
        link_budget = budget.LinkBudget(
            gamma_ref=gamma_ref, r_ref=args.r_ref, eta=args.eta, gamma_min=gamma_min
        )
        sys.stdout.write(commands.cmd_predict_range(link_budget, args.ranges, args.format))
        return 0

    scenario_config = _load(args.config)
    if args.command == "simulate":
        commands.cmd_simulate(scenario_config, out=args.out, seed=args.seed)
    elif args.command == "calibrate":
        commands.cmd_calibrate(scenario_config, out=args.out, seed=args.seed)
    elif args.command == "process":
        return commands.cmd_process(
            scenario_config,
            frames=args.frames,
            out=args.out,
            clutter_ref=args.clutter_ref,
            threshold_db=args.threshold_db,
            write_csv=args.csv,
        )
    elif args.command == "track":
        commands.cmd_track(
            scenario_config,
            detections=args.detections,
            out=args.out,
            strongest_only=args.strongest_only,
        )
    elif args.command == "resolutions":
        sys.stdout.write(commands.cmd_resolutions(scenario_config))
    return 0


def main(argv: Optional[Sequence[str]] = None) -> int:
    """Parse ``argv``, run the subcommand and map failures to exit codes."""
    logging.basicConfig(
        level=config.settings.log_level,
        format="%(asctime)s %(levelname)s %(name)s: %(message)s",
    )
    args = build_parser().parse_args(argv)
    try:
        return _dispatch(args)
    except errors.SpuError as e:
        logger.error("%s", e)
        return e.exit_code
    except pydantic.ValidationError as e:
        logger.error("invalid input: %s", e)
        return errors.InvalidInputError.exit_code
    except OSError as e:
        logger.error("I/O error: %s", e)
        return errors.FileFormatError.exit_code


if __name__ == "__main__":
    sys.exit(main())
