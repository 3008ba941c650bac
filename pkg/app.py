"""
Command-line entry point for training and evaluating parameter-aware reservoirs
"""
import argparse
import json
import logging
import os
import sys
from typing import Any, List, Optional

import numpy as np
from dotenv import load_dotenv

load_dotenv()

from experiments.config import OUTPUT_DIR, ExperimentConfigManager  # noqa: E402
from experiments.runner import (  # noqa: E402
    cmd_hyperopt,
    cmd_kam,
    cmd_lyapunov,
    cmd_plot,
    cmd_poincare,
    cmd_predict,
    cmd_simulate,
    cmd_train,
)
from reservoir import __version__  # noqa: E402
from reservoir.errors import ReservoirError  # noqa: E402

logger = logging.getLogger(__name__)

LOG_LEVEL = os.getenv("RC_LOG_LEVEL", "INFO")
LOG_FORMAT = "%(asctime)s - %(name)s - %(levelname)s - %(message)s"
PACKAGE_LOGGERS = ("reservoir", "systems", "analysis", "experiments")


class CliParser(argparse.ArgumentParser):
    """Argument parser whose usage errors exit with status 1"""

    def error(self, message):
        self.print_usage(sys.stderr)
        self.exit(1, f"{self.prog}: error: {message}\n")


def configure_logging(level: str) -> None:
    numeric = getattr(logging, level.upper(), None)
    if not isinstance(numeric, int):
        raise ReservoirError(ReservoirError.CONFIG_INVALID, f"unknown log level {level}")
    logging.basicConfig(level=numeric, format=LOG_FORMAT, force=True)
    for name in PACKAGE_LOGGERS:
        logging.getLogger(name).setLevel(numeric)


def build_parser() -> argparse.ArgumentParser:
    parser = CliParser(prog="reservoir-kam", description="Reservoir computing for Hamiltonian dynamics and KAM diagrams")
    parser.add_argument("--version", action="version", version=f"%(prog)s {__version__}")
    parser.add_argument("--config", help="experiment JSON file or preset name (fig1a, fig1b, fig2, fig4, fig5, fig6, fig7)")
    parser.add_argument("--seed", type=int, help="override the experiment seed")
    parser.add_argument("--out", help="output directory (default $RC_OUTPUT_DIR/<experiment name>)")
    parser.add_argument("--threads", type=int, help="worker threads (default $RC_THREADS or physical cores)")
    parser.add_argument("--log-level", default=LOG_LEVEL, help="logging level (default $RC_LOG_LEVEL or INFO)")

    commands = parser.add_subparsers(dest="command", required=True, parser_class=CliParser)

    simulate = commands.add_parser("simulate", help="write ground-truth trajectories as CSV")
    simulate.add_argument("--beta", type=float, nargs="+", help="control parameters (default: training betas)")
    simulate.add_argument("--steps", type=int, help="samples per trajectory (default: training length)")

    commands.add_parser("train", help="train and save the model file(s)")

    predict = commands.add_parser("predict", help="closed-loop prediction from a model file")
    predict.add_argument("--model", required=True, help="model file written by train")
    predict.add_argument("--beta", type=float, help="control parameter to predict at")
    predict.add_argument("--steps", type=int, help="closed-loop steps (default: prediction steps of the config)")
    predict.add_argument(
        "--continue",
        dest="continue_training",
        action="store_true",
        help="continue the last training segment and report valid time",
    )
    predict.add_argument(
        "--lyapunov", type=float, help="exponent used for valid time (default: computed from the true system)"
    )

    kam = commands.add_parser("kam", help="model and true KAM diagrams with per-beta climate distances")
    kam.add_argument("--model", help="shared model file (default: train according to the config)")
    kam.add_argument("--betas", type=float, nargs="*", help="betas to draw (default: evaluation betas of the config)")
    kam.add_argument("--classify", action="store_true", help="also compare regular/chaotic classification per beta")

    poincare = commands.add_parser("poincare", help="section of a trajectory or prediction CSV")
    poincare.add_argument("--input", required=True, help="time-series CSV")
    poincare.add_argument("--beta", type=float, default=float("nan"), help="label for the section")

    lyapunov = commands.add_parser("lyapunov", help="largest Lyapunov exponent")
    source = lyapunov.add_mutually_exclusive_group()
    source.add_argument("--input", help="time-series CSV (nearest-neighbour divergence)")
    source.add_argument("--model", help="model file; the closed-loop output at --beta is analysed")
    lyapunov.add_argument("--beta", type=float, help="control parameter (true system when no input or model is given)")

    hyperopt = commands.add_parser("hyperopt", help="random search over reservoir hyperparameters")
    hyperopt.add_argument("--budget", type=int, help="number of trials (default: hyperopt budget of the config)")

    plot = commands.add_parser("plot", help="scatter SVG of diagram CSVs")
    plot.add_argument("--input", required=True, nargs="+", help="diagram CSV files")
    plot.add_argument("--output", help="SVG path (default <out>/plot.svg)")

    return parser


def _jsonable(value: Any) -> Any:
    if isinstance(value, np.integer):
        return int(value)
    if isinstance(value, np.floating):
        return float(value)
    if isinstance(value, np.ndarray):
        return value.tolist()
    raise TypeError(f"{type(value).__name__} is not JSON serializable")


def run(args: argparse.Namespace) -> Any:
    manager = ExperimentConfigManager()
    config = manager.load(args.config, seed=args.seed, output_dir=args.out) if args.config else None
    if config is None and args.command != "predict":
        raise ReservoirError(ReservoirError.CONFIG_INVALID, f"{args.command} needs --config")
    out_dir = config.resolved_output_dir() if config is not None else (args.out or os.path.join(OUTPUT_DIR, "predict"))

    if args.command == "simulate":
        return cmd_simulate(config, out_dir, args.beta, args.steps)
    if args.command == "train":
        return cmd_train(config, out_dir, args.threads)
    if args.command == "predict":
        return cmd_predict(args.model, out_dir, args.beta, args.steps, config, args.continue_training, args.lyapunov)
    if args.command == "kam":
        return cmd_kam(config, out_dir, args.model, args.betas, args.threads, args.classify)
    if args.command == "poincare":
        return cmd_poincare(config, args.input, out_dir, args.beta)
    if args.command == "lyapunov":
        return cmd_lyapunov(config, out_dir, args.input, args.model, args.beta)
    if args.command == "hyperopt":
        return cmd_hyperopt(config, out_dir, args.budget, args.threads)
    if args.command == "plot":
        return cmd_plot(config, args.input, args.output or os.path.join(out_dir, "plot.svg"))
    raise ReservoirError(ReservoirError.CONTRACT_VIOLATION, f"unknown command {args.command}")


def main(argv: Optional[List[str]] = None) -> int:
    args = build_parser().parse_args(argv)
    try:
        configure_logging(args.log_level)
        logger.info(f"=== reservoir-kam {__version__}: {args.command} ===")
        result = run(args)
    except ReservoirError as e:
        logger.error(f"{args.command} failed: {e}")
        return e.exit_code

    print(json.dumps(result, indent=2, default=_jsonable))
    return 0


if __name__ == "__main__":
    sys.exit(main())
