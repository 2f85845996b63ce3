"""Command-line entry point: ``polymerlab [run] <experiment> [--config FILE] [flags]``.

Prints a JSON summary on stdout; logs go to stderr. Exit codes: 0 success,
2 invalid configuration or domain, 3 resource guard, 4 numerical degeneracy,
1 anything else.
"""

import argparse
import logging
import sys
from pathlib import Path
from typing import Any, Dict, List, Optional

# Add parent directory to Python path to support running directly
# This allows: python src/cli.py from the project root
if __name__ == "__main__":
    parent_dir = str(Path(__file__).parent.parent)
    if parent_dir not in sys.path:
        sys.path.insert(0, parent_dir)

from src.config import ErrorCode, exit_code_for
from src.runner.commands import run
from src.runner.settings import EXPERIMENTS, load_config
from src.utils.errors import PolymerLabError, format_error_json, format_success_json
from src.utils.logging_config import get_logger, setup_logging

logger = get_logger(__name__)

# flag dest -> dotted config path
FLAG_PATHS = {
    "alpha": "law.alpha",
    "family": "law.family",
    "d": "geometry.d",
    "N": "geometry.N",
    "N_grid": "geometry.N_grid",
    "L": "geometry.L",
    "t": "geometry.t",
    "beta_hat": "disorder.beta_hat",
    "a": "disorder.a",
    "b": "disorder.b",
    "a_grid": "disorder.a_grid",
    "replicas": "replicas",
    "seed": "seed",
    "workers": "workers",
    "output": "output",
}


def _int_list(text: str) -> List[int]:
    return [int(x) for x in text.split(",") if x.strip()]


def _float_list(text: str) -> List[float]:
    return [float(x) for x in text.split(",") if x.strip()]


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="polymerlab", description="Heavy-tailed directed polymer experiments")
    parser.add_argument("experiment", choices=EXPERIMENTS)
    parser.add_argument("--config", help="JSON config file; flags override its fields")
    parser.add_argument("--alpha", type=float)
    parser.add_argument("--family", choices=["pareto", "centered_pareto", "log_pareto"])
    parser.add_argument("--d", type=int)
    parser.add_argument("--N", type=int)
    parser.add_argument("--N-grid", dest="N_grid", type=_int_list, help="comma-separated, e.g. 16,32,64")
    parser.add_argument("--L", type=float, help="continuum window half-width")
    parser.add_argument("--t", type=float, help="time of the path marginal (sample-paths)")
    parser.add_argument("--beta-hat", dest="beta_hat", type=float)
    parser.add_argument("--a", type=float)
    parser.add_argument("--b", type=float)
    parser.add_argument("--a-grid", dest="a_grid", type=_float_list)
    parser.add_argument("--replicas", type=int)
    parser.add_argument("--seed", type=int)
    parser.add_argument("--workers", type=int)
    parser.add_argument("--output")
    parser.add_argument("--log-level", default=None, choices=["DEBUG", "INFO", "WARNING", "ERROR"])
    parser.add_argument("--log-file", default=None)
    return parser


def overrides_from_args(args: argparse.Namespace) -> Dict[str, Any]:
    overrides: Dict[str, Any] = {"experiment": args.experiment}
    for dest, path in FLAG_PATHS.items():
        value = getattr(args, dest, None)
        if value is not None:
            overrides[path] = value
    return overrides


def main(argv: Optional[List[str]] = None) -> int:
    argv = list(sys.argv[1:] if argv is None else argv)
    # `polymerlab run <experiment>` and `polymerlab <experiment>` are the same command
    if argv and argv[0] == "run":
        argv = argv[1:]
    args = build_parser().parse_args(argv)
    setup_logging(getattr(logging, args.log_level) if args.log_level else None, args.log_file)
    try:
        config = load_config(args.config, overrides_from_args(args))
        result = run(config)
        print(format_success_json(result))
        return 0
    except PolymerLabError as e:
        logger.error(f"{args.experiment} failed: {e.message}")
        print(e.to_json())
        return exit_code_for(e.code)
    except Exception as e:
        logger.error(f"Unexpected error in {args.experiment}: {e}", exc_info=True)
        print(format_error_json(
            code=ErrorCode.INTERNAL_ERROR,
            message="Unexpected error while running the experiment",
            context={"error": str(e)},
        ))
        return 1


if __name__ == "__main__":
    sys.exit(main())
