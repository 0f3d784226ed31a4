"""
Command-line entry point ``vpinn-bench``.

    vpinn-bench run CONFIG [--seeds 0,1,2] [--out DIR] [--workers N] [--max-iters N]
    vpinn-bench sweep CONFIG --axis N=3,5,10 --axis K=3,5 [...]

Exit status: 0 on success, 2 for configuration errors, 3 when every seed
diverged, 4 for I/O errors and 1 for any other solver error. Failures print
one ``error[<kind>]: <reason>`` line on stderr.
"""

import argparse
import logging
import sys

from vpinn_bench import __version__
from vpinn_bench.bench import default_workers, parse_axis, run_experiment, run_sweep
from vpinn_bench.config import ExperimentConfigError
from vpinn_bench.errors import AllSeedsDivergedError, ConfigurationError, VpinnError

_logger = logging.getLogger(__name__)

EXIT_OK = 0
EXIT_FAILURE = 1
EXIT_CONFIG = 2
EXIT_DIVERGED = 3
EXIT_IO = 4


def _seeds(text):
    try:
        return tuple(int(s) for s in text.split(",") if s.strip())
    except ValueError:
        raise argparse.ArgumentTypeError(f"seeds must be comma-separated integers, got {text!r}")


def _axis(text):
    try:
        return parse_axis(text)
    except (ValueError, SyntaxError) as e:
        raise argparse.ArgumentTypeError(str(e))


def parse_args(args):
    """Parse command line parameters.

    Args:
      args (List[str]): command line parameters as list of strings
          (for example  ``["--help"]``).

    Returns:
      :obj:`argparse.Namespace`: command line parameters namespace
    """
    parser = argparse.ArgumentParser(
        prog="vpinn-bench", description="Train variational PINNs from experiment configs."
    )
    parser.add_argument("--version", action="version", version=f"vpinn-bench {__version__}")
    parser.add_argument(
        "-v",
        "--verbose",
        dest="loglevel",
        help="set loglevel to INFO",
        action="store_const",
        const=logging.INFO,
    )
    parser.add_argument(
        "-vv",
        "--very-verbose",
        dest="loglevel",
        help="set loglevel to DEBUG",
        action="store_const",
        const=logging.DEBUG,
    )
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("config", help="experiment configuration file")
    common.add_argument("--seeds", type=_seeds, help="comma-separated seeds, overrides [run] seeds")
    common.add_argument("--out", help="output directory, overrides [run] output_dir")
    common.add_argument(
        "--workers", type=int, default=default_workers(), help="parallel seeds (default: CPU count)"
    )
    common.add_argument("--max-iters", type=int, help="iteration budget, overrides [run] max_iters")

    commands = parser.add_subparsers(dest="command", required=True)
    commands.add_parser("run", parents=[common], help="run one experiment")
    sweep = commands.add_parser("sweep", parents=[common], help="run a grid of experiments")
    sweep.add_argument(
        "--axis",
        type=_axis,
        action="append",
        default=[],
        metavar="NAME=V1,V2,...",
        help="sweep axis: a dotted config field or one of N, K, tau, L (default: the [sweep] section)",
    )
    return parser.parse_args(args)


def setup_logging(loglevel):
    """Setup basic logging.

    Args:
      loglevel (int): minimum loglevel for emitting messages
    """
    logformat = "[%(asctime)s] %(levelname)s:%(name)s:%(message)s"
    logging.basicConfig(
        level=loglevel or logging.WARNING, stream=sys.stderr, format=logformat, datefmt="%Y-%m-%d %H:%M:%S"
    )


def _fail(kind, message, code):
    print(f"error[{kind}]: {' '.join(str(message).split())}", file=sys.stderr)
    return code


def main(args):
    """Run the requested command and return the exit status.

    Args:
      args (List[str]): command line parameters as list of strings
    """
    args = parse_args(args)
    setup_logging(args.loglevel)
    options = dict(seeds=args.seeds, output_dir=args.out, workers=args.workers, max_iters=args.max_iters)
    try:
        if args.command == "run":
            artifacts = run_experiment(args.config, **options)
            print(artifacts.summary_file)
        else:
            path, _ = run_sweep(args.config, dict(args.axis), **options)
            print(path)
    except (ExperimentConfigError, ConfigurationError) as e:
        return _fail("config", e, EXIT_CONFIG)
    except AllSeedsDivergedError as e:
        return _fail("diverged", e, EXIT_DIVERGED)
    except OSError as e:
        return _fail("io", e, EXIT_IO)
    except VpinnError as e:
        return _fail("solver", f"{type(e).__name__}: {e}", EXIT_FAILURE)
    _logger.info("done")
    return EXIT_OK


def run():
    """Calls :func:`main` passing the CLI arguments extracted from :obj:`sys.argv`

    This function can be used as entry point to create console scripts with setuptools.
    """
    sys.exit(main(sys.argv[1:]))


if __name__ == "__main__":
    run()
