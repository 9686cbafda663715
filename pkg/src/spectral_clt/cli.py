"""Command line entry point.

    spectral-clt <experiment> [--config PATH] [--n N ...] [--replicates R]
                 [--seed S] [--eta ETA] [--out DIR] [--workers W] [--set KEY=VALUE ...]

Exit status is 0 on success, 2 for configuration errors and 3 for
numerical or domain failures.
"""
import argparse
import logging
import sys

from ._version import __version__
from .exceptions import ConfigError, SpectralCLTError
from .experiments import EXPERIMENTS, load_config, parse_settings, run

log = logging.getLogger("spectral_clt")


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        raise ConfigError(message)


def build_parser():
    parser = _Parser(prog="spectral-clt", description="Spectral embedding CLT experiments.")
    parser.add_argument("experiment", choices=EXPERIMENTS)
    parser.add_argument("--config", help="key = value settings file")
    parser.add_argument("--n", type=int, nargs="+", dest="n_grid", help="vertex counts")
    parser.add_argument("--replicates", type=int)
    parser.add_argument("--seed", type=int)
    parser.add_argument("--eta", type=float)
    parser.add_argument("--out", dest="out_dir")
    parser.add_argument("--workers", type=int)
    parser.add_argument("--set", action="append", default=[], metavar="KEY=VALUE",
                        help="any other setting, e.g. --set p=0.5")
    parser.add_argument("--version", action="version", version=f"%(prog)s {__version__}")
    parser.add_argument("-v", "--verbose", action="store_true")
    return parser


def main(argv=None):
    logging.basicConfig(format="%(levelname)s %(message)s")
    try:
        args = build_parser().parse_args(argv)
        log.setLevel(logging.INFO if args.verbose else logging.WARNING)
        extra = {}
        for item in args.set:
            key, sep, value = item.partition("=")
            if not sep:
                raise ConfigError(f"--set expects KEY=VALUE, got {item!r}")
            extra[key.strip()] = value
        overrides = parse_settings(extra)
        overrides.update(n_grid=args.n_grid, replicates=args.replicates, seed=args.seed,
                         eta=args.eta, out_dir=args.out_dir, workers=args.workers)
        config = load_config(args.experiment, args.config, **overrides)
        log.info("running %s (config %s)", config.experiment, config.hash())
        result = run(config)
    except ConfigError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return 2
    except SpectralCLTError as exc:
        print(f"numerical error: {type(exc).__name__}: {exc}", file=sys.stderr)
        return 3
    for name, path in result.files.items():
        print(f"{name}: {path}")
    return 0


if __name__ == "__main__":
    sys.exit(main())
