"""``swlab <experiment> --config path [--seed N] [--out dir]``."""

from __future__ import annotations

import argparse
import json
import sys

from ..exact.spaces import CapExceeded
from .config import EXPERIMENTS, ConfigError, load_config
from .run import run

EXIT_OK, EXIT_INVALID, EXIT_CAP = 0, 2, 3


def _parser() -> argparse.ArgumentParser:
    ap = argparse.ArgumentParser(prog="swlab", description="Swendsen-Wang dynamics laboratory")
    sub = ap.add_subparsers(dest="experiment", required=True)
    for name in EXPERIMENTS:
        sp = sub.add_parser(name)
        sp.add_argument("--config", required=True, help="JSON run configuration")
        sp.add_argument("--seed", type=int, default=None, help="override the master seed")
        sp.add_argument("--out", default=None, help="root directory for run records")
    return ap


def main(argv=None) -> int:
    args = _parser().parse_args(argv)
    try:
        cfg = load_config(args.config)
        if cfg.experiment != args.experiment:
            raise ConfigError(f"config describes a {cfg.experiment!r} run, not {args.experiment!r}")
        cfg = cfg.with_updates(seed=args.seed, out=args.out)
        rec = run(cfg)
    except CapExceeded as err:
        print(f"swlab: cap exceeded: {err}", file=sys.stderr)
        return EXIT_CAP
    except (ConfigError, ValueError) as err:
        print(f"swlab: invalid configuration: {err}", file=sys.stderr)
        return EXIT_INVALID
    out = {"experiment": cfg.experiment, "summary": rec.summary, "fits": rec.fits, "record": rec.path,
           "wall_time": rec.wall_time}
    print(json.dumps(out, indent=2, sort_keys=True))
    return EXIT_OK


if __name__ == "__main__":
    sys.exit(main())
