"""Command-line entry point: ``cfasync {fig1,fig2,fig3,fig4,validate}``."""

from __future__ import annotations

import argparse
import logging
import sys

from ..netmodel import ConfigError
from .config import load_config
from .experiments import RUNNERS, run_validation
from .io import write_figure

log = logging.getLogger("cfasync")

EXIT_OK = 0
EXIT_USAGE = 1
EXIT_FAIL = 2
EXIT_INCONCLUSIVE = 3


class _Parser(argparse.ArgumentParser):
    # usage errors share the config-error exit code
    def error(self, message):
        self.print_usage(sys.stderr)
        self.exit(EXIT_USAGE, f"{self.prog}: error: {message}\n")


def _u64(text: str) -> int:
    v = int(text)
    if not 0 <= v < 2**64:
        raise argparse.ArgumentTypeError("seed must fit in an unsigned 64-bit integer")
    return v


def _positive(text: str) -> int:
    v = int(text)
    if v < 1:
        raise argparse.ArgumentTypeError("must be >= 1")
    return v


def build_parser() -> argparse.ArgumentParser:
    parser = _Parser(prog="cfasync", description="Cell-free downlink SE experiments under asynchronous reception.")
    parser.add_argument("-v", "--verbose", action="store_true")
    sub = parser.add_subparsers(dest="command", required=True, parser_class=_Parser)
    for name in ("fig1", "fig2", "fig3", "fig4", "validate"):
        p = sub.add_parser(name)
        p.add_argument("--config", help="YAML config file, or a JSON sidecar of an earlier run")
        p.add_argument("--seed", type=_u64)
        p.add_argument("--out", help="output directory")
        p.add_argument("--trials", type=_positive, help="Monte Carlo trials")
        p.add_argument("--scenes", type=_positive, help="number of layouts")
        p.add_argument("--workers", type=_positive, help="threads for sweep points")
        if name == "validate":
            p.add_argument("--corrupt", choices=["numerator"], help=argparse.SUPPRESS)
    return parser


def _resolve(args):
    cfg = load_config(args.config, args.command)
    if args.seed is not None:
        cfg.seed = args.seed
    if args.out is not None:
        cfg.out_dir = args.out
    if args.trials is not None:
        cfg.mc.trials = args.trials
    if args.scenes is not None:
        cfg.num_scenes = args.scenes
    if args.workers is not None:
        cfg.sweep.workers = args.workers
    cfg.validate()
    return cfg


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING, format="%(levelname)s %(message)s")
    try:
        cfg = _resolve(args)
    except ConfigError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    except OSError as exc:
        print(f"cannot read config: {exc}", file=sys.stderr)
        return EXIT_USAGE

    if args.command == "validate":
        report, fd = run_validation(cfg, corrupt=getattr(args, "corrupt", None))
        csv_path, meta_path = write_figure(fd, cfg.out_dir)
        print(f"validation {report.status}: {len(report.entries)} entries, {report.n_fail} failed, "
              f"{report.n_inconclusive} inconclusive, max rel err {report.max_rel_err:.4f}")
        print(f"wrote {csv_path} and {meta_path}")
        return {"pass": EXIT_OK, "fail": EXIT_FAIL, "inconclusive": EXIT_INCONCLUSIVE}[report.status]

    fd = RUNNERS[args.command](cfg)
    csv_path, meta_path = write_figure(fd, cfg.out_dir)
    log.info("summary: %s", fd.summary)
    print(f"wrote {csv_path} ({len(fd.rows)} rows) and {meta_path}")
    return EXIT_OK


if __name__ == "__main__":
    sys.exit(main())
