"""Command-line entry point: ``qsmooth run | figures | verify | record``.

Exit codes: 0 ok, 1 invariant failure, 2 configuration error, 3 propagation error.
"""

import argparse
import logging
import os
import sys

from . import __version__
from .config import load_config
from .engine import generate_observed_record, sample_unobserved_record
from .errors import ConfigError, EstimationError, PropagationError
from .experiment import (
    FIGURES,
    figure_table,
    load_cached_result,
    run_experiment,
    write_outputs,
    write_table,
)
from .kernel import BACKENDS
from .records import read_observed_csv, write_observed_csv, write_unobserved_csv

EXIT_OK, EXIT_INVARIANT, EXIT_CONFIG, EXIT_PROPAGATION = 0, 1, 2, 3

log = logging.getLogger("qsmooth")


def _u64(text):
    try:
        value = int(text, 0)
    except ValueError:
        raise argparse.ArgumentTypeError(f"not an integer: {text!r}") from None
    if not 0 <= value < 2**64:
        raise argparse.ArgumentTypeError("must be an unsigned 64-bit integer")
    return value


def _threads(text):
    value = int(text)
    if value < 0:
        raise argparse.ArgumentTypeError("threads must be >= 0 (0 = one per CPU)")
    return value


def build_parser():
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--config", metavar="PATH", help="key = value config file")
    common.add_argument("--seed", type=_u64, metavar="U64", help="override the config seed")
    common.add_argument("--threads", type=_threads, default=0, metavar="INT",
                        help="worker threads (0 = auto)")
    common.add_argument("--out", metavar="DIR", help="output directory (overrides output_dir)")
    common.add_argument("--quick", action="store_true", help="use the small ensemble preset (2e3, 3e3)")
    common.add_argument("--backend", choices=sorted(BACKENDS), help="ensemble kernel backend")
    common.add_argument("-v", "--verbose", action="store_true")

    ap = argparse.ArgumentParser(prog="qsmooth", description=__doc__.splitlines()[0])
    ap.add_argument("--version", action="version", version=f"%(prog)s {__version__}")
    sub = ap.add_subparsers(dest="command", required=True)

    p_run = sub.add_parser("run", parents=[common], help="full run: record, ensembles, CSV tables")
    p_run.add_argument("--record", metavar="CSV", help="replay an observed record instead of sampling one")

    p_fig = sub.add_parser("figures", parents=[common], help="write figure tables (reuses run outputs)")
    p_fig.add_argument("which", nargs="?", default="all", help="1, 2, 3, 4 or all")

    sub.add_parser("verify", parents=[common], help="run the invariant suite")

    p_rec = sub.add_parser("record", parents=[common], help="write the observed record only")
    p_rec.add_argument("--unobserved-index", type=_u64, metavar="I",
                       help="also write the ostensible unobserved record of stream I")
    return ap


def _config(args):
    cfg = load_config(args.config, seed=args.seed, output_dir=args.out)
    return cfg.quick() if args.quick else cfg


def cmd_run(args):
    cfg = _config(args)
    record = None
    if args.record:
        record = read_observed_csv(args.record, dt=cfg.dt)
    result = run_experiment(cfg, threads=args.threads, backend=args.backend, record=record)
    manifest = write_outputs(result, cfg.output_dir, replayed=record is not None)
    print(f"wrote {cfg.output_dir} (manifest {manifest})")
    return EXIT_OK


def _figure_indices(which):
    if which == "all":
        return FIGURES
    try:
        idx = int(which)
    except ValueError:
        idx = None
    if idx not in FIGURES:
        raise ConfigError(f"unknown figure {which!r}; expected 1, 2, 3, 4 or all")
    return (idx,)


def cmd_figures(args):
    cfg = _config(args)
    figures = _figure_indices(args.which)
    result = load_cached_result(cfg, cfg.output_dir)
    if result is not None and args.backend and result.backend != args.backend:
        result = None
    if result is None:
        log.info("no matching run outputs in %s; computing", cfg.output_dir)
        result = run_experiment(cfg, threads=args.threads, backend=args.backend)
        write_outputs(result, cfg.output_dir)
    for which in figures:
        path = os.path.join(cfg.output_dir, f"fig{which}.csv")
        write_table(path, *figure_table(result, which))
        print(f"wrote {path}")
    return EXIT_OK


def cmd_verify(args):
    from .verify import full_suite

    cfg = _config(args)
    result = run_experiment(cfg, threads=args.threads, backend=args.backend)
    checks = full_suite(result, seed=0)
    for c in checks:
        print(c.line())
    failed = [c for c in checks if not c.passed]
    print(f"{len(checks) - len(failed)}/{len(checks)} checks passed")
    return EXIT_INVARIANT if failed else EXIT_OK


def cmd_record(args):
    cfg = _config(args)
    record, _ = generate_observed_record(cfg.params, cfg.grid, cfg.seed)
    os.makedirs(cfg.output_dir, exist_ok=True)
    path = os.path.join(cfg.output_dir, "record.csv")
    write_observed_csv(record, path)
    print(f"wrote {path}")
    if args.unobserved_index is not None:
        u = sample_unobserved_record(cfg.params, cfg.grid, cfg.seed, args.unobserved_index)
        path = os.path.join(cfg.output_dir, f"unobserved_{args.unobserved_index}.csv")
        write_unobserved_csv(u, path)
        print(f"wrote {path}")
    return EXIT_OK


COMMANDS = {"run": cmd_run, "figures": cmd_figures, "verify": cmd_verify, "record": cmd_record}


def main(argv=None):
    ap = build_parser()
    try:
        args = ap.parse_args(argv)
    except SystemExit as exc:
        return exc.code if isinstance(exc.code, int) else EXIT_CONFIG
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(name)s: %(message)s")
    try:
        return COMMANDS[args.command](args)
    except ConfigError as exc:
        print(f"configuration error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except PropagationError as exc:
        print(f"propagation error: {exc}", file=sys.stderr)
        return EXIT_PROPAGATION
    except EstimationError as exc:
        print(f"estimation error: {exc}", file=sys.stderr)
        return EXIT_INVARIANT


if __name__ == "__main__":
    sys.exit(main())
