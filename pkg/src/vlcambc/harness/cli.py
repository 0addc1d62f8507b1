"""Command line entry point.

Exit codes: 0 success, 1 usage or configuration error, 2 a check failed,
3 file I/O error.
"""

from __future__ import annotations

import argparse
import sys

from .config import RunConfig, kinds_from_flag, load_config
from . import sweep

EXIT_OK, EXIT_USAGE, EXIT_CHECK, EXIT_IO = 0, 1, 2, 3


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        self.print_usage(sys.stderr)
        print(f"{self.prog}: error: {message}", file=sys.stderr)
        raise SystemExit(EXIT_USAGE)


def build_parser() -> argparse.ArgumentParser:
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--config", help="YAML file of dotted config keys")
    common.add_argument("--seed", type=int)
    common.add_argument("--bd", choices=("eh", "relay", "control", "all"), default=None)
    common.add_argument("--frames", type=int, help="frames per grid point")
    common.add_argument("--workers", type=int)

    p = _Parser(prog="vlc-ambc", description="VLC-assisted ambient backscatter simulator")
    sub = p.add_subparsers(dest="cmd", required=True, parser_class=_Parser)

    s = sub.add_parser("sweep", parents=[common], help="run the full grid and write a CSV")
    s.add_argument("--out", default="sweep.csv")
    s.add_argument("--resume", action="store_true", help="keep rows already in --out")

    s = sub.add_parser("point", parents=[common], help="simulate one grid cell")
    s.add_argument("--d-led", type=float)
    s.add_argument("--d-rx", type=float)
    s.add_argument("--p-tx", type=float)
    s.add_argument("--out", help="also write the row as CSV")

    s = sub.add_parser("theory", parents=[common], help="print closed-form BER and RSS curves")
    s.add_argument("--out")

    s = sub.add_parser("report", parents=[common], help="check a sweep CSV and print sensitivities")
    s.add_argument("csv", nargs="?", default="sweep.csv")

    sub.add_parser("selftest", parents=[common], help="run the quick invariant suite")
    return p


def make_config(args) -> RunConfig:
    cfg = load_config(args.config) if args.config else RunConfig()
    kw = {}
    if args.seed is not None:
        kw["sweep_seed"] = args.seed
    if args.frames is not None:
        kw["sweep_frames"] = args.frames
    if args.workers is not None:
        kw["sweep_workers"] = args.workers
    if args.bd is not None:
        kw["sweep_kinds"] = kinds_from_flag(args.bd)
    return cfg.replace(**kw) if kw else cfg


def _write(path, text):
    with open(path, "w") as fh:
        fh.write(text)


def _dispatch(args, cfg: RunConfig) -> int:
    if args.cmd == "sweep":
        sweep.run_sweep(cfg, args.out, resume=args.resume)
        print(f"wrote {len(cfg.sweep_points())} rows to {args.out}")
        return EXIT_OK
    if args.cmd == "point":
        rc = EXIT_OK
        rows = []
        d_led = cfg.sweep_fixed_d_led_bd_m if args.d_led is None else args.d_led
        d_rx = cfg.sweep_fixed_d_rx_bd_m if args.d_rx is None else args.d_rx
        p_tx = cfg.sweep_fixed_p_tx_dbm if args.p_tx is None else args.p_tx
        for kind in cfg.sweep_kinds:
            rec, res = sweep.run_point(cfg, kind, d_led, d_rx, p_tx)
            rc = rc if res is not None else EXIT_CHECK
            rows.append(rec.to_row())
        text = sweep.csv_text(rows)
        sys.stdout.write(text)
        if args.out:
            sweep.write_csv(args.out, rows)
        return rc
    if args.cmd == "theory":
        text = sweep.theory_text(cfg)
        if args.out:
            _write(args.out, text)
        sys.stdout.write(text)
        return EXIT_OK
    if args.cmd == "report":
        try:
            ok = sweep.report(args.csv, cfg)
        except ValueError as e:
            print(f"error: unreadable sweep file: {e}", file=sys.stderr)
            return EXIT_IO
        return EXIT_OK if ok else EXIT_CHECK
    if args.cmd == "selftest":
        from .selftest import run_selftest
        checks = run_selftest(cfg)
        for c in checks:
            print(c.line())
        return EXIT_OK if all(c.passed for c in checks) else EXIT_CHECK
    raise AssertionError(args.cmd)


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    try:
        cfg = make_config(args)
    except OSError as e:
        print(f"error: cannot read config: {e}", file=sys.stderr)
        return EXIT_IO
    except (KeyError, ValueError, TypeError) as e:
        print(f"error: bad config: {e}", file=sys.stderr)
        return EXIT_USAGE
    try:
        return _dispatch(args, cfg)
    except OSError as e:
        print(f"error: {e}", file=sys.stderr)
        return EXIT_IO


if __name__ == "__main__":
    sys.exit(main())
