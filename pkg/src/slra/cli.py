"""Command-line harness.

Subcommands:

* ``mse-vs-rank``: steady-state MSE sweep over the decomposition rank.
* ``ber-vs-symbols``: bit error rate against the received symbol index.
* ``selftest``: oracle-equivalence and invariant checks, nonzero exit on
  any failure.

Results are written as CSV; a matplotlib figure is rendered next to the
CSV unless ``--no-fig`` is given.
"""

from __future__ import annotations

import argparse
import dataclasses
import os
import sys

from .experiment import (
    ConfigError,
    ExperimentConfig,
    emit_csv,
    load_config,
    run_ber_vs_symbols,
    run_mse_vs_rank,
)

PAPER_SCALE_RUNS = 200


def _add_common(parser):
    parser.add_argument("--config", metavar="FILE",
                        help="key = value experiment configuration file")
    parser.add_argument("--seed", type=int, metavar="U64", help="master seed")
    parser.add_argument("--runs", type=int, metavar="N",
                        help="number of Monte-Carlo runs")
    parser.add_argument("--out", metavar="PATH", help="CSV output path")
    parser.add_argument("--algo", metavar="LIST",
                        help="comma-separated algorithms to run")
    parser.add_argument("--paper-scale", action="store_true",
                        help=f"average over {PAPER_SCALE_RUNS} runs")
    parser.add_argument("--fig", metavar="PATH",
                        help="figure output path (default: CSV path with .png)")
    parser.add_argument("--no-fig", action="store_true",
                        help="skip figure rendering")


def _build_parser():
    parser = argparse.ArgumentParser(
        prog="slra",
        description="Switched low-rank adaptive filtering testbench",
    )
    sub = parser.add_subparsers(dest="command", required=True)
    for name, text in (
        ("mse-vs-rank", "steady-state MSE against the decomposition rank"),
        ("ber-vs-symbols", "bit error rate against the received symbol index"),
    ):
        p = sub.add_parser(name, help=text)
        _add_common(p)
    p = sub.add_parser("selftest", help="run the built-in verification suite")
    p.add_argument("--out", metavar="PATH", help="write check results as CSV")
    return parser


def _resolve_config(args):
    if args.config is not None:
        if not os.path.exists(args.config):
            raise ConfigError(f"config file not found: {args.config}")
        config = load_config(args.config)
    else:
        config = ExperimentConfig()
    overrides = {}
    if args.seed is not None:
        overrides["seed"] = args.seed
    if args.runs is not None:
        overrides["runs"] = args.runs
    if args.paper_scale:
        overrides["runs"] = PAPER_SCALE_RUNS
    if args.algo:
        overrides["algos"] = tuple(s.strip() for s in args.algo.split(",") if s.strip())
    if overrides:
        config = dataclasses.replace(config, **overrides)
    return config.validate()


def _metadata(config, extra=None):
    meta = {
        "snr_db": config.snr_db,
        "jammer_offset_db": config.jammer_offset_db,
        "users": config.users,
        "ambient_dim": config.geometry().samples_per_symbol,
        "packet": config.packet,
        "training": config.training,
        "forgetting": config.forgetting,
        "branches": config.branches,
        "iterations": config.iterations,
    }
    meta.update(extra or {})
    return meta


def _write_outputs(points, config, args, title, extra_meta=None):
    if not args.out:
        print(f"computed {len(points)} curve points (no --out given)")
        return
    emit_csv(points, args.out, metadata=_metadata(config, extra_meta))
    print(f"wrote {len(points)} rows to {args.out}")
    if not args.no_fig:
        from .figures import render_curves

        fig_path = args.fig or os.path.splitext(args.out)[0] + ".png"
        render_curves(points, fig_path, title=title)
        print(f"rendered figure to {fig_path}")


def main(argv=None):
    parser = _build_parser()
    args = parser.parse_args(argv)
    try:
        if args.command == "selftest":
            from .selftest import run_selftest

            passed, results = run_selftest(out=print)
            if args.out:
                lines = ["check,status"]
                lines += [f"{name},{'pass' if ok else 'fail'}" for name, ok, _ in results]
                with open(args.out, "w", encoding="utf-8", newline="\n") as fh:
                    fh.write("\n".join(lines) + "\n")
                print(f"wrote {len(results)} check results to {args.out}")
            print("selftest:", "PASS" if passed else "FAIL")
            return 0 if passed else 1

        config = _resolve_config(args)
        if args.command == "mse-vs-rank":
            points = run_mse_vs_rank(config)
            _write_outputs(points, config, args, "steady-state MSE vs rank",
                           {"ranks": ",".join(str(d) for d in config.ranks)})
        else:
            points = run_ber_vs_symbols(config)
            if "mmse_oracle" in config.algos:
                print("note: mmse_oracle has no decision path; skipped for BER",
                      file=sys.stderr)
            _write_outputs(points, config, args, "BER vs received symbols",
                           {"rank": config.rank})
        return 0
    except ConfigError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    raise SystemExit(main())
