"""Command-line front end.

Subcommands: ``prepare`` (split + vectorize + cache), ``select`` (model
selection only), ``protocol`` (full run), ``ttest`` (compare two result
files), ``report`` (render tables from a raw result file).  The exit status
is 0 only when every requested combination succeeded.
"""

from __future__ import annotations

import argparse
import json
import os
import sys
from dataclasses import replace

from .experiment import (
    ExperimentConfig,
    enumerate_combos,
    prepare_dataset,
    run_combo,
    run_protocol,
)
from .report import read_rows_csv, write_all_reports, write_ttest_csv
from .stats import paired_ttest


def _add_common(parser: argparse.ArgumentParser) -> None:
    parser.add_argument("--config", required=True, help="JSON experiment config")
    parser.add_argument("--seed", type=int, default=None, help="override master seed")
    parser.add_argument("--out", default=None, help="override output directory")
    parser.add_argument("--jobs", type=int, default=None, help="parallel combinations")


def _load_config(args: argparse.Namespace) -> ExperimentConfig:
    config = ExperimentConfig.from_json_file(args.config)
    overrides = {}
    if args.seed is not None:
        overrides["master_seed"] = args.seed
    if args.out is not None:
        overrides["output_dir"] = args.out
    if getattr(args, "jobs", None) is not None:
        overrides["jobs"] = args.jobs
    return replace(config, **overrides) if overrides else config


def _cmd_prepare(args: argparse.Namespace) -> int:
    config = _load_config(args)
    for ds in config.datasets:
        prepared = prepare_dataset(config, ds)
        print(
            f"{ds.name}: train {prepared.y_train.size} / validation {prepared.y_val.size}"
            f" / test {prepared.y_test.size} docs, vocabulary {prepared.vocabulary_size}"
        )
    return 0


def _cmd_select(args: argparse.Namespace) -> int:
    config = _load_config(args)
    reports_dir = os.path.join(config.output_dir, "reports")
    os.makedirs(reports_dir, exist_ok=True)
    status = 0
    for combo in enumerate_combos(config):
        if combo.method == "mlpe":
            continue
        try:
            _, report_dict = run_combo(config, combo)
        except Exception as exc:  # noqa: BLE001 - keep going, report at the end
            print(f"{combo.key()}: FAILED ({exc})", file=sys.stderr)
            status = 1
            continue
        path = os.path.join(reports_dir, combo.key() + ".json")
        with open(path, "w", encoding="utf-8") as handle:
            json.dump(report_dict, handle, indent=2)
        print(f"{combo.key()}: winner {report_dict['winner_label']}")
    return status


def _cmd_protocol(args: argparse.Namespace) -> int:
    config = _load_config(args)
    rows, failures = run_protocol(config)
    print(f"wrote {len(rows)} result rows to {config.output_dir}")
    for key, _ in failures:
        print(f"FAILED: {key}", file=sys.stderr)
    return 1 if failures else 0


def _cmd_ttest(args: argparse.Namespace) -> int:
    rows_a = read_rows_csv(args.file_a)
    rows_b = read_rows_csv(args.file_b)

    def indexed(rows, path):
        index = {}
        for r in rows:
            key = (r.dataset, r.method, r.learner, r.grid_prevalence,
                   r.sample_id, r.repetition_id)
            if key in index:
                raise ValueError(
                    f"{path}: several rows share sample {key} (multiple "
                    "selection losses?); filter the file to one loss first"
                )
            index[key] = r
        return index

    index_a, index_b = indexed(rows_a, args.file_a), indexed(rows_b, args.file_b)
    shared = sorted(set(index_a) & set(index_b))
    if len(shared) < 2:
        print("fewer than 2 shared rows; nothing to compare", file=sys.stderr)
        return 1
    entries = []
    for metric in ("ae", "rae"):
        a = [getattr(index_a[k], metric) for k in shared]
        b = [getattr(index_b[k], metric) for k in shared]
        verdict = paired_ttest(a, b)
        entries.append(
            {
                "method": "(all)",
                "metric": metric,
                "loss_x": args.file_a,
                "loss_y": args.file_b,
                "n_pairs": len(shared),
                "t": verdict.t,
                "df": verdict.df,
                "p": verdict.p,
                "symbol": verdict.symbol,
                "direction": verdict.direction,
                "degenerate": verdict.degenerate,
            }
        )
        print(
            f"{metric}: A {verdict.symbol} B  (t={verdict.t:.4f}, df={verdict.df},"
            f" p={verdict.p:.6g}, n={len(shared)})"
        )
    if args.out:
        os.makedirs(args.out, exist_ok=True)
        write_ttest_csv(entries, os.path.join(args.out, "ttest.csv"))
    return 0


def _cmd_report(args: argparse.Namespace) -> int:
    rows = read_rows_csv(args.rows)
    out_dir = args.out or os.path.dirname(os.path.abspath(args.rows))
    write_all_reports(rows, out_dir)
    print(f"rendered {len(rows)} rows into {out_dir}")
    return 0


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="quantlab",
        description="Class-prevalence estimation experiments over a prevalence grid",
    )
    sub = parser.add_subparsers(dest="command", required=True)

    p_prepare = sub.add_parser("prepare", help="split, vectorize, and cache datasets")
    _add_common(p_prepare)
    p_prepare.set_defaults(func=_cmd_prepare)

    p_select = sub.add_parser("select", help="run model selection only")
    _add_common(p_select)
    p_select.set_defaults(func=_cmd_select)

    p_protocol = sub.add_parser("protocol", help="full selection + test evaluation run")
    _add_common(p_protocol)
    p_protocol.set_defaults(func=_cmd_protocol)

    p_ttest = sub.add_parser("ttest", help="paired t-test between two raw result files")
    p_ttest.add_argument("file_a")
    p_ttest.add_argument("file_b")
    p_ttest.add_argument("--out", default=None, help="directory for ttest.csv")
    p_ttest.set_defaults(func=_cmd_ttest)

    p_report = sub.add_parser("report", help="render summary/t-test tables from raw rows")
    p_report.add_argument("--rows", required=True, help="raw.csv produced by protocol")
    p_report.add_argument("--out", default=None, help="output directory")
    p_report.set_defaults(func=_cmd_report)

    return parser


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    return args.func(args)


if __name__ == "__main__":
    sys.exit(main())
