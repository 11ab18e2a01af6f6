"""Result rows and rendered output tables.

Raw rows go to CSV at full float precision (``repr`` round-trip); the summary
and t-test tables are derived views.  Text tables round to 3 decimals, their
CSV twins keep full precision.
"""

from __future__ import annotations

import csv
import os
from dataclasses import dataclass, fields
from itertools import combinations

import numpy as np

from .stats import paired_ttest

RESULT_COLUMNS = (
    "method",
    "learner",
    "optimized_for",
    "dataset",
    "grid_prevalence",
    "sample_id",
    "repetition_id",
    "true_prevalence",
    "estimated_prevalence",
    "ae",
    "rae",
)


@dataclass(frozen=True)
class ResultRow:
    """One quantification outcome: a (method, sample) cell of the raw table."""

    method: str
    learner: str
    optimized_for: str
    dataset: str
    grid_prevalence: float
    sample_id: int
    repetition_id: int
    true_prevalence: float
    estimated_prevalence: float
    ae: float
    rae: float

    def to_csv_values(self) -> list[str]:
        return [str(getattr(self, column)) for column in RESULT_COLUMNS]


assert tuple(f.name for f in fields(ResultRow)) == RESULT_COLUMNS


def sort_key(row: ResultRow) -> tuple:
    return (
        row.dataset,
        row.method,
        row.learner,
        row.optimized_for,
        row.repetition_id,
        row.grid_prevalence,
        row.sample_id,
    )


def write_rows_csv(rows: list[ResultRow], path: str | os.PathLike) -> None:
    with open(path, "w", encoding="utf-8", newline="") as handle:
        writer = csv.writer(handle)
        writer.writerow(RESULT_COLUMNS)
        for row in rows:
            writer.writerow(row.to_csv_values())


def read_rows_csv(path: str | os.PathLike) -> list[ResultRow]:
    rows: list[ResultRow] = []
    with open(path, encoding="utf-8", newline="") as handle:
        reader = csv.reader(handle)
        header = next(reader, None)
        if header is None:
            return rows
        if tuple(header) != RESULT_COLUMNS:
            raise ValueError(f"{path}: unexpected columns {header}")
        for record in reader:
            values = dict(zip(RESULT_COLUMNS, record))
            rows.append(
                ResultRow(
                    method=values["method"],
                    learner=values["learner"],
                    optimized_for=values["optimized_for"],
                    dataset=values["dataset"],
                    grid_prevalence=float(values["grid_prevalence"]),
                    sample_id=int(values["sample_id"]),
                    repetition_id=int(values["repetition_id"]),
                    true_prevalence=float(values["true_prevalence"]),
                    estimated_prevalence=float(values["estimated_prevalence"]),
                    ae=float(values["ae"]),
                    rae=float(values["rae"]),
                )
            )
    return rows


def summarize(rows: list[ResultRow]) -> list[dict]:
    """Mean ae/rae per (dataset, method, learner, optimized_for) cell."""
    groups: dict[tuple, list[ResultRow]] = {}
    for row in rows:
        groups.setdefault((row.dataset, row.method, row.learner, row.optimized_for), []).append(row)
    summary = []
    for key in sorted(groups):
        members = groups[key]
        dataset, method, learner, optimized_for = key
        summary.append(
            {
                "dataset": dataset,
                "method": method,
                "learner": learner,
                "optimized_for": optimized_for,
                "mean_ae": float(np.mean([r.ae for r in members])),
                "mean_rae": float(np.mean([r.rae for r in members])),
                "n_rows": len(members),
                "n_repetitions": len({r.repetition_id for r in members}),
            }
        )
    return summary


_SUMMARY_COLUMNS = (
    "dataset", "method", "learner", "optimized_for",
    "mean_ae", "mean_rae", "n_rows", "n_repetitions",
)


def write_summary_csv(summary: list[dict], path: str | os.PathLike) -> None:
    with open(path, "w", encoding="utf-8", newline="") as handle:
        writer = csv.writer(handle)
        writer.writerow(_SUMMARY_COLUMNS)
        for entry in summary:
            writer.writerow([str(entry[c]) for c in _SUMMARY_COLUMNS])


def format_summary_text(summary: list[dict]) -> str:
    headers = ("dataset", "method", "learner", "optimized-for", "AE", "RAE", "rows", "reps")
    table = [
        (
            e["dataset"], e["method"], e["learner"], e["optimized_for"],
            f"{e['mean_ae']:.3f}", f"{e['mean_rae']:.3f}",
            str(e["n_rows"]), str(e["n_repetitions"]),
        )
        for e in summary
    ]
    widths = [max(len(h), *(len(r[i]) for r in table)) if table else len(h)
              for i, h in enumerate(headers)]
    def line(cells):
        return "  ".join(c.ljust(w) for c, w in zip(cells, widths)).rstrip()
    out = [line(headers), line(tuple("-" * w for w in widths))]
    out.extend(line(r) for r in table)
    return "\n".join(out) + "\n"


def ttest_matrices(rows: list[ResultRow]) -> list[dict]:
    """Pairwise selection-loss comparisons per method and error metric.

    For each method and metric, the paired units are the (dataset, learner)
    repetition-averaged mean errors; each ordered loss pair gets a two-sided
    paired t-test and a verdict symbol (the ``≫``/``>`` symbols mean the first
    loss of the pair yields lower error).
    """
    cells: dict[tuple, list[float]] = {}
    for row in rows:
        for metric in ("ae", "rae"):
            key = (row.method, metric, row.optimized_for, row.dataset, row.learner)
            cells.setdefault(key, []).append(getattr(row, metric))
    means = {key: float(np.mean(values)) for key, values in cells.items()}

    by_method_metric: dict[tuple, dict[str, dict[tuple, float]]] = {}
    for (method, metric, loss, dataset, learner), value in means.items():
        by_method_metric.setdefault((method, metric), {}).setdefault(loss, {})[
            (dataset, learner)
        ] = value

    entries = []
    for (method, metric) in sorted(by_method_metric):
        per_loss = by_method_metric[(method, metric)]
        for loss_x, loss_y in combinations(sorted(per_loss), 2):
            shared = sorted(set(per_loss[loss_x]) & set(per_loss[loss_y]))
            if len(shared) < 2:
                continue
            a = [per_loss[loss_x][k] for k in shared]
            b = [per_loss[loss_y][k] for k in shared]
            verdict = paired_ttest(a, b)
            entries.append(
                {
                    "method": method,
                    "metric": metric,
                    "loss_x": loss_x,
                    "loss_y": loss_y,
                    "n_pairs": len(shared),
                    "t": verdict.t,
                    "df": verdict.df,
                    "p": verdict.p,
                    "symbol": verdict.symbol,
                    "direction": verdict.direction,
                    "degenerate": verdict.degenerate,
                }
            )
    return entries


_TTEST_COLUMNS = (
    "method", "metric", "loss_x", "loss_y", "n_pairs",
    "t", "df", "p", "symbol", "direction", "degenerate",
)


def write_ttest_csv(entries: list[dict], path: str | os.PathLike) -> None:
    with open(path, "w", encoding="utf-8", newline="") as handle:
        writer = csv.writer(handle)
        writer.writerow(_TTEST_COLUMNS)
        for entry in entries:
            writer.writerow([str(entry[c]) for c in _TTEST_COLUMNS])


def write_all_reports(rows: list[ResultRow], out_dir: str | os.PathLike) -> None:
    """Render raw rows, summary (CSV + text), and t-test matrices into a directory."""
    if not rows:
        raise ValueError("no result rows to report")
    os.makedirs(out_dir, exist_ok=True)
    ordered = sorted(rows, key=sort_key)
    write_rows_csv(ordered, os.path.join(out_dir, "raw.csv"))
    summary = summarize(ordered)
    write_summary_csv(summary, os.path.join(out_dir, "summary.csv"))
    with open(os.path.join(out_dir, "summary.txt"), "w", encoding="utf-8") as handle:
        handle.write(format_summary_text(summary))
    write_ttest_csv(ttest_matrices(ordered), os.path.join(out_dir, "ttests.csv"))
