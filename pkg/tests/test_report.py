import csv

import pytest

from quantlab.prevalence import PrevalenceVector, absolute_error, relative_absolute_error
from quantlab.report import (
    RESULT_COLUMNS,
    ResultRow,
    format_summary_text,
    read_rows_csv,
    summarize,
    ttest_matrices,
    write_all_reports,
    write_rows_csv,
)


def make_row(method="cc", learner="lr", loss="ae", dataset="d", prev=0.5,
             sample=0, rep=0, true_pos=0.5, est_pos=0.42):
    truth = PrevalenceVector.from_positive(true_pos)
    estimate = PrevalenceVector.from_positive(est_pos)
    return ResultRow(
        method=method,
        learner=learner,
        optimized_for=loss,
        dataset=dataset,
        grid_prevalence=prev,
        sample_id=sample,
        repetition_id=rep,
        true_prevalence=truth.pos,
        estimated_prevalence=estimate.pos,
        ae=absolute_error(truth, estimate),
        rae=relative_absolute_error(truth, estimate, 100),
    )


class TestRowsCsv:
    def test_roundtrip_full_precision(self, tmp_path):
        rows = [
            make_row(est_pos=0.123456789123456789),
            make_row(sample=1, est_pos=1.0 / 3.0),
        ]
        path = tmp_path / "rows.csv"
        write_rows_csv(rows, path)
        loaded = read_rows_csv(path)
        assert loaded == rows  # exact float round-trip through repr

    def test_column_order(self, tmp_path):
        path = tmp_path / "rows.csv"
        write_rows_csv([make_row()], path)
        with open(path, newline="") as handle:
            header = next(csv.reader(handle))
        assert tuple(header) == RESULT_COLUMNS
        assert header[0] == "method" and header[3] == "dataset"

    def test_unexpected_columns_rejected(self, tmp_path):
        path = tmp_path / "bad.csv"
        path.write_text("a,b\n1,2\n")
        with pytest.raises(ValueError, match="unexpected columns"):
            read_rows_csv(path)


class TestSummaries:
    def test_single_cell(self):
        summary = summarize([make_row(), make_row(sample=1, est_pos=0.6)])
        assert len(summary) == 1
        cell = summary[0]
        assert cell["n_rows"] == 2
        assert cell["mean_ae"] == pytest.approx((0.08 + 0.1) / 2, abs=1e-12)

    def test_repetitions_averaged_together(self):
        rows = [make_row(rep=0, est_pos=0.4), make_row(rep=1, est_pos=0.6)]
        summary = summarize(rows)
        assert summary[0]["n_repetitions"] == 2
        assert summary[0]["mean_ae"] == pytest.approx(0.1, abs=1e-12)

    def test_text_table_three_decimals(self):
        text = format_summary_text(summarize([make_row()]))
        assert "0.080" in text
        assert text.splitlines()[0].startswith("dataset")


class TestTtestMatrices:
    def test_loss_pair_verdicts(self):
        rows = []
        # loss "ae" consistently better than loss "accuracy" across 6 cells
        for dataset in ("d1", "d2", "d3"):
            for learner in ("lr", "mnb"):
                rows.append(make_row(dataset=dataset, learner=learner,
                                     loss="accuracy", est_pos=0.1))
                rows.append(make_row(dataset=dataset, learner=learner,
                                     loss="ae", est_pos=0.45))
        entries = ttest_matrices(rows)
        ae_entry = next(
            e for e in entries if e["metric"] == "ae"
            and {e["loss_x"], e["loss_y"]} == {"ae", "accuracy"}
        )
        assert ae_entry["n_pairs"] == 6
        # "ae" sorts before "accuracy"? No: "accuracy" < "ae" lexically, so
        # loss_x is "accuracy" (the worse one) and the symbol points the other way
        assert ae_entry["loss_x"] == "accuracy"
        assert ae_entry["symbol"] in ("≪", "<")

    def test_insufficient_pairs_skipped(self):
        rows = [make_row(loss="ae"), make_row(loss="f1")]
        assert ttest_matrices(rows) == []


class TestWriteAllReports:
    def test_files_rendered(self, tmp_path):
        rows = [
            make_row(dataset=d, learner=l, loss=s, sample=i, est_pos=0.3 + 0.01 * i)
            for d in ("d1", "d2")
            for l in ("lr", "mnb")
            for s in ("ae", "accuracy")
            for i in range(3)
        ]
        write_all_reports(rows, tmp_path)
        for name in ("raw.csv", "summary.csv", "summary.txt", "ttests.csv"):
            assert (tmp_path / name).exists(), name
        assert len(read_rows_csv(tmp_path / "raw.csv")) == len(rows)

    def test_empty_rows_rejected(self, tmp_path):
        with pytest.raises(ValueError, match="no result rows"):
            write_all_reports([], tmp_path)
