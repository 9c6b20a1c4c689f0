#!/usr/bin/env python3
"""
Run comparison for HybridCI
Tabulates test RMSE, parameter count and duration of runs made on the same
dataset, best first.
"""

import csv
import io
import logging
import math
import os
from dataclasses import dataclass
from typing import List, Sequence

from src.core.errors import ComparisonError
from src.core.records import RunRecord, atomic_write_text
from src.ui.display import display

logger = logging.getLogger(__name__)

COMPARISON_FILE = "comparison.csv"
COLUMNS = ("name", "task", "test_rmse", "parameter_count", "duration_seconds")


@dataclass(frozen=True)
class ComparisonRow:
    name: str
    task: str
    test_rmse: float
    parameter_count: int
    duration_seconds: float

    def as_row(self):
        return [getattr(self, column) for column in COLUMNS]


def _sort_key(item):
    index, row = item
    missing = row.test_rmse is None or not math.isfinite(row.test_rmse)
    return (missing, row.test_rmse if not missing else 0.0, index)


def comparison_rows(records: Sequence[RunRecord]) -> List[ComparisonRow]:
    """
    One row per record, sorted ascending by test RMSE (runs without one last).

    Raises:
        ComparisonError: With fewer than two records or mismatched dataset fingerprints
    """
    if len(records) < 2:
        raise ComparisonError(f"need at least two runs to compare, got {len(records)}")
    fingerprints = {record.dataset_fingerprint for record in records}
    if len(fingerprints) != 1:
        names = ", ".join(f"{r.name}={r.dataset_fingerprint or '?'}" for r in records)
        raise ComparisonError(f"runs were made on different datasets: {names}")
    rows = [ComparisonRow(r.name, r.task, r.test_rmse, r.parameter_count, r.duration_seconds) for r in records]
    return [row for _, row in sorted(enumerate(rows), key=_sort_key)]


def comparison_csv(rows: Sequence[ComparisonRow]):
    buffer = io.StringIO()
    writer = csv.writer(buffer, lineterminator="\n")
    writer.writerow(COLUMNS)
    for row in rows:
        writer.writerow([repr(v) if isinstance(v, float) else ("" if v is None else v) for v in row.as_row()])
    return buffer.getvalue()


def compare(run_dirs: Sequence[str], out_dir=None):
    """
    Load run records, write comparison.csv and print the aligned table.

    Args:
        run_dirs: Run directories (or run.json paths)
        out_dir: Where comparison.csv goes (None skips writing)

    Returns:
        tuple: (rows, text table)
    """
    records = [RunRecord.load(path) for path in run_dirs]
    rows = comparison_rows(records)
    table = display.show_table(COLUMNS, [row.as_row() for row in rows], title=f"Comparison of {len(rows)} runs")
    display.print_footer()
    if out_dir is not None:
        path = os.path.join(out_dir, COMPARISON_FILE)
        atomic_write_text(path, comparison_csv(rows))
        logger.info("Wrote %s", path)
    return rows, table
