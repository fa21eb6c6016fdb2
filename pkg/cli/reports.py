"""
Report emission: the JSON report, one-row CSV reports and the comparison
table.

CSV cells use '.' as the decimal separator and 6 significant digits for
floats; absent statistics are empty cells.
"""

import csv
import json
from pathlib import Path
from typing import Any, Dict, Iterable, List, Optional, Sequence, Union

import numpy as np

from core.metrics import CSV_COLUMNS, MetricsReport

Row = Dict[str, Any]

# Columns averaged in a comparison summary row.
NUMERIC_COLUMNS = (
    "generated", "completed", "dropped", "throughput", "rt_mean", "rt_p50",
    "rt_p95", "rt_p99", "dt_mean", "dt_p95", "skew", "jain", "evictions",
)


def format_cell(value: Any) -> str:
    """Locale-independent CSV rendering of one value."""
    if value is None:
        return ""
    if isinstance(value, bool):
        return "true" if value else "false"
    if isinstance(value, float):
        return f"{value:.6g}"
    return str(value)


def write_report_json(report: MetricsReport, path: Union[str, Path]) -> None:
    with open(path, "w", encoding="utf-8", newline="\n") as f:
        json.dump(report.to_dict(), f, indent=4, allow_nan=False)
        f.write("\n")


def write_rows(rows: Iterable[Row], path: Union[str, Path]) -> None:
    """Write rows under the fixed CSV_COLUMNS header."""
    with open(path, "w", encoding="utf-8", newline="") as f:
        writer = csv.writer(f, lineterminator="\n")
        writer.writerow(CSV_COLUMNS)
        for row in rows:
            writer.writerow([format_cell(row.get(column)) for column in CSV_COLUMNS])


def write_report_csv(report: MetricsReport, path: Union[str, Path]) -> None:
    write_rows([report.csv_values()], path)


def _mean(values: Sequence[Optional[float]]) -> Optional[float]:
    present = [v for v in values if v is not None]
    if not present:
        return None
    return float(np.mean(present))


def summarize(groups: Sequence[Sequence[Row]]) -> List[Row]:
    """
    One mean row per group of runs, in group order.

    A policy listed twice gets two mean rows. Absent statistics are skipped;
    a column with no values stays absent.
    """
    summary = []
    for group in groups:
        if not group:
            continue
        mean_row: Row = {"run_id": "mean", "mode": group[0]["mode"], "policy": group[0]["policy"], "seed": None}
        for column in NUMERIC_COLUMNS:
            mean_row[column] = _mean([row[column] for row in group])
        summary.append(mean_row)
    return summary
