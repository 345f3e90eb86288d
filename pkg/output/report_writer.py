"""Result tables: one column per model variant, one row per source plus Average"""
from decimal import ROUND_DOWN, Decimal
from pathlib import Path
from typing import Any, Dict, List, Optional, Sequence, Tuple, Union

import numpy as np

from core.exceptions import DomainError, ShapeError
from evaluation.metrics import EvalReport
from output.csv_exporter import CSVExporter
from output.json_exporter import JSONExporter

REPORT_FORMAT_VERSION = 1
DEFAULT_DECIMALS = 4


def format_value(value: float, decimals: Optional[int] = DEFAULT_DECIMALS) -> str:
    """
    Truncate to `decimals` places and strip trailing zeros (0.22727 -> 0.2272,
    0.5820 -> 0.582). decimals=None gives 17 significant digits.
    """
    if decimals is None:
        return f"{value:.17g}"
    # settle float noise such as 0.5819999999999999 before truncating
    settled = Decimal(repr(round(float(value), 12)))
    truncated = settled.quantize(Decimal(1).scaleb(-decimals), rounding=ROUND_DOWN)
    text = format(truncated.normalize(), 'f')
    return "0" if text in ("-0", "") else text


def report_table(reports: Sequence[EvalReport]) -> Tuple[List[str], List[List[Any]]]:
    """Header and rows (label first, then one value per report)"""
    if not reports:
        raise DomainError("no reports to tabulate")
    n = reports[0].n
    if any(r.n != n for r in reports):
        raise ShapeError(f"reports cover different source counts: {[r.n for r in reports]}")

    header = ['source'] + [r.display_name for r in reports]
    rows = [[f"Source {k + 1}"] + [r.per_source_rmse[k] for r in reports] for k in range(n)]
    rows.append(['Average'] + [float(np.mean(r.per_source_rmse)) for r in reports])
    return header, rows


def report_document(reports: Sequence[EvalReport]) -> Dict[str, Any]:
    header, _ = report_table(reports)
    return {
        'format_version': REPORT_FORMAT_VERSION,
        'columns': header,
        'reports': [r.to_dict() for r in reports],
    }


def write_report(reports: Sequence[EvalReport], path: Union[str, Path],
                 decimals: Optional[int] = DEFAULT_DECIMALS) -> Tuple[str, str]:
    """
    Write report.csv at `path` and its JSON twin next to it.

    CSV cells are truncated, Average included, so the CSV Average may differ from
    the mean of the truncated source cells by up to 10^-decimals. The JSON twin
    keeps full precision and its averages match the per-source values to 1e-12.
    """
    header, rows = report_table(reports)
    formatted = [[row[0]] + [format_value(v, decimals) for v in row[1:]] for row in rows]

    csv_path = CSVExporter().export_rows(header, formatted, path)
    json_path = JSONExporter().export(report_document(reports), Path(path).with_suffix('.json'))
    return csv_path, json_path


def read_report(path: Union[str, Path]) -> List[EvalReport]:
    """Reports from a JSON twin written by write_report"""
    document = JSONExporter().load(Path(path).with_suffix('.json'))
    return [EvalReport.from_dict(entry) for entry in document['reports']]
