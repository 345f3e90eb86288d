"""Normalization, signal statistics and CSV signal files"""
import csv
from pathlib import Path
from typing import List, Tuple, Union

import numpy as np

from core.exceptions import DegenerateSignalError, ShapeError

FLOAT_FORMAT = "{:.17g}"


def zscore(seq) -> np.ndarray:
    """Zero mean, unit population standard deviation"""
    x = np.asarray(seq, dtype=np.float64)
    if x.ndim != 1:
        raise ShapeError(f"zscore expects a 1-D sequence, got shape {x.shape}")
    centered = x - x.mean()
    std = np.sqrt(np.mean(centered * centered))
    if not std > 0 or not np.isfinite(std):
        raise DegenerateSignalError("cannot z-score a constant sequence")
    return centered / std


def zscore_rows(signals) -> np.ndarray:
    return np.stack([zscore(row) for row in np.asarray(signals, dtype=np.float64)])


def lag_one_autocorrelation(seq) -> float:
    x = np.asarray(seq, dtype=np.float64)
    centered = x - x.mean()
    denom = float(np.dot(centered, centered))
    if denom == 0:
        raise DegenerateSignalError("autocorrelation of a constant sequence")
    return float(np.dot(centered[:-1], centered[1:]) / denom)


def write_signals(path: Union[str, Path], signals, prefix: str) -> str:
    """CSV with header t,<prefix>1,…; one row per time step, 17 significant digits"""
    data = np.atleast_2d(np.asarray(signals, dtype=np.float64))
    output_file = Path(path)
    output_file.parent.mkdir(parents=True, exist_ok=True)

    with open(output_file, 'w', newline='', encoding='utf-8') as f:
        writer = csv.writer(f, lineterminator='\n')
        writer.writerow(['t'] + [f"{prefix}{i + 1}" for i in range(data.shape[0])])
        for t in range(data.shape[1]):
            writer.writerow([t] + [FLOAT_FORMAT.format(v) for v in data[:, t]])

    return str(output_file)


def read_signals(path: Union[str, Path]) -> Tuple[np.ndarray, List[str]]:
    """Inverse of write_signals: (signals (k, T), column names without t)"""
    with open(path, 'r', newline='', encoding='utf-8') as f:
        rows = list(csv.reader(f))
    if not rows or rows[0][0] != 't':
        raise ShapeError(f"{path} is not a signal file (missing 't' column)")
    header = rows[0][1:]
    values = np.array([[float(v) for v in row[1:]] for row in rows[1:]], dtype=np.float64)
    return values.T.reshape(len(header), len(rows) - 1), header
