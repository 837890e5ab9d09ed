"""CSV ingestion and emission.

Input files are comma-separated with one header row; every cell must be a
finite number.  Parse failures name the offending row and column.
"""

import csv
import math
from dataclasses import dataclass

import numpy as np

from .errors import ParseError


@dataclass(frozen=True)
class Dataset:
    X: np.ndarray
    y: np.ndarray | None
    feature_names: tuple[str, ...]
    target_name: str | None

    @property
    def n(self) -> int:
        return self.X.shape[0]

    @property
    def d(self) -> int:
        return self.X.shape[1]


def load_csv(path, target: str | None = None) -> Dataset:
    """Read a numeric CSV; non-target columns become features in header order.

    With ``target=None`` every column is a feature and ``y`` is None.
    """
    with open(path, newline="") as fh:
        reader = csv.reader(fh)
        try:
            header = next(reader)
        except StopIteration:
            raise ParseError(f"{path}: empty file (no header row)") from None
        header = [h.strip() for h in header]
        if target is not None and target not in header:
            raise ParseError(f"{path}: missing target column {target!r}")
        rows = []
        for lineno, row in enumerate(reader, start=2):
            if not row or (len(row) == 1 and row[0].strip() == ""):
                continue
            if len(row) != len(header):
                raise ParseError(
                    f"{path}: row {lineno} has {len(row)} cells, expected {len(header)}"
                )
            vals = []
            for name, cell in zip(header, row):
                try:
                    v = float(cell)
                except ValueError:
                    raise ParseError(
                        f"{path}: row {lineno}, column {name!r}: not numeric: {cell.strip()!r}"
                    ) from None
                if not math.isfinite(v):
                    raise ParseError(
                        f"{path}: row {lineno}, column {name!r}: non-finite value {cell.strip()!r}"
                    )
                vals.append(v)
            rows.append(vals)
    if not rows:
        raise ParseError(f"{path}: empty dataset (header only)")
    table = np.asarray(rows, dtype=float)
    if target is None:
        if table.shape[1] < 1:
            raise ParseError(f"{path}: no columns")
        return Dataset(X=table, y=None, feature_names=tuple(header), target_name=None)
    t_idx = header.index(target)
    feat_idx = [j for j in range(len(header)) if j != t_idx]
    if not feat_idx:
        raise ParseError(f"{path}: no feature columns besides the target")
    return Dataset(
        X=table[:, feat_idx],
        y=table[:, t_idx],
        feature_names=tuple(header[j] for j in feat_idx),
        target_name=target,
    )


def write_csv(path, header, rows) -> None:
    """Write rows of numbers (or strings) under a header; floats use repr
    so identical runs emit identical bytes."""
    with open(path, "w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(header)
        for row in rows:
            writer.writerow([repr(v) if isinstance(v, float) else v for v in row])


def select_features(data: Dataset, feature_names) -> np.ndarray:
    """Columns of ``data`` matching ``feature_names``, in that order."""
    missing = [f for f in feature_names if f not in data.feature_names]
    if missing:
        raise ParseError(f"data is missing feature columns {missing}")
    pos = {name: j for j, name in enumerate(data.feature_names)}
    return data.X[:, [pos[f] for f in feature_names]]
