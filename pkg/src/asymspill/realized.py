"""Realized variance and signed realized semivariances."""

from __future__ import annotations

import csv
import datetime as dt
from dataclasses import dataclass
from enum import Enum
from pathlib import Path

import numpy as np

from asymspill.errors import DataError, ParseError, ValidationError
from asymspill.io import fmt17

LOG_EPS = 1e-12


class MeasureKind(str, Enum):
    RV = "RV"
    RS_MINUS = "RS_MINUS"
    RS_PLUS = "RS_PLUS"


@dataclass
class MeasurePanel:
    """One daily realized measure, shape (D, N)."""

    kind: MeasureKind
    dates: list
    assets: list
    values: np.ndarray

    def __post_init__(self):
        self.values = np.asarray(self.values, dtype=float)
        if self.values.shape != (len(self.dates), len(self.assets)):
            raise ValidationError(
                f"values shape {self.values.shape} does not match "
                f"{len(self.dates)} dates x {len(self.assets)} assets"
            )
        if not np.all(np.isfinite(self.values)):
            raise DataError(f"{self.kind.value} panel has non-finite entries")

    @property
    def n_days(self) -> int:
        return len(self.dates)

    @property
    def n_assets(self) -> int:
        return len(self.assets)

    def log_transformed(self, eps: float = LOG_EPS) -> MeasurePanel:
        return MeasurePanel(self.kind, list(self.dates), list(self.assets),
                            np.log(self.values + eps))

    def reorder(self, assets) -> MeasurePanel:
        idx = [self.assets.index(a) for a in assets]
        return MeasurePanel(self.kind, list(self.dates), list(assets), self.values[:, idx])

    def write_csv(self, path) -> None:
        with open(path, "w", newline="", encoding="utf-8") as fh:
            fh.write(",".join(["date", *self.assets]) + "\n")
            for d, row in zip(self.dates, self.values):
                fh.write(_date_text(d) + "," + ",".join(fmt17(x) for x in row) + "\n")


def _date_text(d) -> str:
    return d.isoformat() if hasattr(d, "isoformat") else str(d)


def read_measure_csv(path, kind: MeasureKind = MeasureKind.RV) -> MeasurePanel:
    path = Path(path)
    dates, rows = [], []
    with open(path, newline="", encoding="utf-8") as fh:
        reader = csv.reader(fh)
        header = next(reader, None)
        if not header or header[0].strip() != "date" or len(header) < 2:
            raise ParseError(path, 1, "expected header 'date,<asset>,...'")
        assets = [h.strip() for h in header[1:]]
        for row in reader:
            if not row:
                continue
            if len(row) != len(header):
                raise ParseError(path, reader.line_num,
                                 f"expected {len(header)} fields, got {len(row)}")
            try:
                dates.append(dt.date.fromisoformat(row[0].strip()))
                rows.append([float(x) for x in row[1:]])
            except ValueError as exc:
                raise ParseError(path, reader.line_num, str(exc)) from None
    values = np.array(rows, dtype=float).reshape(len(dates), len(assets))
    return MeasurePanel(kind, dates, assets, values)


def semivariances(returns) -> tuple[float, float, float]:
    """Return ``(rv, rs_minus, rs_plus)`` for one vector of intraday returns.

    Zero returns enter neither semivariance.
    """
    r = np.asarray(returns, dtype=float)
    sq = r * r
    return float(sq.sum()), float(sq[r < 0].sum()), float(sq[r > 0].sum())


def daily_returns(panel, day: int, asset: int) -> np.ndarray:
    """Intraday log-returns of one asset on one day (length M, no overnight)."""
    return np.diff(panel.log_prices[day, asset])


def realized_measures(panel) -> dict[MeasureKind, MeasurePanel]:
    """RV, RS- and RS+ for every (day, asset) of an intraday panel."""
    if panel.n_days == 0:
        raise ValidationError("empty panel")
    r = np.diff(panel.log_prices, axis=2)
    rv, rs_minus, rs_plus = measures_from_returns(r)
    dates, assets = list(panel.days), list(panel.assets)
    return {
        MeasureKind.RV: MeasurePanel(MeasureKind.RV, dates, assets, rv),
        MeasureKind.RS_MINUS: MeasurePanel(MeasureKind.RS_MINUS, dates, assets, rs_minus),
        MeasureKind.RS_PLUS: MeasurePanel(MeasureKind.RS_PLUS, dates, assets, rs_plus),
    }


def measures_from_returns(r: np.ndarray):
    """Reduce the last axis of a return array to (RV, RS-, RS+)."""
    sq = r * r
    rv = sq.sum(axis=-1)
    rs_minus = np.where(r < 0, sq, 0.0).sum(axis=-1)
    rs_plus = np.where(r > 0, sq, 0.0).sum(axis=-1)
    return rv, rs_minus, rs_plus
