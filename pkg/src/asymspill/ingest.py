"""Tick-file parsing, trading calendar and intraday panel alignment."""

from __future__ import annotations

import csv
import datetime as dt
import logging
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from asymspill.errors import AlignmentError, DataError, ParseError, ValidationError
from asymspill.io import fmt17

logger = logging.getLogger(__name__)

TIMESTAMP_FORMAT = "%Y-%m-%d %H:%M:%S"


@dataclass
class RawTickFile:
    """Price observations of one asset, sorted and de-duplicated."""

    asset_id: str
    timestamps: np.ndarray  # datetime64[s]
    prices: np.ndarray

    def __len__(self):
        return len(self.prices)


def load_ticks(path, asset_id: str | None = None) -> RawTickFile:
    """Read a ``timestamp,price`` CSV file.

    Rows are sorted by timestamp (stable), and when a timestamp repeats the
    row appearing last in the file wins.
    """
    path = Path(path)
    if asset_id is None:
        asset_id = path.stem
    stamps = []
    prices = []
    with open(path, newline="", encoding="utf-8") as fh:
        reader = csv.reader(fh)
        header = next(reader, None)
        if header is None or [h.strip() for h in header] != ["timestamp", "price"]:
            raise ParseError(path, 1, "expected header 'timestamp,price'")
        for row in reader:
            line_no = reader.line_num
            if not row or all(not c.strip() for c in row):
                continue
            if len(row) != 2:
                raise ParseError(path, line_no, f"expected 2 fields, got {len(row)}")
            try:
                ts = dt.datetime.strptime(row[0].strip(), TIMESTAMP_FORMAT)
            except ValueError:
                raise ParseError(path, line_no, f"bad timestamp {row[0]!r}") from None
            try:
                price = float(row[1])
            except ValueError:
                raise ParseError(path, line_no, f"bad price {row[1]!r}") from None
            if not np.isfinite(price) or price <= 0.0:
                raise DataError(f"{path}:{line_no}: non-positive price {row[1]!r}")
            stamps.append(ts)
            prices.append(price)

    ts = np.array(stamps, dtype="datetime64[s]")
    px = np.array(prices, dtype=float)
    order = np.argsort(ts, kind="stable")
    ts, px = ts[order], px[order]
    if len(ts):
        # last occurrence of each timestamp survives
        keep = np.ones(len(ts), dtype=bool)
        keep[:-1] = ts[1:] != ts[:-1]
        ts, px = ts[keep], px[keep]
    return RawTickFile(asset_id, ts, px)


def _parse_hhmm(text: str) -> dt.time:
    return dt.datetime.strptime(text.strip(), "%H:%M").time()


def _minutes(t: dt.time) -> int:
    return t.hour * 60 + t.minute


def year_end_excluded(d: dt.date) -> bool:
    """True for Dec 24-26 and Dec 31 - Jan 2."""
    if d.month == 12 and d.day in (24, 25, 26, 31):
        return True
    return d.month == 1 and d.day in (1, 2)


@dataclass(frozen=True)
class TradingCalendar:
    """Excluded dates plus the intraday session grid.

    Weekends are always excluded when ``exclude_weekends`` is set; the
    ``exclude_year_end`` rule drops Dec 24-26 and Dec 31 - Jan 2 regardless of
    the explicit date list.
    """

    excluded_dates: frozenset = frozenset()
    session_start: dt.time = dt.time(9, 30)
    session_end: dt.time = dt.time(16, 0)
    bar_minutes: int = 5
    exclude_weekends: bool = True
    exclude_year_end: bool = True

    def __post_init__(self):
        start, end = _minutes(self.session_start), _minutes(self.session_end)
        if start >= end:
            raise ValidationError("session_start must precede session_end")
        if self.bar_minutes <= 0 or (end - start) % self.bar_minutes:
            raise ValidationError(
                f"bar interval {self.bar_minutes} min does not divide the "
                f"{end - start} min session"
            )
        object.__setattr__(self, "excluded_dates", frozenset(self.excluded_dates))

    @property
    def bars_per_day(self) -> int:
        return (_minutes(self.session_end) - _minutes(self.session_start)) // self.bar_minutes

    def is_trading_day(self, d: dt.date) -> bool:
        if self.exclude_weekends and d.weekday() >= 5:
            return False
        if self.exclude_year_end and year_end_excluded(d):
            return False
        return d not in self.excluded_dates

    def bar_times(self) -> list[dt.time]:
        start = _minutes(self.session_start)
        return [
            dt.time(*divmod(start + k * self.bar_minutes, 60))
            for k in range(self.bars_per_day + 1)
        ]

    def boundaries(self, d: dt.date) -> np.ndarray:
        day = np.datetime64(d, "s")
        offs = [_minutes(t) * 60 for t in self.bar_times()]
        return day + np.array(offs, dtype="timedelta64[s]")


_BOOL_TRUE = {"1", "true", "yes", "on"}
_BOOL_FALSE = {"0", "false", "no", "off"}


def load_calendar(path) -> TradingCalendar:
    """Parse a calendar file: ``key=value`` header lines and one date per line."""
    path = Path(path)
    opts = {}
    dates = set()
    with open(path, encoding="utf-8") as fh:
        for line_no, raw in enumerate(fh, start=1):
            line = raw.split("#", 1)[0].strip()
            if not line:
                continue
            if "=" in line:
                key, value = (s.strip() for s in line.split("=", 1))
                opts[key] = value
                continue
            try:
                dates.add(dt.date.fromisoformat(line))
            except ValueError:
                raise ParseError(path, line_no, f"bad date {line!r}") from None

    kwargs = {"excluded_dates": frozenset(dates)}
    try:
        for key, value in opts.items():
            if key in ("session_start", "session_end"):
                kwargs[key] = _parse_hhmm(value)
            elif key == "bar_minutes":
                kwargs[key] = int(value)
            elif key in ("exclude_weekends", "exclude_year_end"):
                low = value.lower()
                if low not in _BOOL_TRUE | _BOOL_FALSE:
                    raise ValueError(value)
                kwargs[key] = low in _BOOL_TRUE
            else:
                raise ValidationError(f"{path}: unknown calendar key {key!r}")
    except ValueError as exc:
        raise ValidationError(f"{path}: bad value for calendar key: {exc}") from None
    return TradingCalendar(**kwargs)


@dataclass
class IntradayPanel:
    """Bar-boundary prices for N assets over D days.

    ``log_prices`` and ``prices`` have shape (D, N, M + 1).
    """

    assets: list
    days: list
    bar_times: list
    prices: np.ndarray
    log_prices: np.ndarray = None
    dropped: list = field(default_factory=list)

    def __post_init__(self):
        if self.log_prices is None:
            self.log_prices = np.log(self.prices)

    @property
    def n_assets(self) -> int:
        return len(self.assets)

    @property
    def n_days(self) -> int:
        return len(self.days)

    @property
    def bars_per_day(self) -> int:
        return len(self.bar_times) - 1

    def to_ticks(self) -> list[RawTickFile]:
        """One observation per bar boundary, one file per asset."""
        stamps = []
        for d in self.days:
            day = np.datetime64(d, "s")
            for t in self.bar_times:
                stamps.append(day + np.timedelta64(t.hour * 3600 + t.minute * 60, "s"))
        ts = np.array(stamps, dtype="datetime64[s]")
        out = []
        for a, asset in enumerate(self.assets):
            out.append(RawTickFile(asset, ts.copy(), self.prices[:, a, :].reshape(-1).copy()))
        return out


def _day_index(ts: np.ndarray) -> np.ndarray:
    return ts.astype("datetime64[D]")


def _bar_prices(ts, px, lo, hi, bounds):
    """Previous-tick prices at ``bounds`` from in-session observations ts[lo:hi]."""
    seg_ts, seg_px = ts[lo:hi], px[lo:hi]
    idx = np.searchsorted(seg_ts, bounds, side="right") - 1
    # boundaries before the first in-session trade take its price
    idx[idx < 0] = 0
    return seg_px[idx]


def build_panel(files, cal: TradingCalendar) -> IntradayPanel:
    """Align tick files on a common day and bar grid.

    Only dates observed for every asset and allowed by ``cal`` are kept. A
    date on which some asset has no in-session trade is dropped for all
    assets and recorded in ``panel.dropped``.
    """
    files = list(files)
    if len(files) < 2:
        raise ValidationError("at least two assets are required")
    ids = [f.asset_id for f in files]
    if len(set(ids)) != len(ids):
        raise ValidationError(f"duplicate asset ids: {ids}")

    day_sets = []
    for f in files:
        day_sets.append(set(_day_index(f.timestamps).tolist()))
    common = set.intersection(*day_sets)
    days = sorted(d for d in common if cal.is_trading_day(d))
    if not days:
        raise AlignmentError("no common trading dates across assets")

    offs_start = np.timedelta64(_minutes(cal.session_start) * 60, "s")
    offs_end = np.timedelta64(_minutes(cal.session_end) * 60, "s")
    m1 = cal.bars_per_day + 1

    rows = []
    kept = []
    dropped = []
    for d in days:
        day = np.datetime64(d, "s")
        start, end = day + offs_start, day + offs_end
        bounds = cal.boundaries(d)
        row = np.empty((len(files), m1))
        ok = True
        for a, f in enumerate(files):
            lo = np.searchsorted(f.timestamps, start, side="left")
            hi = np.searchsorted(f.timestamps, end, side="right")
            if hi <= lo:
                ok = False
                dropped.append({"date": d.isoformat(), "asset": f.asset_id,
                                "reason": "no in-session observations"})
                logger.warning("dropping %s: no in-session observations for %s", d, f.asset_id)
                break
            row[a] = _bar_prices(f.timestamps, f.prices, lo, hi, bounds)
        if ok:
            rows.append(row)
            kept.append(d)

    if not kept:
        raise AlignmentError("every common date was dropped for missing in-session data")
    prices = np.stack(rows)
    return IntradayPanel(ids, kept, cal.bar_times(), prices, dropped=dropped)


def write_panel_csv(panel: IntradayPanel, path) -> None:
    """Long format: one row per (date, bar boundary), log-prices per asset."""
    with open(path, "w", newline="", encoding="utf-8") as fh:
        fh.write(",".join(["date", "time", *panel.assets]) + "\n")
        for d_i, d in enumerate(panel.days):
            for b, t in enumerate(panel.bar_times):
                vals = ",".join(fmt17(x) for x in panel.log_prices[d_i, :, b])
                fh.write(f"{d.isoformat()},{t.strftime('%H:%M')},{vals}\n")
