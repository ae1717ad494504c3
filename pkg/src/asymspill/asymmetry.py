"""Rolling-window spillovers and spillover asymmetry measures (SAM)."""

from __future__ import annotations

import logging
from dataclasses import dataclass, field

import numpy as np
from joblib import Parallel, delayed

from asymspill.errors import AlignmentError, NumericalError, ValidationError
from asymspill.io import fmt17
from asymspill.spillover import (
    SIGMA_VARIANCE,
    generalized_fevd,
    spillover_indices,
)
from asymspill.var_engine import VarSpec, fit_var, ma_coefficients

logger = logging.getLogger(__name__)

FROM = "FROM"
TO = "TO"
TOTAL = "TOTAL"

FLAG_OK = "ok"
FLAG_UNSTABLE = "unstable"
FLAG_MISSING = "missing"
FLAG_DEGENERATE = "degenerate"

SAM_BOUND = 200.0


@dataclass(frozen=True)
class RollingSpec:
    window_length: int = 200
    step: int = 1

    def __post_init__(self):
        if self.window_length < 1:
            raise ValidationError("window length must be positive")
        if self.step < 1:
            raise ValidationError("step must be >= 1")

    def n_windows(self, n_days: int) -> int:
        if n_days < self.window_length:
            return 0
        return (n_days - self.window_length) // self.step + 1


@dataclass
class SpilloverSeries:
    """Index family per window, indexed by window end date.

    Missing windows (singular fits) hold NaN.
    """

    dates: list
    assets: list
    total: np.ndarray
    from_others: np.ndarray
    to_others: np.ndarray
    net: np.ndarray
    pairwise: np.ndarray
    spectral_radius: np.ndarray
    missing: np.ndarray
    diagnostics: list = field(default_factory=list)
    fevd: list | None = None

    def __len__(self):
        return len(self.dates)

    @property
    def unstable(self) -> np.ndarray:
        return ~self.missing & (self.spectral_radius >= 1.0)

    def flags(self) -> list[str]:
        out = []
        for miss, unst in zip(self.missing, self.unstable):
            out.append(FLAG_MISSING if miss else FLAG_UNSTABLE if unst else FLAG_OK)
        return out

    def write_csv(self, path) -> None:
        cols = ["date", "total"]
        cols += [f"from_{a}" for a in self.assets]
        cols += [f"to_{a}" for a in self.assets]
        cols += [f"net_{a}" for a in self.assets]
        cols += ["spectral_radius", "flag"]
        flags = self.flags()
        with open(path, "w", newline="", encoding="utf-8") as fh:
            fh.write(",".join(cols) + "\n")
            for w, d in enumerate(self.dates):
                vals = [self.total[w], *self.from_others[w], *self.to_others[w], *self.net[w],
                        self.spectral_radius[w]]
                fh.write(_date_text(d) + "," + ",".join(fmt17(v) for v in vals)
                         + "," + flags[w] + "\n")


def _date_text(d) -> str:
    return d.isoformat() if hasattr(d, "isoformat") else str(d)


def _one_window(window, spec, start_label, sigma_convention):
    try:
        fit = fit_var(window, spec, window_start=start_label)
        psi = ma_coefficients(fit, spec.horizon)
        fevd = generalized_fevd(fit.sigma_eps, psi, spec.horizon, sigma_convention)
    except NumericalError as exc:
        return None, None, str(exc)
    return spillover_indices(fevd), (fevd, fit.spectral_radius), None


def _run_chunk(values, starts, length, spec, labels, sigma_convention):
    return [
        _one_window(values[s:s + length], spec, labels[s], sigma_convention)
        for s in starts
    ]


def rolling_spillovers(panel, spec: VarSpec = VarSpec(), roll: RollingSpec = RollingSpec(),
                       sigma_convention: str = SIGMA_VARIANCE, n_jobs: int = 1,
                       keep_fevd: bool = False) -> SpilloverSeries:
    """Fit one VAR per window and collect the spillover indices.

    Window ``w`` covers rows ``w*step .. w*step + window_length - 1`` and is
    labelled by its last date. A window whose fit is singular is emitted as
    missing and recorded in ``diagnostics``; the series continues.
    """
    values = np.asarray(panel.values, dtype=float)
    D, n = values.shape
    L = roll.window_length
    if D < L:
        raise ValidationError(f"panel has {D} days, shorter than the {L}-day window")
    spec.check_window(L, n)

    n_win = roll.n_windows(D)
    starts = [w * roll.step for w in range(n_win)]
    labels = [_date_text(d) for d in panel.dates]

    if n_jobs == 1 or n_win < 2:
        results = _run_chunk(values, starts, L, spec, labels, sigma_convention)
    else:
        n_chunks = min(n_win, 4 * (n_jobs if n_jobs > 0 else 8))
        chunks = [c.tolist() for c in np.array_split(starts, n_chunks)]
        parts = Parallel(n_jobs=n_jobs)(
            delayed(_run_chunk)(values, c, L, spec, labels, sigma_convention) for c in chunks
        )
        results = [r for part in parts for r in part]

    total = np.full(n_win, np.nan)
    frm = np.full((n_win, n), np.nan)
    to = np.full((n_win, n), np.nan)
    net = np.full((n_win, n), np.nan)
    pair = np.full((n_win, n, n), np.nan)
    rho = np.full(n_win, np.nan)
    missing = np.zeros(n_win, dtype=bool)
    diagnostics = []
    fevds = [] if keep_fevd else None
    for w, (sset, extra, err) in enumerate(results):
        if sset is None:
            missing[w] = True
            diagnostics.append({"window": w, "end_date": labels[starts[w] + L - 1],
                                "error": err})
            logger.warning("window ending %s skipped: %s", labels[starts[w] + L - 1], err)
            if keep_fevd:
                fevds.append(None)
            continue
        total[w] = sset.total
        frm[w], to[w], net[w], pair[w] = sset.from_others, sset.to_others, sset.net, sset.pairwise
        rho[w] = extra[1]
        if keep_fevd:
            fevds.append(extra[0])

    dates = [panel.dates[s + L - 1] for s in starts]
    return SpilloverSeries(dates, list(panel.assets), total, frm, to, net, pair, rho,
                           missing, diagnostics, fevds)


@dataclass
class SamSeries:
    dates: list
    sam: np.ndarray
    kind: str = TOTAL
    asset: str | None = None
    ci_low: float = np.nan
    ci_high: float = np.nan
    flags: list = field(default_factory=list)

    @property
    def label(self) -> str:
        if self.kind == TOTAL:
            return "total"
        return f"{self.kind.lower()}_{self.asset}"

    def with_ci(self, ci_low: float, ci_high: float) -> SamSeries:
        return SamSeries(list(self.dates), self.sam.copy(), self.kind, self.asset,
                         float(ci_low), float(ci_high), list(self.flags))

    def write_csv(self, path) -> None:
        with open(path, "w", newline="", encoding="utf-8") as fh:
            fh.write("date,sam,ci_low,ci_high,flag\n")
            for d, s, f in zip(self.dates, self.sam, self.flags):
                fh.write(f"{_date_text(d)},{fmt17(s)},{fmt17(self.ci_low)},"
                         f"{fmt17(self.ci_high)},{f}\n")


def sam_values(plus, minus):
    """Relative difference ``100 * (plus - minus) / ((plus + minus) / 2)``.

    Returns ``(sam, flags)``. A zero denominator yields 0 flagged
    ``degenerate``; NaN inputs propagate as NaN flagged ``missing``.
    """
    plus = np.atleast_1d(np.asarray(plus, dtype=float))
    minus = np.atleast_1d(np.asarray(minus, dtype=float))
    if plus.shape != minus.shape:
        raise AlignmentError("plus and minus series differ in length")
    half = 0.5 * (plus + minus)
    missing = np.isnan(plus) | np.isnan(minus)
    degenerate = ~missing & (half == 0.0)
    with np.errstate(divide="ignore", invalid="ignore"):
        sam = 100.0 * (plus - minus) / half
    sam[degenerate] = 0.0
    sam[missing] = np.nan
    ok = ~missing
    if np.any(np.abs(sam[ok]) > SAM_BOUND * (1 + 1e-12)):
        raise NumericalError("SAM outside [-200, 200]; spillover inputs must be non-negative")
    flags = [FLAG_MISSING if m else FLAG_DEGENERATE if g else FLAG_OK
             for m, g in zip(missing, degenerate)]
    return sam, flags


def _check_aligned(plus: SpilloverSeries, minus: SpilloverSeries):
    if list(plus.dates) != list(minus.dates):
        bad = [(_date_text(a), _date_text(b)) for a, b in zip(plus.dates, minus.dates) if a != b]
        if len(plus.dates) != len(minus.dates):
            raise AlignmentError(
                f"series lengths differ: {len(plus.dates)} vs {len(minus.dates)}")
        raise AlignmentError(f"window end dates differ: {bad[:5]}")
    if list(plus.assets) != list(minus.assets):
        raise AlignmentError(f"asset lists differ: {plus.assets} vs {minus.assets}")


def _merge_flags(base, plus, minus):
    out = []
    for f, up, um in zip(base, plus.unstable, minus.unstable):
        if f == FLAG_OK and (up or um):
            f = FLAG_UNSTABLE
        out.append(f)
    return out


def sam_total(plus: SpilloverSeries, minus: SpilloverSeries) -> SamSeries:
    """SAM of the total spillover index; positive means good volatility dominates."""
    _check_aligned(plus, minus)
    sam, flags = sam_values(plus.total, minus.total)
    return SamSeries(list(plus.dates), sam, TOTAL, None, flags=_merge_flags(flags, plus, minus))


def sam_directional(plus: SpilloverSeries, minus: SpilloverSeries, asset,
                    direction: str) -> SamSeries:
    """SAM of spillovers received by (``FROM``) or transmitted by (``TO``) one asset."""
    _check_aligned(plus, minus)
    i = asset if isinstance(asset, (int, np.integer)) else plus.assets.index(asset)
    direction = direction.upper()
    if direction == FROM:
        p, m = plus.from_others[:, i], minus.from_others[:, i]
    elif direction == TO:
        p, m = plus.to_others[:, i], minus.to_others[:, i]
    else:
        raise ValidationError(f"direction must be FROM or TO, got {direction!r}")
    sam, flags = sam_values(p, m)
    return SamSeries(list(plus.dates), sam, direction, plus.assets[i],
                     flags=_merge_flags(flags, plus, minus))
