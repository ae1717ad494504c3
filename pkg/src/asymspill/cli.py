"""Command-line entry point: ``asymspill {measures,spillover,fevd,sam,bootstrap}``.

Every subcommand accepts ``--config FILE`` with ``key=value`` lines (keys are
the long option names, dashes or underscores). A ``.meta.json`` sidecar
written by a previous run is also accepted as a config file. Command-line
flags override config values.
"""

from __future__ import annotations

import argparse
import datetime as dt
import json
import logging
import sys
from pathlib import Path

from asymspill import __version__
from asymspill.asymmetry import (
    FROM,
    TO,
    RollingSpec,
    rolling_spillovers,
    sam_directional,
    sam_total,
)
from asymspill.bootstrap import (
    SUBSAMPLE_RETURNS,
    SvParams,
    bootstrap_sam,
    test_symmetry,
)
from asymspill.errors import (
    AlignmentError,
    AsymSpillError,
    SingularFitError,
    ValidationError,
)
from asymspill.ingest import build_panel, load_calendar, load_ticks, write_panel_csv
from asymspill.io import fmt17, write_json, write_sidecar
from asymspill.realized import LOG_EPS, MeasureKind, read_measure_csv, realized_measures
from asymspill.spillover import SIGMA_CONVENTIONS, write_fevd_csv
from asymspill.var_engine import VarSpec

logger = logging.getLogger("asymspill")

SIGMA_NOTE = (
    "variance: column scaling 1/Sigma_jj (Pesaran-Shin generalized FEVD); "
    "std: 1/sqrt(Sigma_jj)"
)

_BOOL_FLAGS = {"no_intercept", "log_transform", "write_panel"}
_LIST_FLAGS = {"ticks"}


# -- configuration ---------------------------------------------------------

def read_config(path) -> dict:
    path = Path(path)
    if not path.exists():
        raise ValidationError(f"config file not found: {path}")
    text = path.read_text(encoding="utf-8")
    if path.name.endswith(".json"):
        payload = json.loads(text)
        params = payload.get("parameters", payload)
        return {k.replace("-", "_"): v for k, v in params.items() if k != "config"}
    out = {}
    for line_no, raw in enumerate(text.splitlines(), start=1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        if "=" not in line:
            raise ValidationError(f"{path}:{line_no}: expected key=value")
        key, value = (s.strip() for s in line.split("=", 1))
        out[key.replace("-", "_")] = value
    return out


def _coerce_config(cfg: dict, parser: argparse.ArgumentParser) -> dict:
    known = {a.dest: a for a in parser._actions}
    out = {}
    for key, value in cfg.items():
        if key not in known:
            raise ValidationError(f"unknown config key {key!r}")
        if key in _BOOL_FLAGS and isinstance(value, str):
            low = value.lower()
            if low not in ("1", "0", "true", "false", "yes", "no", "on", "off"):
                raise ValidationError(f"bad boolean for {key}: {value!r}")
            value = low in ("1", "true", "yes", "on")
        elif key in _LIST_FLAGS and isinstance(value, str):
            value = [v for v in value.replace(",", " ").split() if v]
        elif value is not None and not isinstance(value, (bool, list)):
            conv = known[key].type
            if conv is not None:
                try:
                    value = conv(value) if isinstance(value, str) else conv(str(value))
                except (TypeError, ValueError) as exc:
                    raise ValidationError(f"bad value for {key}: {value!r} ({exc})") from None
        out[key] = value
    return out


def _positive(text):
    v = int(text)
    if v < 1:
        raise argparse.ArgumentTypeError(f"must be a positive integer, got {text}")
    return v


def _common(p: argparse.ArgumentParser, outputs=True):
    p.add_argument("--config", help="key=value config file (or a .meta.json sidecar)")
    if outputs:
        p.add_argument("--out", default=".", help="output directory")
    p.add_argument("--jobs", type=int, default=1, help="parallel workers (-1: all cores)")
    p.add_argument("--log-level", default="WARNING")


def _var_args(p):
    p.add_argument("--lag-order", type=_positive, default=2)
    p.add_argument("--horizon", type=_positive, default=10)
    p.add_argument("--no-intercept", action="store_true", default=False)
    p.add_argument("--sigma-convention", choices=SIGMA_CONVENTIONS, default="variance")
    p.add_argument("--log-transform", action="store_true", default=False,
                   help=f"fit on log(x + {LOG_EPS:g})")


def _roll_args(p):
    p.add_argument("--window", type=_positive, default=200)
    p.add_argument("--step", type=_positive, default=1)


def _boot_args(p, days_default):
    p.add_argument("--replications", type=_positive, default=500)
    p.add_argument("--days", type=_positive, default=days_default)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--jump-intensity", type=float, default=0.0)
    p.add_argument("--jump-sd", type=float, default=0.01)
    p.add_argument("--subsample", choices=sorted(SUBSAMPLE_RETURNS), default="5min")
    p.add_argument("--steps-per-day", type=_positive, default=23_400)


def build_parser():
    """Return ``(parser, {command: subparser})``."""
    parser = argparse.ArgumentParser(prog="asymspill", description=__doc__.splitlines()[0])
    parser.add_argument("--version", action="version", version=__version__)
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("measures", help="tick files -> RV / RS- / RS+ CSVs")
    _common(p)
    p.add_argument("--ticks", nargs="+", help="tick files; asset id is the file stem "
                   "unless given as ID=PATH")
    p.add_argument("--calendar", help="calendar file")
    p.add_argument("--write-panel", action="store_true", default=False,
                   help="also write the aligned bar panel (panel.csv)")

    p = sub.add_parser("spillover", help="rolling spillover indices")
    _common(p)
    p.add_argument("--measures", help="measure CSV")
    _var_args(p)
    _roll_args(p)
    p.add_argument("--fevd-dir", help="dump every window's normalized FEVD here")

    p = sub.add_parser("fevd", help="normalized FEVD table of one window")
    _common(p)
    p.add_argument("--measures", help="measure CSV")
    _var_args(p)
    p.add_argument("--window", type=_positive, default=200)
    p.add_argument("--end-date", help="window end date (default: last date)")

    p = sub.add_parser("sam", help="SAM series with bootstrap confidence band")
    _common(p)
    p.add_argument("--rs-minus", help="negative semivariance CSV")
    p.add_argument("--rs-plus", help="positive semivariance CSV")
    _var_args(p)
    _roll_args(p)
    p.add_argument("--ci-summary", help="bootstrap_summary.json; otherwise the "
                   "bootstrap is run with the options below")
    _boot_args(p, days_default=200)

    p = sub.add_parser("bootstrap", help="SAM null distribution from the SV simulator")
    _common(p)
    _var_args(p)
    _boot_args(p, days_default=200)
    return parser, sub.choices


def parse_args(argv=None):
    parser, subs = build_parser()
    args = parser.parse_args(argv)
    if args.config:
        cfg = read_config(args.config)
        cfg.pop("command", None)
        sub = subs[args.command]
        sub.set_defaults(**_coerce_config(cfg, sub))
        args = parser.parse_args(argv)
    return args


# -- helpers ---------------------------------------------------------------

def _require_file(path, what):
    if not path:
        raise ValidationError(f"--{what} is required")
    if not Path(path).is_file():
        raise ValidationError(f"{what} file not found: {path}")
    return Path(path)


def _parameters(args) -> dict:
    skip = {"out", "fevd_dir", "jobs", "log_level", "config"}
    return {k: v for k, v in sorted(vars(args).items()) if k not in skip}


def _metadata(args, **extra) -> dict:
    meta = {
        "tool": "asymspill",
        "version": __version__,
        "command": args.command,
        "parameters": _parameters(args),
    }
    if hasattr(args, "sigma_convention"):
        meta["sigma_convention_note"] = SIGMA_NOTE
    meta.update(extra)
    return meta


def _var_spec(args) -> VarSpec:
    return VarSpec(args.lag_order, not args.no_intercept, args.horizon)


def _load_measures(path, kind, args):
    panel = read_measure_csv(path, kind)
    return panel.log_transformed() if args.log_transform else panel


def _outdir(args) -> Path:
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    return out


# -- commands --------------------------------------------------------------

def cmd_measures(args) -> int:
    if not args.ticks:
        raise ValidationError("--ticks is required")
    cal = load_calendar(_require_file(args.calendar, "calendar"))
    files = []
    for spec in args.ticks:
        asset, _, path = spec.partition("=") if "=" in spec else (None, "", spec)
        files.append(load_ticks(_require_file(path, "ticks"), asset or None))
    panel = build_panel(files, cal)
    out = _outdir(args)
    names = {MeasureKind.RV: "rv.csv", MeasureKind.RS_MINUS: "rs_minus.csv",
             MeasureKind.RS_PLUS: "rs_plus.csv"}
    for kind, mp in realized_measures(panel).items():
        path = out / names[kind]
        mp.write_csv(path)
        write_sidecar(path, _metadata(args, kind=kind.value, rows=mp.n_days,
                                      assets=mp.assets, dropped_days=panel.dropped))
    if args.write_panel:
        write_panel_csv(panel, out / "panel.csv")
        write_sidecar(out / "panel.csv", _metadata(args, rows=panel.n_days * len(panel.bar_times)))
    return 0


def cmd_spillover(args) -> int:
    panel = _load_measures(_require_file(args.measures, "measures"), MeasureKind.RV, args)
    spec, roll = _var_spec(args), RollingSpec(args.window, args.step)
    spec.check_window(roll.window_length, panel.n_assets)
    if panel.n_days < roll.window_length:
        raise ValidationError(
            f"panel has {panel.n_days} days, shorter than the {roll.window_length}-day window")
    series = rolling_spillovers(panel, spec, roll, args.sigma_convention, args.jobs,
                                keep_fevd=bool(args.fevd_dir))
    out = _outdir(args)
    series.write_csv(out / "spillover.csv")
    if args.fevd_dir:
        fdir = Path(args.fevd_dir)
        fdir.mkdir(parents=True, exist_ok=True)
        for d, fevd in zip(series.dates, series.fevd):
            if fevd is not None:
                write_fevd_csv(fevd, series.assets, fdir / f"fevd_{d.isoformat()}.csv")
    write_sidecar(out / "spillover.csv", _metadata(
        args, rows=len(series), windows_missing=int(series.missing.sum()),
        windows_unstable=int(series.unstable.sum()), diagnostics=series.diagnostics))
    return 0


def cmd_fevd(args) -> int:
    panel = _load_measures(_require_file(args.measures, "measures"), MeasureKind.RV, args)
    spec = _var_spec(args)
    end = panel.n_days - 1
    if args.end_date:
        try:
            end = panel.dates.index(dt.date.fromisoformat(args.end_date))
        except ValueError:
            raise ValidationError(f"end date {args.end_date} not in panel") from None
    start = end - args.window + 1
    if start < 0:
        raise ValidationError(f"not enough days before {panel.dates[end]} for a "
                              f"{args.window}-day window")
    sub = type(panel)(panel.kind, panel.dates[start:end + 1], panel.assets,
                      panel.values[start:end + 1])
    series = rolling_spillovers(sub, spec, RollingSpec(args.window), args.sigma_convention,
                                keep_fevd=True)
    if series.missing[0]:
        raise SingularFitError(series.diagnostics[0]["error"])
    out = _outdir(args)
    write_fevd_csv(series.fevd[0], panel.assets, out / "fevd.csv")
    write_sidecar(out / "fevd.csv", _metadata(
        args, window_start=panel.dates[start], window_end=panel.dates[end],
        total=series.total[0], spectral_radius=series.spectral_radius[0]))
    return 0


def _sv_params(args) -> SvParams:
    return SvParams(jump_intensity=args.jump_intensity, jump_sd=args.jump_sd,
                    steps_per_day=args.steps_per_day)


def _run_bootstrap(args):
    return bootstrap_sam(_sv_params(args), args.days, args.replications, args.seed,
                         _var_spec(args), args.subsample, args.sigma_convention, args.jobs,
                         LOG_EPS if args.log_transform else None)


def _bootstrap_summary(args, dist) -> dict:
    summary = dist.summary()
    summary["parameters"] = _parameters(args)
    summary["sv_params"] = {k: getattr(_sv_params(args), k)
                            for k in SvParams.__dataclass_fields__}
    summary["version"] = __version__
    summary["dropped_replications"] = dist.dropped
    return summary


def cmd_bootstrap(args) -> int:
    dist = _run_bootstrap(args)
    out = _outdir(args)
    ok = sorted(set(range(dist.replications)) - {d["replication"] for d in dist.dropped})
    with open(out / "bootstrap_distribution.csv", "w", newline="", encoding="utf-8") as fh:
        fh.write("replication,sam\n")
        for rep, value in zip(ok, dist.sam_values):
            fh.write(f"{rep},{fmt17(value)}\n")
    write_sidecar(out / "bootstrap_distribution.csv", _metadata(args, rows=len(ok)))
    write_json(out / "bootstrap_summary.json", _bootstrap_summary(args, dist))
    return 0


def cmd_sam(args) -> int:
    minus = _load_measures(_require_file(args.rs_minus, "rs-minus"), MeasureKind.RS_MINUS, args)
    plus = _load_measures(_require_file(args.rs_plus, "rs-plus"), MeasureKind.RS_PLUS, args)
    if plus.dates != minus.dates:
        bad = sorted({d.isoformat() for d in set(plus.dates) ^ set(minus.dates)})
        raise AlignmentError(f"RS- and RS+ panels have mismatching dates: {bad[:10]}")
    if plus.assets != minus.assets:
        raise AlignmentError(f"asset columns differ: {minus.assets} vs {plus.assets}")
    spec, roll = _var_spec(args), RollingSpec(args.window, args.step)
    spec.check_window(roll.window_length, plus.n_assets)
    if plus.n_days < roll.window_length:
        raise ValidationError(
            f"panel has {plus.n_days} days, shorter than the {roll.window_length}-day window")

    if args.ci_summary:
        summary = json.loads(_require_file(args.ci_summary, "ci-summary").read_text())
        ci = (float(summary["q2.5"]), float(summary["q97.5"]))
        ci_source = {"file": args.ci_summary, "replications": summary.get("replications")}
    else:
        dist = _run_bootstrap(args)
        ci = dist.ci
        ci_source = _bootstrap_summary(args, dist)
    if ci_source.get("replications") is not None and int(ci_source["replications"]) < 100:
        logger.warning("confidence band built from fewer than 100 replications")

    sp = rolling_spillovers(plus, spec, roll, args.sigma_convention, args.jobs)
    sm = rolling_spillovers(minus, spec, roll, args.sigma_convention, args.jobs)
    results = [sam_total(sp, sm)]
    for direction in (FROM, TO):
        for asset in plus.assets:
            results.append(sam_directional(sp, sm, asset, direction))

    out = _outdir(args)
    decisions = {}
    for s in results:
        s = s.with_ci(*ci)
        path = out / f"sam_{s.label}.csv"
        s.write_csv(path)
        d = test_symmetry(s, ci)
        decisions[s.label] = {k: d.count(k) for k in ("reject", "fail-to-reject", "missing")}
    meta = _metadata(args, ci_low=ci[0], ci_high=ci[1], ci_source=ci_source,
                     windows=len(sp), decisions=decisions,
                     ci_note="band from the bivariate total-SAM null, reused for "
                             "directional series")
    write_json(out / "sam_summary.json", meta)
    return 0


COMMANDS = {
    "measures": cmd_measures,
    "spillover": cmd_spillover,
    "fevd": cmd_fevd,
    "sam": cmd_sam,
    "bootstrap": cmd_bootstrap,
}


def main(argv=None) -> int:
    try:
        args = parse_args(argv)
    except AsymSpillError as exc:
        print(f"asymspill: error: {exc}", file=sys.stderr)
        return exc.exit_code
    logging.basicConfig(level=getattr(logging, str(args.log_level).upper(), logging.WARNING),
                        format="%(levelname)s %(name)s: %(message)s")
    try:
        return COMMANDS[args.command](args)
    except AsymSpillError as exc:
        print(f"asymspill: error: {exc}", file=sys.stderr)
        return exc.exit_code


if __name__ == "__main__":
    sys.exit(main())
