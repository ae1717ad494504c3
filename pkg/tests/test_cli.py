import datetime as dt
import json

import numpy as np
import pytest

from asymspill.cli import main

FAST_BOOT = ["--steps-per-day", "2340", "--days", "60", "--window", "60"]


def write_measures(path, values, assets=None, start=dt.date(2010, 1, 1)):
    values = np.asarray(values, dtype=float)
    assets = assets or [f"a{i}" for i in range(values.shape[1])]
    lines = ["date," + ",".join(assets)]
    for i, row in enumerate(values):
        d = start + dt.timedelta(days=i)
        lines.append(d.isoformat() + "," + ",".join(repr(float(x)) for x in row))
    path.write_text("\n".join(lines) + "\n")
    return path


@pytest.fixture
def tick_dir(tmp_path):
    rng = np.random.default_rng(0)
    # Thu, Fri, Sat, Mon
    days = ["2012-03-01", "2012-03-02", "2012-03-03", "2012-03-05"]
    for asset in ("AAA", "BBB"):
        rows = ["timestamp,price"]
        price = 50.0
        for d in days:
            for minute in range(0, 391, 3):
                h, m = divmod(9 * 60 + 30 + minute, 60)
                price *= float(np.exp(rng.normal(scale=1e-3)))
                rows.append(f"{d} {h:02d}:{m:02d}:00,{price:.6f}")
        (tmp_path / f"{asset}.csv").write_text("\n".join(rows) + "\n")
    (tmp_path / "cal.txt").write_text("session_start=09:30\nsession_end=16:00\nbar_minutes=5\n")
    return tmp_path


def run_measures(tick_dir, out):
    return main(["measures", "--ticks", str(tick_dir / "AAA.csv"), str(tick_dir / "BBB.csv"),
                 "--calendar", str(tick_dir / "cal.txt"), "--out", str(out)])


def test_measures_shape_and_calendar(tick_dir, tmp_path):
    out = tmp_path / "m"
    assert run_measures(tick_dir, out) == 0
    for name in ("rv.csv", "rs_minus.csv", "rs_plus.csv"):
        lines = (out / name).read_text().splitlines()
        assert lines[0] == "date,AAA,BBB"
        assert [ln.split(",")[0] for ln in lines[1:]] == ["2012-03-01", "2012-03-02",
                                                          "2012-03-05"]
        meta = json.loads((out / (name + ".meta.json")).read_text())
        assert meta["rows"] == 3
        assert meta["version"]


def test_measures_rerun_is_byte_identical(tick_dir, tmp_path):
    run_measures(tick_dir, tmp_path / "a")
    run_measures(tick_dir, tmp_path / "b")
    for name in ("rv.csv", "rs_minus.csv", "rs_plus.csv"):
        assert (tmp_path / "a" / name).read_bytes() == (tmp_path / "b" / name).read_bytes()


def test_measures_exit_codes(tick_dir, tmp_path):
    assert main(["measures", "--ticks", str(tick_dir / "AAA.csv"), str(tick_dir / "BBB.csv"),
                 "--calendar", str(tmp_path / "missing.txt"), "--out", str(tmp_path)]) == 2
    bad = tmp_path / "BAD.csv"
    bad.write_text("timestamp,price\n2012-03-01 10:00:00,-1\n")
    assert main(["measures", "--ticks", str(tick_dir / "AAA.csv"), str(bad),
                 "--calendar", str(tick_dir / "cal.txt"), "--out", str(tmp_path)]) == 3


def test_measures_named_assets_and_panel(tick_dir, tmp_path):
    out = tmp_path / "m"
    assert main(["measures", "--ticks", f"X={tick_dir / 'AAA.csv'}", f"Y={tick_dir / 'BBB.csv'}",
                 "--calendar", str(tick_dir / "cal.txt"), "--out", str(out),
                 "--write-panel"]) == 0
    assert (out / "rv.csv").read_text().startswith("date,X,Y\n")
    assert len((out / "panel.csv").read_text().splitlines()) == 1 + 3 * 79


def test_spillover_single_window(tmp_path):
    rng = np.random.default_rng(1)
    f = write_measures(tmp_path / "rv.csv", rng.gamma(2.0, size=(200, 3)))
    assert main(["spillover", "--measures", str(f), "--out", str(tmp_path)]) == 0
    lines = (tmp_path / "spillover.csv").read_text().splitlines()
    assert len(lines) == 2
    assert lines[1].endswith(",ok")
    meta = json.loads((tmp_path / "spillover.csv.meta.json").read_text())
    assert meta["parameters"]["lag_order"] == 2 and meta["parameters"]["horizon"] == 10
    assert meta["parameters"]["sigma_convention"] == "variance"


def read_total(path):
    lines = path.read_text().splitlines()[1:]
    return np.array([float(ln.split(",")[1]) for ln in lines])


def test_spillover_noise_panel_near_zero(tmp_path):
    rng = np.random.default_rng(2)
    f = write_measures(tmp_path / "rv.csv", 5.0 + rng.normal(size=(260, 3)))
    assert main(["spillover", "--measures", str(f), "--out", str(tmp_path)]) == 0
    assert np.mean(read_total(tmp_path / "spillover.csv")) < 5.0


def test_spillover_asset_order(tmp_path):
    rng = np.random.default_rng(3)
    vals = rng.gamma(2.0, size=(230, 3))
    a = write_measures(tmp_path / "a.csv", vals, ["x", "y", "z"])
    b = write_measures(tmp_path / "b.csv", vals[:, [2, 0, 1]], ["z", "x", "y"])
    main(["spillover", "--measures", str(a), "--out", str(tmp_path / "oa")])
    main(["spillover", "--measures", str(b), "--out", str(tmp_path / "ob")])
    np.testing.assert_allclose(read_total(tmp_path / "oa" / "spillover.csv"),
                               read_total(tmp_path / "ob" / "spillover.csv"), atol=1e-10)


def test_spillover_too_short(tmp_path):
    f = write_measures(tmp_path / "rv.csv", np.ones((50, 2)))
    assert main(["spillover", "--measures", str(f), "--out", str(tmp_path)]) == 2
    assert not (tmp_path / "spillover.csv").exists()


def test_spillover_fevd_dump(tmp_path):
    rng = np.random.default_rng(4)
    f = write_measures(tmp_path / "rv.csv", rng.gamma(2.0, size=(42, 2)))
    assert main(["spillover", "--measures", str(f), "--window", "40", "--out", str(tmp_path),
                 "--fevd-dir", str(tmp_path / "fevd")]) == 0
    assert len(list((tmp_path / "fevd").glob("fevd_*.csv"))) == 3


def test_fevd_table(tmp_path):
    rng = np.random.default_rng(5)
    f = write_measures(tmp_path / "rv.csv", rng.gamma(2.0, size=(120, 3)))
    assert main(["fevd", "--measures", str(f), "--window", "100", "--out", str(tmp_path),
                 "--end-date", "2010-04-20"]) == 0
    lines = (tmp_path / "fevd.csv").read_text().splitlines()
    assert lines[0] == "asset,a0,a1,a2"
    rows = np.array([[float(x) for x in ln.split(",")[1:]] for ln in lines[1:]])
    np.testing.assert_allclose(rows.sum(axis=1), 1.0, atol=1e-9)
    meta = json.loads((tmp_path / "fevd.csv.meta.json").read_text())
    assert meta["window_end"] == "2010-04-20"


def test_fevd_singular_exit_code(tmp_path):
    rng = np.random.default_rng(6)
    vals = rng.gamma(2.0, size=(100, 2))
    vals[:, 1] = 1.0
    f = write_measures(tmp_path / "rv.csv", vals)
    assert main(["fevd", "--measures", str(f), "--window", "100", "--out", str(tmp_path)]) == 4


def write_summary(path, low=-6.7, high=6.8):
    path.write_text(json.dumps({"q2.5": low, "q50": 0.0, "q97.5": high, "replications": 500}))
    return path


def test_sam_identical_panels(tmp_path):
    rng = np.random.default_rng(7)
    vals = rng.gamma(2.0, size=(210, 2))
    plus = write_measures(tmp_path / "plus.csv", vals)
    minus = write_measures(tmp_path / "minus.csv", vals)
    ci = write_summary(tmp_path / "summary.json")
    assert main(["sam", "--rs-plus", str(plus), "--rs-minus", str(minus),
                 "--ci-summary", str(ci), "--out", str(tmp_path / "o")]) == 0
    out = tmp_path / "o"
    names = sorted(p.name for p in out.glob("sam_*.csv"))
    assert names == ["sam_from_a0.csv", "sam_from_a1.csv", "sam_to_a0.csv", "sam_to_a1.csv",
                     "sam_total.csv"]
    lines = (out / "sam_total.csv").read_text().splitlines()
    assert lines[0] == "date,sam,ci_low,ci_high,flag"
    assert len(lines) == 12
    for ln in lines[1:]:
        d, sam, lo, hi, flag = ln.split(",")
        assert float(sam) == 0.0
        assert (float(lo), float(hi)) == (-6.7, 6.8)
    summary = json.loads((out / "sam_summary.json").read_text())
    assert summary["decisions"]["total"]["fail-to-reject"] == 11


def test_sam_negative_factor(tmp_path):
    from tests.test_asymmetry import driven_panel
    rng = np.random.default_rng(8)
    minus = write_measures(tmp_path / "minus.csv", driven_panel(rng, 400, 3, 0, 0.8))
    plus = write_measures(tmp_path / "plus.csv", 10.0 + rng.normal(size=(400, 3)))
    ci = write_summary(tmp_path / "summary.json")
    assert main(["sam", "--rs-plus", str(plus), "--rs-minus", str(minus), "--step", "20",
                 "--ci-summary", str(ci), "--out", str(tmp_path)]) == 0
    sam = read_total(tmp_path / "sam_to_a0.csv")
    assert np.mean(sam < 0) > 0.5


def test_sam_misaligned(tmp_path, capsys):
    rng = np.random.default_rng(9)
    plus = write_measures(tmp_path / "plus.csv", rng.gamma(2.0, size=(210, 2)))
    minus = write_measures(tmp_path / "minus.csv", rng.gamma(2.0, size=(210, 2)),
                           start=dt.date(2010, 1, 2))
    ci = write_summary(tmp_path / "summary.json")
    code = main(["sam", "--rs-plus", str(plus), "--rs-minus", str(minus),
                 "--ci-summary", str(ci), "--out", str(tmp_path)])
    assert code == 3
    assert "2010-01-01" in capsys.readouterr().err


def test_sam_with_inline_bootstrap(tmp_path):
    rng = np.random.default_rng(10)
    plus = write_measures(tmp_path / "plus.csv", rng.gamma(2.0, size=(65, 2)))
    minus = write_measures(tmp_path / "minus.csv", rng.gamma(2.0, size=(65, 2)))
    assert main(["sam", "--rs-plus", str(plus), "--rs-minus", str(minus),
                 "--replications", "100", "--seed", "3", *FAST_BOOT,
                 "--out", str(tmp_path / "o")]) == 0
    summary = json.loads((tmp_path / "o" / "sam_summary.json").read_text())
    lines = (tmp_path / "o" / "sam_total.csv").read_text().splitlines()[1:]
    lo, hi = (float(x) for x in lines[0].split(",")[2:4])
    assert (lo, hi) == (summary["ci_low"], summary["ci_high"])
    assert summary["ci_source"]["q2.5"] == lo


def boot_args(out, *extra):
    return ["bootstrap", "--replications", "4", "--seed", "11", "--steps-per-day", "2340",
            "--days", "60", "--out", str(out), *extra]


def test_bootstrap_outputs_and_determinism(tmp_path):
    assert main(boot_args(tmp_path / "a")) == 0
    assert main(boot_args(tmp_path / "b", "--jobs", "2")) == 0
    for name in ("bootstrap_distribution.csv", "bootstrap_summary.json"):
        assert (tmp_path / "a" / name).read_bytes() == (tmp_path / "b" / name).read_bytes()
    lines = (tmp_path / "a" / "bootstrap_distribution.csv").read_text().splitlines()
    assert lines[0] == "replication,sam" and len(lines) == 5
    summary = json.loads((tmp_path / "a" / "bootstrap_summary.json").read_text())
    assert summary["sv_params"]["gamma1"] == -0.3
    assert summary["parameters"]["seed"] == 11


def test_rerun_from_metadata(tmp_path):
    assert main(boot_args(tmp_path / "a")) == 0
    meta = tmp_path / "a" / "bootstrap_distribution.csv.meta.json"
    assert main(["bootstrap", "--config", str(meta), "--out", str(tmp_path / "b")]) == 0
    assert ((tmp_path / "a" / "bootstrap_distribution.csv").read_bytes()
            == (tmp_path / "b" / "bootstrap_distribution.csv").read_bytes())


def test_config_file_and_override(tmp_path):
    rng = np.random.default_rng(12)
    f = write_measures(tmp_path / "rv.csv", rng.gamma(2.0, size=(60, 2)))
    cfg = tmp_path / "run.cfg"
    cfg.write_text(f"measures={f}\nwindow=50\nlag-order=1\nno_intercept=true\n")
    assert main(["spillover", "--config", str(cfg), "--out", str(tmp_path / "a")]) == 0
    meta = json.loads((tmp_path / "a" / "spillover.csv.meta.json").read_text())
    assert meta["parameters"]["window"] == 50
    assert meta["parameters"]["no_intercept"] is True
    assert main(["spillover", "--config", str(cfg), "--window", "55",
                 "--out", str(tmp_path / "b")]) == 0
    meta = json.loads((tmp_path / "b" / "spillover.csv.meta.json").read_text())
    assert meta["parameters"]["window"] == 55
    assert len((tmp_path / "b" / "spillover.csv").read_text().splitlines()) == 7


def test_bad_config_key(tmp_path):
    cfg = tmp_path / "run.cfg"
    cfg.write_text("colour=blue\n")
    assert main(["spillover", "--config", str(cfg)]) == 2
