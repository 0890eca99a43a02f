import csv
import json

import pytest

from cylbuckle import io as vio
from cylbuckle.cli import main
from cylbuckle.grid import DomainSpec, ScalarField

SMALL = ["--domain", "25x25", "--nx", "64", "--ny", "64", "--lambda", "1.5"]


def test_energy_zero_field(tmp_path, capsys):
    p = tmp_path / "z.fld"
    vio.write_snapshot(p, ScalarField.zeros(DomainSpec(10, 10, 16, 16)), 1.0)
    assert main(["energy", "--in", str(p)]) == 0
    vals = capsys.readouterr().out.strip().split(",")
    assert len(vals) == 7 and all(float(v) == 0.0 for v in vals)


def test_usage_errors(tmp_path, capsys):
    assert main([]) == 2
    assert main(["energy"]) == 2
    p = tmp_path / "z.fld"
    vio.write_snapshot(p, ScalarField.zeros(DomainSpec(10, 10, 16, 16)))
    assert main(["energy", "--in", str(p)]) == 2  # no lambda anywhere
    cfg = tmp_path / "c.cfg"
    cfg.write_text("bogus = 1\n")
    assert main(["find-w2", "--config", str(cfg)]) == 2
    assert main(["yoshimura"]) == 2
    assert main(["find-w2", "--domain", "10"]) == 2


def test_io_errors(tmp_path):
    assert main(["energy", "--in", str(tmp_path / "missing.fld"), "--lambda", "1"]) == 4
    bad = tmp_path / "bad.fld"
    bad.write_bytes(b"nope")
    assert main(["airy", "--in", str(bad)]) == 4


def test_numeric_failure(tmp_path):
    assert main(["yoshimura", "--q-eps", "1e-6", "--out", str(tmp_path / "q.csv")]) == 3
    # a tiny domain cannot carry negative-energy states
    assert main(["find-w2", "--domain", "2x2", "--nx", "16", "--ny", "16", "--lambda", "1.0",
                 "--max-iters", "200", "--out", str(tmp_path / "w2.fld")]) == 3


def test_pipeline(tmp_path, capsys):
    w2 = tmp_path / "w2.fld"
    wmp = tmp_path / "wmp.fld"
    assert main(["find-w2", *SMALL, "--out", str(w2)]) == 0
    assert main(["mp", *SMALL, "--w2", str(w2), "--out", str(wmp), "--log", str(tmp_path / "mp.csv")]) == 0
    meta = json.loads((tmp_path / "wmp.fld.meta.json").read_text())
    assert meta["metric"] == "x_preconditioned" and meta["level"] > 0
    assert (tmp_path / "mp.csv").read_text().startswith("iteration,index,f_max,grad_norm,step")
    assert main(["refine", "--in", str(wmp), "--out", str(tmp_path / "r.fld")]) == 0
    assert main(["airy", "--in", str(wmp), "--out", str(tmp_path / "phi.fld")]) == 0
    capsys.readouterr()
    assert main(["energy", "--in", str(wmp), "--header"]) == 0
    head, vals = capsys.readouterr().out.strip().splitlines()
    row = dict(zip(head.split(","), map(float, vals.split(","))))
    assert row["f_lambda"] == pytest.approx(meta["level"], rel=1e-9)
    assert main(["verify-mp", "--in", str(wmp)]) == 0
    branch = tmp_path / "branch.csv"
    assert main(["continue", "--seed", str(wmp), "--lambda-from", "1.45", "--lambda-to", "1.55",
                 "--ds", "0.3", "--out", str(branch), "--snapshots", str(tmp_path / "snaps")]) == 0
    rows = vio.read_branch_csv(branch)
    assert rows[0]["lambda"] == pytest.approx(1.45) and rows[-1]["lambda"] == pytest.approx(1.55)
    assert all(vio.read_snapshot(r["snapshot_path"])[1] == r["lambda"] for r in rows)
    curve = tmp_path / "curve.csv"
    data = tmp_path / "data.csv"
    data.write_text("geom_ratio,load_ratio,label\n1e9,0.99,x\n")
    assert main(["calibrate", "--vcurve", str(branch), "--nu", "0.3", "--target", "alpha", "--value", "1",
                 "--plane", "Lt", "--experiments", str(data), "--out", str(curve),
                 "--svg", str(tmp_path / "p.svg"), "--lambda-grid", "1.45:1.9:10"]) == 0
    with open(curve) as fh:
        out = list(csv.DictReader(fh))
    assert list(out[0]) == list(vio.CURVE_COLUMNS) and len(out) == 10
    assert (tmp_path / "curve_overlay.csv").exists() and (tmp_path / "p.svg").exists()
    assert main(["calibrate", "--vcurve", str(branch), "--nu", "0.3", "--target", "alpha", "--value", "1",
                 "--plane", "Rt"]) == 2


def test_yoshimura_tables(tmp_path):
    out = tmp_path / "y.csv"
    assert main(["yoshimura", "--deltas", "0.125,0.0625", "--q-eps", "1e-2", "--out", str(out)]) == 0
    assert out.read_text().splitlines()[0] == "delta,int_wx2,int_dw2,int_dphi2,slope_dw2,slope_dphi2"
    assert (tmp_path / "y_q.csv").read_text().startswith("eps,delta,q,q_quadratic")


def test_domain_study(tmp_path):
    out = tmp_path / "d.csv"
    assert main(["domain-study", *SMALL, "--domains", "25x25,25x25", "--out", str(out)]) == 0
    with open(out) as fh:
        rows = list(csv.DictReader(fh))
    assert rows[0]["level"] == rows[1]["level"]


def test_deterministic(tmp_path):
    a, b = tmp_path / "a.fld", tmp_path / "b.fld"
    for p in (a, b):
        assert main(["find-w2", *SMALL, "--out", str(p)]) == 0
    assert a.read_bytes() == b.read_bytes()
