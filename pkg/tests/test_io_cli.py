import json

import numpy as np
import pytest

from rwre import certificates
from rwre.cli import main
from rwre.io import ExperimentManifest, csv_text, digest, read_config, read_csv, read_points, write_points
from rwre.pointproc import sample_ppp
from rwre.suites import Report, emit_plots


def test_points_round_trip(tmp_path):
    pts = sample_ppp(1.3, 25.0, seed=4, dim=2)
    path = write_points(tmp_path / "p.csv", pts, seed=4)
    back = read_points(path)
    assert back.dim == 2 and back.box_half_width == 25.0
    assert back.points.tobytes() == pts.points.tobytes()


def test_points_reader_rejects_foreign_file(tmp_path):
    p = tmp_path / "x.csv"
    p.write_text("1,2\n")
    with pytest.raises(ValueError):
        read_points(p)


def test_csv_round_trip(tmp_path):
    text = csv_text(["a", "b"], [(1, 0.1), (2, float("inf"))])
    assert text == "a,b\n1,0.1\n2,inf\n"
    p = tmp_path / "t.csv"
    p.write_text(text)
    header, rows = read_csv(p)
    assert header == ["a", "b"] and rows[0] == [1.0, 0.1]


def test_config_parsing(tmp_path):
    p = tmp_path / "c.ini"
    p.write_text("[run]\nseeds = 3\nalpha = 1.5\nns = 4,8,16\nflag = true\nname = ppp\n")
    cfg = read_config(p)["run"]
    assert cfg == {"seeds": 3, "alpha": 1.5, "ns": [4, 8, 16], "flag": True, "name": "ppp"}


def test_manifest_round_trip(tmp_path):
    m = ExperimentManifest({"renewal": {"deltas": [1.2, 1.5], "n_max": 100}}, [0, 1],
                           digests={"a.csv": "abc"}, timings={"renewal": 0.25})
    back = ExperimentManifest.read(m.write(tmp_path / "m.ini"))
    assert back.config == m.config
    assert back.seeds == [0, 1]
    assert back.same_outputs(m)


def test_cli_sample_and_resist(tmp_path):
    out = str(tmp_path)
    assert main(["sample", "--kind", "ppp", "--lambda", "1.0", "--box", "60", "--seed", "7",
                 "--out", "pts.csv", "--out-dir", out]) == 0
    assert main(["--out-dir", out, "resist", "--points", str(tmp_path / "pts.csv"), "--n", "4,8,16,32",
                 "--alpha", "1.5", "--out", "profile.csv"]) == 0
    header, rows = read_csv(tmp_path / "profile.csv")
    assert header[:3] == ["seed", "n", "R"]
    R = [r[2] for r in rows]
    assert all(a <= b for a, b in zip(R, R[1:]))
    assert main(["fit", "--in", str(tmp_path / "profile.csv"), "--model", "power"]) == 0


def test_cli_sample_is_reproducible(tmp_path):
    for name in ("a.csv", "b.csv"):
        main(["sample", "--kind", "ppp", "--dim", "2", "--box", "10", "--seed", "3", "--out", name,
              "--out-dir", str(tmp_path)])
    assert digest(tmp_path / "a.csv") == digest(tmp_path / "b.csv")


def test_cli_usage_errors(tmp_path, capsys):
    assert main(["run", "--out-dir", str(tmp_path)]) == 2
    assert main(["sample"]) == 2
    assert main(["nonsense"]) == 2
    assert main(["resist", "--points", str(tmp_path / "missing.csv"), "--n", "4"]) == 2
    assert main(["flux", "--mode", "renewal", "--delta", "2.5", "--alpha", "0.5", "--nmax", "50",
                 "--out-dir", str(tmp_path)]) == 2


def test_cli_failed_check_exits_one(tmp_path):
    assert main(["appendix", "--check", "shells", "--family", "circles", "--alpha", "2",
                 "--max-n", "20", "--out-dir", str(tmp_path)]) == 1
    assert main(["appendix", "--check", "shells", "--family", "squares", "--alpha", "1",
                 "--max-n", "20", "--out-dir", str(tmp_path)]) == 0


def test_cli_numeric_failure_exits_three(tmp_path, monkeypatch):
    def broken(*a, **k):
        raise certificates.QuadratureError("levels exhausted", {"levels": 60})
    monkeypatch.setattr(certificates, "spitzer_integral", broken)
    assert main(["appendix", "--check", "spitzer", "--d", "1", "--alpha", "1.5"]) == 3


def test_cli_flux_export(tmp_path):
    assert main(["flux", "--mode", "renewal", "--delta", "1.3", "--alpha", "0.5", "--nmax", "300",
                 "--export-flux", "--out-dir", str(tmp_path)]) == 0
    cert = json.loads((tmp_path / "certificate.json").read_text())
    assert cert["verdict"] == "finite-certified"
    header, rows = read_csv(tmp_path / "flux.csv")
    assert header == ["x_index", "y_index", "value"]
    assert any(r[1] == -1 for r in rows)


def test_cli_run_manifest_reproduces(tmp_path):
    a, b = tmp_path / "a", tmp_path / "b"
    a.mkdir()
    b.mkdir()
    main(["run", "renewal", "--nmax", "2000", "--out-dir", str(a)])
    assert main(["run", "--manifest", str(a / "manifest.ini"), "--out-dir", str(b)]) in (0, 1)
    assert (a / "renewal.csv").read_bytes() == (b / "renewal.csv").read_bytes()
    ma = ExperimentManifest.read(a / "manifest.ini")
    mb = ExperimentManifest.read(b / "manifest.ini")
    assert ma.same_outputs(mb)


def test_emit_plots_empty_report():
    assert emit_plots(None) == "series,x,y,fit\n"
    assert emit_plots(Report("r", {}, [], [])) == "series,x,y,fit\n"


def test_emit_plots_model_columns():
    rep = Report("r", {}, [], [])
    rep.curves["profile"] = [(2.0, 4.0), (4.0, 16.0)]
    rep.fits["profile"] = {"model": "power", "slope": 2.0, "intercept": 0.0}
    text = emit_plots(rep, models=("fit", "lower", "upper"))
    lines = text.strip().split("\n")
    assert lines[0] == "series,x,y,fit,lower,upper"
    assert len(lines) == 3
    assert lines[2].split(",")[3] == "16.0"


def test_cli_plots(tmp_path):
    main(["run", "renewal", "--nmax", "500", "--out-dir", str(tmp_path)])
    assert main(["plots", "--report", str(tmp_path / "renewal_report.json"),
                 "--out-dir", str(tmp_path)]) == 0
    assert (tmp_path / "plot.csv").read_text().startswith("series,x,y")


def test_cli_lift_on_lattice(tmp_path):
    from rwre.pointproc import lattice_set
    write_points(tmp_path / "lat.csv", lattice_set(1, 10))
    write_points(tmp_path / "p.csv", sample_ppp(1.0, 11.0, seed=2))
    assert main(["lift", "--s0", str(tmp_path / "lat.csv"), "--s", str(tmp_path / "p.csv"),
                 "--n", "6", "--alpha", "3", "--out-dir", str(tmp_path)]) == 0
    out = json.loads((tmp_path / "lift.json").read_text())
    assert out["flux_check"] <= 1e-9
    assert out["lifted_energy"] <= out["schwarz_bound"] * (1 + 1e-12)


def test_cli_reduce_chain(tmp_path):
    write_points(tmp_path / "p.csv", sample_ppp(1.0, 12.0, seed=5, dim=2))
    assert main(["reduce", "--points", str(tmp_path / "p.csv"), "--pipeline", "cube,shell,split",
                 "--n", "6", "--out-dir", str(tmp_path)]) == 0
    header, rows = read_csv(tmp_path / "chain.csv")
    assert header == ["i", "phi", "partial_chain_resistance"]
    part = np.array([r[2] for r in rows])
    assert np.all(np.diff(part) > 0)
