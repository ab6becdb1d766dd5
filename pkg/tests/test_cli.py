import json

import numpy as np
import pytest

from taskdiag.cl_metrics import ResultsMatrix, write_results_csv
from taskdiag.cli import main


@pytest.fixture
def stream_csv(tmp_path):
    path = tmp_path / "s.csv"
    rc = main(["synth", "--kind", "iid_noise", "--steps", str(12 * 144), "--seed", "4", "--out", str(path)])
    assert rc == 0
    return path


def test_inspect(stream_csv, capsys):
    assert main(["inspect", str(stream_csv), "--json"]) == 0
    info = json.loads(capsys.readouterr().out)
    assert info["t_steps"] == 12 * 144
    assert info["duration"] == 12 * 144 * 600


def test_synth_fixture(tmp_path):
    out = tmp_path / "cp.csv"
    assert main(["synth", "--fixture", "changepoint", "--out", str(out)]) == 0
    assert (tmp_path / "cp.fragile.json").is_file()
    assert (tmp_path / "cp.robust.json").is_file()


def test_synth_params(tmp_path, capsys):
    out = tmp_path / "p.csv"
    assert main(["synth", "--kind", "periodic", "--steps", "288", "--params", "period=144", "--out", str(out)]) == 0
    assert main(["inspect", str(out), "--json"]) == 0
    info = json.loads(capsys.readouterr().out)
    assert info["channels"][0]["max"] == pytest.approx(1.0)


def test_taskify_matrix_profiles(stream_csv, tmp_path):
    tk = tmp_path / "tk.json"
    assert main(["taskify", str(stream_csv), "--window-days", "3", "--shift-days", "1", "--out", str(tk)]) == 0
    d = json.loads(tk.read_text())
    assert d["label"] == "3d+Δ1d" and d["boundaries"][1] == 4 * 144
    m = tmp_path / "m.csv"
    svg = tmp_path / "m.svg"
    assert main(["matrix", str(stream_csv), "--taskification", str(tk), "--out", str(m), "--svg", str(svg)]) == 0
    assert svg.read_text().startswith("<svg")
    prof = tmp_path / "p.json"
    assert main(["profiles", str(stream_csv), "--window-days", "3", "--out", str(prof)]) == 0
    p = json.loads(prof.read_text())
    assert len(p["plasticity"]["values"]) == 3


def test_dprof_same_split_zero(stream_csv, capsys):
    rc = main(["dprof", str(stream_csv), "--a-window-days", "3", "--b-window-days", "3", "--json"])
    assert rc == 0
    assert json.loads(capsys.readouterr().out)["d_prof"] == 0


def test_bps(stream_csv, tmp_path):
    out = tmp_path / "b.json"
    rc = main(["bps", str(stream_csv), "--window-days", "3", "--delta-steps", "20", "--n-perturb", "4", "--out", str(out)])
    assert rc == 0
    d = json.loads(out.read_text())
    assert d["n_samples"] == 4 and d["delta_steps"] == 20


def test_clmetrics(tmp_path, capsys):
    paths = []
    for k, final in enumerate([1.5, 2.5]):
        m = np.array([[1.0, np.nan], [final, 2.0]])
        p = tmp_path / f"r{k}.csv"
        write_results_csv(ResultsMatrix(m), p)
        paths.append(str(p))
    out = tmp_path / "cl.json"
    assert main(["clmetrics", *paths, "--out", str(out)]) == 0
    d = json.loads(out.read_text())
    assert d["per_matrix"]["r0"]["forgetting"] == 0.5
    assert d["std"]["forgetting"] == pytest.approx(np.std([0.5, 1.5], ddof=1))


def test_report_exit_codes(stream_csv, tmp_path):
    out = tmp_path / "out"
    args = ["report", "--input", str(stream_csv), "--window-days", "3", "5", "--n-perturb", "2",
            "--out", str(out), "--no-svg"]
    assert main(args) == 0
    assert (out / "corpus_report.json").is_file()
    man = tmp_path / "m.json"
    man.write_text(json.dumps([{"series_id": "a", "path": str(stream_csv)},
                               {"series_id": "b", "path": "missing.csv"}]))
    assert main(["report", "--input", str(man), "--window-days", "3", "5", "--n-perturb", "2",
                 "--out", str(tmp_path / "o2"), "--no-svg"]) == 2


def test_config_file_with_override(stream_csv, tmp_path):
    cfg = tmp_path / "cfg.json"
    cfg.write_text(json.dumps({"input": str(stream_csv), "windows": [3, 5], "n_perturb": 2,
                               "output_dir": str(tmp_path / "o"), "emit_svg": False}))
    assert main(["report", "--config", str(cfg), "--seed", "9"]) == 0
    rep = json.loads((tmp_path / "o" / "corpus_report.json").read_text())
    assert rep["config"]["seed"] == 9


def test_errors_exit_one(tmp_path, capsys):
    assert main(["inspect", str(tmp_path / "nope.csv")]) == 1
    bad = tmp_path / "bad.csv"
    bad.write_text("id_time,x\n0,1\n0,2\n")
    assert main(["inspect", str(bad)]) == 1
    assert "error" in capsys.readouterr().err.lower()
