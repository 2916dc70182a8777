import csv
import io
import json
import logging

import numpy as np
import pytest

from spdec.cli import main, parse_args, spec_from_args
from spdec.experiments import (
    EXIT_ERROR,
    EXIT_GAVE_UP,
    EXIT_SAT,
    fit_curve,
    windowed_means,
    windows_agree,
)
from spdec.instance import generate_random, parse_dimacs, verify_assignment, write_dimacs

KEYS = ["n", "alpha", "seed", "selection_rule"]


def read_csv(path):
    raw = path.read_bytes()
    assert b"\r" not in raw
    rows = list(csv.DictReader(io.StringIO(raw.decode("utf-8"))))
    assert rows and all(r[k] != "" for r in rows for k in KEYS)
    return rows


def parse_v_lines(text):
    lits = [int(x) for line in text.splitlines() if line.startswith("v ") for x in line[2:].split()]
    assert lits[-1] == 0
    return np.array([x > 0 for x in sorted(lits[:-1], key=abs)])


def test_solve_trivial_fixture(tmp_path):
    cnf = tmp_path / "easy.cnf"
    cnf.write_text("p cnf 4 3\n1 2 0\n-1 3 0\n4 0\n")
    out = tmp_path / "sol.txt"
    assert main(["solve", "--dimacs", str(cnf), "--out", str(out)]) == EXIT_SAT
    text = out.read_text()
    assert "s SATISFIABLE" in text
    assert verify_assignment(parse_dimacs(cnf.read_text()), parse_v_lines(text))


def test_solve_random_below_threshold(tmp_path):
    out = tmp_path / "sol.txt"
    assert main(["solve", "--n", "10000", "--alpha", "4.1", "--seed", "1", "--out", str(out)]) == EXIT_SAT
    assert verify_assignment(generate_random(10_000, 4.1, 3, seed=1), parse_v_lines(out.read_text()))


def test_solve_above_threshold_gives_up(tmp_path):
    out = tmp_path / "sol.txt"
    assert main(["solve", "--n", "10000", "--alpha", "4.3", "--seed", "1", "--out", str(out)]) == EXIT_GAVE_UP
    text = out.read_text()
    assert "c status NEGATIVE_COMPLEXITY" in text and "s UNKNOWN" in text


def test_usage_and_io_errors(tmp_path, capsys):
    assert main(["solve", "--dimacs", str(tmp_path / "missing.cnf")]) == EXIT_ERROR
    bad = tmp_path / "bad.cnf"
    bad.write_text("p cnf 2 1\n1 5 0\n")
    assert main(["solve", "--dimacs", str(bad)]) == EXIT_ERROR
    assert "line 2" in capsys.readouterr().err
    with pytest.raises(SystemExit) as exc:
        main(["solve", "--select", "nope"])
    assert exc.value.code == EXIT_ERROR
    with pytest.raises(SystemExit) as exc:
        main(["frobnicate"])
    assert exc.value.code == EXIT_ERROR
    assert main(["alpha-scan", "--alpha-grid", "4.1,4.2"]) == EXIT_ERROR


def test_config_file_and_flag_precedence(tmp_path):
    cfg = tmp_path / "run.json"
    cfg.write_text(json.dumps({"n": 123, "alpha-grid": "4.0:4.2:0.1", "seeds": "2-4", "select": "polarization",
                               "batch_fraction": 0.01}))
    spec = spec_from_args(parse_args(["trace", "--config", str(cfg), "--n", "456"]))
    assert spec.n == 456
    assert spec.alpha_grid == (4.0, 4.1, 4.2)
    assert spec.seeds == (2, 3, 4)
    assert spec.selection.value == "polarization" and spec.batch_fraction == 0.01
    cfg.write_text(json.dumps({"bogus": 1}))
    with pytest.raises(SystemExit):
        parse_args(["trace", "--config", str(cfg)])


def test_trace_empty_instance(tmp_path):
    cnf = tmp_path / "empty.cnf"
    cnf.write_text("p cnf 5 0\n")
    out = tmp_path / "t.csv"
    assert main(["trace", "--dimacs", str(cnf), "--out", str(out)]) == 0
    rows = read_csv(out)
    assert len(rows) == 1 and float(rows[0]["f"]) == 0.0 and rows[0]["status"] == "EASY_RESIDUAL"
    assert rows[0]["n"] == "5"


def test_trace_alpha_42_jumps_from_positive(tmp_path):
    out = tmp_path / "t.csv"
    assert main(["trace", "--n", "5000", "--alpha", "4.2", "--seed", "2", "--batch-fraction", "5e-3",
                 "--out", str(out)]) == 0
    rows = read_csv(out)
    assert list(rows[0]) == KEYS + ["step", "f", "sigma_density", "chosen_certitude", "chosen_polarization",
                                    "delta_pred", "delta_measured", "status"]
    assert rows[-1]["status"] == "EASY_RESIDUAL" and float(rows[-1]["sigma_density"]) == 0.0
    assert float(rows[-2]["sigma_density"]) > 0
    fs = [float(r["f"]) for r in rows]
    assert fs == sorted(fs) and len(set(fs)) == len(fs)


def test_trace_per_run_files(tmp_path):
    assert main(["trace", "--n", "300", "--alpha", "4.0", "--seeds", "1,2", "--batch-fraction", "0.02",
                 "--out", str(tmp_path / "traces")]) == 0
    files = sorted(p.name for p in (tmp_path / "traces").iterdir())
    assert files == ["trace_alpha4_seed1.csv", "trace_alpha4_seed2.csv"]


def test_outputs_are_byte_identical_and_pool_independent(tmp_path, monkeypatch):
    args = ["critical", "--n", "800", "--alpha-grid", "4.0,4.1", "--seeds", "1-2", "--batch-fraction", "0.01"]
    monkeypatch.setenv("SPDEC_THREADS", "1")
    assert main(args + ["--out", str(tmp_path / "a.csv")]) == 0
    assert main(args + ["--out", str(tmp_path / "b.csv"), "--deterministic"]) == 0
    monkeypatch.setenv("SPDEC_THREADS", "2")
    assert main(args + ["--out", str(tmp_path / "c.csv")]) == 0
    a = (tmp_path / "a.csv").read_bytes()
    assert a == (tmp_path / "b.csv").read_bytes() == (tmp_path / "c.csv").read_bytes()
    rows = read_csv(tmp_path / "a.csv")
    assert [(r["alpha"], r["seed"]) for r in rows] == [("4.0", "1"), ("4.0", "2"), ("4.1", "1"), ("4.1", "2")]


def test_critical_trivial_instance(tmp_path):
    cnf = tmp_path / "t.cnf"
    cnf.write_text(write_dimacs(generate_random(50, 1.0, 3, seed=0)))
    out = tmp_path / "c.csv"
    assert main(["critical", "--dimacs", str(cnf), "--out", str(out)]) == 0
    row = read_csv(out)[0]
    assert float(row["f_jump"]) == 0.0 and row["outcome"] == "EASY_RESIDUAL"


def test_alpha_scan_below_window_is_trivial(tmp_path, caplog):
    out = tmp_path / "s.csv"
    with caplog.at_level(logging.WARNING):
        assert main(["alpha-scan", "--n", "2000", "--alpha-grid", "3.5,3.6,3.7", "--seeds", "1",
                     "--out", str(out)]) == 0
    rows = read_csv(out)
    assert [r["initial_status"] for r in rows] == ["TRIVIAL"] * 3
    assert all(r["row_type"] == "point" for r in rows)
    assert "fit omitted" in caplog.text


def test_alpha_scan_fit_rows(tmp_path):
    out = tmp_path / "s.csv"
    assert main(["alpha-scan", "--n", "3000", "--alpha-grid", "4.1,4.15,4.2", "--seeds", "1", "--initial-only",
                 "--out", str(out)]) == 0
    rows = read_csv(out)
    fits = [r for r in rows if r["row_type"] == "fit"]
    assert [f["curve"] for f in fits] == ["initial"]
    assert fits[0]["alpha"] == "4.1;4.15;4.2" and fits[0]["fit_alpha_min"] == "4.1"
    assert float(fits[0]["slope"]) < 0


def test_delta_corr_rows(tmp_path):
    out = tmp_path / "d.csv"
    assert main(["delta-corr", "--n", "400", "--alpha", "4.1", "--seed", "3", "--out", str(out)]) == 0
    rows = read_csv(out)
    steps = [r for r in rows if r["row_type"] == "step"]
    windows = [r for r in rows if r["row_type"] == "window"]
    assert len(windows) == len(steps) // 10
    pred = [float(r["delta_pred"]) for r in steps]
    assert float(windows[0]["delta_pred"]) == pytest.approx(np.mean(pred[:10]))
    for r in steps:
        s_t, s_f = float(r["s_T"]), float(r["s_F"])
        assert float(r["delta_pred"]) == pytest.approx(-np.log1p(-min(s_t, s_f)))


def test_windowed_means():
    assert windowed_means([2.0] * 25).tolist() == [2.0, 2.0]
    assert windowed_means(list(range(20)), 10).tolist() == [4.5, 14.5]
    assert windowed_means([]).size == 0


def test_windows_agree():
    assert windows_agree([1.0, 1.0, 0.0], [1.2, 1.3, 1e-12]).tolist() == [True, False, True]


def test_fit_curve():
    fit = fit_curve("initial", [4.0, 4.1, 4.2], [0.2, 0.1, 0.0])
    assert fit.zero_crossing == pytest.approx(4.2) and fit.points == 3
    assert fit_curve("final", [4.0, 4.0], [0.1, 0.2]) is None
