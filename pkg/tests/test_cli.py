import csv
import json
import os
import statistics

import numpy as np
import pytest

from factorpred import io as fio
from factorpred.cli import main, read_results
from factorpred.model import validate_params


def write_config(tmp_path, name="c.json", **cfg):
    path = tmp_path / name
    path.write_text(json.dumps(cfg))
    return str(path)


def run(command, config, out, *extra):
    return main([command, "--config", config, "--out", str(out), *extra])


def data_rows(path):
    """Rows of a written CSV, read with nothing but the csv module."""
    with open(path, newline="", encoding="utf-8") as fh:
        lines = fh.read().splitlines()
    assert lines[0].startswith("#factorpred-csv/1,config=")
    return list(csv.DictReader(lines[1:]))


@pytest.fixture(scope="module")
def frm_dir(tmp_path_factory):
    tmp = tmp_path_factory.mktemp("frm")
    cfg = write_config(tmp, design={"family": "frm"}, seed=4)
    assert run("simulate", cfg, tmp / "out") == 0
    return tmp / "out"


def test_simulate_default_shape(frm_dir):
    with open(frm_dir / "X.csv", newline="") as fh:
        lines = fh.read().split("\r\n")
    assert lines[1] == ",".join(f"p{j}" for j in range(500))
    assert len([ln for ln in lines[2:] if ln]) == 300
    x, header, prov = fio.read_matrix(str(frm_dir / "X.csv"))
    assert x.shape == (300, 500) and prov["seed"] == "4"
    z, _, _ = fio.read_matrix(str(frm_dir / "Z.csv"))
    assert z.shape == (300, 5)


def test_simulate_is_byte_identical(tmp_path, frm_dir):
    cfg = write_config(tmp_path, design={"family": "frm"}, seed=4)
    assert run("simulate", cfg, tmp_path / "again") == 0
    for name in ("X.csv", "Y.csv", "Z.csv", "theta.json"):
        assert (tmp_path / "again" / name).read_bytes() == (frm_dir / name).read_bytes()


def test_seed_override_changes_data(tmp_path, frm_dir):
    cfg = write_config(tmp_path, design={"family": "frm"}, seed=4)
    assert run("simulate", cfg, tmp_path / "s5", "--seed", "5") == 0
    assert (tmp_path / "s5" / "Y.csv").read_bytes() != (frm_dir / "Y.csv").read_bytes()


def test_theta_round_trip(frm_dir):
    theta = fio.read_theta(str(frm_dir / "theta.json"))
    assert validate_params(theta).valid
    meta = json.loads((frm_dir / "theta.json").read_text())
    assert meta["seed"] == 4 and meta["rng"] == "numpy.random.PCG64" and meta["generator"]
    z, _, _ = fio.read_matrix(str(frm_dir / "Z.csv"))
    y, _, _ = fio.read_matrix(str(frm_dir / "Y.csv"))
    # the response noise has variance sigma^2 = 1
    assert np.var(y[:, 0] - z @ theta.beta) == pytest.approx(1.0, abs=0.25)


def test_fit_pcr_zero_and_gls_interpolates(tmp_path, frm_dir):
    cfg = write_config(tmp_path, data=str(frm_dir),
                       methods=[{"name": "pcr-k", "k": 0}, "gls", "pcr-k"])
    assert run("fit", cfg, tmp_path / "fit") == 0
    alpha, header, _ = fio.read_matrix(str(tmp_path / "fit" / "alpha.csv"))
    assert header == ["pcr-k", "gls", "pcr-k"] and alpha.shape == (500, 3)
    assert not np.any(alpha[:, 0])
    meta = json.loads((tmp_path / "fit" / "fit_meta.json").read_text())
    fits = meta["fits"]
    assert fits[0]["selected_rank"] == 0
    assert fits[1]["train_max_abs_residual"] <= 1e-6
    assert fits[1]["diagnostics"]["r_hat"] == 300
    assert fits[2]["selected_rank"] == 5  # K read from theta.json
    assert fits[2]["excess_risk"] < fits[0]["excess_risk"]


def test_fit_er_records_k_hat(tmp_path):
    sim = write_config(tmp_path, "sim.json",
                       design={"family": "er", "n": 500, "p": 100, "k": 5, "m": 5}, seed=1)
    assert run("simulate", sim, tmp_path / "er") == 0
    cfg = write_config(tmp_path, data="er", methods=["er"])
    assert run("fit", cfg, tmp_path / "fit") == 0
    fit = json.loads((tmp_path / "fit" / "fit_meta.json").read_text())["fits"][0]
    assert fit["selected_rank"] == 5
    assert fit["details"]["partition_sizes"] == [5] * 5


def test_malformed_csv_reports_location(tmp_path, capsys):
    d = tmp_path / "bad"
    d.mkdir()
    (d / "X.csv").write_text("a,b\n1,2\n3,oops\n")
    (d / "Y.csv").write_text("y\n1\n2\n")
    cfg = write_config(tmp_path, data="bad", methods=["gls"])
    assert run("fit", cfg, tmp_path / "out") == 2
    err = capsys.readouterr().err
    assert "line 3, column 2" in err and "oops" in err


def test_ragged_csv_reports_line(tmp_path):
    path = tmp_path / "r.csv"
    path.write_text("a,b\n1,2\n3\n")
    with pytest.raises(fio.CSVFormatError, match="line 3"):
        fio.read_matrix(str(path))


def test_unknown_csv_version_rejected(tmp_path):
    path = tmp_path / "v.csv"
    path.write_text("#factorpred-csv/2,config=x,seed=0\na\n1\n")
    with pytest.raises(fio.CSVFormatError, match="version 2"):
        fio.read_matrix(str(path))


def test_csv_float_round_trip(tmp_path, rng):
    m = rng.standard_normal((4, 3)) * 10.0 ** rng.integers(-30, 30, (4, 3))
    path = str(tmp_path / "m.csv")
    fio.write_matrix(path, m, ["a", "b", "c"], "h", 0)
    back, _, _ = fio.read_matrix(path)
    assert np.array_equal(back, m)


def test_no_methods_is_an_error(tmp_path, capsys):
    cfg = write_config(tmp_path, methods=[], design={"n": 30, "p": 20, "k": 2}, reps=1)
    assert run("benchmark", cfg, tmp_path / "b") == 2
    assert "no methods" in capsys.readouterr().err


@pytest.mark.parametrize("cfg", [
    {"methods": ["gls"], "colour": 1},
    {"methods": ["gls"], "design": {"n": 30, "wat": 2}},
    {"methods": [{"name": "gls", "k": 3}]},
    {"methods": ["nope"]},
    {"methods": ["gls"], "grid": {"vary": "sigma", "values": [1]}},
    {"methods": ["gls"], "plot": {"colour": "red"}},
])
def test_unknown_keys_rejected(tmp_path, cfg):
    assert run("benchmark", write_config(tmp_path, **cfg), tmp_path / "b") == 2


def test_wrong_command_in_config(tmp_path):
    cfg = write_config(tmp_path, command="fit", methods=["gls"])
    assert run("benchmark", cfg, tmp_path / "b") == 2


BENCH = {"design": {"n": 40, "p": 30, "k": 2}, "grid": {"vary": "p", "values": [30, 60, 120]},
         "methods": ["pcr-k", "pcr-stilde", "gls"], "reps": 3, "seed": 7, "plot": {"log_x": True}}


@pytest.fixture(scope="module")
def bench_dir(tmp_path_factory):
    tmp = tmp_path_factory.mktemp("bench")
    assert run("benchmark", write_config(tmp, **BENCH), tmp / "out") == 0
    return tmp / "out"


def test_benchmark_outputs(bench_dir):
    rows = data_rows(bench_dir / "results.csv")
    assert len(rows) == 3 * 3 * 3
    assert {r["p"] for r in rows} == {"30", "60", "120"}
    assert (bench_dir / "risk.svg").read_text().startswith("<svg")
    assert data_rows(bench_dir / "errors.csv") == []
    assert len(data_rows(bench_dir / "timings.csv")) == 27


def test_summary_recomputed_independently(bench_dir):
    cells = {}
    for r in data_rows(bench_dir / "results.csv"):
        cells.setdefault((r["design"], r["method"]), []).append(float(r["excess_risk"]))
    summary = data_rows(bench_dir / "summary.csv")
    assert len(summary) == len(cells)
    for s in summary:
        vals = cells[(s["design"], s["method"])]
        assert float(s["median"]) == statistics.median(vals)
        assert int(s["count"]) == len(vals)


def test_benchmark_rerun_identical(tmp_path, bench_dir):
    assert run("benchmark", write_config(tmp_path, **BENCH), tmp_path / "again") == 0
    for name in ("results.csv", "summary.csv", "errors.csv", "risk.svg"):
        assert (tmp_path / "again" / name).read_bytes() == (bench_dir / name).read_bytes()


def test_jobs_do_not_change_results(tmp_path, bench_dir, monkeypatch):
    monkeypatch.setenv("FACTORPRED_JOBS", "2")
    assert run("benchmark", write_config(tmp_path, **BENCH), tmp_path / "par",
               "--jobs", "1") == 0
    assert (tmp_path / "par" / "results.csv").read_bytes() == \
        (bench_dir / "results.csv").read_bytes()


def test_jobs_env_validation(tmp_path, monkeypatch):
    monkeypatch.setenv("FACTORPRED_JOBS", "many")
    assert run("benchmark", write_config(tmp_path, **BENCH), tmp_path / "x") == 2


def test_report_rebuilds_summary(tmp_path, bench_dir):
    cfg = write_config(tmp_path, results=str(bench_dir / "results.csv"), plot={"log_x": True})
    assert run("report", cfg, tmp_path / "rep") == 0
    assert (tmp_path / "rep" / "summary.csv").read_bytes() == \
        (bench_dir / "summary.csv").read_bytes()
    assert (tmp_path / "rep" / "risk.svg").read_bytes() == (bench_dir / "risk.svg").read_bytes()
    rows, prov = read_results(str(bench_dir / "results.csv"))
    assert rows[0]["rep"] == 0 and isinstance(rows[0]["excess_risk"], float)


def test_every_csv_carries_hash_and_seed(bench_dir):
    for name in ("results.csv", "summary.csv", "errors.csv", "timings.csv"):
        first = (bench_dir / name).read_text().splitlines()[0]
        assert "config=" in first and first.endswith("seed=7")


def test_failed_cells_go_to_errors_csv(tmp_path):
    cfg = write_config(tmp_path, design={"n": 40, "p": 30, "k": 2}, reps=2,
                       methods=[{"name": "pcr-k", "k": 999, "label": "bad"}, "gls"])
    assert run("benchmark", cfg, tmp_path / "b") == 0
    errors = data_rows(tmp_path / "b" / "errors.csv")
    assert len(errors) == 2 and errors[0]["method"] == "bad"
    assert len(data_rows(tmp_path / "b" / "results.csv")) == 2


def test_unwritable_output(tmp_path):
    blocker = tmp_path / "file"
    blocker.write_text("")
    cfg = write_config(tmp_path, design={"n": 30, "p": 20, "k": 2})
    assert run("simulate", cfg, blocker / "sub") == 1
    assert not os.path.exists(blocker / "sub")


def test_fit_keeps_going_when_one_method_fails(tmp_path, frm_dir):
    cfg = write_config(tmp_path, data=str(frm_dir),
                       methods=[{"name": "pcr-k", "k": 999, "label": "bad"}, "gls"])
    assert run("fit", cfg, tmp_path / "fit") == 0
    _, header, _ = fio.read_matrix(str(tmp_path / "fit" / "alpha.csv"))
    assert header == ["gls"]
    fits = json.loads((tmp_path / "fit" / "fit_meta.json").read_text())["fits"]
    assert fits[0]["method"] == "bad" and "rank" in fits[0]["error"]


def test_fit_fails_when_every_method_fails(tmp_path, frm_dir, capsys):
    cfg = write_config(tmp_path, data=str(frm_dir), methods=[{"name": "pcr-k", "k": 999}])
    assert run("fit", cfg, tmp_path / "fit") == 1
    assert "every method failed" in capsys.readouterr().err
    assert not (tmp_path / "fit" / "alpha.csv").exists()
