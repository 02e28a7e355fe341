import csv
import json
import math
import os
import xml.etree.ElementTree as ET

import numpy as np
import pytest

from zo_minmax.cli import EXIT_CONFIG, EXIT_IO, EXIT_NUMERICAL, EXIT_OK, main, parallel_map, worker_count

TOY = ["--problem", "toy-bilinear", "--dataset.n", "8", "--dataset.d", "4"]
TOY_SCHEDULE = ["--solver.eta0", "0.05", "--solver.eps0", "4", "--solver.eta_exponent", "0.65", "--solver.estimator_mode", "full_zo"]
SMALL_WDRSC = ["--dataset.n", "30", "--dataset.d", "3", "--solver.epochs", "20", "--solver.eta_exponent", "0.4"]


def read_csv(path):
    with open(path, newline="") as fh:
        return list(csv.DictReader(fh))


def read(path):
    with open(path, "rb") as fh:
        return fh.read()


# -- gen-data ------------------------------------------------------------------------------


def test_gen_data_writes_dataset_sidecar_and_manifest(tmp_path):
    assert main(["gen-data", "--n", "500", "--d", "10", "--seed", "7", "--out", str(tmp_path)]) == EXIT_OK
    rows = read_csv(tmp_path / "data.csv")
    assert len(rows) == 500 and len(rows[0]) == 11
    sidecar = json.loads((tmp_path / "theta_star.json").read_text())
    assert len(sidecar["theta_star"]) == 10 and sidecar["strategic"] == [0, 1, 2, 3, 4]
    manifest = json.loads((tmp_path / "manifest.json").read_text())
    assert manifest["seed"] == 7 and manifest["command"] == "gen-data"
    assert sorted(manifest["files"]) == ["data.csv", "theta_star.json"]


def test_gen_data_is_repeatable(tmp_path):
    a, b = tmp_path / "a", tmp_path / "b"
    for out in (a, b):
        assert main(["gen-data", "--n", "50", "--d", "3", "--seed", "1", "--out", str(out)]) == EXIT_OK
    for name in ("data.csv", "theta_star.json"):
        assert read(a / name) == read(b / name)


@pytest.mark.parametrize("bad", [["--d", "0"], ["--d", "x"], ["--d", "3", "--noise-std", "-1"]])
def test_gen_data_usage_errors(tmp_path, bad):
    with pytest.raises(SystemExit) as info:
        main(["gen-data", "--n", "5", *bad, "--out", str(tmp_path)])
    assert info.value.code == EXIT_CONFIG


def test_gen_data_unwritable_path(tmp_path):
    blocker = tmp_path / "file"
    blocker.write_text("")
    assert main(["gen-data", "--n", "5", "--d", "2", "--out", str(blocker / "sub")]) == EXIT_IO


# -- solve -----------------------------------------------------------------------------------


def test_toy_solve_shrinks_the_gap_tenfold(tmp_path):
    code = main(["solve", *TOY, *TOY_SCHEDULE, "--solver.epochs", "500", "--out", str(tmp_path), "--outputs.plot_svg", "toy.svg"])
    assert code == EXIT_OK
    rows = read_csv(tmp_path / "trace.csv")
    assert [int(r["epoch"]) for r in rows] == list(range(1, 501))
    manifest = json.loads((tmp_path / "manifest.json").read_text())
    # gap at the starting point, against the same reference
    from zo_minmax.cli import build_problem
    from zo_minmax.config import from_dict

    problem = build_problem(from_dict(manifest["config"]))
    initial = problem.evaluator()(np.zeros(problem.oracle.dim))
    assert float(rows[-1]["suboptimality"]) < initial / 10
    assert manifest["final_gap"] == float(rows[-1]["suboptimality"])
    ET.parse(tmp_path / "toy.svg")


def test_solve_all_variants_writes_four_traces(tmp_path):
    assert main(["solve", *TOY, "--solver.epochs", "5", "--solver.variant", "all", "--out", str(tmp_path)]) == EXIT_OK
    for v in ("OGDA_RR", "OGDA_WR", "SGDA_RR", "SGDA_WR"):
        assert len(read_csv(tmp_path / f"trace_{v}.csv")) == 5
    manifest = json.loads((tmp_path / "manifest.json").read_text())
    assert [r["variant"] for r in manifest["runs"]] == ["OGDA_RR", "OGDA_WR", "SGDA_RR", "SGDA_WR"]


def test_solve_is_deterministic(tmp_path):
    hashes = []
    for name in ("one", "two"):
        out = tmp_path / name
        assert main(["solve", *SMALL_WDRSC, "--out", str(out)]) == EXIT_OK
        hashes.append(json.loads((out / "manifest.json").read_text())["config_hash"])
    assert hashes[0] == hashes[1]
    assert read(tmp_path / "one" / "trace.csv") == read(tmp_path / "two" / "trace.csv")
    assert read(tmp_path / "one" / "solution.json") == read(tmp_path / "two" / "solution.json")


def test_solution_file_layout(tmp_path):
    assert main(["solve", *SMALL_WDRSC, "--out", str(tmp_path)]) == EXIT_OK
    sol = json.loads((tmp_path / "solution.json").read_text())
    assert len(sol["theta"]) == 3
    assert len(sol["point"]) == 3 + 1 + len(sol["gamma"])
    assert sol["variant"] == "OGDA_RR"


def test_solve_from_csv_dataset(tmp_path):
    assert main(["gen-data", "--n", "40", "--d", "3", "--out", str(tmp_path)]) == EXIT_OK
    cfg = {"dataset": {"path": str(tmp_path / "data.csv"), "strategic": 2}, "solver": {"epochs": 5}}
    (tmp_path / "cfg.json").write_text(json.dumps(cfg))
    assert main(["solve", "--config", str(tmp_path / "cfg.json"), "--out", str(tmp_path)]) == EXIT_OK


def test_solve_without_reference_leaves_gap_blank(tmp_path):
    assert main(["solve", *SMALL_WDRSC, "--reference.enabled", "false", "--out", str(tmp_path)]) == EXIT_OK
    assert all(r["suboptimality"] == "" for r in read_csv(tmp_path / "trace.csv"))


def test_unconverged_reference_is_a_numerical_failure(tmp_path):
    code = main(["solve", *SMALL_WDRSC, "--reference.max_iters", "3", "--out", str(tmp_path)])
    assert code == EXIT_NUMERICAL


@pytest.mark.filterwarnings("ignore::RuntimeWarning")
def test_solver_blow_up_flushes_partial_trace(tmp_path):
    path = tmp_path / "huge.csv"
    path.write_text("a,b,label\n1.7e308,1.7e308,1\n-1.7e308,1.7e308,-1\n1.7e308,-1.7e308,-1\n")
    cfg = {"dataset": {"path": str(path)}, "reference": {"enabled": False}, "solver": {"epochs": 50, "eta0": 1.0}}
    (tmp_path / "cfg.json").write_text(json.dumps(cfg))
    code = main(["solve", "--config", str(tmp_path / "cfg.json"), "--out", str(tmp_path)])
    assert code == EXIT_NUMERICAL
    assert (tmp_path / "trace.csv").exists()
    assert len(read_csv(tmp_path / "trace.csv")) < 50


@pytest.mark.parametrize(
    "argv",
    [
        ["solve", "--solver.nope", "1"],
        ["solve", "--solver.variant", "OGDA"],
        ["solve", "--solver.epochs", "0"],
        ["solve", "--model.zeta", "0"],
        ["solve", "--model.mask", "[7]", "--dataset.d", "3"],
        ["solve", "--stray"],
        ["robustness", "--robustness.zeta_grid", "[]"],
        ["sweep", "--sweep.n_values", "[]"],
    ],
)
def test_configuration_errors_exit_two(tmp_path, argv):
    assert main([*argv, "--out", str(tmp_path)]) == EXIT_CONFIG


def test_missing_config_file_is_io_error(tmp_path):
    assert main(["solve", "--config", str(tmp_path / "none.json")]) == EXIT_IO


def test_malformed_config_file_is_config_error(tmp_path):
    (tmp_path / "c.json").write_text('{"solver": {"epochs": 5, "epochs": 6}}')
    assert main(["solve", "--config", str(tmp_path / "c.json")]) == EXIT_CONFIG


# -- compare ---------------------------------------------------------------------------------


def test_compare_single_repeat(tmp_path):
    assert main(["compare", *TOY, "--solver.epochs", "4", "--out", str(tmp_path)]) == EXIT_OK
    rows = read_csv(tmp_path / "trace.csv")
    assert {r["variant"] for r in rows} == {"OGDA_RR", "OGDA_WR", "SGDA_RR", "SGDA_WR"}
    assert len(rows) == 16
    assert not (tmp_path / "bands.csv").exists()
    ET.parse(tmp_path / "compare.svg")


def test_compare_bands_match_independent_aggregation(tmp_path):
    assert main(["compare", *TOY, "--solver.epochs", "6", "--repeats", "3", "--solver.seed", "4", "--out", str(tmp_path)]) == EXIT_OK
    rows = read_csv(tmp_path / "trace.csv")
    assert sorted({int(r["seed"]) for r in rows}) == [4, 5, 6]
    bands = read_csv(tmp_path / "bands.csv")
    assert list(bands[0]) == ["epoch", "variant", "mean", "std"]
    assert len(bands) == 6 * 4
    for b in bands:
        vals = [float(r["suboptimality"]) for r in rows if r["variant"] == b["variant"] and r["epoch"] == b["epoch"]]
        mean = math.fsum(vals) / len(vals)
        std = math.sqrt(math.fsum((v - mean) ** 2 for v in vals) / (len(vals) - 1))
        assert float(b["mean"]) == pytest.approx(mean, rel=1e-12, abs=1e-15)
        assert float(b["std"]) == pytest.approx(std, rel=1e-9, abs=1e-15)
    ET.parse(tmp_path / "compare.svg")


def test_compare_needs_a_reference(tmp_path):
    assert main(["compare", *TOY, "--reference.enabled", "false", "--out", str(tmp_path)]) == EXIT_CONFIG


# -- robustness ------------------------------------------------------------------------------


def test_robustness_without_solution_names_the_stage(tmp_path, capsys):
    assert main(["robustness", "--out", str(tmp_path)]) == EXIT_IO
    assert "solve" in capsys.readouterr().err


def test_robustness_at_training_conditions(tmp_path):
    assert main(["solve", *SMALL_WDRSC, "--out", str(tmp_path)]) == EXIT_OK
    argv = ["robustness", *SMALL_WDRSC, "--robustness.zeta_grid", "[0.05]", "--robustness.baseline_iters", "200"]
    assert main([*argv, "--out", str(tmp_path)]) == EXIT_OK
    rows = read_csv(tmp_path / "curve.csv")
    assert list(rows[0]) == ["classifier", "zeta", "margin_accuracy", "sign_accuracy"]
    assert [(r["classifier"], float(r["zeta"])) for r in rows] == [("WDRSC", 0.05), ("LogReg-SC", 0.05)]
    assert all(0 <= float(r["sign_accuracy"]) <= 1 for r in rows)
    ET.parse(tmp_path / "curve.svg")


def test_robustness_rejects_a_mismatched_solution(tmp_path):
    assert main(["solve", *SMALL_WDRSC, "--out", str(tmp_path)]) == EXIT_OK
    assert main(["robustness", *SMALL_WDRSC, "--dataset.d", "4", "--out", str(tmp_path)]) == EXIT_CONFIG


# -- sweep -----------------------------------------------------------------------------------


SWEEP = ["--sweep.n_values", "[20, 30]", "--sweep.d_values", "[2]", "--solver.eta_exponent", "0.4"]


def test_sweep_with_huge_target_stops_immediately(tmp_path):
    assert main(["sweep", *SWEEP, "--sweep.epsilon", "1e6", "--out", str(tmp_path)]) == EXIT_OK
    rows = read_csv(tmp_path / "sweep.csv")
    assert [(r["n"], r["d"]) for r in rows] == [("20", "2"), ("30", "2")]
    assert all(r["status"] == "ok" and int(r["epochs"]) <= 1 for r in rows)
    ET.parse(tmp_path / "sweep.svg")


def test_sweep_marks_capped_cells_and_is_deterministic(tmp_path):
    argv = ["sweep", *SWEEP, "--sweep.epsilon", "1e-9", "--sweep.epoch_cap", "3"]
    for name in ("a", "b"):
        assert main([*argv, "--out", str(tmp_path / name)]) == EXIT_OK
    rows = read_csv(tmp_path / "a" / "sweep.csv")
    assert all(r["status"] == "cap" and r["epochs"] == "3" for r in rows)
    assert read(tmp_path / "a" / "sweep.csv") == read(tmp_path / "b" / "sweep.csv")
    assert "cap" in (tmp_path / "a" / "sweep.svg").read_text()


# -- workers ---------------------------------------------------------------------------------


def test_worker_count_honours_environment(monkeypatch):
    monkeypatch.setenv("ZO_MINMAX_THREADS", "3")
    assert worker_count(10) == 3
    assert worker_count(2) == 2
    monkeypatch.setenv("ZO_MINMAX_THREADS", "zero")
    with pytest.raises(Exception):
        worker_count(4)


def test_parallel_map_keeps_order(monkeypatch):
    monkeypatch.setenv("ZO_MINMAX_THREADS", "4")
    assert parallel_map(lambda x: x * x, list(range(20))) == [x * x for x in range(20)]


def test_module_entry_point(tmp_path):
    import subprocess
    import sys

    proc = subprocess.run(
        [sys.executable, "-m", "zo_minmax", "gen-data", "--n", "4", "--d", "2", "--out", str(tmp_path)],
        capture_output=True,
        text=True,
        env={**os.environ, "PYTHONWARNINGS": "error"},
    )
    assert proc.returncode == 0, proc.stderr
