import json
import subprocess
import sys

import numpy as np
import pytest

from storagg import (emit_scenario_template, load_scenario, save_scenario,
                     run_pipeline, load_system, load_horizon, validate_system,
                     ConfigError, ScenarioConfig)
from storagg.pipeline import stage_ingest, stage_cluster, stage_build, \
    stage_solve, load_built_model, load_solutions


@pytest.fixture(scope="module")
def template_dir(tmp_path_factory):
    outdir = tmp_path_factory.mktemp("scen")
    emit_scenario_template(outdir, vision=1, days=2, seed=3)
    return outdir


def test_template_emits_valid_scenario(template_dir):
    for name in ("scenario.json", "system.json", "demand.csv",
                 "renewables.csv", "inflows.csv"):
        assert (template_dir / name).exists()
    system = load_system(template_dir / "system.json")
    validate_system(system)
    config = load_scenario(template_dir / "scenario.json")
    system, data = stage_ingest(config)
    assert data.horizon_hours == 48
    # vision 1 gas fleet, scaled from MW to GW
    gas = next(u for u in system.thermal if u.id == "gas")
    assert gas.q_max == pytest.approx(24.948)


def test_template_demand_fits_fleet(template_dir):
    config = load_scenario(template_dir / "scenario.json")
    system, data = stage_ingest(config)
    cap = sum(u.q_max for u in system.thermal) + \
        sum(s.q_max for s in system.storage)
    assert (data.total_demand() < cap).all()
    assert (data.total_demand() > 0).all()


def test_load_scenario_missing_key(tmp_path):
    (tmp_path / "scenario.json").write_text(json.dumps({"demand": "d.csv"}))
    with pytest.raises(ConfigError, match="missing"):
        load_scenario(tmp_path / "scenario.json")


def test_load_scenario_unknown_key(template_dir, tmp_path):
    doc = json.loads((template_dir / "scenario.json").read_text())
    doc["tpyo"] = 1
    (tmp_path / "scenario.json").write_text(json.dumps(doc))
    with pytest.raises(ConfigError, match="tpyo"):
        load_scenario(tmp_path / "scenario.json")


def test_load_scenario_bad_kind(template_dir, tmp_path):
    doc = json.loads((template_dir / "scenario.json").read_text())
    doc["kinds"] = ["hm", "warp"]
    (tmp_path / "scenario.json").write_text(json.dumps(doc))
    with pytest.raises(ConfigError, match="warp"):
        load_scenario(tmp_path / "scenario.json")


def test_scenario_round_trip(template_dir, tmp_path):
    config = load_scenario(template_dir / "scenario.json")
    save_scenario(config, tmp_path / "copy.json")
    again = load_scenario(tmp_path / "copy.json")
    assert again.states == config.states
    assert again.kinds == config.kinds
    # base_dir follows the file, not the original
    assert str(again.base_dir) == str(tmp_path)


@pytest.fixture(scope="module")
def run_result(template_dir, tmp_path_factory):
    outdir = tmp_path_factory.mktemp("run")
    config = load_scenario(template_dir / "scenario.json")
    config.states = 8
    config.rep_days = 2
    config.gap = 1e-3
    result = run_pipeline(config, outdir, with_prices=False)
    return config, outdir, result


def test_run_produces_artifact_tree(run_result):
    _, outdir, result = run_result
    assert (outdir / "agg" / "artifacts.json").exists()
    for kind in result.cases:
        assert (outdir / "models" / f"{kind}.mps").exists()
        assert (outdir / "models" / f"{kind}.registry.json").exists()
        assert (outdir / "solutions" / f"{kind}.json").exists()
        assert (outdir / "report" / f"hourly_{kind}.csv").exists()
    assert (outdir / "report" / "summary.json").exists()
    assert (outdir / "report" / "summary.csv").exists()


def test_run_solves_all_five_kinds(run_result):
    _, _, result = run_result
    assert set(result.cases) == {"hm", "ss", "rp", "ss_rfm", "rp_tmci"}
    for case in result.cases.values():
        assert case.objective is not None


def test_reports_keyed_by_aggregated_kind(run_result):
    _, _, result = run_result
    assert set(result.reports) == {"ss", "rp", "ss_rfm", "rp_tmci"}
    for rep in result.reports.values():
        assert rep.objective_error_pct is not None


def test_summary_csv_has_metric_matrix(run_result):
    _, outdir, _ = run_result
    lines = (outdir / "report" / "summary.csv").read_text().splitlines()
    header = lines[0].split(",")
    assert header[0] == "metric"
    assert "ss" in header and "rp_tmci" in header
    metrics = [ln.split(",")[0] for ln in lines[1:]]
    assert "objective_error_pct" in metrics


def test_hourly_csv_rows_cover_horizon(run_result):
    config, outdir, _ = run_result
    lines = (outdir / "report" / "hourly_hm.csv").read_text().splitlines()
    assert len(lines) == 49    # header + 48 hours
    assert lines[0].split(",")[0] == "hour"


def test_built_model_reloads_from_disk(run_result):
    _, outdir, result = run_result
    fo = load_built_model(outdir, "ss")
    assert fo.kind == "ss"
    sol = load_solutions(outdir, ["ss"])["ss"]
    assert sol.objective == pytest.approx(result.cases["ss"].objective,
                                          rel=1e-6)


def test_solutions_describe_status(run_result):
    _, outdir, _ = run_result
    doc = json.loads((outdir / "solutions" / "hm.json").read_text())
    assert doc["status"] in ("optimal", "gap_limit")
    assert "wall_seconds" in doc


def test_pipeline_deterministic(template_dir, tmp_path):
    config = load_scenario(template_dir / "scenario.json")
    config.states = 6
    config.rep_days = 2
    config.kinds = ["ss", "rp"]
    out1, out2 = tmp_path / "a", tmp_path / "b"
    for out in (out1, out2):
        system, data = stage_ingest(config)
        art = stage_cluster(system, data, config, out)
        stage_build(system, data, art, config, out)
    assert (out1 / "agg" / "artifacts.json").read_bytes() == \
        (out2 / "agg" / "artifacts.json").read_bytes()
    for kind in config.kinds:
        assert (out1 / "models" / f"{kind}.mps").read_bytes() == \
            (out2 / "models" / f"{kind}.mps").read_bytes()


def test_solve_stage_reads_from_disk(template_dir, tmp_path):
    config = load_scenario(template_dir / "scenario.json")
    config.states = 6
    config.rep_days = 2
    config.kinds = ["ss"]
    config.gap = 1e-3
    system, data = stage_ingest(config)
    art = stage_cluster(system, data, config, tmp_path)
    stage_build(system, data, art, config, tmp_path)
    solutions = stage_solve(config, tmp_path, workers=1)
    assert solutions["ss"].ok


def test_parallel_solve_matches_serial(template_dir, tmp_path):
    config = load_scenario(template_dir / "scenario.json")
    config.states = 6
    config.rep_days = 2
    config.kinds = ["ss", "rp"]
    config.gap = 1e-3
    system, data = stage_ingest(config)
    art = stage_cluster(system, data, config, tmp_path)
    stage_build(system, data, art, config, tmp_path)
    solutions = stage_solve(config, tmp_path, workers=2)
    assert solutions["ss"].ok and solutions["rp"].ok


# ---------------------------------------------------------------------------
# command line
# ---------------------------------------------------------------------------

def run_cli(*args):
    return subprocess.run([sys.executable, "-m", "storagg.cli", *args],
                          capture_output=True, text=True)


def test_cli_template_and_run(tmp_path):
    scen = tmp_path / "scen"
    proc = run_cli("template", "-o", str(scen), "--days", "2", "--seed", "1")
    assert proc.returncode == 0, proc.stderr
    run = tmp_path / "out"
    proc = run_cli("run", str(scen / "scenario.json"), "-o", str(run),
                   "--only", "hm", "--only", "ss", "--gap", "1e-3",
                   "--no-prices")
    assert proc.returncode == 0, proc.stderr
    assert (run / "report" / "summary.json").exists()
    proc = run_cli("report", str(run))
    assert proc.returncode == 0
    assert "objective" in proc.stdout


def test_cli_bad_scenario_exits_2(tmp_path):
    bad = tmp_path / "scenario.json"
    bad.write_text(json.dumps({"demand": "missing.csv"}))
    proc = run_cli("ingest", str(bad))
    assert proc.returncode == 2
    assert proc.stderr.strip()


def test_cli_stagewise_matches_run(tmp_path):
    scen = tmp_path / "scen"
    run_cli("template", "-o", str(scen), "--days", "2")
    out = str(tmp_path / "out")
    cfg = str(scen / "scenario.json")
    for cmd in (("ingest", cfg),
                ("cluster", cfg, "-o", out),
                ("build", cfg, "-o", out, "--only", "ss"),
                ("solve", cfg, "-o", out, "--only", "ss", "--gap", "1e-3"),
                ("evaluate", cfg, "-o", out, "--only", "ss", "--no-prices"),
                ("report", out)):
        proc = run_cli(*cmd)
        assert proc.returncode == 0, (cmd, proc.stderr)
    assert (tmp_path / "out" / "solutions" / "ss.json").exists()
