"""End-to-end run orchestration and on-disk artifact layout.

A run reads a scenario config (paths plus clustering/solve settings), then
walks the stages::

    ingest -> cluster -> build -> solve -> evaluate -> report

writing everything under one output directory::

    agg/artifacts.json            clustering + matrices
    models/<kind>.mps             interchange file per formulation
    models/<kind>.registry.json   variable registry + model metadata
    solutions/<kind>.json         status, objective, values
    report/summary.json|csv       benchmark comparison table
    report/hourly_<kind>.csv      expanded hourly series

The solve stage deliberately re-reads the MPS and registry files instead of
reusing the in-memory models, so every run exercises the interchange path.
"""

from __future__ import annotations

import csv
import json
import time
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field, asdict
from pathlib import Path

import numpy as np

from .timeseries import TimeHorizonData, load_horizon, save_horizon, DataFormatError
from .system import (PowerSystem, ThermalUnit, StorageUnit, Network,
                     OperatingConfig, load_system, save_system,
                     validate_system, SystemFormatError, SHORT_TERM, LONG_TERM)
from .aggregation import aggregate, save_artifacts, load_artifacts, AggregationArtifacts
from .milp import (write_mps, parse_mps, write_registry, load_registry,
                   Solution, get_solver, SolverError, audit_constraints,
                   STATUS_INFEASIBLE, STATUS_OPTIMAL, STATUS_GAP_LIMIT)
from .formulations import (FormulationOutput, build_hm, build_ss, build_rp,
                           build_ss_rfm, build_rp_tmci, BUILDER_KINDS)
from .evaluation import CaseResult, EvaluationReport, build_case_result, compare


class PipelineError(Exception):
    """A stage failed; ``exit_code`` follows the CLI convention."""

    exit_code = 1


class ConfigError(PipelineError):
    exit_code = 2


class SolveError(PipelineError):
    exit_code = 3


class InfeasibleError(PipelineError):
    exit_code = 4


@dataclass
class ScenarioConfig:
    """Inputs and knobs for one run; paths are relative to the config file."""

    demand: str
    renewables: str
    inflows: str
    system: str
    states: int = 32
    rep_days: int = 6
    seed: int = 0
    kinds: list[str] = field(default_factory=lambda: list(BUILDER_KINDS))
    window_hours: int | None = None       # checkpoint spacing; None = by storage kind
    theta: float = 1.0                    # commitment-link threshold (rp_tmci)
    invest: bool = False
    gap: float = 0.0
    time_limit: float | None = None
    check_degeneracy: bool = False
    base_dir: str = "."

    def path(self, name: str) -> Path:
        return (Path(self.base_dir) / name).resolve()


def load_scenario(path) -> ScenarioConfig:
    path = Path(path)
    try:
        with open(path) as fh:
            raw = json.load(fh)
    except FileNotFoundError:
        raise ConfigError(f"scenario file not found: {path}")
    except json.JSONDecodeError as exc:
        raise ConfigError(f"scenario file {path} is not valid JSON: {exc}")
    known = {f for f in ScenarioConfig.__dataclass_fields__}
    unknown = set(raw) - known
    if unknown:
        raise ConfigError(f"unknown scenario keys: {sorted(unknown)}")
    for key in ("demand", "renewables", "inflows", "system"):
        if key not in raw:
            raise ConfigError(f"scenario is missing required key {key!r}")
    bad = [k for k in raw.get("kinds", []) if k not in BUILDER_KINDS]
    if bad:
        raise ConfigError(f"unknown model kinds {bad}; pick from {list(BUILDER_KINDS)}")
    raw.setdefault("base_dir", str(path.parent))
    return ScenarioConfig(**raw)


def save_scenario(config: ScenarioConfig, path) -> None:
    doc = asdict(config)
    doc.pop("base_dir")
    with open(path, "w") as fh:
        json.dump(doc, fh, indent=2, sort_keys=True)
        fh.write("\n")


# ---------------------------------------------------------------------------
# stages
# ---------------------------------------------------------------------------

def stage_ingest(config: ScenarioConfig) -> tuple[PowerSystem, TimeHorizonData]:
    """Load and validate the system and the hourly series."""
    try:
        system = load_system(config.path(config.system))
    except (SystemFormatError, FileNotFoundError) as exc:
        raise ConfigError(f"system file: {exc}")
    try:
        data = load_horizon(config.path(config.demand),
                            config.path(config.renewables),
                            config.path(config.inflows),
                            nodes=system.nodes,
                            storage_ids=system.storage_ids)
        data.validate()
    except (DataFormatError, FileNotFoundError) as exc:
        raise ConfigError(f"time series: {exc}")
    return system, data


def stage_cluster(system: PowerSystem, data: TimeHorizonData,
                  config: ScenarioConfig, outdir: Path) -> AggregationArtifacts:
    artifacts = aggregate(
        data, num_states=config.states, num_rp=config.rep_days, seed=config.seed,
        window_hours=config.window_hours,
        has_short_term_storage=bool(system.short_term_storage))
    agg_dir = outdir / "agg"
    agg_dir.mkdir(parents=True, exist_ok=True)
    save_artifacts(artifacts, agg_dir / "artifacts.json")
    return artifacts


def build_formulation(kind: str, system: PowerSystem, data: TimeHorizonData,
                      artifacts: AggregationArtifacts, config: ScenarioConfig) -> FormulationOutput:
    if kind == "hm":
        return build_hm(system, data, invest=config.invest)
    if kind == "ss":
        return build_ss(system, artifacts.states, artifacts.matrices, invest=config.invest)
    if kind == "ss_rfm":
        return build_ss_rfm(system, artifacts.states, artifacts.matrices, invest=config.invest)
    if kind == "rp":
        return build_rp(system, data, artifacts.rp, invest=config.invest)
    if kind == "rp_tmci":
        return build_rp_tmci(system, data, artifacts.rp, artifacts.matrices,
                             window=config.window_hours or 168,
                             theta=config.theta, invest=config.invest)
    raise ConfigError(f"unknown model kind {kind!r}")


def stage_build(system: PowerSystem, data: TimeHorizonData,
                artifacts: AggregationArtifacts, config: ScenarioConfig,
                outdir: Path, only: list[str] | None = None) -> dict[str, FormulationOutput]:
    kinds = [k for k in config.kinds if only is None or k in only]
    models_dir = outdir / "models"
    models_dir.mkdir(parents=True, exist_ok=True)
    outputs: dict[str, FormulationOutput] = {}
    for kind in kinds:
        fo = build_formulation(kind, system, data, artifacts, config)
        write_mps(fo.model, models_dir / f"{kind}.mps")
        write_registry(fo.model, models_dir / f"{kind}.registry.json", meta=fo.meta)
        outputs[kind] = fo
    return outputs


def load_built_model(outdir: Path, kind: str) -> FormulationOutput:
    """Reassemble a formulation from its interchange pair on disk."""
    models_dir = Path(outdir) / "models"
    mps = models_dir / f"{kind}.mps"
    side = models_dir / f"{kind}.registry.json"
    if not mps.exists() or not side.exists():
        raise ConfigError(f"model files for {kind!r} not found under {models_dir}")
    model = parse_mps(mps)
    registry, meta = load_registry(side)
    return FormulationOutput(model=model, kind=meta.get("kind", kind),
                             meta=meta, registry=registry)


def _solution_to_doc(sol: Solution) -> dict:
    return {"status": sol.status, "objective": sol.objective, "gap": sol.gap,
            "wall_seconds": sol.wall_seconds, "message": sol.message,
            "values": sol.values}


def _solution_from_doc(doc: dict) -> Solution:
    return Solution(status=doc["status"], objective=doc.get("objective"),
                    values=doc.get("values", {}), gap=doc.get("gap", 0.0),
                    wall_seconds=doc.get("wall_seconds", 0.0),
                    message=doc.get("message", ""))


def stage_solve(config: ScenarioConfig, outdir: Path,
                only: list[str] | None = None, solver: str | None = None,
                workers: int = 1) -> dict[str, Solution]:
    """Solve every built model, re-reading it from the interchange files."""
    kinds = [k for k in config.kinds if only is None or k in only]
    adapter = get_solver(solver)
    sol_dir = outdir / "solutions"
    sol_dir.mkdir(parents=True, exist_ok=True)

    def run(kind: str) -> tuple[str, Solution, dict]:
        fo = load_built_model(outdir, kind)
        sol = adapter.solve(fo.model, gap=config.gap, time_limit=config.time_limit)
        audit = (audit_constraints(fo.model, sol.values, sample_per_family=100,
                                   seed=0) if sol.ok else {})
        return kind, sol, audit

    solutions: dict[str, Solution] = {}
    audits: dict[str, dict] = {}
    if workers > 1 and len(kinds) > 1:
        with ThreadPoolExecutor(max_workers=workers) as pool:
            for kind, sol, audit in pool.map(run, kinds):
                solutions[kind] = sol
                audits[kind] = audit
    else:
        for kind in kinds:
            kind, sol, audit = run(kind)
            solutions[kind] = sol
            audits[kind] = audit
    for kind, sol in solutions.items():
        doc = _solution_to_doc(sol)
        doc["audit"] = audits[kind]
        with open(sol_dir / f"{kind}.json", "w") as fh:
            json.dump(doc, fh, indent=2, sort_keys=True)
            fh.write("\n")
    infeasible = [k for k, s in solutions.items() if s.status == STATUS_INFEASIBLE]
    if infeasible:
        raise InfeasibleError(f"infeasible models: {infeasible}")
    failed = [k for k, s in solutions.items()
              if s.status not in (STATUS_OPTIMAL, STATUS_GAP_LIMIT)]
    if failed:
        details = "; ".join(f"{k}: {solutions[k].status} {solutions[k].message}"
                            for k in failed)
        raise SolveError(f"solver failed on {details}")
    return solutions


def load_solutions(outdir: Path, kinds: list[str]) -> dict[str, Solution]:
    out = {}
    for kind in kinds:
        path = Path(outdir) / "solutions" / f"{kind}.json"
        if not path.exists():
            raise ConfigError(f"no solution on disk for {kind!r} (expected {path})")
        with open(path) as fh:
            out[kind] = _solution_from_doc(json.load(fh))
    return out


def stage_evaluate(system: PowerSystem, data: TimeHorizonData,
                   artifacts: AggregationArtifacts, config: ScenarioConfig,
                   outputs: dict[str, FormulationOutput],
                   solutions: dict[str, Solution],
                   with_prices: bool = True) -> tuple[dict[str, CaseResult],
                                                      dict[str, EvaluationReport]]:
    cases: dict[str, CaseResult] = {}
    for kind, fo in outputs.items():
        cases[kind] = build_case_result(
            fo, solutions[kind], system, data,
            states=artifacts.states, rp=artifacts.rp, matrices=artifacts.matrices,
            with_prices=with_prices, check_degeneracy=config.check_degeneracy)
    reports: dict[str, EvaluationReport] = {}
    if "hm" in cases:
        bench = cases["hm"]
        for kind, case in cases.items():
            if kind != "hm":
                reports[kind] = compare(bench, case, system)
    return cases, reports


def stage_report(system: PowerSystem, cases: dict[str, CaseResult],
                 reports: dict[str, EvaluationReport], outdir: Path) -> Path:
    rep_dir = Path(outdir) / "report"
    rep_dir.mkdir(parents=True, exist_ok=True)

    summary = {
        kind: {
            "objective": case.objective,
            "wall_seconds": case.wall_seconds,
            "violations": case.violation_count,
            "violation_max_gwh": case.violation_max,
            "investment": case.investment,
            "startups": case.startups,
        } for kind, case in cases.items()
    }
    summary["comparisons"] = {
        kind: dict(rep.rows(), absolute_metrics=rep.absolute_metrics)
        for kind, rep in reports.items()
    }
    with open(rep_dir / "summary.json", "w") as fh:
        json.dump(summary, fh, indent=2, sort_keys=True, default=float)
        fh.write("\n")

    metric_names: list[str] = []
    for rep in reports.values():
        for name, _ in rep.rows():
            if name not in metric_names:
                metric_names.append(name)
    with open(rep_dir / "summary.csv", "w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(["metric"] + list(reports))
        for name in metric_names:
            row = [name]
            for rep in reports.values():
                value = dict(rep.rows()).get(name)
                row.append("" if value is None else f"{value:.6g}")
            writer.writerow(row)

    for kind, case in cases.items():
        exp = case.expansion
        with open(rep_dir / f"hourly_{kind}.csv", "w", newline="") as fh:
            writer = csv.writer(fh)
            header = ["hour", "source"]
            header += [f"q_{g}" for g in exp.thermal_production]
            header += [f"u_{g}" for g in exp.commitment]
            for uid in exp.storage_level:
                header += [f"discharge_{uid}", f"charge_{uid}",
                           f"level_{uid}", f"level_model_{uid}"]
            header += [f"res_use_{n}" for n in exp.renewable_use]
            header += [f"pns_{n}" for n in exp.pns]
            if exp.prices is not None:
                header.append("price")
            writer.writerow(header)
            for t in range(exp.hours):
                row: list = [t, exp.source_labels[t]]
                row += [f"{exp.thermal_production[g][t]:.6g}" for g in exp.thermal_production]
                row += [int(exp.commitment[g][t]) for g in exp.commitment]
                for uid in exp.storage_level:
                    row += [f"{exp.storage_discharge[uid][t]:.6g}",
                            f"{exp.storage_charge[uid][t]:.6g}",
                            f"{exp.storage_level[uid][t]:.6g}",
                            f"{exp.storage_level_model[uid][t]:.6g}"]
                row += [f"{exp.renewable_use[n][t]:.6g}" for n in exp.renewable_use]
                row += [f"{exp.pns[n][t]:.6g}" for n in exp.pns]
                if exp.prices is not None:
                    row.append(f"{exp.prices[t]:.6g}")
                writer.writerow(row)
    return rep_dir


@dataclass
class RunResult:
    system: PowerSystem
    data: TimeHorizonData
    artifacts: AggregationArtifacts
    outputs: dict[str, FormulationOutput]
    solutions: dict[str, Solution]
    cases: dict[str, CaseResult]
    reports: dict[str, EvaluationReport]
    outdir: Path
    elapsed_seconds: float


def run_pipeline(config: ScenarioConfig, outdir, only: list[str] | None = None,
                 solver: str | None = None, workers: int = 1,
                 with_prices: bool = True) -> RunResult:
    """All stages in sequence under ``outdir``; see the module docstring."""
    started = time.perf_counter()
    outdir = Path(outdir)
    outdir.mkdir(parents=True, exist_ok=True)
    system, data = stage_ingest(config)
    artifacts = stage_cluster(system, data, config, outdir)
    outputs = stage_build(system, data, artifacts, config, outdir, only=only)
    solutions = stage_solve(config, outdir, only=only, solver=solver, workers=workers)
    # evaluation prices need the original models (the parsed copies work too,
    # but the built ones are already in memory)
    cases, reports = stage_evaluate(system, data, artifacts, config,
                                    outputs, solutions, with_prices=with_prices)
    stage_report(system, cases, reports, outdir)
    return RunResult(system=system, data=data, artifacts=artifacts,
                     outputs=outputs, solutions=solutions, cases=cases,
                     reports=reports, outdir=outdir,
                     elapsed_seconds=time.perf_counter() - started)


# ---------------------------------------------------------------------------
# scenario template
# ---------------------------------------------------------------------------

# Installed capacity per technology (GW) for the four bundled visions.
VISION_CAPACITY_GW = {
    1: {"gas": 24.948, "hard_coal": 5.900, "hydro": 23.450, "nuclear": 7.120,
        "others_non_res": 10.480, "others_res": 2.400, "solar": 16.800,
        "wind": 35.750},
    2: {"gas": 21.572, "hard_coal": 5.900, "hydro": 23.450, "nuclear": 7.120,
        "others_non_res": 10.480, "others_res": 2.400, "solar": 33.150,
        "wind": 27.650},
    3: {"gas": 29.208, "hard_coal": 4.160, "hydro": 25.050, "nuclear": 7.120,
        "others_non_res": 12.210, "others_res": 5.100, "solar": 25.000,
        "wind": 39.300},
    4: {"gas": 29.208, "hard_coal": 4.160, "hydro": 25.635, "nuclear": 7.120,
        "others_non_res": 12.210, "others_res": 5.100, "solar": 54.130,
        "wind": 40.604},
}

# (fuel k€/MJ, alpha MJ/GWh, beta MJ/h, gamma MJ/start, om k€/GWh, qmin frac)
_THERMAL_PARAMS = {
    "nuclear":        (0.002, 3000.0, 1000.0, 100000.0, 1.5, 0.9),
    "hard_coal":      (0.003, 8000.0, 2000.0, 50000.0, 3.0, 0.4),
    "gas":            (0.010, 7000.0, 1000.0, 20000.0, 4.0, 0.3),
    "others_non_res": (0.005, 8000.0, 800.0, 10000.0, 2.0, 0.3),
}


def _template_profiles(days: int, caps: dict[str, float], seed: int):
    """Deterministic synthetic demand and renewable availability (GWh/h)."""
    rng = np.random.default_rng(seed)
    p = days * 24
    t = np.arange(p)
    hour = t % 24
    day = t // 24
    year_angle = 2 * np.pi * day / 364.0

    thermal_cap = sum(caps[k] for k in _THERMAL_PARAMS) + caps["hydro"]
    base = 0.62 * thermal_cap
    daily = 0.20 * np.sin(2 * np.pi * (hour - 9) / 24.0)
    seasonal = 0.15 * np.cos(year_angle)
    weekend = np.where(day % 7 >= 5, -0.10, 0.0)
    noise = rng.normal(0.0, 0.01, p)
    demand = base * (1.0 + daily + seasonal + weekend + noise)
    demand = np.maximum(demand, 0.2 * base)

    sun = np.maximum(0.0, np.sin(np.pi * (hour - 6) / 12.0))  # 06:00-18:00 bell
    solar = caps["solar"] * sun ** 1.5 * (0.9 + 0.25 * np.cos(year_angle + np.pi)) \
        * (0.85 + 0.15 * rng.random(p))
    steps = rng.normal(0.0, 0.08, p)
    walk = np.clip(0.35 + np.cumsum(steps) * 0.05 +
                   0.15 * np.sin(2 * np.pi * t / 96.0), 0.05, 0.95)
    wind = caps["wind"] * walk
    others = caps["others_res"] * 0.5
    renewable = np.maximum(solar + wind + others, 0.0)

    inflow_mean = 0.30 * caps["hydro"]
    inflows = inflow_mean * (1.0 + 0.6 * np.cos(year_angle) +
                             0.1 * rng.random(p))
    inflows = np.maximum(inflows, 0.0)
    return demand, renewable, inflows


def emit_scenario_template(outdir, vision: int = 1, days: int = 28,
                           seed: int = 0) -> Path:
    """Write a ready-to-run scenario (CSV series + system + config).

    ``vision`` selects one of four bundled capacity mixes; the hourly series
    are synthetic but deterministic for a given seed.  Returns the path of
    the scenario config file.
    """
    if vision not in VISION_CAPACITY_GW:
        raise ConfigError(f"vision must be one of {sorted(VISION_CAPACITY_GW)}")
    if days < 1:
        raise ConfigError("days must be positive")
    outdir = Path(outdir)
    outdir.mkdir(parents=True, exist_ok=True)
    caps = VISION_CAPACITY_GW[vision]
    demand, renewable, inflows = _template_profiles(days, caps, seed)

    thermal = []
    for tech, (fuel, alpha, beta, gamma, om, qmin_frac) in _THERMAL_PARAMS.items():
        cap = caps[tech]
        thermal.append(ThermalUnit(
            id=tech, bus="hub", fuel_cost=fuel, alpha=alpha, beta=beta,
            gamma=gamma, om_cost=om, q_max=cap, q_min=qmin_frac * cap,
            ramp_10min=0.25 * cap, technology=tech))
    hydro_cap = caps["hydro"]
    reservoir = 120.0 * hydro_cap        # about five days of full output
    storage = [
        StorageUnit(id="hydro", bus="hub", kind=LONG_TERM,
                    w0=0.6 * reservoir, w_min=0.1 * reservoir, w_max=reservoir,
                    w_fin=0.6 * reservoir, efficiency=1.0,
                    q_max=hydro_cap, b_max=0.0, technology="hydro"),
        StorageUnit(id="bess", bus="hub", kind=SHORT_TERM,
                    w0=5.0, w_min=0.0, w_max=10.0, w_fin=5.0, efficiency=0.9,
                    q_max=1.0, b_max=1.0, investable=True,
                    inv_cost=20000.0, epr_max=4.0, epr_min=0.0,
                    technology="battery"),
    ]
    network = Network(buses=["hub"], slack_bus="hub", circuits=[], isf=None)
    config = OperatingConfig(reserve_fraction=0.03, pns_penalty=1000.0,
                             spill_penalty=0.0,
                             initial_commitment={"nuclear": 1})
    system = PowerSystem(thermal=thermal, storage=storage, network=network,
                         config=config)
    problems = validate_system(system)
    if problems:
        raise ConfigError(f"template produced an invalid system: {problems}")

    data = TimeHorizonData(
        nodes=["hub"], storage_ids=["hydro", "bess"],
        demand=demand.reshape(-1, 1),
        renewable_avail=renewable.reshape(-1, 1),
        inflows=np.column_stack([inflows, np.zeros_like(inflows)]))
    data.validate()

    save_system(system, outdir / "system.json")
    save_horizon(data, outdir)
    scenario = ScenarioConfig(
        demand="demand.csv", renewables="renewables.csv", inflows="inflows.csv",
        system="system.json", states=32, rep_days=min(6, days), seed=seed,
        base_dir=str(outdir))
    save_scenario(scenario, outdir / "scenario.json")
    return outdir / "scenario.json"
