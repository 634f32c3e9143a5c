"""Hour-by-hour evaluation of aggregated solutions against the benchmark.

An aggregated solution only carries values per modeled period.  Expansion
maps those values back onto every real hour of the horizon (each hour copies
its governing period), rebuilds storage levels, and exposes the series needed
for error metrics: production, commitment, renewable use and curtailment,
non-served power, storage levels, and prices.

Two storage-level series are kept.  ``storage_level`` accumulates the real
hourly inflows with the expanded charge/discharge decisions, so it shows what
the physical system would experience and is the series screened for bound
violations.  ``storage_level_model`` follows each method's own accounting
(transition shifts for the states family, per-day or checkpoint-anchored
profiles for representative days); the gap between the two is reported.

Prices come from a fix-and-relax pass: integers are pinned at their solved
values, the relaxation is solved as an LP, and the balance-row duals are
divided by each period's hour weight to yield per-hour values.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .milp import (MilpModel, Solution, ScipySolver, fix_and_relax,
                   STATUS_OPTIMAL)
from .system import PowerSystem
from .timeseries import TimeHorizonData
from .aggregation import StateClustering, RepPeriodClustering, TransitionMatrices
from .formulations.common import FormulationOutput

VIOLATION_TOL = 1e-6  # GWh beyond a bound before it counts as a violation


@dataclass
class HourlyExpansion:
    hours: int
    source_labels: list[str]                     # governing model period per hour
    thermal_production: dict[str, np.ndarray]
    commitment: dict[str, np.ndarray]
    storage_discharge: dict[str, np.ndarray]
    storage_charge: dict[str, np.ndarray]
    storage_spill: dict[str, np.ndarray]
    storage_level: dict[str, np.ndarray]         # real-inflow accumulation
    storage_level_model: dict[str, np.ndarray]   # method-consistent accounting
    renewable_use: dict[str, np.ndarray]
    renewable_available: dict[str, np.ndarray]   # availability seen by the model
    pns: dict[str, np.ndarray]
    demand_total: np.ndarray | None = None       # real system demand per hour
    prices: np.ndarray | None = None             # demand-weighted system price
    nodal_prices: dict[str, np.ndarray] | None = None

    def curtailment(self) -> dict[str, np.ndarray]:
        return {n: self.renewable_available[n] - self.renewable_use[n]
                for n in self.renewable_use}

    def level_discrepancy(self) -> float:
        """Largest gap between physical and method-consistent level series."""
        worst = 0.0
        for uid, lvl in self.storage_level.items():
            worst = max(worst, float(np.abs(lvl - self.storage_level_model[uid]).max()))
        return worst


def _symbol_values(registry: dict, values: dict[str, float]) -> dict[str, dict]:
    """Index solution values as {symbol: {index-key: value}}."""
    out: dict[str, dict] = {}
    for name, entry in registry.items():
        sym = entry.get("symbol")
        bucket = out.setdefault(sym, {})
        if sym in ("v", "pns"):
            key = (entry.get("p", entry.get("s")), entry["node"])
        elif sym == "dw":
            key = (entry["s_from"], entry["s_to"], entry["unit"])
        elif sym == "y" and "s_from" in entry:
            key = (entry["s_from"], entry["s_to"], entry["unit"])
        elif sym == "x":
            key = entry["unit"]
        elif sym == "wchk":
            key = (entry["k"], entry["unit"])
        elif sym == "pf":
            key = (entry.get("p", entry.get("s")), entry["circuit"])
        else:
            key = (entry.get("p", entry.get("s")), entry.get("unit"))
        bucket[key] = values.get(name, 0.0)
    return out


def _real_level_series(system: PowerSystem, data: TimeHorizonData,
                       discharge: dict, charge: dict, spill: dict) -> dict[str, np.ndarray]:
    levels: dict[str, np.ndarray] = {}
    for k, s in enumerate(system.storage):
        net = (data.inflows[:, k] + s.efficiency * charge[s.id]
               - discharge[s.id] - spill[s.id])
        levels[s.id] = s.w0 + np.cumsum(net)
    return levels


def _expand_by_source(system: PowerSystem, data: TimeHorizonData, sym: dict,
                      source: np.ndarray, avail_rows: np.ndarray,
                      labels_of_source) -> HourlyExpansion:
    """Copy per-period values onto hours through a source index array."""
    p = data.horizon_hours
    thermal_production = {}
    commitment = {}
    for g in system.thermal:
        q = np.array([sym["q"][(labels_of_source(s), g.id)] for s in source])
        u = np.array([sym["u"][(labels_of_source(s), g.id)] for s in source])
        thermal_production[g.id] = q
        commitment[g.id] = np.round(u)
    discharge, charge, spill = {}, {}, {}
    for s_u in system.storage:
        discharge[s_u.id] = np.array([sym["q"][(labels_of_source(s), s_u.id)] for s in source])
        charge[s_u.id] = np.array([sym["b"][(labels_of_source(s), s_u.id)] for s in source])
        spill[s_u.id] = np.array([sym["sp"][(labels_of_source(s), s_u.id)] for s in source])
    renewable_use, available, pns = {}, {}, {}
    for j, n in enumerate(system.nodes):
        renewable_use[n] = np.array([sym["v"][(labels_of_source(s), n)] for s in source])
        available[n] = avail_rows[source, j]
        pns[n] = np.array([sym["pns"][(labels_of_source(s), n)] for s in source])
    return HourlyExpansion(
        hours=p, source_labels=[""] * p,
        thermal_production=thermal_production, commitment=commitment,
        storage_discharge=discharge, storage_charge=charge, storage_spill=spill,
        storage_level={}, storage_level_model={},
        renewable_use=renewable_use, renewable_available=available, pns=pns,
        demand_total=data.demand.sum(axis=1))


def expand_hm(solution: Solution, fo: FormulationOutput, system: PowerSystem,
              data: TimeHorizonData) -> HourlyExpansion:
    """The benchmark expands onto itself; levels are read straight off."""
    sym = _symbol_values(fo.registry, solution.values)
    source = np.arange(data.horizon_hours)
    exp = _expand_by_source(system, data, sym, source, data.renewable_avail, lambda s: int(s))
    exp.source_labels = [f"p{t}" for t in range(data.horizon_hours)]
    exp.storage_level = _real_level_series(system, data, exp.storage_discharge,
                                           exp.storage_charge, exp.storage_spill)
    exp.storage_level_model = {
        s.id: np.array([sym["w"][(t, s.id)] for t in range(data.horizon_hours)])
        for s in system.storage}
    return exp


def expand_ss(solution: Solution, fo: FormulationOutput, system: PowerSystem,
              data: TimeHorizonData, states: StateClustering) -> HourlyExpansion:
    """Expand a states solution along the chronological state chain."""
    sym = _symbol_values(fo.registry, solution.values)
    assignment = states.assignment
    exp = _expand_by_source(system, data, sym, assignment, states.renewable_avail,
                            lambda s: int(s))
    exp.source_labels = [f"s{s}" for s in assignment]
    exp.storage_level = _real_level_series(system, data, exp.storage_discharge,
                                           exp.storage_charge, exp.storage_spill)
    # method-consistent series: initial level plus the per-transition shifts
    dw = sym.get("dw", {})
    for s_u in system.storage:
        steps = np.zeros(data.horizon_hours)
        for t in range(1, data.horizon_hours):
            steps[t] = dw[(int(assignment[t - 1]), int(assignment[t]), s_u.id)]
        exp.storage_level_model[s_u.id] = s_u.w0 + np.cumsum(steps)
    return exp


def expand_rp(solution: Solution, fo: FormulationOutput, system: PowerSystem,
              data: TimeHorizonData, rp: RepPeriodClustering,
              checkpoints: list[int] | None = None) -> HourlyExpansion:
    """Expand a representative-days solution through the day-cluster map.

    With ``checkpoints`` given (the enhanced variant), the method-consistent
    level series anchors each window at its checkpoint variable and
    accumulates the mapped net injections inside the window; without them it
    concatenates the per-day profiles as solved.
    """
    sym = _symbol_values(fo.registry, solution.values)
    hour_map = rp.hour_map()
    exp = _expand_by_source(system, data, sym, hour_map, data.renewable_avail,
                            lambda s: int(s))
    exp.source_labels = [f"p{h}" for h in hour_map]
    exp.storage_level = _real_level_series(system, data, exp.storage_discharge,
                                           exp.storage_charge, exp.storage_spill)
    p = data.horizon_hours
    if checkpoints is None:
        for s_u in system.storage:
            exp.storage_level_model[s_u.id] = np.array(
                [sym["w"][(int(h), s_u.id)] for h in hour_map])
    else:
        wchk = sym.get("wchk", {})
        for k_s, s_u in enumerate(system.storage):
            mapped_net = (data.inflows[hour_map, k_s]
                          + s_u.efficiency * exp.storage_charge[s_u.id]
                          - exp.storage_discharge[s_u.id]
                          - exp.storage_spill[s_u.id])
            level = np.empty(p)
            prev_value, prev_hour = s_u.w0, 0
            for k in checkpoints:
                seg = mapped_net[prev_hour:k]
                level[prev_hour:k] = prev_value + np.cumsum(seg)
                prev_value = wchk[(int(k), s_u.id)]
                # the chained checkpoint equals the accumulated value by construction
                prev_hour = k
            exp.storage_level_model[s_u.id] = level
    return exp


def expand_solution(fo: FormulationOutput, solution: Solution, system: PowerSystem,
                    data: TimeHorizonData, states: StateClustering | None = None,
                    rp: RepPeriodClustering | None = None) -> HourlyExpansion:
    """Dispatch to the right expansion for a formulation kind."""
    kind = fo.kind
    if kind == "hm":
        return expand_hm(solution, fo, system, data)
    if kind in ("ss", "ss_rfm"):
        if states is None:
            raise ValueError(f"expanding {kind!r} needs the state clustering")
        return expand_ss(solution, fo, system, data, states)
    if kind == "rp":
        if rp is None:
            raise ValueError("expanding 'rp' needs the day clustering")
        return expand_rp(solution, fo, system, data, rp)
    if kind == "rp_tmci":
        if rp is None:
            raise ValueError("expanding 'rp_tmci' needs the day clustering")
        return expand_rp(solution, fo, system, data, rp,
                         checkpoints=fo.meta.get("checkpoints"))
    raise ValueError(f"unknown formulation kind {kind!r}")


# ---------------------------------------------------------------------------
# violations
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class ViolationRecord:
    unit: str
    hour: int
    amount: float    # GWh beyond the effective bound
    side: str        # "above" or "below"


def detect_violations(expansion: HourlyExpansion, system: PowerSystem,
                      investment: dict[str, float] | None = None,
                      tol: float = VIOLATION_TOL) -> list[ViolationRecord]:
    """Screen the physical level series against the effective bounds.

    Bounds include any invested capacity: floor w_min + epr_min * x, ceiling
    w_max + epr_max * x.  Both bounds are closed; only excursions beyond
    ``tol`` GWh are reported.
    """
    investment = investment or {}
    records: list[ViolationRecord] = []
    for s in system.storage:
        x = float(investment.get(s.id, 0.0))
        lo = s.w_min + s.epr_min * x
        hi = s.w_max + s.epr_max * x
        level = expansion.storage_level[s.id]
        over = level - hi
        under = lo - level
        for t in np.flatnonzero(over > tol):
            records.append(ViolationRecord(s.id, int(t), float(over[t]), "above"))
        for t in np.flatnonzero(under > tol):
            records.append(ViolationRecord(s.id, int(t), float(under[t]), "below"))
    return records


# ---------------------------------------------------------------------------
# prices
# ---------------------------------------------------------------------------

def compute_prices(fo: FormulationOutput, solution: Solution,
                   check_degeneracy: bool = False) -> tuple[dict, dict]:
    """Fix integers, relax, and read balance duals as per-hour prices.

    Returns ({(period label, node): price}, info).  The dual of a period's
    balance row is divided by the period's hour weight, so a composite period
    standing for many hours still yields a per-hour price.  With
    ``check_degeneracy`` the LP is re-solved by an interior-point method and
    disagreeing duals flag a degenerate (non-unique) price vector.
    """
    if fo.model is None:
        raise ValueError("pricing needs the built model, not just a registry")
    relaxed = fix_and_relax(fo.model, solution)
    adapter = ScipySolver()
    lp = adapter.solve_lp(relaxed)
    info = {"status": lp.status, "degenerate": False}
    if lp.status != STATUS_OPTIMAL or lp.duals is None:
        return {}, info
    labels = fo.meta["time_labels"]
    weight_of = {lab: float(w) for lab, w in zip(labels, fo.meta["time_weights"])}
    nodes = _nodes_from_registry(fo.registry)
    nodes_prices: dict = {}
    for label in labels:
        for n in nodes:
            row = f"bal_{label}_{n}"
            if row in lp.duals:
                nodes_prices[(label, n)] = lp.duals[row] / weight_of[label]
    if check_degeneracy:
        alt = adapter.solve_lp(relaxed, method="highs-ipm")
        if alt.status == STATUS_OPTIMAL and alt.duals:
            for (label, n), price in nodes_prices.items():
                other = alt.duals.get(f"bal_{label}_{n}")
                if other is None:
                    continue
                if abs(other / weight_of[label] - price) > 1e-4 * max(1.0, abs(price)):
                    info["degenerate"] = True
                    break
    return nodes_prices, info


def _nodes_from_registry(registry: dict) -> list[str]:
    nodes = []
    for entry in registry.values():
        if entry.get("symbol") == "pns" and entry["node"] not in nodes:
            nodes.append(entry["node"])
    return nodes


def attach_prices(expansion: HourlyExpansion, system: PowerSystem,
                  data: TimeHorizonData, period_prices: dict) -> None:
    """Map per-period nodal prices onto hours through the source labels.

    The system price per hour weights nodes by their real demand (equal
    weights when the hour has no demand at all).
    """
    p = expansion.hours
    nodal = {n: np.zeros(p) for n in system.nodes}
    for t, label in enumerate(expansion.source_labels):
        for n in system.nodes:
            nodal[n][t] = period_prices.get((label, n), 0.0)
    system_price = np.zeros(p)
    for t in range(p):
        d = data.demand[t]
        total = d.sum()
        if total > 0:
            system_price[t] = sum(nodal[n][t] * d[j] for j, n in enumerate(system.nodes)) / total
        else:
            system_price[t] = np.mean([nodal[n][t] for n in system.nodes])
    expansion.nodal_prices = nodal
    expansion.prices = system_price


# ---------------------------------------------------------------------------
# startups and case assembly
# ---------------------------------------------------------------------------

def count_startups(fo: FormulationOutput, solution: Solution,
                   matrices: TransitionMatrices | None = None) -> dict[str, float]:
    """Horizon startup totals per thermal unit.

    Hour-based models sum the startup indicators weighted by the hours each
    modeled period stands for; the states family weights each transition's
    indicator by the number of times that transition occurs.
    """
    totals: dict[str, float] = {}
    if fo.kind in ("ss", "ss_rfm"):
        if matrices is None:
            raise ValueError("counting states-family startups needs the transition matrix")
        n = matrices.transitions
        for name, entry in fo.registry.items():
            if entry.get("symbol") == "y":
                count = float(n[entry["s_from"], entry["s_to"]])
                totals[entry["unit"]] = totals.get(entry["unit"], 0.0) + \
                    count * round(solution.values.get(name, 0.0))
        return totals
    weight_of = dict(zip(fo.meta["time_labels"], fo.meta["time_weights"]))
    for name, entry in fo.registry.items():
        if entry.get("symbol") == "y":
            label = f"p{entry['p']}"
            totals[entry["unit"]] = totals.get(entry["unit"], 0.0) + \
                float(weight_of[label]) * round(solution.values.get(name, 0.0))
    return totals


def investment_values(fo: FormulationOutput, solution: Solution) -> dict[str, float]:
    out = {}
    for name, entry in fo.registry.items():
        if entry.get("symbol") == "x":
            out[entry["unit"]] = solution.values.get(name, 0.0)
    return out


@dataclass
class CaseResult:
    """Everything one solved formulation contributes to a comparison."""

    kind: str
    objective: float
    wall_seconds: float
    expansion: HourlyExpansion
    startups: dict[str, float]
    investment: dict[str, float]
    violations: list[ViolationRecord] = field(default_factory=list)
    price_info: dict = field(default_factory=dict)
    terminal: str = "hard"

    @property
    def violation_count(self) -> int:
        return len(self.violations)

    @property
    def violation_max(self) -> float:
        return max((v.amount for v in self.violations), default=0.0)


def build_case_result(fo: FormulationOutput, solution: Solution, system: PowerSystem,
                      data: TimeHorizonData, states: StateClustering | None = None,
                      rp: RepPeriodClustering | None = None,
                      matrices: TransitionMatrices | None = None,
                      with_prices: bool = True,
                      check_degeneracy: bool = False) -> CaseResult:
    expansion = expand_solution(fo, solution, system, data, states=states, rp=rp)
    investment = investment_values(fo, solution)
    price_info: dict = {}
    if with_prices and fo.model is not None:
        period_prices, price_info = compute_prices(fo, solution,
                                                   check_degeneracy=check_degeneracy)
        if period_prices:
            attach_prices(expansion, system, data, period_prices)
    return CaseResult(
        kind=fo.kind,
        objective=float(solution.objective),
        wall_seconds=solution.wall_seconds,
        expansion=expansion,
        startups=count_startups(fo, solution, matrices=matrices),
        investment=investment,
        violations=detect_violations(expansion, system, investment),
        price_info=price_info,
        terminal=fo.meta.get("terminal", "hard"))


# ---------------------------------------------------------------------------
# comparison report
# ---------------------------------------------------------------------------

@dataclass
class EvaluationReport:
    benchmark_kind: str
    candidate_kind: str
    objective_error_pct: float
    production_error_pct: dict[str, float]
    startup_error_pct: dict[str, float]
    price_avg_error_pct: float | None
    price_max_error_pct: float | None
    price_min_error_pct: float | None
    price_avg_load_weighted_error_pct: float | None
    curtailment_error_pct: float
    investment_error_pct: dict[str, float]
    violation_count: int
    violation_max_gwh: float
    time_ratio: float
    level_discrepancy_gwh: float
    absolute_metrics: list[str]
    terminal: str

    def rows(self) -> list[tuple[str, float]]:
        """Flat (metric, value) pairs for tabular output."""
        out = [("objective_error_pct", self.objective_error_pct)]
        out += [(f"production_error_pct[{k}]", v) for k, v in self.production_error_pct.items()]
        out += [(f"startup_error_pct[{k}]", v) for k, v in self.startup_error_pct.items()]
        for label, v in (("price_avg_error_pct", self.price_avg_error_pct),
                         ("price_max_error_pct", self.price_max_error_pct),
                         ("price_min_error_pct", self.price_min_error_pct),
                         ("price_avg_load_weighted_error_pct",
                          self.price_avg_load_weighted_error_pct)):
            if v is not None:
                out.append((label, v))
        out.append(("curtailment_error_pct", self.curtailment_error_pct))
        out += [(f"investment_error_pct[{k}]", v) for k, v in self.investment_error_pct.items()]
        out += [("violation_count", float(self.violation_count)),
                ("violation_max_gwh", self.violation_max_gwh),
                ("time_ratio", self.time_ratio),
                ("level_discrepancy_gwh", self.level_discrepancy_gwh)]
        return out


def _error_pct(bench: float, cand: float, metric: str, absolute: list[str]) -> float:
    """Signed error with the benchmark in the denominator.

    Positive means the candidate underestimates the benchmark.  A zero
    benchmark switches the cell to a plain difference and flags the metric.
    """
    if bench == 0.0:
        absolute.append(metric)
        return bench - cand
    return 100.0 * (bench - cand) / bench


def _annual_production_by_tech(case: CaseResult, system: PowerSystem) -> dict[str, float]:
    out: dict[str, float] = {}
    for g in system.thermal:
        out[g.technology] = out.get(g.technology, 0.0) + \
            float(case.expansion.thermal_production[g.id].sum())
    for s in system.storage:
        out[s.technology] = out.get(s.technology, 0.0) + \
            float(case.expansion.storage_discharge[s.id].sum())
    out["renewable"] = float(sum(arr.sum() for arr in case.expansion.renewable_use.values()))
    return out


def _startups_by_tech(case: CaseResult, system: PowerSystem) -> dict[str, float]:
    out: dict[str, float] = {}
    for g in system.thermal:
        out[g.technology] = out.get(g.technology, 0.0) + case.startups.get(g.id, 0.0)
    return out


def compare(benchmark: CaseResult, candidate: CaseResult,
            system: PowerSystem) -> EvaluationReport:
    absolute: list[str] = []
    bench_prod = _annual_production_by_tech(benchmark, system)
    cand_prod = _annual_production_by_tech(candidate, system)
    production = {tech: _error_pct(bench_prod[tech], cand_prod.get(tech, 0.0),
                                   f"production[{tech}]", absolute)
                  for tech in bench_prod}
    bench_st = _startups_by_tech(benchmark, system)
    cand_st = _startups_by_tech(candidate, system)
    startups = {tech: _error_pct(bench_st[tech], cand_st.get(tech, 0.0),
                                 f"startups[{tech}]", absolute)
                for tech in bench_st}
    price_avg = price_max = price_min = price_lw = None
    if benchmark.expansion.prices is not None and candidate.expansion.prices is not None:
        bp, cp = benchmark.expansion.prices, candidate.expansion.prices
        price_avg = _error_pct(float(bp.mean()), float(cp.mean()), "price_avg", absolute)
        price_max = _error_pct(float(bp.max()), float(cp.max()), "price_max", absolute)
        price_min = _error_pct(float(bp.min()), float(cp.min()), "price_min", absolute)
        load = benchmark.expansion.demand_total
        if load is not None and load.sum() > 0:
            price_lw = _error_pct(float((bp * load).sum() / load.sum()),
                                  float((cp * load).sum() / load.sum()),
                                  "price_avg_load_weighted", absolute)
    bench_curt = float(sum(arr.sum() for arr in benchmark.expansion.curtailment().values()))
    cand_curt = float(sum(arr.sum() for arr in candidate.expansion.curtailment().values()))
    curtailment = _error_pct(bench_curt, cand_curt, "curtailment", absolute)
    investment = {}
    for uid in sorted(set(benchmark.investment) | set(candidate.investment)):
        investment[uid] = _error_pct(benchmark.investment.get(uid, 0.0),
                                     candidate.investment.get(uid, 0.0),
                                     f"investment[{uid}]", absolute)
    return EvaluationReport(
        benchmark_kind=benchmark.kind,
        candidate_kind=candidate.kind,
        objective_error_pct=_error_pct(benchmark.objective, candidate.objective,
                                       "objective", absolute),
        production_error_pct=production,
        startup_error_pct=startups,
        price_avg_error_pct=price_avg,
        price_max_error_pct=price_max,
        price_min_error_pct=price_min,
        price_avg_load_weighted_error_pct=price_lw,
        curtailment_error_pct=curtailment,
        investment_error_pct=investment,
        violation_count=candidate.violation_count,
        violation_max_gwh=candidate.violation_max,
        time_ratio=(candidate.wall_seconds / benchmark.wall_seconds
                    if benchmark.wall_seconds > 0 else 0.0),
        level_discrepancy_gwh=candidate.expansion.level_discrepancy(),
        absolute_metrics=absolute,
        terminal=candidate.terminal)
