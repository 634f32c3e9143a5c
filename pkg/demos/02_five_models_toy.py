"""All five time representations of the same two-week toy system, solved and
compared against the hourly benchmark.

Run:  python demos/02_five_models_toy.py
"""

import numpy as np

from storagg import (ThermalUnit, StorageUnit, Network, OperatingConfig,
                     PowerSystem, TimeHorizonData, SHORT_TERM,
                     aggregate, build_hm, build_ss, build_ss_rfm, build_rp,
                     build_rp_tmci, solve, build_case_result, compare)

# ------------------------------------------------------------------- system
thermal = [
    ThermalUnit(id="coal", bus="hub", fuel_cost=1.0, alpha=12.0, beta=1.0,
                gamma=30.0, om_cost=0.5, q_max=3.0, q_min=0.8,
                ramp_10min=1.0, technology="coal"),
    ThermalUnit(id="gas", bus="hub", fuel_cost=1.0, alpha=40.0, beta=0.5,
                gamma=10.0, om_cost=0.3, q_max=2.5, q_min=0.3,
                ramp_10min=2.0, technology="gas"),
]
battery = StorageUnit(id="bess", bus="hub", kind=SHORT_TERM, w0=2.0,
                      w_min=0.0, w_max=6.0, w_fin=2.0, efficiency=0.9,
                      q_max=1.5, b_max=1.5, technology="battery")
system = PowerSystem(
    thermal=thermal, storage=[battery],
    network=Network(buses=["hub"], slack_bus="hub", circuits=[], isf=None),
    config=OperatingConfig(reserve_fraction=0.0, pns_penalty=1000.0,
                           spill_penalty=0.0, initial_commitment={"coal": 1}))

# --------------------------------------------------------------------- data
DAYS = 14
P = DAYS * 24
rng = np.random.default_rng(3)
t = np.arange(P)
h, d = t % 24, t // 24
demand = 3.2 + 1.2 * np.sin(2 * np.pi * (h - 10) / 24) \
    - 0.4 * (d % 7 >= 5) + rng.normal(0.0, 0.05, P)
solar = 1.5 * np.clip(np.sin(np.pi * (h - 6) / 12), 0.0, None) ** 2
data = TimeHorizonData(nodes=["hub"], storage_ids=["bess"],
                       demand=demand[:, None],
                       renewable_avail=solar[:, None],
                       inflows=np.zeros((P, 1)))

art = aggregate(data, num_states=10, num_rp=3, seed=0)

# ------------------------------------------------------- build/solve/expand
cases = {}
for kind in ("hm", "ss", "ss_rfm", "rp", "rp_tmci"):
    if kind == "hm":
        fo = build_hm(system, data)
        extra = {}
    elif kind in ("ss", "ss_rfm"):
        builder = build_ss if kind == "ss" else build_ss_rfm
        fo = builder(system, art.states, art.matrices)
        extra = {"states": art.states, "matrices": art.matrices}
    elif kind == "rp":
        fo = build_rp(system, data, art.rp)
        extra = {"rp": art.rp}
    else:
        fo = build_rp_tmci(system, data, art.rp, art.matrices, window=168)
        extra = {"rp": art.rp, "matrices": art.matrices}
    sol = solve(fo.model)
    assert sol.ok, (kind, sol.status)
    cases[kind] = build_case_result(fo, sol, system, data, **extra)
    print(f"{kind:8s} {fo.model.num_vars:6d} vars  obj {sol.objective:10.1f}  "
          f"{sol.wall_seconds:6.2f}s  violations "
          f"{cases[kind].violation_count}")

# -------------------------------------------------------------- comparison
print("\nerrors vs the hourly benchmark (positive = underestimation):")
hm = cases["hm"]
header = f"{'metric':34s}" + "".join(f"{k:>10s}" for k in cases if k != "hm")
print(header)
reports = {k: compare(hm, c, system) for k, c in cases.items() if k != "hm"}
for metric in ("objective_error_pct", "curtailment_error_pct"):
    row = f"{metric:34s}"
    for k, rep in reports.items():
        row += f"{getattr(rep, metric):10.2f}"
    print(row)
for tech in ("coal", "gas", "battery", "renewable"):
    row = f"production_error_pct[{tech}]{'':>{10 - len(tech)}}"
    row = f"{f'production_error_pct[{tech}]':34s}"
    for k, rep in reports.items():
        row += f"{rep.production_error_pct[tech]:10.2f}"
    print(row)
row = f"{'price_avg_error_pct':34s}"
for k, rep in reports.items():
    v = rep.price_avg_error_pct
    row += f"{v:10.2f}" if v is not None else f"{'-':>10s}"
print(row)
