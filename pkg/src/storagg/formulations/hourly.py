"""Full-chronology hourly model: the benchmark every reduction is judged by.

Every hour of the horizon is modeled with commitment, startup, reserve,
network, and hourly-chained storage levels, plus an end-of-horizon storage
requirement.  Objective: fuel (fixed-while-committed, startup, and per-GWh
terms), variable O&M, penalty terms for non-served power and spillage, and
the annualized cost of any storage capacity built.
"""

from __future__ import annotations

import numpy as np

from ..milp import MilpModel, GE
from ..system import PowerSystem
from ..timeseries import TimeHorizonData
from .common import (FormulationOutput, add_investment, add_operating_core,
                     add_hourly_levels, add_hourly_startups)


def build_hm(system: PowerSystem, data: TimeHorizonData,
             invest: bool = False) -> FormulationOutput:
    p = data.horizon_hours
    m = MilpModel("hm")
    labels = [f"p{t}" for t in range(p)]
    hours = list(range(p))
    weights = np.ones(p)
    x = add_investment(m, system, invest)
    names = add_operating_core(m, system, labels, data.demand, data.renewable_avail,
                               weights, x, "p", hours)
    add_hourly_startups(m, system, names, labels, weights, index_values=hours)
    w = add_hourly_levels(m, system, names, labels, data.inflows, x, index_values=hours)
    for s in system.storage:
        m.add_con(f"fin_{s.id}", [(w[labels[-1], s.id], 1.0)], GE, s.w_fin)
    meta = {
        "kind": "hm",
        "invest": invest,
        "time_labels": labels,
        "time_weights": [1.0] * p,
        "hours": hours,
        "terminal": "hard",
    }
    return FormulationOutput(model=m, kind="hm", meta=meta)
