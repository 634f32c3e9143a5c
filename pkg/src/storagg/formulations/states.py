"""System-states family: hours collapse into weighted composite hours.

Operating decisions are taken once per state and weighted by how many hours
the state represents.  Chronology survives through the transition counts:
startup indicators exist per observed state-to-state move and are charged
once per occurrence, and storage is tracked by per-transition level shifts
(the mean of the net injections of the two states straddling the move).
Cumulative-count matrices bound the reconstructed storage level at checkpoint
hours; the reduced variant applies those bounds per window between
checkpoints for short-cycling storage, which is cheaper but only limits the
net change within each window.

Constraint prefixes added here (see ``common`` for the shared core):
``dwdef`` per-transition level shift, ``endlo``/``endhi`` end-of-horizon
level, ``chklo``/``chkhi`` cumulative checkpoint bounds, ``winlo``/``winhi``
per-window bounds.
"""

from __future__ import annotations

import numpy as np

from ..milp import MilpModel, LE, GE, EQ
from ..system import PowerSystem, StorageUnit
from ..aggregation import StateClustering, TransitionMatrices
from .common import FormulationOutput, add_investment, add_operating_core


def _state_family(system: PowerSystem, states: StateClustering,
                  matrices: TransitionMatrices, invest: bool, kind: str) -> FormulationOutput:
    s_count = states.num_states
    trans = matrices.transitions
    m = MilpModel(kind)
    labels = [f"s{s}" for s in range(s_count)]
    weights = states.durations.astype(float)
    x = add_investment(m, system, invest)
    names = add_operating_core(m, system, labels, states.demand,
                               states.renewable_avail, weights, x,
                               "s", list(range(s_count)))

    pairs = [(a, b) for a in range(s_count) for b in range(s_count) if trans[a, b] > 0]

    # startups are decided per observed transition and paid per occurrence
    y: dict = {}
    for a, b in pairs:
        if a == b:
            continue
        for g in system.thermal:
            y[a, b, g.id] = m.add_var(
                f"y_s{a}_s{b}_{g.id}", ub=1.0, integer=True,
                obj=float(trans[a, b]) * g.startup_cost,
                symbol="y", s_from=a, s_to=b, unit=g.id)
            m.add_con(f"start_s{a}_s{b}_{g.id}",
                      [(names.u[labels[b], g.id], 1.0),
                       (names.u[labels[a], g.id], -1.0),
                       (y[a, b, g.id], -1.0)], LE, 0.0)

    # storage level shift per transition: mean net injection of both states
    dw: dict = {}
    for k, s in enumerate(system.storage):
        for a, b in pairs:
            dw[a, b, s.id] = m.add_var(
                f"dw_s{a}_s{b}_{s.id}", lb=-np.inf, ub=np.inf,
                symbol="dw", s_from=a, s_to=b, unit=s.id)
            terms = [(dw[a, b, s.id], 1.0)]
            for st in (a, b):
                lbl = labels[st]
                terms.append((names.b[lbl, s.id], -0.5 * s.efficiency))
                terms.append((names.q[lbl, s.id], 0.5))
                terms.append((names.sp[lbl, s.id], 0.5))
            rhs = 0.5 * float(states.inflows[a, k] + states.inflows[b, k])
            m.add_con(f"dwdef_s{a}_s{b}_{s.id}", terms, EQ, rhs)

    def bound_rows(tag: str, s: StorageUnit, matrix: np.ndarray, lo_rhs: float, hi_rhs: float):
        """One >= and one <= row over the dw variables weighted by a count matrix."""
        terms_lo = [(dw[a, b, s.id], float(matrix[a, b])) for a, b in pairs if matrix[a, b] > 0]
        terms_hi = list(terms_lo)
        if s.id in x:
            terms_lo.append((x[s.id], -s.epr_min))
            terms_hi.append((x[s.id], -s.epr_max))
        m.add_con(f"{tag}lo_{s.id}", terms_lo, GE, lo_rhs)
        m.add_con(f"{tag}hi_{s.id}", terms_hi, LE, hi_rhs)

    # end-of-horizon level: W0 plus every transition shift, counted
    for s in system.storage:
        bound_rows("end", s, trans, s.w_fin - s.w0, s.w_max - s.w0)

    # checkpoint bounds
    checkpoints = matrices.checkpoints
    for ki, k in enumerate(checkpoints):
        for s in system.storage:
            use_window = kind == "ss_rfm" and s.kind == "short_term"
            matrix = matrices.reduced_frequency[ki] if use_window else matrices.frequency[ki]
            tag = "win" if use_window else "chk"
            terms_lo = [(dw[a, b, s.id], float(matrix[a, b])) for a, b in pairs if matrix[a, b] > 0]
            terms_hi = list(terms_lo)
            if s.id in x:
                terms_lo.append((x[s.id], -s.epr_min))
                terms_hi.append((x[s.id], -s.epr_max))
            m.add_con(f"{tag}lo_k{k}_{s.id}", terms_lo, GE, s.w_min - s.w0)
            m.add_con(f"{tag}hi_k{k}_{s.id}", terms_hi, LE, s.w_max - s.w0)

    meta = {
        "kind": kind,
        "invest": invest,
        "time_labels": labels,
        "time_weights": [float(w) for w in weights],
        "hours": None,
        "terminal": "chain_end",
        "checkpoints": [int(k) for k in checkpoints],
    }
    return FormulationOutput(model=m, kind=kind, meta=meta)


def build_ss(system: PowerSystem, states: StateClustering,
             matrices: TransitionMatrices, invest: bool = False) -> FormulationOutput:
    """States model with cumulative checkpoint bounds for every storage unit."""
    return _state_family(system, states, matrices, invest, "ss")


def build_ss_rfm(system: PowerSystem, states: StateClustering,
                 matrices: TransitionMatrices, invest: bool = False) -> FormulationOutput:
    """States model with per-window bounds for short-term storage.

    Long-term storage keeps the cumulative checkpoint bounds; short-term
    units are bounded window by window (counts of transitions inside each
    window only), which keeps daily cycling representable under many
    checkpoints without tying every checkpoint back to the first hour.
    """
    return _state_family(system, states, matrices, invest, "ss_rfm")
