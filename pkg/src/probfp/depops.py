"""Binary operations on possibly dependent operands.

When two operands share randomness (their traces mention common
variables), pairwise mass products are wrong. Instead, feasibility of
each pair of focal elements is decided with the solver, each feasible
cell's output range is narrowed by solver-guided bisection, and the
joint masses are left free: linear programs over the marginal
constraints then give the best possible CDF envelope at a set of
thresholds. The envelope is sound for every dependence structure
consistent with the traces.

Solver work is bounded by three knobs: operands are condensed so the
cell grid stays near `cell_budget`, the output range of the whole node
is narrowed once at fine tolerance, and per-cell narrowing spends at
most `query_budget` solver calls (most-massive cells first, coarse
tolerance). Skipping a narrowing step only widens the envelope.
"""

from __future__ import annotations

import functools
import math
from dataclasses import dataclass

import numpy as np
from scipy.optimize import linprog

from .dsarith import DSStructure, FocalElement, PBox, condense, pbox_to_ds
from .intervals import DivisionByZeroInterval, Interval, binop, hull, intersect
from .smt import Result, SolverClient
from .traces import Trace, op_trace, range_fact

WIDE_BOX = Interval(-1e308, 1e308)
LP_SLACK = 1e-9


@dataclass(frozen=True)
class DepOpResult:
    ds: DSStructure
    pbox: PBox
    trace: Trace
    stats: dict


def _cell_box(op: str, xi: Interval, yj: Interval) -> Interval:
    try:
        return binop(op, xi, yj)
    except DivisionByZeroInterval:
        return WIDE_BOX


def _range_facts(tz: Trace, tx: Trace, ty: Trace, xi: Interval, yj: Interval) -> list[str]:
    return list(tz.facts) + [range_fact(tx.result, xi.lo, xi.hi),
                             range_fact(ty.result, yj.lo, yj.hi)]


def lp_bounds(cells: list[tuple[int, int, float, float]],
              x_bounds: list[tuple[float, float]],
              y_bounds: list[tuple[float, float]],
              thresholds: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    """Best-possible CDF envelope over all joint masses with the given marginals.

    cells: (i, j, z_lo, z_hi) per feasible cell; masses of dropped cells are
    forced to zero. x_bounds/y_bounds: per-element mass windows. For each
    threshold v, the upper value maximizes the mass that can sit at or below
    v (cells with z_lo <= v) and the lower value minimizes the mass forced
    at or below v (cells with z_hi <= v).
    """
    n = len(cells)
    lo_out = np.zeros(len(thresholds))
    hi_out = np.zeros(len(thresholds))
    if n == 0:
        return lo_out, hi_out
    z_lo = np.array([c[2] for c in cells])
    z_hi = np.array([c[3] for c in cells])

    rows_eq, vals_eq, rows_ub, vals_ub = [], [], [], []
    for axis, bounds in ((0, x_bounds), (1, y_bounds)):
        for idx, (pmin, pmax) in enumerate(bounds):
            row = np.array([1.0 if c[axis] == idx else 0.0 for c in cells])
            if not row.any():
                if pmin > LP_SLACK:
                    # a marginal element with mass but no feasible cell:
                    # inconsistent inputs, fall back to the trivial envelope
                    rows_eq = None
                    break
                continue
            if pmin == pmax:
                rows_eq.append(row)
                vals_eq.append(pmin)
            else:
                rows_ub.append(row)
                vals_ub.append(pmax)
                rows_ub.append(-row)
                vals_ub.append(-pmin)
        if rows_eq is None:
            break

    p_cap = np.array([min(x_bounds[c[0]][1], y_bounds[c[1]][1]) for c in cells])
    fallback = rows_eq is None
    if not fallback:
        a_eq = np.array(rows_eq) if rows_eq else None
        b_eq = np.array(vals_eq) if rows_eq else None
        a_ub = np.array(rows_ub) if rows_ub else None
        b_ub = np.array(vals_ub) if rows_ub else None
        var_bounds = [(0.0, cap) for cap in p_cap]

    for t_idx, v in enumerate(thresholds):
        can_reach = z_lo <= v
        forced = z_hi <= v
        if fallback:
            hi_out[t_idx] = min(1.0, float(np.sum(p_cap[can_reach])))
            lo_out[t_idx] = 0.0
            continue
        if can_reach.any():
            res = linprog(-can_reach.astype(float), A_ub=a_ub, b_ub=b_ub,
                          A_eq=a_eq, b_eq=b_eq, bounds=var_bounds, method="highs")
            hi_out[t_idx] = -res.fun if res.status == 0 else min(1.0, float(np.sum(p_cap[can_reach])))
        if forced.any():
            res = linprog(forced.astype(float), A_ub=a_ub, b_ub=b_ub,
                          A_eq=a_eq, b_eq=b_eq, bounds=var_bounds, method="highs")
            lo_out[t_idx] = res.fun if res.status == 0 else 0.0

    hi_out = np.maximum.accumulate(np.clip(hi_out + LP_SLACK, 0.0, 1.0))
    lo_out = np.maximum.accumulate(np.clip(lo_out - LP_SLACK, 0.0, 1.0))
    lo_out = np.minimum(lo_out, hi_out)
    return lo_out, hi_out


def _pick_thresholds(boxes: list[Interval], budget: int) -> np.ndarray:
    pts = np.unique(np.array([e for b in boxes for e in (b.lo, b.hi)]))
    if len(pts) <= budget:
        return pts
    idx = np.unique(np.linspace(0, len(pts) - 1, budget).round().astype(int))
    return pts[idx]


def _ds_levels(lo: np.ndarray, hi: np.ndarray, cap: int) -> list[float]:
    levels = np.unique(np.concatenate([lo, hi, [1.0]]))
    levels = levels[levels > LP_SLACK]
    if len(levels) > cap:
        idx = np.unique(np.linspace(0, len(levels) - 1, cap).round().astype(int))
        levels = levels[idx]
    if levels[-1] != 1.0:
        levels = np.append(levels, 1.0)
    return [float(v) for v in levels]


def dep_op(dsx: DSStructure, dsy: DSStructure, op: str, tx: Trace, ty: Trace,
           client: SolverClient, *, cell_budget: int = 400,
           rel_tol: float = 2.0 ** -24, coarse_tol: float = 2.0 ** -8,
           query_budget: int = 6000, threshold_budget: int = 50,
           query_timeout: float = 10.0) -> DepOpResult:
    side = max(2, int(math.isqrt(cell_budget)))
    dsx = condense(dsx, side)
    dsy = condense(dsy, side)
    tz = op_trace(op, tx, ty)
    stats = {"cells": len(dsx) * len(dsy), "feasible": 0, "smt_feasibility": 0,
             "pruned_cells": 0, "queries_before": client.stats["queries"]}

    # feasibility of every operand pair
    pairs = [(i, j) for i in range(len(dsx)) for j in range(len(dsy))]
    shared = tx.shares_variables(ty)
    if not shared:
        feasible = [True] * len(pairs)
    elif tx.result == ty.result:
        # same quantity on both sides: a pair is possible iff ranges meet
        feasible = [dsx.elements[i].interval.intersects(dsy.elements[j].interval)
                    for i, j in pairs]
    else:
        groups = [(tz.vars, _range_facts(tz, tx, ty, dsx.elements[i].interval,
                                         dsy.elements[j].interval))
                  for i, j in pairs]
        answers = client.check_sat_many(groups, timeout=query_timeout)
        feasible = [r is not Result.UNSAT for r in answers]
        stats["smt_feasibility"] = len(groups)

    sat_pairs = [p for p, ok in zip(pairs, feasible) if ok]
    stats["feasible"] = len(sat_pairs)
    if not sat_pairs:
        raise ValueError("no operand pair is feasible; inconsistent traces")

    raw_boxes = {}
    for i, j in sat_pairs:
        raw_boxes[(i, j)] = _cell_box(op, dsx.elements[i].interval,
                                      dsy.elements[j].interval)

    # one fine-tolerance narrowing of the whole node's range
    all_boxes = list(raw_boxes.values())
    global_box = functools.reduce(hull, all_boxes[1:], all_boxes[0])
    pruned_global = client.prune_interval(tz.vars, tz.facts, tz.result,
                                          global_box, rel_tol=rel_tol,
                                          timeout=query_timeout)

    boxes = {}
    for key, box in raw_boxes.items():
        cut = intersect(box, pruned_global)
        boxes[key] = cut if cut is not None else Interval(pruned_global.lo,
                                                          pruned_global.lo)

    # per-cell narrowing, most massive cells first, until the budget runs out
    order = sorted(sat_pairs,
                   key=lambda p: -(dsx.elements[p[0]].p_max * dsy.elements[p[1]].p_max))
    for i, j in order:
        spent = client.stats["queries"] - stats["queries_before"]
        if spent >= query_budget:
            break
        box = boxes[(i, j)]
        if box.width <= pruned_global.width * rel_tol:
            continue
        facts = _range_facts(tz, tx, ty, dsx.elements[i].interval,
                             dsy.elements[j].interval)
        boxes[(i, j)] = client.prune_interval(tz.vars, facts, tz.result, box,
                                              rel_tol=coarse_tol,
                                              timeout=query_timeout)
        stats["pruned_cells"] += 1

    cells = [(i, j, boxes[(i, j)].lo, boxes[(i, j)].hi) for i, j in sat_pairs]
    thresholds = _pick_thresholds(list(boxes.values()), threshold_budget)
    x_bounds = [(el.p_min, el.p_max) for el in dsx.elements]
    y_bounds = [(el.p_min, el.p_max) for el in dsy.elements]
    cdf_lo, cdf_hi = lp_bounds(cells, x_bounds, y_bounds, thresholds)
    pbox = PBox(thresholds, cdf_lo, cdf_hi)

    levels = _ds_levels(cdf_lo, cdf_hi, cap=max(len(dsx), len(dsy), 50))
    ds = pbox_to_ds(pbox, len(levels), levels=levels)
    stats["queries"] = client.stats["queries"] - stats.pop("queries_before")
    return DepOpResult(ds, pbox, tz, stats)
