"""Certified maximization of symbolic expressions over boxes.

Interval branch-and-bound: evaluate an outward-rounded enclosure of the
objective on a box, tighten it with a mean-value form built from
symbolic derivatives, bisect the relatively widest variable, and keep a
priority queue ordered by upper bound.  The returned upper bound is
sound at any stopping point — exhausting the box budget only costs
tightness, never correctness.  An external optimizer can be substituted
through a command hook speaking a one-shot JSON protocol.
"""

from __future__ import annotations

import heapq
import itertools
import json
import shlex
import subprocess
from dataclasses import dataclass

from . import intervals as iv
from .intervals import Interval
from .symform import SymExpr, canonical, derivative, evaluate, variables


class OptimizerError(RuntimeError):
    """The external optimizer command failed or answered malformed data."""


@dataclass(frozen=True)
class MaximizeResult:
    upper: float          # certified: objective <= upper on the whole domain
    lower: float          # certified: the supremum is >= lower
    boxes_processed: int
    converged: bool

    @property
    def gap(self) -> float:
        return self.upper - self.lower


def _enclosure(expr: SymExpr, derivs: dict[str, SymExpr] | None,
               names: tuple[str, ...], box: tuple[Interval, ...]) -> Interval:
    boxes = dict(zip(names, box))
    plain = evaluate(expr, boxes)
    if not derivs:
        return plain
    try:
        mids = {n: Interval.point(b.mid) for n, b in boxes.items()}
        mv = evaluate(expr, mids)
        for n, b in boxes.items():
            if b.lo == b.hi:
                continue
            slope = evaluate(derivs[n], boxes)
            mv = iv.add(mv, iv.mul(slope, iv.sub(b, Interval.point(b.mid))))
    except (iv.DivisionByZeroInterval, OverflowError):
        return plain
    got = iv.intersect(plain, mv)
    return got if got is not None else plain


def maximize_upper(expr: SymExpr, boxes: dict[str, Interval], *,
                   rel_tol: float = 1e-9, abs_tol: float = 0.0,
                   max_boxes: int = 50_000, mean_value: bool = True,
                   optimizer_cmd: str | None = None) -> MaximizeResult:
    """Upper-bound the supremum of `expr` over the given variable boxes.

    Only variables that actually occur in the expression become search
    dimensions; extra entries in `boxes` are ignored.  Deterministic for
    identical inputs.
    """
    names = tuple(sorted(variables(expr)))
    for n in names:
        if n not in boxes:
            raise KeyError(f"no box provided for variable {n!r}")
    if optimizer_cmd is not None:
        return _external_maximize(expr, {n: boxes[n] for n in names}, optimizer_cmd)

    root = tuple(boxes[n] for n in names)
    derivs = {n: derivative(expr, n) for n in names} if mean_value else None
    root_range = _enclosure(expr, derivs, names, root)
    if not names:
        return MaximizeResult(root_range.hi, root_range.lo, 1, True)
    ref_width = tuple(max(b.width, 0.0) for b in root)

    def lower_at_mid(box: tuple[Interval, ...]) -> float:
        pt = tuple(Interval.point(b.mid) for b in box)
        return _enclosure(expr, None, names, pt).lo

    best_lb = max(root_range.lo, lower_at_mid(root))
    retired_ub = -float("inf")  # bound over boxes too small to split further
    counter = itertools.count()
    heap = [(-root_range.hi, next(counter), root)]
    processed = 1

    def tol(ub: float) -> float:
        return max(abs_tol, rel_tol * abs(ub))

    def current_upper() -> float:
        live = -heap[0][0] if heap else -float("inf")
        return max(live, retired_ub, best_lb)

    while heap and processed < max_boxes:
        global_ub = current_upper()
        if global_ub - best_lb <= tol(global_ub):
            return MaximizeResult(global_ub, best_lb, processed, True)
        neg_ub, _, box = heapq.heappop(heap)
        # bisect the dimension that is widest relative to its original width
        scaled = [(b.width / rw if rw > 0.0 else 0.0)
                  for b, rw in zip(box, ref_width)]
        dim = max(range(len(names)), key=lambda i: scaled[i])
        if scaled[dim] <= 0.0:
            retired_ub = max(retired_ub, -neg_ub)
            continue
        cut = box[dim].mid
        if not box[dim].lo < cut < box[dim].hi:
            # no representable interior point left: the bound is final
            retired_ub = max(retired_ub, -neg_ub)
            continue
        for half in (Interval(box[dim].lo, cut), Interval(cut, box[dim].hi)):
            child = box[:dim] + (half,) + box[dim + 1:]
            rng = _enclosure(expr, derivs, names, child)
            processed += 1
            best_lb = max(best_lb, rng.lo, lower_at_mid(child))
            if rng.hi > best_lb:
                heapq.heappush(heap, (-rng.hi, next(counter), child))
    upper = current_upper()
    gap_ok = upper - best_lb <= tol(upper)
    return MaximizeResult(upper, best_lb, processed, gap_ok)


def _external_maximize(expr: SymExpr, boxes: dict[str, Interval],
                       command: str) -> MaximizeResult:
    payload = json.dumps({
        "goal": "max-upper",
        "objective": canonical(expr),
        "variables": {n: [b.lo, b.hi] for n, b in boxes.items()},
    })
    try:
        proc = subprocess.run(shlex.split(command), input=payload,
                              capture_output=True, text=True, check=True)
    except (OSError, subprocess.SubprocessError) as exc:
        raise OptimizerError(f"optimizer command failed: {exc}") from exc
    try:
        reply = json.loads(proc.stdout)
        upper = float(reply["upper"])
    except (ValueError, KeyError, TypeError) as exc:
        raise OptimizerError(
            f"optimizer command returned malformed reply: {proc.stdout!r}") from exc
    lower = float(reply.get("lower", -float("inf")))
    return MaximizeResult(upper, lower, int(reply.get("boxes", 0)), True)
