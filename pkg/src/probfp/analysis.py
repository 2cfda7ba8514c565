"""End-to-end analysis of finite-precision arithmetic over random inputs.

Pipeline per expression node: build a Dempster-Shafer enclosure of the
exact operation (independent product when operand traces share no
variables, SMT-constrained joint when they do), then compose it with a
distribution of the relative rounding perturbation chosen to match the
node's value distribution.  In parallel, a symbolic error form tracks
(exact - computed) per rounding event; maximizing its magnitude over
full node ranges yields a worst-case bound, and over high-probability
subranges a bound that holds with requested confidence.
"""

from __future__ import annotations

import math
import time
from dataclasses import dataclass, field
from fractions import Fraction

import numpy as np

from . import intervals as iv
from .depops import dep_op
from .dists import Distribution, discretize, piecewise, sample
from .dsarith import (DSStructure, FocalElement, PBox, condense, ds_to_pbox,
                      ind_op, pbox_to_ds)
from .errdist import (ErrorDistribution, error_pbox, exact_error_density,
                      hp_error_density, typical_with_slack)
from .formats import FloatFormat, exact_value, round_value
from .intervals import Interval
from .kernels import eval_program
from .optimize import maximize_upper
from .smt import SolverClient, SolverUnavailableError
from .symform import FormBuilder, NodeForm, variables
from .traces import Trace, fresh_name, leaf_trace, op_trace, range_fact


class AnalysisError(RuntimeError):
    """The expression cannot be analyzed under the configured model."""


# ---------------------------------------------------------------- expressions

class Expr:
    pass


@dataclass(frozen=True)
class VarRef(Expr):
    name: str


@dataclass(frozen=True)
class ConstVal(Expr):
    value: float


@dataclass(frozen=True)
class UnaryNeg(Expr):
    arg: Expr


@dataclass(frozen=True)
class BinaryOp(Expr):
    op: str  # + - * /
    left: Expr
    right: Expr


@dataclass(frozen=True)
class Program:
    inputs: dict[str, Distribution]
    expr: Expr
    name: str = "program"


def expr_text(e: Expr) -> str:
    if isinstance(e, VarRef):
        return e.name
    if isinstance(e, ConstVal):
        return repr(e.value)
    if isinstance(e, UnaryNeg):
        return f"(-{expr_text(e.arg)})"
    return f"({expr_text(e.left)} {e.op} {expr_text(e.right)})"


# ---------------------------------------------------------------- configuration

@dataclass(frozen=True)
class AnalysisConfig:
    fmt: FloatFormat
    n_intervals: int = 50          # focal elements kept per node
    err_intervals: int = 15        # focal elements for rounding factors
    confidence: float = 0.99
    solver_cmd: str | None = None
    solver_timeout: float = 60.0
    optimizer_cmd: str | None = None
    exact_constants: bool = False
    gopt_rel_tol: float = 1e-9
    gopt_max_boxes: int = 50_000
    dep_cell_budget: int = 400
    dep_query_budget: int = 6000
    dep_query_timeout: float = 10.0
    error_model: str = "auto"      # auto | exact | hp | typical | interval


# ---------------------------------------------------------------- error models

_EXACT_ENUM_LIMIT = 1 << 22


def _is_pow2(x: float) -> bool:
    if x <= 0.0 or not math.isfinite(x):
        return False
    m, _ = math.frexp(x)
    return m == 0.5


def _ds_to_distribution(ds: DSStructure) -> Distribution:
    """Piecewise-constant density spreading each element's mass uniformly."""
    pts = sorted({float(el.interval.lo) for el in ds.elements}
                 | {float(el.interval.hi) for el in ds.elements})
    if len(pts) < 2:
        raise AnalysisError("degenerate support")
    cells = np.zeros(len(pts) - 1)
    widths = np.diff(pts)
    for el in ds.elements:
        mass = 0.5 * (el.p_min + el.p_max)
        w = el.interval.width
        if mass <= 0.0:
            continue
        if w <= 0.0:
            k = int(np.searchsorted(pts, el.interval.lo, side="right")) - 1
            cells[max(0, min(k, len(cells) - 1))] += mass
            continue
        for k in range(len(cells)):
            overlap = min(pts[k + 1], el.interval.hi) - max(pts[k], el.interval.lo)
            if overlap > 0.0:
                cells[k] += mass * overlap / w
    total = float(cells.sum())
    if total <= 0.0:
        raise AnalysisError("no probability mass on the support")
    dens = cells / total / np.maximum(widths, 1e-300)
    return piecewise(pts, [[float(c)] for c in dens])


def _select_error_model(value_dist: Distribution | None, ds: DSStructure,
                        cfg: AnalysisConfig) -> tuple[ErrorDistribution | None, str]:
    """Pick the rounding-perturbation distribution for one node.

    Returns (distribution, tag); None means the full-width fallback is
    used (perturbation anywhere in its unit range)."""
    fmt = cfg.fmt
    if cfg.error_model == "interval":
        return None, "interval"
    support = value_dist.support if value_dist is not None else ds.support
    if not (math.isfinite(support.lo) and math.isfinite(support.hi)):
        return None, "interval:unbounded"
    if max(abs(support.lo), abs(support.hi)) >= float(fmt.max_finite):
        return None, "interval:overflow-risk"
    if support.width <= 0.0 or support.width < 16.0 * float(fmt.zero_threshold):
        return None, "interval:degenerate"
    try:
        d = value_dist if value_dist is not None else _ds_to_distribution(ds)
    except (AnalysisError, ValueError):
        return None, "interval:no-density"
    if cfg.error_model == "exact" or (
            cfg.error_model == "auto"
            and fmt.count_finite_nonzero() <= _EXACT_ENUM_LIMIT):
        return exact_error_density(d, fmt), "exact"
    if cfg.error_model == "typical" or (
            cfg.error_model == "auto" and fmt.p >= 23
            and value_dist is not None and d.name.startswith("uniform")
            and _is_pow2(support.lo) and _is_pow2(support.hi)
            and support.hi >= 2.0 * support.lo > 0.0):
        return typical_with_slack(d, fmt), "typical"
    return hp_error_density(d, fmt), "hp"


def _factor_ds(e: ErrorDistribution | None, fmt: FloatFormat, k: int) -> DSStructure:
    """DS of the multiplicative rounding factor 1 - t*unit."""
    u = fmt.u
    if e is None:
        box = iv.sub(Interval.point(1.0), iv.scale(Interval(-1.0, 1.0), u))
        return DSStructure.of([FocalElement.known(box.lo, box.hi, 1.0)])
    ds_t = pbox_to_ds(error_pbox(e), k)
    out = []
    for el in ds_t.elements:
        box = iv.sub(Interval.point(1.0), iv.scale(el.interval, u))
        out.append(FocalElement(box, el.p_min, el.p_max))
    return DSStructure.of(out).sorted()


def _widen_flush_band(ds: DSStructure, fmt: FloatFormat) -> DSStructure:
    """Extend elements touching the flush-to-zero band so that a purely
    multiplicative rounding factor still covers rounding onto {0, +/-
    smallest normal}."""
    thr = float(fmt.zero_threshold)
    t_norm = 2.0 * thr
    out = []
    changed = False
    for el in ds.elements:
        a, b = el.interval
        if a < t_norm and b > -t_norm:
            lo, hi = min(a, 0.0), max(b, 0.0)
            if b > thr:
                hi = max(hi, t_norm)
            if a < -thr:
                lo = min(lo, -t_norm)
            if (lo, hi) != (a, b):
                changed = True
                el = FocalElement(Interval(lo, hi), el.p_min, el.p_max)
        out.append(el)
    return DSStructure.of(out) if changed else ds


# ---------------------------------------------------------------- node states

@dataclass
class NodeState:
    symbol: str
    ds: DSStructure       # post-rounding values
    trace: Trace          # SMT facts describing the computed value
    form: NodeForm        # symbolic error enclosure
    kind: str             # input:<x> | const | + - * / | neg
    model: str            # rounding-model tag
    dependent: bool = False
    errdist: ErrorDistribution | None = None  # rounding model, when distributional


@dataclass
class AnalysisResult:
    program: Program
    config: AnalysisConfig
    ds: DSStructure
    pbox: PBox
    support: Interval
    worst_case_bound: float
    error_bound: float
    confidence: float
    nodes: list[NodeState]
    node_ds: dict[str, DSStructure]
    boxes: dict[str, Interval]
    root_form: NodeForm
    solver_stats: dict | None
    timings: dict[str, float]
    gopt_stats: dict[str, object] = field(default_factory=dict)

    def conditional_bound(self, confidence: float) -> float:
        """Bound on |exact - computed| holding with at least the given
        probability under the node models; confidence 1.0 reproduces the
        unconditional worst case."""
        if not 0.0 < confidence <= 1.0:
            raise ValueError("confidence must be in (0, 1]")
        form = self.root_form.error
        used = sorted(variables(form.magnitude_expr()))
        restricted: dict[str, Interval] = {}
        m = sum(1 for s in used if s in self.node_ds)
        for s in used:
            ds = self.node_ds.get(s)
            if ds is None:
                restricted[s] = self.boxes[s]
                continue
            gamma = 1.0 - (1.0 - confidence) / max(m, 1)
            restricted[s] = _high_mass_hull(ds, gamma)
        res = maximize_upper(form.magnitude_expr(), restricted,
                             rel_tol=self.config.gopt_rel_tol,
                             max_boxes=self.config.gopt_max_boxes,
                             optimizer_cmd=self.config.optimizer_cmd)
        return res.upper

    def report(self) -> dict:
        return {
            "program": self.program.name,
            "expression": expr_text(self.program.expr),
            "format": {"p": self.config.fmt.p, "e_min": self.config.fmt.e_min,
                       "e_max": self.config.fmt.e_max,
                       "name": self.config.fmt.name},
            "support": [self.support.lo, self.support.hi],
            "error_bound": self.error_bound,
            "worst_case_bound": self.worst_case_bound,
            "confidence": self.confidence,
            "nodes": [{"symbol": n.symbol, "kind": n.kind, "model": n.model,
                       "support": [n.ds.support.lo, n.ds.support.hi],
                       "elements": len(n.ds), "dependent": n.dependent}
                      for n in self.nodes],
            "solver": self.solver_stats,
            "gopt": self.gopt_stats,
            "timings": self.timings,
        }


def _high_mass_hull(ds: DSStructure, gamma: float) -> Interval:
    """Hull of the most probable focal elements holding mass >= gamma
    (all of them when the target is unreachable)."""
    order = sorted(ds.elements,
                   key=lambda el: (-(el.p_min + el.p_max), abs(el.midpoint),
                                   el.interval.lo, el.interval.hi))
    total = 0.0
    hull: Interval | None = None
    for el in order:
        hull = el.interval if hull is None else iv.hull(hull, el.interval)
        total += 0.5 * (el.p_min + el.p_max)
        if total >= gamma:
            break
    return hull if hull is not None else ds.support


# ---------------------------------------------------------------- the analyzer

def _representable(value: float, fmt: FloatFormat) -> bool:
    if not math.isfinite(value):
        return False
    v = Fraction(value)
    z = round_value(v, fmt)
    if not z.is_finite:
        return False
    return exact_value(z, fmt) == v


def analyze(program: Program, cfg: AnalysisConfig) -> AnalysisResult:
    fmt = cfg.fmt
    fb = FormBuilder(fmt.u, float(fmt.zero_threshold))
    nodes: list[NodeState] = []
    node_ds: dict[str, DSStructure] = {}
    cache: dict[object, NodeState] = {}
    timings = {"discretize": 0.0, "operations": 0.0, "error_models": 0.0,
               "optimize": 0.0, "total": 0.0}
    t_start = time.perf_counter()
    counter = iter(range(1, 1 << 30))
    client_box: list[SolverClient | None] = [None]

    def get_client() -> SolverClient:
        if client_box[0] is None:
            try:
                client_box[0] = SolverClient(cfg.solver_cmd,
                                             timeout=cfg.solver_timeout)
            except SolverUnavailableError as exc:
                raise AnalysisError(
                    "dependent operands need an SMT solver: " + str(exc)) from exc
        return client_box[0]

    def attach_rounding(
            ds_raw: DSStructure, trace_raw: Trace,
            value_dist: Distribution | None,
    ) -> tuple[DSStructure, Trace, str, ErrorDistribution | None]:
        t0 = time.perf_counter()
        model, tag = _select_error_model(value_dist, ds_raw, cfg)
        factor = _factor_ds(model, fmt, cfg.err_intervals)
        timings["error_models"] += time.perf_counter() - t0
        widened = _widen_flush_band(ds_raw, fmt)
        f_sup = factor.support
        f_trace = leaf_trace(f_sup.lo, f_sup.hi, name=fresh_name("rnd"))
        ds_out, trace_out = ind_op(widened, factor, "*", trace_raw, f_trace)
        return condense(ds_out, cfg.n_intervals), trace_out, tag, model

    def make_leaf(name: str, dist: Distribution) -> NodeState:
        sup = dist.support
        if not (math.isfinite(sup.lo) and math.isfinite(sup.hi)):
            raise AnalysisError(
                f"input {name!r} has unbounded support; truncate it first")
        t0 = time.perf_counter()
        base = discretize(dist, cfg.n_intervals, scheme="hybrid")
        timings["discretize"] += time.perf_counter() - t0
        trace = leaf_trace(sup.lo, sup.hi, name=fresh_name(f"in_{name}_"))
        ds, trace, tag, model = attach_rounding(base, trace, dist)
        box = ds.support
        form = fb.leaf(name, box)
        state = NodeState(name, ds, trace, form, f"input:{name}", tag,
                          errdist=model)
        nodes.append(state)
        node_ds[name] = ds
        return state

    def make_const(value: float) -> NodeState:
        symbol = f"c{next(counter)}"
        exact = cfg.exact_constants or _representable(value, fmt)
        z = round_value(Fraction(value), fmt)
        if not z.is_finite:
            raise AnalysisError(f"constant {value!r} overflows the format")
        rounded = float(exact_value(z, fmt)) if not exact else value
        ds = DSStructure.point_mass(rounded)
        trace = leaf_trace(rounded, rounded, name=fresh_name("cst"))
        form = fb.constant(symbol, rounded, Interval.point(rounded), exact=exact)
        state = NodeState(symbol, ds, trace, form, "const",
                          "exact" if exact else "rounded-const")
        nodes.append(state)
        node_ds[symbol] = ds
        return state

    def visit(e: Expr) -> NodeState:
        if isinstance(e, VarRef):
            key: object = ("var", e.name)
        elif isinstance(e, ConstVal):
            key = ("const", e.value)
        elif isinstance(e, UnaryNeg):
            key = ("neg", id(cache_get(e.arg)))
        else:
            key = (e.op, id(cache_get(e.left)), id(cache_get(e.right)))
        if key in cache:
            return cache[key]
        state = build(e)
        cache[key] = state
        return state

    def cache_get(e: Expr) -> NodeState:
        return visit(e)

    def build(e: Expr) -> NodeState:
        if isinstance(e, VarRef):
            if e.name not in program.inputs:
                raise AnalysisError(f"unknown input {e.name!r}")
            return make_leaf(e.name, program.inputs[e.name])
        if isinstance(e, ConstVal):
            return make_const(e.value)
        if isinstance(e, UnaryNeg):
            x = visit(e.arg)
            symbol = f"n{next(counter)}"
            ds = DSStructure.of([FocalElement(iv.neg(el.interval),
                                              el.p_min, el.p_max)
                                 for el in x.ds.elements]).sorted()
            var = fresh_name("neg")
            trace = Trace(var, x.trace.facts + (f"(= {var} (- {x.trace.result}))",),
                          x.trace.vars | {var})
            form = fb.negate(x.form, symbol)
            state = NodeState(symbol, ds, trace, form, "neg", "exact")
            nodes.append(state)
            node_ds[symbol] = ds
            return state
        x = visit(e.left)
        y = visit(e.right)
        symbol = f"n{next(counter)}"
        t0 = time.perf_counter()
        dependent = x.trace.shares_variables(y.trace)
        if dependent:
            res = dep_op(x.ds, y.ds, e.op, x.trace, y.trace, get_client(),
                         cell_budget=cfg.dep_cell_budget,
                         query_budget=cfg.dep_query_budget,
                         query_timeout=cfg.dep_query_timeout)
            ds_raw, trace_raw = res.ds, res.trace
        else:
            try:
                ds_raw, trace_raw = ind_op(x.ds, y.ds, e.op, x.trace, y.trace)
            except iv.DivisionByZeroInterval as exc:
                raise AnalysisError(
                    f"denominator of {expr_text(e)} may be zero") from exc
            ds_raw = condense(ds_raw, cfg.n_intervals)
        timings["operations"] += time.perf_counter() - t0
        ds, trace, tag, model = attach_rounding(ds_raw, trace_raw, None)
        try:
            form = fb.operate(e.op, x.form, y.form, symbol, ds.support)
        except iv.DivisionByZeroInterval as exc:
            raise AnalysisError(
                f"denominator of {expr_text(e)} may reach zero once "
                "rounding errors are included") from exc
        state = NodeState(symbol, ds, trace, form, e.op, tag,
                          dependent=dependent, errdist=model)
        nodes.append(state)
        node_ds[symbol] = ds
        return state

    try:
        root = visit(program.expr)
        solver_stats = dict(client_box[0].stats) if client_box[0] else None
    finally:
        if client_box[0] is not None:
            client_box[0].close()

    result = AnalysisResult(
        program=program, config=cfg, ds=root.ds, pbox=ds_to_pbox(root.ds),
        support=root.ds.support, worst_case_bound=math.nan,
        error_bound=math.nan, confidence=cfg.confidence, nodes=nodes,
        node_ds=node_ds, boxes=dict(fb.boxes), root_form=root.form,
        solver_stats=solver_stats, timings=timings)
    t0 = time.perf_counter()
    result.worst_case_bound = result.conditional_bound(1.0)
    result.error_bound = (result.worst_case_bound if cfg.confidence >= 1.0
                          else result.conditional_bound(cfg.confidence))
    timings["optimize"] = time.perf_counter() - t0
    timings["total"] = time.perf_counter() - t_start
    return result


# ---------------------------------------------------------------- simulation

def compile_program(expr: Expr, input_index: dict[str, int],
                    fmt: FloatFormat, exact_constants: bool = False) -> list:
    """Flatten to the stack form the sampling kernels execute."""
    code: list[tuple] = []

    def walk(e: Expr) -> None:
        if isinstance(e, VarRef):
            code.append(("load", input_index[e.name]))
        elif isinstance(e, ConstVal):
            op = "constx" if exact_constants or _representable(e.value, fmt) \
                else "const"
            code.append((op, e.value))
        elif isinstance(e, UnaryNeg):
            walk(e.arg)
            code.append(("neg", None))
        else:
            walk(e.left)
            walk(e.right)
            code.append(({"+": "add", "-": "sub", "*": "mul", "/": "div"}[e.op],
                         None))

    walk(expr)
    return code


def run_samples(program: Program, fmt: FloatFormat, n: int, seed: int,
                exact_constants: bool = False) -> tuple[np.ndarray, np.ndarray]:
    """Monte-Carlo run: (computed values, |reference - computed| errors).

    The reference runs in plain double precision, which stands in for
    exact arithmetic only when the target format is far coarser.
    """
    if 2 * fmt.p + 2 >= 52:
        raise AnalysisError(
            "no extended-precision reference available for formats this fine")
    names = list(program.inputs)
    arrays = [sample(program.inputs[name], seed + 7919 * i, n)
              for i, name in enumerate(names)]
    code = compile_program(program.expr, {nm: i for i, nm in enumerate(names)},
                           fmt, exact_constants)
    computed = eval_program(code, arrays, fmt.p, fmt.e_min, fmt.e_max,
                            rounded=True)
    reference = eval_program(code, arrays, fmt.p, fmt.e_min, fmt.e_max,
                             rounded=False)
    return computed, np.abs(reference - computed)
