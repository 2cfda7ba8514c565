"""Symbolic enclosures of accumulated roundoff.

For every node of an arithmetic expression we keep a symbol standing
for the value the machine actually computed there, a range box for that
symbol, and an error form: a sum of terms, each a symbolic coefficient
over those symbols, enclosing (exact value - computed value). Input
rounding, operation rounding, and the cross terms of * and / all become
terms; second-order products are folded into constant-coefficient terms
bounded over the boxes. Maximizing the sum of coefficient magnitudes
over the boxes then bounds the absolute error, and shrinking the boxes
to high-probability subranges turns the same maximization into a
confidence-conditioned bound.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

from . import intervals as iv
from .intervals import Interval


@dataclass(frozen=True)
class SymExpr:
    kind: str  # var | const | add | sub | mul | div | neg | abs | sgn
    var: str | None = None
    const: Interval | None = None
    args: tuple["SymExpr", ...] = ()

    def __add__(self, other):
        return add_(self, _lift(other))

    def __radd__(self, other):
        return add_(_lift(other), self)

    def __sub__(self, other):
        return sub_(self, _lift(other))

    def __rsub__(self, other):
        return sub_(_lift(other), self)

    def __mul__(self, other):
        return mul_(self, _lift(other))

    def __rmul__(self, other):
        return mul_(_lift(other), self)

    def __truediv__(self, other):
        return div_(self, _lift(other))

    def __rtruediv__(self, other):
        return div_(_lift(other), self)

    def __neg__(self):
        return neg_(self)


def var_(name: str) -> SymExpr:
    return SymExpr("var", var=name)


def const_(lo: float, hi: float | None = None) -> SymExpr:
    return SymExpr("const", const=Interval(lo, lo if hi is None else hi))


def _lift(x) -> SymExpr:
    if isinstance(x, SymExpr):
        return x
    return const_(float(x))


def _is_const(e: SymExpr, value: float | None = None) -> bool:
    if e.kind != "const":
        return False
    if value is None:
        return True
    return e.const.lo == e.const.hi == value


def add_(a: SymExpr, b: SymExpr) -> SymExpr:
    if _is_const(a, 0.0):
        return b
    if _is_const(b, 0.0):
        return a
    if _is_const(a) and _is_const(b):
        if (a.const.lo == a.const.hi and b.const.lo == b.const.hi
                and a.const.lo == -b.const.lo):
            return const_(0.0)  # exact cancellation of point constants
        return SymExpr("const", const=iv.add(a.const, b.const))
    if b.kind == "neg" and b.args[0] == a:
        return const_(0.0)
    if a.kind == "neg" and a.args[0] == b:
        return const_(0.0)
    return SymExpr("add", args=(a, b))


def sub_(a: SymExpr, b: SymExpr) -> SymExpr:
    if _is_const(b, 0.0):
        return a
    if _is_const(a) and _is_const(b):
        return SymExpr("const", const=iv.sub(a.const, b.const))
    return SymExpr("sub", args=(a, b))


def mul_(a: SymExpr, b: SymExpr) -> SymExpr:
    if _is_const(a, 1.0):
        return b
    if _is_const(b, 1.0):
        return a
    if _is_const(a, 0.0) or _is_const(b, 0.0):
        return const_(0.0)
    if _is_const(a) and _is_const(b):
        return SymExpr("const", const=iv.mul(a.const, b.const))
    return SymExpr("mul", args=(a, b))


def div_(a: SymExpr, b: SymExpr) -> SymExpr:
    if _is_const(b, 1.0):
        return a
    if _is_const(a) and _is_const(b):
        return SymExpr("const", const=iv.div(a.const, b.const))
    return SymExpr("div", args=(a, b))


def neg_(a: SymExpr) -> SymExpr:
    if _is_const(a):
        return SymExpr("const", const=iv.neg(a.const))
    if a.kind == "neg":
        return a.args[0]
    return SymExpr("neg", args=(a,))


def abs_(a: SymExpr) -> SymExpr:
    if _is_const(a):
        return SymExpr("const", const=iv.absolute(a.const))
    if a.kind in ("abs", "sgn"):
        return a if a.kind == "abs" else const_(0.0, 1.0)
    if a.kind == "neg":
        return abs_(a.args[0])
    return SymExpr("abs", args=(a,))


def variables(e: SymExpr) -> frozenset[str]:
    if e.kind == "var":
        return frozenset((e.var,))
    out: frozenset[str] = frozenset()
    for a in e.args:
        out |= variables(a)
    return out


def evaluate(e: SymExpr, boxes: dict[str, Interval]) -> Interval:
    """Outward-rounded interval enclosure over the boxes."""
    if e.kind == "var":
        return boxes[e.var]
    if e.kind == "const":
        return e.const
    if e.kind == "neg":
        return iv.neg(evaluate(e.args[0], boxes))
    if e.kind == "abs":
        return iv.absolute(evaluate(e.args[0], boxes))
    if e.kind == "sgn":
        inner = evaluate(e.args[0], boxes)
        lo = -1.0 if inner.lo < 0 else (0.0 if inner.lo == 0 else 1.0)
        hi = 1.0 if inner.hi > 0 else (0.0 if inner.hi == 0 else -1.0)
        return Interval(min(lo, hi), max(lo, hi))
    a = evaluate(e.args[0], boxes)
    b = evaluate(e.args[1], boxes)
    return iv.binop({"add": "+", "sub": "-", "mul": "*", "div": "/"}[e.kind], a, b)


def eval_point(e: SymExpr, point: dict[str, float]) -> float:
    if e.kind == "var":
        return point[e.var]
    if e.kind == "const":
        return e.const.mid
    if e.kind == "neg":
        return -eval_point(e.args[0], point)
    if e.kind == "abs":
        return abs(eval_point(e.args[0], point))
    if e.kind == "sgn":
        return math.copysign(1.0, eval_point(e.args[0], point))
    a = eval_point(e.args[0], point)
    b = eval_point(e.args[1], point)
    if e.kind == "add":
        return a + b
    if e.kind == "sub":
        return a - b
    if e.kind == "mul":
        return a * b
    return a / b


def derivative(e: SymExpr, wrt: str) -> SymExpr:
    if e.kind == "var":
        return const_(1.0) if e.var == wrt else const_(0.0)
    if e.kind == "const":
        return const_(0.0)
    if e.kind == "neg":
        return neg_(derivative(e.args[0], wrt))
    if e.kind == "abs":
        return mul_(SymExpr("sgn", args=(e.args[0],)), derivative(e.args[0], wrt))
    if e.kind == "sgn":
        return const_(0.0)  # flat almost everywhere; enclosure handled via sgn range
    a, b = e.args
    da, db = derivative(a, wrt), derivative(b, wrt)
    if e.kind == "add":
        return add_(da, db)
    if e.kind == "sub":
        return sub_(da, db)
    if e.kind == "mul":
        return add_(mul_(da, b), mul_(a, db))
    return sub_(div_(da, b), div_(mul_(a, db), mul_(b, b)))


def canonical(e: SymExpr) -> str:
    if e.kind == "var":
        return e.var
    if e.kind == "const":
        if e.const.lo == e.const.hi:
            return repr(e.const.lo)
        return f"[{e.const.lo!r},{e.const.hi!r}]"
    if e.kind in ("neg", "abs", "sgn"):
        return f"({e.kind} {canonical(e.args[0])})"
    return f"({e.kind} {canonical(e.args[0])} {canonical(e.args[1])})"


@dataclass(frozen=True)
class ErrorTerm:
    label: str      # identifies the physical rounding event this term tracks
    coeff: SymExpr  # magnitude envelope of that event's contribution


@dataclass(frozen=True)
class ErrorForm:
    """Enclosure of (exact - computed) as a sum over rounding events.

    Each event contributes coeff(s) * d with its own fixed d in [-1, 1],
    so the absolute error is at most the sum of coefficient magnitudes.
    Terms carrying the same label describe the same event: adding forms
    combines their coefficients symbolically, which is what lets shared
    sources cancel (x - x) instead of doubling.
    """
    terms: tuple[ErrorTerm, ...] = ()

    def __add__(self, other: "ErrorForm") -> "ErrorForm":
        merged: dict[str, SymExpr] = {t.label: t.coeff for t in self.terms}
        for t in other.terms:
            if t.label in merged:
                merged[t.label] = add_(merged[t.label], t.coeff)
            else:
                merged[t.label] = t.coeff
        return ErrorForm(tuple(ErrorTerm(lbl, c) for lbl, c in merged.items()
                               if not _is_const(c, 0.0)))

    def negate(self) -> "ErrorForm":
        return ErrorForm(tuple(ErrorTerm(t.label, neg_(t.coeff)) for t in self.terms))

    def scale(self, factor: SymExpr) -> "ErrorForm":
        return ErrorForm(tuple(ErrorTerm(t.label, mul_(factor, t.coeff))
                               for t in self.terms))

    def magnitude_expr(self) -> SymExpr:
        out: SymExpr = const_(0.0)
        for t in self.terms:
            out = add_(out, abs_(t.coeff))
        return out

    def interval_bound(self, boxes: dict[str, Interval]) -> float:
        """Cheap upper bound: plain interval evaluation, no branching."""
        total = 0.0
        for t in self.terms:
            r = iv.absolute(evaluate(t.coeff, boxes))
            total += r.hi
        return total


@dataclass(frozen=True)
class NodeForm:
    symbol: str
    box: Interval
    error: ErrorForm


class FormBuilder:
    """Assembles per-node symbols, boxes, and error forms bottom-up.

    `unit` is the relative rounding step of the target arithmetic; the
    factor unit/(1 - unit) converts it into a bound stated against the
    post-rounding value the symbols stand for.  `underflow_step` is the
    largest magnitude that can flush to zero; adding it to every
    rounding envelope keeps the bound valid below the bottom binade,
    where a purely relative model would lie.
    """

    def __init__(self, unit: float, underflow_step: float = 0.0):
        self.unit = unit
        self.round_factor = unit / (1.0 - unit)
        self.underflow_step = underflow_step
        self.boxes: dict[str, Interval] = {}

    def _register(self, symbol: str, box: Interval) -> None:
        self.boxes[symbol] = box

    def _rounding_coeff(self, symbol: str) -> SymExpr:
        coeff = mul_(const_(self.round_factor), abs_(var_(symbol)))
        return add_(coeff, const_(self.underflow_step))

    def rounded_image(self, raw: Interval) -> Interval:
        """Sound enclosure of round(v) for v in `raw`.

        Above the bottom binade rounding is a relative perturbation; the
        band below it maps onto {0, +/-smallest normal}, which must be
        hulled in explicitly because no relative factor reaches zero.
        """
        factor = Interval(1.0 - self.round_factor, 1.0 + self.round_factor)
        if self.underflow_step == 0.0:
            return iv.mul(raw, factor)
        t_norm = 2.0 * self.underflow_step  # smallest positive normal value
        parts: list[Interval] = []
        if raw.hi >= t_norm:
            parts.append(iv.mul(Interval(max(raw.lo, t_norm), raw.hi), factor))
        if raw.lo <= -t_norm:
            parts.append(iv.mul(Interval(raw.lo, min(raw.hi, -t_norm)), factor))
        if raw.lo < t_norm and raw.hi > -t_norm:
            inner = Interval(0.0, 0.0)
            if raw.hi > self.underflow_step:
                inner = iv.hull(inner, Interval.point(t_norm))
            if raw.lo < -self.underflow_step:
                inner = iv.hull(inner, Interval.point(-t_norm))
            parts.append(inner)
        out = parts[0]
        for p in parts[1:]:
            out = iv.hull(out, p)
        return out

    def leaf(self, symbol: str, box: Interval, exact: bool = False) -> NodeForm:
        self._register(symbol, box)
        if exact:
            return NodeForm(symbol, box, ErrorForm())
        term = ErrorTerm(f"in:{symbol}", self._rounding_coeff(symbol))
        return NodeForm(symbol, box, ErrorForm((term,)))

    def constant(self, symbol: str, value: float, box: Interval,
                 exact: bool = False) -> NodeForm:
        self._register(symbol, box)
        if exact:
            return NodeForm(symbol, box, ErrorForm())
        coeff = add_(const_(self.round_factor * abs(value)),
                     const_(self.underflow_step))
        return NodeForm(symbol, box, ErrorForm((ErrorTerm(f"const:{symbol}", coeff),)))

    def negate(self, x: NodeForm, symbol: str) -> NodeForm:
        box = iv.neg(x.box)
        self._register(symbol, box)
        return NodeForm(symbol, box, x.error.negate())

    def operate(self, op: str, x: NodeForm, y: NodeForm, symbol: str,
                box: Interval, rounded: bool = True) -> NodeForm:
        """Combine operand forms for op in {+,-,*,/}; box is the enclosure
        of the post-rounding result symbol."""
        self._register(symbol, box)
        if op == "+":
            form = x.error + y.error
        elif op == "-":
            form = x.error + y.error.negate()
        elif op == "*":
            bx = x.error.interval_bound(self.boxes)
            by = y.error.interval_bound(self.boxes)
            form = y.error.scale(var_(x.symbol)) + x.error.scale(var_(y.symbol))
            if bx * by > 0.0:
                form += ErrorForm((ErrorTerm(f"quad:{symbol}", const_(bx * by)),))
        elif op == "/":
            bx = x.error.interval_bound(self.boxes)
            by = y.error.interval_bound(self.boxes)
            ybox = self.boxes[y.symbol]
            ywide = Interval(ybox.lo - by, ybox.hi + by)
            if ywide.lo <= 0.0 <= ywide.hi:
                raise iv.DivisionByZeroInterval(
                    f"denominator range {ywide} may reach zero; "
                    "relative-error form undefined")
            form = x.error.scale(div_(const_(1.0), var_(y.symbol)))
            form += y.error.scale(neg_(div_(var_(x.symbol),
                                            mul_(var_(y.symbol), var_(y.symbol)))))
            if by > 0.0:
                inv2 = iv.absolute(iv.div(Interval(1.0, 1.0), iv.mul(ywide, ywide)))
                xwide = iv.absolute(Interval(self.boxes[x.symbol].lo - bx,
                                             self.boxes[x.symbol].hi + bx))
                inv3 = iv.absolute(iv.div(Interval(1.0, 1.0),
                                          iv.mul(iv.mul(ywide, ywide), ywide)))
                r2 = bx * by * inv2.hi + xwide.hi * by * by * inv3.hi
                form += ErrorForm((ErrorTerm(f"quad:{symbol}", const_(r2)),))
        else:
            raise ValueError(f"unsupported operation {op!r}")
        if rounded:
            form += ErrorForm((ErrorTerm(f"op:{symbol}",
                                         self._rounding_coeff(symbol)),))
        return NodeForm(symbol, box, form)
