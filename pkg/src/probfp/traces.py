"""Symbolic computation traces.

A trace records, as SMT-LIB assertions over real variables, how a value
was produced: range facts for inputs and equation facts for arithmetic
nodes.  Traces let a constraint solver decide whether two quantities are
arithmetically dependent (they share variables) and whether a candidate
region for a result is actually reachable.
"""

from __future__ import annotations

import itertools
import math
from dataclasses import dataclass
from fractions import Fraction

_counter = itertools.count()


def fresh_name(prefix: str = "n") -> str:
    return f"{prefix}{next(_counter)}"


def smt_real(x: float | int | Fraction) -> str:
    """Exact SMT-LIB real literal for a float or rational."""
    q = Fraction(x)
    if q.denominator == 1:
        n = q.numerator
        return f"{n}.0" if n >= 0 else f"(- {-n}.0)"
    lit = f"(/ {abs(q.numerator)}.0 {q.denominator}.0)"
    return lit if q >= 0 else f"(- {lit})"


def range_fact(var: str, lo: float, hi: float) -> str:
    parts = []
    if math.isfinite(lo):
        parts.append(f"(<= {smt_real(lo)} {var})")
    if math.isfinite(hi):
        parts.append(f"(<= {var} {smt_real(hi)})")
    if not parts:
        return "true"
    return parts[0] if len(parts) == 1 else f"(and {' '.join(parts)})"


@dataclass(frozen=True)
class Trace:
    result: str
    facts: tuple[str, ...]
    vars: frozenset[str]

    def shares_variables(self, other: "Trace") -> bool:
        return bool(self.vars & other.vars)


def leaf_trace(lo: float, hi: float, name: str | None = None) -> Trace:
    var = name if name is not None else fresh_name("v")
    return Trace(var, (range_fact(var, lo, hi),), frozenset({var}))


def merge_facts(tx: Trace, ty: Trace) -> tuple[str, ...]:
    seen = set(tx.facts)
    return tx.facts + tuple(f for f in ty.facts if f not in seen)


def op_fact(op: str, z: str, x: str, y: str) -> str:
    if op == "+":
        return f"(= {z} (+ {x} {y}))"
    if op == "-":
        return f"(= {z} (- {x} {y}))"
    if op == "*":
        return f"(= {z} (* {x} {y}))"
    if op == "/":
        # product form keeps the constraint polynomial for the solver
        return f"(and (not (= {y} 0.0)) (= (* {y} {z}) {x}))"
    raise ValueError(f"unknown operation {op!r}")


def op_trace(op: str, tx: Trace, ty: Trace, result: str | None = None) -> Trace:
    z = result if result is not None else fresh_name("n")
    facts = merge_facts(tx, ty) + (op_fact(op, z, tx.result, ty.result),)
    return Trace(z, facts, tx.vars | ty.vars | {z})
