"""Text front end for analysis programs.

Native format, one statement per line (``#`` starts a comment):

    x ~ uniform(1, 2)          # input declarations
    y ~ normal(0, 1) in [-4, 4]
    t = x + y                  # named intermediates (optional)
    z = (t * t) / y            # the last assignment is the output

Distributions: uniform(a,b), normal(mu,sigma), laplace(mu,b),
exponential(rate), rayleigh(sigma), beta(a,b); an optional ``in [a,b]``
truncates the distribution to that range.  Bare names use the range:
``uniform in [a,b]`` spans it, ``normal in [a,b]`` is centred on its
midpoint with unit scale, and ``exp``/``laplace in [a,b]`` are centred
Laplace with scale 0.01.

An importer for straight-line four-operation expressions in the
s-expression benchmark interchange format is also provided.
"""

from __future__ import annotations

import re
from dataclasses import dataclass

from .analysis import BinaryOp, ConstVal, Expr, Program, UnaryNeg, VarRef
from .dists import Distribution, make_builtin, truncate

__all__ = ["ParseError", "parse_program", "parse_sexpr_benchmark"]


class ParseError(ValueError):
    def __init__(self, message: str, line: int, col: int):
        super().__init__(f"line {line}, col {col}: {message}")
        self.message = message
        self.line = line
        self.col = col


_TRANSCENDENTALS = {"sin", "cos", "tan", "asin", "acos", "atan", "atan2",
                    "exp", "log", "log2", "log10", "pow", "sqrt", "cbrt",
                    "sinh", "cosh", "tanh", "fma", "hypot", "expm1", "log1p"}

_DIST_ARITY = {"uniform": 2, "normal": 2, "laplace": 2, "exponential": 1,
               "rayleigh": 1, "beta": 2}


@dataclass(frozen=True)
class _Token:
    kind: str   # ident | number | punct | end
    text: str
    line: int
    col: int


_TOKEN_RE = re.compile(r"""
    (?P<ident>[A-Za-z_][A-Za-z0-9_]*)
  | (?P<number>(?:\d+\.?\d*|\.\d+)(?:[eE][+-]?\d+)?)
  | (?P<punct>[~=+\-*/()\[\],])
  | (?P<ws>[ \t]+)
  | (?P<bad>.)
""", re.VERBOSE)


def _tokenize_line(text: str, line_no: int) -> list[_Token]:
    out: list[_Token] = []
    body = text.split("#", 1)[0]
    for m in _TOKEN_RE.finditer(body):
        kind = m.lastgroup
        if kind == "ws":
            continue
        if kind == "bad":
            raise ParseError(f"unexpected character {m.group()!r}",
                             line_no, m.start() + 1)
        out.append(_Token(kind, m.group(), line_no, m.start() + 1))
    out.append(_Token("end", "", line_no, len(body) + 1))
    return out


class _LineParser:
    """Recursive descent over one statement's tokens."""

    def __init__(self, tokens: list[_Token], known: dict[str, Expr]):
        self.tokens = tokens
        self.pos = 0
        self.known = known

    def peek(self) -> _Token:
        return self.tokens[self.pos]

    def take(self) -> _Token:
        tok = self.tokens[self.pos]
        if tok.kind != "end":
            self.pos += 1
        return tok

    def expect(self, text: str) -> _Token:
        tok = self.take()
        if tok.text != text:
            got = repr(tok.text) if tok.kind != "end" else "end of line"
            raise ParseError(f"expected {text!r}, got {got}", tok.line, tok.col)
        return tok

    def fail(self, message: str) -> ParseError:
        tok = self.peek()
        return ParseError(message, tok.line, tok.col)

    def number(self) -> float:
        sign = 1.0
        if self.peek().text == "-":
            self.take()
            sign = -1.0
        tok = self.take()
        if tok.kind != "number":
            raise ParseError("expected a number", tok.line, tok.col)
        return sign * float(tok.text)

    # expression grammar: sum -> product -> signed atom
    def expression(self) -> Expr:
        node = self.product()
        while self.peek().text in ("+", "-"):
            op = self.take().text
            node = BinaryOp(op, node, self.product())
        return node

    def product(self) -> Expr:
        node = self.signed_atom()
        while self.peek().text in ("*", "/"):
            op = self.take().text
            node = BinaryOp(op, node, self.signed_atom())
        return node

    def signed_atom(self) -> Expr:
        if self.peek().text == "-":
            self.take()
            return UnaryNeg(self.signed_atom())
        return self.atom()

    def atom(self) -> Expr:
        tok = self.take()
        if tok.text == "(":
            node = self.expression()
            self.expect(")")
            return node
        if tok.kind == "number":
            return ConstVal(float(tok.text))
        if tok.kind == "ident":
            if self.peek().text == "(":
                if tok.text in _TRANSCENDENTALS:
                    raise ParseError("transcendentals unsupported; only "
                                     "+ - * / are available",
                                     tok.line, tok.col)
                raise ParseError(f"unsupported function {tok.text!r}",
                                 tok.line, tok.col)
            if tok.text not in self.known:
                raise ParseError(f"undeclared variable {tok.text!r}",
                                 tok.line, tok.col)
            return self.known[tok.text]
        got = repr(tok.text) if tok.kind != "end" else "end of line"
        raise ParseError(f"expected a value, got {got}", tok.line, tok.col)

    def at_end(self) -> bool:
        return self.peek().kind == "end"


def _build_distribution(name: str, params: list[float] | None,
                        bounds: tuple[float, float] | None,
                        tok: _Token) -> Distribution:
    kind = "laplace" if name == "exp" else name
    if kind not in _DIST_ARITY:
        raise ParseError(f"unknown distribution {name!r} (choose from "
                         f"{', '.join(sorted(_DIST_ARITY))})", tok.line, tok.col)
    if params is None:
        if bounds is None:
            raise ParseError(f"bare {name!r} needs a range: write "
                             f"'{name} in [a, b]'", tok.line, tok.col)
        mid = 0.5 * (bounds[0] + bounds[1])
        if kind == "uniform":
            params = [bounds[0], bounds[1]]
            bounds = None
        elif kind == "normal":
            params = [mid, 1.0]
        elif kind == "laplace":
            params = [mid, 0.01]
        else:
            raise ParseError(f"bare {name!r} has no default parameters",
                             tok.line, tok.col)
    if len(params) != _DIST_ARITY[kind]:
        raise ParseError(f"{name} takes {_DIST_ARITY[kind]} parameter(s), "
                         f"got {len(params)}", tok.line, tok.col)
    try:
        return make_builtin(kind, params, truncation=bounds)
    except ValueError as exc:
        raise ParseError(str(exc), tok.line, tok.col) from exc


def _parse_declaration(lp: _LineParser, name_tok: _Token) -> Distribution:
    dist_tok = lp.take()
    if dist_tok.kind != "ident":
        raise ParseError("expected a distribution name",
                         dist_tok.line, dist_tok.col)
    params: list[float] | None = None
    if lp.peek().text == "(":
        lp.take()
        params = []
        if lp.peek().text != ")":
            params.append(lp.number())
            while lp.peek().text == ",":
                lp.take()
                params.append(lp.number())
        lp.expect(")")
    bounds: tuple[float, float] | None = None
    if lp.peek().text == "in":
        lp.take()
        lp.expect("[")
        lo = lp.number()
        lp.expect(",")
        hi = lp.number()
        lp.expect("]")
        if not hi > lo:
            raise ParseError("range needs a < b", name_tok.line, name_tok.col)
        bounds = (lo, hi)
    return _build_distribution(dist_tok.text, params, bounds, dist_tok)


def parse_program(text: str, name: str = "program") -> Program:
    """Parse the native format into an analyzable program."""
    inputs: dict[str, Distribution] = {}
    known: dict[str, Expr] = {}
    last_expr: Expr | None = None
    for line_no, raw in enumerate(text.splitlines(), start=1):
        tokens = _tokenize_line(raw, line_no)
        if tokens[0].kind == "end":
            continue
        name_tok = tokens[0]
        if name_tok.kind != "ident":
            raise ParseError("statement must start with a name",
                             name_tok.line, name_tok.col)
        lp = _LineParser(tokens, known)
        lp.take()
        sep = lp.take()
        if name_tok.text in known:
            raise ParseError(f"{name_tok.text!r} is already defined",
                             name_tok.line, name_tok.col)
        if sep.text == "~":
            inputs[name_tok.text] = _parse_declaration(lp, name_tok)
            known[name_tok.text] = VarRef(name_tok.text)
        elif sep.text == "=":
            expr = lp.expression()
            known[name_tok.text] = expr
            last_expr = expr
        else:
            raise ParseError("expected '~' (declaration) or '=' (assignment)",
                             sep.line, sep.col)
        if not lp.at_end():
            tok = lp.peek()
            raise ParseError(f"unexpected trailing {tok.text!r}",
                             tok.line, tok.col)
    if last_expr is None:
        raise ParseError("no output expression: add a line like 'z = ...'",
                         len(text.splitlines()) + 1, 1)
    return Program(inputs=inputs, expr=last_expr, name=name)


# ------------------------------------------------------- s-expression import

def _sexpr_tokens(text: str) -> list[_Token]:
    out: list[_Token] = []
    line, col = 1, 1
    i = 0
    while i < len(text):
        ch = text[i]
        if ch == "\n":
            line += 1
            col = 1
            i += 1
        elif ch in " \t\r":
            col += 1
            i += 1
        elif ch == ";":
            while i < len(text) and text[i] != "\n":
                i += 1
        elif ch in "()":
            out.append(_Token("punct", ch, line, col))
            col += 1
            i += 1
        elif ch == '"':
            j = text.index('"', i + 1)
            out.append(_Token("string", text[i + 1:j], line, col))
            col += j - i + 1
            i = j + 1
        else:
            j = i
            while j < len(text) and text[j] not in ' \t\r\n();"':
                j += 1
            out.append(_Token("atom", text[i:j], line, col))
            col += j - i
            i = j
    out.append(_Token("end", "", line, col))
    return out


def _sexpr_read(tokens: list[_Token], pos: int):
    tok = tokens[pos]
    if tok.kind == "end":
        raise ParseError("unexpected end of input", tok.line, tok.col)
    if tok.text == "(":
        items = []
        pos += 1
        while tokens[pos].text != ")":
            if tokens[pos].kind == "end":
                raise ParseError("missing ')'", tok.line, tok.col)
            item, pos = _sexpr_read(tokens, pos)
            items.append(item)
        return (items, tok), pos + 1
    if tok.text == ")":
        raise ParseError("unexpected ')'", tok.line, tok.col)
    return tok, pos + 1


_RATIONAL_RE = re.compile(r"[+-]?\d+/\d+\Z")


def _atom_number(text: str) -> float | None:
    if _RATIONAL_RE.match(text):
        num, den = text.split("/")
        return float(num) / float(den)
    try:
        return float(text)
    except ValueError:
        return None


def _is_number(text: str) -> bool:
    return _atom_number(text) is not None


def _set_bound(ranges: dict[str, list], var: str, idx: int, value: float) -> None:
    slot = ranges.setdefault(var, [None, None])
    if slot[idx] is None:
        slot[idx] = value
    else:
        slot[idx] = max(slot[idx], value) if idx == 0 else min(slot[idx], value)


def _collect_ranges(cond, ranges: dict[str, list]) -> None:
    if isinstance(cond, _Token):
        raise ParseError("unsupported precondition", cond.line, cond.col)
    items, tok = cond
    head = items[0] if items else None
    op = head.text if isinstance(head, _Token) else ""
    if op == "and":
        for sub in items[1:]:
            _collect_ranges(sub, ranges)
        return
    if op in ("<=", "<", ">=", ">") and len(items) >= 3:
        chain = items[1:]
        if op in (">=", ">"):
            chain = chain[::-1]
        # adjacent pairs of a (possibly chained) comparison: lo <= x <= hi
        for left, right in zip(chain, chain[1:]):
            if not (isinstance(left, _Token) and isinstance(right, _Token)):
                continue
            left_num = _atom_number(left.text)
            right_num = _atom_number(right.text)
            if left_num is not None and right_num is None:
                _set_bound(ranges, right.text, 0, left_num)
            elif left_num is None and right_num is not None:
                _set_bound(ranges, left.text, 1, right_num)
        return
    raise ParseError(f"unsupported precondition {op!r}", tok.line, tok.col)


def _sexpr_expr(node, known: dict[str, Expr]) -> Expr:
    if isinstance(node, _Token):
        value = _atom_number(node.text)
        if value is not None:
            return ConstVal(value)
        if node.text in known:
            return known[node.text]
        raise ParseError(f"undeclared variable {node.text!r}",
                         node.line, node.col)
    items, tok = node
    if not items or not isinstance(items[0], _Token):
        raise ParseError("expected an operator", tok.line, tok.col)
    head = items[0]
    args = items[1:]
    if head.text in ("let", "let*"):
        if len(args) != 2 or not isinstance(args[0], tuple):
            raise ParseError("malformed let", head.line, head.col)
        scope = dict(known)
        for binding in args[0][0]:
            if (not isinstance(binding, tuple) or len(binding[0]) != 2
                    or not isinstance(binding[0][0], _Token)):
                raise ParseError("malformed let binding", head.line, head.col)
            bname, bexpr = binding[0]
            scope[bname.text] = _sexpr_expr(bexpr, scope)
        return _sexpr_expr(args[1], scope)
    if head.text == "-" and len(args) == 1:
        return UnaryNeg(_sexpr_expr(args[0], known))
    if head.text in ("+", "-", "*", "/"):
        if len(args) < 2:
            raise ParseError(f"{head.text!r} needs two operands",
                             head.line, head.col)
        node_out = _sexpr_expr(args[0], known)
        for arg in args[1:]:
            node_out = BinaryOp(head.text, node_out, _sexpr_expr(arg, known))
        return node_out
    if head.text in _TRANSCENDENTALS:
        raise ParseError("transcendentals unsupported; only + - * / are "
                         "available", head.line, head.col)
    raise ParseError(f"unsupported operator {head.text!r}",
                     head.line, head.col)


def parse_sexpr_benchmark(text: str, name: str = "benchmark") -> Program:
    """Import one straight-line four-operation benchmark written as an
    s-expression: ``(<kind> (args...) :pre (and (<= lo x) ...) body)``.
    Inputs become uniform over their declared ranges."""
    tokens = _sexpr_tokens(text)
    (items, tok), _ = _sexpr_read(tokens, 0)
    if len(items) < 3:
        raise ParseError("expected (<kind> (args...) ... body)",
                         tok.line, tok.col)
    idx = 1
    if isinstance(items[idx], _Token):  # optional identifier after the kind
        idx += 1
    if not isinstance(items[idx], tuple):
        raise ParseError("expected the argument list", tok.line, tok.col)
    arg_names = []
    for arg in items[idx][0]:
        if not isinstance(arg, _Token):
            raise ParseError("unsupported argument form",
                             items[idx][1].line, items[idx][1].col)
        arg_names.append(arg.text)
    idx += 1
    ranges: dict[str, list[float]] = {}
    body = None
    while idx < len(items):
        item = items[idx]
        if isinstance(item, _Token) and item.text.startswith(":"):
            if idx + 1 >= len(items):
                raise ParseError(f"property {item.text} missing a value",
                                 item.line, item.col)
            if item.text == ":pre":
                _collect_ranges(items[idx + 1], ranges)
            elif item.text == ":name" and isinstance(items[idx + 1], _Token):
                name = items[idx + 1].text
            idx += 2
            continue
        body = item
        idx += 1
    if body is None:
        raise ParseError("missing body expression", tok.line, tok.col)
    inputs: dict[str, Distribution] = {}
    known: dict[str, Expr] = {}
    for arg in arg_names:
        lo_hi = ranges.get(arg)
        if lo_hi is None or lo_hi[0] is None or lo_hi[1] is None:
            raise ParseError(f"input {arg!r} needs a bounded range in :pre",
                             tok.line, tok.col)
        inputs[arg] = make_builtin("uniform", (lo_hi[0], lo_hi[1]))
        known[arg] = VarRef(arg)
    expr = _sexpr_expr(body, known)
    return Program(inputs=inputs, expr=expr, name=name)
