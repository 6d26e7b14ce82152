"""Expression language for user-defined metrics G(z, zbar, v, vbar).

Grammar (whitespace-insensitive, LL(1)):

    expr     := term (('+' | '-') term)*
    term     := unary (('*' | '/') unary)*
    unary    := '-' unary | power
    power    := atom ('^' exponent)*          exponent is a real literal,
    atom     := number | variable             optionally signed
              | func '(' expr ')'
              | '(' expr ')'
    func     := conj | re | im | abs2 | sqrt | log | exp
    variable := ('z' | 'v') <positive integer>

Precedence: ^ binds tighter than unary minus, which binds tighter than * /,
which bind tighter than + -.  Binary operators associate to the left.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Union

from . import jets
from .errors import DslError, NotAMetricError
from .jets import FinslerPoint, TaylorJet

FUNCTIONS = ("conj", "re", "im", "abs2", "sqrt", "log", "exp")


# -- syntax tree ---------------------------------------------------------------


@dataclass(frozen=True)
class Num:
    value: float


@dataclass(frozen=True)
class Var:
    kind: str  # 'z' or 'v'
    index: int  # 1-based, as written


@dataclass(frozen=True)
class Unary:
    op: str  # 'neg' or a function name
    arg: "MetricExpr"


@dataclass(frozen=True)
class Bin:
    op: str  # '+', '-', '*', '/'
    lhs: "MetricExpr"
    rhs: "MetricExpr"


@dataclass(frozen=True)
class Pow:
    base: "MetricExpr"
    exponent: float


MetricExpr = Union[Num, Var, Unary, Bin, Pow]


# -- lexer ---------------------------------------------------------------------


@dataclass(frozen=True)
class _Token:
    kind: str  # 'num', 'ident', 'op', 'lparen', 'rparen', 'eof'
    text: str
    line: int
    col: int


def _tokenize(text: str) -> list[_Token]:
    toks = []
    line, col = 1, 1
    i = 0
    while i < len(text):
        ch = text[i]
        if ch == "\n":
            line += 1
            col = 1
            i += 1
            continue
        if ch.isspace():
            col += 1
            i += 1
            continue
        start_col = col
        if ch.isdigit() or (ch == "." and i + 1 < len(text) and text[i + 1].isdigit()):
            j = i
            seen_dot = False
            while j < len(text) and (text[j].isdigit() or (text[j] == "." and not seen_dot)):
                seen_dot = seen_dot or text[j] == "."
                j += 1
            if j < len(text) and text[j] in "eE":
                k = j + 1
                if k < len(text) and text[k] in "+-":
                    k += 1
                if k < len(text) and text[k].isdigit():
                    j = k
                    while j < len(text) and text[j].isdigit():
                        j += 1
            toks.append(_Token("num", text[i:j], line, start_col))
            col += j - i
            i = j
            continue
        if ch.isalpha():
            j = i
            while j < len(text) and (text[j].isalnum() or text[j] == "_"):
                j += 1
            toks.append(_Token("ident", text[i:j], line, start_col))
            col += j - i
            i = j
            continue
        if ch in "+-*/^":
            toks.append(_Token("op", ch, line, start_col))
        elif ch == "(":
            toks.append(_Token("lparen", ch, line, start_col))
        elif ch == ")":
            toks.append(_Token("rparen", ch, line, start_col))
        else:
            raise DslError(f"unexpected character {ch!r}", line, start_col)
        col += 1
        i += 1
    toks.append(_Token("eof", "", line, col))
    return toks


# -- parser --------------------------------------------------------------------


class _Parser:
    def __init__(self, toks: list[_Token], n: int):
        self.toks = toks
        self.pos = 0
        self.n = n

    def peek(self) -> _Token:
        return self.toks[self.pos]

    def take(self) -> _Token:
        t = self.toks[self.pos]
        self.pos += 1
        return t

    def fail(self, msg, tok=None):
        tok = tok or self.peek()
        raise DslError(msg, tok.line, tok.col)

    def parse(self) -> MetricExpr:
        e = self.expr()
        if self.peek().kind != "eof":
            self.fail(f"unexpected {self.peek().text!r} after expression")
        return e

    def expr(self) -> MetricExpr:
        e = self.term()
        while self.peek().kind == "op" and self.peek().text in "+-":
            op = self.take().text
            e = Bin(op, e, self.term())
        return e

    def term(self) -> MetricExpr:
        e = self.unary()
        while self.peek().kind == "op" and self.peek().text in "*/":
            op = self.take().text
            e = Bin(op, e, self.unary())
        return e

    def unary(self) -> MetricExpr:
        if self.peek().kind == "op" and self.peek().text == "-":
            self.take()
            return Unary("neg", self.unary())
        return self.power()

    def power(self) -> MetricExpr:
        e = self.atom()
        while self.peek().kind == "op" and self.peek().text == "^":
            self.take()
            e = Pow(e, self.exponent_literal())
        return e

    def exponent_literal(self) -> float:
        sign = 1.0
        if self.peek().kind == "op" and self.peek().text in "+-":
            sign = -1.0 if self.take().text == "-" else 1.0
        tok = self.peek()
        if tok.kind != "num":
            self.fail("exponent must be a real literal")
        self.take()
        return sign * float(tok.text)

    def atom(self) -> MetricExpr:
        tok = self.take()
        if tok.kind == "num":
            return Num(float(tok.text))
        if tok.kind == "lparen":
            e = self.expr()
            closing = self.take()
            if closing.kind != "rparen":
                self.fail("expected ')'", closing)
            return e
        if tok.kind == "ident":
            if tok.text in FUNCTIONS:
                opening = self.take()
                if opening.kind != "lparen":
                    self.fail(f"{tok.text} takes one parenthesized argument", opening)
                arg = self.expr()
                closing = self.take()
                if closing.kind != "rparen":
                    self.fail("expected ')'", closing)
                return Unary(tok.text, arg)
            return self.variable(tok)
        self.fail(f"unexpected {tok.text or tok.kind!r}", tok)

    def variable(self, tok: _Token) -> Var:
        name = tok.text
        if len(name) >= 2 and name[0] in "zv" and name[1:].isdigit():
            idx = int(name[1:])
            if idx < 1 or idx > self.n:
                self.fail(f"variable index {idx} exceeds dimension {self.n}", tok)
            return Var(name[0], idx)
        self.fail(f"unknown identifier {name!r}", tok)


def parse_metric(text: str, n: int) -> MetricExpr:
    """Parse a metric expression over variables z1..zn, v1..vn."""
    if not text or not text.strip():
        raise DslError("empty expression", 1, 1)
    if n < 1:
        raise ValueError("dimension must be >= 1")
    return _Parser(_tokenize(text), n).parse()


# -- printer -------------------------------------------------------------------

_LEVEL = {"+": 1, "-": 1, "*": 2, "/": 2}


def _fmt_num(x: float) -> str:
    return repr(int(x)) if float(x).is_integer() and abs(x) < 1e15 else repr(x)


def _fmt(e: MetricExpr, parent_level: int) -> str:
    if isinstance(e, Num):
        s = _fmt_num(e.value)
        level = 5
    elif isinstance(e, Var):
        s = f"{e.kind}{e.index}"
        level = 5
    elif isinstance(e, Pow):
        s = f"{_fmt(e.base, 5)}^{_fmt_num(e.exponent)}"
        level = 4
    elif isinstance(e, Unary):
        if e.op == "neg":
            s = f"-{_fmt(e.arg, 3)}"
            level = 3
        else:
            s = f"{e.op}({_fmt(e.arg, 0)})"
            level = 5
    else:
        lv = _LEVEL[e.op]
        # left operand may share the level (left associativity); right must bind tighter
        s = f"{_fmt(e.lhs, lv)} {e.op} {_fmt(e.rhs, lv + 1)}"
        level = lv
    return f"({s})" if level < parent_level else s


def format_expr(e: MetricExpr) -> str:
    return _fmt(e, 0)


def used_variables(e: MetricExpr) -> set[tuple[str, int]]:
    if isinstance(e, Var):
        return {(e.kind, e.index)}
    if isinstance(e, Unary):
        return used_variables(e.arg)
    if isinstance(e, Bin):
        return used_variables(e.lhs) | used_variables(e.rhs)
    if isinstance(e, Pow):
        return used_variables(e.base)
    return set()


# -- evaluation on jets ----------------------------------------------------------

_UNARY_JET = {
    "neg": lambda j: -j,
    "conj": lambda j: j.conj(),
    "re": jets.jet_re,
    "im": jets.jet_im,
    "abs2": jets.jet_abs2,
    "sqrt": jets.jet_sqrt,
    "log": jets.jet_log,
    "exp": jets.jet_exp,
}


def evaluate_tree(e: MetricExpr, zjets: list[TaylorJet], vjets: list[TaylorJet]):
    """Evaluate a parsed tree on coordinate jets (shared by the metric layer)."""
    if isinstance(e, Num):
        return e.value
    if isinstance(e, Var):
        return (zjets if e.kind == "z" else vjets)[e.index - 1]
    if isinstance(e, Unary):
        arg = evaluate_tree(e.arg, zjets, vjets)
        if not isinstance(arg, TaylorJet):
            arg = jets.jet_constant(zjets[0].space, zjets[0].order, arg)
        return _UNARY_JET[e.op](arg)
    if isinstance(e, Bin):
        lhs = evaluate_tree(e.lhs, zjets, vjets)
        rhs = evaluate_tree(e.rhs, zjets, vjets)
        if e.op == "+":
            return lhs + rhs
        if e.op == "-":
            return lhs - rhs
        if e.op == "*":
            return lhs * rhs
        if isinstance(rhs, TaylorJet):
            return lhs * jets.jet_inv(rhs)
        return lhs * (1.0 / rhs)
    if isinstance(e, Pow):
        base = evaluate_tree(e.base, zjets, vjets)
        if isinstance(base, TaylorJet):
            return jets.jet_pow(base, e.exponent)
        return base**e.exponent
    raise TypeError(f"unknown node {e!r}")


def evaluate_expr_jet(e: MetricExpr, p: FinslerPoint, order: int) -> TaylorJet:
    """Jet of the denoted function at p; the value must be real (a metric)."""
    zjets, vjets = jets.seed_point_jets(p, order)
    out = evaluate_tree(e, zjets, vjets)
    if not isinstance(out, TaylorJet):
        out = jets.jet_constant(zjets[0].space, order, out)
    g = out.value
    if abs(g.imag) > 1e-12 * (1.0 + abs(g)):
        raise NotAMetricError(
            f"expression value {g} is not real at z={p.z}, v={p.v}"
        )
    return out
