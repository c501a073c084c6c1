"""Expression language for metric components and potentials.

Grammar (precedence high to low; ``^`` is right associative, the other
binary operators left associative)::

    atom    := NUMBER | NAME | NAME '(' expr ')' | '(' expr ')'
    power   := atom ['^' unary]
    unary   := '-' unary | power
    product := unary (('*' | '/') unary)*
    expr    := product (('+' | '-') product)*

Names are coordinates (``x1 x2 x3`` with aliases ``r t -> x1``,
``theta1 phi -> x2``, ``theta2 psi -> x3``), parameters bound at evaluation
time (``m a alpha c`` plus any declared extras), the constant ``pi``, and
declared *fields* -- named scalar functions such as the Schwarzschild
potential ``tau`` that are supplied as objects when evaluating.  Functions:
``sin cos exp log sqrt``, one argument each.

Expressions evaluate either over jets (exact derivatives) or over floats /
numpy arrays (grid sampling).
"""

from __future__ import annotations

import math
import re
from dataclasses import dataclass

import numpy as np

from . import jets
from .jets import JetArray, JetDomainError

COORD_ALIASES = {
    "x1": 0, "x2": 1, "x3": 2,
    "r": 0, "t": 0,
    "theta1": 1, "phi": 1,
    "theta2": 2, "psi": 2,
}
PARAMETERS = ("m", "a", "alpha", "c")
CONSTANTS = {"pi": math.pi}
FUNCTIONS = ("sin", "cos", "exp", "log", "sqrt")


class ExprError(ValueError):
    """Base class for expression errors carrying a source position."""

    def __init__(self, message, line=1, col=1):
        self.line = line
        self.col = col
        super().__init__(f"{message} at line {line}, column {col}")


class ExprSyntaxError(ExprError):
    pass


class UnknownIdentifier(ExprError):
    pass


class ArityError(ExprError):
    pass


class ExprDomainError(ExprError):
    """Evaluation left the domain of an elementary function."""


# -- AST --------------------------------------------------------------------

@dataclass(frozen=True)
class Node:
    pos: tuple = (1, 1)


@dataclass(frozen=True)
class Num(Node):
    value: float = 0.0


@dataclass(frozen=True)
class Name(Node):
    name: str = ""


@dataclass(frozen=True)
class Neg(Node):
    arg: Node = None


@dataclass(frozen=True)
class BinOp(Node):
    op: str = "+"
    left: Node = None
    right: Node = None


@dataclass(frozen=True)
class Call(Node):
    func: str = ""
    arg: Node = None


Expr = Node


# -- tokenizer ----------------------------------------------------------------

_TOKEN = re.compile(
    r"(?P<ws>[ \t\r]+)|(?P<nl>\n)"
    r"|(?P<num>(?:\d+\.?\d*|\.\d+)(?:[eE][+-]?\d+)?)"
    r"|(?P<name>[A-Za-z_][A-Za-z_0-9]*)"
    r"|(?P<op>[-+*/^(),])"
)


@dataclass
class _Tok:
    kind: str
    text: str
    line: int
    col: int


def _tokenize(src):
    out = []
    line, start, i = 1, 0, 0
    while i < len(src):
        m = _TOKEN.match(src, i)
        if m is None:
            raise ExprSyntaxError(f"unexpected character {src[i]!r}", line, i - start + 1)
        kind = m.lastgroup
        if kind == "nl":
            line, start = line + 1, m.end()
        elif kind != "ws":
            out.append(_Tok(kind, m.group(), line, i - start + 1))
        i = m.end()
    out.append(_Tok("end", "", line, i - start + 1))
    return out


# -- parser -------------------------------------------------------------------

_BINARY = {"+": 10, "-": 10, "*": 20, "/": 20, "^": 40}
_UNARY_BP = 30


class _Parser:
    def __init__(self, src, names):
        self.toks = _tokenize(src)
        self.i = 0
        self.names = names

    def peek(self):
        return self.toks[self.i]

    def advance(self):
        tok = self.toks[self.i]
        self.i += 1
        return tok

    def expect(self, text):
        tok = self.advance()
        if tok.text != text:
            what = "end of input" if tok.kind == "end" else repr(tok.text)
            raise ExprSyntaxError(f"expected {text!r}, found {what}", tok.line, tok.col)
        return tok

    def expression(self, rbp=0):
        left = self.prefix()
        while True:
            tok = self.peek()
            lbp = _BINARY.get(tok.text, 0) if tok.kind == "op" else 0
            if lbp <= rbp:
                break
            self.advance()
            # right associativity for ^: parse the right side one notch lower
            right = self.expression(lbp - 1 if tok.text == "^" else lbp)
            left = BinOp((tok.line, tok.col), tok.text, left, right)
        return left

    def prefix(self):
        tok = self.advance()
        pos = (tok.line, tok.col)
        if tok.kind == "num":
            return Num(pos, float(tok.text))
        if tok.kind == "name":
            if tok.text in FUNCTIONS:
                return self.call(tok)
            if self.peek().text == "(":
                raise UnknownIdentifier(f"unknown function {tok.text!r}", *pos)
            if tok.text not in self.names:
                raise UnknownIdentifier(f"unknown identifier {tok.text!r}", *pos)
            return Name(pos, tok.text)
        if tok.text == "-":
            return Neg(pos, self.expression(_UNARY_BP))
        if tok.text == "(":
            inner = self.expression()
            self.expect(")")
            return inner
        what = "end of input" if tok.kind == "end" else repr(tok.text)
        raise ExprSyntaxError(f"unexpected {what}", *pos)

    def call(self, tok):
        pos = (tok.line, tok.col)
        if self.peek().text != "(":
            raise ArityError(f"function {tok.text!r} needs one argument", *pos)
        self.advance()
        if self.peek().text == ")":
            raise ArityError(f"function {tok.text!r} takes 1 argument, got 0", *pos)
        arg = self.expression()
        if self.peek().text == ",":
            nargs = 1
            while self.peek().text == ",":
                self.advance()
                self.expression()
                nargs += 1
            raise ArityError(f"function {tok.text!r} takes 1 argument, got {nargs}", *pos)
        self.expect(")")
        return Call(pos, tok.text, arg)


def known_names(extra=()):
    return set(COORD_ALIASES) | set(PARAMETERS) | set(CONSTANTS) | set(extra)


def parse(source, extra_names=()):
    """Parse ``source`` into an AST.

    ``extra_names`` declares additional parameter or field identifiers.
    """
    p = _Parser(source, known_names(extra_names))
    try:
        tree = p.expression()
    except RecursionError:
        tok = p.peek()
        raise ExprSyntaxError("expression nested too deeply", tok.line, tok.col) from None
    tok = p.peek()
    if tok.kind != "end":
        raise ExprSyntaxError(f"unexpected {tok.text!r}", tok.line, tok.col)
    return tree


def to_source(e):
    """Print an expression; ``parse(to_source(e))`` evaluates identically."""
    if isinstance(e, Num):
        return repr(float(e.value))
    if isinstance(e, Name):
        return e.name
    if isinstance(e, Neg):
        return f"(-{to_source(e.arg)})"
    if isinstance(e, BinOp):
        return f"({to_source(e.left)} {e.op} {to_source(e.right)})"
    if isinstance(e, Call):
        return f"{e.func}({to_source(e.arg)})"
    raise TypeError(f"not an expression node: {e!r}")


def names_in(e):
    if isinstance(e, Name):
        return {e.name}
    if isinstance(e, Neg) or isinstance(e, Call):
        return names_in(e.arg)
    if isinstance(e, BinOp):
        return names_in(e.left) | names_in(e.right)
    return set()


def as_expr(e, extra_names=()):
    if isinstance(e, str):
        return parse(e, extra_names)
    if isinstance(e, (int, float, np.integer, np.floating)) and not isinstance(e, bool):
        return const(e)
    return e


# -- building helpers -----------------------------------------------------------

def const(v):
    return Num((1, 1), float(v))


def mul(a, b):
    return BinOp((1, 1), "*", a, b)


def add(a, b):
    return BinOp((1, 1), "+", a, b)


def is_constant(e, params=None):
    """True when the expression has no coordinate or field dependence."""
    params = params or {}
    for n in names_in(e):
        if n in COORD_ALIASES:
            return False
        if n in params and not isinstance(params[n], (int, float)):
            return False
    return True


def is_zero(e):
    return isinstance(e, Num) and e.value == 0.0


# -- evaluation -------------------------------------------------------------------

class Field:
    """A named scalar function provided at evaluation time.

    Subclasses implement :meth:`jet` (coordinate jets -> JetArray) and
    :meth:`evaluate` (coordinate arrays -> array).
    """

    def jet(self, coords):
        raise NotImplementedError

    def evaluate(self, coords):
        raise NotImplementedError


class ExprField(Field):
    """Wrap an expression as a field (used to expose e.g. ``u`` by name)."""

    def __init__(self, expr, params=None):
        self.expr = as_expr(expr)
        self.params = dict(params or {})

    def jet(self, coords):
        return _Evaluator(coords, self.params, jet_mode=True).run(self.expr)

    def evaluate(self, coords):
        return _Evaluator(coords, self.params, jet_mode=False).run(self.expr)


class _Evaluator:
    def __init__(self, coords, params, jet_mode):
        self.coords = coords
        self.params = params
        self.jet_mode = jet_mode

    def run(self, e):
        return self.eval(e)

    def lookup(self, node):
        name = node.name
        if name in self.params:
            v = self.params[name]
            if isinstance(v, Field):
                return v.jet(self.coords) if self.jet_mode else v.evaluate(self.coords)
            return float(v)
        if name in COORD_ALIASES:
            k = COORD_ALIASES[name]
            if k >= len(self.coords):
                raise UnknownIdentifier(
                    f"coordinate {name!r} not available in dimension {len(self.coords)}", *node.pos)
            return self.coords[k]
        if name in CONSTANTS:
            return CONSTANTS[name]
        raise UnknownIdentifier(f"unbound identifier {name!r}", *node.pos)

    def eval(self, e):
        if isinstance(e, Num):
            return e.value
        if isinstance(e, Name):
            return self.lookup(e)
        if isinstance(e, Neg):
            return -self.eval(e.arg)
        if isinstance(e, BinOp):
            a = self.eval(e.left)
            b = self.eval(e.right)
            try:
                return self.binop(e.op, a, b)
            except (JetDomainError, ZeroDivisionError, FloatingPointError) as err:
                raise ExprDomainError(f"{err}", *e.pos) from err
        if isinstance(e, Call):
            a = self.eval(e.arg)
            try:
                return self.call(e.func, a)
            except JetDomainError as err:
                raise ExprDomainError(f"{err}", *e.pos) from err
        raise TypeError(f"not an expression node: {e!r}")

    def binop(self, op, a, b):
        if op == "+":
            return a + b
        if op == "-":
            return a - b
        if op == "*":
            return a * b
        if op == "/":
            if not isinstance(b, JetArray) and np.any(np.asarray(b) == 0):
                raise ZeroDivisionError("division by zero")
            if isinstance(b, JetArray) and np.any(b.value() == 0):
                raise JetDomainError("recip", 0.0)
            return a / b
        # ^
        if isinstance(b, JetArray):
            if isinstance(a, JetArray):
                return jets.exp(b * jets.log(a))
            if np.any(np.asarray(a) <= 0):
                raise JetDomainError("pow", float(np.min(a)))
            return jets.exp(b * np.log(a))
        if isinstance(a, JetArray):
            return jets.power(a, b)
        return _real_pow(a, b)

    def call(self, func, a):
        if isinstance(a, JetArray):
            return jets.ELEMENTARY[func](a)
        a = np.asarray(a, dtype=float)
        if func in ("log", "sqrt") and np.any(a <= 0 if func == "log" else a < 0):
            raise JetDomainError(func, float(np.min(a)))
        out = getattr(np, func)(a)
        return float(out) if out.ndim == 0 else out


def _real_pow(a, b):
    a = np.asarray(a, dtype=float)
    b = np.asarray(b, dtype=float)
    if np.any((a < 0) & (b != np.round(b))):
        raise JetDomainError(f"pow({float(np.max(b)):g})", float(np.min(a)))
    if np.any((a == 0) & (b < 0)):
        raise ZeroDivisionError("zero to a negative power")
    out = np.power(a, b)
    return float(out) if out.ndim == 0 else out


def eval_jet(e, point, params=None, order=jets.MAX_ORDER):
    """Jet of expression ``e`` at ``point`` (coordinates 0..dim-1)."""
    coords = jets.seed_point(point, order)
    out = _Evaluator(coords, params or {}, jet_mode=True).run(as_expr(e))
    if not isinstance(out, JetArray):
        out = jets.constant(out, len(point), order)
    return out


def eval_jet_coords(e, coords, params=None):
    """Like :func:`eval_jet` with caller-supplied coordinate jets."""
    out = _Evaluator(coords, params or {}, jet_mode=True).run(as_expr(e))
    if not isinstance(out, JetArray):
        out = jets.constant(out, coords[0].dim, coords[0].order)
    return out


def evaluate(e, coords, params=None):
    """Evaluate over floats or numpy arrays (one entry per coordinate)."""
    with np.errstate(all="ignore"):
        out = _Evaluator(list(coords), params or {}, jet_mode=False).run(as_expr(e))
    if not np.all(np.isfinite(out)):
        raise ExprDomainError("non-finite value", *as_expr(e).pos)
    return out
