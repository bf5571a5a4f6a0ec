"""Expression trees over {constant, variable, +, *, ^, sin, cos, division}.

Used as the ground truth for dataset generation, as the target format when
reading equations out of a trained network, and as an independent oracle in
round-trip tests. Rendering is deterministic (canonical term ordering) and
parse-stable; displayed coefficients are rounded to 4 decimal places while
evaluation always uses full precision.
"""

import json
import math
import re
from dataclasses import dataclass

import numpy as np

COEFF_DECIMALS = 4


class ExpressionError(ValueError):
    pass


class DivisionByZero(ExpressionError):
    def __init__(self, subtree):
        self.subtree = subtree
        super().__init__(f"division by zero in subtree: {render(subtree)}")


@dataclass(frozen=True)
class Const:
    value: float


@dataclass(frozen=True)
class Var:
    index: int  # 0-based; rendered as x1, x2, ...


@dataclass(frozen=True)
class Sum:
    terms: tuple


@dataclass(frozen=True)
class Prod:
    factors: tuple


@dataclass(frozen=True)
class Pow:
    base: object
    exponent: int


@dataclass(frozen=True)
class Sin:
    arg: object


@dataclass(frozen=True)
class Cos:
    arg: object


@dataclass(frozen=True)
class Div:
    num: object
    den: object


def evaluate(expr, x):
    """Evaluate a tree at x, a (batch, n) array or single (n,) vector.

    A zero denominator anywhere in the batch raises DivisionByZero naming
    the offending subtree.
    """
    x = np.asarray(x, dtype=np.float64)
    single = x.ndim == 1
    X = x[None, :] if single else x
    out = _eval(expr, X)
    out = np.broadcast_to(out, (X.shape[0],)).astype(np.float64)
    return float(out[0]) if single else out.copy()


def _eval(expr, X):
    if isinstance(expr, Const):
        return np.full(X.shape[0], expr.value)
    if isinstance(expr, Var):
        return X[:, expr.index]
    if isinstance(expr, Sum):
        return sum((_eval(t, X) for t in expr.terms), np.zeros(X.shape[0]))
    if isinstance(expr, Prod):
        out = np.ones(X.shape[0])
        for f in expr.factors:
            out = out * _eval(f, X)
        return out
    if isinstance(expr, Pow):
        return _eval(expr.base, X) ** expr.exponent
    if isinstance(expr, Sin):
        return np.sin(_eval(expr.arg, X))
    if isinstance(expr, Cos):
        return np.cos(_eval(expr.arg, X))
    if isinstance(expr, Div):
        den = _eval(expr.den, X)
        if np.any(den == 0.0):
            raise DivisionByZero(expr)
        return _eval(expr.num, X) / den
    raise ExpressionError(f"unknown node: {expr!r}")


def variables(expr):
    """Set of variable indices appearing in the tree."""
    if isinstance(expr, Var):
        return {expr.index}
    if isinstance(expr, Const):
        return set()
    if isinstance(expr, Sum):
        return set().union(*(variables(t) for t in expr.terms)) if expr.terms else set()
    if isinstance(expr, Prod):
        return set().union(*(variables(f) for f in expr.factors)) if expr.factors else set()
    if isinstance(expr, Pow):
        return variables(expr.base)
    if isinstance(expr, (Sin, Cos)):
        return variables(expr.arg)
    if isinstance(expr, Div):
        return variables(expr.num) | variables(expr.den)
    raise ExpressionError(f"unknown node: {expr!r}")


# -- simplification -----------------------------------------------------------

def simplify(expr):
    """Constant folding, flattening, zero/unit elimination.

    Semantics-preserving up to floating-point reassociation; idempotent.
    """
    return _simplify(expr)


def _simplify(expr):
    if isinstance(expr, (Const, Var)):
        return expr
    if isinstance(expr, Sin):
        arg = _simplify(expr.arg)
        if isinstance(arg, Const):
            return Const(math.sin(arg.value))
        return Sin(arg)
    if isinstance(expr, Cos):
        arg = _simplify(expr.arg)
        if isinstance(arg, Const):
            return Const(math.cos(arg.value))
        return Cos(arg)
    if isinstance(expr, Pow):
        base = _simplify(expr.base)
        if expr.exponent == 1:
            return base
        if expr.exponent == 0:
            return Const(1.0)
        if isinstance(base, Const):
            return Const(base.value ** expr.exponent)
        return Pow(base, expr.exponent)
    if isinstance(expr, Div):
        num = _simplify(expr.num)
        den = _simplify(expr.den)
        if isinstance(num, Const) and num.value == 0.0:
            return Const(0.0)
        if isinstance(den, Const) and den.value != 0.0:
            if den.value == 1.0:
                return num
            return _simplify(Prod((Const(1.0 / den.value), num)))
        return Div(num, den)
    if isinstance(expr, Prod):
        return _simplify_prod(expr)
    if isinstance(expr, Sum):
        return _simplify_sum(expr)
    raise ExpressionError(f"unknown node: {expr!r}")


def _simplify_prod(expr):
    coeff = 1.0
    factors = []
    stack = [_simplify(f) for f in expr.factors]
    for f in stack:
        if isinstance(f, Const):
            coeff *= f.value
        elif isinstance(f, Prod):
            for g in f.factors:
                if isinstance(g, Const):
                    coeff *= g.value
                else:
                    factors.append(g)
        else:
            factors.append(f)
    if coeff == 0.0:
        return Const(0.0)
    # merge repeated factors into powers
    merged = []
    for f in sorted(factors, key=_sort_key):
        base, exp = (f.base, f.exponent) if isinstance(f, Pow) else (f, 1)
        if merged and merged[-1][0] == base:
            merged[-1] = (base, merged[-1][1] + exp)
        else:
            merged.append((base, exp))
    factors = sorted((Pow(b, e) if e != 1 else b for b, e in merged),
                     key=_sort_key)
    if not factors:
        return Const(coeff)
    if coeff != 1.0:
        factors = [Const(coeff)] + factors
    if len(factors) == 1:
        return factors[0]
    return Prod(tuple(factors))


def _split_coeff(term):
    """(coefficient, structural remainder) of a simplified term."""
    if isinstance(term, Const):
        return term.value, None
    if isinstance(term, Prod) and term.factors and isinstance(term.factors[0], Const):
        rest = term.factors[1:]
        rem = rest[0] if len(rest) == 1 else Prod(rest)
        return term.factors[0].value, rem
    return 1.0, term


def _simplify_sum(expr):
    const_part = 0.0
    groups = []  # list of [remainder, coeff], order-insensitive via sorting later
    stack = [_simplify(t) for t in expr.terms]
    flat = []
    for t in stack:
        if isinstance(t, Sum):
            flat.extend(t.terms)
        else:
            flat.append(t)
    for t in flat:
        coeff, rem = _split_coeff(t)
        if rem is None:
            const_part += coeff
            continue
        for g in groups:
            if g[0] == rem:
                g[1] += coeff
                break
        else:
            groups.append([rem, coeff])
    terms = []
    for rem, coeff in groups:
        if coeff == 0.0:
            continue
        terms.append(rem if coeff == 1.0 else _simplify_prod(Prod((Const(coeff), rem))))
    if const_part != 0.0 or not terms:
        terms.append(Const(const_part))
    terms.sort(key=_sort_key)
    if len(terms) == 1:
        return terms[0]
    return Sum(tuple(terms))


# -- rendering ----------------------------------------------------------------

def _sort_key(expr):
    vs = variables(expr)
    lead = min(vs) if vs else 10 ** 9
    kind = type(expr).__name__
    return (lead, kind, render(expr))


def format_coeff(v: float) -> str:
    r = round(float(v), COEFF_DECIMALS)
    if r == int(r):
        return str(int(r))
    return repr(r)


def _needs_parens_in_prod(expr):
    return isinstance(expr, (Sum, Div))


def render(expr) -> str:
    """Deterministic infix text; render(parse(render(e))) == render(e)
    whenever every folded constant is representable at COEFF_DECIMALS
    decimal places (coefficients are rounded for display)."""
    if isinstance(expr, Const):
        s = format_coeff(expr.value)
        return f"({s})" if s.startswith("-") else s
    if isinstance(expr, Var):
        return f"x{expr.index + 1}"
    if isinstance(expr, Sin):
        return f"sin({render(expr.arg)})"
    if isinstance(expr, Cos):
        return f"cos({render(expr.arg)})"
    if isinstance(expr, Pow):
        base = render(expr.base)
        if not isinstance(expr.base, (Var, Sin, Cos)):
            base = f"({base})"
        return f"{base}^{expr.exponent}"
    if isinstance(expr, Prod):
        parts = []
        for f in expr.factors:
            s = render(f)
            if _needs_parens_in_prod(f):
                s = f"({s})"
            parts.append(s)
        return "*".join(parts)
    if isinstance(expr, Sum):
        out = render(expr.terms[0])
        for t in expr.terms[1:]:
            coeff, _ = _split_coeff(t)
            s = render(t)
            if coeff < 0 or s.startswith("("):
                out += f" + {s}" if not s.startswith("(") else f" + {s}"
            else:
                out += f" + {s}"
        return out
    if isinstance(expr, Div):
        num = render(expr.num)
        if isinstance(expr.num, (Sum, Prod, Div)):
            num = f"({num})"
        den = render(expr.den)
        if not isinstance(expr.den, (Var, Sin, Cos)):
            den = f"({den})"
        return f"{num}/{den}"
    raise ExpressionError(f"unknown node: {expr!r}")


# -- parsing ------------------------------------------------------------------

_TOKEN = re.compile(
    r"\s*(?:(?P<num>\d+\.\d+|\d+|\.\d+)|(?P<name>[A-Za-z_][A-Za-z_0-9]*)"
    r"|(?P<op>[()+\-*/^]))"
)


def _tokenize(text):
    pos = 0
    tokens = []
    while pos < len(text):
        m = _TOKEN.match(text, pos)
        if not m or m.end() == pos:
            if text[pos:].strip() == "":
                break
            raise ExpressionError(f"cannot tokenize at: {text[pos:]!r}")
        pos = m.end()
        if m.group("num"):
            tokens.append(("num", float(m.group("num"))))
        elif m.group("name"):
            tokens.append(("name", m.group("name")))
        else:
            tokens.append(("op", m.group("op")))
    tokens.append(("end", None))
    return tokens


class _Parser:
    def __init__(self, tokens):
        self.tokens = tokens
        self.i = 0

    def peek(self):
        return self.tokens[self.i]

    def take(self):
        tok = self.tokens[self.i]
        self.i += 1
        return tok

    def expect_op(self, op):
        kind, val = self.take()
        if kind != "op" or val != op:
            raise ExpressionError(f"expected {op!r}, got {val!r}")

    def parse_expr(self):
        terms = [self.parse_term()]
        while self.peek() == ("op", "+") or self.peek() == ("op", "-"):
            _, op = self.take()
            t = self.parse_term()
            if op == "-":
                t = Prod((Const(-1.0), t))
            terms.append(t)
        return terms[0] if len(terms) == 1 else Sum(tuple(terms))

    def parse_term(self):
        node = self.parse_factor()
        while self.peek() in (("op", "*"), ("op", "/")):
            _, op = self.take()
            rhs = self.parse_factor()
            if op == "*":
                if isinstance(node, Prod):
                    node = Prod(node.factors + (rhs,))
                else:
                    node = Prod((node, rhs))
            else:
                node = Div(node, rhs)
        return node

    def parse_factor(self):
        node = self.parse_atom()
        if self.peek() == ("op", "^"):
            self.take()
            kind, val = self.take()
            neg = False
            if (kind, val) == ("op", "-"):
                neg = True
                kind, val = self.take()
            if kind != "num" or val != int(val):
                raise ExpressionError("exponent must be an integer")
            node = Pow(node, -int(val) if neg else int(val))
        return node

    def parse_atom(self):
        kind, val = self.take()
        if kind == "num":
            return Const(val)
        if kind == "op" and val == "-":
            return Prod((Const(-1.0), self.parse_atom()))
        if kind == "op" and val == "(":
            node = self.parse_expr()
            self.expect_op(")")
            return node
        if kind == "name":
            if val in ("sin", "cos"):
                self.expect_op("(")
                arg = self.parse_expr()
                self.expect_op(")")
                return Sin(arg) if val == "sin" else Cos(arg)
            m = re.fullmatch(r"x(\d+)", val)
            if m:
                return Var(int(m.group(1)) - 1)
            raise ExpressionError(f"unknown identifier: {val!r}")
        raise ExpressionError(f"unexpected token: {val!r}")


def parse(text) -> object:
    parser = _Parser(_tokenize(text))
    node = parser.parse_expr()
    if parser.peek()[0] != "end":
        raise ExpressionError(f"trailing input after expression: {text!r}")
    return simplify(node)


# -- JSON form ----------------------------------------------------------------

def to_json(expr) -> str:
    return json.dumps(_to_obj(expr))


def _to_obj(expr):
    if isinstance(expr, Const):
        return {"type": "const", "value": expr.value}
    if isinstance(expr, Var):
        return {"type": "var", "index": expr.index}
    if isinstance(expr, Sum):
        return {"type": "sum", "children": [_to_obj(t) for t in expr.terms]}
    if isinstance(expr, Prod):
        return {"type": "prod", "children": [_to_obj(f) for f in expr.factors]}
    if isinstance(expr, Pow):
        return {"type": "pow", "exponent": expr.exponent,
                "children": [_to_obj(expr.base)]}
    if isinstance(expr, Sin):
        return {"type": "sin", "children": [_to_obj(expr.arg)]}
    if isinstance(expr, Cos):
        return {"type": "cos", "children": [_to_obj(expr.arg)]}
    if isinstance(expr, Div):
        return {"type": "div", "children": [_to_obj(expr.num), _to_obj(expr.den)]}
    raise ExpressionError(f"unknown node: {expr!r}")


def from_json(text) -> object:
    return _from_obj(json.loads(text))


def _from_obj(obj):
    t = obj["type"]
    if t == "const":
        return Const(float(obj["value"]))
    if t == "var":
        return Var(int(obj["index"]))
    kids = [_from_obj(c) for c in obj.get("children", [])]
    if t == "sum":
        return Sum(tuple(kids))
    if t == "prod":
        return Prod(tuple(kids))
    if t == "pow":
        return Pow(kids[0], int(obj["exponent"]))
    if t == "sin":
        return Sin(kids[0])
    if t == "cos":
        return Cos(kids[0])
    if t == "div":
        return Div(kids[0], kids[1])
    raise ExpressionError(f"unknown JSON node type: {t!r}")
