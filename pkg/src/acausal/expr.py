"""Symbolic scalar expressions.

Every component equation in this package is an :class:`Expr` whose value is
asserted to be zero.  Trees are immutable and hash structurally, so they can be
shared between systems and used as dictionary keys.

Operator overloads build raw nodes without any rewriting; call :func:`simplify`
to fold constants and drop neutral elements.
"""
from __future__ import annotations

import math
from typing import Callable, Iterator, Mapping

__all__ = [
    "Expr", "Const", "Var", "Param", "Unary", "Binary", "Call",
    "ExternalFunction", "FDPartial",
    "ExpressionError", "UnboundIdentifierError", "DomainError",
    "Binding", "as_expr", "sq", "sqrt", "ln", "sign",
    "evaluate", "differentiate", "substitute", "simplify", "render",
    "variables", "parameters", "calls", "ZERO", "ONE",
]

UNARY_OPS = ("neg", "abs", "sq", "sqrt", "ln", "sign")
BINARY_OPS = ("+", "-", "*", "/", "pow")


class ExpressionError(ValueError):
    """Malformed expression or substitution."""


class UnboundIdentifierError(ExpressionError, KeyError):
    def __str__(self):
        return str(self.args[0]) if self.args else ""


class DomainError(ExpressionError):
    """Real-valued evaluation left the domain of an operation."""


class Expr:
    __slots__ = ("_hash",)

    # -- operator overloads (raw construction, no rewriting) -----------------
    def __add__(self, other):
        return Binary("+", self, as_expr(other))

    def __radd__(self, other):
        return Binary("+", as_expr(other), self)

    def __sub__(self, other):
        return Binary("-", self, as_expr(other))

    def __rsub__(self, other):
        return Binary("-", as_expr(other), self)

    def __mul__(self, other):
        return Binary("*", self, as_expr(other))

    def __rmul__(self, other):
        return Binary("*", as_expr(other), self)

    def __truediv__(self, other):
        return Binary("/", self, as_expr(other))

    def __rtruediv__(self, other):
        return Binary("/", as_expr(other), self)

    def __pow__(self, other):
        return Binary("pow", self, as_expr(other))

    def __rpow__(self, other):
        return Binary("pow", as_expr(other), self)

    def __neg__(self):
        return Unary("neg", self)

    def __abs__(self):
        return Unary("abs", self)

    def __hash__(self):
        return self._hash

    def __repr__(self):
        return f"{type(self).__name__}<{render(self)}>"

    def __str__(self):
        return render(self)

    def children(self) -> tuple[Expr, ...]:
        return ()

    def _eval(self, lookup):
        raise NotImplementedError


class Const(Expr):
    __hash__ = Expr.__hash__
    __slots__ = ("value",)

    def __init__(self, value: float):
        self.value = float(value)
        self._hash = hash(("const", self.value))

    def __eq__(self, other):
        return isinstance(other, Const) and other.value == self.value

    def _eval(self, lookup):
        return self.value


class Var(Expr):
    __hash__ = Expr.__hash__
    __slots__ = ("name",)

    def __init__(self, name: str):
        self.name = name
        self._hash = hash(("var", name))

    def __eq__(self, other):
        return isinstance(other, Var) and other.name == self.name

    def _eval(self, lookup):
        return lookup(self.name, "variable")


class Param(Expr):
    __hash__ = Expr.__hash__
    __slots__ = ("name",)

    def __init__(self, name: str):
        self.name = name
        self._hash = hash(("param", name))

    def __eq__(self, other):
        return isinstance(other, Param) and other.name == self.name

    def _eval(self, lookup):
        return lookup(self.name, "parameter")


def _is_zero(e: Expr) -> bool:
    return isinstance(e, Const) and e.value == 0.0


class Unary(Expr):
    __hash__ = Expr.__hash__
    __slots__ = ("op", "arg")

    def __init__(self, op: str, arg: Expr):
        if op not in UNARY_OPS:
            raise ExpressionError(f"unknown unary op {op!r}")
        if op == "ln" and _is_zero(arg):
            raise ExpressionError("logarithm of literal zero")
        self.op = op
        self.arg = arg
        self._hash = hash((op, arg._hash))

    def __eq__(self, other):
        return (isinstance(other, Unary) and other._hash == self._hash
                and other.op == self.op and other.arg == self.arg)

    def children(self):
        return (self.arg,)

    def _eval(self, lookup):
        a = self.arg._eval(lookup)
        op = self.op
        if op == "neg":
            return -a
        if op == "abs":
            return abs(a)
        if op == "sq":
            return a * a
        if op == "sign":
            return float((a > 0) - (a < 0))
        if op == "sqrt":
            if a < 0:
                raise DomainError(f"sqrt of negative argument {a!r}")
            return math.sqrt(a)
        if a <= 0:
            raise DomainError(f"ln of non-positive argument {a!r}")
        return math.log(a)


class Binary(Expr):
    __hash__ = Expr.__hash__
    __slots__ = ("op", "left", "right")

    def __init__(self, op: str, left: Expr, right: Expr):
        if op not in BINARY_OPS:
            raise ExpressionError(f"unknown binary op {op!r}")
        if op == "/" and _is_zero(right):
            raise ExpressionError("division by literal zero")
        self.op = op
        self.left = left
        self.right = right
        self._hash = hash((op, left._hash, right._hash))

    def __eq__(self, other):
        return (isinstance(other, Binary) and other._hash == self._hash
                and other.op == self.op and other.left == self.left
                and other.right == self.right)

    def children(self):
        return (self.left, self.right)

    def _eval(self, lookup):
        a = self.left._eval(lookup)
        b = self.right._eval(lookup)
        op = self.op
        if op == "+":
            return a + b
        if op == "-":
            return a - b
        if op == "*":
            return a * b
        if op == "/":
            if b == 0.0:
                raise DomainError("division by zero")
            return a / b
        try:
            r = a ** b
        except ZeroDivisionError:
            raise DomainError(f"zero raised to negative power {b!r}") from None
        if isinstance(r, complex):
            raise DomainError(f"negative base {a!r} with fractional exponent {b!r}")
        return float(r)


class ExternalFunction:
    """An opaque real function of a fixed number of real arguments.

    Subclasses implement ``__call__`` and must be hashable and comparable so
    that identical call sites can share one evaluation.  Derivatives default
    to central finite differences with a relative step.
    """

    name: str = "f"
    arity: int = 1

    def __call__(self, *args: float) -> float:
        raise NotImplementedError

    def partial(self, i: int) -> ExternalFunction:
        return FDPartial(self, i)


class FDPartial(ExternalFunction):
    """Central-difference partial derivative of an external function."""

    REL_STEP = 1e-7

    def __init__(self, fn: ExternalFunction, index: int, rel_step: float = REL_STEP):
        if not 0 <= index < fn.arity:
            raise ExpressionError(f"{fn.name} has no argument {index}")
        self.fn = fn
        self.index = index
        self.rel_step = rel_step
        self.arity = fn.arity
        self.name = f"d{index}[{fn.name}]"

    def __eq__(self, other):
        return (isinstance(other, FDPartial) and other.fn == self.fn
                and other.index == self.index and other.rel_step == self.rel_step)

    def __hash__(self):
        return hash(("fd", self.fn, self.index, self.rel_step))

    def __call__(self, *args: float) -> float:
        x = args[self.index]
        h = self.rel_step * abs(x) if x != 0.0 else self.rel_step
        hi = list(args)
        lo = list(args)
        hi[self.index] = x + h
        lo[self.index] = x - h
        return (self.fn(*hi) - self.fn(*lo)) / ((x + h) - (x - h))


class Call(Expr):
    __hash__ = Expr.__hash__
    __slots__ = ("fn", "args")

    def __init__(self, fn: ExternalFunction, args):
        args = tuple(as_expr(a) for a in args)
        if len(args) != fn.arity:
            raise ExpressionError(f"{fn.name} expects {fn.arity} arguments, got {len(args)}")
        self.fn = fn
        self.args = args
        self._hash = hash(("call", fn, tuple(a._hash for a in args)))

    def __eq__(self, other):
        return (isinstance(other, Call) and other._hash == self._hash
                and other.fn == self.fn and other.args == self.args)

    def children(self):
        return self.args

    def _eval(self, lookup):
        vals = [a._eval(lookup) for a in self.args]
        try:
            return float(self.fn(*vals))
        except DomainError:
            raise
        except (ValueError, ArithmeticError) as exc:
            raise DomainError(f"{self.fn.name}{tuple(vals)}: {exc}") from exc


ZERO = Const(0.0)
ONE = Const(1.0)


def as_expr(x) -> Expr:
    if isinstance(x, Expr):
        return x
    if isinstance(x, (int, float)) and not isinstance(x, bool):
        return Const(x)
    raise TypeError(f"cannot convert {type(x).__name__} to an expression")


def sq(x) -> Expr:
    return Unary("sq", as_expr(x))


def sqrt(x) -> Expr:
    return Unary("sqrt", as_expr(x))


def ln(x) -> Expr:
    return Unary("ln", as_expr(x))


def sign(x) -> Expr:
    return Unary("sign", as_expr(x))


# -- traversal ---------------------------------------------------------------

def _walk(e: Expr) -> Iterator[Expr]:
    stack = [e]
    while stack:
        node = stack.pop()
        yield node
        stack.extend(reversed(node.children()))


def variables(e: Expr) -> list[str]:
    """Variable names in first-occurrence order."""
    seen = {}
    for node in _walk(e):
        if isinstance(node, Var):
            seen.setdefault(node.name, None)
    return list(seen)


def parameters(e: Expr) -> list[str]:
    seen = {}
    for node in _walk(e):
        if isinstance(node, Param):
            seen.setdefault(node.name, None)
    return list(seen)


def calls(e: Expr) -> list[Call]:
    seen = {}
    for node in _walk(e):
        if isinstance(node, Call):
            seen.setdefault(node, None)
    return list(seen)


# -- evaluation --------------------------------------------------------------

class Binding:
    """Values for variables and parameters, kept in separate namespaces."""

    __slots__ = ("variables", "parameters")

    def __init__(self, variables=(), parameters=()):
        self.variables = _unique_map(variables, "variable")
        self.parameters = _unique_map(parameters, "parameter")
        both = self.variables.keys() & self.parameters.keys()
        if both:
            raise ExpressionError(f"identifiers bound as both variable and parameter: {sorted(both)}")

    def lookup(self, name: str, kind: str) -> float:
        table = self.variables if kind == "variable" else self.parameters
        try:
            return table[name]
        except KeyError:
            raise UnboundIdentifierError(f"unbound {kind} {name!r}") from None


def _unique_map(items, kind) -> dict[str, float]:
    if isinstance(items, Mapping):
        items = items.items()
    out: dict[str, float] = {}
    for k, v in items:
        if k in out:
            raise ExpressionError(f"duplicate {kind} identifier {k!r}")
        out[k] = float(v)
    return out


def _lookup_for(b) -> Callable[[str, str], float]:
    if isinstance(b, Binding):
        return b.lookup
    if isinstance(b, Mapping):
        def lookup(name, kind):
            try:
                return float(b[name])
            except KeyError:
                raise UnboundIdentifierError(f"unbound {kind} {name!r}") from None
        return lookup
    raise TypeError("binding must be a Binding or a mapping")


def evaluate(e: Expr, b) -> float:
    """Evaluate ``e`` under ``b`` (a :class:`Binding` or a plain name->value mapping).

    Domain errors are re-raised with the variable assignment of ``e`` attached.
    """
    lookup = _lookup_for(b)
    try:
        return e._eval(lookup)
    except DomainError as exc:
        assignment = []
        for name in variables(e):
            try:
                assignment.append(f"{name}={lookup(name, 'variable')!r}")
            except UnboundIdentifierError:
                pass
        where = ", ".join(assignment) or "no variables"
        raise DomainError(f"{exc} in {render(e)} at {where}") from None


# -- rewriting helpers (fold while building) ---------------------------------

def _c(e: Expr):
    return e.value if isinstance(e, Const) else None


def _neg(a: Expr) -> Expr:
    if isinstance(a, Const):
        return Const(-a.value)
    if isinstance(a, Unary) and a.op == "neg":
        return a.arg
    return Unary("neg", a)


def _add(a: Expr, b: Expr) -> Expr:
    ca, cb = _c(a), _c(b)
    if ca is not None and cb is not None:
        return Const(ca + cb)
    if ca == 0.0:
        return b
    if cb == 0.0:
        return a
    if isinstance(b, Unary) and b.op == "neg":
        return _sub(a, b.arg)
    if a == b:
        return _mul(Const(2.0), a)
    return Binary("+", a, b)


def _sub(a: Expr, b: Expr) -> Expr:
    ca, cb = _c(a), _c(b)
    if ca is not None and cb is not None:
        return Const(ca - cb)
    if cb == 0.0:
        return a
    if ca == 0.0:
        return _neg(b)
    if a == b:
        return ZERO
    if isinstance(b, Unary) and b.op == "neg":
        return _add(a, b.arg)
    return Binary("-", a, b)


def _mul(a: Expr, b: Expr) -> Expr:
    ca, cb = _c(a), _c(b)
    if ca is not None and cb is not None:
        return Const(ca * cb)
    if ca == 0.0 or cb == 0.0:
        return ZERO
    if ca == 1.0:
        return b
    if cb == 1.0:
        return a
    if ca == -1.0:
        return _neg(b)
    if cb == -1.0:
        return _neg(a)
    return Binary("*", a, b)


def _div(a: Expr, b: Expr) -> Expr:
    ca, cb = _c(a), _c(b)
    if cb == 0.0:
        raise ExpressionError(f"division by literal zero in ({render(a)} / 0)")
    if ca == 0.0:
        return ZERO
    if ca is not None and cb is not None:
        return Const(ca / cb)
    if cb == 1.0:
        return a
    if a == b:
        return ONE
    return Binary("/", a, b)


def _pow(a: Expr, b: Expr) -> Expr:
    ca, cb = _c(a), _c(b)
    if cb == 0.0:
        return ONE
    if cb == 1.0:
        return a
    if cb == 2.0:
        return _unary("sq", a)
    if ca is not None and cb is not None:
        try:
            r = ca ** cb
        except ZeroDivisionError:
            r = None
        if isinstance(r, float) and math.isfinite(r):
            return Const(r)
    return Binary("pow", a, b)


def _unary(op: str, a: Expr) -> Expr:
    if op == "neg":
        return _neg(a)
    ca = _c(a)
    if ca is not None:
        if op == "ln" and ca == 0.0:
            raise ExpressionError("logarithm of literal zero")
        try:
            return Const(Unary(op, a)._eval(None))
        except DomainError:
            return Unary(op, a)
    if op == "abs" and isinstance(a, Unary) and a.op in ("abs", "sq"):
        return a
    if op in ("abs", "sq") and isinstance(a, Unary) and a.op == "neg":
        return _unary(op, a.arg)
    return Unary(op, a)


_BUILD = {"+": _add, "-": _sub, "*": _mul, "/": _div, "pow": _pow}


def simplify(e: Expr) -> Expr:
    """Local rewriting: constant folding, neutral elements, ``x - x -> 0``.

    The result evaluates identically to ``e`` wherever ``e`` evaluates.
    """
    memo: dict[Expr, Expr] = {}

    def rec(node: Expr) -> Expr:
        hit = memo.get(node)
        if hit is not None:
            return hit
        if isinstance(node, Unary):
            out = _unary(node.op, rec(node.arg))
        elif isinstance(node, Binary):
            out = _BUILD[node.op](rec(node.left), rec(node.right))
        elif isinstance(node, Call):
            out = Call(node.fn, [rec(a) for a in node.args])
        else:
            out = node
        memo[node] = out
        return out

    return rec(e)


# -- differentiation ---------------------------------------------------------

def differentiate(e: Expr, v: str) -> Expr:
    """Symbolic partial derivative of ``e`` with respect to variable ``v``.

    ``d|x|/dx`` is ``sign(x)`` with ``sign(0) = 0``.  Derivatives of external
    calls are external finite-difference partials chained with their arguments.
    """
    memo: dict[Expr, Expr] = {}

    def d(node: Expr) -> Expr:
        hit = memo.get(node)
        if hit is not None:
            return hit
        out = _d(node)
        memo[node] = out
        return out

    def _d(node: Expr) -> Expr:
        if isinstance(node, Var):
            return ONE if node.name == v else ZERO
        if isinstance(node, (Const, Param)):
            return ZERO
        if isinstance(node, Unary):
            a = node.arg
            da = d(a)
            if _is_zero(da) or node.op == "sign":
                return ZERO
            op = node.op
            if op == "neg":
                return _neg(da)
            if op == "abs":
                return _mul(_unary("sign", a), da)
            if op == "sq":
                return _mul(_mul(Const(2.0), a), da)
            if op == "sqrt":
                return _div(da, _mul(Const(2.0), Unary("sqrt", a)))
            return _div(da, a)  # ln
        if isinstance(node, Binary):
            a, b = node.left, node.right
            da, db = d(a), d(b)
            op = node.op
            if op == "+":
                return _add(da, db)
            if op == "-":
                return _sub(da, db)
            if op == "*":
                return _add(_mul(da, b), _mul(a, db))
            if op == "/":
                return _sub(_div(da, b), _div(_mul(a, db), _unary("sq", b)))
            # pow
            if _is_zero(db):
                return _mul(_mul(b, _pow(a, _sub(b, ONE))), da)
            return _mul(node, _add(_mul(db, Unary("ln", a)), _div(_mul(b, da), a)))
        if isinstance(node, Call):
            total: Expr = ZERO
            for i, arg in enumerate(node.args):
                darg = d(arg)
                if not _is_zero(darg):
                    total = _add(total, _mul(Call(node.fn.partial(i), node.args), darg))
            return total
        raise TypeError(f"unknown node {node!r}")

    return simplify(d(e))


# -- substitution ------------------------------------------------------------

def substitute(e: Expr, mapping: Mapping[str, Expr]) -> Expr:
    """Replace variables by expressions, resolving chains transitively.

    Raises :class:`ExpressionError` if the map is cyclic (a variable that
    eventually maps back onto itself).  Identity entries are ignored.
    """
    m = {k: as_expr(r) for k, r in mapping.items() if not (isinstance(r, Var) and r.name == k)}
    if not m:
        return e
    resolved: dict[str, Expr] = {}
    state: dict[str, int] = {}

    def resolve(name: str) -> Expr:
        if name in resolved:
            return resolved[name]
        if state.get(name) == 1:
            raise ExpressionError(f"cyclic substitution through {name!r}")
        state[name] = 1
        out = replace(m[name])
        state[name] = 2
        resolved[name] = out
        return out

    memo: dict[Expr, Expr] = {}

    def replace(node: Expr) -> Expr:
        hit = memo.get(node)
        if hit is not None:
            return hit
        if isinstance(node, Var):
            out = resolve(node.name) if node.name in m else node
        elif isinstance(node, Unary):
            out = Unary(node.op, replace(node.arg))
        elif isinstance(node, Binary):
            out = Binary(node.op, replace(node.left), replace(node.right))
        elif isinstance(node, Call):
            out = Call(node.fn, [replace(a) for a in node.args])
        else:
            out = node
        memo[node] = out
        return out

    for k in m:
        resolve(k)
    return replace(e)


# -- rendering ---------------------------------------------------------------

_INFIX = {"+": "+", "-": "-", "*": "*", "/": "/", "pow": "^"}


def render(e: Expr) -> str:
    """Deterministic fully parenthesized infix text."""
    if isinstance(e, Const):
        return repr(e.value)
    if isinstance(e, (Var, Param)):
        return e.name
    if isinstance(e, Unary):
        if e.op == "neg":
            return f"-({render(e.arg)})"
        return f"{e.op}({render(e.arg)})"
    if isinstance(e, Binary):
        return f"({render(e.left)} {_INFIX[e.op]} {render(e.right)})"
    if isinstance(e, Call):
        return f"{e.fn.name}({', '.join(render(a) for a in e.args)})"
    raise TypeError(f"unknown node {e!r}")
