"""Connectors, components and flattening into one algebraic system.

A component owns typed ports (:class:`Node`), named parameters and internal
residual equations.  Ports are joined with :func:`connect`; across variables of
a connect set are equated and through variables sum to zero, each through
variable being counted positive into its component.  :func:`flatten` merges
everything into a :class:`FlatSystem`, :func:`alias_eliminate` removes trivial
equalities and :func:`structural_check` verifies the result is square and
structurally nonsingular.
"""
from __future__ import annotations

import enum
from dataclasses import dataclass, field, replace
from typing import Iterable, Mapping, Sequence

import numpy as np
from scipy.sparse import csr_matrix
from scipy.sparse.csgraph import maximum_bipartite_matching

from .expr import (
    Binary, Const, Expr, Param, Unary, Var, as_expr, evaluate, parameters,
    render, simplify, substitute, variables,
)

TIME = "time"


class ModelError(ValueError):
    """Invalid connector, component or connection."""


class Role(str, enum.Enum):
    ACROSS = "across"
    THROUGH = "through"
    INTERNAL = "internal"
    PARAMETER = "parameter"
    RAMP_STATE = "ramp-state"

    def __str__(self):
        return self.value


# -- connectors ---------------------------------------------------------------

@dataclass(frozen=True)
class ConnectorVariable:
    name: str
    role: Role
    unit: str = ""
    guess: float = 0.0


@dataclass(frozen=True)
class ConnectorType:
    name: str
    variables: tuple[ConnectorVariable, ...]
    attributes: tuple[str, ...] = ()

    @property
    def across(self) -> list[ConnectorVariable]:
        return [v for v in self.variables if v.role is Role.ACROSS]

    @property
    def through(self) -> list[ConnectorVariable]:
        return [v for v in self.variables if v.role is Role.THROUGH]

    def variable(self, name: str) -> ConnectorVariable:
        for v in self.variables:
            if v.name == name:
                return v
        raise ModelError(f"connector {self.name} has no variable {name!r}")


CONNECTORS: dict[str, ConnectorType] = {}


def declare_connector(name: str, variables: Sequence, attributes: Sequence[str] = ()) -> ConnectorType:
    """Validate and register a connector type.

    ``variables`` holds :class:`ConnectorVariable` objects or
    ``(name, role, unit[, guess])`` tuples.  Re-declaring an identical type
    returns the registered one.
    """
    vs = []
    for v in variables:
        if not isinstance(v, ConnectorVariable):
            v = ConnectorVariable(v[0], Role(v[1]), *v[2:])
        if v.role not in (Role.ACROSS, Role.THROUGH):
            raise ModelError(f"connector variable {v.name!r} must be across or through, not {v.role}")
        vs.append(v)
    if not vs:
        raise ModelError(f"connector {name!r} declares no variables")
    names = [v.name for v in vs] + list(attributes)
    dupes = sorted({n for n in names if names.count(n) > 1})
    if dupes:
        raise ModelError(f"connector {name!r} has duplicate names {dupes}")
    ct = ConnectorType(name, tuple(vs), tuple(attributes))
    existing = CONNECTORS.get(name)
    if existing is not None:
        if existing != ct:
            raise ModelError(f"connector {name!r} already declared differently")
        return existing
    CONNECTORS[name] = ct
    return ct


class Node:
    """A port instance: one connector type attached to one component."""

    __slots__ = ("component", "port", "connector", "attrs")

    def __init__(self, component: str, port: str, connector: ConnectorType, attrs: Mapping[str, float]):
        unknown = set(attrs) - set(connector.attributes)
        if unknown:
            raise ModelError(f"{connector.name} has no attributes {sorted(unknown)}")
        self.component = component
        self.port = port
        self.connector = connector
        self.attrs = {a: float(attrs.get(a, 0.0)) for a in connector.attributes}

    @property
    def path(self) -> str:
        return f"{self.component}.{self.port}"

    def qualified(self, name: str) -> str:
        self.connector.variable(name)
        return f"{self.path}.{name}"

    def var(self, name: str) -> Var:
        return Var(self.qualified(name))

    def __getattr__(self, name):
        if name.startswith("_"):
            raise AttributeError(name)
        conn = object.__getattribute__(self, "connector")
        if any(v.name == name for v in conn.variables):
            return self.var(name)
        attrs = object.__getattribute__(self, "attrs")
        if name in attrs:
            return attrs[name]
        raise AttributeError(f"{conn.name} node has no variable or attribute {name!r}")

    def __repr__(self):
        return f"Node({self.path}: {self.connector.name})"


# -- components ---------------------------------------------------------------

@dataclass(frozen=True)
class Parameter:
    value: float
    unit: str = ""


@dataclass(frozen=True)
class Internal:
    name: str
    role: Role = Role.INTERNAL
    unit: str = ""
    guess: float = 0.0


@dataclass(frozen=True)
class Ramp:
    """Closure ``variable = u0 + rate * time`` for a linearly ramped state."""
    variable: str
    u0: str
    rate: str


def _check_name(name: str, what: str):
    if not name or "." in name or not name.replace("_", "a").isalnum():
        raise ModelError(f"invalid {what} name {name!r}")


class Component:
    """A component instance under construction.

    Builders create one, add nodes, parameters and equations, and hand it out;
    it is not modified afterwards.
    """

    def __init__(self, name: str, kind: str = "", boundary: bool = False):
        _check_name(name, "instance")
        self.name = name
        self.kind = kind or type(self).__name__
        self.boundary = boundary
        self.nodes: dict[str, Node] = {}
        self.params: dict[str, Parameter] = {}
        self.internals: dict[str, Internal] = {}
        self.equations: list[Expr] = []
        self.ramps: list[Ramp] = []

    def __repr__(self):
        return f"<{self.kind} {self.name}>"

    def __getitem__(self, port: str) -> Node:
        try:
            return self.nodes[port]
        except KeyError:
            raise ModelError(f"{self.name} has no port {port!r}") from None

    def add_node(self, port: str, connector: ConnectorType, **attrs: float) -> Node:
        _check_name(port, "port")
        if port in self.nodes or port in self.params or port in self.internals:
            raise ModelError(f"{self.name}: duplicate name {port!r}")
        node = Node(self.name, port, connector, attrs)
        self.nodes[port] = node
        return node

    def add_param(self, name: str, value: float, unit: str = "") -> Param:
        _check_name(name, "parameter")
        if name in self.params or name in self.nodes or name in self.internals:
            raise ModelError(f"{self.name}: duplicate name {name!r}")
        self.params[name] = Parameter(float(value), unit)
        return Param(f"{self.name}.{name}")

    def add_internal(self, name: str, unit: str = "", guess: float = 0.0,
                     role: Role = Role.INTERNAL) -> Var:
        _check_name(name, "variable")
        if name in self.params or name in self.nodes or name in self.internals:
            raise ModelError(f"{self.name}: duplicate name {name!r}")
        if role is Role.RAMP_STATE and not self.boundary:
            raise ModelError(f"{self.name}: ramp states are only allowed in boundary components")
        self.internals[name] = Internal(name, role, unit, guess)
        return Var(f"{self.name}.{name}")

    def add_ramp(self, name: str, u0: float, rate: float, unit: str = "") -> Var:
        """Add a ramp-state variable closed as ``u0 + rate * time`` at flatten time."""
        x = self.add_internal(name, unit, guess=u0, role=Role.RAMP_STATE)
        self.add_param(f"{name}_u0", u0, unit)
        self.add_param(f"{name}_rate", rate, f"{unit}/s" if unit else "1/s")
        self.ramps.append(Ramp(x.name, f"{self.name}.{name}_u0", f"{self.name}.{name}_rate"))
        return x

    def add_equation(self, residual) -> None:
        e = as_expr(residual)
        own = self.variable_names()
        for v in variables(e):
            if v not in own:
                raise ModelError(f"{self.name}: equation references foreign variable {v!r}")
        for p in parameters(e):
            if not (p.startswith(self.name + ".") and p[len(self.name) + 1:] in self.params) and p != TIME:
                raise ModelError(f"{self.name}: equation references unknown parameter {p!r}")
        self.equations.append(e)

    def variable_names(self) -> list[str]:
        out = [n.qualified(v.name) for n in self.nodes.values() for v in n.connector.variables]
        out += [f"{self.name}.{i}" for i in self.internals]
        return out


# -- connections ---------------------------------------------------------------

@dataclass(frozen=True)
class ConnectSet:
    nodes: tuple[Node, ...]

    @property
    def connector(self) -> ConnectorType:
        return self.nodes[0].connector

    def __repr__(self):
        return f"connect({', '.join(n.path for n in self.nodes)})"


def connect(*nodes: Node) -> ConnectSet:
    if len(nodes) == 1 and not isinstance(nodes[0], Node):
        nodes = tuple(nodes[0])
    if len(nodes) < 2:
        raise ModelError("a connect set needs at least two nodes")
    ct = nodes[0].connector
    for n in nodes[1:]:
        if n.connector != ct:
            raise ModelError(f"cannot connect {nodes[0].path} ({ct.name}) with {n.path} ({n.connector.name})")
    paths = [n.path for n in nodes]
    if len(set(paths)) != len(paths):
        raise ModelError(f"node listed twice in connect({', '.join(paths)})")
    return ConnectSet(tuple(nodes))


def generate_connection_equations(c: ConnectSet) -> list[Expr]:
    """Across variables equated to the first node; one signed sum per through variable."""
    first = c.nodes[0]
    eqs: list[Expr] = []
    for v in c.connector.across:
        for other in c.nodes[1:]:
            eqs.append(first.var(v.name) - other.var(v.name))
    for v in c.connector.through:
        total: Expr = first.var(v.name)
        for other in c.nodes[1:]:
            total = total + other.var(v.name)
        eqs.append(total)
    return eqs


def resolve_connections(components, paths) -> list[ConnectSet]:
    """Turn ``("Comp.port", ...)`` tuples into connect sets."""
    by_name = {c.name: c for c in components}
    sets = []
    for group in paths:
        nodes = []
        for path in group:
            comp, _, port = path.partition(".")
            if comp not in by_name:
                raise ModelError(f"connect path {path!r}: no component {comp!r}")
            nodes.append(by_name[comp][port])
        sets.append(connect(*nodes))
    return sets



# -- flat system -----------------------------------------------------------------

@dataclass(frozen=True)
class VariableInfo:
    name: str
    role: Role
    unit: str
    guess: float
    component: str


@dataclass(frozen=True)
class Equation:
    residual: Expr
    label: str
    kind: str = "internal"  # internal | across | through | ramp

    def __str__(self):
        return f"[{self.label}] {render(self.residual)} = 0"


@dataclass(frozen=True)
class FlatSystem:
    variables: tuple[VariableInfo, ...]
    equations: tuple[Equation, ...]
    parameters: Mapping[str, float]
    parameter_units: Mapping[str, str] = field(default_factory=dict)
    aliases: Mapping[str, Expr] = field(default_factory=dict)
    connect_sets: tuple[ConnectSet, ...] = ()
    ramps: tuple[Ramp, ...] = ()
    original_equations: tuple[Equation, ...] = ()
    redundant: int = 0
    eliminated: bool = False

    @property
    def unknowns(self) -> list[str]:
        return [v.name for v in self.variables if v.name not in self.aliases]

    def variable(self, name: str) -> VariableInfo:
        for v in self.variables:
            if v.name == name:
                return v
        raise KeyError(name)

    @property
    def across_equality_count(self) -> int:
        eqs = self.original_equations if self.eliminated else self.equations
        return sum(1 for e in eqs if e.kind == "across")

    def expand(self, values: Mapping[str, float], params: Mapping[str, float] | None = None) -> dict[str, float]:
        """Extend a solution of the unknowns to every variable through the alias map."""
        env = dict(values)
        if self.aliases:
            lookup = {**self.parameters, **(params or {}), **env}
            for name, e in self.aliases.items():
                env[name] = evaluate(e, lookup)
        return {v.name: env[v.name] for v in self.variables}


def flatten(components: Sequence[Component], connects: Iterable[ConnectSet] = ()) -> FlatSystem:
    """Merge component and connection equations into one system.

    Variables are qualified ``instance.port.var`` and ordered by component,
    port and connector declaration; equations list every component's internal
    equations first, then connection equations in connect order.
    """
    by_name: dict[str, Component] = {}
    for comp in components:
        if comp.name in by_name:
            raise ModelError(f"duplicate component instance name {comp.name!r}")
        by_name[comp.name] = comp
    connects = tuple(connects)
    for cs in connects:
        for n in cs.nodes:
            comp = by_name.get(n.component)
            if comp is None or comp.nodes.get(n.port) is not n:
                raise ModelError(f"connect references {n.path}, which belongs to no listed component")

    var_infos: list[VariableInfo] = []
    params: dict[str, float] = {}
    units: dict[str, str] = {}
    eqs: list[Equation] = []
    ramps: list[Ramp] = []
    for comp in components:
        for node in comp.nodes.values():
            for v in node.connector.variables:
                var_infos.append(VariableInfo(node.qualified(v.name), v.role, v.unit, v.guess, comp.name))
        for i in comp.internals.values():
            var_infos.append(VariableInfo(f"{comp.name}.{i.name}", i.role, i.unit, i.guess, comp.name))
        for pname, p in comp.params.items():
            params[f"{comp.name}.{pname}"] = p.value
            units[f"{comp.name}.{pname}"] = p.unit
        for k, e in enumerate(comp.equations):
            eqs.append(Equation(e, f"{comp.name}#{k}"))
        ramps.extend(comp.ramps)

    # ramp-state closure: x = u0 + rate * time
    if ramps or any(TIME in parameters(e.residual) for e in eqs):
        params[TIME] = 0.0
        units[TIME] = "s"
    for r in ramps:
        closure = Var(r.variable) - (Param(r.u0) + Param(r.rate) * Param(TIME))
        eqs.append(Equation(closure, f"{r.variable}@ramp", "ramp"))

    for k, cs in enumerate(connects):
        first = cs.nodes[0]
        for v in cs.connector.across:
            for other in cs.nodes[1:]:
                eqs.append(Equation(first.var(v.name) - other.var(v.name), f"connect#{k}.{v.name}", "across"))
        through = generate_connection_equations(cs)[len(cs.connector.across) * (len(cs.nodes) - 1):]
        for v, e in zip(cs.connector.through, through):
            eqs.append(Equation(e, f"connect#{k}.{v.name}", "through"))

    names = [v.name for v in var_infos]
    if len(set(names)) != len(names):
        dupes = sorted({n for n in names if names.count(n) > 1})
        raise ModelError(f"qualified variable name collision: {dupes}")
    clash = set(names) & set(params)
    if clash:
        raise ModelError(f"names used as both variable and parameter: {sorted(clash)}")

    return FlatSystem(
        variables=tuple(var_infos),
        equations=tuple(eqs),
        parameters=params,
        parameter_units=units,
        connect_sets=connects,
        ramps=tuple(ramps),
    )


# -- alias elimination ---------------------------------------------------------------

def _alias_pair(e: Expr):
    """Return ``(a, b, s)`` if ``e`` states ``a = s*b`` for two variables."""
    if isinstance(e, Binary) and isinstance(e.left, Var) and isinstance(e.right, Var):
        if e.op == "-":
            return e.left.name, e.right.name, 1
        if e.op == "+":
            return e.left.name, e.right.name, -1
    return None


def alias_eliminate(fs: FlatSystem) -> FlatSystem:
    """Remove equations ``x - y = 0`` and ``x + y = 0`` by substitution.

    Equality classes are tracked with a signed union-find; each class is
    represented by its earliest variable in table order.  Equations that
    collapse to ``0 = 0`` are dropped and counted in ``redundant``.
    """
    if fs.eliminated:
        return fs
    order = {v.name: i for i, v in enumerate(fs.variables)}
    parent: dict[str, tuple[str, int]] = {}

    def find(v: str) -> tuple[str, int]:
        p, s = parent.get(v, (v, 1))
        if p == v:
            return v, 1
        root, s2 = find(p)
        parent[v] = (root, s * s2)
        return root, s * s2

    kept: list[Equation] = []
    redundant = 0
    for eq in fs.equations:
        pair = _alias_pair(simplify(eq.residual))
        if pair is None or pair[0] == pair[1]:
            kept.append(eq)
            continue
        a, b, s = pair
        ra, sa = find(a)
        rb, sb = find(b)
        if ra == rb:
            if sa == s * sb:
                redundant += 1
            else:
                kept.append(eq)
            continue
        if order[ra] < order[rb]:
            parent[rb] = (ra, sa * s * sb)
        else:
            parent[ra] = (rb, sa * s * sb)

    aliases: dict[str, Expr] = {}
    for v in fs.variables:
        root, s = find(v.name)
        if root != v.name:
            aliases[v.name] = Var(root) if s == 1 else Unary("neg", Var(root))

    reduced: list[Equation] = []
    for eq in kept:
        r = simplify(substitute(eq.residual, aliases)) if aliases else simplify(eq.residual)
        if isinstance(r, Const) and r.value == 0.0:
            redundant += 1
            continue
        reduced.append(replace(eq, residual=r))

    return replace(
        fs,
        equations=tuple(reduced),
        aliases=aliases,
        original_equations=fs.equations,
        redundant=fs.redundant + redundant,
        eliminated=True,
    )


# -- structural analysis ---------------------------------------------------------------

@dataclass
class StructuralReport:
    n_equations: int
    n_unknowns: int
    n_aliases: int
    n_redundant: int
    matching_size: int
    unmatched_variables: list[str]
    unmatched_equations: list[str]
    inconsistent_equations: list[str]

    @property
    def square(self) -> bool:
        return self.n_equations == self.n_unknowns

    @property
    def ok(self) -> bool:
        return (self.square and self.matching_size == self.n_unknowns
                and not self.inconsistent_equations)

    @property
    def status(self) -> str:
        if self.ok:
            return "ok"
        if self.inconsistent_equations:
            return "inconsistent"
        if self.n_equations < self.n_unknowns:
            return "under-determined"
        if self.n_equations > self.n_unknowns:
            return "over-determined"
        return "structurally singular"

    def format(self) -> str:
        lines = [
            f"status: {self.status}",
            f"equations: {self.n_equations}",
            f"unknowns: {self.n_unknowns}",
            f"aliases eliminated: {self.n_aliases}",
            f"redundant equations dropped: {self.n_redundant}",
            f"matching: {self.matching_size}/{self.n_unknowns}",
        ]
        if self.unmatched_variables:
            lines.append("unmatched variables: " + ", ".join(self.unmatched_variables))
        if self.unmatched_equations:
            lines.append("unmatched equations: " + ", ".join(self.unmatched_equations))
        if self.inconsistent_equations:
            lines.append("inconsistent equations: " + ", ".join(self.inconsistent_equations))
        return "\n".join(lines)


def incidence(fs: FlatSystem) -> csr_matrix:
    """Equation x unknown occurrence matrix."""
    col = {n: j for j, n in enumerate(fs.unknowns)}
    rows, cols = [], []
    for i, eq in enumerate(fs.equations):
        for v in variables(eq.residual):
            if v in col:
                rows.append(i)
                cols.append(col[v])
    data = np.ones(len(rows), dtype=np.int8)
    return csr_matrix((data, (rows, cols)), shape=(len(fs.equations), len(col)))


def structural_check(fs: FlatSystem) -> StructuralReport:
    """Count equations and unknowns and run a maximum bipartite matching."""
    unknowns = fs.unknowns
    inconsistent = [eq.label for eq in fs.equations if not variables(eq.residual)]
    if fs.equations and unknowns:
        match = maximum_bipartite_matching(incidence(fs), perm_type="column")
    else:
        match = np.full(len(fs.equations), -1)
    matched_cols = {int(j) for j in match if j >= 0}
    return StructuralReport(
        n_equations=len(fs.equations),
        n_unknowns=len(unknowns),
        n_aliases=len(fs.aliases),
        n_redundant=fs.redundant,
        matching_size=len(matched_cols),
        unmatched_variables=[n for j, n in enumerate(unknowns) if j not in matched_cols],
        unmatched_equations=[fs.equations[i].label for i, j in enumerate(match)
                             if j < 0 and fs.equations[i].label not in inconsistent],
        inconsistent_equations=inconsistent,
    )


def dump(fs: FlatSystem) -> str:
    """Deterministic text listing of variables, aliases, parameters and equations."""
    out = [f"# flat system ({'alias-eliminated' if fs.eliminated else 'raw'})"]
    out.append(f"variables {len(fs.variables)}")
    for v in fs.variables:
        mark = " (alias)" if v.name in fs.aliases else ""
        out.append(f"  {v.name} {v.role} [{v.unit}]{mark}")
    out.append(f"aliases {len(fs.aliases)}")
    for name, e in fs.aliases.items():
        out.append(f"  {name} := {render(e)}")
    out.append(f"parameters {len(fs.parameters)}")
    for name in sorted(fs.parameters):
        out.append(f"  {name} = {fs.parameters[name]!r} [{fs.parameter_units.get(name, '')}]")
    out.append(f"equations {len(fs.equations)}")
    for eq in fs.equations:
        out.append(f"  {eq}")
    return "\n".join(out) + "\n"
