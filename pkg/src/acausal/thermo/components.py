"""Thermodynamic process components on unit-mass stream ports."""
from __future__ import annotations

import enum

from ..expr import Call, Expr
from ..model import Component, ModelError, Node, declare_connector, resolve_connections
from .backends import (
    PROPERTIES, FluidPropertyBackend, PropertyError, PropertyFunction,
    SaturationFunction, ToyWaterBackend, canonical_property,
)

STREAM_PORT = declare_connector(
    "StreamPort",
    [
        ("p", "across", "Pa", 101325.0),
        ("T", "across", "K", 300.0),
        ("rho", "across", "kg/m^3", 1.0),
        ("h", "across", "J/kg", 1.0e5),
        ("s", "across", "J/(kg*K)", 1.0e3),
    ],
)

PROPERTY_UNITS = {v.name: v.unit for v in STREAM_PORT.variables}


class ProcessKind(str, enum.Enum):
    ISOTHERMAL = "isothermal"
    ISOBARIC = "isobaric"
    ISENTROPIC = "isentropic"
    ISENTHALPIC = "isenthalpic"
    ISOCHORIC = "isochoric"

    @property
    def pinned(self) -> str:
        return _PINNED[self]


_PINNED = {
    ProcessKind.ISOTHERMAL: "T",
    ProcessKind.ISOBARIC: "p",
    ProcessKind.ISENTROPIC: "s",
    ProcessKind.ISENTHALPIC: "h",
    ProcessKind.ISOCHORIC: "rho",
}


def parse_inter_state(inter_state: str) -> tuple[str, int | None]:
    """``"P"``/``"T"``/... -> (property, None); ``"Q_0"``/``"Q_1"`` -> ("Q", quality)."""
    if inter_state in ("Q_0", "Q_1", "Q0", "Q1"):
        return "Q", int(inter_state[-1])
    return canonical_property(inter_state), None


def state_closure(port: Node, known_a: str, known_b: str, backend: FluidPropertyBackend) -> list[Expr]:
    """Residuals fixing the three remaining properties of ``port`` from two known ones."""
    a, b = canonical_property(known_a), canonical_property(known_b)
    if a == b:
        raise ModelError(f"state closure needs two different properties, got ({a}, {b})")
    try:
        backend.check_pair(a, b)
    except PropertyError as exc:
        raise ModelError(str(exc)) from None
    args = [port.var(a), port.var(b)]
    return [port.var(y) - Call(PropertyFunction(backend, (a, b), y), args)
            for y in PROPERTIES if y not in (a, b)]


def saturation_closure(port: Node, quality: int, known: str, backend: FluidPropertyBackend) -> list[Expr]:
    """Residuals putting ``port`` on the saturated-liquid (0) or -vapour (1) line."""
    known = canonical_property(known)
    if not backend.supports_saturation:
        raise ModelError(f"{backend.fluid} backend has no saturation closure")
    if known not in ("p", "T"):
        raise ModelError(f"saturation closure needs p or T, not {known}")
    return [port.var(y) - Call(SaturationFunction(backend, quality, known, y), [port.var(known)])
            for y in PROPERTIES if y != known]


_KIND_TAGS = {
    ProcessKind.ISOTHERMAL: "IsothermalProcess",
    ProcessKind.ISOBARIC: "IsobaricProcess",
    ProcessKind.ISENTROPIC: "IsentropicProcess",
    ProcessKind.ISENTHALPIC: "IsenthalpyProcess",
    ProcessKind.ISOCHORIC: "IsochoricProcess",
}


def make_process(name: str, kind: ProcessKind | str, inter_state: str,
                 backend: FluidPropertyBackend) -> Component:
    """Process holding one property fixed between ``in`` and ``out``.

    The outlet state is closed from the pinned property plus ``inter_state``
    (another property, whose value comes from the connected network, or a
    saturation flag ``"Q_0"``/``"Q_1"``).
    """
    kind = ProcessKind(kind)
    pinned = kind.pinned
    prop, quality = parse_inter_state(inter_state)
    if prop == pinned:
        raise ModelError(f"{kind.value} process can't take {inter_state!r} as its second state; "
                         f"{pinned} is already fixed by the process")
    comp = Component(name, _KIND_TAGS[kind])
    inlet = comp.add_node("in", STREAM_PORT)
    outlet = comp.add_node("out", STREAM_PORT)
    comp.add_equation(outlet.var(pinned) - inlet.var(pinned))
    if quality is None:
        closure = state_closure(outlet, pinned, prop, backend)
    else:
        closure = saturation_closure(outlet, quality, pinned, backend)
    for r in closure:
        comp.add_equation(r)
    return comp


def make_boundary_state(name: str, state: str, value: float | None = None, *,
                        rate: float | None = None, u0: float | None = None) -> Component:
    """Pin one property of a stream node, either fixed or ramped as ``u0 + rate*t``."""
    prop = canonical_property(state)
    comp = Component(name, "ThermalStates" if rate is None else "DThermalStates", boundary=True)
    node = comp.add_node("node", STREAM_PORT)
    unit = PROPERTY_UNITS[prop]
    if rate is None:
        if value is None:
            raise ModelError(f"{name}: fixed boundary state needs a value")
        comp.add_equation(node.var(prop) - comp.add_param("value", value, unit))
        return comp
    if prop not in ("p", "T"):
        raise ModelError(f"{name}: only p or T can be ramped, not {prop}")
    if u0 is None:
        raise ModelError(f"{name}: ramped boundary state needs u0")
    x = comp.add_ramp("x", u0, rate, unit)
    comp.add_equation(node.var(prop) - x)
    return comp


def make_source_state(name: str, a: str, va: float, b: str, vb: float,
                      backend: FluidPropertyBackend) -> Component:
    """A stream node fully specified by two property values."""
    a, b = canonical_property(a), canonical_property(b)
    comp = Component(name, "SourceState", boundary=True)
    node = comp.add_node("node", STREAM_PORT)
    comp.add_equation(node.var(a) - comp.add_param(f"{a}_value", va, PROPERTY_UNITS[a]))
    comp.add_equation(node.var(b) - comp.add_param(f"{b}_value", vb, PROPERTY_UNITS[b]))
    for r in state_closure(node, a, b, backend):
        comp.add_equation(r)
    return comp


RANKINE_CONNECTIONS = (
    ("pump.out", "boiler.in", "pump_P.node"),
    ("boiler.out", "turbine.in", "boiler_T.node"),
    ("turbine.out", "reboiler.in", "turbine_P.node"),
    ("reboiler.out", "returbine.in", "reboiler_T.node"),
    ("returbine.out", "condenser.in", "returbine_P.node"),
    ("condenser.out", "pump.in"),
)
RANKINE_PROCESSES = ("pump", "boiler", "turbine", "reboiler", "returbine", "condenser")


def build_rankine(backend: FluidPropertyBackend | None = None, pump_rate: float = -1.0e5,
                  pump_u0: float = 18.0e6):
    """Reheat Rankine cycle with a ramped pump outlet pressure; returns ``(components, connects)``."""
    backend = backend or ToyWaterBackend()
    comps = [
        make_process("pump", "isentropic", "P", backend),
        make_boundary_state("pump_P", "P", rate=pump_rate, u0=pump_u0),
        make_process("boiler", "isobaric", "T", backend),
        make_boundary_state("boiler_T", "T", 550 + 273.15),
        make_process("turbine", "isentropic", "P", backend),
        make_boundary_state("turbine_P", "P", 3.0e6),
        make_process("reboiler", "isobaric", "T", backend),
        make_boundary_state("reboiler_T", "T", 450 + 273.15),
        make_process("returbine", "isentropic", "P", backend),
        make_boundary_state("returbine_P", "P", 4.0e3),
        make_process("condenser", "isothermal", "Q_0", backend),
    ]
    return comps, resolve_connections(comps, RANKINE_CONNECTIONS)
