"""Incompressible pipe-flow components.

Heads are in metres.  Each :data:`PIPE_NODE` carries pressure ``p`` (across)
and volumetric flow ``q`` (through, positive into the component) plus a fixed
elevation attribute ``z``.  Velocity heads use ``v = 4q/(pi D^2)``, i.e.
``v^2/(2g) = 8 q^2 / (pi^2 D^4 g)``.

Losses are sign-aware by default (``q*|q|``) so that they always oppose the
flow; pass ``literal_q2=True`` for the plain ``q^2`` form.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, replace

from .expr import Const, Expr, as_expr, sq
from .model import Component, ModelError, Node, declare_connector, resolve_connections

PIPE_NODE = declare_connector(
    "PipeNode",
    [("p", "across", "Pa", 101325.0), ("q", "through", "m^3/s", 1e-3)],
    attributes=("z",),
)


@dataclass(frozen=True)
class HydraulicConstants:
    rho: float = 1000.0
    g: float = 9.80665

    def __post_init__(self):
        if not (self.rho > 0 and self.g > 0):
            raise ModelError("density and gravity must be positive")


WATER = HydraulicConstants()


@dataclass(frozen=True)
class PipeParams:
    L: float = 10.0
    D: float = 25e-3
    f: float = 0.01
    K_inside: float = 0.0

    def __post_init__(self):
        if not (self.L > 0 and self.D > 0):
            raise ModelError(f"pipe length and diameter must be positive (L={self.L}, D={self.D})")
        if self.f < 0 or self.K_inside < 0:
            raise ModelError(f"loss coefficients must be non-negative (f={self.f}, K={self.K_inside})")


@dataclass(frozen=True)
class PumpParams:
    D: float = 25e-3
    omega: float = 2500.0  # rev/min
    c0: float = 4.4e-4
    c1: float = 5.622

    def __post_init__(self):
        if not (self.D > 0 and self.omega > 0 and self.c0 > 0 and self.c1 >= 0):
            raise ModelError("pump requires D>0, omega>0, c0>0, c1>=0")

    @property
    def angular_speed(self) -> float:
        return self.omega * 2.0 * math.pi / 60.0

    @property
    def a0(self) -> float:
        """Shutoff head in metres."""
        return self.c0 * self.angular_speed ** 2

    @property
    def a1(self) -> float:
        return self.c1 * self.angular_speed


def _velocity_head_coeff(D, c: HydraulicConstants) -> Expr:
    D = as_expr(D)
    return Const(8.0) / (Const(math.pi ** 2 * c.g) * D ** 4)


def _q_sq(q: Expr, literal_q2: bool) -> Expr:
    return sq(q) if literal_q2 else q * abs(q)


def node_energy(n: Node, D, c: HydraulicConstants = WATER) -> Expr:
    """Total head ``p/(rho g) + 8 q^2/(pi^2 D^4 g) + z`` at a node."""
    if isinstance(D, (int, float)) and D <= 0:
        raise ModelError("diameter must be positive")
    return n.p / Const(c.rho * c.g) + _velocity_head_coeff(D, c) * sq(n.q) + Const(n.z)


def friction_loss(n: Node, f, L, D, c: HydraulicConstants = WATER, literal_q2: bool = False) -> Expr:
    return as_expr(f) * (as_expr(L) / as_expr(D)) * _velocity_head_coeff(D, c) * _q_sq(n.q, literal_q2)


def local_loss(n: Node, K, D, c: HydraulicConstants = WATER, literal_q2: bool = False) -> Expr:
    return as_expr(K) * _velocity_head_coeff(D, c) * _q_sq(n.q, literal_q2)


def make_simple_pipe(name: str, params: PipeParams | None = None, zin: float = 0.0, zout: float = 0.0,
                     c: HydraulicConstants = WATER, literal_q2: bool = False, **kw) -> Component:
    """Straight pipe with a fixed friction factor and a local loss coefficient.

    Keyword arguments ``L, D, f, K_inside`` override fields of ``params``.
    """
    params = PipeParams(**kw) if params is None else replace(params, **kw)
    comp = Component(name, "SimplePipe")
    inlet = comp.add_node("in", PIPE_NODE, z=zin)
    outlet = comp.add_node("out", PIPE_NODE, z=zout)
    D = comp.add_param("D", params.D, "m")
    L = comp.add_param("L", params.L, "m")
    f = comp.add_param("f", params.f)
    K = comp.add_param("K_inside", params.K_inside)
    comp.add_equation(
        node_energy(inlet, D, c)
        - (node_energy(outlet, D, c) + friction_loss(inlet, f, L, D, c, literal_q2)
           + local_loss(inlet, K, D, c, literal_q2))
    )
    comp.add_equation(inlet.q + outlet.q)
    return comp


def make_centrifugal_pump(name: str, params: PumpParams | None = None,
                          c: HydraulicConstants = WATER, **kw) -> Component:
    """Pump adding head ``a0 - a1*|q|`` between its ports."""
    params = PumpParams(**kw) if params is None else replace(params, **kw)
    comp = Component(name, "CentrifugalPump")
    inlet = comp.add_node("in", PIPE_NODE)
    outlet = comp.add_node("out", PIPE_NODE)
    D = comp.add_param("D", params.D, "m")
    comp.add_param("omega", params.omega, "rev/min")
    a0 = comp.add_param("a0", params.a0, "m")
    a1 = comp.add_param("a1", params.a1, "s/m^2")
    comp.add_equation(node_energy(inlet, D, c) + a0 - a1 * abs(inlet.q) - node_energy(outlet, D, c))
    comp.add_equation(inlet.q + outlet.q)
    return comp


def make_sink_p(name: str, p: float = 101325.0) -> Component:
    """Pressure boundary; its flow is whatever the network delivers."""
    if not math.isfinite(p):
        raise ModelError("sink pressure must be finite")
    comp = Component(name, "Sink_P", boundary=True)
    port = comp.add_node("port", PIPE_NODE, z=0.0)
    comp.add_equation(port.p - comp.add_param("p", p, "Pa"))
    return comp


# Pipe lengths and junctions of the 25-pipe example network.
FIG2_PIPE_LENGTHS = (2.0, 3.0, 7.0, 9.0, 5.0, 4.0, 5.0, 1.0, 10.0, 2.0, 2.0, 3.0, 12.0,
                     1.0, 2.0, 3.0, 6.0, 6.0, 6.0, 1.0, 1.0, 7.0, 3.0, 3.0, 2.0)
FIG2_CONNECTIONS = (
    ("A.port", "Pump.in"),
    ("Pump.out", "Pipe1.in"),
    ("Pipe1.out", "Pipe2.in", "Pipe5.in"),
    ("Pipe2.out", "Pipe3.in", "Pipe6.in"),
    ("Pipe3.out", "Pipe4.in", "Pipe7.in"),
    ("Pipe4.out", "Pipe10.out", "Pipe14.in"),
    ("Pipe5.out", "Pipe11.in", "Pipe12.in"),
    ("Pipe6.out", "Pipe8.in", "Pipe9.in"),
    ("Pipe7.out", "Pipe9.out", "Pipe10.in"),
    ("Pipe12.out", "Pipe8.out", "Pipe13.in"),
    ("Pipe13.out", "Pipe14.out", "Pipe15.in"),
    ("Pipe11.out", "Pipe19.in", "Pipe16.in"),
    ("Pipe16.out", "Pipe17.in", "Pipe20.in"),
    ("Pipe17.out", "Pipe18.in", "Pipe21.in"),
    ("Pipe18.out", "Pipe15.out", "Pipe22.in"),
    ("Pipe19.out", "Pipe20.out", "Pipe23.in"),
    ("Pipe21.out", "Pipe22.out", "Pipe24.in"),
    ("Pipe23.out", "Pipe24.out", "Pipe25.in"),
    ("B.port", "Pipe25.out"),
)


def build_fig2_network(pump: PumpParams | None = None, literal_q2: bool = False,
                       c: HydraulicConstants = WATER):
    """Pump plus 25 pipes between two atmospheric sinks; returns ``(components, connects)``."""
    comps = [make_sink_p("A"), make_sink_p("B"), make_centrifugal_pump("Pump", pump or PumpParams(), c)]
    comps += [make_simple_pipe(f"Pipe{k}", PipeParams(L=L), c=c, literal_q2=literal_q2)
              for k, L in enumerate(FIG2_PIPE_LENGTHS, start=1)]
    return comps, resolve_connections(comps, FIG2_CONNECTIONS)
