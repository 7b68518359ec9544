"""DC circuit components on a voltage/current pin."""
from __future__ import annotations

from .model import Component, ModelError, declare_connector

PIN = declare_connector("Pin", [("v", "across", "V", 0.0), ("i", "through", "A", 0.0)])


def make_resistor(name: str, R: float) -> Component:
    if not R > 0:
        raise ModelError(f"{name}: resistance must be positive, got {R!r}")
    comp = Component(name, "Resistor")
    p = comp.add_node("p", PIN)
    n = comp.add_node("n", PIN)
    comp.add_equation(p.v - n.v - comp.add_param("R", R, "Ohm") * p.i)
    comp.add_equation(p.i + n.i)
    return comp


def make_voltage_source(name: str, V: float) -> Component:
    comp = Component(name, "VoltageSource")
    p = comp.add_node("p", PIN)
    n = comp.add_node("n", PIN)
    comp.add_equation(p.v - n.v - comp.add_param("V", V, "V"))
    comp.add_equation(p.i + n.i)
    return comp


def make_ground(name: str) -> Component:
    comp = Component(name, "Ground", boundary=True)
    pin = comp.add_node("pin", PIN)
    comp.add_equation(pin.v)
    return comp
