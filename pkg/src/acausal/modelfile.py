"""Declarative model documents.

A model file is YAML::

    version: 1
    options: {tol: 1.0e-9, literal_q2: false, backend: {type: toy_water}}
    components:
      - {type: Sink_P, name: A, params: {p: 101325}}
      - {type: SimplePipe, name: Pipe1, params: {L: 2.0}}
    connections:
      - [A.port, Pipe1.in]
    sweep: {times: [0, 10, 20], path: pump_P, rate: -1.0e5, u0: 18.0e6}

``sweep.times`` may also be given as ``{start, stop, step}``.  ``path``,
``rate`` and ``u0`` are optional and override the named ramp component.
"""
from __future__ import annotations

import math
import os
from dataclasses import dataclass, field
from pathlib import Path
from typing import Any, Callable

import yaml

from . import circuit, hydraulics
from .model import Component, ConnectSet, ModelError, connect
from .solve import RampSchedule, SolveOptions
from .thermo import IdealGasBackend, ToyWaterBackend
from .thermo import components as thermo

FORMAT_VERSION = 1
FIXTURE_ENV = "ACAUSAL_FIXTURES"
PACKAGE_FIXTURES = Path(__file__).parent / "fixtures"


class ModelFileError(ModelError):
    pass


@dataclass(frozen=True)
class CatalogEntry:
    build: Callable[..., Component]
    numeric: tuple[str, ...] = ()
    text: tuple[str, ...] = ()
    required: tuple[str, ...] = ()
    needs_backend: bool = False
    uses_literal_q2: bool = False


def _process(kind):
    def build(name, backend, inter_state):
        return thermo.make_process(name, kind, inter_state, backend)
    return build


def _dthermal(name, state, u0, value=None, rate=None):
    if (value is None) == (rate is None):
        raise ModelError(f"{name}: DThermalStates takes the ramp rate as exactly one of 'value' or 'rate'")
    return thermo.make_boundary_state(name, state, rate=value if rate is None else rate, u0=u0)


def _pipe(name, literal_q2=False, zin=0.0, zout=0.0, **kw):
    return hydraulics.make_simple_pipe(name, zin=zin, zout=zout, literal_q2=literal_q2, **kw)


CATALOG: dict[str, CatalogEntry] = {
    "SimplePipe": CatalogEntry(_pipe, ("L", "D", "f", "K_inside", "zin", "zout"), uses_literal_q2=True),
    "CentrifugalPump": CatalogEntry(hydraulics.make_centrifugal_pump, ("D", "omega", "c0", "c1")),
    "Sink_P": CatalogEntry(hydraulics.make_sink_p, ("p",)),
    "IsothermalProcess": CatalogEntry(_process("isothermal"), text=("inter_state",),
                                      required=("inter_state",), needs_backend=True),
    "IsobaricProcess": CatalogEntry(_process("isobaric"), text=("inter_state",),
                                    required=("inter_state",), needs_backend=True),
    "IsentropicProcess": CatalogEntry(_process("isentropic"), text=("inter_state",),
                                      required=("inter_state",), needs_backend=True),
    "IsenthalpyProcess": CatalogEntry(_process("isenthalpic"), text=("inter_state",),
                                      required=("inter_state",), needs_backend=True),
    "IsochoricProcess": CatalogEntry(_process("isochoric"), text=("inter_state",),
                                     required=("inter_state",), needs_backend=True),
    "ThermalStates": CatalogEntry(thermo.make_boundary_state, ("value",), ("state",), ("state", "value")),
    "DThermalStates": CatalogEntry(_dthermal, ("value", "rate", "u0"), ("state",), ("state", "u0")),
    "SourceState": CatalogEntry(thermo.make_source_state, ("va", "vb"), ("a", "b"),
                                ("a", "va", "b", "vb"), needs_backend=True),
    "Resistor": CatalogEntry(circuit.make_resistor, ("R",), required=("R",)),
    "VoltageSource": CatalogEntry(circuit.make_voltage_source, ("V",), required=("V",)),
    "Ground": CatalogEntry(circuit.make_ground),
}
# alternative spelling of the same tag
CATALOG["IsoenthalpyProcess"] = CATALOG["IsenthalpyProcess"]

BACKENDS = {
    "toy_water": (ToyWaterBackend, ()),
    "ideal_gas": (IdealGasBackend, ("R", "cp", "T_ref", "p_ref", "h_ref", "s_ref")),
}

OPTION_KEYS = {"tol": float, "max_iterations": int, "literal_q2": bool, "backend": dict}


@dataclass
class ComponentDecl:
    type: str
    name: str
    params: dict[str, Any] = field(default_factory=dict)


@dataclass
class SweepSpec:
    times: list[float]
    path: str | None = None
    rate: float | None = None
    u0: float | None = None

    def schedule(self) -> RampSchedule:
        overrides = {}
        if self.path is not None:
            var = self.path if "." in self.path else f"{self.path}.x"
            if self.rate is not None:
                overrides[f"{var}_rate"] = self.rate
            if self.u0 is not None:
                overrides[f"{var}_u0"] = self.u0
        return RampSchedule(self.times, overrides)


@dataclass
class ModelDocument:
    components: list[ComponentDecl]
    connections: list[list[str]]
    options: dict[str, Any] = field(default_factory=dict)
    sweep: SweepSpec | None = None
    version: int = FORMAT_VERSION
    source: str = field(default="<memory>", compare=False)

    # -- building ----------------------------------------------------------------
    def backend(self):
        spec = self.options.get("backend") or {"type": "toy_water"}
        cls, keys = BACKENDS[spec["type"]]
        return cls(**{k: float(v) for k, v in spec.items() if k != "type"})

    def solve_options(self, tol: float | None = None) -> SolveOptions:
        kw = {}
        if "max_iterations" in self.options:
            kw["max_iterations"] = int(self.options["max_iterations"])
        t = tol if tol is not None else self.options.get("tol")
        if t is not None:
            kw["tol"] = float(t)
        return SolveOptions(**kw)

    def build(self, literal_q2: bool | None = None) -> tuple[list[Component], list[ConnectSet]]:
        lq2 = bool(self.options.get("literal_q2", False)) if literal_q2 is None else literal_q2
        backend = None
        comps: list[Component] = []
        for decl in self.components:
            entry = CATALOG[decl.type]
            kw = dict(decl.params)
            if entry.needs_backend:
                backend = backend or self.backend()
                kw["backend"] = backend
            if entry.uses_literal_q2:
                kw["literal_q2"] = lq2
            try:
                comps.append(entry.build(decl.name, **kw))
            except (ModelError, ValueError, TypeError) as exc:
                raise ModelFileError(f"{self.source}: component {decl.name!r}: {exc}") from None
        by_name = {c.name: c for c in comps}
        sets = []
        for k, group in enumerate(self.connections):
            nodes = []
            for path in group:
                cname, _, port = path.partition(".")
                comp = by_name.get(cname)
                if comp is None or port not in comp.nodes:
                    raise ModelFileError(f"{self.source}: connections[{k}]: dangling connect path {path!r}")
                nodes.append(comp.nodes[port])
            try:
                sets.append(connect(*nodes))
            except ModelError as exc:
                raise ModelFileError(f"{self.source}: connections[{k}]: {exc}") from None
        return comps, sets

    # -- serialization ---------------------------------------------------------------
    def to_dict(self) -> dict:
        d: dict[str, Any] = {"version": self.version}
        if self.options:
            d["options"] = self.options
        d["components"] = [
            {"type": c.type, "name": c.name, **({"params": c.params} if c.params else {})}
            for c in self.components
        ]
        d["connections"] = [list(g) for g in self.connections]
        if self.sweep is not None:
            s: dict[str, Any] = {"times": list(self.sweep.times)}
            for k in ("path", "rate", "u0"):
                if getattr(self.sweep, k) is not None:
                    s[k] = getattr(self.sweep, k)
            d["sweep"] = s
        return d

    def render(self) -> str:
        return yaml.safe_dump(self.to_dict(), sort_keys=False, default_flow_style=None, width=100)


# -- loading ----------------------------------------------------------------------------

def _line_map(node, path=(), out=None) -> dict[tuple, int]:
    out = {} if out is None else out
    out[path] = node.start_mark.line + 1
    if isinstance(node, yaml.MappingNode):
        for k, v in node.value:
            _line_map(v, path + (k.value,), out)
    elif isinstance(node, yaml.SequenceNode):
        for i, v in enumerate(node.value):
            _line_map(v, path + (i,), out)
    return out


class _Ctx:
    def __init__(self, source: str, lines: dict):
        self.source = source
        self.lines = lines

    def fail(self, path: tuple, msg: str):
        line = None
        for n in range(len(path), -1, -1):
            line = self.lines.get(path[:n])
            if line is not None:
                break
        where = "".join(f"[{p}]" if isinstance(p, int) else (f".{p}" if i else p) for i, p in enumerate(path))
        loc = f"{self.source}:{line}" if line else self.source
        raise ModelFileError(f"{loc}: {where or '<root>'}: {msg}")

    def number(self, path, value, kind=float):
        if isinstance(value, bool):
            self.fail(path, f"expected a number, got {value!r}")
        try:
            out = kind(float(value)) if kind is float else kind(value)
        except (TypeError, ValueError):
            self.fail(path, f"malformed number {value!r}")
        if kind is float and not math.isfinite(out):
            self.fail(path, f"number must be finite, got {value!r}")
        return out


def parse_model(text: str, source: str = "<string>") -> ModelDocument:
    """Parse and validate a model document from YAML text."""
    try:
        root = yaml.compose(text)
        data = yaml.safe_load(text)
    except yaml.YAMLError as exc:
        raise ModelFileError(f"{source}: {exc}") from None
    ctx = _Ctx(source, _line_map(root) if root is not None else {})
    if not isinstance(data, dict):
        ctx.fail((), "model file must be a mapping with 'components' and 'connections'")
    unknown = set(data) - {"version", "options", "components", "connections", "sweep"}
    if unknown:
        ctx.fail((), f"unknown top-level keys {sorted(unknown)}")
    version = data.get("version", FORMAT_VERSION)
    if version != FORMAT_VERSION:
        ctx.fail(("version",), f"unsupported format version {version!r}")

    comps_raw = data.get("components")
    if not isinstance(comps_raw, list) or not comps_raw:
        ctx.fail(("components",), "model declares no components")
    components = []
    seen = set()
    for i, c in enumerate(comps_raw):
        p = ("components", i)
        if not isinstance(c, dict):
            ctx.fail(p, "component must be a mapping")
        extra = set(c) - {"type", "name", "params"}
        if extra:
            ctx.fail(p, f"unknown keys {sorted(extra)}")
        ctype, name = c.get("type"), c.get("name")
        if ctype not in CATALOG:
            ctx.fail(p + ("type",), f"unknown component type {ctype!r}")
        if not isinstance(name, str) or not name:
            ctx.fail(p + ("name",), "component needs a string name")
        if name in seen:
            ctx.fail(p + ("name",), f"duplicate component name {name!r}")
        seen.add(name)
        entry = CATALOG[ctype]
        raw = c.get("params") or {}
        if not isinstance(raw, dict):
            ctx.fail(p + ("params",), "params must be a mapping")
        params = {}
        for k, v in raw.items():
            pp = p + ("params", k)
            if k in entry.numeric:
                params[k] = ctx.number(pp, v)
            elif k in entry.text:
                if not isinstance(v, str):
                    ctx.fail(pp, f"expected text, got {v!r}")
                params[k] = v
            else:
                ctx.fail(pp, f"{ctype} has no parameter {k!r}")
        missing = [k for k in entry.required if k not in params]
        if missing:
            ctx.fail(p + ("params",), f"{ctype} requires {missing}")
        components.append(ComponentDecl(ctype, name, params))

    conns_raw = data.get("connections") or []
    if not isinstance(conns_raw, list):
        ctx.fail(("connections",), "connections must be a list of lists")
    connections = []
    for i, g in enumerate(conns_raw):
        if not isinstance(g, list) or len(g) < 2 or not all(isinstance(s, str) for s in g):
            ctx.fail(("connections", i), "each connection is a list of at least two 'Component.port' paths")
        for j, s in enumerate(g):
            cname, dot, port = s.partition(".")
            if not dot or cname not in seen or not port:
                ctx.fail(("connections", i, j), f"dangling connect path {s!r}")
        connections.append(list(g))

    options = {}
    for k, v in (data.get("options") or {}).items():
        if k not in OPTION_KEYS:
            ctx.fail(("options", k), f"unknown option {k!r}")
        if k == "backend":
            if not isinstance(v, dict) or v.get("type") not in BACKENDS:
                ctx.fail(("options", k), f"backend must be a mapping with type in {sorted(BACKENDS)}")
            allowed = BACKENDS[v["type"]][1]
            b = {"type": v["type"]}
            for bk, bv in v.items():
                if bk == "type":
                    continue
                if bk not in allowed:
                    ctx.fail(("options", k, bk), f"backend {v['type']} has no constant {bk!r}")
                b[bk] = ctx.number(("options", k, bk), bv)
            options[k] = b
        elif k == "literal_q2":
            if not isinstance(v, bool):
                ctx.fail(("options", k), "literal_q2 must be true or false")
            options[k] = v
        elif k == "max_iterations":
            options[k] = ctx.number(("options", k), v, int)
        else:
            options[k] = ctx.number(("options", k), v)

    sweep = None
    if data.get("sweep") is not None:
        s = data["sweep"]
        if not isinstance(s, dict):
            ctx.fail(("sweep",), "sweep must be a mapping")
        extra = set(s) - {"times", "start", "stop", "step", "path", "rate", "u0"}
        if extra:
            ctx.fail(("sweep",), f"unknown keys {sorted(extra)}")
        if "times" in s:
            if not isinstance(s["times"], list) or not s["times"]:
                ctx.fail(("sweep", "times"), "times must be a non-empty list")
            times = [ctx.number(("sweep", "times", i), t) for i, t in enumerate(s["times"])]
        elif {"start", "stop", "step"} <= set(s):
            start, stop, step = (ctx.number(("sweep", k), s[k]) for k in ("start", "stop", "step"))
            if step <= 0 or stop < start:
                ctx.fail(("sweep",), "need step > 0 and stop >= start")
            n = int(round((stop - start) / step))
            times = [start + k * step for k in range(n + 1)]
        else:
            ctx.fail(("sweep",), "sweep needs 'times' or 'start'/'stop'/'step'")
        if any(b <= a for a, b in zip(times, times[1:])):
            ctx.fail(("sweep", "times"), "times must be strictly increasing")
        path = s.get("path")
        if path is not None and (not isinstance(path, str) or path.partition(".")[0] not in seen):
            ctx.fail(("sweep", "path"), f"sweep path {path!r} names no component")
        sweep = SweepSpec(
            times, path,
            ctx.number(("sweep", "rate"), s["rate"]) if "rate" in s else None,
            ctx.number(("sweep", "u0"), s["u0"]) if "u0" in s else None,
        )

    return ModelDocument(components, connections, options, sweep, version, source)


def fixture_dir() -> Path:
    env = os.environ.get(FIXTURE_ENV)
    return Path(env) if env else PACKAGE_FIXTURES


def resolve_path(path: str | os.PathLike) -> Path:
    """A readable file path, falling back to the fixture directory (``.yaml`` optional)."""
    p = Path(path)
    if p.is_file():
        return p
    base = fixture_dir()
    for cand in (base / p, base / f"{p}.yaml"):
        if cand.is_file():
            return cand
    raise FileNotFoundError(f"model file {str(path)!r} not found (also looked in {base})")


def load_model(path: str | os.PathLike) -> ModelDocument:
    p = resolve_path(path)
    return parse_model(p.read_text(), str(p))
