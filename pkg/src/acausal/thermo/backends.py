"""Fluid-property backends.

A backend maps any admissible pair of the five stream properties
``p, T, rho, h, s`` (SI units) to the full state.  Two analytic backends ship
with the package: a calorically perfect ideal gas and a coarse two-region
water model good enough to close a Rankine cycle.
"""
from __future__ import annotations

import functools
import math
from dataclasses import dataclass
from typing import ClassVar

from ..expr import ExternalFunction

PROPERTIES = ("p", "T", "rho", "h", "s")

# Upper-case letters follow the usual property-library argument convention.
_PROPERTY_NAMES = {
    "p": "p", "P": "p",
    "T": "T", "t": "T",
    "rho": "rho", "D": "rho", "d": "rho",
    "h": "h", "H": "h",
    "s": "s", "S": "s",
}


class PropertyError(ValueError):
    """State query outside what the backend can answer."""


def canonical_property(name: str) -> str:
    try:
        return _PROPERTY_NAMES[name]
    except KeyError:
        raise PropertyError(f"unknown property {name!r}; expected one of {PROPERTIES}") from None


def _pair(a: str, b: str) -> frozenset:
    a, b = canonical_property(a), canonical_property(b)
    if a == b:
        raise PropertyError(f"degenerate property pair ({a}, {b})")
    return frozenset((a, b))


def _positive(**kw):
    for k, v in kw.items():
        if not (v > 0 and math.isfinite(v)):
            raise PropertyError(f"{k} must be positive and finite, got {v!r}")


class FluidPropertyBackend:
    """Interface for property backends.

    ``admissible`` lists the property pairs per region that determine the
    state uniquely.
    """

    fluid: str = "fluid"
    supports_saturation: ClassVar[bool] = False
    admissible: ClassVar[dict[str, frozenset]] = {}

    def state(self, a: str, va: float, b: str, vb: float) -> dict[str, float]:
        raise NotImplementedError

    def saturated(self, quality: int, prop: str, value: float) -> dict[str, float]:
        raise PropertyError(f"{self.fluid} backend has no saturation closure")

    def is_admissible(self, a: str, b: str) -> bool:
        key = _pair(a, b)
        return any(key in pairs for pairs in self.admissible.values())

    def check_pair(self, a: str, b: str) -> None:
        if not self.is_admissible(a, b):
            raise PropertyError(f"{self.fluid}: pair ({a}, {b}) does not determine the state")


def _all_pairs(exclude=()):
    out = set()
    for i, a in enumerate(PROPERTIES):
        for b in PROPERTIES[i + 1:]:
            out.add(frozenset((a, b)))
    return frozenset(out - {frozenset(e) for e in exclude})


@dataclass(frozen=True)
class IdealGasBackend(FluidPropertyBackend):
    """Calorically perfect ideal gas.

    ``rho = p/(R T)``, ``h = cp (T - T_ref) + h_ref``,
    ``s = cp ln(T/T_ref) - R ln(p/p_ref) + s_ref``.  Enthalpy depends on
    temperature alone, so ``(T, h)`` is rejected.
    """

    R: float = 287.0
    cp: float = 1004.5
    T_ref: float = 298.15
    p_ref: float = 101325.0
    h_ref: float = 0.0
    s_ref: float = 0.0
    fluid: str = "ideal-gas"

    admissible: ClassVar[dict[str, frozenset]] = {"gas": _all_pairs(exclude=[("T", "h")])}

    def __post_init__(self):
        if not (self.R > 0 and self.cp > self.R):
            raise PropertyError("ideal gas needs R > 0 and cp > R")

    @property
    def k(self) -> float:
        """Isentropic exponent ``cp / cv``."""
        return self.cp / (self.cp - self.R)

    def from_Tp(self, T: float, p: float) -> dict[str, float]:
        _positive(T=T, p=p)
        return {
            "p": p,
            "T": T,
            "rho": p / (self.R * T),
            "h": self.cp * (T - self.T_ref) + self.h_ref,
            "s": self.cp * math.log(T / self.T_ref) - self.R * math.log(p / self.p_ref) + self.s_ref,
        }

    def _T_from_h(self, h):
        return self.T_ref + (h - self.h_ref) / self.cp

    def _p_from_Ts(self, T, s):
        _positive(T=T)
        return self.p_ref * math.exp((self.cp * math.log(T / self.T_ref) - (s - self.s_ref)) / self.R)

    def state(self, a, va, b, vb):
        key = _pair(a, b)
        v = {canonical_property(a): float(va), canonical_property(b): float(vb)}
        R, cp = self.R, self.cp
        if key == {"p", "T"}:
            T, p = v["T"], v["p"]
        elif key == {"p", "rho"}:
            _positive(rho=v["rho"])
            p = v["p"]
            T = p / (v["rho"] * R)
        elif key == {"p", "h"}:
            p, T = v["p"], self._T_from_h(v["h"])
        elif key == {"p", "s"}:
            p = v["p"]
            _positive(p=p)
            T = self.T_ref * math.exp((v["s"] - self.s_ref + R * math.log(p / self.p_ref)) / cp)
        elif key == {"T", "rho"}:
            T = v["T"]
            p = v["rho"] * R * T
        elif key == {"T", "s"}:
            T = v["T"]
            p = self._p_from_Ts(T, v["s"])
        elif key == {"rho", "h"}:
            T = self._T_from_h(v["h"])
            p = v["rho"] * R * T
        elif key == {"rho", "s"}:
            _positive(rho=v["rho"])
            arg = v["s"] - self.s_ref + R * math.log(v["rho"] * R * self.T_ref / self.p_ref)
            T = self.T_ref * math.exp(arg / (cp - R))
            p = v["rho"] * R * T
        elif key == {"h", "s"}:
            T = self._T_from_h(v["h"])
            p = self._p_from_Ts(T, v["s"])
        else:
            raise PropertyError("ideal gas: (T, h) does not determine the state (h depends on T only)")
        out = self.from_Tp(T, p)
        out.update(v)  # echo inputs exactly
        return out


@dataclass(frozen=True)
class ToyWaterBackend(FluidPropertyBackend):
    """Two-region water model.

    Liquid is incompressible (``rho_liq``, ``cp_liq``), vapour is an ideal gas
    (``R``, ``cp_vap``); the two meet on a Clausius-Clapeyron saturation curve
    through ``(T0, p0)`` with constant latent heat ``h_fg``.  Enthalpy and
    entropy are zero for liquid at ``(T0, p0)``.

    States inside the dome are mixtures by the lever rule on ``h``, ``s`` and
    specific volume; they are reachable from ``(p, h)``, ``(p, s)``,
    ``(p, rho)``, ``(T, h)``, ``(T, s)`` and ``(T, rho)``.
    """

    rho_liq: float = 1000.0
    cp_liq: float = 4186.0
    R: float = 461.5
    cp_vap: float = 1900.0
    T0: float = 373.15
    p0: float = 101325.0
    h_fg: float = 2.26e6
    T_sat_max: float = 900.0
    fluid: str = "toy-water"

    supports_saturation: ClassVar[bool] = True
    admissible: ClassVar[dict[str, frozenset]] = {
        "liquid": frozenset(map(frozenset, [("p", "T"), ("p", "h"), ("p", "s"), ("h", "s")])),
        "vapor": _all_pairs(exclude=[("T", "h")]),
        "two-phase": frozenset(map(frozenset, [("p", "h"), ("p", "s"), ("p", "rho"),
                                               ("T", "h"), ("T", "s"), ("T", "rho")])),
    }

    # -- saturation curve -----------------------------------------------------
    def p_sat(self, T: float) -> float:
        _positive(T=T)
        return self.p0 * math.exp(self.h_fg / self.R * (1.0 / self.T0 - 1.0 / T))

    def T_sat(self, p: float) -> float:
        _positive(p=p)
        inv = 1.0 / self.T0 - self.R * math.log(p / self.p0) / self.h_fg
        if inv <= 0:
            raise PropertyError(f"no saturation temperature for p={p!r}")
        return 1.0 / inv

    def _check_sat_T(self, T):
        if not 0 < T <= self.T_sat_max:
            raise PropertyError(f"saturation temperature {T!r} K outside model range (0, {self.T_sat_max}]")

    # -- single-phase relations -------------------------------------------------
    def liquid(self, T: float, p: float) -> dict[str, float]:
        _positive(T=T, p=p)
        return {
            "p": p, "T": T, "rho": self.rho_liq,
            "h": self.cp_liq * (T - self.T0) + (p - self.p0) / self.rho_liq,
            "s": self.cp_liq * math.log(T / self.T0),
        }

    def vapor(self, T: float, p: float) -> dict[str, float]:
        _positive(T=T, p=p)
        return {
            "p": p, "T": T, "rho": p / (self.R * T),
            "h": self.h_fg + self.cp_vap * (T - self.T0),
            "s": self.h_fg / self.T0 + self.cp_vap * math.log(T / self.T0) - self.R * math.log(p / self.p0),
        }

    def mixture(self, T: float, x: float, p: float | None = None) -> dict[str, float]:
        """Saturated mixture of vapour mass fraction ``x`` at ``T``."""
        self._check_sat_T(T)
        if not -1e-12 <= x <= 1.0 + 1e-12:
            raise PropertyError(f"quality {x!r} outside [0, 1]")
        p = self.p_sat(T) if p is None else p
        f, g = self.liquid(T, p), self.vapor(T, p)
        v = (1.0 - x) / f["rho"] + x / g["rho"]
        return {
            "p": p, "T": T, "rho": 1.0 / v,
            "h": f["h"] + x * (g["h"] - f["h"]),
            "s": f["s"] + x * (g["s"] - f["s"]),
        }

    def region(self, T: float, p: float) -> str:
        ps = self.p_sat(T)
        if p > ps:
            return "liquid"
        if p < ps:
            return "vapor"
        raise PropertyError(f"(p, T) = ({p!r}, {T!r}) lies on the saturation curve; quality undefined")

    def saturated(self, quality, prop, value):
        if quality not in (0, 1):
            raise PropertyError(f"saturation quality must be 0 or 1, got {quality!r}")
        prop = canonical_property(prop)
        if prop == "T":
            T = float(value)
            p = self.p_sat(T)
        elif prop == "p":
            p = float(value)
            T = self.T_sat(p)
        else:
            raise PropertyError("saturation closure needs p or T")
        self._check_sat_T(T)
        out = (self.liquid if quality == 0 else self.vapor)(T, p)
        return out

    # -- closures ---------------------------------------------------------------
    def state(self, a, va, b, vb):
        key = _pair(a, b)
        v = {canonical_property(a): float(va), canonical_property(b): float(vb)}
        if key == {"p", "T"}:
            T, p = v["T"], v["p"]
            out = self.liquid(T, p) if self.region(T, p) == "liquid" else self.vapor(T, p)
        elif key in ({"p", "h"}, {"p", "s"}):
            out = self._at_pressure(v)
        elif key == {"p", "rho"}:
            out = self._p_rho(v["p"], v["rho"])
        elif key in ({"T", "h"}, {"T", "s"}, {"T", "rho"}):
            out = self._at_temperature(v)
        elif key == {"h", "s"}:
            out = self._h_s(v["h"], v["s"])
        else:
            out = self._vapor_rho(v)
        out.update(v)
        return out

    def _at_pressure(self, v):
        p = v["p"]
        X = "h" if "h" in v else "s"
        val = v[X]
        Ts = self.T_sat(p)
        f, g = self.liquid(Ts, p), self.vapor(Ts, p)
        if val < f[X]:
            if X == "h":
                T = self.T0 + (val - (p - self.p0) / self.rho_liq) / self.cp_liq
            else:
                T = self.T0 * math.exp(val / self.cp_liq)
            return self.liquid(T, p)
        if val > g[X]:
            if X == "h":
                T = self.T0 + (val - self.h_fg) / self.cp_vap
            else:
                T = self.T0 * math.exp((val - self.h_fg / self.T0 + self.R * math.log(p / self.p0)) / self.cp_vap)
            return self.vapor(T, p)
        self._check_sat_T(Ts)
        return self.mixture(Ts, (val - f[X]) / (g[X] - f[X]), p)

    def _p_rho(self, p, rho):
        Ts = self.T_sat(p)
        rho_g = p / (self.R * Ts)
        if rho < rho_g:
            return self.vapor(p / (rho * self.R), p)
        if rho < self.rho_liq:
            self._check_sat_T(Ts)
            x = (1.0 / rho - 1.0 / self.rho_liq) / (1.0 / rho_g - 1.0 / self.rho_liq)
            return self.mixture(Ts, x, p)
        raise PropertyError(f"(p, rho): liquid density is constant, rho={rho!r} does not fix the state")

    def _at_temperature(self, v):
        T = v["T"]
        _positive(T=T)
        if T > self.T_sat_max:
            # no dome modelled this hot: vapour only
            if "rho" in v:
                _positive(rho=v["rho"])
                return self.vapor(T, v["rho"] * self.R * T)
            if "s" in v:
                return self.vapor(T, self._vapor_p_from_Ts(T, v["s"]))
            raise PropertyError(f"(T, h) does not fix a vapour state at T={T!r}")
        ps = self.p_sat(T)
        f, g = self.liquid(T, ps), self.vapor(T, ps)
        if "rho" in v:
            rho = v["rho"]
            if rho < g["rho"]:
                return self.vapor(T, rho * self.R * T)
            if rho < self.rho_liq:
                x = (1.0 / rho - 1.0 / f["rho"]) / (1.0 / g["rho"] - 1.0 / f["rho"])
                return self.mixture(T, x, ps)
            raise PropertyError(f"(T, rho): liquid density is constant, rho={rho!r} does not fix the state")
        X = "h" if "h" in v else "s"
        val = v[X]
        if X == "s" and val > g["s"]:
            return self.vapor(T, self._vapor_p_from_Ts(T, val))
        if f[X] <= val <= g[X]:
            return self.mixture(T, (val - f[X]) / (g[X] - f[X]), ps)
        raise PropertyError(f"(T, {X}) = ({T!r}, {val!r}) is outside the two-phase range this pair resolves")

    def _vapor_p_from_Ts(self, T, s):
        return self.p0 * math.exp((self.h_fg / self.T0 + self.cp_vap * math.log(T / self.T0) - s) / self.R)

    def _h_s(self, h, s):
        found = []
        T = self.T0 * math.exp(s / self.cp_liq)
        p = self.p0 + self.rho_liq * (h - self.cp_liq * (T - self.T0))
        if p > 0 and p > self.p_sat(T):
            found.append(self.liquid(T, p))
        T = self.T0 + (h - self.h_fg) / self.cp_vap
        if T > 0:
            p = self._vapor_p_from_Ts(T, s)
            if p < self.p_sat(T):
                found.append(self.vapor(T, p))
        if len(found) == 1:
            return found[0]
        if found:
            raise PropertyError(f"(h, s) = ({h!r}, {s!r}) matches both a liquid and a vapour state")
        raise PropertyError(f"(h, s) = ({h!r}, {s!r}) is not a single-phase state")

    def _vapor_rho(self, v):
        rho = v["rho"]
        _positive(rho=rho)
        if "h" in v:
            T = self.T0 + (v["h"] - self.h_fg) / self.cp_vap
        else:
            arg = v["s"] - self.h_fg / self.T0 + self.R * math.log(rho * self.R * self.T0 / self.p0)
            T = self.T0 * math.exp(arg / (self.cp_vap - self.R))
        _positive(T=T)
        p = rho * self.R * T
        if p >= self.p_sat(T):
            raise PropertyError(f"rho={rho!r} with {v} is not a vapour state; pair resolves vapour only")
        return self.vapor(T, p)


@functools.lru_cache(maxsize=8192)
def _cached_state(backend, a, va, b, vb):
    return backend.state(a, va, b, vb)


@functools.lru_cache(maxsize=1024)
def _cached_saturated(backend, quality, prop, value):
    return backend.saturated(quality, prop, value)


@dataclass(frozen=True)
class PropertyFunction(ExternalFunction):
    """``output`` as a function of two known properties, for use inside expressions."""

    backend: FluidPropertyBackend
    inputs: tuple[str, str]
    output: str
    arity: ClassVar[int] = 2

    @property
    def name(self) -> str:
        a, b = self.inputs
        return f"{self.backend.fluid}.{self.output}[{a},{b}]"

    def __call__(self, va: float, vb: float) -> float:
        a, b = self.inputs
        return _cached_state(self.backend, a, float(va), b, float(vb))[self.output]


@dataclass(frozen=True)
class SaturationFunction(ExternalFunction):
    """``output`` on the saturation line (quality 0 or 1) given ``p`` or ``T``."""

    backend: FluidPropertyBackend
    quality: int
    input: str
    output: str
    arity: ClassVar[int] = 1

    @property
    def name(self) -> str:
        return f"{self.backend.fluid}.{self.output}[Q{self.quality},{self.input}]"

    def __call__(self, value: float) -> float:
        return _cached_saturated(self.backend, self.quality, self.input, float(value))[self.output]
