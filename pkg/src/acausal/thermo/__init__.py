"""Thermodynamic cycle components over pluggable property backends."""
from .backends import (
    PROPERTIES, FluidPropertyBackend, IdealGasBackend, PropertyError,
    PropertyFunction, SaturationFunction, ToyWaterBackend, canonical_property,
)
from .components import (
    RANKINE_CONNECTIONS, RANKINE_PROCESSES, STREAM_PORT, ProcessKind,
    build_rankine, make_boundary_state, make_process, make_source_state,
    saturation_closure, state_closure,
)


def ideal_gas_backend(R: float = 287.0, cp: float = 1004.5, **reference) -> IdealGasBackend:
    return IdealGasBackend(R=R, cp=cp, **reference)


def toy_water_backend() -> ToyWaterBackend:
    return ToyWaterBackend()
