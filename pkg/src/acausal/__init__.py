"""Component-based acausal modeling.

Components expose typed connectors; connecting them generates equality
(across) and conservation (through) equations.  The flattened system is
reduced by alias elimination, checked structurally and solved by Newton's
method on compiled expression tapes.
"""
from .expr import Binding, ExternalFunction, Var, Param, Const, differentiate, evaluate, simplify
from .model import (
    Component, ConnectSet, FlatSystem, ModelError, Role, alias_eliminate, connect,
    declare_connector, dump, flatten, structural_check,
)
from .solve import (
    EvaluationError, RampSchedule, SingularJacobianError, Solution, SolveOptions,
    SweepError, newton_solve, sweep,
)

__version__ = "0.1.0"
