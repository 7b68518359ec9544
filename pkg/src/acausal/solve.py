"""Damped Newton-Raphson for flattened systems, plus warm-started sweeps."""
from __future__ import annotations

import warnings
from dataclasses import dataclass, field
from typing import Callable, Mapping, Sequence

import numpy as np
import scipy.linalg as la

from . import _kernels
from .expr import Call, DomainError, Var, calls, differentiate, evaluate, render, variables, ZERO
from .model import TIME, FlatSystem, ModelError, alias_eliminate


class EvaluationError(ArithmeticError):
    """Residual or Jacobian evaluation failed inside a named equation."""

    def __init__(self, message: str, equation: str | None = None):
        super().__init__(message)
        self.equation = equation


class SingularJacobianError(np.linalg.LinAlgError):
    def __init__(self, message: str, variable: str):
        super().__init__(message)
        self.variable = variable


class SweepError(RuntimeError):
    def __init__(self, time: float, solution: "Solution"):
        super().__init__(f"sweep point t={time!r} did not converge "
                         f"(|F|inf={solution.residual_norm:.3e} after {solution.iterations} iterations)")
        self.time = time
        self.solution = solution


@dataclass(frozen=True)
class SolveOptions:
    max_iterations: int = 50
    tol: float = 1e-9
    step_tol: float = 1e-12
    min_step: float = 2.0 ** -20
    regularization: float = 1e-12
    keep_iterates: bool = False  # store each iterate in the trace

    def __post_init__(self):
        if self.tol <= 0 or self.step_tol <= 0 or self.min_step <= 0:
            raise ValueError("tolerances must be positive")
        if self.max_iterations < 1:
            raise ValueError("max_iterations must be at least 1")


@dataclass(frozen=True)
class TraceEntry:
    iteration: int
    residual_inf: float
    residual_2: float
    step: float  # accepted line-search factor, 0 for the initial point
    x: tuple[float, ...] | None = None

    def format(self) -> str:
        return (f"iter {self.iteration:3d}  |F|inf={self.residual_inf:.6e}  "
                f"|F|2={self.residual_2:.6e}  step={self.step:.6g}")


@dataclass
class Solution:
    values: dict[str, float]
    converged: bool
    residual_norm: float
    iterations: int
    trace: list[TraceEntry] = field(default_factory=list)
    message: str = ""
    parameters: dict[str, float] = field(default_factory=dict)

    def __getitem__(self, name: str) -> float:
        return self.values[name]

    def format_trace(self) -> str:
        return "\n".join(t.format() for t in self.trace)


class Assembler:
    """Residual and dense Jacobian evaluator for a square flat system.

    Jacobian entries are symbolic derivatives of each residual, compiled with
    the residuals into one tape.  External calls are evaluated in Python and
    fed to the tape as slots.
    """

    def __init__(self, fs: FlatSystem, kernel=None):
        if not fs.eliminated:
            fs = alias_eliminate(fs)
        self.fs = fs
        self.unknowns = fs.unknowns
        n = len(self.unknowns)
        if len(fs.equations) != n:
            raise ModelError(f"system is not square: {len(fs.equations)} equations, {n} unknowns")
        self.kernel = kernel
        self.var_index = {name: j for j, name in enumerate(self.unknowns)}
        self.param_names = sorted(fs.parameters)
        self.param_index = {p: k for k, p in enumerate(self.param_names)}
        self.labels = [eq.label for eq in fs.equations]

        residuals = [eq.residual for eq in fs.equations]
        rows, cols, entries = [], [], []
        for i, r in enumerate(residuals):
            for v in variables(r):
                j = self.var_index.get(v)
                if j is None:
                    raise ModelError(f"equation {self.labels[i]} references eliminated variable {v}")
                d = differentiate(r, v)
                if d != ZERO:
                    rows.append(i)
                    cols.append(j)
                    entries.append(d)
        self.jac_rows = np.asarray(rows, dtype=np.int64)
        self.jac_cols = np.asarray(cols, dtype=np.int64)
        self._jac_exprs = entries
        self._residuals = residuals
        self.f_tape = _kernels.Tape(residuals, self.var_index, self.param_index)
        self.fj_tape = _kernels.Tape(residuals + entries, self.var_index, self.param_index)

    @property
    def size(self) -> int:
        return len(self.unknowns)

    def param_vector(self, overrides: Mapping[str, float] | None = None) -> np.ndarray:
        p = dict(self.fs.parameters)
        if overrides:
            unknown = set(overrides) - set(p)
            if unknown:
                raise ModelError(f"unknown parameters {sorted(unknown)}")
            p.update(overrides)
        return np.array([p[k] for k in self.param_names], dtype=np.float64)

    def _slot_values(self, tape, x, params) -> np.ndarray:
        out = np.empty(len(tape.slots), dtype=np.float64)
        env = None
        for k, call in enumerate(tape.slots):
            vals = []
            for a in call.args:
                if isinstance(a, Var):
                    vals.append(x[self.var_index[a.name]])
                else:
                    if env is None:
                        env = self._env(x, params)
                    vals.append(evaluate(a, env))
            try:
                out[k] = call.fn(*vals)
            except (ValueError, ArithmeticError) as exc:
                label = self._label_of_call(call)
                raise EvaluationError(f"equation {label}: {call.fn.name}{tuple(vals)}: {exc}", label) from exc
        return out

    def _env(self, x, params) -> dict[str, float]:
        env = dict(zip(self.param_names, params))
        env.update(zip(self.unknowns, x))
        return env

    def _label_of_call(self, call: Call) -> str:
        for i, r in enumerate(self._residuals):
            if call in calls(r):
                return self.labels[i]
        for r, e in zip(self.jac_rows, self._jac_exprs):
            if call in calls(e):
                return self.labels[r]
        return "?"

    def _raise_at(self, output: int, x, params):
        n = self.size
        if output < n:
            i, e = output, self._residuals[output]
        else:
            i, e = int(self.jac_rows[output - n]), self._jac_exprs[output - n]
        try:
            evaluate(e, self._env(x, params))
        except DomainError as exc:
            raise EvaluationError(f"equation {self.labels[i]}: {exc}", self.labels[i]) from None
        raise EvaluationError(f"equation {self.labels[i]}: evaluation failed in {render(e)}", self.labels[i])

    def residual(self, x: np.ndarray, params: np.ndarray) -> np.ndarray:
        x = np.asarray(x, dtype=np.float64)
        slots = self._slot_values(self.f_tape, x, params)
        out = np.empty(self.size, dtype=np.float64)
        bad = self.f_tape.run(x, params, slots, out, self.kernel)
        if bad >= 0:
            self._raise_at(bad, x, params)
        return out

    def residual_and_jacobian(self, x: np.ndarray, params: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
        x = np.asarray(x, dtype=np.float64)
        n = self.size
        slots = self._slot_values(self.fj_tape, x, params)
        out = np.empty(self.fj_tape.n_outputs, dtype=np.float64)
        bad = self.fj_tape.run(x, params, slots, out, self.kernel)
        if bad >= 0:
            self._raise_at(bad, x, params)
        J = np.zeros((n, n), dtype=np.float64)
        J[self.jac_rows, self.jac_cols] = out[n:]
        return out[:n], J

    def initial_vector(self, guess: Mapping[str, float] | None = None) -> np.ndarray:
        """Unknown vector from ``guess`` with domain defaults for anything missing."""
        guess = dict(guess or {})
        defaults = {v.name: v.guess for v in self.fs.variables}
        x = np.empty(self.size, dtype=np.float64)
        for j, name in enumerate(self.unknowns):
            if name in guess:
                x[j] = guess[name]
                continue
            # accept guesses given for an alias of this unknown
            for alias, e in self.fs.aliases.items():
                if alias in guess and variables(e) == [name]:
                    x[j] = guess[alias] if isinstance(e, Var) else -guess[alias]
                    break
            else:
                x[j] = defaults[name]
        return x


def assemble(fs: FlatSystem) -> Assembler:
    return Assembler(fs)


def _lu_solve(J: np.ndarray, rhs: np.ndarray, reg: float, unknowns: Sequence[str]) -> np.ndarray:
    def factor(M):
        with warnings.catch_warnings():
            warnings.simplefilter("ignore", la.LinAlgWarning)
            lu, piv = la.lu_factor(M, check_finite=False)
        diag = np.abs(np.diag(lu))
        return lu, piv, diag

    if not np.all(np.isfinite(J)):
        bad = int(np.argmax(~np.isfinite(J).all(axis=0)))
        raise SingularJacobianError(f"non-finite Jacobian column for {unknowns[bad]}", unknowns[bad])
    lu, piv, diag = factor(J)
    if np.any(diag == 0.0):
        lu, piv, diag = factor(J + reg * np.eye(J.shape[0]))
        if np.any(diag == 0.0):
            j = int(np.argmin(diag))
            raise SingularJacobianError(
                f"singular Jacobian after regularization; smallest pivot at {unknowns[j]}", unknowns[j])
    dx = la.lu_solve((lu, piv), rhs, check_finite=False)
    if not np.all(np.isfinite(dx)):
        j = int(np.argmin(diag))
        raise SingularJacobianError(f"Newton step not finite; smallest pivot at {unknowns[j]}", unknowns[j])
    return dx


def newton_solve(fs: FlatSystem, guess: Mapping[str, float] | None = None,
                 opts: SolveOptions | None = None, params: Mapping[str, float] | None = None,
                 assembler: Assembler | None = None) -> Solution:
    """Solve ``F(x) = 0`` by Newton's method with halving line search.

    Steps are accepted when they give sufficient decrease of ``|F|_2``
    (Armijo, c=1e-4).  Returns a non-converged :class:`Solution` with its
    trace rather than raising when iterations or the line search run out.
    """
    opts = opts or SolveOptions()
    asm = assembler or Assembler(fs)
    p = asm.param_vector(params)
    x = asm.initial_vector(guess)
    F, J = asm.residual_and_jacobian(x, p)
    f2 = float(np.linalg.norm(F))
    finf = float(np.max(np.abs(F))) if F.size else 0.0
    trace = [TraceEntry(0, finf, f2, 0.0, tuple(x.tolist()) if opts.keep_iterates else None)]
    message = "max iterations reached"
    converged = finf <= opts.tol
    it = 0
    while not converged and it < opts.max_iterations:
        dx = _lu_solve(J, -F, opts.regularization, asm.unknowns)
        lam = 1.0
        accepted = False
        while lam >= opts.min_step:
            xn = x + lam * dx
            try:
                Fn = asm.residual(xn, p)
            except EvaluationError:
                Fn = None
            if Fn is not None and np.all(np.isfinite(Fn)):
                fn2 = float(np.linalg.norm(Fn))
                if fn2 <= (1.0 - 1e-4 * lam) * f2 or fn2 == 0.0:
                    accepted = True
                    break
            lam *= 0.5
        if not accepted:
            message = "line search failed"
            break
        it += 1
        step = lam * dx
        x = xn
        F, J = asm.residual_and_jacobian(x, p)
        f2 = float(np.linalg.norm(F))
        finf = float(np.max(np.abs(F)))
        trace.append(TraceEntry(it, finf, f2, lam, tuple(x.tolist()) if opts.keep_iterates else None))
        converged = finf <= opts.tol
        if not converged and np.all(np.abs(step) <= opts.step_tol * (1.0 + np.abs(x))):
            message = "step below tolerance"
            break
    if converged:
        message = "converged"
    env_params = dict(zip(asm.param_names, p.tolist()))
    values = asm.fs.expand(dict(zip(asm.unknowns, x.tolist())), env_params)
    return Solution(values, converged, finf, it, trace, message, env_params)


@dataclass(frozen=True)
class RampSchedule:
    """Time grid for a sweep; ``overrides`` replaces ramp parameters (``*_u0``, ``*_rate``)."""
    times: tuple[float, ...]
    overrides: Mapping[str, float] = field(default_factory=dict)

    def __init__(self, times: Sequence[float], overrides: Mapping[str, float] | None = None):
        t = tuple(float(v) for v in times)
        if not t:
            raise ValueError("ramp schedule needs at least one time point")
        if any(b <= a for a, b in zip(t, t[1:])):
            raise ValueError("ramp schedule times must be strictly increasing")
        object.__setattr__(self, "times", t)
        object.__setattr__(self, "overrides", dict(overrides or {}))


def sweep(fs: FlatSystem, ramp: RampSchedule, opts: SolveOptions | None = None,
          guess: Mapping[str, float] | None = None, warm_start: bool = True,
          on_point: Callable[[float, Solution], None] | None = None) -> list[Solution]:
    """Solve at every grid time, each point starting from the previous solution.

    ``on_point(t, solution)`` is called after each converged point.
    """
    asm = Assembler(fs)
    params = dict(ramp.overrides)
    if TIME not in asm.fs.parameters:
        raise ModelError("system has no time parameter to sweep")
    out: list[Solution] = []
    current = guess
    for t in ramp.times:
        params[TIME] = t
        sol = newton_solve(asm.fs, current, opts, params, assembler=asm)
        if not sol.converged:
            raise SweepError(t, sol)
        out.append(sol)
        if on_point is not None:
            on_point(t, sol)
        if warm_start:
            current = sol.values
    return out
