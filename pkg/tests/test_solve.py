import numpy as np
import pytest

from acausal.expr import sqrt
from acausal.hydraulics import build_fig2_network
from acausal.model import Component, ModelError, alias_eliminate, flatten
from acausal.solve import (
    Assembler, EvaluationError, RampSchedule, SingularJacobianError, SolveOptions, SweepError,
    _lu_solve, assemble, newton_solve, sweep,
)
from acausal.thermo import build_rankine


def scalar(residual, guess=3.0):
    c = Component("S")
    x = c.add_internal("x", guess=guess)
    c.add_equation(residual(x))
    return flatten([c])


def test_assemble_scalar():
    asm = assemble(scalar(lambda x: x * x - 4.0))
    F, J = asm.residual_and_jacobian(np.array([3.0]), asm.param_vector())
    assert F.tolist() == [5.0] and J.tolist() == [[6.0]]


def test_assemble_fig2_dimensions():
    asm = Assembler(flatten(*build_fig2_network()))
    assert asm.size == 44
    F, J = asm.residual_and_jacobian(asm.initial_vector(), asm.param_vector())
    assert J.shape == (44, 44) and np.all(np.isfinite(J)) and np.all(np.isfinite(F))
    assert np.linalg.matrix_rank(J) == 44


def test_newton_quadratic_root():
    sol = newton_solve(scalar(lambda x: x * x - 4.0))
    assert sol.converged and sol["S.x"] == pytest.approx(2.0, abs=1e-9 / 4.0)
    assert sol.iterations <= 6
    assert sol.residual_norm <= 1e-9
    assert len(sol.trace) == sol.iterations + 1
    assert sol.format_trace().splitlines()[0].startswith("iter   0  |F|inf=5.000000e+00")


def test_line_search_never_increases_residual():
    for comps in (build_fig2_network(), build_rankine()):
        sol = newton_solve(flatten(*comps))
        norms = [t.residual_2 for t in sol.trace]
        assert all(b <= a for a, b in zip(norms, norms[1:]))


def test_damping_kicks_in_far_from_root():
    sol = newton_solve(scalar(lambda x: sqrt(x * x + 1.0) - 2.0, guess=0.01))
    assert sol.converged
    assert any(t.step < 1.0 for t in sol.trace[1:])
    assert abs(sol["S.x"]) == pytest.approx(3 ** 0.5)


def test_non_convergence_returns_trace():
    sol = newton_solve(scalar(lambda x: x * x + 1.0, guess=0.5), opts=SolveOptions(max_iterations=8))
    assert not sol.converged
    assert sol.message in ("max iterations reached", "line search failed", "step below tolerance")
    assert len(sol.trace) >= 2


def test_evaluation_error_names_equation():
    fs = scalar(lambda x: sqrt(x) - 1.0, guess=-1.0)
    with pytest.raises(EvaluationError) as info:
        newton_solve(fs)
    assert info.value.equation == "S#0"


def test_singular_after_regularization_names_variable():
    J = np.array([[0.0, 0.0], [0.0, -1e-12]])
    with pytest.raises(SingularJacobianError) as info:
        _lu_solve(J, np.ones(2), 1e-12, ["a", "b"])
    assert info.value.variable == "b"


def test_regularization_rescues_exact_zero_pivot():
    dx = _lu_solve(np.array([[0.0, 1.0], [0.0, 1.0]]), np.array([1.0, 1.0]), 1e-12, ["a", "b"])
    assert np.all(np.isfinite(dx))


def test_options_validated():
    with pytest.raises(ValueError):
        SolveOptions(tol=0.0)
    with pytest.raises(ValueError):
        SolveOptions(max_iterations=0)


def test_guess_accepts_alias_names():
    fs = alias_eliminate(flatten(*build_fig2_network()))
    asm = Assembler(fs)
    x = asm.initial_vector({"Pump.in.q": 0.004})
    # Pump.in.q is stored as -(A.port.q)
    assert x[asm.unknowns.index("A.port.q")] == -0.004


def test_determinism_bit_identical():
    a = newton_solve(flatten(*build_fig2_network()))
    b = newton_solve(flatten(*build_fig2_network()))
    assert a.values == b.values
    assert [t.residual_2 for t in a.trace] == [t.residual_2 for t in b.trace]


def test_ramp_schedule_validation():
    with pytest.raises(ValueError):
        RampSchedule([])
    with pytest.raises(ValueError):
        RampSchedule([0.0, 0.0])


def test_sweep_requires_time():
    with pytest.raises(ModelError):
        sweep(scalar(lambda x: x - 1.0), RampSchedule([0.0]))


def test_zero_rate_sweep_is_constant():
    fs = flatten(*build_rankine(pump_rate=0.0))
    sols = sweep(fs, RampSchedule([0.0, 10.0, 20.0]))
    assert sols[0].values == sols[1].values == sols[2].values


def test_single_point_sweep_matches_solve():
    fs = flatten(*build_rankine())
    (s,) = sweep(fs, RampSchedule([30.0]))
    ref = newton_solve(fs, params={"time": 30.0})
    assert s.values == ref.values


def test_rankine_sweep_ramp_and_continuation_pays():
    fs = flatten(*build_rankine())
    times = np.arange(0.0, 101.0, 10.0)
    warm = sweep(fs, RampSchedule(times))
    cold = sweep(fs, RampSchedule(times), warm_start=False)
    for t, s in zip(times, warm):
        assert s["pump.out.p"] == pytest.approx(18.0e6 - 1.0e5 * t, rel=1e-12)
    assert sum(s.iterations for s in warm) < sum(s.iterations for s in cold)
    assert max(s.iterations for s in warm[1:]) <= 5


def test_ramp_override_and_failure_reports_time():
    fs = flatten(*build_rankine())
    sols = sweep(fs, RampSchedule([0.0, 1.0], {"pump_P.x_rate": -2.0e6}))
    assert sols[1]["pump.out.p"] == pytest.approx(16.0e6)
    # pushing the pump outlet below the condenser pressure breaks the cycle
    with pytest.raises(SweepError) as info:
        sweep(fs, RampSchedule([0.0, 10.0], {"pump_P.x_rate": -1.8e6}))
    assert info.value.time == 10.0
    assert not info.value.solution.converged
