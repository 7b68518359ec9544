"""Residual + Jacobian assembly: numba tape vs pure-Python tape vs tree walk.

    python3 benchmarks/bench_kernels.py [--model fig2_network] [--repeat 200]

The numba kernel is compiled before timing starts.  Set
ACAUSAL_DISABLE_NUMBA=1 to check that the package still runs without it;
this script times both kernels explicitly either way.
"""
from __future__ import annotations

import argparse
import time

import numpy as np

from acausal import _kernels
from acausal.expr import evaluate
from acausal.model import alias_eliminate, flatten
from acausal.modelfile import load_model
from acausal.solve import Assembler, newton_solve


def best_of(fn, repeat):
    times = []
    for _ in range(repeat):
        t0 = time.perf_counter()
        fn()
        times.append(time.perf_counter() - t0)
    return min(times), float(np.median(times))


def tree_assembly(asm, x, p):
    env = dict(zip(asm.unknowns, x))
    env.update(zip(asm.param_names, p))
    F = np.array([evaluate(r, env) for r in asm._residuals])
    J = np.zeros((asm.size, asm.size))
    J[asm.jac_rows, asm.jac_cols] = [evaluate(e, env) for e in asm._jac_exprs]
    return F, J


def main(argv=None):
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--model", default="fig2_network")
    ap.add_argument("--repeat", type=int, default=200)
    args = ap.parse_args(argv)

    fs = alias_eliminate(flatten(*load_model(args.model).build()))
    rows = []
    kernels = [("python tape", _kernels.run_tape_py)]
    if _kernels.run_tape_nb is not None:
        kernels.insert(0, ("numba tape", _kernels.run_tape_nb))

    ref = None
    for label, kernel in kernels:
        asm = Assembler(fs, kernel=kernel)
        x, p = asm.initial_vector(), asm.param_vector()
        F, J = asm.residual_and_jacobian(x, p)  # warm-up / JIT compile
        if ref is None:
            ref = (F, J)
        else:
            assert np.array_equal(F, ref[0]) and np.array_equal(J, ref[1])
        rows.append((label, *best_of(lambda: asm.residual_and_jacobian(x, p), args.repeat)))

    asm = Assembler(fs, kernel=_kernels.run_tape_py)
    x, p = asm.initial_vector(), asm.param_vector()
    F, J = tree_assembly(asm, x, p)
    assert np.allclose(F, ref[0], rtol=1e-13, atol=0) and np.allclose(J, ref[1], rtol=1e-13, atol=0)
    rows.append(("tree evaluator", *best_of(lambda: tree_assembly(asm, x, p), max(1, args.repeat // 10))))

    nnz = len(asm.jac_rows)
    print(f"model {args.model}: {asm.size} unknowns, {nnz} Jacobian entries, "
          f"{len(asm.fj_tape.ops)} tape ops")
    base = rows[0][1]
    print(f"{'assembly':<16} {'best [us]':>10} {'median [us]':>12} {'relative':>9}")
    for label, best, med in rows:
        print(f"{label:<16} {best * 1e6:>10.1f} {med * 1e6:>12.1f} {best / base:>8.1f}x")

    for label, kernel in kernels:
        asm = Assembler(fs, kernel=kernel)
        t0 = time.perf_counter()
        sol = newton_solve(fs, assembler=asm)
        print(f"newton solve, {label}: {(time.perf_counter() - t0) * 1e3:.2f} ms, "
              f"{sol.iterations} iterations")

if __name__ == "__main__":
    main()
