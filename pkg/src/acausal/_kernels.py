"""Postfix tape evaluation of expression lists.

A list of expressions is compiled once into flat integer/float arrays and then
evaluated by a small stack machine.  The machine is the hot loop of every
Newton iteration (residuals plus all Jacobian entries), so it is compiled with
numba when available.  Set ``ACAUSAL_DISABLE_NUMBA=1`` to force the
interpreted path; both paths run the same source.

External calls are not executed inside the kernel.  Each distinct
:class:`~acausal.expr.Call` node becomes a *slot* whose value the caller
computes beforehand.
"""
from __future__ import annotations

import math
import os

import numpy as np

from .expr import Binary, Call, Const, Expr, Param, Unary, Var

OP_CONST, OP_VAR, OP_PARAM, OP_SLOT = 0, 1, 2, 3
OP_NEG, OP_ABS, OP_SQ, OP_SQRT, OP_LN, OP_SIGN = 4, 5, 6, 7, 8, 9
OP_ADD, OP_SUB, OP_MUL, OP_DIV, OP_POW = 10, 11, 12, 13, 14
OP_STORE = 15

_UNARY_CODES = {"neg": OP_NEG, "abs": OP_ABS, "sq": OP_SQ, "sqrt": OP_SQRT,
                "ln": OP_LN, "sign": OP_SIGN}
_BINARY_CODES = {"+": OP_ADD, "-": OP_SUB, "*": OP_MUL, "/": OP_DIV, "pow": OP_POW}


def _env_disabled() -> bool:
    return os.environ.get("ACAUSAL_DISABLE_NUMBA", "").strip().lower() in ("1", "true", "yes", "on")


def run_tape_py(ops, args, consts, x, params, slots, stack, out):
    """Execute a tape.  Returns -1 on success, else the failing instruction index."""
    sp = 0
    for k in range(ops.shape[0]):
        op = ops[k]
        if op == 0:
            stack[sp] = consts[args[k]]
            sp += 1
        elif op == 1:
            stack[sp] = x[args[k]]
            sp += 1
        elif op == 2:
            stack[sp] = params[args[k]]
            sp += 1
        elif op == 3:
            stack[sp] = slots[args[k]]
            sp += 1
        elif op == 15:
            sp -= 1
            out[args[k]] = stack[sp]
        elif op < 10:
            a = stack[sp - 1]
            if op == 4:
                stack[sp - 1] = -a
            elif op == 5:
                stack[sp - 1] = abs(a)
            elif op == 6:
                stack[sp - 1] = a * a
            elif op == 7:
                if a < 0.0:
                    return k
                stack[sp - 1] = math.sqrt(a)
            elif op == 8:
                if a <= 0.0:
                    return k
                stack[sp - 1] = math.log(a)
            else:
                if a > 0.0:
                    stack[sp - 1] = 1.0
                elif a < 0.0:
                    stack[sp - 1] = -1.0
                else:
                    stack[sp - 1] = 0.0
        else:
            sp -= 1
            b = stack[sp]
            a = stack[sp - 1]
            if op == 10:
                stack[sp - 1] = a + b
            elif op == 11:
                stack[sp - 1] = a - b
            elif op == 12:
                stack[sp - 1] = a * b
            elif op == 13:
                if b == 0.0:
                    return k
                stack[sp - 1] = a / b
            else:
                if a < 0.0 and b != math.floor(b):
                    return k
                if a == 0.0 and b < 0.0:
                    return k
                stack[sp - 1] = a ** b
    return -1


run_tape_nb = None
try:
    from numba import njit
except ImportError:  # pragma: no cover - numba is a declared dependency
    njit = None

if njit is not None:
    run_tape_nb = njit(cache=True, nogil=True, error_model="numpy")(run_tape_py)

NUMBA_ENABLED = run_tape_nb is not None and not _env_disabled()
run_tape = run_tape_nb if NUMBA_ENABLED else run_tape_py


class Tape:
    """Compiled form of an ordered list of output expressions."""

    def __init__(self, outputs: list[Expr], var_index: dict[str, int],
                 param_index: dict[str, int]):
        ops: list[int] = []
        args: list[int] = []
        consts: dict[float, int] = {}
        slot_index: dict[Call, int] = {}
        self.output_of_instruction: list[int] = []
        depth = 0
        max_depth = 0

        def emit(op, arg, delta):
            nonlocal depth, max_depth
            ops.append(op)
            args.append(arg)
            depth += delta
            max_depth = max(max_depth, depth)

        def rec(node: Expr):
            if isinstance(node, Const):
                emit(OP_CONST, consts.setdefault(node.value, len(consts)), 1)
            elif isinstance(node, Var):
                emit(OP_VAR, var_index[node.name], 1)
            elif isinstance(node, Param):
                emit(OP_PARAM, param_index[node.name], 1)
            elif isinstance(node, Call):
                emit(OP_SLOT, slot_index.setdefault(node, len(slot_index)), 1)
            elif isinstance(node, Unary):
                rec(node.arg)
                emit(_UNARY_CODES[node.op], 0, 0)
            elif isinstance(node, Binary):
                rec(node.left)
                rec(node.right)
                emit(_BINARY_CODES[node.op], 0, -1)
            else:
                raise TypeError(f"cannot compile {node!r}")

        for i, e in enumerate(outputs):
            start = len(ops)
            rec(e)
            emit(OP_STORE, i, -1)
            self.output_of_instruction.extend([i] * (len(ops) - start))

        self.ops = np.asarray(ops, dtype=np.int64)
        self.args = np.asarray(args, dtype=np.int64)
        self.consts = np.asarray(sorted(consts, key=consts.get), dtype=np.float64)
        self.slots: list[Call] = list(slot_index)
        self.n_outputs = len(outputs)
        self.stack_depth = max(max_depth, 1)

    def __len__(self):
        return int(self.ops.shape[0])

    def run(self, x: np.ndarray, params: np.ndarray, slots: np.ndarray,
            out: np.ndarray, kernel=None) -> int:
        """Fill ``out``; returns -1 or the index of the output that failed."""
        fn = kernel if kernel is not None else run_tape
        stack = np.empty(self.stack_depth, dtype=np.float64)
        pos = fn(self.ops, self.args, self.consts, x, params, slots, stack, out)
        return -1 if pos < 0 else self.output_of_instruction[pos]
