"""Reference computations that share no code with the package.

Each oracle recomputes a quantity from first principles with plain numpy so
that the package results can be checked against something independent.
"""
from __future__ import annotations

import math

import numpy as np

G = 9.80665
RHO_WATER = 1000.0


def pump_pipe_flow(L=10.0, D=25e-3, f=0.01, omega=2500.0, c0=4.4e-4, c1=5.622, g=G):
    """Positive root of a0 - a1*q = (f L / D) * 8 q^2 / (pi^2 D^4 g).

    a0 = c0 * w^2 and a1 = c1 * w with w the shaft speed in rad/s.
    """
    w = omega * 2.0 * math.pi / 60.0
    a0, a1 = c0 * w * w, c1 * w
    C = (f * L / D) * 8.0 / (math.pi ** 2 * D ** 4 * g)
    # q = (-a1 + sqrt(a1^2 + 4 C a0)) / (2C), written without cancellation
    return 2.0 * a0 / (a1 + math.sqrt(a1 * a1 + 4.0 * C * a0))


def nodal_analysis(n_nodes, resistors, sources):
    """Modified nodal analysis with node 0 as ground.

    ``resistors``: (node_p, node_n, R); ``sources``: (node_p, node_n, V) with
    v_p - v_n = V.  Returns ``(v, i_res, i_src)``: node voltages (length
    n_nodes, v[0] = 0), resistor currents p -> n through the resistor and
    source currents n -> p through the source.
    """
    m = len(sources)
    size = n_nodes - 1 + m
    A = np.zeros((size, size))
    b = np.zeros(size)

    def idx(node):
        return node - 1

    for p, n, R in resistors:
        g = 1.0 / R
        for a, s in ((p, 1.0), (n, -1.0)):
            if a == 0:
                continue
            for c, t in ((p, 1.0), (n, -1.0)):
                if c != 0:
                    A[idx(a), idx(c)] += s * t * g
    for k, (p, n, V) in enumerate(sources):
        row = n_nodes - 1 + k
        if p:
            A[idx(p), row] -= 1.0
            A[row, idx(p)] = 1.0
        if n:
            A[idx(n), row] += 1.0
            A[row, idx(n)] = -1.0
        b[row] = V
    sol = np.linalg.solve(A, b)
    v = np.concatenate([[0.0], sol[: n_nodes - 1]])
    i_res = np.array([(v[p] - v[n]) / R for p, n, R in resistors])
    return v, i_res, sol[n_nodes - 1:]


def central_jacobian(F, x, rel=1e-6):
    """Central-difference Jacobian of ``F`` at ``x``."""
    x = np.asarray(x, dtype=float)
    f0 = np.asarray(F(x))
    J = np.empty((f0.size, x.size))
    for j in range(x.size):
        h = rel * max(abs(x[j]), 1.0)
        xp, xm = x.copy(), x.copy()
        xp[j] += h
        xm[j] -= h
        J[:, j] = (np.asarray(F(xp)) - np.asarray(F(xm))) / (2.0 * h)
    return J


def ideal_gas_state(T, p, R=287.0, cp=1004.5, T_ref=298.15, p_ref=101325.0):
    """(p, T, rho, h, s) of a calorically perfect gas, h and s zero at the reference."""
    return {
        "p": p,
        "T": T,
        "rho": p / (R * T),
        "h": cp * (T - T_ref),
        "s": cp * math.log(T / T_ref) - R * math.log(p / p_ref),
    }


def rel_close(a, b, rel):
    """``|a - b| <= rel * max(|a|, |b|, 1)``."""
    return abs(a - b) <= rel * max(abs(a), abs(b), 1.0)
