#!/usr/bin/env python3
"""Reference survival values for the regression tests.

Computes survival on the same truncated grids the C++ runners build with
make_grid, using scipy's expm_multiply (Al-Mohy & Higham) on the sparse
generator. This route shares no code with the RK4 integrator or with the
dense Eigen oracle. Output is pasted into tests/reference_values.hpp.
"""
import math

import numpy as np
import scipy.sparse as sp
from scipy.sparse.linalg import expm_multiply

TRAP_SITES = {"I": [-4, -1, 2, 3], "II": [-2, 1, 3, 6], "III": [1, 2, 4, 7]}
CONTINUUM_RATES = [1.0, 0.4, 1.5, 0.6]
MESH_RATES = [0.1, 0.04, 0.15, 0.06]
BETA = 0.8 * math.pi / 2


def half_width(traps, horizon, ballistic, hopping=1.0):
    offset = max(abs(s) for s in traps)
    if ballistic:
        spread = math.ceil(2.0 * 1.2 * hopping * horizon - 1e-9)
    else:
        spread = max(8, math.ceil(8.0 * math.sqrt(2.0 * hopping * horizon) - 1e-9))
    return offset + spread + 20


def generator(n_half, hopping, traps, quantum):
    n = 2 * n_half + 1
    gamma = np.zeros(n)
    for site, rate in traps.items():
        gamma[site + n_half] = rate
    off = np.full(n - 1, hopping)
    if quantum:
        # d psi/dt = -i H psi
        h = sp.diags([off, -0.5j * gamma, off], [-1, 0, 1], format="csr")
        return -1j * h
    return sp.diags([off, -2.0 * hopping - gamma, off], [-1, 0, 1], format="csr")


def survival(n_half, traps, times, quantum):
    a = generator(n_half, 1.0, traps, quantum)
    p0 = np.zeros(2 * n_half + 1, dtype=complex if quantum else float)
    p0[n_half] = 1.0
    out = []
    for t in times:
        state = expm_multiply(a * t, p0)
        out.append(float((abs(state) ** 2).sum() if quantum else state.sum()))
    return out


def mesh_survival(traps, steps, coherent):
    """Direct array implementation of the mesh maps, with a margin wide
    enough that nothing reaches the walls (signals move one site per step)."""
    n_half = max(abs(s) for s in traps) + steps + 2
    n = 2 * n_half + 1
    gamma = np.zeros(n)
    for site, rate in traps.items():
        gamma[site + n_half] = rate
    c, s = math.cos(BETA), math.sin(BETA)
    if coherent:
        u = np.zeros(n, dtype=complex)
        v = np.zeros(n, dtype=complex)
        u[n_half] = 1.0
        damp = np.exp(-gamma)
        for _ in range(steps):
            u_new = np.zeros_like(u)
            v_new = np.zeros_like(v)
            u_new[:-1] = (c * u[1:] + 1j * s * v[1:]) * damp[:-1]
            v_new[1:] = c * v[:-1] + 1j * s * u[:-1]
            u, v = u_new, v_new
        return float((abs(u) ** 2).sum() + (abs(v) ** 2).sum())
    x = np.zeros(n)
    y = np.zeros(n)
    x[n_half] = 1.0
    damp = np.exp(-2.0 * gamma)
    for _ in range(steps):
        x_new = np.zeros_like(x)
        x_new[:-1] = c * c * x[1:]
        x_new += s * s * y
        x_new *= damp
        y_new = s * s * x
        y_new[1:] += c * c * y[:-1]
        x, y = x_new, y_new
    return float(x.sum() + y.sum())


def main():
    for name, sites in TRAP_SITES.items():
        traps = dict(zip(sites, CONTINUUM_RATES))
        for horizon in (100.0, 2000.0):
            n_half = half_width(traps, horizon, ballistic=True)
            (value,) = survival(n_half, traps, [horizon], quantum=True)
            print(f"qrw {name} t={horizon:g} N={n_half} P={value:.17g}")
        n_half = half_width(traps, 1.0e4, ballistic=False)
        values = survival(n_half, traps, [1.0e3, 1.0e4], quantum=False)
        print(f"crw {name} N={n_half} P(1e3)={values[0]:.17g} P(1e4)={values[1]:.17g}")
        mesh_traps = dict(zip(sites, MESH_RATES))
        print(f"mesh {name} coherent P(2000)={mesh_survival(mesh_traps, 2000, True):.17g}")
        print(f"mesh {name} incoherent P(2000)={mesh_survival(mesh_traps, 2000, False):.17g}")


if __name__ == "__main__":
    main()
