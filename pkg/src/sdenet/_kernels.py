"""Compiled inner loops: linear recursions and coordinate-descent lasso."""

import numpy as np
from numba import njit


@njit(cache=True, nogil=True)
def linear_recursion(M, x0, noise):
    """x[t+1] = M x[t] + noise[t]; returns all len(noise)+1 states."""
    n, p = noise.shape
    out = np.empty((n + 1, p))
    out[0] = x0
    for t in range(n):
        for i in range(p):
            acc = noise[t, i]
            for j in range(p):
                acc += M[i, j] * out[t, j]
            out[t + 1, i] = acc
    return out


@njit(cache=True, nogil=True)
def _objective(Q, b, lam, a):
    p = a.shape[0]
    quad = 0.0
    lin = 0.0
    l1 = 0.0
    for i in range(p):
        s = 0.0
        for j in range(p):
            s += Q[i, j] * a[j]
        quad += a[i] * s
        lin += b[i] * a[i]
        l1 += abs(a[i])
    return 0.5 * quad - lin + lam * l1


@njit(cache=True, nogil=True)
def _kkt(Q, b, lam, a, grad):
    p = a.shape[0]
    worst = 0.0
    for i in range(p):
        s = -b[i]
        for j in range(p):
            s += Q[i, j] * a[j]
        grad[i] = s
        if a[i] > 0.0:
            r = abs(s + lam)
        elif a[i] < 0.0:
            r = abs(s - lam)
        else:
            r = abs(s) - lam
            if r < 0.0:
                r = 0.0
        if r > worst:
            worst = r
    return worst


@njit(cache=True, nogil=True)
def cd_lasso(Q, b, lam, a_init, tol, max_iter):
    """Cyclic coordinate descent for 0.5 a'Qa - b'a + lam |a|_1.

    Returns (a, sweeps, kkt_residual, objective_per_sweep). The first entry
    of the objective trace is the value at the starting point.
    """
    p = b.shape[0]
    a = a_init.copy()
    grad = np.empty(p)
    trace = np.empty(max_iter + 1)
    trace[0] = _objective(Q, b, lam, a)
    kkt = _kkt(Q, b, lam, a, grad)
    sweeps = 0
    while kkt > tol and sweeps < max_iter:
        moved = 0.0
        for j in range(p):
            qjj = Q[j, j]
            if qjj <= 0.0:
                continue
            # b_j minus the off-diagonal part of (Q a)_j
            z = -grad[j] + qjj * a[j]
            if z > lam:
                new = (z - lam) / qjj
            elif z < -lam:
                new = (z + lam) / qjj
            else:
                new = 0.0
            d = new - a[j]
            if d != 0.0:
                a[j] = new
                for i in range(p):
                    grad[i] += Q[i, j] * d
                step = abs(d) * qjj
                if step > moved:
                    moved = step
        sweeps += 1
        trace[sweeps] = _objective(Q, b, lam, a)
        kkt = _kkt(Q, b, lam, a, grad)
        if moved == 0.0:
            break
    return a, sweeps, kkt, trace[: sweeps + 1]
