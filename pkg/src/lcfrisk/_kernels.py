"""Compiled inner loops for the specimen likelihood."""
from __future__ import annotations

import math

import numba
import numpy as np

LN2 = math.log(2.0)
LOG2_LO = -20.0


@numba.njit(cache=True)
def _log_curve(y, ls, b, le, c):
    # ln(s * 2**(b y) + e * 2**(c y)) and d/dy, with ls = ln s, le = ln e
    la = ls + b * LN2 * y
    lb = le + c * LN2 * y
    hi = max(la, lb)
    if hi == -np.inf:
        return -np.inf, 0.0
    ea = math.exp(la - hi)
    eb = math.exp(lb - hi)
    tot = ea + eb
    return hi + math.log(tot), LN2 * (b * ea + c * eb) / tot


@numba.njit(cache=True)
def solve_log_life(ln_eps, ls, b, le, c, y_cap):
    """ln N for a CMB curve; returns the cap / lower bound when out of range."""
    f_hi, _ = _log_curve(y_cap, ls, b, le, c)
    if ln_eps < f_hi:
        return (y_cap - 1.0) * LN2
    f_lo, _ = _log_curve(LOG2_LO, ls, b, le, c)
    if ln_eps > f_lo:
        return (LOG2_LO - 1.0) * LN2
    # each single branch alone crosses eps to the left of the root
    y = LOG2_LO
    if ls > -np.inf:
        y = max(y, (ln_eps - ls) / (b * LN2))
    if le > -np.inf:
        y = max(y, (ln_eps - le) / (c * LN2))
    y = min(y, y_cap)
    for _ in range(100):
        f, df = _log_curve(y, ls, b, le, c)
        step = -(f - ln_eps) / df
        y += step
        # quadratic convergence: the remaining error is O(step**2)
        if abs(step) < 1e-8:
            break
    y = min(max(y, LOG2_LO), y_cap)
    return (y - 1.0) * LN2


@numba.njit(cache=True)
def log_hazard(sf, b, ef, c, A, k, m, E, eps_loc, chi, ln_dA, starts, y_cap, out):
    """ln of sum_i dA_i N_i**-m for every record (rows starts[r]:starts[r+1])."""
    ls = math.log(sf / E) if sf > 0 else -np.inf
    le = math.log(ef) if ef > 0 else -np.inf
    nrec = len(starts) - 1
    for r in range(nrec):
        i0, i1 = starts[r], starts[r + 1]
        best = -np.inf
        tmp = np.empty(i1 - i0)
        for i in range(i0, i1):
            n_chi = 1.0 + A * chi[i] ** k if chi[i] > 0 else 1.0
            lnN = solve_log_life(math.log(eps_loc[i] / n_chi), ls, b, le, c, y_cap)
            t = ln_dA[i] - m * lnN
            tmp[i - i0] = t
            if t > best:
                best = t
        acc = 0.0
        for j in range(i1 - i0):
            acc += math.exp(tmp[j] - best)
        out[r] = best + math.log(acc)


@numba.njit(cache=True)
def neg_log_likelihood(sf, b, ef, c, A, k, m, E, eps_loc, chi, ln_dA, starts, ln_n, censored, y_cap):
    nrec = len(starts) - 1
    lnH = np.empty(nrec)
    log_hazard(sf, b, ef, c, A, k, m, E, eps_loc, chi, ln_dA, starts, y_cap, lnH)
    total = 0.0
    ln_m = math.log(m)
    for r in range(nrec):
        cum = math.exp(m * ln_n[r] + lnH[r])
        if censored[r]:
            total += cum
        else:
            total += -ln_m - lnH[r] - (m - 1.0) * ln_n[r] + cum
    return total
