"""Weak-form time derivative ``d/dt <F, Xi>`` with Xi taken at exact targets.

Independent of the compiled kernels: the interactions are enumerated over
ordered index tuples with numpy broadcasting, no symmetry folding, and no
binning of the products.  For a test function that is linear between
neighbouring nodes this reproduces the binned rates of ``apply`` exactly.
"""

from __future__ import annotations

import math

import numpy as np

from .rates import _check_state
from .tables import OPERATORS


def _xi(Xi, x):
    return np.asarray(Xi(np.asarray(x, dtype=float)), dtype=float) * np.ones_like(x)


def _c12_terms(m, r, tables, Xi):
    mdl = tables.model
    c12 = mdl.couplings.c12
    bP = tables.bP
    Xr = _xi(Xi, r)
    out = []
    for i in range(r.size):
        if m[i] == 0:
            continue
        base = m[i] * m * bP[i] * bP
        t = r[i] + r
        rho = c12 * base * np.asarray(mdl.weight_P(t))
        out.append(rho * (_xi(Xi, t) - Xr[i] - Xr))
        j = np.arange(i)
        if j.size:
            d = r[i] - r[j]
            rho = 2.0 * c12 * base[j] * np.asarray(mdl.weight_P(d))
            out.append(-rho * (Xr[i] - _xi(Xi, d) - Xr[j]))
    return out


def _c22_terms(m, r, tables, Xi):
    mdl = tables.model
    c22 = mdl.couplings.c22
    bR, kk = tables.bR, tables.kk
    gamma = mdl.exponents.gamma
    Xr = _xi(Xi, r)
    out = []
    J, L = np.meshgrid(np.arange(r.size), np.arange(r.size), indexing="ij")
    for i in range(r.size):
        if m[i] == 0:
            continue
        t = (r[i] + r[J]) - r[L]
        ok = t > 0
        jj, ll, tt = J[ok], L[ok], t[ok]
        if tt.size == 0:
            continue
        kt = np.asarray(mdl.k_of_omega(tt))
        kmin = np.minimum(np.minimum(kk[i], kk[jj]), np.minimum(kk[ll], kt))
        w = (c22 * m[i] * m[jj] * m[ll] * bR[i] * bR[jj] * bR[ll]
             / (kk[i] * kk[jj] * kk[ll]) * np.asarray(mdl.weight_R(tt)) * kmin)
        if tables.toggles.include_ro:
            w = w * np.maximum(np.maximum(r[i], r[jj]), np.maximum(r[ll], tt)) ** gamma
        out.append(w * (-Xr[i] - Xr[jj] + Xr[ll] + _xi(Xi, tt)))
    return out


def _c31_terms(m, r, tables, Xi):
    mdl = tables.model
    c31 = mdl.couplings.c31
    bQ = tables.bQ
    Xr = _xi(Xi, r)
    out = []
    J, L = np.meshgrid(np.arange(r.size), np.arange(r.size), indexing="ij")
    for i in range(r.size):
        if m[i] == 0:
            continue
        base = c31 * m[i] * m[J] * m[L] * bQ[i] * bQ[J] * bQ[L]
        s = (r[i] + r[J]) + r[L]
        out.append((base * np.asarray(mdl.weight_Q(s))
                    * (_xi(Xi, s) - Xr[i] - Xr[J] - Xr[L])).ravel())
        d = (r[i] - r[J]) - r[L]
        ok = d > 0
        if np.any(ok):
            dd = d[ok]
            rho = 3.0 * base[ok] * np.asarray(mdl.weight_Q(dd))
            out.append(-rho * (Xr[i] - _xi(Xi, dd) - Xr[J[ok]] - Xr[L[ok]]))
    return out


_TERMS = {"c12": _c12_terms, "c22": _c22_terms, "c31": _c31_terms}


def weak_eval(state, tables, Xi, by_operator=False):
    """Evaluate ``d/dt <F, Xi>`` over all active operators.

    ``Xi`` must accept numpy arrays; it is evaluated at the exact
    interaction products, including those above ``omega_max``.
    """
    _check_state(state, tables)
    m = np.asarray(state.masses, dtype=float)
    r = np.asarray(tables.grid.reps, dtype=float)
    parts = {}
    for op in OPERATORS:
        if getattr(tables.toggles, op) and getattr(tables.model.couplings, op) > 0:
            terms = _TERMS[op](m, r, tables, Xi)
            parts[op] = math.fsum(np.concatenate(terms)) if terms else 0.0
        else:
            parts[op] = 0.0
    total = math.fsum(parts.values())
    return (total, parts) if by_operator else total
