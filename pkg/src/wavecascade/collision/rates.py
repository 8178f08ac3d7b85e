from __future__ import annotations

import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field

import numpy as np

from ..exceptions import StateError
from . import _kernels
from .tables import OPERATORS


@dataclass(frozen=True, eq=False)
class RateResult:
    """Time derivative of a spectral state.

    ``loss`` holds the gross per-cell loss rates used by the positivity
    bound of the integrator; ``gross_flux`` is the energy throughput of all
    interactions and sets the scale for ledger tolerances.
    """

    dm: np.ndarray
    loss: np.ndarray
    condensate_rate: float
    overflow_mass_rate: float
    overflow_energy_rate: float
    gross_flux: float
    reps: np.ndarray = field(repr=False, default=None)
    by_operator: dict = field(default_factory=dict)

    @property
    def energy_residual(self):
        """Grid energy rate plus overflow energy rate; zero up to roundoff."""
        return math.fsum(self.dm * self.reps) + self.overflow_energy_rate

    @property
    def mass_rate(self):
        return math.fsum((math.fsum(self.dm), self.condensate_rate, self.overflow_mass_rate))


def _zero_result(n, reps):
    return RateResult(np.zeros(n), np.zeros(n), 0.0, 0.0, 0.0, 0.0, reps)


def _check_state(state, tables):
    if not state.grid.same_as(tables.grid):
        raise StateError("state is not on the collision tables' grid")
    m = state.masses
    if np.any(np.isnan(m)) or np.any(m < 0):
        raise StateError("masses must be finite and non-negative")


def _run_rows(kernel, args, n, workers):
    acc = np.zeros((n, n + 3))
    loss = np.zeros((n, n))
    gross = np.zeros(n)
    if workers <= 1 or n < 2:
        kernel(0, n, *args, acc, loss, gross)
    else:
        bounds = np.linspace(0, n, min(workers, n) + 1).astype(int)
        with ThreadPoolExecutor(max_workers=len(bounds) - 1) as pool:
            futs = [pool.submit(kernel, int(a), int(b), *args, acc, loss, gross)
                    for a, b in zip(bounds[:-1], bounds[1:])]
            for f in futs:
                f.result()
    # fixed reduction order over rows, independent of how rows were shared out
    return acc.sum(axis=0), loss.sum(axis=0), float(gross.sum())


def _operator_rates(op, m, tables, workers):
    t = tables
    r = np.ascontiguousarray(t.grid.reps)
    mdl = t.model
    cpl = mdl.couplings
    n = r.size
    if op == "c12":
        args = (m, r, t.ext, t.bP, t.P_sum, t.P_dif, t.sum_node, t.sum_lam,
                t.dif_node, t.dif_lam, float(cpl.c12))
        kernel = _kernels.c12_rows
    elif op == "c22":
        R_coef, R_expo = mdl.R_coef_expo
        args = (m, r, t.ext, t.bR, t.kk, float(R_coef), float(R_expo),
                float(mdl.dispersion.c_omega), float(mdl.theta),
                float(mdl.exponents.gamma), bool(t.toggles.include_ro), float(cpl.c22))
        kernel = _kernels.c22_rows
    else:
        Q_coef, Q_expo = mdl.Q_coef_expo
        args = (m, r, t.ext, t.bQ, float(Q_coef), float(Q_expo), float(cpl.c31))
        kernel = _kernels.c31_rows
    acc, loss, gross = _run_rows(kernel, args, n, workers)
    res = RateResult(
        dm=acc[1:n + 1].copy(),
        loss=loss,
        condensate_rate=float(acc[0]),
        overflow_mass_rate=float(acc[n + 1]),
        overflow_energy_rate=float(acc[n + 2]),
        gross_flux=gross,
        reps=r,
    )
    return res


def apply(state, tables, workers=1):
    """Rates of change of all cell masses and accumulators.

    Parameters
    ----------
    state : SpectralState
        Must live on ``tables.grid``.
    tables : CollisionTables
    workers : int
        Threads used for the interaction sums.  Results are bit-identical
        for any value.
    """
    _check_state(state, tables)
    n = tables.n
    reps = np.ascontiguousarray(tables.grid.reps)
    m = np.ascontiguousarray(state.masses, dtype=float)
    parts = {}
    for op in OPERATORS:
        if getattr(tables.toggles, op) and getattr(tables.model.couplings, op) > 0:
            parts[op] = _operator_rates(op, m, tables, workers)
        else:
            parts[op] = _zero_result(n, reps)

    ops = [parts[op] for op in OPERATORS]
    total = RateResult(
        dm=ops[0].dm + ops[1].dm + ops[2].dm,
        loss=ops[0].loss + ops[1].loss + ops[2].loss,
        condensate_rate=ops[0].condensate_rate + ops[1].condensate_rate + ops[2].condensate_rate,
        overflow_mass_rate=(ops[0].overflow_mass_rate + ops[1].overflow_mass_rate
                            + ops[2].overflow_mass_rate),
        overflow_energy_rate=(ops[0].overflow_energy_rate + ops[1].overflow_energy_rate
                              + ops[2].overflow_energy_rate),
        gross_flux=ops[0].gross_flux + ops[1].gross_flux + ops[2].gross_flux,
        reps=reps,
        by_operator=parts,
    )
    return total
