from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from ..exceptions import ConfigError
from ..kernelmodel import validate_constraints
from . import _kernels

OPERATORS = ("c12", "c22", "c31")


@dataclass(frozen=True)
class Toggles:
    c12: bool = True
    c22: bool = True
    c31: bool = True
    # include max(...)^gamma in the C22 weight
    include_ro: bool = True

    def active(self):
        return tuple(op for op in OPERATORS if getattr(self, op))


@dataclass(frozen=True, eq=False)
class CollisionTables:
    """Per-cell kernel factors and pair split cache for one grid and model."""

    grid: object
    model: object
    toggles: Toggles
    ext: np.ndarray
    bP: np.ndarray
    bQ: np.ndarray
    bR: np.ndarray
    Rw: np.ndarray
    kk: np.ndarray
    P_sum: np.ndarray
    P_dif: np.ndarray
    sum_node: np.ndarray
    sum_lam: np.ndarray
    dif_node: np.ndarray
    dif_lam: np.ndarray

    @property
    def n(self):
        return self.grid.n

    def split(self, t):
        """(lower node, weight) for target ``t`` on the extended node list.

        Node 0 is the condensate, nodes 1..N the cells, node N+1 the
        overflow node at ``omega_max``; node -1 means "beyond omega_max".
        """
        return _kernels.locate(self.ext, float(t))


def build_tables(grid, model, toggles=None, allow_invalid=False):
    toggles = toggles or Toggles()
    if not allow_invalid:
        report = validate_constraints(model, c_in=0.0)
        if not report.all_satisfied:
            raise ConfigError("kernel model fails validation: " + ", ".join(
                report.failed + list(report.range_errors)))

    r = np.ascontiguousarray(grid.reps, dtype=float)
    n = r.size
    ext = np.concatenate(([0.0], r, [grid.omega_max]))

    bP = np.asarray(model.bar_P(r), dtype=float)
    bQ = np.asarray(model.bar_Q(r), dtype=float)
    bR = np.asarray(model.bar_R(r), dtype=float)
    Rw = np.asarray(model.weight_R(r), dtype=float)
    kk = np.asarray(model.k_of_omega(r), dtype=float)

    sums = r[:, None] + r[None, :]
    difs = np.maximum(r[:, None] - r[None, :], 0.0)
    P_sum = np.asarray(model.weight_P(sums), dtype=float)
    P_dif = np.tril(np.asarray(model.weight_P(difs), dtype=float), k=-1)

    sum_node = np.empty((n, n), dtype=np.int64)
    sum_lam = np.empty((n, n))
    dif_node = np.zeros((n, n), dtype=np.int64)
    dif_lam = np.ones((n, n))
    for i in range(n):
        for j in range(n):
            sum_node[i, j], sum_lam[i, j] = _kernels.locate(ext, sums[i, j])
            if j < i:
                dif_node[i, j], dif_lam[i, j] = _kernels.locate(ext, r[i] - r[j])

    arrays = (ext, bP, bQ, bR, Rw, kk, P_sum, P_dif, sum_node, sum_lam, dif_node, dif_lam)
    for a in arrays:
        if a.dtype.kind == "f" and (not np.all(np.isfinite(a)) or np.any(a < 0)):
            raise ConfigError("kernel factors must be finite and non-negative on the grid")
        a.setflags(write=False)
    return CollisionTables(grid, model, toggles, *arrays)
