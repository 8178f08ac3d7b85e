"""Frequency grid and measure-valued spectral state.

A state holds the cell masses ``m_i = int_{cell i} F dw`` of the measure
``F = Gamma f`` on a truncated grid ``[omega_min, omega_max]``, plus three
accumulators:

* ``condensate_mass``: mass parked at omega = 0.  Every kernel vanishes
  there, so it never interacts again and carries no energy.
* ``overflow_mass`` / ``overflow_energy``: mass and exact energy of
  interaction products that left the grid at the top (frequency infinity).
"""

from __future__ import annotations

import csv
import io
import math
from dataclasses import dataclass, field, replace

import numpy as np

from .exceptions import ConfigError, DataError, StateError

SNAPSHOT_SCHEMA = "wavecascade-snapshot/1"
SNAPSHOT_COLUMNS = ("i", "omega_lo", "omega_hi", "omega_rep", "mass")


@dataclass(frozen=True, eq=False)
class FrequencyGrid:
    edges: np.ndarray
    reps: np.ndarray
    kind: str = "custom"

    def __post_init__(self):
        edges = np.asarray(self.edges, dtype=float)
        reps = np.asarray(self.reps, dtype=float)
        if edges.ndim != 1 or edges.size < 3:
            raise ConfigError("a grid needs at least two cells")
        if edges[0] < 0 or np.any(np.diff(edges) <= 0):
            raise ConfigError("grid edges must be non-negative and strictly increasing")
        if reps.shape != (edges.size - 1,):
            raise ConfigError("need exactly one representative per cell")
        if np.any(reps < edges[:-1]) or np.any(reps >= edges[1:]):
            raise ConfigError("representatives must lie in [lo, hi) of their cell")
        if reps[0] <= 0:
            raise ConfigError("representative frequencies must be positive")
        edges.setflags(write=False)
        reps.setflags(write=False)
        object.__setattr__(self, "edges", edges)
        object.__setattr__(self, "reps", reps)

    @property
    def n(self):
        return self.reps.size

    @property
    def omega_min(self):
        return float(self.edges[0])

    @property
    def omega_max(self):
        return float(self.edges[-1])

    def identity(self):
        return (self.kind, self.edges.tobytes(), self.reps.tobytes())

    def same_as(self, other):
        return (np.array_equal(self.edges, other.edges)
                and np.array_equal(self.reps, other.reps))


def make_grid(kind, omega_min, omega_max, n, rep=None):
    """Build a uniform or geometric grid with ``n`` cells.

    ``rep`` selects the representative frequency: ``"midpoint"`` or
    ``"geometric"``.  Defaults to the natural choice for ``kind``.
    """
    n = int(n)
    if n < 2:
        raise ConfigError(f"need N >= 2 cells, got {n}")
    if not 0 <= omega_min < omega_max:
        raise ConfigError("require 0 <= omega_min < omega_max")
    if kind == "uniform":
        edges = np.linspace(omega_min, omega_max, n + 1)
    elif kind == "geometric":
        if omega_min <= 0:
            raise ConfigError("geometric grids need omega_min > 0")
        ratio = (omega_max / omega_min) ** (1.0 / n)
        edges = omega_min * ratio ** np.arange(n + 1)
        edges[-1] = omega_max
    else:
        raise ConfigError(f"unknown grid kind {kind!r}")

    rep = rep or ("geometric" if kind == "geometric" else "midpoint")
    lo, hi = edges[:-1], edges[1:]
    if rep == "midpoint":
        reps = 0.5 * (lo + hi)
    elif rep == "geometric":
        if lo[0] <= 0:
            raise ConfigError("geometric representatives need omega_min > 0")
        reps = np.sqrt(lo * hi)
    else:
        raise ConfigError(f"unknown representative choice {rep!r}")
    return FrequencyGrid(edges, reps, kind)


@dataclass(frozen=True, eq=False)
class SpectralState:
    grid: FrequencyGrid
    masses: np.ndarray
    condensate_mass: float = 0.0
    overflow_mass: float = 0.0
    overflow_energy: float = 0.0
    time: float = 0.0

    def __post_init__(self):
        m = np.array(self.masses, dtype=float)
        if m.shape != (self.grid.n,):
            raise StateError(f"expected {self.grid.n} masses, got shape {m.shape}")
        if not np.all(np.isfinite(m)) or np.any(m < 0):
            raise StateError("masses must be finite and non-negative")
        for name in ("condensate_mass", "overflow_mass", "overflow_energy"):
            v = getattr(self, name)
            if not (v >= 0 and math.isfinite(v)):
                raise StateError(f"{name} must be finite and non-negative, got {v}")
        m.setflags(write=False)
        object.__setattr__(self, "masses", m)

    def __add__(self, other):
        if not self.grid.same_as(other.grid):
            raise StateError("cannot add states on different grids")
        return SpectralState(
            self.grid, self.masses + other.masses,
            self.condensate_mass + other.condensate_mass,
            self.overflow_mass + other.overflow_mass,
            self.overflow_energy + other.overflow_energy,
            self.time,
        )

    def with_(self, **changes):
        return replace(self, **changes)


def zero_state(grid):
    return SpectralState(grid, np.zeros(grid.n))


@dataclass(frozen=True)
class Moments:
    mass: float
    grid_mass: float
    energy: float
    condensate_mass: float
    overflow_mass: float
    overflow_energy: float
    tails: dict = field(default_factory=dict)


def moments(state, tail_R=()):
    """Mass (grid plus both accumulators), grid energy and tail energies."""
    m = state.masses
    grid_mass = math.fsum(m)
    energy = math.fsum(m * state.grid.reps)
    return Moments(
        mass=math.fsum((grid_mass, state.condensate_mass, state.overflow_mass)),
        grid_mass=grid_mass,
        energy=energy,
        condensate_mass=state.condensate_mass,
        overflow_mass=state.overflow_mass,
        overflow_energy=state.overflow_energy,
        tails={float(R): tail_energy(state, R) for R in tail_R},
    )


def tail_energy(state, R):
    sel = state.grid.reps >= R
    return math.fsum(state.masses[sel] * state.grid.reps[sel])


def weighted_functional(state, Xi):
    """``sum_i m_i Xi(rep_i) + condensate * Xi(0)``; ``Xi`` must accept arrays."""
    vals = np.asarray(Xi(state.grid.reps), dtype=float)
    parts = state.masses * np.broadcast_to(vals, state.masses.shape)
    total = math.fsum(parts)
    if state.condensate_mass:
        total = math.fsum((total, state.condensate_mass * float(Xi(np.zeros(1))[0])))
    return total


def convex_tail_functional(state, R, include_overflow=True):
    """``<(w - R)_+>`` over grid cells, plus the overflow ledger.

    Overflow deposits all sit at frequencies >= the top representative,
    so for ``R`` up to that point their contribution is exactly
    ``E_ovf - R M_ovf``.
    """
    reps = state.grid.reps
    total = math.fsum(state.masses * np.maximum(reps - R, 0.0))
    if include_overflow and state.overflow_mass:
        if R > reps[-1]:
            raise ValueError("overflow contribution is only exact for R <= top representative")
        total = math.fsum((total, state.overflow_energy, -R * state.overflow_mass))
    return total


# ---------------------------------------------------------------------------
# initial data

def init_power_law_tail(grid, C_in, c_in, r0, lump_tail=True):
    """Initial data with ``F(0, w) = c_in C_in w^(-c_in - 2)`` on ``w >= r0``.

    The density integrates to ``int_R^inf w F dw = C_in R^-c_in``.  Cell
    masses are the exact integrals of the density over each cell (cells
    straddling ``r0`` take the part above it).  With ``lump_tail`` the energy
    ``C_in omega_max^-c_in`` that the density carries above the grid is
    added to the top cell as mass ``C_in omega_max^-c_in / rep_top``, so the
    discrete tail energy keeps the lower bound ``C_in R^-c_in`` (up to one
    cell's ratio) all the way to the top of the grid.  Without it the
    truncated density only carries ``C_in (R^-c_in - omega_max^-c_in)``,
    which is a small fraction of the bound when ``c_in`` is small.
    """
    if not C_in > 0:
        raise ConfigError("C_in must be positive")
    if not c_in > 0:
        raise ConfigError("c_in must be positive")
    if not (grid.omega_min <= r0 < grid.omega_max) or r0 <= 0:
        raise ConfigError(f"r0={r0} must lie in the grid and be positive")

    lo = np.maximum(grid.edges[:-1], r0)
    hi = grid.edges[1:]
    active = hi > r0
    p = -c_in - 1.0
    masses = np.zeros(grid.n)
    # int_a^b c C w^(-c-2) dw = c C / (c + 1) (a^(-c-1) - b^(-c-1))
    masses[active] = (c_in * C_in / (c_in + 1.0)) * (lo[active] ** p - hi[active] ** p)
    if lump_tail:
        masses[-1] += C_in * grid.omega_max ** (-c_in) / grid.reps[-1]
    return SpectralState(grid, masses)


def init_from_masses(grid, masses):
    return SpectralState(grid, np.asarray(masses, dtype=float))


# ---------------------------------------------------------------------------
# CSV persistence

def _fmt(x):
    return repr(float(x))


def state_to_csv(state, path=None):
    """Write ``i,omega_lo,omega_hi,omega_rep,mass``; accumulators go in comments."""
    buf = io.StringIO()
    buf.write(f"# schema: {SNAPSHOT_SCHEMA}\n")
    buf.write(f"# time: {_fmt(state.time)}\n")
    buf.write(f"# condensate_mass: {_fmt(state.condensate_mass)}\n")
    buf.write(f"# overflow_mass: {_fmt(state.overflow_mass)}\n")
    buf.write(f"# overflow_energy: {_fmt(state.overflow_energy)}\n")
    buf.write(f"# grid_kind: {state.grid.kind}\n")
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(SNAPSHOT_COLUMNS)
    g = state.grid
    for i in range(g.n):
        w.writerow((i, _fmt(g.edges[i]), _fmt(g.edges[i + 1]), _fmt(g.reps[i]),
                    _fmt(state.masses[i])))
    text = buf.getvalue()
    if path is not None:
        with open(path, "w", encoding="utf-8", newline="") as fh:
            fh.write(text)
    return text


def state_from_csv(path):
    try:
        with open(path, encoding="utf-8") as fh:
            lines = fh.read().splitlines()
    except OSError as exc:
        raise DataError(f"cannot read snapshot {path}: {exc}") from exc
    meta, body = {}, []
    for line in lines:
        if line.startswith("#"):
            key, _, val = line[1:].partition(":")
            meta[key.strip()] = val.strip()
        elif line.strip():
            body.append(line)
    if meta.get("schema") not in (None, SNAPSHOT_SCHEMA):
        raise DataError(f"{path}: unsupported schema {meta.get('schema')!r}")
    rows = list(csv.reader(body))
    if not rows or tuple(rows[0]) != SNAPSHOT_COLUMNS:
        raise DataError(f"{path}: missing or wrong header")
    try:
        data = np.array([[float(v) for v in r] for r in rows[1:]], dtype=float)
        if data.ndim != 2 or data.shape[1] != 5:
            raise ValueError("ragged rows")
        lo, hi, reps, m = data[:, 1], data[:, 2], data[:, 3], data[:, 4]
        edges = np.append(lo, hi[-1])
        if not np.array_equal(lo[1:], hi[:-1]):
            raise ValueError("cells are not contiguous")
        grid = FrequencyGrid(edges, reps, meta.get("grid_kind", "custom"))
        return SpectralState(
            grid, m,
            condensate_mass=float(meta.get("condensate_mass", 0.0)),
            overflow_mass=float(meta.get("overflow_mass", 0.0)),
            overflow_energy=float(meta.get("overflow_energy", 0.0)),
            time=float(meta.get("time", 0.0)),
        )
    except (ValueError, IndexError, ConfigError, StateError) as exc:
        raise DataError(f"{path}: corrupt snapshot ({exc})") from exc
