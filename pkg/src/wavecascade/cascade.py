"""Post-hoc cascade diagnostics on stored trajectories.

Everything here is a pure function of immutable snapshots: dyadic tail
partitions, time-measures of threshold events, the concentrated/spread
dichotomy of tail energy, flux lower-bound integrands and the estimate of
the last time of energy conservation.
"""

from __future__ import annotations

import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import asdict, dataclass, field

import numpy as np

from .exceptions import ConfigError, DomainError, StateError

CONCENTRATED = "concentrated"
SPREAD = "spread"


@dataclass(frozen=True)
class DdmPartition:
    """Dyadic split of ``[Omega, inf)`` into ``2**Upsilon`` cells.

    ``non_overlapping[i]`` and ``overlapping[i]`` are ``(lo, hi)`` pairs
    indexed by subdomain number; index 0 is the unbounded top cell and
    ``hi`` is ``math.inf`` there.
    """

    ell: int
    Omega: float
    Upsilon: int
    Delta: float
    non_overlapping: tuple
    overlapping: tuple

    @property
    def count(self):
        return 2 ** self.Upsilon

    def p_indices(self):
        start = max(0, math.ceil(2.0 ** (self.Upsilon - 1) - 1))
        return tuple(range(start, self.count))

    def q_indices(self):
        stop = 2.0 ** (self.Upsilon - 1) - 2
        return tuple(range(0, math.floor(stop) + 1)) if stop >= 0 else ()

    def to_dict(self):
        def iv(pairs):
            return [[lo, None if math.isinf(hi) else hi] for lo, hi in pairs]
        return {"ell": self.ell, "Omega": self.Omega, "Upsilon": self.Upsilon,
                "Delta": self.Delta, "non_overlapping": iv(self.non_overlapping),
                "overlapping": iv(self.overlapping)}


def upsilon_brackets(ell, model, epsilon):
    e = model.exponents
    return (ell / 4.0 * (4 * e.varpi2 + e.alpha + e.gamma), ell * epsilon / 16.0)


def build_partition(ell, model, epsilon, upsilon_override=None):
    """Partition of ``[2**ell, inf)``.

    Without an override ``Upsilon`` follows the asymptotic formula, which
    is 0 for any level reachable on a desk-sized grid.
    """
    if int(ell) != ell or ell < 1:
        raise ConfigError(f"ell must be a positive integer, got {ell!r}")
    ell = int(ell)
    if upsilon_override is not None:
        if int(upsilon_override) != upsilon_override or upsilon_override < 0:
            raise ConfigError("upsilon override must be a non-negative integer")
        ups = int(upsilon_override)
    else:
        a, b = upsilon_brackets(ell, model, epsilon)
        if a < 0 or b < 0:
            raise ConfigError(
                f"Upsilon formula is negative at ell={ell} (brackets {a:g}, {b:g}); "
                "check 4ϖ₂+α+γ and epsilon, or pass an override")
        ups = math.floor(min(a, b))

    Omega = 2.0 ** ell
    K = 2 ** ups
    Delta = Omega / K
    D = [None] * K
    for i in range(K - 1):
        D[K - 1 - i] = (Omega + i * Delta, Omega + (i + 1) * Delta)
    D[0] = (2 * Omega - Delta, math.inf)
    # each overlapping cell is the union of a cell and its neighbours
    S = tuple((D[min(j + 1, K - 1)][0], D[max(j - 1, 0)][1]) for j in range(K))
    return DdmPartition(ell, Omega, ups, Delta, tuple(D), S)


def _states(trajectory):
    states = list(getattr(trajectory, "snapshots", trajectory))
    if not states:
        raise StateError("trajectory has no snapshots")
    g = states[0].grid
    for s in states[1:]:
        if not s.grid.same_as(g):
            raise StateError("snapshots live on different grids")
    return states


def _check_level(partition, grid):
    if not grid.omega_min <= partition.Omega <= grid.omega_max:
        raise DomainError(
            f"Omega={partition.Omega:g} outside grid range "
            f"[{grid.omega_min:g}, {grid.omega_max:g}]")


def _in(reps, interval):
    lo, hi = interval
    return (reps >= lo) & (reps < hi)


def _integral(state, mask, use_energy):
    w = state.masses[mask]
    if use_energy:
        w = w * state.grid.reps[mask]
    return math.fsum(w)


def _trapezoid(times, values):
    return math.fsum(0.5 * (times[k + 1] - times[k]) * (values[k] + values[k + 1])
                     for k in range(len(times) - 1))


@dataclass(frozen=True)
class LevelSetMeasures:
    M: float
    M_i: tuple
    N: float
    P: float
    Q: float
    horizon: float
    spacing: float
    integrand: str

    def to_dict(self):
        return asdict(self) | {"M_i": list(self.M_i)}


def level_sets(trajectory, partition, c_o, sigma, use_energy=False):
    """Time measures of the tail threshold sets at one level.

    Indicators are evaluated at every snapshot and integrated with the
    trapezoid rule, so each measure is accurate to one snapshot spacing.
    ``use_energy`` weights the integrand by omega.
    """
    if c_o <= 0 or sigma <= 0:
        raise ConfigError("c_o and sigma must be positive")
    states = _states(trajectory)
    grid = states[0].grid
    _check_level(partition, grid)
    reps = grid.reps
    thr = c_o * partition.Omega ** (-sigma)
    thr_i = c_o * (2.0 * partition.Omega) ** (-sigma)
    tail = reps >= partition.Omega
    masks = [_in(reps, iv) for iv in partition.overlapping]

    ind_M = np.array([_integral(s, tail, use_energy) >= thr for s in states], dtype=float)
    ind_i = np.array([[_integral(s, mk, use_energy) >= thr_i for mk in masks] for s in states],
                     dtype=float).reshape(len(states), len(masks))
    any_i = ind_i.max(axis=1)
    ind_N = ind_M * (1.0 - any_i)
    p, q = list(partition.p_indices()), list(partition.q_indices())
    ind_P = ind_i[:, p].max(axis=1) if p else np.zeros(len(states))
    ind_Q = ind_i[:, q].max(axis=1) if q else np.zeros(len(states))

    times = [s.time for s in states]
    spacing = max((b - a for a, b in zip(times, times[1:])), default=0.0)
    return LevelSetMeasures(
        M=_trapezoid(times, ind_M),
        M_i=tuple(_trapezoid(times, ind_i[:, k]) for k in range(len(masks))),
        N=_trapezoid(times, ind_N),
        P=_trapezoid(times, ind_P),
        Q=_trapezoid(times, ind_Q),
        horizon=times[-1] - times[0],
        spacing=spacing,
        integrand="energy" if use_energy else "mass",
    )


def default_lambda(sigma):
    return 1.0 - 2.0 ** (-sigma)


def classify_concentration(state, partition, lam):
    """``"spread"`` iff no overlapping cell holds ``(1 - lam)`` of the tail energy.

    An empty tail counts as concentrated: the strict inequality cannot hold.
    """
    if not 0 < lam < 1:
        raise ConfigError("lambda must lie in (0, 1)")
    reps = state.grid.reps
    total = _integral(state, reps >= partition.Omega, True)
    bound = (1.0 - lam) * total
    for iv in partition.overlapping:
        if not _integral(state, _in(reps, iv), True) < bound:
            return CONCENTRATED
    return SPREAD


def flux_bound_terms(state, partition, model, lam):
    """The three flux lower-bound integrands on one state, unit constants.

    Returns ``(c12_term, c22_term, c31_term)``, each including its
    coupling constant.
    """
    _check_level(partition, state.grid)
    th = model.theta
    e = model.exponents
    cpl = model.couplings
    a = e.alpha
    tail = state.grid.reps >= partition.Omega
    w = state.grid.reps[tail]
    Fw = state.masses[tail] * w
    if w.size == 0 or not np.any(Fw):
        return (0.0, 0.0, 0.0)

    s2 = w[:, None] + w[None, :]
    g1 = w ** (e.varpi1 + 1)
    t12 = Fw[:, None] * Fw[None, :] * s2 ** (3 * th + e.varpi1 + a - 2) * g1[:, None] * g1[None, :]
    c12_term = cpl.c12 * math.fsum(t12.ravel())

    E_tail = math.fsum(Fw)
    c22_term = (cpl.c22 * lam ** 4 * partition.Delta ** 2
                * partition.Omega ** (4 * e.varpi2 - 2 + a + e.gamma) * E_tail ** 3)

    g3 = w ** e.varpi3
    A = (Fw * g3)[:, None, None]
    B = (Fw * g3)[None, :, None]
    C = (Fw * g3)[None, None, :]
    w1, w2, w3 = w[:, None, None], w[None, :, None], w[None, None, :]
    t31 = (A * B * C * (w1 + w2 + w3) ** (3 * th + e.varpi3 + a - 2)
           * (w1 * w2 + w2 * w3 + w3 * w1))
    c31_term = cpl.c31 * math.fsum(t31.ravel())
    return (float(c12_term), float(c22_term), float(c31_term))


def tstar_crossing(times, energy, reference, tol):
    """First time ``energy`` drops below ``(1 - tol) * reference``, interpolated."""
    if not 0 < tol < 1:
        raise ConfigError("tol must lie in (0, 1)")
    thr = (1.0 - tol) * reference
    if len(times) and energy[0] < thr:
        return float(times[0])
    for k in range(len(times) - 1):
        e0, e1 = energy[k], energy[k + 1]
        if e1 < thr <= e0:
            t0, t1 = times[k], times[k + 1]
            return float(t0 + (e0 - thr) / (e0 - e1) * (t1 - t0))
    return None


def estimate_Tstar(trajectory, tol):
    """Estimated end of energy conservation, or None within the horizon.

    Uses the per-step series when the trajectory carries one, otherwise the
    snapshots.
    """
    series = getattr(trajectory, "series", None)
    if series:
        times = [rec["t"] for rec in series]
        energy = [rec["energy_grid"] for rec in series]
        reference = series[0]["energy_grid"] + series[0]["overflow_energy"]
    else:
        states = _states(trajectory)
        times = [s.time for s in states]
        energy = [math.fsum(s.masses * s.grid.reps) for s in states]
        reference = energy[0] + states[0].overflow_energy
    return tstar_crossing(times, energy, reference, tol)


@dataclass(frozen=True)
class Diagnostics:
    """Knobs for ``analyze``; ``lam=None`` means ``1 - 2**-sigma``."""

    levels: tuple = (4, 8, 12)
    c_o: float = 0.5
    sigma: float = 0.001
    tol: float = 0.01
    lam: float | None = None
    use_energy: bool = False
    epsilon: float = 0.01
    upsilon: int | None = None
    probes: tuple = (16.0, 256.0, 4096.0)

    def __post_init__(self):
        if self.c_o <= 0 or self.sigma <= 0:
            raise ConfigError("c_o and sigma must be positive")
        if not 0 < self.tol < 1:
            raise ConfigError("tol must lie in (0, 1)")
        if self.lam is not None and not 0 < self.lam < 1:
            raise ConfigError("lambda must lie in (0, 1)")
        if not self.levels:
            raise ConfigError("at least one DDM level is required")

    @property
    def lam_value(self):
        return default_lambda(self.sigma) if self.lam is None else self.lam


@dataclass
class LevelReport:
    partition: DdmPartition
    measures: LevelSetMeasures
    classes: list
    flux_terms: list
    flux_integrals: tuple

    def to_dict(self):
        return {
            "partition": self.partition.to_dict(),
            "measures": self.measures.to_dict(),
            "concentration": self.classes,
            "flux_terms": [list(t) for t in self.flux_terms],
            "flux_integrals_spread": list(self.flux_integrals),
        }


@dataclass
class CascadeReport:
    Tstar: float | None
    tol: float
    lam: float
    times: list
    levels: dict = field(default_factory=dict)
    thresholds: dict = field(default_factory=dict)
    initial_mass: float = 0.0
    initial_energy: float = 0.0
    settings: dict = field(default_factory=dict)

    def flux_ratio(self):
        """Largest time-integrated flux term over (initial mass + energy)."""
        scale = self.initial_mass + self.initial_energy
        vals = [sum(lv.flux_integrals) for lv in self.levels.values()]
        return max(vals, default=0.0) / scale if scale > 0 else 0.0

    def to_dict(self):
        return {
            "Tstar": self.Tstar,
            "Tstar_status": "none within horizon" if self.Tstar is None else "crossed",
            "tol": self.tol,
            "lambda": self.lam,
            "times": self.times,
            "initial_mass": self.initial_mass,
            "initial_energy": self.initial_energy,
            "flux_ratio": self.flux_ratio(),
            "settings": self.settings,
            "thresholds": self.thresholds,
            "levels": {str(k): v.to_dict() for k, v in self.levels.items()},
        }

    def series_rows(self):
        """Rows ``(t, ell, class, c12, c22, c31)`` for the CSV series."""
        for ell, lv in self.levels.items():
            for t, cls, terms in zip(self.times, lv.classes, lv.flux_terms):
                yield (t, ell, cls, *terms)


def _level_report(states, ell, model, diag, lam):
    part = build_partition(ell, model, diag.epsilon, diag.upsilon)
    meas = level_sets(states, part, diag.c_o, diag.sigma, diag.use_energy)
    classes = [classify_concentration(s, part, lam) for s in states]
    terms = [flux_bound_terms(s, part, model, lam) for s in states]
    times = [s.time for s in states]
    spread = [1.0 if c == SPREAD else 0.0 for c in classes]
    integrals = tuple(_trapezoid(times, [f * terms[k][j] for k, f in enumerate(spread)])
                      for j in range(3))
    return LevelReport(part, meas, classes, terms, integrals)


def analyze(trajectory, model, diag, thresholds=None, workers=1):
    """Full diagnostic report for a trajectory; levels run concurrently."""
    states = _states(trajectory)
    lam = diag.lam_value
    first = states[0]
    init_mass = math.fsum((math.fsum(first.masses), first.condensate_mass, first.overflow_mass))
    init_energy = math.fsum(first.masses * first.grid.reps) + first.overflow_energy
    with ThreadPoolExecutor(max_workers=max(1, workers)) as pool:
        reports = list(pool.map(lambda ell: _level_report(states, ell, model, diag, lam),
                                diag.levels))
    settings = asdict(diag)
    settings["levels"] = list(diag.levels)
    settings["probes"] = list(diag.probes)
    return CascadeReport(
        Tstar=estimate_Tstar(trajectory, diag.tol),
        tol=diag.tol,
        lam=lam,
        times=[s.time for s in states],
        levels=dict(zip(diag.levels, reports)),
        thresholds=dict(thresholds or {}),
        initial_mass=init_mass,
        initial_energy=init_energy,
        settings=settings,
    )
