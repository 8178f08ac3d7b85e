"""Explicit, positivity-preserving time integration of the truncated system."""

from __future__ import annotations

import logging
import math
from collections import namedtuple
from dataclasses import dataclass, field

import numpy as np

from .collision import OPERATORS, apply
from .exceptions import ConfigError, StiffnessError
from .spectrum import SpectralState, moments

log = logging.getLogger(__name__)

SERIES_BASE = ("t", "dt", "mass", "energy_grid", "overflow_mass", "overflow_energy",
               "flux_c12", "flux_c22", "flux_c31")


@dataclass(frozen=True)
class StepControl:
    method: str = "heun"
    dt_init: float = 1e-3
    dt_min: float = 1e-14
    dt_max: float = 1.0
    safety: float = 0.5
    t_end: float = 1.0
    snapshot_stride: int = 10
    # proposal grows by this factor after a step that needed no retry
    growth: float = 1.5

    def __post_init__(self):
        if self.method not in ("euler", "heun"):
            raise ConfigError(f"unknown method {self.method!r}")
        if not 0 < self.dt_min <= self.dt_init <= self.dt_max:
            raise ConfigError("need 0 < dt_min <= dt_init <= dt_max")
        if not 0 < self.safety <= 1:
            raise ConfigError("safety must lie in (0, 1]")
        if self.t_end < 0:
            raise ConfigError("t_end must be non-negative")
        if self.snapshot_stride < 1:
            raise ConfigError("snapshot_stride must be >= 1")
        if self.growth < 1:
            raise ConfigError("growth must be >= 1")


def probe_label(R):
    """Column name for a tail-energy probe; exact for any float."""
    R = float(R)
    return f"tail_E@{int(R)}" if R.is_integer() and abs(R) < 1e15 else f"tail_E@{R!r}"


@dataclass
class Trajectory:
    snapshots: list = field(default_factory=list)
    series: list = field(default_factory=list)
    probes: tuple = ()

    @property
    def columns(self):
        return SERIES_BASE + tuple(probe_label(R) for R in self.probes)

    def column(self, name):
        return np.array([rec[name] for rec in self.series], dtype=float)

    @property
    def times(self):
        return np.array([s.time for s in self.snapshots])

    @property
    def final(self):
        return self.snapshots[-1]


def positivity_bound(masses, loss, safety):
    """``safety * min m_i / L_i`` over cells with a positive loss rate."""
    active = loss > 0
    if not np.any(active):
        return math.inf
    return safety * float(np.min(masses[active] / loss[active]))


def make_record(state, rates, dt, probes):
    mo = moments(state, probes)
    rec = {
        "t": state.time,
        "dt": dt,
        "mass": mo.mass,
        "energy_grid": mo.energy,
        "overflow_mass": state.overflow_mass,
        "overflow_energy": state.overflow_energy,
    }
    for op in OPERATORS:
        rec[f"flux_{op}"] = rates.by_operator[op].gross_flux if rates.by_operator else 0.0
    for R in probes:
        rec[probe_label(R)] = mo.tails[float(R)]
    return rec


def _advance(state, rates, dt):
    """Candidate state after an explicit update; None if any mass went negative."""
    m = state.masses + dt * rates.dm
    if np.any(m < 0) or np.any(np.isnan(m)):
        return None
    return SpectralState(
        state.grid, m,
        condensate_mass=state.condensate_mass + dt * rates.condensate_rate,
        overflow_mass=state.overflow_mass + dt * rates.overflow_mass_rate,
        overflow_energy=state.overflow_energy + dt * rates.overflow_energy_rate,
        time=state.time + dt,
    )


_Increment = namedtuple("_Increment", "dm condensate_rate overflow_mass_rate overflow_energy_rate")


def _average(a, b):
    return _Increment(
        0.5 * (a.dm + b.dm),
        0.5 * (a.condensate_rate + b.condensate_rate),
        0.5 * (a.overflow_mass_rate + b.overflow_mass_rate),
        0.5 * (a.overflow_energy_rate + b.overflow_energy_rate),
    )


def step(state, tables, control, dt=None, rates=None, workers=1, dt_cap=math.inf):
    """Advance one step.

    Parameters
    ----------
    dt : float, optional
        Proposed step; defaults to ``control.dt_init``.
    rates : RateResult, optional
        Rates at ``state`` if already known.
    dt_cap : float
        Hard upper limit (used by ``run`` to land on ``t_end``).

    Returns
    -------
    (new_state, info) where ``info`` holds the accepted ``dt``, the rates
    at the new state, the next proposal and the retry count.
    """
    if rates is None:
        rates = apply(state, tables, workers)
    dt = control.dt_init if dt is None else dt
    bound = positivity_bound(state.masses, rates.loss, control.safety)
    dt = min(dt, control.dt_max, bound)
    if dt < control.dt_min:
        raise StiffnessError(
            f"positivity bound forces dt={dt:.3e} < dt_min at t={state.time:.6g}",
            {"t": state.time, "dt": dt, "cells": _tight_cells(state, rates)})
    dt = min(dt, dt_cap)

    retries = 0
    while True:
        new = _advance(state, rates, dt)
        if new is not None and control.method == "heun":
            k2 = apply(new, tables, workers)
            new = _advance(state, _average(rates, k2), dt)
        if new is not None:
            break
        retries += 1
        dt *= 0.5
        if dt < control.dt_min:
            raise StiffnessError(
                f"negative mass persists down to dt={dt:.3e} at t={state.time:.6g}",
                {"t": state.time, "dt": dt, "cells": _tight_cells(state, rates)})

    new_rates = apply(new, tables, workers)
    next_dt = min(control.dt_max, dt * control.growth) if retries == 0 else dt
    if dt == dt_cap and dt_cap < math.inf:
        next_dt = max(next_dt, control.dt_init)
    return new, {"dt": dt, "rates": new_rates, "next_dt": next_dt, "retries": retries}


def _tight_cells(state, rates):
    with np.errstate(divide="ignore", invalid="ignore"):
        ratio = np.where(rates.loss > 0, state.masses / rates.loss, np.inf)
    order = np.argsort(ratio)[:5]
    return [(int(i), float(state.masses[i]), float(rates.loss[i])) for i in order]


def run(initial, tables, control, probes=(), workers=1, max_steps=None):
    """Integrate from ``initial.time`` to ``control.t_end``.

    On a stiffness failure the partially built trajectory is attached to the
    exception payload under ``"trajectory"``.
    """
    probes = tuple(float(R) for R in probes)
    traj = Trajectory(probes=probes)
    state = initial
    rates = apply(state, tables, workers)
    traj.snapshots.append(state)
    traj.series.append(make_record(state, rates, 0.0, probes))

    dt_prop = control.dt_init
    n = 0
    while state.time < control.t_end:
        remaining = control.t_end - state.time
        try:
            state, info = step(state, tables, control, dt_prop, rates, workers,
                               dt_cap=remaining)
        except StiffnessError as exc:
            if traj.snapshots[-1] is not state:
                traj.snapshots.append(state)
            exc.payload["trajectory"] = traj
            raise
        n += 1
        rates = info["rates"]
        dt_prop = info["next_dt"]
        if info["dt"] >= remaining:
            state = state.with_(time=control.t_end)
        traj.series.append(make_record(state, rates, info["dt"], probes))
        done = state.time >= control.t_end or (max_steps is not None and n >= max_steps)
        if n % control.snapshot_stride == 0 or done:
            traj.snapshots.append(state)
        if done:
            break
    log.debug("run finished after %d steps at t=%g", n, state.time)
    return traj
