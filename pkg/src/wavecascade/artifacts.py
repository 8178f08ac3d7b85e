"""On-disk layout of a run directory.

::

    manifest.json          config, versions, ledger summary, snapshot list
    trajectory.csv         one row per accepted step
    snapshots/snap_*.csv   full spectra every ``snapshot_stride`` steps
    report.json            cascade diagnostics
    report_series.csv      per-snapshot concentration class and flux terms

All floats are written with ``repr`` so they round-trip exactly.
"""

from __future__ import annotations

import csv
import io
import json
import math
import platform
from pathlib import Path

import numba
import numpy as np

from . import __version__
from .evolve import SERIES_BASE, Trajectory
from .exceptions import DataError
from .spectrum import state_from_csv, state_to_csv

TRAJECTORY_SCHEMA = "wavecascade-trajectory/1"
MANIFEST_SCHEMA = "wavecascade-manifest/1"
REPORT_SCHEMA = "wavecascade-report/1"
SERIES_SCHEMA = "wavecascade-report-series/1"

MANIFEST = "manifest.json"
TRAJECTORY = "trajectory.csv"
SNAPDIR = "snapshots"
REPORT = "report.json"
REPORT_SERIES = "report_series.csv"


def _fmt(x):
    return repr(float(x))


def _write(path, text):
    with open(path, "w", encoding="utf-8", newline="") as fh:
        fh.write(text)


def versions():
    return {"wavecascade": __version__, "python": platform.python_version(),
            "numpy": np.__version__, "numba": numba.__version__}


def trajectory_to_csv(traj, path):
    buf = io.StringIO()
    buf.write(f"# schema: {TRAJECTORY_SCHEMA}\n")
    w = csv.writer(buf, lineterminator="\n")
    cols = traj.columns
    w.writerow(cols)
    for rec in traj.series:
        w.writerow([_fmt(rec[c]) for c in cols])
    _write(path, buf.getvalue())


def read_trajectory_csv(path):
    """Series records and probe frequencies from a trajectory CSV."""
    try:
        lines = Path(path).read_text(encoding="utf-8").splitlines()
    except OSError as exc:
        raise DataError(f"cannot read {path}: {exc}") from exc
    body = [ln for ln in lines if ln and not ln.startswith("#")]
    if not lines or lines[0] != f"# schema: {TRAJECTORY_SCHEMA}" or not body:
        raise DataError(f"{path}: not a trajectory file")
    rows = list(csv.reader(body))
    header = tuple(rows[0])
    if header[:len(SERIES_BASE)] != SERIES_BASE:
        raise DataError(f"{path}: unexpected columns")
    probes = []
    for name in header[len(SERIES_BASE):]:
        if not name.startswith("tail_E@"):
            raise DataError(f"{path}: unexpected column {name!r}")
        probes.append(float(name[len("tail_E@"):]))
    try:
        series = [dict(zip(header, map(float, r), strict=True)) for r in rows[1:]]
    except ValueError as exc:
        raise DataError(f"{path}: corrupt row ({exc})") from exc
    return series, tuple(probes)


def write_snapshots(traj, run_dir):
    d = Path(run_dir) / SNAPDIR
    d.mkdir(parents=True, exist_ok=True)
    names = []
    for k, state in enumerate(traj.snapshots):
        name = f"{SNAPDIR}/snap_{k:05d}.csv"
        state_to_csv(state, Path(run_dir) / name)
        names.append(name)
    return names


def write_report(report, run_dir):
    doc = {"schema": REPORT_SCHEMA} | report.to_dict()
    _write(Path(run_dir) / REPORT, json.dumps(doc, indent=2, ensure_ascii=False) + "\n")
    buf = io.StringIO()
    buf.write(f"# schema: {SERIES_SCHEMA}\n")
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(("t", "ell", "class", "flux_c12", "flux_c22", "flux_c31"))
    for t, ell, cls, a, b, c in report.series_rows():
        w.writerow((_fmt(t), ell, cls, _fmt(a), _fmt(b), _fmt(c)))
    _write(Path(run_dir) / REPORT_SERIES, buf.getvalue())


def ledger_summary(traj):
    """Mass and energy bookkeeping between the first and last record."""
    first, last = traj.series[0], traj.series[-1]

    def total_energy(rec):
        return rec["energy_grid"] + rec["overflow_energy"]

    e0 = total_energy(first)
    drift = max((abs(total_energy(r) - e0) for r in traj.series), default=0.0)
    return {
        "steps": len(traj.series) - 1,
        "t_final": last["t"],
        "initial_mass": first["mass"],
        "final_mass": last["mass"],
        "initial_energy": e0,
        "final_energy_grid": last["energy_grid"],
        "final_overflow_energy": last["overflow_energy"],
        "final_overflow_fraction": last["overflow_energy"] / e0 if e0 > 0 else 0.0,
        "max_energy_drift": drift,
        "max_relative_energy_drift": drift / e0 if e0 > 0 else 0.0,
    }


def write_manifest(run_dir, raw_config, traj, snapshot_names, constraints, status,
                   message=""):
    doc = {
        "schema": MANIFEST_SCHEMA,
        "status": status,
        "message": message,
        "versions": versions(),
        # the output location is not part of the run, so moved copies stay identical
        "config": {k: v for k, v in raw_config.items() if k != "output"},
        "constraints": constraints,
        "ledger": ledger_summary(traj) if traj.series else {},
        "files": {"trajectory": TRAJECTORY, "report": REPORT, "report_series": REPORT_SERIES},
        "snapshots": snapshot_names,
    }
    _write(Path(run_dir) / MANIFEST, json.dumps(doc, indent=2, ensure_ascii=False,
                                                default=_json_default) + "\n")
    return doc


def _json_default(obj):
    if isinstance(obj, (np.floating, np.integer)):
        return obj.item()
    raise TypeError(f"not JSON serialisable: {type(obj).__name__}")


def read_manifest(run_dir):
    path = Path(run_dir) / MANIFEST
    try:
        doc = json.loads(path.read_text(encoding="utf-8"))
    except OSError as exc:
        raise DataError(f"no manifest in {run_dir}: {exc}") from exc
    except json.JSONDecodeError as exc:
        raise DataError(f"{path}: corrupt manifest ({exc})") from exc
    if doc.get("schema") != MANIFEST_SCHEMA:
        raise DataError(f"{path}: unsupported schema {doc.get('schema')!r}")
    return doc


def load_run(run_dir):
    """Manifest and trajectory (series plus snapshots) of a finished run."""
    run_dir = Path(run_dir)
    if not run_dir.is_dir():
        raise DataError(f"{run_dir} is not a directory")
    manifest = read_manifest(run_dir)
    series, probes = read_trajectory_csv(run_dir / manifest["files"]["trajectory"])
    names = manifest.get("snapshots") or []
    if not names:
        raise DataError(f"{run_dir}: manifest lists no snapshots")
    snaps = [state_from_csv(run_dir / n) for n in names]
    for s in snaps[1:]:
        if not s.grid.same_as(snaps[0].grid):
            raise DataError(f"{run_dir}: snapshots disagree on the grid")
    if any(not math.isfinite(r["t"]) for r in series):
        raise DataError(f"{run_dir}: non-finite time in trajectory")
    return manifest, Trajectory(snapshots=snaps, series=series, probes=probes)
