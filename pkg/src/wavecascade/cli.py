"""Command line entry point: ``wavecascade validate|run|sweep|analyze``.

Exit codes: 0 success, 1 constraint or run failure, 2 usage or config
error, 3 stiffness (partial outputs are written), 4 unreadable run data.
"""

from __future__ import annotations

import argparse
import copy
import csv
import io
import itertools
import logging
import sys
from concurrent.futures import ProcessPoolExecutor
from pathlib import Path

try:
    import tomllib
except ModuleNotFoundError:  # Python < 3.11
    import tomli as tomllib

from . import __version__, artifacts, cascade, evolve
from .collision import build_tables
from .config import from_dict, load_config, set_key
from .exceptions import ConfigError, DataError, StiffnessError

log = logging.getLogger("wavecascade")

EXIT_OK, EXIT_FAIL, EXIT_USAGE, EXIT_STIFF, EXIT_DATA = 0, 1, 2, 3, 4
SWEEP_SCHEMA = "wavecascade-sweep/1"


def _threshold_refs(report):
    return {
        "c_in": report.c_in,
        "cin_threshold_immediate": report.cin_threshold_immediate,
        "cin_threshold_finite": report.cin_threshold_finite,
        "immediate_cascade": report.immediate_cascade,
        "finite_cascade": report.finite_cascade,
        "constraints_ok": report.all_satisfied,
    }


def cmd_validate(cfg, out=None):
    """Print the constraint table; returns ``(report, exit_code)``."""
    report = cfg.constraint_report()
    print(report.format_table(), file=out or sys.stdout)
    return report, EXIT_OK if report.all_satisfied else EXIT_FAIL


def cmd_run(cfg, out_dir=None, workers=1, allow_invalid=False):
    """Validate, integrate and write a complete run directory.

    Returns ``(exit_code, manifest)``.
    """
    run_dir = Path(out_dir or cfg.out_dir)
    constraints = cfg.constraint_report()
    if not constraints.all_satisfied and not allow_invalid:
        message = ("kernel model fails validation: "
                   + ", ".join(constraints.failed + list(constraints.range_errors)))
        log.error("%s (use --allow-invalid to run anyway)", message)
        return EXIT_FAIL, {"status": "invalid", "message": message, "ledger": {}, "Tstar": None}
    run_dir.mkdir(parents=True, exist_ok=True)

    grid = cfg.make_grid()
    tables = build_tables(grid, cfg.model, cfg.toggles, allow_invalid=True)
    state = cfg.initial_state(grid)
    status, message, code = "ok", "", EXIT_OK
    try:
        traj = evolve.run(state, tables, cfg.step, cfg.diagnostics.probes, workers,
                          cfg.max_steps)
    except StiffnessError as exc:
        traj = exc.payload["trajectory"]
        status, message, code = "stiff", str(exc), EXIT_STIFF
        log.error("%s", exc)

    names = artifacts.write_snapshots(traj, run_dir)
    artifacts.trajectory_to_csv(traj, run_dir / artifacts.TRAJECTORY)
    refs = _threshold_refs(constraints)
    report = cascade.analyze(traj, cfg.model, cfg.diagnostics, refs, workers)
    artifacts.write_report(report, run_dir)
    manifest = artifacts.write_manifest(run_dir, cfg.raw, traj, names, constraints.to_dict(),
                                        status, message)
    manifest["Tstar"] = report.Tstar
    return code, manifest


def cmd_analyze(run_dir, out_dir=None, diagnostics=None, upsilon=None, lam=None, workers=1):
    """Recompute the cascade report of a stored run.

    ``diagnostics`` is a partial ``[diagnostics]`` table overriding the
    run's own settings.  Returns the report; files go to ``out_dir`` when
    given.
    """
    manifest, traj = artifacts.load_run(run_dir)
    raw = copy.deepcopy(manifest["config"])
    raw["diagnostics"].update(diagnostics or {})
    if lam is not None:
        raw["diagnostics"]["lambda"] = lam
    cfg = from_dict(raw, base_dir=run_dir, upsilon=upsilon)
    refs = _threshold_refs(cfg.constraint_report())
    report = cascade.analyze(traj, cfg.model, cfg.diagnostics, refs, workers)
    if out_dir is not None:
        Path(out_dir).mkdir(parents=True, exist_ok=True)
        artifacts.write_report(report, out_dir)
    return report


def parse_axis(spec):
    """``key=v1,v2,...`` -> (key, [values]); values are read as TOML scalars."""
    key, sep, values = spec.partition("=")
    key = key.strip()
    if not sep or not key:
        raise ConfigError(f"axis {spec!r} must look like key=v1,v2")
    tokens = [v.strip() for v in values.split(",") if v.strip()]
    if not tokens:
        raise ConfigError(f"axis {key!r} has no values")
    out = []
    for tok in tokens:
        try:
            out.append(tomllib.loads(f"v = {tok}")["v"])
        except tomllib.TOMLDecodeError:
            out.append(tok)
    return key, out


def _sweep_point(job):
    index, doc, base_dir, out_dir, allow_invalid, upsilon = job
    row = {"point": index, "status": "ok", "Tstar": None, "final_overflow_fraction": None,
           "constraints_ok": None, "immediate_cascade": None, "error": ""}
    try:
        cfg = from_dict(doc, base_dir=base_dir, out_dir=out_dir, upsilon=upsilon)
        rep = cfg.constraint_report()
        row["constraints_ok"] = rep.all_satisfied
        row["immediate_cascade"] = rep.immediate_cascade
        code, manifest = cmd_run(cfg, out_dir, workers=1, allow_invalid=allow_invalid)
        row["status"] = manifest["status"]
        row["Tstar"] = manifest["Tstar"]
        row["final_overflow_fraction"] = manifest["ledger"].get("final_overflow_fraction")
    except Exception as exc:  # recorded per point, the sweep carries on
        row["status"] = "error"
        row["error"] = f"{type(exc).__name__}: {exc}"
    return row


def cmd_sweep(config_path, axes, out_dir=None, workers=1, allow_invalid=False, upsilon=None):
    """Run the Cartesian product of ``axes`` and write ``sweep.csv``.

    ``axes`` is a list of ``(key, values)``.  Returns the aggregate rows.
    """
    if not axes:
        raise ConfigError("a sweep needs at least one --axis")
    for key, values in axes:
        if not values:
            raise ConfigError(f"axis {key!r} is empty")
    config_path = Path(config_path)
    base = load_config(config_path)  # fail fast on a bad template
    try:
        doc = tomllib.loads(config_path.read_text(encoding="utf-8"))
    except (OSError, tomllib.TOMLDecodeError) as exc:
        raise ConfigError(str(exc)) from exc
    root = Path(out_dir or base.out_dir)
    root.mkdir(parents=True, exist_ok=True)

    keys = [k for k, _ in axes]
    jobs, points = [], []
    for idx, combo in enumerate(itertools.product(*(v for _, v in axes))):
        d = copy.deepcopy(doc)
        for k, v in zip(keys, combo):
            set_key(d, k, v)
        points.append(combo)
        jobs.append((idx, d, str(config_path.parent), str(root / f"point_{idx:04d}"),
                     allow_invalid, upsilon))

    if workers <= 1 or len(jobs) == 1:
        rows = [_sweep_point(j) for j in jobs]
    else:
        with ProcessPoolExecutor(max_workers=workers) as pool:
            rows = list(pool.map(_sweep_point, jobs))

    buf = io.StringIO()
    buf.write(f"# schema: {SWEEP_SCHEMA}\n")
    w = csv.writer(buf, lineterminator="\n")
    fields = ["point", *keys, "status", "Tstar", "final_overflow_fraction",
              "constraints_ok", "immediate_cascade", "error"]
    w.writerow(fields)
    for combo, row in zip(points, rows):
        row.update(zip(keys, combo))
        w.writerow(["" if row[f] is None else (repr(row[f]) if isinstance(row[f], float)
                                               else row[f]) for f in fields])
    (root / "sweep.csv").write_text(buf.getvalue(), encoding="utf-8")
    return rows


def _parser():
    p = argparse.ArgumentParser(prog="wavecascade",
                                description="Isotropic wave-kinetic cascade simulator.")
    p.add_argument("--version", action="version", version=f"%(prog)s {__version__}")
    p.add_argument("-v", "--verbose", action="store_true", help="debug logging")
    sub = p.add_subparsers(dest="command", required=True)

    v = sub.add_parser("validate", help="check the kernel parameter constraints")
    v.add_argument("--config", required=True, type=Path)

    def common(sp):
        sp.add_argument("--config", required=True, type=Path)
        sp.add_argument("--out", type=Path, help="output directory (overrides [output] dir)")
        sp.add_argument("--workers", type=int, default=1)
        sp.add_argument("--allow-invalid", action="store_true",
                        help="run even if the constraints fail")
        sp.add_argument("--upsilon", type=int, help="override the DDM subdomain exponent")

    common(sub.add_parser("run", help="integrate one configuration"))
    sw = sub.add_parser("sweep", help="run a Cartesian product of parameter values")
    common(sw)
    sw.add_argument("--axis", action="append", default=[], metavar="KEY=V1,V2",
                    help="parameter axis, e.g. initial.c_in=0.0005,0.001")

    a = sub.add_parser("analyze", help="recompute diagnostics from a run directory")
    a.add_argument("run_dir", type=Path)
    a.add_argument("--config", type=Path, help="take [diagnostics] overrides from this file")
    a.add_argument("--out", type=Path, help="write report files here")
    a.add_argument("--workers", type=int, default=1)
    a.add_argument("--upsilon", type=int)
    a.add_argument("--lambda", dest="lam", type=float)
    return p


def main(argv=None):
    args = _parser().parse_args(argv)
    logging.basicConfig(level=logging.DEBUG if args.verbose else logging.INFO,
                        format="%(levelname)s %(name)s: %(message)s")
    try:
        if args.command == "validate":
            _, code = cmd_validate(load_config(args.config))
            return code
        if args.command == "run":
            cfg = load_config(args.config, out_dir=args.out, upsilon=args.upsilon)
            code, manifest = cmd_run(cfg, args.out, args.workers, args.allow_invalid)
            ledger = manifest["ledger"]
            print(f"status={manifest['status']} steps={ledger.get('steps')} "
                  f"t={ledger.get('t_final')!r} Tstar={manifest['Tstar']!r} "
                  f"overflow_fraction={ledger.get('final_overflow_fraction')!r}")
            return code
        if args.command == "sweep":
            axes = [parse_axis(s) for s in args.axis]
            rows = cmd_sweep(args.config, axes, args.out, args.workers, args.allow_invalid,
                             args.upsilon)
            failed = sum(r["status"] == "error" for r in rows)
            print(f"{len(rows)} points, {failed} failed")
            return EXIT_OK
        if args.command == "analyze":
            overrides = None
            if args.config is not None:
                try:
                    doc = tomllib.loads(args.config.read_text(encoding="utf-8"))
                except (OSError, tomllib.TOMLDecodeError) as exc:
                    raise ConfigError(str(exc)) from exc
                overrides = doc.get("diagnostics", {})
            report = cmd_analyze(args.run_dir, args.out or args.run_dir / "analysis",
                                 overrides, args.upsilon, args.lam, args.workers)
            print(f"Tstar={report.Tstar!r} lambda={report.lam!r}")
            return EXIT_OK
    except ConfigError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    except DataError as exc:
        print(f"data error: {exc}", file=sys.stderr)
        return EXIT_DATA
    return EXIT_USAGE


if __name__ == "__main__":
    sys.exit(main())
