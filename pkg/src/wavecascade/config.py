"""TOML run configuration.

Every section and key, with its default::

    [dispersion]   theta = 0.25, c_omega = 1.0
    [exponents]    varpi1 = -0.375, varpi2 = -0.25, varpi3 = -0.375,
                   kappa2 = 0.25, gamma = 0.25, alpha = 0.8,
                   cP = cR = cQ = cRprime = 1.0
    [couplings]    c12 = c22 = c31 = 1.0
    [collision]    c12 = c22 = c31 = true, include_ro = true
    [grid]         kind = "geometric", omega_min = 1.0, omega_max = 65536.0,
                   n = 128, rep = "" (natural choice for the kind)
    [initial]      kind = "power_law_tail" | "table"
                   power_law_tail: C_in = 1.0, c_in = 0.001, r0 = omega_min,
                   lump_tail = true
                   table: path (snapshot CSV, relative to the config file)
    [step]         method = "heun", dt_init = 1e-3, dt_min = 1e-14,
                   dt_max = 1.0, safety = 0.5, t_end = 1.0,
                   snapshot_stride = 10, growth = 1.5, max_steps = 0 (no cap)
    [diagnostics]  probes = [16, 256, 4096], levels = [4, 8, 12],
                   c_o = 2^(-1-c_in) C_in, sigma = c_in, tol = 0.01,
                   lambda = 1 - 2^-sigma, use_energy = false,
                   epsilon = half its admissible bound, upsilon = none
    [output]       dir = "out"

Frequencies are in the units of the dispersion law; times in the units of
the collision rates.  Unknown sections or keys are rejected.
"""

from __future__ import annotations

import copy
import math
from dataclasses import asdict, dataclass, fields
from pathlib import Path

try:
    import tomllib
except ModuleNotFoundError:  # Python < 3.11
    import tomli as tomllib

from .cascade import Diagnostics
from .collision import Toggles
from .evolve import StepControl
from .exceptions import ConfigError
from .kernelmodel import (CouplingConstants, DispersionLaw, KernelExponents, KernelModel,
                          validate_constraints)
from .spectrum import init_power_law_tail, make_grid, state_from_csv

GRID_DEFAULTS = {"kind": "geometric", "omega_min": 1.0, "omega_max": 65536.0, "n": 128, "rep": ""}
POWER_LAW_DEFAULTS = {"kind": "power_law_tail", "C_in": 1.0, "c_in": 0.001, "r0": None,
                      "lump_tail": True}
STEP_EXTRA = {"max_steps": 0}
DIAG_KEYS = ("probes", "levels", "c_o", "sigma", "tol", "lambda", "use_energy",
             "epsilon", "upsilon")
SECTIONS = ("dispersion", "exponents", "couplings", "collision", "grid", "initial",
            "step", "diagnostics", "output")


def _defaults(cls):
    return {f.name: f.default for f in fields(cls)}


def _merge(section, given, defaults):
    given = dict(given or {})
    unknown = set(given) - set(defaults)
    if unknown:
        raise ConfigError(f"[{section}] unknown keys: {', '.join(sorted(unknown))}")
    out = dict(defaults)
    out.update(given)
    return out


def _build(cls, section, values):
    try:
        return cls(**values)
    except TypeError as exc:
        raise ConfigError(f"[{section}] {exc}") from exc


@dataclass(frozen=True)
class RunConfig:
    model: KernelModel
    toggles: Toggles
    grid: dict
    initial: dict
    step: StepControl
    max_steps: int | None
    diagnostics: Diagnostics
    out_dir: str
    base_dir: str
    raw: dict

    def make_grid(self):
        g = self.grid
        return make_grid(g["kind"], g["omega_min"], g["omega_max"], g["n"], g["rep"] or None)

    def initial_state(self, grid=None):
        grid = grid or self.make_grid()
        ini = self.initial
        if ini["kind"] == "power_law_tail":
            return init_power_law_tail(grid, ini["C_in"], ini["c_in"], ini["r0"], ini["lump_tail"])
        state = state_from_csv(Path(self.base_dir) / ini["path"])
        if not state.grid.same_as(grid):
            raise ConfigError("initial table does not match the [grid] section")
        return state

    @property
    def c_in(self):
        return self.initial.get("c_in", 0.0) if self.initial["kind"] == "power_law_tail" else 0.0

    def constraint_report(self):
        return validate_constraints(self.model, self.c_in, self.diagnostics.sigma)


def from_dict(doc, base_dir=".", out_dir=None, upsilon=None):
    """Normalise a parsed document; the result's ``raw`` has every default filled."""
    doc = copy.deepcopy(doc)
    unknown = set(doc) - set(SECTIONS)
    if unknown:
        raise ConfigError(f"unknown sections: {', '.join(sorted(unknown))}")

    disp = _merge("dispersion", doc.get("dispersion"), _defaults(DispersionLaw))
    expo = _merge("exponents", doc.get("exponents"), _defaults(KernelExponents))
    cpl = _merge("couplings", doc.get("couplings"), _defaults(CouplingConstants))
    col = _merge("collision", doc.get("collision"), _defaults(Toggles))
    grid = _merge("grid", doc.get("grid"), GRID_DEFAULTS)

    ini_in = dict(doc.get("initial") or {})
    kind = ini_in.get("kind", "power_law_tail")
    if kind == "power_law_tail":
        ini = _merge("initial", ini_in, POWER_LAW_DEFAULTS)
        if ini["r0"] is None:
            ini["r0"] = float(grid["omega_min"])
    elif kind == "table":
        ini = _merge("initial", ini_in, {"kind": "table", "path": None})
        if not ini["path"]:
            raise ConfigError("[initial] kind = 'table' needs a path")
    else:
        raise ConfigError(f"[initial] unknown kind {kind!r}")

    step = _merge("step", doc.get("step"), _defaults(StepControl) | STEP_EXTRA)
    model = KernelModel(_build(DispersionLaw, "dispersion", disp),
                        _build(KernelExponents, "exponents", expo),
                        _build(CouplingConstants, "couplings", cpl))

    diag_in = dict(doc.get("diagnostics") or {})
    unknown = set(diag_in) - set(DIAG_KEYS)
    if unknown:
        raise ConfigError(f"[diagnostics] unknown keys: {', '.join(sorted(unknown))}")
    c_in = ini.get("c_in", 0.001)
    C_in = ini.get("C_in", 1.0)
    sigma = float(diag_in.get("sigma", c_in))
    if "epsilon" not in diag_in:
        bound = validate_constraints(model, c_in if kind == "power_law_tail" else 0.0,
                                     sigma).epsilon_upper_bound
        diag_in["epsilon"] = max(0.5 * bound, 0.0)
    if upsilon is not None:
        diag_in["upsilon"] = int(upsilon)
    top = math.log2(grid["omega_max"])
    bottom = math.log2(grid["omega_min"]) if grid["omega_min"] > 0 else -math.inf
    default_levels = [ell for ell in (4, 8, 12) if bottom <= ell <= top]
    diag = {
        "probes": [float(x) for x in diag_in.get("probes", (16.0, 256.0, 4096.0))],
        "levels": [int(x) for x in diag_in.get("levels", default_levels)],
        "c_o": float(diag_in.get("c_o", 2.0 ** (-1.0 - c_in) * C_in)),
        "sigma": sigma,
        "tol": float(diag_in.get("tol", 0.01)),
        "lambda": diag_in.get("lambda"),
        "use_energy": bool(diag_in.get("use_energy", False)),
        "epsilon": float(diag_in["epsilon"]),
        "upsilon": diag_in.get("upsilon"),
    }
    diagnostics = Diagnostics(
        levels=tuple(diag["levels"]), c_o=diag["c_o"], sigma=diag["sigma"], tol=diag["tol"],
        lam=diag["lambda"], use_energy=diag["use_energy"], epsilon=diag["epsilon"],
        upsilon=diag["upsilon"], probes=tuple(diag["probes"]))

    output = _merge("output", doc.get("output"), {"dir": "out"})
    if out_dir is not None:
        output["dir"] = str(out_dir)

    max_steps = int(step.pop("max_steps"))
    control = _build(StepControl, "step", step)
    raw = {
        "dispersion": disp, "exponents": expo, "couplings": cpl, "collision": col,
        "grid": grid, "initial": ini, "step": step | {"max_steps": max_steps},
        "diagnostics": {k: v for k, v in diag.items() if v is not None},
        "output": output,
    }
    return RunConfig(
        model=model,
        toggles=_build(Toggles, "collision", col),
        grid=grid,
        initial=ini,
        step=control,
        max_steps=max_steps or None,
        diagnostics=diagnostics,
        out_dir=output["dir"],
        base_dir=str(base_dir),
        raw=raw,
    )


def load_config(path, out_dir=None, upsilon=None):
    path = Path(path)
    try:
        text = path.read_text(encoding="utf-8")
    except OSError as exc:
        raise ConfigError(f"cannot read config {path}: {exc}") from exc
    try:
        doc = tomllib.loads(text)
    except tomllib.TOMLDecodeError as exc:
        raise ConfigError(f"{path}: {exc}") from exc
    return from_dict(doc, base_dir=path.parent, out_dir=out_dir, upsilon=upsilon)


def set_key(doc, key, value):
    """Set ``section.key`` in a raw document; a bare key must be unambiguous."""
    if "." in key:
        section, name = key.split(".", 1)
    else:
        known = dump_defaults()
        owners = [s for s in SECTIONS
                  if (isinstance(doc.get(s), dict) and key in doc[s]) or key in known[s]]
        if len(owners) != 1:
            raise ConfigError(f"axis key {key!r} is ambiguous or unknown; use section.key")
        section, name = owners[0], key
    if section not in SECTIONS:
        raise ConfigError(f"unknown section in axis key {key!r}")
    doc.setdefault(section, {})[name] = value
    return doc


def dump_defaults():
    """The normalised default document, handy as a template."""
    return from_dict({}).raw


def model_from_raw(raw):
    return KernelModel(DispersionLaw(**raw["dispersion"]), KernelExponents(**raw["exponents"]),
                       CouplingConstants(**raw["couplings"]))


def diagnostics_to_dict(diag):
    d = asdict(diag)
    d["levels"] = list(diag.levels)
    d["probes"] = list(diag.probes)
    return d
