"""Dispersion law, collision kernel family and parameter validation.

All kernel factors are exact power laws:

    omega(k)   = C_omega |k|^(1/theta)
    Gamma(w)   = |k|^2 / omega'(|k|) = theta C_omega^(-3 theta) w^(3 theta - 1)
    barP(w)    = C_P w^(1 + varpi1),   P(w) = Gamma(w) barP(w)
    barQ(w)    = C_Q w^(1 + varpi3),   Q(w) = Gamma(w) barQ(w)
    barR(w)    = C_R w^(1 + varpi2),   R(w) = Gamma(w) barR(w) / |k|(w)
    Ro(w, ...) = max(w, w1, w2, w3)^gamma

The spectral state evolves the measure ``F = Gamma f`` in the frequency
variable; mass reported anywhere in this package is ``int F dw``.  The
physical particle number is ``2 pi^2`` times that (``MASS_CONVERSION``).
"""

from __future__ import annotations

import math
from dataclasses import asdict, dataclass, field

import numpy as np

from .exceptions import ConfigError, DomainError

MASS_CONVERSION = 2.0 * math.pi ** 2


def _check_nonneg(x, name):
    arr = np.asarray(x, dtype=float)
    if np.any(np.isnan(arr)) or np.any(arr < 0):
        raise DomainError(f"{name} must be non-negative, got {x!r}")
    return arr


def _ret(arr):
    return float(arr) if np.ndim(arr) == 0 else arr


def _power(arr, coef, expo):
    """coef * arr**expo with the convention 0 -> 0 for positive exponents."""
    with np.errstate(divide="ignore", invalid="ignore"):
        out = coef * np.power(arr, expo)
    if expo > 0:
        out = np.where(arr == 0, 0.0, out)
    return out


@dataclass(frozen=True)
class DispersionLaw:
    theta: float = 0.25
    c_omega: float = 1.0

    def __post_init__(self):
        if not 0.0 < self.theta < 1.0:
            raise ConfigError(f"theta must lie in (0, 1), got {self.theta}")
        if not self.c_omega > 0.0:
            raise ConfigError(f"c_omega must be positive, got {self.c_omega}")

    def omega_of_k(self, k_mag):
        k = _check_nonneg(k_mag, "k_mag")
        return _ret(self.c_omega * np.power(k, 1.0 / self.theta))

    def k_of_omega(self, omega):
        w = _check_nonneg(omega, "omega")
        return _ret(np.power(w / self.c_omega, self.theta))

    def gamma_weight(self, omega):
        w = np.asarray(omega, dtype=float)
        if np.any(np.isnan(w)) or np.any(w <= 0):
            raise DomainError(f"Gamma is only evaluated at omega > 0, got {omega!r}")
        th = self.theta
        return _ret(th * self.c_omega ** (-3.0 * th) * np.power(w, 3.0 * th - 1.0))


@dataclass(frozen=True)
class KernelExponents:
    """Kernel exponents and amplitudes.

    ``kappa2`` enters only the constraint and threshold arithmetic; it is
    not derived from the power-law R (see ``KernelModel.R_derivative_exponent``).
    """

    varpi1: float = -0.375
    varpi2: float = -0.25
    varpi3: float = -0.375
    kappa2: float = 0.25
    gamma: float = 0.25
    alpha: float = 0.8
    cP: float = 1.0
    cR: float = 1.0
    cQ: float = 1.0
    cRprime: float = 1.0

    def range_errors(self):
        errs = []
        for name in ("varpi1", "varpi2", "varpi3"):
            v = getattr(self, name)
            if not -1.0 <= v <= 0.0:
                errs.append(f"{name}={v} outside [-1, 0]")
        if not self.kappa2 >= -1.0:
            errs.append(f"kappa2={self.kappa2} below -1")
        if not 0.0 <= self.gamma <= 1.0:
            errs.append(f"gamma={self.gamma} outside [0, 1]")
        if not 0.0 < self.alpha < 1.0:
            errs.append(f"alpha={self.alpha} outside (0, 1)")
        for name in ("cP", "cR", "cQ", "cRprime"):
            if not getattr(self, name) > 0.0:
                errs.append(f"{name} must be positive")
        return errs


@dataclass(frozen=True)
class CouplingConstants:
    c12: float = 1.0
    c22: float = 1.0
    c31: float = 1.0

    def __post_init__(self):
        if min(self.c12, self.c22, self.c31) < 0:
            raise ConfigError("coupling constants must be non-negative")
        if self.c12 + self.c22 + self.c31 <= 0:
            raise ConfigError("at least one coupling constant must be positive")


@dataclass(frozen=True)
class KernelModel:
    dispersion: DispersionLaw = field(default_factory=DispersionLaw)
    exponents: KernelExponents = field(default_factory=KernelExponents)
    couplings: CouplingConstants = field(default_factory=CouplingConstants)

    # -- dispersion passthroughs
    @property
    def theta(self):
        return self.dispersion.theta

    def omega_of_k(self, k_mag):
        return self.dispersion.omega_of_k(k_mag)

    def k_of_omega(self, omega):
        return self.dispersion.k_of_omega(omega)

    def gamma_weight(self, omega):
        return self.dispersion.gamma_weight(omega)

    # -- closed-form coefficients: weight(w) = coef * w**expo
    @property
    def _gamma_coef(self):
        th = self.theta
        return th * self.dispersion.c_omega ** (-3.0 * th)

    @property
    def P_coef_expo(self):
        e = self.exponents
        return self._gamma_coef * e.cP, 3.0 * self.theta + e.varpi1

    @property
    def Q_coef_expo(self):
        e = self.exponents
        return self._gamma_coef * e.cQ, 3.0 * self.theta + e.varpi3

    @property
    def R_coef_expo(self):
        e, th = self.exponents, self.theta
        coef = self._gamma_coef * e.cR * self.dispersion.c_omega ** th
        return coef, 2.0 * th + e.varpi2

    @property
    def R_derivative_exponent(self):
        """Exponent of dR/dw for the power-law R (compare with ``kappa2``)."""
        return self.R_coef_expo[1] - 1.0

    # -- bar weights
    def bar_P(self, omega):
        w = _check_nonneg(omega, "omega")
        return _ret(_power(w, self.exponents.cP, 1.0 + self.exponents.varpi1))

    def bar_Q(self, omega):
        w = _check_nonneg(omega, "omega")
        return _ret(_power(w, self.exponents.cQ, 1.0 + self.exponents.varpi3))

    def bar_R(self, omega):
        w = _check_nonneg(omega, "omega")
        return _ret(_power(w, self.exponents.cR, 1.0 + self.exponents.varpi2))

    # -- full weights
    def weight_P(self, omega):
        w = _check_nonneg(omega, "omega")
        return _ret(_power(w, *self.P_coef_expo))

    def weight_Q(self, omega):
        w = _check_nonneg(omega, "omega")
        return _ret(_power(w, *self.Q_coef_expo))

    def weight_R(self, omega):
        w = _check_nonneg(omega, "omega")
        return _ret(_power(w, *self.R_coef_expo))

    def weight_Ro(self, w, w1, w2, w3):
        m = np.maximum(np.maximum(_check_nonneg(w, "w"), _check_nonneg(w1, "w1")),
                       np.maximum(_check_nonneg(w2, "w2"), _check_nonneg(w3, "w3")))
        return _ret(_power(m, 1.0, self.exponents.gamma))

    def identity(self):
        """Hashable fingerprint used to tie collision tables to one model."""
        return tuple(tuple(sorted(d.items())) for d in self.to_dict().values())

    def to_dict(self):
        return {
            "dispersion": asdict(self.dispersion),
            "exponents": asdict(self.exponents),
            "couplings": asdict(self.couplings),
        }


def remark_model(alpha=0.8, couplings=None):
    """The worked example for omega = |k|^4 with unit amplitudes."""
    return KernelModel(
        DispersionLaw(theta=0.25, c_omega=1.0),
        KernelExponents(varpi1=-0.375, varpi2=-0.25, varpi3=-0.375,
                        kappa2=0.25, gamma=0.25, alpha=alpha),
        couplings or CouplingConstants(),
    )


# ---------------------------------------------------------------------------
# constraint validation

@dataclass(frozen=True)
class ConstraintRecord:
    name: str
    key: str
    lhs: float
    relation: str  # "> 0", ">= 0", "<= 0"
    satisfied: bool
    slack: float


@dataclass(frozen=True)
class ConstraintReport:
    records: tuple
    positivity: tuple
    range_errors: tuple
    c_in: float
    cin_threshold_immediate: float
    cin_threshold_finite: float
    sigma_upper_bound: float
    epsilon_upper_bound: float
    sigma: float
    kappa2: float
    R_derivative_exponent: float

    @property
    def all_satisfied(self):
        return (all(r.satisfied for r in self.records)
                and all(r.satisfied for r in self.positivity)
                and not self.range_errors)

    @property
    def failed(self):
        return [r.name for r in (*self.records, *self.positivity) if not r.satisfied]

    @property
    def immediate_cascade(self):
        return 0.0 < self.c_in < self.cin_threshold_immediate

    @property
    def finite_cascade(self):
        return 0.0 < self.c_in < self.cin_threshold_finite

    def to_dict(self):
        return {
            "records": [asdict(r) for r in self.records],
            "positivity": [asdict(r) for r in self.positivity],
            "range_errors": list(self.range_errors),
            "all_satisfied": self.all_satisfied,
            "c_in": self.c_in,
            "cin_threshold_immediate": self.cin_threshold_immediate,
            "cin_threshold_finite": self.cin_threshold_finite,
            "immediate_cascade": self.immediate_cascade,
            "finite_cascade": self.finite_cascade,
            "sigma_upper_bound": self.sigma_upper_bound,
            "epsilon_upper_bound": self.epsilon_upper_bound,
            "sigma": self.sigma,
            "kappa2": self.kappa2,
            "R_derivative_exponent": self.R_derivative_exponent,
        }

    def format_table(self):
        lines = [f"{'constraint':<22} {'lhs':>12} {'slack':>12}  status"]
        for r in (*self.records, *self.positivity):
            lines.append(f"{r.name:<22} {r.lhs:>12.6g} {r.slack:>12.6g}  "
                         f"{'ok' if r.satisfied else 'FAIL'}")
        for e in self.range_errors:
            lines.append(f"range: {e}  FAIL")
        lines.append("")
        lines.append(f"c_in                       = {self.c_in:.6g}")
        lines.append(f"immediate-cascade bound    = {self.cin_threshold_immediate:.6g}"
                     f"  ({'met' if self.immediate_cascade else 'not met'})")
        lines.append(f"finite-time-cascade bound  = {self.cin_threshold_finite:.6g}"
                     f"  ({'met' if self.finite_cascade else 'not met'})")
        lines.append(f"sigma admissible below     = {self.sigma_upper_bound:.6g}")
        lines.append(f"epsilon admissible below   = {self.epsilon_upper_bound:.6g}"
                     f" (at sigma = {self.sigma:.6g})")
        lines.append(f"kappa2 = {self.kappa2:.6g}; power-law dR/dw exponent = "
                     f"{self.R_derivative_exponent:.6g}")
        return "\n".join(lines)


def _record(name, key, lhs, relation):
    if relation == "> 0":
        ok = lhs > 0
    elif relation == ">= 0":
        ok = lhs >= 0
    else:
        ok = lhs <= 0
    slack = 0.0 - lhs if relation == "<= 0" else lhs
    return ConstraintRecord(name, key, float(lhs), relation, bool(ok), float(slack))


def validate_constraints(model, c_in, sigma=0.0):
    """Evaluate the nine parameter inequalities and the cascade thresholds.

    ``epsilon_upper_bound`` is the admissible epsilon for the given
    ``sigma`` (the tightest of its three defining inequalities).  Failures
    are reported, never raised.
    """
    th = model.theta
    e = model.exponents
    w1, w2, w3, k2, g, a = e.varpi1, e.varpi2, e.varpi3, e.kappa2, e.gamma, e.alpha

    records = (
        _record("4ϖ₃+3θ+α > 0", "c1", 4 * w3 + 3 * th + a, "> 0"),
        _record("3ϖ₁+3θ+α > 0", "c2", 3 * w1 + 3 * th + a, "> 0"),
        _record("4ϖ₂+α+γ > 0", "c3", 4 * w2 + a + g, "> 0"),
        _record("3ϖ₂+2-2θ > 0", "c4", 3 * w2 + 2 - 2 * th, "> 0"),
        _record("γ+κ₂ ≥ 0", "c5", g + k2, ">= 0"),
        _record("3θ+2ϖ₁ ≤ 0", "c6", 3 * th + 2 * w1, "<= 0"),
        _record("2θ+2ϖ₂ ≤ 0", "c7", 2 * th + 2 * w2, "<= 0"),
        _record("3θ+2ϖ₃ ≤ 0", "c8", 3 * th + 2 * w3, "<= 0"),
        _record("2ϖ₂+θ+γ ≥ 0", "c9", 2 * w2 + th + g, ">= 0"),
    )
    positivity = (
        _record("3θ+ϖ₁ > 0", "p1", 3 * th + w1, "> 0"),
        _record("2θ+ϖ₂ > 0", "p2", 2 * th + w2, "> 0"),
        _record("3θ+ϖ₃ > 0", "p3", 3 * th + w3, "> 0"),
    )

    finite = 3 * w2 + 2 - 2 * th + k2 + g
    brackets = (
        (4 * w3 + 3 * th + a) / 3.0,
        (3 * w1 + 3 * th + a) / 2.0,
        (4 * w2 + a + g) / 6.0,
        finite - c_in,
    )
    immediate = min(brackets) / 5.0
    eps_bound = min(3 * th + 3 * w1 + 1, finite - c_in, 3 * th + 4 * w3 + 1) / 10.0 - sigma

    return ConstraintReport(
        records=records,
        positivity=positivity,
        range_errors=tuple(e.range_errors()),
        c_in=float(c_in),
        cin_threshold_immediate=float(immediate),
        cin_threshold_finite=float(finite),
        sigma_upper_bound=float(immediate),
        epsilon_upper_bound=float(eps_bound),
        sigma=float(sigma),
        kappa2=float(k2),
        R_derivative_exponent=float(model.R_derivative_exponent),
    )
