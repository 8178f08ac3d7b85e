import math
from dataclasses import replace

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st
from hypothesis.extra.numpy import arrays

from conftest import random_state, small_grids
from oracle import RawKernels, nodal_rates, weak_form
from wavecascade.collision import OPERATORS, Toggles, apply, build_tables, weak_eval
from wavecascade.collision._kernels import BEYOND
from wavecascade.exceptions import ConfigError, StateError
from wavecascade.kernelmodel import CouplingConstants, remark_model
from wavecascade.spectrum import FrequencyGrid, SpectralState, make_grid, zero_state

ONLY = {op: Toggles(**{o: o == op for o in OPERATORS}) for op in OPERATORS}


def node_vector(res):
    return np.concatenate(([res.condensate_rate], res.dm, [res.overflow_mass_rate]))


class TestTables:
    def test_split_examples(self, model):
        g = make_grid("uniform", 0, 10, 5)
        t = build_tables(g, model)
        assert t.split(5.0) == (3, 1.0)          # node 3 is cell 2 (rep 5)
        assert t.split(4.0) == (2, 0.5)          # midway between reps 3 and 5
        node, lam = t.split(1.0 + 1.0)           # pair (1, 1) -> 2
        assert (node - 1, lam) == (0, 0.5)       # cells 0 and 1 share it equally
        assert t.split(0.25) == (0, 0.75)        # condensate and cell 0
        assert t.split(9.5)[0] == g.n            # last cell and the overflow node
        assert t.split(10.5)[0] == BEYOND

    def test_split_preserves_first_moment(self, model):
        g = make_grid("geometric", 1, 100, 7)
        t = build_tables(g, model)
        for x in np.linspace(0.01, 99.99, 301):
            k, lam = t.split(x)
            assert 0 <= lam <= 1
            hi = t.ext[k + 1] if lam < 1 else 0.0
            assert lam * t.ext[k] + (1 - lam) * hi == pytest.approx(x, rel=1e-14)

    def test_cached_factors(self, model):
        g = make_grid("geometric", 1, 64, 6)
        t = build_tables(g, model)
        np.testing.assert_array_equal(t.bP, model.bar_P(g.reps))
        np.testing.assert_array_equal(t.kk, model.k_of_omega(g.reps))
        assert not t.bP.flags.writeable

    def test_invalid_model(self):
        m = remark_model()
        bad = replace(m, exponents=replace(m.exponents, varpi1=0.0))
        g = make_grid("uniform", 0, 10, 5)
        with pytest.raises(ConfigError, match="3θ\\+2ϖ₁"):
            build_tables(g, bad)
        build_tables(g, bad, allow_invalid=True)

    def test_wrong_grid(self, model):
        t = build_tables(make_grid("uniform", 0, 10, 5), model)
        with pytest.raises(StateError):
            apply(zero_state(make_grid("uniform", 0, 10, 6)), t)


class TestApplyExamples:
    def test_zero_state(self, model):
        g = make_grid("geometric", 1, 64, 6)
        res = apply(zero_state(g), build_tables(g, model))
        assert not np.any(res.dm) and res.overflow_mass_rate == 0 and res.gross_flux == 0

    def test_single_cell_c22(self, model):
        g = make_grid("uniform", 0, 10, 5)
        t = build_tables(g, model, ONLY["c22"])
        res = apply(SpectralState(g, [0, 0, 1.5, 0, 0]), t)
        assert np.all(res.dm == 0.0)
        assert res.gross_flux > 0

    def test_two_cells_c12_by_hand(self, model):
        # reps 1 and 2, omega_max 2.5; P(w) = w^(3/8) / 4, barP(w) = w^(5/8)
        g = FrequencyGrid(np.array([0.5, 1.5, 2.5]), np.array([1.0, 2.0]), "custom")
        t = build_tables(g, model, ONLY["c12"])
        res = apply(SpectralState(g, [1.0, 1.0]), t)

        def P(w):
            return 0.25 * w ** 0.375

        bP2 = 2.0 ** 0.625
        r11, r12, r22 = P(2.0), bP2 * P(3.0), bP2 * bP2 * P(4.0)
        rb = 2.0 * bP2 * P(1.0)
        dm0 = -2 * r11 - 2 * r12 + 2 * rb
        dm1 = r11 - 2 * r12 - 2 * r22 - rb
        np.testing.assert_allclose(res.dm, [dm0, dm1], rtol=1e-13)
        assert res.overflow_mass_rate == pytest.approx(2 * r12 + r22, rel=1e-13)
        assert res.overflow_energy_rate == pytest.approx(6 * r12 + 4 * r22, rel=1e-13)
        assert res.condensate_rate == 0.0

    def test_toggles(self, model, rng):
        g = make_grid("geometric", 1, 64, 6)
        s = random_state(rng, g)
        full = apply(s, build_tables(g, model))
        part = apply(s, build_tables(g, model, Toggles(c22=False)))
        assert not np.any(part.by_operator["c22"].dm)
        np.testing.assert_array_equal(part.by_operator["c31"].dm, full.by_operator["c31"].dm)

    def test_zero_coupling_skips_operator(self, rng):
        m = remark_model(couplings=CouplingConstants(1.0, 0.0, 0.0))
        g = make_grid("geometric", 1, 64, 6)
        res = apply(random_state(rng, g), build_tables(g, m))
        assert res.by_operator["c22"].gross_flux == 0.0 == res.by_operator["c31"].gross_flux


@pytest.mark.parametrize("grid", small_grids(), ids=lambda g: f"{g.kind}{g.n}")
@pytest.mark.parametrize("include_ro", [True, False])
def test_matches_oracle(model, rng, grid, include_ro):
    tables = build_tables(grid, model, Toggles(include_ro=include_ro))
    kern = RawKernels.from_model(model, include_ro)
    for _ in range(3):
        s = random_state(rng, grid)
        res = apply(s, tables)
        rates, energy = nodal_rates(grid.reps, s.masses, grid.omega_max, kern)
        for op in OPERATORS:
            got = res.by_operator[op]
            exp = rates[op]
            scale = np.max(np.abs(exp))
            assert np.max(np.abs(node_vector(got) - exp)) <= 1e-12 * scale
            assert got.overflow_energy_rate == pytest.approx(energy[op], rel=1e-12, abs=1e-300)


masses6 = arrays(float, 6, elements=st.one_of(st.just(0.0), st.floats(1e-6, 1e3)))


@given(masses6)
def test_energy_ledger_closes(m):
    g = make_grid("geometric", 1, 64, 6)
    res = apply(SpectralState(g, m), build_tables(g, remark_model()))
    assert abs(res.energy_residual) <= 1e-12 * max(res.gross_flux, 1e-300)
    for op in OPERATORS:
        r = res.by_operator[op]
        assert abs(r.energy_residual) <= 1e-12 * max(r.gross_flux, 1e-300)


@given(masses6)
def test_sign_structure(m):
    g = make_grid("uniform", 0.5, 12.5, 6)
    s = SpectralState(g, m)
    t = build_tables(g, remark_model())
    _, parts = weak_eval(s, t, np.ones_like, by_operator=True)
    gross = apply(s, t).gross_flux
    assert parts["c12"] <= 0.0 and parts["c31"] <= 0.0
    assert abs(parts["c22"]) <= 1e-12 * max(gross, 1e-300)


@given(masses6, st.integers(0, 5))
@settings(max_examples=60)
def test_convex_functional_grows(m, k):
    g = make_grid("geometric", 1, 64, 6)
    s = SpectralState(g, m)
    t = build_tables(g, remark_model())
    R = float(g.reps[k])
    res = apply(s, t)
    tol = 1e-12 * max(res.gross_flux, 1e-300)
    exact = weak_eval(s, t, lambda w: np.maximum(w - R, 0.0))
    assert exact >= -tol
    # discrete: cells, plus overflow energy and mass at exact energies
    disc = math.fsum(np.maximum(g.reps - R, 0.0) * res.dm) + (
        res.overflow_energy_rate - R * res.overflow_mass_rate)
    assert disc >= -tol
    assert disc >= exact - tol


def test_weak_eval_linear_test_function(model, rng):
    g = make_grid("uniform", 0, 20, 8)
    t = build_tables(g, model)
    s = random_state(rng, g)
    res = apply(s, t)
    assert abs(weak_eval(s, t, lambda w: w)) <= 1e-12 * res.gross_flux
    assert abs(res.energy_residual) <= 1e-12 * res.gross_flux


def test_weak_eval_matches_oracle(model, rng):
    g = make_grid("geometric", 1, 50, 5)
    t = build_tables(g, model)
    kern = RawKernels.from_model(model)
    s = random_state(rng, g, zero_frac=0.0)

    def Xi(w):
        return np.sqrt(np.asarray(w, dtype=float)) + 0.1 * np.asarray(w) ** 2

    total, parts = weak_eval(s, t, Xi, by_operator=True)
    ref = weak_form(g.reps, s.masses, kern, lambda w: float(Xi(w)))
    for op in OPERATORS:
        assert parts[op] == pytest.approx(ref[op], rel=1e-12)


def test_worker_count_bit_identical(model, rng):
    g = make_grid("geometric", 1, 1e4, 40)
    t = build_tables(g, model)
    s = random_state(rng, g)
    base = apply(s, t, workers=1)
    for w in (2, 3, 8, 64):
        other = apply(s, t, workers=w)
        assert np.array_equal(other.dm, base.dm)
        assert np.array_equal(other.loss, base.loss)
        assert other.overflow_energy_rate == base.overflow_energy_rate
        assert other.gross_flux == base.gross_flux


def test_loss_dominates_outflow(model, rng):
    g = make_grid("geometric", 1, 64, 6)
    res = apply(random_state(rng, g), build_tables(g, model))
    assert np.all(res.loss >= 0)
    assert np.all(res.dm >= -res.loss * (1 + 1e-12))
