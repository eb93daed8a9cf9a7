import numpy as np
import pytest

from artifact.dtn import (
    SolverConfig, boundary_coefficients, cheb_matrix, cheb_points, dtn_apply, good_unknown,
    paralin_remainder, solve_flattened, taylor_sign_check,
)
from artifact.symbolcalc import dtn_symbol_expansion
from artifact.torus import FourierField, TorusGrid, parity_defect, random_field

G = TorusGrid(32, 32, 1.0)
CFG = SolverConfig(1.5, 24)


def field(fn, grid=G):
    return FourierField.from_function(grid, fn)


def test_chebyshev_matrix_differentiates_polynomials():
    s = cheb_points(12)
    D = cheb_matrix(12)
    assert np.abs(D @ s**5 - 5 * s**4).max() < 1e-12
    assert np.abs(D @ np.ones(13)).max() < 1e-13


def test_flat_potential_is_exponential():
    psi = field(lambda x1, x2: np.cos(x1))
    pot = solve_flattened(FourierField.zeros(G), psi, SolverConfig(1.5, 32))
    for j, zj in enumerate(pot.z):
        ref = np.exp(zj) * np.cos(G.x1)
        assert np.abs(pot.slice(j).values - ref).max() < 1e-10


def test_zero_datum_gives_zero():
    s = field(lambda x1, x2: 0.1 * np.cos(x1) * np.cos(x2))
    pot = solve_flattened(s, FourierField.zeros(G), CFG)
    assert np.abs(pot.coeffs).max() == 0.0


def test_flat_dtn_is_abs_d():
    z = FourierField.zeros(G)
    for k in (1, 3, 7):
        psi = field(lambda x1, x2: np.cos(k * x1))
        out = dtn_apply(z, psi, CFG)
        assert np.abs(out.values - k * psi.values).max() < 1e-10 * k
    g = TorusGrid(16, 16, 2.0)
    psi = field(lambda x1, x2: np.cos(x2 / 2.0), g)
    out = dtn_apply(FourierField.zeros(g), psi, CFG)
    assert np.abs(out.values - 0.5 * psi.values).max() < 1e-10


def test_self_convergence_in_depth_and_resolution():
    s = field(lambda x1, x2: 0.1 * np.cos(x1))
    psi = field(lambda x1, x2: np.cos(x1))
    a = solve_flattened(s, psi, SolverConfig(1.5, 24)).slice(0)
    b = solve_flattened(s, psi, SolverConfig(3.0, 48)).slice(0)
    assert np.abs(a.values - b.values).max() < 1e-8
    ga = dtn_apply(s, psi, SolverConfig(1.5, 24))
    gb = dtn_apply(s, psi, SolverConfig(3.0, 48))
    assert np.abs(ga.values - gb.values).max() < 1e-8


def test_unblended_map_needs_depth():
    # the plain vertical shift only approximates the bottom condition
    s = field(lambda x1, x2: 0.1 * np.cos(x1) * np.cos(x2))
    psi = field(lambda x1, x2: np.sin(x1) * np.cos(x2))
    ref = dtn_apply(s, psi, SolverConfig(3.0, 48))
    e15 = np.abs(dtn_apply(s, psi, SolverConfig(1.5, 32, blend=False)).values - ref.values).max()
    e4 = np.abs(dtn_apply(s, psi, SolverConfig(4.0, 64, blend=False)).values - ref.values).max()
    assert e15 > 1e-5 and e4 < e15 / 100


def test_trace_has_zero_mean_and_is_linear():
    rng = np.random.default_rng(0)
    s = random_field(G, rng, kmax=5)
    s = s * (0.05 / s.sup())
    p1 = random_field(G, rng, kmax=6)
    p2 = random_field(G, rng, kmax=6)
    p1, p2 = p1 / p1.sup(), p2 / p2.sup()
    g1, g2 = dtn_apply(s, p1, CFG), dtn_apply(s, p2, CFG)
    g12 = dtn_apply(s, 2.0 * p1 - 3.0 * p2, CFG)
    assert abs(g1.mean()) < 1e-8 and abs(g12.mean()) < 1e-8
    assert np.abs(g12.values - 2 * g1.values + 3 * g2.values).max() < 1e-9
    assert g1.is_real()


def test_symmetry_transport():
    rng = np.random.default_rng(1)
    s = random_field(G, rng, kmax=5, parity="ee")
    s = s * (0.05 / s.sup())
    p = random_field(G, rng, kmax=6, parity="oe")
    out = dtn_apply(s, p, CFG)
    assert parity_defect(out, "oe") < 1e-10


def test_first_order_shape_derivative():
    # G(eps s) psi = |D| psi - eps (|D|(s |D| psi) + div(s grad psi)) + O(eps^2)
    s = field(lambda x1, x2: np.cos(x1) * np.cos(x2))
    psi = field(lambda x1, x2: np.sin(2 * x1))
    absd = lambda f: f.with_coeffs(f.coeffs * f.grid.absxi)
    lin = absd(s * absd(psi)) + (s * psi.dx1()).dx1() + (s * psi.dx2()).dx2()
    errs = []
    for eps in (1e-2, 5e-3):
        d = (dtn_apply(s * eps, psi, CFG) - absd(psi)) / eps + lin
        errs.append(np.abs(d.values).max())
    assert errs[1] < 0.6 * errs[0] and errs[1] < 5e-2


def test_dtn_symbol_subprincipal_against_solver():
    # along xi = (0, 1) only lambda^0 changes at O(eps); on cos(k x2) the solver's
    # eps-derivative is -(k sqrt(k^2+1) - k^2) cos x1 cos k x2 = -(1/2 - 1/(8k^2) + ...) cos x1 cos k x2
    g = TorusGrid(64, 64)
    s = field(lambda x1, x2: np.cos(x1), g)
    k = 12
    psi = field(lambda x1, x2: np.cos(k * x2), g)
    absd = lambda f: f.with_coeffs(f.coeffs * f.grid.absxi)
    eps = 1e-4
    dG = (dtn_apply(s * eps, psi, CFG) - dtn_apply(s * -eps, psi, CFG)) / (2 * eps)
    lam = dtn_symbol_expansion(s * eps, 2, 64)
    pred = (lam[1].at(0.0, 1.0).real / eps) * psi.values
    gap = abs(k * np.hypot(k, 1) - k * k - 0.5)
    err = np.abs(dG.values - pred).max()
    assert err < 2 * gap and err > 0.5 * gap
    assert np.abs(absd(psi).values - dtn_apply(FourierField.zeros(g), psi, CFG).values).max() < 1e-10


def test_boundary_coefficients_trivial_state():
    z = FourierField.zeros(G)
    co = boundary_coefficients(z, z, z, 0.7)
    assert co.b.l2() == 0 and np.allclose(co.V1.values, 1.0) and co.V2.l2() == 0
    assert np.allclose(co.taylor.values, 0.7)
    chk = taylor_sign_check(co)
    assert chk.minimum == pytest.approx(0.7) and chk.positive


def test_b_formula_matches_vertical_velocity():
    s = field(lambda x1, x2: 0.1 * np.cos(x1) * np.cos(x2))
    psi = field(lambda x1, x2: np.sin(x1) * np.cos(x2))
    pot = solve_flattened(s, psi, CFG)
    from artifact.dtn import dtn_trace
    Gp = dtn_trace(s, psi, pot)
    co = boundary_coefficients(s, psi, Gp, 1.0)
    assert np.abs(co.b.values - pot.surface_dz().values.real).max() < 1e-10


def test_degenerate_taylor_case():
    s = field(lambda x1, x2: 0.2 * np.cos(x2))
    z = FourierField.zeros(G)
    co = boundary_coefficients(s, z, dtn_apply(s, z, CFG), 0.0)
    chk = taylor_sign_check(co)
    assert abs(chk.minimum) < 1e-14 and not chk.positive


def test_good_unknown_trivial_cases():
    rng = np.random.default_rng(2)
    psi = random_field(G, rng, kmax=6)
    s = random_field(G, rng, kmax=6)
    assert np.abs(good_unknown(s, psi, FourierField.zeros(G)).coeffs - psi.coeffs).max() == 0
    b = random_field(G, rng, kmax=3)
    assert np.abs(good_unknown(FourierField.zeros(G), psi, b).coeffs - psi.coeffs).max() == 0


def test_remainder_vanishes_on_flat_state_at_high_frequency():
    rng = np.random.default_rng(3)
    psi = random_field(G, rng, kmax=12, kmin=2)
    psi = psi / psi.sup()
    rep = paralin_remainder(FourierField.zeros(G), psi, 3, CFG, ndir=32)
    assert max(rep.diagnostics["remainder"][1:]) < 1e-10
    assert "band,remainder" in rep.to_csv()


def test_remainder_quadratic_in_amplitude():
    rng = np.random.default_rng(4)
    s0 = random_field(G, rng, kmax=8, kmin=2, parity="ee", zero_mean=True)
    p0 = random_field(G, rng, kmax=8, kmin=2, parity="oe", zero_mean=True)
    s0, p0 = s0 / s0.sup(), p0 / p0.sup()
    eps = np.array([0.02, 0.04, 0.08])
    r = [paralin_remainder(s0 * e, p0 * e, 3, CFG, ndir=32).remainder.l2() for e in eps]
    assert np.polyfit(np.log(eps), np.log(r), 1)[0] > 1.8


def test_higher_order_symbol_reduces_high_band_remainder():
    g = TorusGrid(64, 64)
    s = field(lambda x1, x2: 1e-3 * np.cos(2 * x1), g)
    psi = field(lambda x1, x2: 1e-3 * np.cos(20 * x2), g)
    r1 = paralin_remainder(s, psi, 1, CFG, ndir=64).remainder.l2()
    r3 = paralin_remainder(s, psi, 3, CFG, ndir=64).remainder.l2()
    assert r3 < 0.05 * r1


def test_solver_config_validation():
    with pytest.raises(ValueError):
        SolverConfig(bottom="sticky")
    with pytest.raises(ValueError):
        SolverConfig(depth=-1)
