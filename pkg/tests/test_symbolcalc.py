import numpy as np
import pytest

from artifact.maps import Diffeo
from artifact.symbolcalc import (
    HomogeneousComponent, SymbolExpansion, dtn_factorization, dtn_principal,
    dtn_symbol_expansion, sharp_compose, symbol_pullback,
)
from artifact.torus import FourierField, TorusGrid, random_field

G = TorusGrid(32, 32, 1.0)
ND = 64


def cos_surface(eps, grid=G):
    return FourierField.from_function(grid, lambda x1, x2: eps * np.cos(x1))


def test_flat_surface_gives_abs_xi():
    lam = dtn_symbol_expansion(FourierField.zeros(G), 3, ND)
    assert np.abs(lam[0].full() - 1.0).max() < 1e-15
    assert lam[1].max_abs() < 1e-15 and lam[2].max_abs() < 1e-15
    assert [c.degree for c in lam] == [1.0, 0.0, -1.0]


def test_principal_examples():
    for eps in (0.05, 0.3):
        p = dtn_principal(cos_surface(eps), ND)
        assert np.abs(p.at(1.0, 0.0) - 1.0).max() < 1e-14
        ref = np.sqrt(1 + eps**2 * np.sin(G.x1) ** 2)
        assert np.abs(p.at(0.0, 1.0) - ref).max() < 1e-14
        assert np.abs(p.at(0.0, 3.0) - 3 * ref).max() < 1e-13


def test_factorization_identity_and_root_relations():
    s = FourierField.from_function(G, lambda x1, x2: 0.1 * np.cos(x1) * np.cos(x2))
    f = dtn_factorization(s, 3, 256)
    assert np.abs(f.lam[0].full() - dtn_principal(s, 256).full()).max() < 1e-12
    a1, A1 = f.a[0].full(), f.A[0].full()
    b = f.b[:, :, None]
    gx = f.grad_dot.full()
    assert np.abs(a1 * A1 + b).max() < 1e-12
    assert np.abs(a1 + A1 - 2j * b * gx).max() < 1e-12


def test_subprincipal_first_order_oracle():
    # lambda^0 = (Lap sigma - (xi_hat . grad)^2 sigma) / 2 + O(eps^2)
    errs = []
    epss = np.array([0.1, 0.05, 0.025])
    for eps in epss:
        lam = dtn_symbol_expansion(cos_surface(eps), 2, ND)
        errs.append(np.abs(lam[1].at(0.0, 1.0) + 0.5 * eps * np.cos(G.x1)).max())
    slope = np.polyfit(np.log(epss), np.log(errs), 1)[0]
    assert slope > 1.9


def test_reality_and_parity_structure():
    rng = np.random.default_rng(0)
    s = random_field(G, rng, kmax=4, parity="ee") * 0.05
    lam = dtn_symbol_expansion(s, 3, ND)
    # fourth-order spectral derivatives amplify round-off by about kmax^4 in lambda^-1
    assert lam.reality_defect() < 1e-10
    assert lam.parity_defect() < 1e-10
    # a generic surface keeps the reality structure but not the parity invariance
    s = random_field(G, rng, kmax=4) * 0.05
    lam = dtn_symbol_expansion(s, 3, ND)
    assert lam.reality_defect() < 1e-10
    assert lam.parity_defect() > 1e-6


def test_order_validation():
    with pytest.raises(ValueError):
        dtn_symbol_expansion(FourierField.zeros(G), 4)


def test_one_dimensional_expansion():
    g = TorusGrid.line(32)
    s = FourierField.from_function(g, lambda x1, x2: 0.1 * np.cos(x1))
    lam = dtn_symbol_expansion(s, 3)
    assert lam.ndir == 2
    # in one dimension the principal symbol reduces to |xi|
    assert np.abs(lam[0].full() - 1.0).max() < 1e-14
    assert lam.reality_defect() < 1e-14


def test_angle_derivative_of_homogeneous_functions():
    # xi1^2 xi2 has degree 3; its xi derivatives are 2 xi1 xi2 and xi1^2
    a = HomogeneousComponent.multiplier(G, 3, lambda c, s: c * c * s, ND)
    c, s = a.directions
    assert np.abs(a.dxi(0).full() - 2 * c * s).max() < 1e-12
    assert np.abs(a.dxi(1).full() - c * c).max() < 1e-12
    assert a.dxi(0).degree == 2


def test_sharp_of_multipliers_is_product():
    m1 = HomogeneousComponent.multiplier(G, 1, lambda c, s: 1j * c, ND)
    m2 = HomogeneousComponent.multiplier(G, 2, lambda c, s: c * c + 3 * s * s, ND)
    r = sharp_compose(SymbolExpansion((m1,)), SymbolExpansion((m2,)), 3)
    assert np.abs(r[0].full() - (m1 * m2).full()).max() < 1e-15
    assert all(c.max_abs() < 1e-15 for c in r.components[1:])


def test_sharp_with_derivative_on_the_left():
    # (i xi1) # b(x) = i xi1 b + d_x1 b ; b(x) # (i xi1) = b i xi1 exactly
    bf = FourierField.from_function(G, lambda x1, x2: np.sin(x1) * np.cos(2 * x2))
    b = HomogeneousComponent.from_field(bf, ND)
    d = HomogeneousComponent.multiplier(G, 1, lambda c, s: 1j * c, ND)
    r = sharp_compose(SymbolExpansion((d,)), SymbolExpansion((b,)), 2)
    assert np.abs(r[0].full() - (d * b).full()).max() < 1e-15
    assert np.abs(r[1].full()[:, :, 0] - np.cos(G.x1) * np.cos(2 * G.x2)).max() < 1e-13
    r = sharp_compose(SymbolExpansion((b,)), SymbolExpansion((d,)), 2)
    assert np.abs(r[0].full() - (b * d).full()).max() < 1e-15
    assert r[1].max_abs() == 0.0


def test_sharp_abs_xi_squared():
    a = SymbolExpansion((HomogeneousComponent.multiplier(G, 1, lambda c, s: 1.0 + 0 * c, ND),))
    for rho in (1, 2, 3.5):
        r = sharp_compose(a, a, rho)
        assert r.principal_degree == 2
        assert np.abs(r[0].full() - 1.0).max() < 1e-15


def test_expansion_degree_validation():
    a = HomogeneousComponent.multiplier(G, 1, lambda c, s: c, ND)
    b = HomogeneousComponent.multiplier(G, -1, lambda c, s: c, ND)
    with pytest.raises(ValueError):
        SymbolExpansion((a, b))
    e = SymbolExpansion.from_components([a, b])
    assert [c.degree for c in e] == [1, 0, -1]


def test_pullback_identity():
    lam = dtn_symbol_expansion(cos_surface(0.1), 2, ND)
    pb = symbol_pullback(lam, Diffeo.identity(G), 2)
    for c, d in zip(lam, pb):
        assert np.abs(c.full() - d.full()).max() < 1e-13


def test_pullback_linear_map():
    a = SymbolExpansion((HomogeneousComponent.multiplier(G, 1, lambda c, s: 1.0 + 0 * c, ND),))
    L = Diffeo.linear(G, [[1, 1], [0, 1]])
    pb = symbol_pullback(a, L, 2)
    th = pb[0].angles
    assert np.abs(pb[0].full() - np.hypot(np.cos(th), np.cos(th) + np.sin(th))).max() < 1e-14
    assert pb[1].max_abs() < 1e-14


def _bumpy_map(grid=G):
    p1 = FourierField.from_function(grid, lambda x1, x2: 0.2 * np.sin(x1 + x2))
    p2 = FourierField.from_function(grid, lambda x1, x2: 0.15 * np.cos(x1 - 2 * x2))
    return Diffeo(grid, p1, p2)


def test_pullback_of_laplacian_matches_chain_rule():
    # -Lap(u o chi) = ((|t chi' eta|^2 - i Lap chi . eta)(D) u) o chi
    chi = _bumpy_map()
    a = SymbolExpansion((HomogeneousComponent.multiplier(G, 2, lambda c, s: 1.0 + 0 * c, ND),))
    pb = symbol_pullback(a, chi, 2)
    x1, x2 = chi.inverse_points(G.x1, G.x2)
    ev = lambda f: f.eval_at(x1, x2).real[:, :, None]
    th = pb[0].angles
    e1, e2 = np.cos(th), np.sin(th)
    z1 = (1 + ev(chi.p1.dx1())) * e1 + ev(chi.p2.dx1()) * e2
    z2 = ev(chi.p1.dx2()) * e1 + (1 + ev(chi.p2.dx2())) * e2
    assert np.abs(pb[0].full() - (z1**2 + z2**2)).max() < 1e-12
    sub = -1j * (ev(chi.p1.laplacian()) * e1 + ev(chi.p2.laplacian()) * e2)
    assert np.abs(pb[1].full() - sub).max() < 1e-12


def test_pullback_principal_transport():
    # the pulled-back table is not band-limited; 64 points resolve it to round-off
    g = TorusGrid(64, 64)
    s = FourierField.from_function(g, lambda x1, x2: 0.1 * np.cos(x1) * np.cos(x2))
    chi = _bumpy_map(g)
    pb = symbol_pullback(dtn_symbol_expansion(s, 1, ND), chi, 1)
    x1, x2 = chi.inverse_points(g.x1, g.x2)
    ev = lambda f: f.eval_at(x1, x2).real[:, :, None]
    th = pb[0].angles
    e1, e2 = np.cos(th), np.sin(th)
    z1 = (1 + ev(chi.p1.dx1())) * e1 + ev(chi.p2.dx1()) * e2
    z2 = ev(chi.p1.dx2()) * e1 + (1 + ev(chi.p2.dx2())) * e2
    g1, g2 = ev(s.dx1()), ev(s.dx2())
    direct = np.sqrt((1 + g1**2 + g2**2) * (z1**2 + z2**2) - (g1 * z1 + g2 * z2) ** 2)
    assert np.abs(pb[0].full() - direct).max() < 1e-10


def test_pullback_rejects_folding_map():
    p1 = FourierField.from_function(G, lambda x1, x2: 1.5 * np.sin(x1))
    chi = Diffeo(G, p1, FourierField.zeros(G))
    a = SymbolExpansion((HomogeneousComponent.multiplier(G, 1, lambda c, s: 1.0 + 0 * c, ND),))
    with pytest.raises(ValueError):
        symbol_pullback(a, chi, 1)


def test_csv_dump_shape():
    lam = dtn_symbol_expansion(FourierField.zeros(TorusGrid(4, 4)), 1, 8)
    lines = lam.to_csv().strip().splitlines()
    assert lines[0] == "i1,i2,angle_index,degree,re,im"
    assert len(lines) == 1 + 4 * 4 * 8
