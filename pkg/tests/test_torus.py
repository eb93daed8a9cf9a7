import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from artifact.torus import (
    FourierField, TorusGrid, band_norms, bump, enforce_parity, lp_block, lp_count,
    parity_defect, random_field, sobolev_norm,
)

G = TorusGrid(32, 32, 1.3)


def test_constant_has_single_zero_mode():
    f = FourierField.from_values(G, np.ones(G.shape))
    c = f.coeffs.copy()
    assert c[0, 0] == pytest.approx(1.0)
    c[0, 0] = 0
    assert np.abs(c).max() < 1e-15


def test_cosine_coefficients():
    f = FourierField.from_function(G, lambda x1, x2: np.cos(x1))
    assert f.coeffs[1, 0] == pytest.approx(0.5)
    assert f.coeffs[-1, 0] == pytest.approx(0.5)
    assert np.abs(f.coeffs).sum() == pytest.approx(1.0)


def test_round_trip_random():
    rng = np.random.default_rng(0)
    v = rng.standard_normal(G.shape)
    back = FourierField.from_values(G, v).values
    assert np.abs(back - v).max() / np.abs(v).max() < 1e-13


def test_size_mismatch():
    with pytest.raises(ValueError):
        FourierField.from_values(G, np.ones(10))


def test_grid_validation():
    with pytest.raises(ValueError):
        TorusGrid(12, 16)
    with pytest.raises(ValueError):
        TorusGrid(16, 16, -1.0)
    g = TorusGrid.line(16)
    assert g.dim == 1 and g.n2 == 1


def test_lattice_frequencies():
    g = TorusGrid(8, 4, 2.0)
    assert sorted(set(g.k1.ravel())) == list(range(-4, 4))
    assert np.allclose(sorted(set(g.xi2.ravel())), np.arange(-2, 2) / 2.0)


def test_derivatives_and_period():
    f = FourierField.from_function(G, lambda x1, x2: np.sin(2 * x1) * np.cos(3 * x2 / G.ell))
    d2 = f.dx2().values
    ref = -np.sin(2 * G.x1) * np.sin(3 * G.x2 / G.ell) * 3 / G.ell
    assert np.abs(d2 - ref).max() < 1e-12


def test_sobolev_constant_and_cosine():
    one = FourierField.constant(G, 1.0)
    for s in (-1.0, 0.0, 2.5):
        assert sobolev_norm(one, s) == pytest.approx(1.0)
    c = FourierField.from_function(G, lambda x1, x2: np.cos(x1))
    assert sobolev_norm(c, 0) == pytest.approx(np.sqrt(0.5), rel=1e-14)
    assert sobolev_norm(c, 1) / sobolev_norm(c, 0) == pytest.approx(np.sqrt(2.0), rel=1e-14)


def test_parseval_quadrature():
    rng = np.random.default_rng(1)
    f = random_field(G, rng, kmax=12)
    quad = np.mean(f.values**2)
    assert sobolev_norm(f, 0) ** 2 == pytest.approx(quad, rel=1e-12)


def test_bump_profile():
    assert bump(1.1) == pytest.approx(1.0, abs=1e-15) and bump(-1.0) == 1.0
    assert bump(1.9) == 0.0 and bump(3.0) == 0.0
    t = np.linspace(1.1, 1.9, 200)
    assert np.all(np.diff(bump(t)) <= 1e-15)


def test_single_frequency_block():
    f = FourierField.from_function(G, lambda x1, x2: np.cos(4 * x1))
    # <xi> = sqrt(17): bump(sqrt(17)/4) = 1 and bump(sqrt(17)/2) = 0
    assert bump(np.sqrt(17) / 4) == 1.0 and bump(np.sqrt(17) / 2) == 0.0
    for k in range(lp_count(G)):
        b = lp_block(f, k)
        if k == 2:
            assert np.abs(b.coeffs - f.coeffs).max() < 1e-15
        else:
            assert b.l2() < 1e-15


def test_zero_blocks():
    z = FourierField.zeros(G)
    assert all(lp_block(z, k).l2() == 0 for k in range(6))


def test_partition_of_unity():
    rng = np.random.default_rng(2)
    f = random_field(G, rng, kmax=40)
    total = sum((lp_block(f, k) for k in range(lp_count(G))), FourierField.zeros(G))
    assert np.abs(total.coeffs - f.coeffs).max() < 1e-12


def test_block_supports():
    br = G.bracket
    rng = np.random.default_rng(3)
    f = random_field(G, rng, kmax=40)
    masks = []
    for k in range(lp_count(G)):
        b = lp_block(f, k)
        nz = np.abs(b.coeffs) > 0
        if k > 0:
            assert np.all(br[nz] > 2.0 ** (k - 1)) and np.all(br[nz] < 2.0 ** (k + 1))
        masks.append(nz)
    for i in range(len(masks)):
        for j in range(i + 2, len(masks)):
            assert not np.any(masks[i] & masks[j])


def test_parity_examples():
    s = FourierField.from_function(G, lambda x1, x2: np.sin(x1))
    assert np.abs(enforce_parity(s, "oe").coeffs - s.coeffs).max() < 1e-16
    assert np.abs(enforce_parity(s, "ee").coeffs).max() < 1e-16
    assert parity_defect(s, ("o", "e")) < 1e-15


@settings(max_examples=25, deadline=None)
@given(seed=st.integers(0, 2**31), p=st.sampled_from(["ee", "oe", "eo", "oo"]))
def test_parity_idempotent_and_commutes(seed, p):
    rng = np.random.default_rng(seed)
    f = random_field(G, rng, kmax=10)
    once = enforce_parity(f, p)
    twice = enforce_parity(once, p)
    assert np.abs(once.coeffs - twice.coeffs).max() < 1e-15
    # projection in physical space: average with reflected samples
    v = f.values
    i1 = (-np.arange(G.n1)) % G.n1
    i2 = (-np.arange(G.n2)) % G.n2
    s1 = 1 if p[0] == "e" else -1
    s2 = 1 if p[1] == "e" else -1
    v = 0.5 * (v + s1 * v[i1, :])
    v = 0.5 * (v + s2 * v[:, i2])
    assert np.abs(once.values - v).max() < 1e-13


def test_dealiased_product_exact_for_low_modes():
    a = FourierField.from_function(G, lambda x1, x2: np.cos(5 * x1) + np.sin(3 * x2 / G.ell))
    b = FourierField.from_function(G, lambda x1, x2: np.cos(4 * x1 + 2 * x2 / G.ell))
    p = a * b
    ref = a.values * b.values
    assert np.abs(p.values - ref).max() < 1e-13


def test_csv_round_trip():
    rng = np.random.default_rng(4)
    f = random_field(TorusGrid(8, 8, 0.7), rng, kmax=3, parity="oe")
    g = FourierField.from_csv(f.to_csv())
    assert g.grid == f.grid and g.parity == "oe"
    assert np.abs(g.coeffs - f.coeffs).max() == 0.0


def test_band_norms_length():
    f = FourierField.from_function(G, lambda x1, x2: np.cos(x1))
    bn = band_norms(f)
    assert bn.shape == (lp_count(G),)
    assert bn.sum() == pytest.approx(f.l2())


def test_scattered_evaluation():
    rng = np.random.default_rng(5)
    f = random_field(G, rng, kmax=8)
    y1 = rng.uniform(0, 7, 30)
    y2 = rng.uniform(-3, 9, 30)
    vals = f.eval_at(y1, y2)
    # exact trigonometric sum
    k1, k2 = G.k1.ravel(), G.xi2.ravel()
    c = f.coeffs.ravel()
    ref = np.array([np.sum(c * np.exp(1j * (k1 * a + k2 * b))) for a, b in zip(y1, y2)])
    assert np.abs(vals - ref).max() < 1e-12
