import mpmath as mp
import numpy as np
import pytest

from artifact.divisors import (
    DiophantineQuery, FamilyModel, PiecewiseLinear, base_point_check, exclusion_measure,
    _union_length, exclusion_sets, omega_lipschitz_check, parse_real, scan_condition, verify_lemma_claims,
)

SQRT2 = FamilyModel("sqrt(2)", 1.0, delta=0.5, delta_prime=0.25)


def test_parse_real_forms():
    with mp.workdps(40):
        assert abs(parse_real("sqrt(2)") ** 2 - 2) < mp.mpf(10) ** -38
        assert parse_real("3/4") == mp.mpf(3) / 4
        assert parse_real(0.5) == mp.mpf("0.5")


def test_scan_sqrt2_spot_values():
    rep = scan_condition(DiophantineQuery("sqrt(2)", 0, 0, 0.5, 2, 10_000))
    assert rep.passed and rep.violations == []
    # k1 = 2: |6 - 4 sqrt 2| = 0.343 >= 2^-2.5 = 0.177; k1 = 3: |13 - 9 sqrt 2| = 0.272 >= 3^-2.5
    assert abs(6 - 4 * np.sqrt(2)) == pytest.approx(0.3431457505, abs=1e-9)
    assert abs(13 - 9 * np.sqrt(2)) == pytest.approx(0.2720779386, abs=1e-9)


def test_scan_matches_brute_force():
    nu, k0, k1c, delta = "0.7390851332151607", "0.1234", "-0.37", 0.05
    rep = scan_condition(DiophantineQuery(nu, k0, k1c, delta, 1, 400))
    ref = []
    with mp.workdps(40):
        a, b, c = mp.mpf(nu), mp.mpf(k0), mp.mpf(k1c)
        for k1 in range(1, 401):
            y = a * k1 * k1 + b + c / (k1 * k1)
            for k2 in range(max(0, int(mp.floor(y)) - 5), int(mp.floor(y)) + 6):
                if abs(k2 - y) < mp.mpf(k1) ** (-2 - mp.mpf(delta)):
                    ref.append((k1, k2))
    assert [(v[0], v[1]) for v in rep.violations] == ref
    assert len(ref) > 0


def test_rational_resonance():
    rep = scan_condition(DiophantineQuery("2/3", 0, 0, 0.5, 1, 300))
    hits = {v[0] for v in rep.violations if v[2] == 0.0}
    assert hits == set(range(3, 301, 3))


def test_extended_precision_decides_near_threshold():
    k1 = 1000
    with mp.workdps(40):
        nu = mp.sqrt(2)
        thr = mp.mpf(k1) ** mp.mpf(-2.5)
        y = nu * k1 * k1
        k2 = int(mp.floor(y)) + 1
        for sgn, fails in ((+1, False), (-1, True)):
            # shift kappa0 so that the gap is thr (1 +- 1e-12)
            k0 = k2 - y - thr * (1 + sgn * mp.mpf("1e-12"))
            rep = scan_condition(DiophantineQuery("sqrt(2)", mp.nstr(k0, 40), 0, 0.5, k1, k1))
            assert (not rep.passed) == fails
            assert rep.extra["rechecks"] >= 1


def test_kappa1_only_moves_verdicts_near_threshold():
    nu, delta = "0.7390851332151607", 0.02
    a = scan_condition(DiophantineQuery(nu, 0, 0, delta, 1, 2000))
    b = scan_condition(DiophantineQuery(nu, 0, 0.5, delta, 1, 2000))
    va = {v[:2]: v[2] for v in a.violations}
    vb = {v[:2]: v[2] for v in b.violations}
    diff = set(va) ^ set(vb)
    assert diff
    for k1, k2 in diff:
        thr = k1 ** (-2 - delta)
        gap0 = abs(k2 - float(parse_real(nu)) * k1 * k1)
        assert abs(gap0 - thr) <= 0.5 / k1**2 + 1e-9


def test_scan_monotone_in_delta():
    rng = np.random.default_rng(0)
    for _ in range(20):
        nu = rng.uniform(0.3, 3.0)
        k0 = rng.uniform(-1, 1)
        d1, d2 = sorted(rng.uniform(0, 0.99, 2))
        v1 = scan_condition(DiophantineQuery(nu, k0, 0, d1, 2, 500)).violations
        v2 = scan_condition(DiophantineQuery(nu, k0, 0, d2, 2, 500)).violations
        assert {v[:2] for v in v2} <= {v[:2] for v in v1}


def test_query_validation():
    with pytest.raises(ValueError):
        DiophantineQuery(1.0, delta=1.0)
    with pytest.raises(ValueError):
        DiophantineQuery(1.0, N=10, k1max=5)
    with pytest.raises(ValueError):
        FamilyModel(1.0, 0.0)
    with pytest.raises(ValueError):
        FamilyModel(1.0, 1.0, delta=0.2, delta_prime=0.3)
    with pytest.raises(ValueError):
        PiecewiseLinear((0.0, 1.0), (0.1, 0.0))


def test_base_point_threshold_and_failure():
    n, viol = base_point_check(SQRT2, 4000)
    assert n == viol[-1][0] + 1 and n >= 2
    with pytest.raises(ValueError, match=r"k = \("):
        base_point_check(FamilyModel("3/2", 1.0), 400)


def _oracle_union(m, r, k1s):
    """Exclusion sets from 40-digit arithmetic and a plain merge."""
    ivs = []
    with mp.workdps(40):
        nu, npr = parse_real(m.nu_bar), mp.mpf(m.nu_prime)
        for k1 in k1s:
            t = mp.mpf(k1) ** (-4 - mp.mpf(m.delta))
            c = nu * k1 * k1
            for k2 in range(int(mp.floor(c)) - 1, int(mp.ceil(c + r * k1 * k1)) + 2):
                d = (k2 - c) / (k1 * k1)
                a, b = max((d - t) / npr, 0), min((d + t) / npr, r)
                if b > a:
                    ivs.append((a, b))
    ivs.sort()
    total, cs, ce = mp.mpf(0), None, None
    for a, b in ivs:
        if cs is None or a > ce:
            if cs is not None:
                total += ce - cs
            cs, ce = a, b
        else:
            ce = max(ce, b)
    return float(total + (ce - cs if cs is not None else 0))


def test_exclusion_union_matches_high_precision_oracle():
    r = 1e-3
    n, _ = base_point_check(SQRT2)
    ks = range(n, n + 60)
    es = [exclusion_sets(SQRT2, r, k) for k in ks]
    cat = [np.concatenate([getattr(e, f) for e in es]) for f in ("a", "b", "lengths")]
    ours = _union_length(*cat)
    assert ours == pytest.approx(_oracle_union(SQRT2, r, ks), rel=1e-9)
    # d(k1, k2) = d(2 k1, 4 k2): sets of different k1 coincide, so the union is smaller than the sum
    assert ours < cat[2].sum()


@pytest.mark.parametrize("nup", [1.0, 10.0, 100.0])
def test_interval_length_scales_like_inverse_nu_prime(nup):
    m = FamilyModel("sqrt(2)", nup)
    c = verify_lemma_claims(m, 1e-2, cap=400)
    # an interior set has length exactly 2 k1^-(4+delta) / nu'
    assert c["A3_fit"] * nup == pytest.approx(2.0, rel=1e-6)
    assert c["claim3"]


def test_lemma_claims_sqrt2():
    for r in (1e-2, 1e-3, 1e-4):
        c = verify_lemma_claims(SQRT2, r, cap=600)
        assert c["claim1"] and c["claim2"] and c["claim3"]
        assert all(v <= 2 / SQRT2.nu_prime * k ** -4.5 * (1 + 1e-9) for k, v in c["max_length"].items())


def test_exclusion_measure_reports_regime_and_is_stable():
    a = exclusion_measure(SQRT2, [1e-2, 1e-3, 1e-4], samples=400)
    b = exclusion_measure(SQRT2, [1e-2, 1e-3, 1e-4], samples=800)
    assert abs(a.fitted_exponent - b.fitted_exponent) < 0.02
    assert a.extra["in_regime"] == [False, False, False]
    assert all(u >= f for (_, f), u in zip(a.measure_curve, a.extra["upper"]))
    assert "r,excluded_fraction" in a.curve_csv()


def test_perturbed_family_sets_solve_level_equations():
    phi = PiecewiseLinear((0.0, 0.5, 1.0), (0.0, 0.05, -0.02))
    m = FamilyModel("sqrt(2)", 1.0, phi1=phi, phi2=phi, phi3=phi)
    r = 1e-3
    e = exclusion_sets(m, r, 200)
    assert e.k2.size > 0
    with mp.workdps(40):
        c = parse_real(m.nu_bar) * 200 * 200
        d = np.array([float((k2 - c) / 40000) for k2 in e.k2])
    t = 200.0 ** -4.5
    inner = (e.a > 0) & (e.b < r)
    assert np.abs(m.omega(e.a[inner], 200) - (d[inner] - t)).max() < 1e-15
    assert np.abs(m.omega(e.b[inner], 200) - (d[inner] + t)).max() < 1e-15
    assert omega_lipschitz_check(m, r, 200) >= 0.5 * abs(m.nu_prime)


def test_uncertified_monotonicity_raises():
    phi = PiecewiseLinear((0.0, 1.0), (0.0, 5.0))
    m = FamilyModel("sqrt(2)", 1.0, phi1=phi)
    with pytest.raises(ValueError, match="monotone"):
        exclusion_sets(m, 0.5, 100)
