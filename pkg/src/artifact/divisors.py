"""Small-divisor condition and the measure of excluded parameters for one-parameter families.

The condition on a lattice point ``(k1, k2)`` reads

    |k2 - nu k1^2 - kappa0 - kappa1 / k1^2| >= k1^(-2-delta).

Doubles decide clear cases; anything within a factor two of the threshold (plus the
rounding error of ``nu k1^2``) is re-evaluated at 40 significant digits with mpmath.
"""

from __future__ import annotations

import json
import math
import re
from dataclasses import dataclass, field
from fractions import Fraction
from typing import Optional, Sequence

import mpmath as mp
import numpy as np

DPS = 40
_SQRT = re.compile(r"^\s*(-?)\s*sqrt\(\s*([0-9.]+)\s*\)\s*$")


def parse_real(x) -> mp.mpf:
    """``x`` as a 40-digit mpf; strings may be decimals, ``p/q`` or ``sqrt(n)``."""
    with mp.workdps(DPS):
        if isinstance(x, mp.mpf):
            return +x
        if isinstance(x, Fraction):
            return mp.mpf(x.numerator) / x.denominator
        if isinstance(x, str):
            m = _SQRT.match(x)
            if m:
                v = mp.sqrt(mp.mpf(m.group(2)))
                return -v if m.group(1) else v
            if "/" in x:
                p, q = x.split("/")
                return mp.mpf(p.strip()) / mp.mpf(q.strip())
            return mp.mpf(x.strip())
        return mp.mpf(float(x))


def _int_and_frac(a: mp.mpf):
    """Integer part and double fractional part of a high-precision number."""
    with mp.workdps(DPS):
        fl = int(mp.floor(a))
        return fl, float(a - fl)


# ----------------------------------------------------------------------
# lattice scan
# ----------------------------------------------------------------------

@dataclass(frozen=True)
class DiophantineQuery:
    nu: object
    kappa0: object = 0.0
    kappa1: object = 0.0
    delta: float = 0.5
    N: int = 2
    k1max: int = 10_000

    def __post_init__(self):
        if not 0 <= self.delta < 1:
            raise ValueError("delta must lie in [0, 1)")
        if self.N < 1 or self.k1max < self.N:
            raise ValueError("need 1 <= N <= k1max")


@dataclass
class DiophantineReport:
    violations: list
    passed: bool
    measure_curve: list = field(default_factory=list)
    fitted_K: float = float("nan")
    fitted_exponent: float = float("nan")
    extra: dict = field(default_factory=dict)

    def to_json(self) -> str:
        return json.dumps({"violations": [list(v) for v in self.violations], "pass": self.passed,
                           "measure_curve": [list(c) for c in self.measure_curve],
                           "fitted_K": self.fitted_K, "fitted_exponent": self.fitted_exponent,
                           "extra": self.extra}, default=float)

    def curve_csv(self) -> str:
        rows = ["r,excluded_fraction,excluded_fraction_upper"]
        up = self.extra.get("upper", [float("nan")] * len(self.measure_curve))
        for (r, f), u in zip(self.measure_curve, up):
            rows.append(f"{r:.17g},{f:.17g},{u:.17g}")
        return "\n".join(rows) + "\n"


def _scan(nu, kappa0, kappa1, exponent: float, N: int, k1max: int, recheck_factor: float = 2.0):
    """Lattice points ``k1 in [N, k1max]`` with ``|k2 - nu k1^2 - kappa0 - kappa1/k1^2| < k1^-exponent``.

    Returns the violations ``(k1, k2, gap)`` and the number of extended-precision rechecks.
    """
    nu_m, k0_m, k1_m = parse_real(nu), parse_real(kappa0), parse_real(kappa1)
    nu_d, k0_d, k1_d = float(nu_m), float(k0_m), float(k1_m)
    k = np.arange(N, k1max + 1, dtype=np.float64)
    y = nu_d * k * k + k0_d + k1_d / (k * k)
    thr = k ** (-exponent)
    err = 8 * np.finfo(float).eps * (abs(nu_d) * k * k + abs(k0_d) + abs(k1_d) + 1.0)
    base = np.floor(y)
    viol = []
    nrecheck = 0
    for off in range(-2, 4):
        k2 = base + off
        gap = np.abs(k2 - y)
        cand = (gap <= 2.0) & (k2 >= 0) & (gap < recheck_factor * thr + err)
        for i in np.nonzero(cand)[0]:
            nrecheck += 1
            kk, kk2 = int(k[i]), int(k2[i])
            with mp.workdps(DPS):
                g = abs(kk2 - nu_m * kk * kk - k0_m - k1_m / (kk * kk))
                t = mp.mpf(kk) ** (-mp.mpf(exponent))
                if g < t:
                    viol.append((kk, kk2, float(g)))
    viol.sort()
    return viol, nrecheck


def scan_condition(q: DiophantineQuery) -> DiophantineReport:
    """Check the condition for every ``k1`` in ``[N, k1max]`` and every ``k2 >= 0``.

    Only ``k2`` within distance 2 of ``nu k1^2 + kappa0 + kappa1/k1^2`` can fail since the
    threshold is below one.
    """
    viol, nre = _scan(q.nu, q.kappa0, q.kappa1, 2.0 + q.delta, q.N, q.k1max)
    return DiophantineReport(viol, not viol, extra={"rechecks": nre, "k1_range": [q.N, q.k1max]})


# ----------------------------------------------------------------------
# one-parameter families
# ----------------------------------------------------------------------

@dataclass(frozen=True)
class PiecewiseLinear:
    """Lipschitz function on ``[0, 1]`` given by knots; must vanish at 0."""

    knots: tuple = (0.0, 1.0)
    values: tuple = (0.0, 0.0)

    def __post_init__(self):
        kn = np.asarray(self.knots, float)
        if kn.size != len(self.values) or kn.size < 2 or np.any(np.diff(kn) <= 0):
            raise ValueError("knots must be increasing and match values")
        if kn[0] != 0.0 or self.values[0] != 0.0:
            raise ValueError("perturbation must vanish at 0")

    @property
    def lipschitz(self) -> float:
        return float(np.abs(np.diff(self.values) / np.diff(self.knots)).max())

    @property
    def is_zero(self) -> bool:
        return not any(self.values)

    def __call__(self, lam):
        return np.interp(lam, self.knots, self.values)


@dataclass(frozen=True)
class FamilyModel:
    """``nu = nu_bar + nu_prime lam + sqrt(lam) phi1(lam)``, ``kappa_j = kappa_j_bar + phi(lam)``, ``lam = eps^2``."""

    nu_bar: object
    nu_prime: float
    kappa0_bar: object = 0.0
    kappa1_bar: object = 0.0
    phi1: PiecewiseLinear = PiecewiseLinear()
    phi2: PiecewiseLinear = PiecewiseLinear()
    phi3: PiecewiseLinear = PiecewiseLinear()
    delta: float = 0.5
    delta_prime: float = 0.25

    def __post_init__(self):
        if self.nu_prime == 0:
            raise ValueError("nu_prime must be non-zero")
        if not 1 > self.delta > self.delta_prime > 0:
            raise ValueError("need 1 > delta > delta_prime > 0")

    @property
    def unperturbed(self) -> bool:
        return self.phi1.is_zero and self.phi2.is_zero and self.phi3.is_zero

    @property
    def predicted_exponent(self) -> float:
        return (self.delta - self.delta_prime) / (3 + self.delta_prime)

    def omega(self, lam, k1):
        lam = np.asarray(lam, float)
        return (self.nu_prime * lam + np.sqrt(lam) * self.phi1(lam)
                + self.phi2(lam) / k1**2 + self.phi3(lam) / k1**4)

    def slope_bound(self, r: float, k1) -> np.ndarray:
        """Lower bound of ``|d omega / d lam|`` on ``[0, r]``; positive means monotone."""
        L1, L2, L3 = self.phi1.lipschitz, self.phi2.lipschitz, self.phi3.lipschitz
        k1 = np.asarray(k1, float)
        return abs(self.nu_prime) - 1.5 * L1 * math.sqrt(r) - L2 / k1**2 - L3 / k1**4


def base_point_check(m: FamilyModel, k1max: int = 4000):
    """Brute-force check of ``|k2 - nu_bar k1^2 - kappa0_bar| >= k1^-(1+delta')``.

    Returns the smallest ``n >= 2`` beyond which no violation was found and the list of
    violations.  Raises when violations reach the upper half of the range, since then no
    threshold ``n`` is supported by the scan.
    """
    viol, _ = _scan(m.nu_bar, m.kappa0_bar, 0.0, 1.0 + m.delta_prime, 1, k1max)
    n = 2 if not viol else max(2, viol[-1][0] + 1)
    if viol and viol[-1][0] > k1max // 2:
        k1, k2, g = viol[-1]
        raise ValueError(f"base point fails the lower bound at k = ({k1}, {k2}), gap {g:.3e}")
    return n, viol


def _level_interval(m: FamilyModel, r: float, k1: int, lo: np.ndarray, hi: np.ndarray):
    """``{lam in [0, r] : lo < omega(lam) < hi}`` for monotone ``omega``; returns endpoints."""
    if m.unperturbed:
        a, b = lo / m.nu_prime, hi / m.nu_prime
        a, b = np.minimum(a, b), np.maximum(a, b)
        return np.clip(a, 0, r), np.clip(b, 0, r)
    sgn = np.sign(m.nu_prime)

    def inv(y):
        # bisection for omega(lam) = y on [0, r], vectorised
        a = np.zeros_like(y)
        b = np.full_like(y, r)
        for _ in range(60):
            c = 0.5 * (a + b)
            up = sgn * (m.omega(c, k1) - y) < 0
            a = np.where(up, c, a)
            b = np.where(up, b, c)
        return 0.5 * (a + b)

    w0, wr = float(m.omega(0.0, k1)), float(m.omega(r, k1))
    wlo, whi = min(w0, wr), max(w0, wr)
    ylo, yhi = np.clip(lo, wlo, whi), np.clip(hi, wlo, whi)
    a, b = inv(ylo), inv(yhi)
    return np.minimum(a, b), np.maximum(a, b)


@dataclass
class KSets:
    """Nonempty exclusion sets for one ``k1``: endpoints in ``lam``."""
    k1: int
    k2: np.ndarray
    a: np.ndarray
    b: np.ndarray
    lengths: np.ndarray


def exclusion_sets(m: FamilyModel, r: float, k1: int) -> KSets:
    """``E(r, k1, k2) = {lam in [0, r] : |d(k1, k2) - omega(lam, k1)| < k1^-(4+delta)}`` for all ``k2``.

    ``d = k2/k1^2 - nu_bar - kappa0_bar/k1^2 - kappa1_bar/k1^4``; its numerator is formed from
    the exact integer part of ``nu_bar k1^2 + kappa0_bar + kappa1_bar/k1^2``.
    """
    t = float(k1) ** (-4.0 - m.delta)
    if m.slope_bound(r, k1) <= 0:
        raise ValueError(f"omega is not certified monotone on [0, {r}] at k1 = {k1}")
    with mp.workdps(DPS):
        A = parse_real(m.nu_bar) * k1 * k1 + parse_real(m.kappa0_bar) + parse_real(m.kappa1_bar) / (k1 * k1)
    fl, fr = _int_and_frac(A)
    w0, wr = float(m.omega(0.0, k1)), float(m.omega(r, k1))
    wlo, whi = min(w0, wr), max(w0, wr)
    kk = float(k1) ** 2
    # d = (j - fr) / k1^2 with j = k2 - fl; need wlo - t < d < whi + t
    jlo = math.floor(fr + kk * (wlo - t))
    jhi = math.ceil(fr + kk * (whi + t))
    j = np.arange(jlo, jhi + 1, dtype=np.float64)
    d = (j - fr) / kk
    a, b = _level_interval(m, r, k1, d - t, d + t)
    L = b - a
    if m.unperturbed:
        # b - a cancels digits once t << r; interior sets have length 2 t / |nu'| exactly
        inner = (a > 0) & (b < r)
        L = np.where(inner, 2 * t / abs(m.nu_prime), L)
    keep = (b > a) & (j + fl >= 0)
    return KSets(k1, (j[keep] + fl).astype(np.int64), a[keep], b[keep], L[keep])


def _union_length(a: np.ndarray, b: np.ndarray, lengths: np.ndarray) -> float:
    """Measure of a union of intervals; isolated intervals contribute their exact length."""
    if a.size == 0:
        return 0.0
    o = np.argsort(a, kind="stable")
    a, b, lengths = a[o], b[o], lengths[o]
    run = np.maximum.accumulate(b)
    starts = np.nonzero(np.r_[True, a[1:] > run[:-1]])[0]
    ends = np.maximum.reduceat(b, starts)
    size = np.diff(np.r_[starts, a.size])
    return float(np.sum(np.where(size == 1, lengths[starts], ends - a[starts])))


def _tail_bound(m: FamilyModel, r: float, cap: int) -> float:
    """Upper bound of the total length of all sets with ``k1 > cap``."""
    d = m.delta
    s = float(m.slope_bound(r, cap + 1))
    span = abs(float(m.omega(r, cap + 1)) - float(m.omega(0.0, cap + 1)))
    # count(k1) <= k1^2 (span + 2 t) + 2 and |E| <= 2 t / s with t = k1^-(4+delta)
    c = cap + 0.0
    return (2.0 / s) * (span * c ** (-1 - d) / (1 + d) + 2 * c ** (-3 - d) / (3 + d)
                        + 2 * c ** (-5 - 2 * d) / (5 + 2 * d))


def _fit_power(x, y):
    x, y = np.asarray(x, float), np.asarray(y, float)
    ok = y > 0
    if ok.sum() < 2:
        return float("nan"), float("nan")
    p, c = np.polyfit(np.log(x[ok]), np.log(y[ok]), 1)
    return float(np.exp(c)), float(p)


def exclusion_measure(m: FamilyModel, r_grid: Sequence[float], samples: int = 2000,
                      N0: Optional[int] = None, k1max_base: int = 4000) -> DiophantineReport:
    """Excluded fraction ``|union_{k1 >= N0, k2} E(r, k1, k2)| / r`` for each ``r``.

    Sets with ``N0 <= k1 <= samples`` are enumerated and merged exactly; the remaining
    ``k1 > samples`` contribute at most ``_tail_bound``, reported as the upper curve.
    ``N0`` defaults to the threshold found by ``base_point_check``.  The fitted ``(K, p)``
    describe ``fraction ~ K r^p``.
    """
    n, base_viol = base_point_check(m, k1max_base)
    N0 = n if N0 is None else max(N0, n)
    if samples < N0:
        raise ValueError("samples must be at least N0")
    curve, upper, flags = [], [], []
    for r in r_grid:
        r = float(r)
        if not 0 < r <= 1:
            raise ValueError("r must lie in (0, 1]")
        ks = range(N0, samples + 1)
        # asymptotic regime: omega bi-Lipschitz with constants |nu'|/2, 2|nu'| and the
        # smallest admissible k1 below the one forced by the lower bound on the base point
        in_regime = bool(m.slope_bound(r, N0) >= 0.5 * abs(m.nu_prime)
                         and (4 * abs(m.nu_prime) * r) ** (-1 / (3 + m.delta_prime)) > N0)
        flags.append(in_regime)
        A, B, W = [], [], []
        for k1 in ks:
            e = exclusion_sets(m, r, k1)
            A.append(e.a)
            B.append(e.b)
            W.append(e.lengths)
        L = _union_length(np.concatenate(A), np.concatenate(B), np.concatenate(W))
        curve.append((r, L / r))
        upper.append((L + _tail_bound(m, r, samples)) / r)
    K, p = _fit_power([c[0] for c in curve], [c[1] for c in curve])
    fr = [c[1] for c in curve]
    order = np.argsort([c[0] for c in curve])[::-1]
    mono = bool(all(fr[order[i + 1]] < fr[order[i]] for i in range(len(order) - 1)))
    ok = bool(p >= m.predicted_exponent - 0.1 and mono) if np.isfinite(p) else False
    extra = {"N0": N0, "base_violations": base_viol, "upper": upper, "in_regime": flags,
             "monotone_decrease": mono, "predicted_exponent": m.predicted_exponent,
             "samples": samples}
    return DiophantineReport([], ok, curve, K, p, extra)


def verify_lemma_claims(m: FamilyModel, r: float, cap: int = 2000, N0: Optional[int] = None,
                        k1max_base: int = 4000) -> dict:
    """Enumerate the nonempty ``E(r, k1, k2)`` for ``N0 <= k1 <= cap`` and test the three claims.

    The fitted constants are compared with the ones that follow from the bounds
    ``|omega| <= |nu'| r`` and ``|omega(l) - omega(l')| >= (|nu'|/2) |l - l'|``:

    * ``A1 = (4 |nu'|)^(-1/(3+delta'))`` (smallest nonempty ``k1``),
    * ``A2 = max(1 + 2 N0^-(2+delta), 4 |nu'|)`` (count per ``k1``),
    * ``A3 = 4 / |nu'|`` (length times ``k1^(4+delta)``).
    """
    n, _ = base_point_check(m, k1max_base)
    N0 = n if N0 is None else max(N0, n)
    nup = abs(m.nu_prime)
    counts, maxlen = {}, {}
    kmin = None
    for k1 in range(N0, cap + 1):
        e = exclusion_sets(m, r, k1)
        if e.k2.size:
            kmin = k1 if kmin is None else kmin
            counts[k1] = int(e.k2.size)
            maxlen[k1] = float(e.lengths.max())
    dp = m.delta_prime
    A1 = (4 * nup) ** (-1 / (3 + dp))
    A2 = max(1 + 2 * N0 ** (-2 - m.delta), 4 * nup)
    A3 = 4 / nup
    A1_fit = kmin * r ** (1 / (3 + dp)) if kmin else float("inf")
    A2_fit = max((c / (r * k * k + 1) for k, c in counts.items()), default=0.0)
    A3_fit = max((v * k ** (4 + m.delta) for k, v in maxlen.items()), default=0.0)
    return {
        "r": r, "N0": N0, "cap": cap, "k1_min_nonempty": kmin,
        "counts": counts, "max_length": maxlen,
        "A1_fit": A1_fit, "A1_bound": A1, "claim1": bool(kmin is None or A1_fit >= A1),
        "A2_fit": A2_fit, "A2_bound": A2, "claim2": bool(A2_fit <= A2),
        "A3_fit": A3_fit, "A3_bound": A3, "claim3": bool(A3_fit <= A3),
    }


def omega_lipschitz_check(m: FamilyModel, r: float, k1: int, samples: int = 200,
                          rng: Optional[np.random.Generator] = None) -> float:
    """Smallest sampled ``|omega(l) - omega(l')| / |l - l'|`` on ``[0, r]``, to compare with ``|nu'|/2``."""
    rng = rng if rng is not None else np.random.default_rng(0)
    l1 = rng.uniform(0, r, samples)
    l2 = rng.uniform(0, r, samples)
    keep = np.abs(l1 - l2) > 1e-3 * r
    q = np.abs(m.omega(l1[keep], k1) - m.omega(l2[keep], k1)) / np.abs(l1[keep] - l2[keep])
    return float(q.min())
