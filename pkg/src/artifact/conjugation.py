"""Change of variables, paracomposition, symbol decomposition and the coefficient cascade.

Conventions
-----------
Fields are complex arrays of grid samples ``(n1, n2)`` unless typed as
``FourierField``.  ``x1`` has period ``2 pi`` and ``x2`` period ``2 pi ell``.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from math import factorial
from typing import Optional, Sequence

import numpy as np
from scipy import fft as sfft

from .maps import Diffeo
from .symbolcalc import HomogeneousComponent, SymbolExpansion, dtn_principal
from .torus import FourierField, TorusGrid, evaluate_at, lp_block, lp_count


class TransversalityLost(ValueError):
    """``V1`` vanishes somewhere, so the transport equation is not an evolution in ``x1``."""


# ----------------------------------------------------------------------
# spectral helpers on sample arrays
# ----------------------------------------------------------------------

def _k(grid: TorusGrid, axis: int) -> np.ndarray:
    n = grid.n1 if axis == 0 else grid.n2
    k = np.fft.fftfreq(n) * n
    if axis == 1:
        k = k / grid.ell
    return k


def _deriv(f: np.ndarray, grid: TorusGrid, axis: int, order: int = 1) -> np.ndarray:
    if order == 0:
        return f
    k = _k(grid, axis)
    n = f.shape[axis]
    sym = (1j * k) ** order
    if order % 2:
        sym[n // 2] = 0.0
    shape = [1, 1]
    shape[axis] = n
    return sfft.ifft(sfft.fft(f, axis=axis) * sym.reshape(shape), axis=axis)


def _mean(f: np.ndarray, axis: int) -> np.ndarray:
    return f.mean(axis=axis, keepdims=True)


def _primitive(f: np.ndarray, grid: TorusGrid, axis: int, from_zero: bool = True):
    """Periodic primitive of a field with zero mean along ``axis``; vanishes at 0 when ``from_zero``.

    Returns the primitive and the largest mean along ``axis`` that was discarded.
    """
    m = _mean(f, axis)
    k = _k(grid, axis)
    n = f.shape[axis]
    with np.errstate(divide="ignore", invalid="ignore"):
        sym = np.where(k != 0, 1.0 / (1j * np.where(k != 0, k, 1.0)), 0.0)
    sym[n // 2] = 0.0
    shape = [1, 1]
    shape[axis] = n
    F = sfft.ifft(sfft.fft(f - m, axis=axis) * sym.reshape(shape), axis=axis)
    if from_zero:
        F = F - np.take(F, [0], axis=axis)
    return F, float(np.abs(m).max())


def _field(grid: TorusGrid, v: np.ndarray) -> FourierField:
    return FourierField.from_values(grid, v)


# ----------------------------------------------------------------------
# transport diffeomorphism and nu
# ----------------------------------------------------------------------

@dataclass(frozen=True, eq=False)
class DiffeoPack:
    """The two changes of variables and their data.

    ``d = x2 + dper`` solves ``V . grad d = 0`` with ``d(0, x2) = x2``; ``w = d_x2 d``.
    The second map is ``(x1 + dtilde(x), x2 + etilde(x2))``.
    """

    grid: TorusGrid
    dper: FourierField
    w: np.ndarray
    periodicity_defect: float
    mass_defect: float
    transport_residual: float
    nu: Optional[float] = None
    dtilde: Optional[FourierField] = None
    etilde: Optional[FourierField] = None
    gamma: Optional[FourierField] = None
    Gamma: Optional[np.ndarray] = None
    gamma_form: str = "derived"

    @property
    def d(self) -> np.ndarray:
        return self.grid.x2 + self.dper.values.real

    def chi1(self) -> Diffeo:
        return Diffeo(self.grid, FourierField.zeros(self.grid), self.dper)

    def chi2(self) -> Diffeo:
        if self.nu is None:
            raise ValueError("second diffeomorphism not computed yet")
        return Diffeo(self.grid, self.dtilde, self.etilde)

    def chi(self) -> Diffeo:
        """Composite ``chi2 o chi1``."""
        g = self.grid
        y1, y2 = self.chi1().on_grid()
        z1, z2 = self.chi2()(y1, y2)
        return Diffeo(g, _field(g, z1 - g.x1), _field(g, z2 - g.x2))

    def jacobians(self):
        """First and second derivatives of the composite map on the grid."""
        c = self.chi()
        return c.jacobian(), c.hessian()

    def to_json(self) -> dict:
        return {"nu": self.nu, "periodicity_defect": self.periodicity_defect,
                "mass_defect": self.mass_defect, "transport_residual": self.transport_residual,
                "min_w": float(self.w.min()), "gamma_form": self.gamma_form}


def transport_diffeo(V1: FourierField, V2: FourierField, substeps: int = 8,
                     tol: float = 1e-8) -> DiffeoPack:
    """Integrate ``d_x1 w + d_x2 (w V2 / V1) = 0``, ``w(0, .) = 1`` and set ``d = int_0^x2 w``.

    Marching uses classical Runge-Kutta in ``x1`` with spectral ``x2``-derivatives,
    forward on ``[0, pi]`` and backward on ``[-pi, 0]``; the mismatch at ``x1 = +-pi``,
    together with any net drift of the characteristic through the origin, is reported
    as ``periodicity_defect``.
    """
    g = V1.grid
    v1 = V1.values.real
    if np.abs(v1).min() <= tol or (v1.min() < 0 < v1.max()):
        raise TransversalityLost("transversality-lost: V1 vanishes on the grid")
    ratio = _field(g, V2.values.real / v1)
    # x1-Fourier series of the ratio, per x2 column, for evaluation between nodes
    rh = sfft.fft(ratio.values.real, axis=0) / g.n1
    rh[g.n1 // 2] = 0.0
    k1 = _k(g, 0)

    def r_at(t):
        return (np.exp(1j * k1 * t) @ rh).real

    def rhs(t, w):
        return -_deriv((w * r_at(t))[None, :], g, 1)[0].real

    n1 = g.n1
    h = 2 * np.pi / n1 / substeps
    W = np.empty(g.shape)
    W[0] = 1.0
    half = n1 // 2

    def march(sign):
        w = np.ones(g.n2)
        t = 0.0
        out = []
        for _ in range(half):
            for _ in range(substeps):
                s = sign * h
                k1_ = rhs(t, w)
                k2_ = rhs(t + s / 2, w + s / 2 * k1_)
                k3_ = rhs(t + s / 2, w + s / 2 * k2_)
                k4_ = rhs(t + s, w + s * k3_)
                w = w + s / 6 * (k1_ + 2 * k2_ + 2 * k3_ + k4_)
                t += s
            out.append(w.copy())
        return out

    fwd = march(+1.0)
    bwd = march(-1.0)
    for j in range(1, half):
        W[j] = fwd[j - 1]
        W[n1 - j] = bwd[j - 1]
    W[half] = 0.5 * (fwd[-1] + bwd[-1])
    per = float(np.abs(fwd[-1] - bwd[-1]).max())
    if W.min() <= 0:
        raise ValueError("w = d_x2 d is not positive; the transport map folds")
    P, mass = _primitive(W - 1.0, g, 1)
    # d(x1, 0) follows the characteristic through the origin; it vanishes when V2(., 0) = 0
    d0, drift = _primitive((V2.values.real / v1 * W)[:, :1], g, 0)
    per = max(per, drift)
    dper = _field(g, P.real - d0.real)
    d1 = dper.dx1().values.real
    d2 = 1.0 + dper.dx2().values.real
    res = float(np.abs(v1 * d1 + V2.values.real * d2).max())
    return DiffeoPack(g, dper, W, per, mass, res)


def principal_on_gradient(sigma: FourierField, pack: DiffeoPack, ndir: int = 64) -> np.ndarray:
    """``lambda^1(x, grad d(x))`` on the grid."""
    lam = dtn_principal(sigma, ndir)
    z1 = pack.dper.dx1().values.real
    z2 = 1.0 + pack.dper.dx2().values.real
    return lam.at_vectors(z1[:, :, None], z2[:, :, None])[:, :, 0].real


def compute_nu(P2, taylor, V1, pack: DiffeoPack, gamma_form: str = "derived") -> DiffeoPack:
    """Constant ``nu`` and the second diffeomorphism.

    ``Gamma = (sqrt(P2) a / V1^2) o chi1^{-1}`` for ``gamma_form="derived"`` and
    ``(P2 a / V1^2) o chi1^{-1}`` for ``"stated"``; then

        nu = (2 pi / ell) int_0^{2 pi ell} (int_0^{2 pi} sqrt(Gamma) dx1)^(-2) dx2.

    Returns a copy of ``pack`` carrying ``nu``, ``dtilde``, ``etilde`` and ``gamma``.
    """
    g = pack.grid
    P2 = np.asarray(getattr(P2, "values", P2)).real
    a = np.asarray(getattr(taylor, "values", taylor)).real
    v1 = np.asarray(getattr(V1, "values", V1)).real
    for name, arr in (("P2", P2), ("taylor coefficient", a), ("V1^2", v1 * v1)):
        if arr.min() <= 0:
            raise ValueError(f"Gamma is not positive: {name} has minimum {arr.min():.3e}")
    if gamma_form == "derived":
        src = np.sqrt(P2) * a / v1**2
    elif gamma_form == "stated":
        src = P2 * a / v1**2
    else:
        raise ValueError("gamma_form must be 'derived' or 'stated'")
    srcf = _field(g, src)
    # sample at chi1^{-1}(y) on the grid
    x1, x2 = pack.chi1().inverse_points(g.x1, g.x2)
    Gam = evaluate_at(srcf.coeffs, g, x1, x2).real
    if Gam.min() <= 0:
        raise ValueError("Gamma is not positive after composition")
    sq = np.sqrt(Gam)
    I = 2 * np.pi * sq.mean(axis=0)
    nu = float(4 * np.pi**2 * np.mean(I ** -2.0))
    ep = 4 * np.pi**2 / (nu * I**2) - 1.0
    E, _ = _primitive(np.broadcast_to(ep, g.shape), g, 1)
    Dt, _ = _primitive(2 * np.pi * sq / I - 1.0, g, 0)
    P2f = _field(g, P2)
    # gamma(x) = M(chi1(x)) with M = sqrt(P2 o chi1^{-1}) (1 + etilde')
    M = np.sqrt(evaluate_at(P2f.coeffs, g, x1, x2).real) * (1.0 + ep)
    gam = evaluate_at(_field(g, M).coeffs, g, *pack.chi1().on_grid()).real
    return DiffeoPack(pack.grid, pack.dper, pack.w, pack.periodicity_defect, pack.mass_defect,
                      pack.transport_residual, nu, _field(g, Dt.real), _field(g, E.real),
                      _field(g, gam), Gam, gamma_form)


def conjugation_pack(sigma: FourierField, coeffs, ndir: int = 64, substeps: int = 8,
                     gamma_form: str = "derived") -> DiffeoPack:
    """Both diffeomorphisms and ``nu`` for a state with boundary coefficients ``coeffs``."""
    pack = transport_diffeo(coeffs.V1, coeffs.V2, substeps)
    P2 = principal_on_gradient(sigma, pack, ndir) ** 2
    return compute_nu(P2, coeffs.taylor, coeffs.V1, pack, gamma_form)


def nu_pointwise(sigma: FourierField, coeffs, pack: DiffeoPack, ndir: int = 64) -> np.ndarray:
    """``(V . tchi'(x) e1)^2 / (a(x) lambda^1(x, tchi'(x) e2))`` on the grid.

    After both changes of variables the principal symbol has the form
    ``M (|xi| - nu xi1^2) + i alpha xi1``, so this ratio is the constant ``nu``.
    """
    J = pack.chi().jacobian()
    # tchi' e_j is the j-th row of chi', i.e. (d chi_j / dx1, d chi_j / dx2)
    e1 = (J[0, 0], J[0, 1])
    e2 = (J[1, 0], J[1, 1])
    lam = dtn_principal(sigma, ndir)
    l2 = lam.at_vectors(e2[0][:, :, None], e2[1][:, :, None])[:, :, 0].real
    vx = coeffs.V1.values.real * e1[0] + coeffs.V2.values.real * e1[1]
    return vx**2 / (coeffs.taylor.values.real * l2)


# ----------------------------------------------------------------------
# paracomposition
# ----------------------------------------------------------------------

def paracomposition(chi: Diffeo, f: FourierField, N: int = 2) -> FourierField:
    """``sum_j sum_{|k - j| <= N} Delta_k ((Delta_j f) o chi)``."""
    if N < 1:
        raise ValueError("N must be at least 1")
    g = f.grid
    nb = lp_count(g)
    out = np.zeros(g.shape, complex)
    for j in range(nb):
        fj = lp_block(f, j)
        if not np.any(fj.coeffs):
            continue
        cj = chi.compose_field(fj)
        for k in range(max(0, j - N), min(nb, j + N + 1)):
            out += lp_block(cj, k).coeffs
    return FourierField(g, out)


def paracomposition_drift(chi: Diffeo, f: FourierField, N: int = 2) -> float:
    """Relative L2 change of ``chi* f`` when the band width goes from ``N`` to ``N + 1``."""
    a, b = paracomposition(chi, f, N), paracomposition(chi, f, N + 1)
    return (b - a).l2() / max(a.l2(), 1e-300)


# ----------------------------------------------------------------------
# symbol decomposition near the characteristic direction
# ----------------------------------------------------------------------

@dataclass(frozen=True, eq=False)
class SymbolDecomposition:
    """``S(x, xi) i xi1 = sum_j S_j (i xi1)^(1-j) + L(xi) sum_k q_k (i xi1)^(1-k) + R(x, xi)``.

    Here ``L = |xi2| - nu xi1^2`` and ``S`` is homogeneous of degree ``-m``, even in ``xi2``.
    ``taylor[j] = (d_xi1^j S)(x, 0, 1) / (i^j j!)``.
    """

    comp: HomogeneousComponent
    nu: float
    m: int
    taylor: tuple
    S: tuple

    @property
    def nkeep(self) -> int:
        return 4 - 2 * self.m

    def _shat(self, tau) -> np.ndarray:
        return self.comp.at(tau, 1.0)

    def remainder_r(self, tau: float) -> np.ndarray:
        """Taylor remainder ``r`` with ``S(x, tau, 1) = sum_{j <= J} taylor_j (i tau)^j + r (i tau)^(J+1)``."""
        J = self.nkeep
        if abs(tau) >= 0.02:
            acc = self._shat(tau).astype(complex)
            for j in range(J + 1):
                acc = acc - self.taylor[j] * (1j * tau) ** j
            return acc / (1j * tau) ** (J + 1)
        extra = self.taylor[J + 1:]
        return sum(c * (1j * tau) ** i for i, c in enumerate(extra))

    def q(self, k: int, xi1: float, xi2: float) -> np.ndarray:
        """Coefficient ``q_k(x, xi)`` of ``L(xi) (i xi1)^(1-k)``, ``1 <= k <= 4``."""
        return self._q_all(xi1, xi2)[k]

    def _q_all(self, xi1, xi2):
        nu, m, J = self.nu, self.m, self.nkeep
        a2 = abs(xi2)
        t = xi1 * xi1 / a2
        out = {k: np.zeros(self.comp.grid.shape, complex) for k in range(1, 5)}
        for j in range(J + 1):
            n = j + m
            Jp = j + 2 * m
            for p in range(n):
                a = 1 - Jp + 2 * p
                coef = -(1j ** (j + 1)) * nu ** (p - n) * a2 ** (-p - 1) * self.taylor[j]
                if a <= 0:
                    out[1 - a] += coef * (1j) ** (-a)
                else:
                    out[1] += coef * xi1**a
        # remainder term, folded onto the k = 1 slot
        n = 3 - m
        r = self.remainder_r(xi1 / a2)
        s = sum(t**p * nu ** (p - n) for p in range(n))
        out[1] += -(1j ** (J + 2)) * r * s / a2**3
        return out

    def residual_symbol(self, xi1, xi2) -> np.ndarray:
        """Part of order -2 left out of the decomposition."""
        a2 = abs(xi2)
        J, n = self.nkeep, 3 - self.m
        return (1j ** (J + 2)) * self.nu ** (-n) * self.remainder_r(xi1 / a2) / a2**2

    def identity_defect(self, xi1: float, xi2: float) -> float:
        """Pointwise defect of the decomposition identity at a frequency with ``xi1 != 0``."""
        lhs = self.comp.at(xi1, xi2) * (1j * xi1)
        L = abs(xi2) - self.nu * xi1 * xi1
        rhs = sum(self.S[j] * (1j * xi1) ** (1 - j) for j in range(5))
        qa = self._q_all(xi1, xi2)
        rhs = rhs + L * sum(qa[k] * (1j * xi1) ** (1 - k) for k in range(1, 5))
        rhs = rhs + self.residual_symbol(xi1, xi2)
        return float(np.abs(lhs - rhs).max() / max(np.abs(lhs).max(), 1e-300))


def symbol_decompose(S, nu: float, convention: str = "derived", sym_tol: float = 1e-8,
                     extra_terms: int = 4) -> SymbolDecomposition:
    """Coefficients ``S_0 .. S_4`` of a symbol even in ``xi2`` along the direction ``(0, 1)``.

    With ``s_j = (d_xi1^j S)(x, 0, 1) / (i^j j!)`` the identity
    ``i xi1 (i xi1 / |xi2|)^j = (-1)^j nu^-j (i xi1)^(1-j) + O(L)`` gives
    ``S_{j+2m} = (-1)^(j+m) nu^-(j+m) s_j`` (``convention="derived"``).
    ``convention="stated"`` returns ``s_j / nu^j`` (no sign, degree 0 only) for comparison.
    """
    if isinstance(S, SymbolExpansion):
        if len(S) != 1:
            raise ValueError("decompose one homogeneous component at a time")
        S = S[0]
    if not nu > 0:
        raise ValueError("nu must be positive")
    m = -S.degree
    if m not in (0, 1, 2):
        raise ValueError("degree must be 0, -1 or -2")
    m = int(m)
    flip = S.values[:, :, (-np.arange(S.ndir)) % S.ndir] if S.values.shape[2] > 1 else S.values
    defect = float(np.abs(flip - S.values).max())
    if defect > sym_tol * max(S.max_abs(), 1.0):
        raise ValueError(f"symbol is not even in xi2 (defect {defect:.2e})")
    J = 4 - 2 * m
    taylor = []
    d = S
    for j in range(J + 1 + extra_terms):
        taylor.append(np.asarray(d.at(0.0, 1.0), complex) / (1j**j * factorial(j)))
        d = d.dxi(0)
    Sj = [np.zeros(S.grid.shape, complex) for _ in range(5)]
    for j in range(J + 1):
        n = j + m
        if convention == "derived":
            Sj[j + 2 * m] = (-1) ** n * nu ** (-n) * taylor[j]
        elif convention == "stated":
            if m:
                raise ValueError("the stated convention is defined for degree 0 only")
            Sj[j] = taylor[j] / nu**j
        else:
            raise ValueError("convention must be 'derived' or 'stated'")
    return SymbolDecomposition(S, float(nu), m, tuple(taylor), tuple(Sj))


# ----------------------------------------------------------------------
# coefficient cascade
# ----------------------------------------------------------------------

@dataclass(frozen=True, eq=False)
class CascadeResult:
    a_coeffs: tuple
    c_coeffs: tuple
    C0: np.ndarray
    gamma_phase: np.ndarray
    kappa: complex
    kappa_prime: complex
    kappa_prime_closed: complex
    kappa_prime_stated: complex
    nu: float
    defects: dict = field(default_factory=dict)

    def to_json(self) -> dict:
        return {"nu": self.nu,
                "kappa": [self.kappa.real, self.kappa.imag],
                "kappa_prime": [self.kappa_prime.real, self.kappa_prime.imag],
                "kappa_prime_closed": [self.kappa_prime_closed.real, self.kappa_prime_closed.imag],
                "kappa_prime_stated": [self.kappa_prime_stated.real, self.kappa_prime_stated.imag],
                "defects": self.defects}


class _Ops:
    def __init__(self, grid):
        self.g = grid

    def d1(self, f, n=1):
        return _deriv(f, self.g, 0, n)

    def d2(self, f, n=1):
        return _deriv(f, self.g, 1, n)

    def int1(self, f):
        """x1-integral over a period, shape (1, n2)."""
        return 2 * np.pi * _mean(f, 0)


def _as_array(a, grid):
    v = np.asarray(getattr(a, "complex_values", lambda: a)(), complex)
    if v.shape != grid.shape:
        v = np.broadcast_to(v, grid.shape).astype(complex)
    return v


def _delta_lists(c, a, kappa, kappa_p, nu, op):
    """Both sides of the five transport identities, ``delta_k`` and ``delta'_k``."""
    d, dp = [], []
    kp = [0, 0, 0, c[0], c[1]]
    for k in range(5):
        lhs = 2 * nu * op.d1(c[k])
        if k:
            lhs = lhs - 1j * op.d2(c[k - 1]) + nu * op.d1(c[k - 1], 2) + kappa * c[k - 1]
        if k >= 3:
            lhs = lhs + kappa_p * kp[k]
        d.append(lhs)
        rhs = 0
        for l in range(k + 1):
            for mm in range(k - l + 1):
                n = k - l - mm
                rhs = rhs + c[l] * (-1) ** mm * op.d1(a[n], mm)
        dp.append(rhs)
    return d, dp


def coefficient_cascade(a: Sequence, nu: float, grid: TorusGrid, zero_tol: float = 1e-8) -> CascadeResult:
    """Coefficients ``c_0 .. c_4`` and constants ``kappa``, ``kappa'`` from ``a_0 .. a_4``.

    The ``c_k`` solve ``delta_k = delta'_k`` with ``c_1(0, .) = c_3(0, .) = c_4(0, .) = 0``
    and ``c_2(0, 0) = c_0(0, 0)``.  ``kappa'`` is obtained from the periodicity
    condition of ``C_2`` and, independently, from the closed formula
    ``kappa_prime_closed``; ``kappa_prime_stated`` evaluates the formula as printed
    (see the decisions ledger) for comparison.
    """
    if len(a) != 5:
        raise ValueError("need five coefficients a_0 .. a_4")
    if not nu > 0:
        raise ValueError("nu must be positive")
    op = _Ops(grid)
    A = [_as_array(x, grid) for x in a]
    area = grid.area
    defects = {}

    def prim1(f, name):
        F, m = _primitive(f, grid, 0)
        scale = max(float(np.abs(f).max()), 1.0)
        defects[name] = m
        if m > zero_tol * scale:
            raise ValueError(f"zero-mean violation in {name}: x1-mean {m:.3e}")
        return F

    def prim2(f, name):
        F, m = _primitive(f, grid, 1)
        scale = max(float(np.abs(f).max()), 1.0)
        defects[name] = m
        if m > zero_tol * scale:
            raise ValueError(f"zero-mean violation in {name}: x2-mean {m:.3e}")
        return F

    a0, a1, a2, a3, a4 = A
    gam, gm = _primitive(a0, grid, 0, from_zero=False)
    defects["a0_x1_mean"] = gm
    if gm > zero_tol * max(float(np.abs(a0).max()), 1.0):
        raise ValueError(f"zero-mean violation in a0: x1-mean {gm:.3e}")
    E = np.exp(gam / (2 * nu))
    Ei = 1.0 / E
    h = a1 - a0**2 / (4 * nu)
    kappa = complex(h.mean())
    beta = op.int1(h) - 2 * np.pi * kappa
    B = prim2(np.broadcast_to(beta, grid.shape), "beta")
    C0 = np.exp(1j * B / (2 * np.pi))
    c0 = C0 * E

    def G_of(k, c, kp):
        g = 1j * op.d2(c[k - 1]) - nu * op.d1(c[k - 1], 2) - kappa * c[k - 1]
        g = g + c[k - 1] * a1 - c[k - 1] * op.d1(a0)
        for l in range(k - 1):
            n_max = k - l
            s = 0
            for mm in range(n_max + 1):
                n = n_max - mm
                s = s + (-1) ** mm * op.d1(A[n], mm)
            g = g + c[l] * s
        if k >= 3:
            g = g - kp * c[k - 3]
        return g

    c = [c0, None, None, None, None]
    G1 = G_of(1, c, 0)
    Gam1 = prim1(Ei * G1, "G1") / (2 * nu)
    c[1] = E * Gam1
    G2 = G_of(2, c, 0)
    Gam2 = prim1(Ei * G2, "G2") / (2 * nu)
    # kappa' from the periodicity of C2
    w1 = a2 - op.d1(a1) + op.d1(a0, 2)
    w0 = a3 - op.d1(a2) + op.d1(a1, 2) - op.d1(a0, 3)
    bracket = 1j / (2 * nu) * op.d2(gam) - kappa + a1 - 0.5 * op.d1(a0) - a0**2 / (4 * nu)
    F2 = op.int1(Gam2 * bracket + 1j * op.d2(Gam2) + Gam1 * w1 + C0 * w0)
    kp = complex(2 * np.pi * grid.ell * np.mean(F2 / C0[:1]) / area)
    y = prim2(np.broadcast_to((2 * np.pi * kp * C0[:1] - F2) / (2j * np.pi * C0[:1]), grid.shape), "C2")
    C2 = C0 * (1.0 + y)
    c[2] = E * (C2 + Gam2)
    G3 = G_of(3, c, kp)
    c[3] = E * prim1(Ei * G3, "G3") / (2 * nu)
    G4 = G_of(4, c, kp)
    c[4] = E * prim1(Ei * G4, "G4") / (2 * nu)

    # closed formula, independent of the choice of C2
    g1, g2 = c[1] / c0, c[2] / c0
    closed = g2 * (bracket - beta / (2 * np.pi)) + g1 * w1 + a3
    kp_closed = complex(closed.mean())
    stated = g2 * (1j / (2 * np.pi) * op.d2(gam) + a1 - 0.5 * op.d1(a0) - a0**2 / (4 * nu) - kappa) + g1 * w1
    kp_stated = complex(stated.mean())

    d, dp = _delta_lists(c, A, kappa, kp, nu, op)
    scale = max(max(float(np.abs(x).max()) for x in d), 1.0)
    defects["transport"] = [float(np.abs(x - y).max()) / scale for x, y in zip(d, dp)]
    defects["min_abs_c0"] = float(np.abs(c0).min())
    return CascadeResult(tuple(A), tuple(c), C0[0], gam, kappa, kp, kp_closed, kp_stated, float(nu), defects)


def c_parity_defect(res: CascadeResult) -> float:
    """Largest violation of: c_k even in x1 for k in {0, 2, 4}, odd for k in {1, 3}."""
    g = None
    worst = 0.0
    for k, ck in enumerate(res.c_coeffs):
        n1 = ck.shape[0]
        idx = (-np.arange(n1)) % n1
        refl = ck[idx]
        sgn = 1.0 if k % 2 == 0 else -1.0
        worst = max(worst, float(np.abs(refl - sgn * ck).max()) / max(float(np.abs(ck).max()), 1.0))
    return worst


def random_admissible(grid: TorusGrid, rng: np.random.Generator, kmax: float = 3.0,
                      amp: float = 0.3) -> list:
    """Random ``a_0 .. a_4`` with the cascade's parity and reality structure.

    ``a_0`` is purely imaginary; ``conj(a_k(x1, x2)) = a_k(x1, -x2)``;
    ``a_0, a_2, a_4`` odd and ``a_1, a_3`` even in ``x1``.
    """
    from .torus import random_field

    def part(p):
        f = random_field(grid, rng, kmax=kmax, parity=p)
        s = f.sup()
        return f.values.real * (amp / s if s > 0 else 0.0)

    out = [1j * part("oo")]
    for k in range(1, 5):
        x1p = "e" if k % 2 else "o"
        out.append(part(x1p + "e") + 1j * part(x1p + "o"))
    return out
