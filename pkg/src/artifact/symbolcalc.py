"""Homogeneous symbols on the torus and their calculus.

A symbol component ``a(x, xi) = |xi|^m f(x, theta)`` is stored through samples of
``f`` on a grid in ``x`` and a uniform mesh in the direction angle ``theta``
(``xi = |xi| (cos theta, sin theta)``).  In one dimension the mesh is
``{0, pi}``, i.e. the two unit vectors ``+1`` and ``-1``.

Stored ``values`` have shape ``(n1 | 1, n2 | 1, ndir | 1)``; a length-one axis
means the symbol does not depend on that variable.
"""

from __future__ import annotations

import io
from dataclasses import dataclass, field
from itertools import product as iproduct
from math import factorial
from typing import List, Sequence

import numpy as np
from scipy import fft as sfft

from .maps import Diffeo
from .torus import FourierField, TorusGrid, evaluate_at


class FactorizationDegenerate(ArithmeticError):
    """Raised when the two roots of the factorization collide."""


def direction_angles(grid: TorusGrid, ndir: int) -> np.ndarray:
    if grid.dim == 1:
        return np.array([0.0, np.pi])
    return 2 * np.pi * np.arange(ndir) / ndir


def _angle_freqs(ndir: int) -> np.ndarray:
    return np.rint(np.fft.fftfreq(ndir) * ndir)


def _xderiv(values: np.ndarray, grid: TorusGrid, axis: int, order: int) -> np.ndarray:
    """Spectral x-derivative of symbol samples along grid axis 0 or 1."""
    if order == 0:
        return values
    if values.shape[axis] == 1:
        return np.zeros_like(values)
    xi = (grid.xi1 if axis == 0 else grid.xi2)[:, :, None]
    mult = (1j * xi) ** order
    if order % 2:
        mult = np.where(grid.nyquist_mask[:, :, None], 0.0, mult)
    full = np.broadcast_to(values, grid.shape + values.shape[2:])
    return sfft.ifft2(sfft.fft2(full, axes=(0, 1)) * mult, axes=(0, 1))


@dataclass(frozen=True, eq=False)
class HomogeneousComponent:
    """One term ``|xi|^degree f(x, theta)`` of a symbol expansion.

    Parameters
    ----------
    grid : TorusGrid
        Grid carrying the x-dependence.
    degree : float
        Homogeneity degree in ``xi``.
    values : ndarray
        Samples of ``f`` with shape ``(n1|1, n2|1, ndir|1)``.
    ndir : int
        Size of the direction mesh (forced to 2 when ``grid.dim == 1``).
    x_regularity : float
        Declared Hoelder regularity in ``x``; metadata only.
    """

    grid: TorusGrid
    degree: float
    values: np.ndarray
    ndir: int = 256
    x_regularity: float = np.inf

    def __post_init__(self):
        nd = 2 if self.grid.dim == 1 else int(self.ndir)
        if self.grid.dim == 2 and (nd < 4 or nd % 2):
            raise ValueError("direction mesh size must be even and >= 4")
        v = np.asarray(self.values, dtype=complex)
        while v.ndim < 3:
            v = v[None]
        ok = (v.shape[0] in (1, self.grid.n1) and v.shape[1] in (1, self.grid.n2)
              and v.shape[2] in (1, nd))
        if not ok or v.ndim != 3:
            raise ValueError(f"values of shape {v.shape} do not fit grid {self.grid.shape} x {nd} directions")
        v = np.array(v)
        v.setflags(write=False)
        object.__setattr__(self, "values", v)
        object.__setattr__(self, "ndir", nd)

    # construction -------------------------------------------------------
    @classmethod
    def zero(cls, grid, degree, ndir=256):
        return cls(grid, degree, np.zeros((1, 1, 1)), ndir)

    @classmethod
    def from_function(cls, grid, degree, fn, ndir=256):
        """Component from ``fn(x1, x2, c, s)`` with ``(c, s)`` the unit direction."""
        th = direction_angles(grid, ndir)
        x1 = grid.x1[:, :, None]
        x2 = grid.x2[:, :, None]
        v = fn(x1, x2, np.cos(th)[None, None, :], np.sin(th)[None, None, :])
        return cls(grid, degree, np.broadcast_to(v, grid.shape + (th.size,)), ndir)

    @classmethod
    def from_field(cls, f: FourierField, ndir=256):
        """Degree-zero symbol independent of xi."""
        return cls(f.grid, 0.0, f.complex_values()[:, :, None], ndir)

    @classmethod
    def multiplier(cls, grid, degree, fn, ndir=256):
        """x-independent component ``|xi|^degree fn(c, s)``."""
        th = direction_angles(grid, ndir)
        v = np.asarray(fn(np.cos(th), np.sin(th)), complex) * np.ones(th.size)
        return cls(grid, degree, v[None, None, :], ndir)

    def with_values(self, values, degree=None):
        return HomogeneousComponent(self.grid, self.degree if degree is None else degree,
                                    values, self.ndir, self.x_regularity)

    # geometry -----------------------------------------------------------
    @property
    def angles(self) -> np.ndarray:
        return direction_angles(self.grid, self.ndir)

    @property
    def directions(self):
        th = self.angles
        return np.cos(th)[None, None, :], np.sin(th)[None, None, :]

    def full(self) -> np.ndarray:
        return np.broadcast_to(self.values, self.grid.shape + (self.ndir,))

    def is_zero(self, tol: float = 0.0) -> bool:
        return bool(np.abs(self.values).max() <= tol)

    # algebra ------------------------------------------------------------
    def _check(self, other):
        if other.grid != self.grid or other.ndir != self.ndir:
            raise ValueError("symbols live on different grids or direction meshes")

    def __add__(self, other):
        if isinstance(other, HomogeneousComponent):
            self._check(other)
            if other.degree != self.degree:
                raise ValueError("cannot add components of different degrees")
            return self.with_values(self.values + other.values)
        return NotImplemented

    def __neg__(self):
        return self.with_values(-self.values)

    def __sub__(self, other):
        return self + (-other)

    def __mul__(self, other):
        if isinstance(other, HomogeneousComponent):
            self._check(other)
            return self.with_values(self.values * other.values, self.degree + other.degree)
        if isinstance(other, FourierField):
            return self.with_values(self.values * other.complex_values()[:, :, None])
        if isinstance(other, np.ndarray) and other.ndim == 2:
            return self.with_values(self.values * other[:, :, None])
        return self.with_values(self.values * other)

    __rmul__ = __mul__

    def __truediv__(self, other):
        if isinstance(other, HomogeneousComponent):
            self._check(other)
            if np.any(other.values == 0):
                raise ZeroDivisionError("division by a vanishing symbol")
            return self.with_values(self.values / other.values, self.degree - other.degree)
        return self.with_values(self.values / other)

    # calculus -----------------------------------------------------------
    def dx(self, axis: int, order: int = 1) -> "HomogeneousComponent":
        if axis == 1 and self.grid.dim == 1:
            return self.with_values(np.zeros((1, 1, 1)))
        return self.with_values(_xderiv(self.values, self.grid, axis, order))

    def dangle(self) -> np.ndarray:
        """Spectral derivative of ``f`` in theta (Nyquist mode dropped)."""
        if self.values.shape[2] == 1 or self.grid.dim == 1:
            return np.zeros_like(self.values)
        m = _angle_freqs(self.ndir)
        m[self.ndir // 2] = 0.0
        return sfft.ifft(sfft.fft(self.values, axis=2) * (1j * m), axis=2)

    def dxi(self, axis: int) -> "HomogeneousComponent":
        """Derivative in xi_1 (axis 0) or xi_2 (axis 1); degree drops by one."""
        m = self.degree
        c, s = self.directions
        f = self.values
        if self.grid.dim == 1:
            if axis == 1:
                return self.with_values(np.zeros((1, 1, 1)), m - 1)
            return self.with_values(m * c * f, m - 1)
        fp = self.dangle()
        if axis == 0:
            return self.with_values(m * c * f - s * fp, m - 1)
        return self.with_values(m * s * f + c * fp, m - 1)

    def dxi_multi(self, alpha) -> "HomogeneousComponent":
        out = self
        for _ in range(alpha[0]):
            out = out.dxi(0)
        for _ in range(alpha[1]):
            out = out.dxi(1)
        return out

    def dx_multi(self, alpha) -> "HomogeneousComponent":
        out = self
        if alpha[0]:
            out = out.dx(0, alpha[0])
        if alpha[1]:
            out = out.dx(1, alpha[1])
        return out

    # evaluation ---------------------------------------------------------
    def angular_modes(self, rtol: float = 1e-15):
        """Angular Fourier modes ``m`` and coefficients ``F_m(x)`` above ``rtol``.

        The Nyquist mode is split evenly between ``+ndir/2`` and ``-ndir/2``.
        """
        nd = self.values.shape[2]
        if nd == 1:
            return np.array([0]), self.values.copy()
        F = sfft.fft(self.values, axis=2) / nd
        m = _angle_freqs(nd).astype(int)
        h = nd // 2
        F = np.concatenate([F, 0.5 * F[:, :, h:h + 1]], axis=2)
        F[:, :, h] *= 0.5
        m = np.concatenate([m, [h]])
        mag = np.abs(F).reshape(-1, F.shape[2]).max(axis=0)
        keep = mag > rtol * max(mag.max(), 1e-300)
        return m[keep], F[:, :, keep]

    def eval_angles(self, phi) -> np.ndarray:
        """``f(x, phi)`` for angles ``phi`` of shape ``(n1|1, n2|1, K)``."""
        phi = np.asarray(phi, float)
        if self.grid.dim == 1:
            v = self.values
            return np.where(np.cos(phi) >= 0, v[:, :, :1], v[:, :, -1:])
        modes, F = self.angular_modes()
        out = np.zeros(np.broadcast_shapes(F.shape[:2] + (1,), phi.shape), complex)
        for j, m in enumerate(modes):
            out = out + F[:, :, j:j + 1] * np.exp(1j * m * phi)
        return out

    def at(self, xi1, xi2=0.0) -> np.ndarray:
        """Symbol at the frequency ``(xi1, xi2)`` for every grid point, shape ``(n1, n2)``."""
        r = np.hypot(xi1, xi2)
        if r == 0:
            raise ValueError("homogeneous symbols are not evaluated at xi = 0")
        phi = np.full((1, 1, 1), np.arctan2(xi2, xi1))
        v = self.eval_angles(phi)[:, :, 0]
        return np.broadcast_to(v, self.grid.shape) * r**self.degree

    def at_vectors(self, z1, z2) -> np.ndarray:
        """Symbol at per-point frequencies ``(z1, z2)`` shaped ``(n1|1, n2|1, K)``."""
        r = np.hypot(z1, z2)
        return self.eval_angles(np.arctan2(z2, z1)) * r**self.degree

    # structure ----------------------------------------------------------
    def _angle_index_map(self, kind: str) -> np.ndarray:
        j = np.arange(self.ndir)
        if kind == "neg":
            return (j + self.ndir // 2) % self.ndir
        if kind == "flip1":
            return (self.ndir // 2 - j) % self.ndir
        return (-j) % self.ndir

    def conj_reflect(self) -> "HomogeneousComponent":
        """``conj(a(x, -xi))``; equals ``a`` for symbols of real operators."""
        v = self.full()[:, :, self._angle_index_map("neg")]
        return self.with_values(np.conj(v))

    def reflected(self, axis: int) -> "HomogeneousComponent":
        """``a(-x1, -xi1 ; x2, xi2)`` (axis 0) or ``a(x1, xi1 ; -x2, -xi2)`` (axis 1)."""
        i1, i2 = self.grid.neg_index()
        v = self.full()
        if axis == 0:
            v = v[i1][:, :, self._angle_index_map("flip1")]
        else:
            v = v[:, i2][:, :, self._angle_index_map("flip2")]
        return self.with_values(v)

    def max_abs(self) -> float:
        return float(np.abs(self.values).max())

    def to_csv_rows(self, out: io.StringIO):
        v = self.full()
        for (i1, i2, j), z in np.ndenumerate(v):
            out.write(f"{i1},{i2},{j},{self.degree:g},{z.real:.17g},{z.imag:.17g}\n")


@dataclass(frozen=True, eq=False)
class SymbolExpansion:
    """Finite expansion ``sum_j a_{m-j}`` with degrees ``m, m-1, ...``."""

    components: tuple = field(default_factory=tuple)

    def __post_init__(self):
        comps = tuple(self.components)
        if not comps:
            raise ValueError("an expansion needs at least one component")
        m = comps[0].degree
        for j, c in enumerate(comps):
            if abs(c.degree - (m - j)) > 1e-12:
                raise ValueError("degrees must decrease by one from the principal degree")
            comps[0]._check(c)
        object.__setattr__(self, "components", comps)

    @property
    def principal_degree(self) -> float:
        return self.components[0].degree

    @property
    def grid(self) -> TorusGrid:
        return self.components[0].grid

    @property
    def ndir(self) -> int:
        return self.components[0].ndir

    def __len__(self):
        return len(self.components)

    def __getitem__(self, j) -> HomogeneousComponent:
        return self.components[j]

    def __iter__(self):
        return iter(self.components)

    @classmethod
    def from_components(cls, comps: Sequence[HomogeneousComponent]) -> "SymbolExpansion":
        """Sum components of arbitrary degrees into a gap-free expansion."""
        comps = [c for c in comps]
        if not comps:
            raise ValueError("no components")
        top = max(c.degree for c in comps)
        low = min(c.degree for c in comps)
        n = int(round(top - low)) + 1
        ref = comps[0]
        slots: List[HomogeneousComponent] = [HomogeneousComponent.zero(ref.grid, top - j, ref.ndir)
                                             for j in range(n)]
        for c in comps:
            j = int(round(top - c.degree))
            if abs(top - j - c.degree) > 1e-12:
                raise ValueError("degrees must differ by integers")
            slots[j] = slots[j] + c
        return cls(tuple(slots))

    def truncate(self, nterms: int) -> "SymbolExpansion":
        return SymbolExpansion(self.components[:nterms])

    def __add__(self, other):
        return SymbolExpansion.from_components(list(self) + list(other))

    def __mul__(self, scalar):
        return SymbolExpansion(tuple(c * scalar for c in self))

    __rmul__ = __mul__

    def evaluate(self, xi1, xi2=0.0) -> np.ndarray:
        return sum(c.at(xi1, xi2) for c in self)

    def conj_reflect(self) -> "SymbolExpansion":
        return SymbolExpansion(tuple(c.conj_reflect() for c in self))

    def reality_defect(self) -> float:
        """Largest ``|a - conj(a(x, -xi))|`` over components."""
        return max(float(np.abs(c.full() - c.conj_reflect().full()).max()) for c in self)

    def parity_defect(self) -> float:
        """Deviation from invariance under both joint reflections."""
        d = 0.0
        for c in self:
            for ax in (0, 1):
                if ax == 1 and c.grid.dim == 1:
                    continue
                d = max(d, float(np.abs(c.full() - c.reflected(ax).full()).max()))
        return d

    def to_csv(self) -> str:
        out = io.StringIO()
        out.write("i1,i2,angle_index,degree,re,im\n")
        for c in self:
            c.to_csv_rows(out)
        return out.getvalue()


# ----------------------------------------------------------------------
# Dirichlet-Neumann symbol
# ----------------------------------------------------------------------

def _surface_data(sigma: FourierField):
    g1 = sigma.dx1().values.real
    g2 = sigma.dx2().values.real if sigma.grid.dim == 2 else np.zeros(sigma.grid.shape)
    lap = sigma.laplacian().values.real
    return g1[:, :, None], g2[:, :, None], lap[:, :, None]


def dtn_principal(sigma: FourierField, ndir: int = 256) -> HomogeneousComponent:
    """``sqrt((1 + |grad sigma|^2) |xi|^2 - (grad sigma . xi)^2)`` on the direction mesh."""
    if not sigma.is_real():
        raise ValueError("surface elevation must be real")
    g1, g2, _ = _surface_data(sigma)
    th = direction_angles(sigma.grid, ndir)
    c, s = np.cos(th)[None, None, :], np.sin(th)[None, None, :]
    gx = g1 * c + g2 * s
    v = np.sqrt(1.0 + g1**2 + g2**2 - gx**2)
    return HomogeneousComponent(sigma.grid, 1.0, v, ndir)


@dataclass(frozen=True, eq=False)
class DtNFactorization:
    """Roots ``a`` (decaying) and ``A`` (growing) of the factorization and the assembled symbol."""

    a: SymbolExpansion
    A: SymbolExpansion
    lam: SymbolExpansion
    b: np.ndarray
    grad_dot: HomogeneousComponent


def dtn_factorization(sigma: FourierField, order: int = 3, ndir: int = 256,
                      lowpass: bool = True) -> DtNFactorization:
    """Factor the flattened Laplacian symbol and assemble the Dirichlet-Neumann symbol.

    Parameters
    ----------
    sigma : FourierField
        Real surface elevation.
    order : int
        Number of terms (1, 2 or 3) of the expansion ``lambda^1 + lambda^0 + lambda^-1``.
    lowpass : bool
        Apply the 2/3 spectral filter to ``sigma`` before differentiating.
    """
    if order not in (1, 2, 3):
        raise ValueError("order must be 1, 2 or 3")
    if not sigma.is_real():
        raise ValueError("surface elevation must be real")
    grid = sigma.grid
    s = sigma.lowpass() if lowpass else sigma
    g1, g2, lap = _surface_data(s)
    g2n = g1**2 + g2**2
    b = 1.0 / (1.0 + g2n)
    H = lambda v, m: HomogeneousComponent(grid, m, v, ndir)
    th = direction_angles(grid, ndir)
    c, sn = np.cos(th)[None, None, :], np.sin(th)[None, None, :]
    gx = g1 * c + g2 * sn
    root = np.sqrt(b - (b * gx) ** 2)
    if np.any(root <= 0):
        raise FactorizationDegenerate("factorization-degenerate")
    a1 = H(1j * b * gx - root, 1.0)
    A1 = H(1j * b * gx + root, 1.0)
    gdot = H(gx, 1.0)
    one_plus = 1.0 + g2n
    lam = [A1 * one_plus - gdot * 1j]
    a_list, A_list = [a1], [A1]
    dims = (0, 1) if grid.dim == 2 else (0,)
    if order >= 2:
        bl = H(b * lap, 0.0)
        num = None
        for j in dims:
            t = a1.dxi(j) * A1.dx(j)
            num = t if num is None else num + t
        a0 = (num * 1j - bl * a1) / (A1 - a1)
        A0 = bl - a0
        a_list.append(a0)
        A_list.append(A0)
        lam.append(A0 * one_plus)
    if order >= 3:
        acc = a0 * A0
        for j in dims:
            acc = acc + (a1.dxi(j) * A0.dx(j) + a0.dxi(j) * A1.dx(j)) * (-1j)
        for al in _multi_indices(grid.dim, 2, exact=True):
            coef = 1.0 / (1j**2 * factorial(al[0]) * factorial(al[1]))
            acc = acc + a1.dxi_multi(al) * A1.dx_multi(al) * coef
        am1 = acc / (a1 - A1)
        a_list.append(am1)
        A_list.append(-am1)
        lam.append(-am1 * one_plus)
    return DtNFactorization(SymbolExpansion(tuple(a_list)), SymbolExpansion(tuple(A_list)),
                            SymbolExpansion(tuple(lam)), b[:, :, 0], gdot)


def dtn_symbol_expansion(sigma: FourierField, order: int = 3, ndir: int = 256,
                         lowpass: bool = True) -> SymbolExpansion:
    """Expansion ``lambda^1 + lambda^0 + lambda^-1`` truncated to ``order`` terms."""
    return dtn_factorization(sigma, order, ndir, lowpass).lam


# ----------------------------------------------------------------------
# Composition and change of variables
# ----------------------------------------------------------------------

def _multi_indices(dim: int, n: int, exact: bool = False):
    """Multi-indices with ``|alpha| < n`` (or ``== n`` when ``exact``)."""
    out = []
    for a1, a2 in iproduct(range(n + 1), range(n + 1 if dim == 2 else 1)):
        k = a1 + a2
        if (exact and k == n) or (not exact and k < n):
            out.append((a1, a2))
    return sorted(out, key=lambda a: (sum(a), -a[0]))


def sharp_compose(a: SymbolExpansion, b: SymbolExpansion, rho: float) -> SymbolExpansion:
    """Symbol of the composition truncated to ``|alpha| < rho``.

    ``a # b = sum (1 / (i^|alpha| alpha!)) d_xi^alpha a  d_x^alpha b``.
    """
    if rho < 1:
        raise ValueError("rho must be at least 1")
    nmax = int(np.ceil(rho))
    terms = []
    for al in _multi_indices(a.grid.dim, nmax):
        if sum(al) >= rho:
            continue
        coef = 1.0 / (1j ** sum(al) * factorial(al[0]) * factorial(al[1]))
        for ca in a:
            da = ca.dxi_multi(al)
            for cb in b:
                terms.append(da * cb.dx_multi(al) * coef)
    return SymbolExpansion.from_components(terms)


def _pullback_tables(a: SymbolExpansion, chi: Diffeo, order: int):
    """Pulled-back components as functions of the source point ``x``."""
    grid = a.grid
    am = a[0]
    th = am.angles
    e1 = np.cos(th)[None, None, :]
    e2 = np.sin(th)[None, None, :]
    J = chi.jacobian()
    # zeta = t(chi') eta, zeta_j = sum_k d_j chi_k eta_k
    z1 = J[0, 0][:, :, None] * e1 + J[1, 0][:, :, None] * e2
    z2 = J[0, 1][:, :, None] * e1 + J[1, 1][:, :, None] * e2
    out = [am.at_vectors(z1, z2)]
    if order >= 2:
        sub = a[1].at_vectors(z1, z2) if len(a) > 1 else np.zeros_like(out[0])
        Hs = chi.hessian()
        for al in _multi_indices(grid.dim, 2, exact=True):
            d = am.dxi_multi(al).at_vectors(z1, z2)
            j, k = (0, 0) if al == (2, 0) else (1, 1) if al == (0, 2) else (0, 1)
            dchi = Hs[0, j, k][:, :, None] * e1 + Hs[1, j, k][:, :, None] * e2
            sub = sub - 1j * d * dchi / (factorial(al[0]) * factorial(al[1]))
        out.append(sub)
    return out


def symbol_pullback(a: SymbolExpansion, chi: Diffeo, order: int = 2) -> SymbolExpansion:
    """Symbol ``a*`` with ``T_a (u o chi) ~ (T_{a*} u) o chi`` up to two terms.

    The principal part is ``a_m(x, t(chi'(x)) eta)`` and the next term collects
    ``a_{m-1}`` plus second derivatives of ``chi``.  Values are returned on the
    grid in the image variable ``y = chi(x)``.
    """
    if order not in (1, 2):
        raise ValueError("order must be 1 or 2")
    if a.grid.dim != 2:
        raise ValueError("pullback is implemented on two-dimensional tori")
    if chi.min_jacobian() <= 0:
        raise ValueError("diffeomorphism has a non-positive Jacobian on the grid")
    grid = a.grid
    tables = _pullback_tables(a, chi, order)
    y1, y2 = grid.x1, grid.x2
    x1, x2 = chi.inverse_points(y1, y2)
    identity = np.abs(x1 - y1).max() + np.abs(x2 - y2).max() < 1e-14
    comps = []
    for j, t in enumerate(tables):
        if identity:
            v = t
        else:
            coeffs = sfft.fft2(t, axes=(0, 1)) / grid.size
            v = evaluate_at(coeffs, grid, x1, x2)
        comps.append(HomogeneousComponent(grid, a.principal_degree - j, v, a.ndir))
    return SymbolExpansion(tuple(comps))
