"""Paradifferential quantization on the torus.

``T_a u`` has Fourier coefficients

    sum_eta chi(xi - eta, eta) a_hat(xi - eta, eta) psi(eta) u_hat(eta)

where ``a_hat(theta, eta)`` is the x-Fourier coefficient of ``a(., eta)``.
The sum is organised by symbol offsets ``theta``: for each ``theta`` with a
non-negligible coefficient the weights are formed on the whole ``eta``
lattice and scattered to ``eta + theta``.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Callable, Optional, Sequence, Union

import numpy as np
from scipy import fft as sfft
from scipy import stats

from .symbolcalc import HomogeneousComponent, SymbolExpansion
from .torus import FourierField, TorusGrid, random_field, smoothstep


@dataclass(frozen=True)
class CutoffPair:
    """Admissible cutoff ``chi(theta, eta)`` with low-frequency cutoff ``psi(eta)``.

    ``chi = 1`` for ``|theta| <= eps1 |eta|`` and ``chi = 0`` for ``|theta| >= eps2 |eta|``;
    ``psi = 0`` for ``|eta| <= 1`` and ``psi = 1`` for ``|eta| >= 2``.
    """

    eps1: float = 0.1
    eps2: float = 0.2

    def __post_init__(self):
        if not 0 < self.eps1 < self.eps2 < 1:
            raise ValueError("need 0 < eps1 < eps2 < 1")

    def chi(self, theta_abs, eta_abs):
        eta_abs = np.asarray(eta_abs, float)
        with np.errstate(divide="ignore", invalid="ignore"):
            ratio = np.where(eta_abs > 0, theta_abs / np.where(eta_abs > 0, eta_abs, 1.0), np.inf)
        return 1.0 - smoothstep((ratio - self.eps1) / (self.eps2 - self.eps1))

    def psi(self, eta_abs):
        return smoothstep(np.asarray(eta_abs, float) - 1.0)


DEFAULT_CUTOFF = CutoffPair()


def _freq_vectors(grid: TorusGrid):
    k1 = np.rint(np.fft.fftfreq(grid.n1) * grid.n1).astype(int)
    k2 = np.rint(np.fft.fftfreq(grid.n2) * grid.n2).astype(int)
    return k1, k2


def _symbol_spectrum(comp: HomogeneousComponent):
    """Angular modes and their x-Fourier coefficients, shape ``(n1s, n2s, M)``."""
    modes, F = comp.angular_modes()
    g = comp.grid
    full = np.broadcast_to(F, g.shape + F.shape[2:])
    if F.shape[0] == 1 and F.shape[1] == 1:
        hat = np.zeros(g.shape + F.shape[2:], complex)
        hat[0, 0] = F[0, 0]
    else:
        hat = sfft.fft2(full, axes=(0, 1)) / g.size
    return modes, hat


def _as_expansion(a) -> SymbolExpansion:
    if isinstance(a, SymbolExpansion):
        return a
    if isinstance(a, HomogeneousComponent):
        return SymbolExpansion((a,))
    if isinstance(a, FourierField):
        return SymbolExpansion((HomogeneousComponent.from_field(a, 4 if a.grid.dim == 2 else 2),))
    raise TypeError("symbol must be a SymbolExpansion, HomogeneousComponent or FourierField")


def apply_paradiff(a, u: FourierField, cut: CutoffPair = DEFAULT_CUTOFF,
                   rtol: float = 1e-15) -> FourierField:
    """Apply the paradifferential operator ``T_a`` to ``u``.

    Parameters
    ----------
    a : SymbolExpansion, HomogeneousComponent or FourierField
        Symbol.  Its grid may be coarser than that of ``u`` but must share ``ell``
        and dimension; its x-spectrum is then embedded in the finer lattice.
    u : FourierField
    cut : CutoffPair
    rtol : float
        Symbol Fourier coefficients below ``rtol`` times the largest are skipped.
    """
    a = _as_expansion(a)
    gs, gu = a.grid, u.grid
    if gs.ell != gu.ell or gs.dim != gu.dim or gs.n1 > gu.n1 or gs.n2 > gu.n2:
        raise ValueError("symbol grid must be a coarsening of the field grid with the same ell")
    n1, n2 = gu.shape
    uh_full = np.where(gu.nyquist_mask, 0.0, u.coeffs) * cut.psi(gu.absxi)
    live = np.nonzero(uh_full)
    if live[0].size == 0:
        return FourierField.zeros(gu)
    # work only on the frequencies carried by u
    eta1, eta2 = gu.xi1[live], gu.xi2[live]
    r = np.hypot(eta1, eta2)
    phi = np.arctan2(eta2, eta1)
    uh = uh_full[live]
    rmax = float(r.max())
    spectra = []
    scale = 0.0
    for comp in a:
        modes, hat = _symbol_spectrum(comp)
        spectra.append((comp.degree, modes, hat))
        scale = max(scale, float(np.abs(hat).max(initial=0.0)))
    if scale == 0.0:
        return FourierField.zeros(gu)
    s1, s2 = _freq_vectors(gs)
    out = np.zeros(gu.shape, complex)
    lo1, hi1 = -(n1 // 2) + 1, n1 // 2 - 1
    lo2, hi2 = (-(n2 // 2) + 1, n2 // 2 - 1) if n2 > 1 else (0, 0)
    k1u, k2u = _freq_vectors(gu)
    K1, K2 = k1u[live[0]], k2u[live[1]]
    phases = {}
    powers = {}
    for i1, t1 in enumerate(s1):
        for i2, t2 in enumerate(s2):
            if gs.n1 > 1 and i1 == gs.n1 // 2 or gs.n2 > 1 and i2 == gs.n2 // 2:
                continue
            tabs = np.hypot(t1, t2 / gs.ell)
            if tabs >= cut.eps2 * rmax:
                continue
            w = 0.0
            any_term = False
            for deg, modes, hat in spectra:
                coef = hat[i1, i2]
                keep = np.abs(coef) > rtol * scale
                if not keep.any():
                    continue
                any_term = True
                ang = 0.0
                for m, cm in zip(modes[keep], coef[keep]):
                    e = phases.get(m)
                    if e is None:
                        e = phases[m] = np.exp(1j * m * phi)
                    ang = ang + cm * e
                if deg != 0:
                    p = powers.get(deg)
                    if p is None:
                        p = powers[deg] = r ** deg
                    ang = ang * p
                w = w + ang
            if not any_term:
                continue
            contrib = w * cut.chi(tabs, r) * uh
            T1, T2 = K1 + t1, K2 + t2
            ok = (T1 >= lo1) & (T1 <= hi1) & (T2 >= lo2) & (T2 <= hi2)
            # the shift by theta is injective, so plain fancy-index accumulation is safe
            out[T1[ok] % n1, T2[ok] % n2] += contrib[ok]
    return FourierField(gu, out)


def paraproduct(b: FourierField, u: FourierField, cut: CutoffPair = DEFAULT_CUTOFF) -> FourierField:
    """Paraproduct ``T_b u`` for a function ``b`` of ``x`` only."""
    return apply_paradiff(b, u, cut)


def fourier_multiplier(q: Union[np.ndarray, Callable], u: FourierField) -> FourierField:
    """``q(D) u``; ``q`` is a table on the lattice or a function of ``(xi1, xi2)``."""
    g = u.grid
    table = q(g.xi1, g.xi2) if callable(q) else np.asarray(q)
    return u.with_coeffs(u.coeffs * table, "none")


def eta_cutoff(t):
    """Smooth even cutoff vanishing on ``[-1/2, 1/2]`` and equal to one for ``|t| >= 1``."""
    return smoothstep(2.0 * np.abs(np.asarray(t, float)) - 1.0)


def j_profile(s):
    """Step profile: 0 for ``s <= 0.8``, 1 for ``s >= 0.9``."""
    return smoothstep((np.asarray(s, float) - 0.8) / 0.1)


@dataclass(frozen=True, eq=False)
class MultiplierBank:
    """Lattice tables of ``eta(xi1)``, ``j0``, ``j-`` and ``j+`` for a grid."""

    grid: TorusGrid

    @property
    def eta(self) -> np.ndarray:
        return eta_cutoff(self.grid.xi1)

    def _j(self, sign: float) -> np.ndarray:
        g = self.grid
        r = g.absxi
        with np.errstate(divide="ignore", invalid="ignore"):
            s = np.where(r > 0, (r + sign * g.xi2) / (2 * np.where(r > 0, r, 1.0)), 0.0)
        return np.where(r > 0, j_profile(s), 0.0)

    @property
    def j_plus(self) -> np.ndarray:
        return self._j(1.0)

    @property
    def j_minus(self) -> np.ndarray:
        return self._j(-1.0)

    @property
    def j_zero(self) -> np.ndarray:
        return 1.0 - self.j_plus - self.j_minus

    # cone constants induced by the profile: j+ = 0 below xi2 = C1 |xi1|, j+ = 1 above C2 |xi1|
    C1 = 0.75
    C2 = 4.0 / 3.0


def dx1_inverse(u: FourierField, k: int = 1) -> FourierField:
    """Apply the multiplier ``eta(xi1) (i xi1)^(-k)``."""
    if k < 0:
        raise ValueError("k must be non-negative")
    g = u.grid
    xi1 = g.xi1
    with np.errstate(divide="ignore", invalid="ignore"):
        q = np.where(xi1 != 0, eta_cutoff(xi1) * (1j * np.where(xi1 != 0, xi1, 1.0)) ** (-k), 0.0)
    if k == 0:
        q = eta_cutoff(xi1)
    if k % 2:
        q = np.where(g.nyquist_mask, 0.0, q)
    return fourier_multiplier(q, u)


@dataclass(frozen=True)
class OrderEstimate:
    slope: float
    width: float
    bands: tuple
    ratios: tuple

    def to_json(self) -> dict:
        return {"slope": self.slope, "width": self.width, "bands": list(self.bands),
                "ratios": list(self.ratios)}


def band_field(grid: TorusGrid, k: int, rng: np.random.Generator, parity="none") -> FourierField:
    """Real random field with unit L2 norm and spectrum in ``2^(k-1/2) <= |xi| < 2^(k+1/2)``."""
    lo, hi = 2.0 ** (k - 0.5), 2.0 ** (k + 0.5)
    f = random_field(grid, rng, kmax=np.nextafter(hi, 0), kmin=lo, parity=parity)
    n = f.l2()
    if n == 0:
        raise ValueError(f"band {k} holds no lattice frequencies on this grid")
    return f / n


def operator_order_probe(apply: Callable[[FourierField], FourierField], grid: TorusGrid,
                         bands: Sequence[int], trials: int = 4,
                         rng: Optional[np.random.Generator] = None, parity="none") -> OrderEstimate:
    """Empirical operator order from band-limited random inputs.

    For each dyadic band the largest gain ``||apply(u)|| / ||u||`` over ``trials``
    unit inputs is recorded; the slope of its logarithm against ``k log 2`` is the
    order estimate.  ``width`` is the half-width of a 95% confidence interval.
    """
    bands = list(bands)
    if len(bands) < 3:
        raise ValueError("need at least three bands")
    rng = np.random.default_rng() if rng is None else rng
    ratios = []
    for k in bands:
        best = 0.0
        for _ in range(trials):
            u = band_field(grid, k, rng, parity)
            best = max(best, apply(u).l2() / u.l2())
        ratios.append(max(best, 1e-300))
    x = np.array(bands, float) * np.log(2.0)
    y = np.log(ratios)
    fit = stats.linregress(x, y)
    tq = stats.t.ppf(0.975, len(bands) - 2) if len(bands) > 2 else np.inf
    return OrderEstimate(float(fit.slope), float(tq * fit.stderr), tuple(bands), tuple(ratios))
