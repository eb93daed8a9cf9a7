"""Periodic grids, spectral fields and Littlewood-Paley blocks on the torus.

The torus is (R / 2pi Z) x (R / 2pi ell Z).  Fields are stored through their
normalized Fourier coefficients ``coeffs = fft2(values) / (n1 * n2)`` in numpy
FFT order, so the coefficient of ``exp(i (k1 x1 + k2 x2 / ell))`` is
``coeffs[k1 % n1, k2 % n2]``.
"""

from __future__ import annotations

import io
import json
from dataclasses import dataclass
from typing import Optional, Sequence, Tuple

import numpy as np
from scipy import fft as sfft

PARITIES = ("none", "ee", "oe", "eo", "oo")
_SIGN = {"e": 1.0, "o": -1.0}


def smoothstep(s):
    """Quintic ramp 6s^5 - 15s^4 + 10s^3 clipped to [0, 1] (C^2, monotone)."""
    s = np.clip(np.asarray(s, dtype=float), 0.0, 1.0)
    return s * s * s * (10.0 - 15.0 * s + 6.0 * s * s)


def bump(t):
    """Radial bump: 1 on |t| <= 1.1, 0 on |t| >= 1.9, quintic ramp between."""
    a = np.abs(t)
    return np.where(a <= 1.1, 1.0, np.where(a >= 1.9, 0.0, smoothstep((1.9 - a) / 0.8)))


def _is_pow2(n: int) -> bool:
    return n >= 1 and (n & (n - 1)) == 0


def normalize_parity(p) -> str:
    if p is None:
        return "none"
    if isinstance(p, (tuple, list)):
        p = "".join(p)
    p = str(p).replace("(", "").replace(")", "").replace(",", "").replace(" ", "")
    if p not in PARITIES:
        raise ValueError(f"unknown parity {p!r}")
    return p


@dataclass(frozen=True)
class TorusGrid:
    """Uniform grid on the torus.  ``dim == 1`` means ``n2 == 1``."""

    n1: int
    n2: int
    ell: float = 1.0
    dim: int = 2

    def __post_init__(self):
        if self.dim not in (1, 2):
            raise ValueError("dim must be 1 or 2")
        if self.dim == 1 and self.n2 != 1:
            raise ValueError("a one-dimensional grid has n2 == 1")
        if not _is_pow2(self.n1) or not _is_pow2(self.n2):
            raise ValueError("grid sizes must be powers of two")
        if self.dim == 2 and self.n2 < 2:
            raise ValueError("a two-dimensional grid needs n2 >= 2")
        if not self.ell > 0:
            raise ValueError("ell must be positive")

    @classmethod
    def line(cls, n1: int) -> "TorusGrid":
        return cls(n1, 1, 1.0, 1)

    @property
    def shape(self) -> Tuple[int, int]:
        return (self.n1, self.n2)

    @property
    def size(self) -> int:
        return self.n1 * self.n2

    @property
    def area(self) -> float:
        return 2 * np.pi * (2 * np.pi * self.ell if self.dim == 2 else 1.0)

    @property
    def x1(self) -> np.ndarray:
        return (2 * np.pi * np.arange(self.n1) / self.n1)[:, None] * np.ones((1, self.n2))

    @property
    def x2(self) -> np.ndarray:
        if self.dim == 1:
            return np.zeros(self.shape)
        return np.ones((self.n1, 1)) * (2 * np.pi * self.ell * np.arange(self.n2) / self.n2)[None, :]

    @property
    def k1(self) -> np.ndarray:
        """Integer x1 frequency index, broadcast to the grid shape."""
        return np.rint(np.fft.fftfreq(self.n1) * self.n1)[:, None] * np.ones((1, self.n2))

    @property
    def k2(self) -> np.ndarray:
        return np.ones((self.n1, 1)) * np.rint(np.fft.fftfreq(self.n2) * self.n2)[None, :]

    @property
    def xi1(self) -> np.ndarray:
        return self.k1

    @property
    def xi2(self) -> np.ndarray:
        return self.k2 / self.ell

    @property
    def absxi(self) -> np.ndarray:
        return np.hypot(self.xi1, self.xi2)

    @property
    def bracket(self) -> np.ndarray:
        """<xi> = (1 + |xi|^2)^(1/2)."""
        return np.sqrt(1.0 + self.xi1**2 + self.xi2**2)

    @property
    def nyquist_mask(self) -> np.ndarray:
        """True where a frequency has no mirror partner on the lattice."""
        m = np.zeros(self.shape, dtype=bool)
        if self.n1 > 1:
            m[self.n1 // 2, :] = True
        if self.n2 > 1:
            m[:, self.n2 // 2] = True
        return m

    def neg_index(self) -> Tuple[np.ndarray, np.ndarray]:
        """Index arrays mapping k to -k (mod n) along each axis."""
        return (-np.arange(self.n1)) % self.n1, (-np.arange(self.n2)) % self.n2

    def to_json(self) -> dict:
        return {"n1": self.n1, "n2": self.n2, "ell": self.ell, "dim": self.dim}

    def refined(self, factor: int = 2) -> "TorusGrid":
        return TorusGrid(self.n1 * factor, 1 if self.dim == 1 else self.n2 * factor, self.ell, self.dim)


def _fft(values):
    return sfft.fft2(values, axes=(0, 1))


def _ifft(coeffs):
    return sfft.ifft2(coeffs, axes=(0, 1))


@dataclass(frozen=True, eq=False)
class FourierField:
    """Field on a torus grid held by its normalized Fourier coefficients."""

    grid: TorusGrid
    coeffs: np.ndarray
    parity: str = "none"

    def __post_init__(self):
        c = np.asarray(self.coeffs, dtype=complex)
        if c.shape != self.grid.shape:
            raise ValueError(f"coefficient shape {c.shape} does not match grid {self.grid.shape}")
        c.setflags(write=False)
        object.__setattr__(self, "coeffs", c)
        object.__setattr__(self, "parity", normalize_parity(self.parity))

    # construction -------------------------------------------------------
    @classmethod
    def from_values(cls, grid: TorusGrid, values, parity="none") -> "FourierField":
        v = np.asarray(values)
        if v.shape != grid.shape:
            if v.size == grid.size:
                v = v.reshape(grid.shape)
            else:
                raise ValueError(f"{v.size} samples do not match grid of {grid.size} points")
        return cls(grid, _fft(v) / grid.size, parity)

    @classmethod
    def zeros(cls, grid: TorusGrid) -> "FourierField":
        return cls(grid, np.zeros(grid.shape, complex))

    @classmethod
    def constant(cls, grid: TorusGrid, value: complex) -> "FourierField":
        c = np.zeros(grid.shape, complex)
        c[0, 0] = value
        return cls(grid, c)

    @classmethod
    def from_function(cls, grid: TorusGrid, fn, parity="none") -> "FourierField":
        return cls.from_values(grid, fn(grid.x1, grid.x2), parity)

    @classmethod
    def mode(cls, grid: TorusGrid, k1: int, k2: int = 0, amp: complex = 1.0) -> "FourierField":
        c = np.zeros(grid.shape, complex)
        c[k1 % grid.n1, k2 % grid.n2] = amp
        return cls(grid, c)

    def with_coeffs(self, coeffs, parity=None) -> "FourierField":
        return FourierField(self.grid, coeffs, self.parity if parity is None else parity)

    # values -------------------------------------------------------------
    def complex_values(self) -> np.ndarray:
        return _ifft(self.coeffs) * self.grid.size

    @property
    def values(self) -> np.ndarray:
        """Grid samples; real when the coefficients are Hermitian."""
        v = self.complex_values()
        return v.real if self.is_real() else v

    def is_real(self, rtol: float = 1e-12) -> bool:
        return self.hermitian_defect() <= rtol * max(np.abs(self.coeffs).max(), 1e-300)

    def hermitian_defect(self) -> float:
        i1, i2 = self.grid.neg_index()
        c = self.coeffs
        d = c - np.conj(c[i1][:, i2])
        d[self.grid.nyquist_mask] = 0.0
        return float(np.abs(d).max()) if d.size else 0.0

    # arithmetic ---------------------------------------------------------
    def _coerce(self, other):
        if isinstance(other, FourierField):
            if other.grid != self.grid:
                raise ValueError("grid mismatch")
            return other.coeffs
        return None

    def __add__(self, other):
        c = self._coerce(other)
        if c is None:
            out = self.coeffs.copy()
            out[0, 0] += other
            return self.with_coeffs(out, "none")
        p = self.parity if self.parity == other.parity else "none"
        return FourierField(self.grid, self.coeffs + c, p)

    __radd__ = __add__

    def __neg__(self):
        return self.with_coeffs(-self.coeffs)

    def __sub__(self, other):
        return self + (-other)

    def __rsub__(self, other):
        return (-self) + other

    def __mul__(self, other):
        if isinstance(other, FourierField):
            return self.product(other)
        return self.with_coeffs(self.coeffs * other)

    __rmul__ = __mul__

    def __truediv__(self, scalar):
        return self.with_coeffs(self.coeffs / scalar)

    def product(self, other: "FourierField", dealias: bool = True) -> "FourierField":
        """Pointwise product, formed on a 3/2-padded grid when ``dealias``."""
        if other.grid != self.grid:
            raise ValueError("grid mismatch")
        if not dealias:
            return FourierField.from_values(self.grid, self.complex_values() * other.complex_values())
        a, b = pad_values(self.coeffs), pad_values(other.coeffs)
        return FourierField(self.grid, truncate_values(a * b, self.grid.shape))

    def apply(self, fn) -> "FourierField":
        """Pointwise nonlinear map evaluated on the 3/2-padded grid."""
        return FourierField(self.grid, truncate_values(fn(pad_values(self.coeffs)), self.grid.shape))

    # calculus -----------------------------------------------------------
    def dx1(self, order: int = 1) -> "FourierField":
        return self.with_coeffs(self.coeffs * _deriv_symbol(self.grid, 0, order), "none")

    def dx2(self, order: int = 1) -> "FourierField":
        return self.with_coeffs(self.coeffs * _deriv_symbol(self.grid, 1, order), "none")

    def grad(self) -> Tuple["FourierField", "FourierField"]:
        return self.dx1(), self.dx2()

    def laplacian(self) -> "FourierField":
        return self.with_coeffs(-self.coeffs * self.grid.absxi**2)

    def mean(self) -> complex:
        c = self.coeffs[0, 0]
        return c.real if self.is_real() else c

    def zero_mean(self) -> "FourierField":
        c = self.coeffs.copy()
        c[0, 0] = 0.0
        return self.with_coeffs(c)

    def lowpass(self, frac: float = 2.0 / 3.0) -> "FourierField":
        g = self.grid
        keep = (np.abs(g.k1) <= frac * g.n1 / 2) & (np.abs(g.k2) <= frac * g.n2 / 2)
        return self.with_coeffs(np.where(keep, self.coeffs, 0.0))

    def l2(self) -> float:
        return sobolev_norm(self, 0.0)

    def sup(self) -> float:
        return float(np.abs(self.values).max())

    def conj(self) -> "FourierField":
        i1, i2 = self.grid.neg_index()
        return self.with_coeffs(np.conj(self.coeffs[i1][:, i2]))

    def real_part(self) -> "FourierField":
        return FourierField(self.grid, 0.5 * (self.coeffs + self.conj().coeffs), self.parity)

    def reflect(self, axis: int) -> "FourierField":
        """f(-x1, x2) for axis 0, f(x1, -x2) for axis 1."""
        i1, i2 = self.grid.neg_index()
        c = self.coeffs[i1, :] if axis == 0 else self.coeffs[:, i2]
        return self.with_coeffs(c)

    def eval_at(self, y1, y2) -> np.ndarray:
        return evaluate_at(self.coeffs, self.grid, y1, y2)

    # io -----------------------------------------------------------------
    def to_csv(self) -> str:
        """CSV with rows ``k1,k2,re,im`` and a JSON header comment."""
        g = self.grid
        buf = io.StringIO()
        buf.write("# " + json.dumps({"grid": g.to_json(), "parity": self.parity}) + "\n")
        buf.write("k1,k2,re,im\n")
        k1, k2 = g.k1.astype(int).ravel(), g.k2.astype(int).ravel()
        c = self.coeffs.ravel()
        for a, b, z in zip(k1, k2, c):
            buf.write(f"{a},{b},{z.real:.17g},{z.imag:.17g}\n")
        return buf.getvalue()

    @classmethod
    def from_csv(cls, text: str) -> "FourierField":
        lines = text.splitlines()
        meta = json.loads(lines[0][2:])
        grid = TorusGrid(**meta["grid"])
        c = np.zeros(grid.shape, complex)
        for line in lines[2:]:
            if not line.strip():
                continue
            a, b, re, im = line.split(",")
            c[int(a) % grid.n1, int(b) % grid.n2] = complex(float(re), float(im))
        return cls(grid, c, meta["parity"])


def _deriv_symbol(grid: TorusGrid, axis: int, order: int) -> np.ndarray:
    xi = grid.xi1 if axis == 0 else grid.xi2
    s = (1j * xi) ** order
    if order % 2 == 1:
        s = np.where(grid.nyquist_mask, 0.0, s)
    return s


def padded_shape(shape: Sequence[int]) -> Tuple[int, ...]:
    return tuple(1 if n == 1 else 3 * n // 2 for n in shape)


def pad_values(coeffs: np.ndarray, new_shape: Optional[Sequence[int]] = None) -> np.ndarray:
    """Values on a larger grid of a spectrally truncated field (leading two axes)."""
    n1, n2 = coeffs.shape[:2]
    m1, m2 = padded_shape((n1, n2)) if new_shape is None else new_shape
    big = np.zeros((m1, m2) + coeffs.shape[2:], complex)
    h1, h2 = n1 // 2, n2 // 2
    r1 = np.r_[0:h1, m1 - (n1 - h1):m1] if n1 > 1 else np.array([0])
    r2 = np.r_[0:h2, m2 - (n2 - h2):m2] if n2 > 1 else np.array([0])
    c = coeffs.copy()
    if n1 > 1:
        c[h1] = 0.0
    if n2 > 1:
        c[:, h2] = 0.0
    big[np.ix_(r1, r2)] = c
    return sfft.ifft2(big, axes=(0, 1)) * (m1 * m2)


def truncate_values(values: np.ndarray, shape: Sequence[int]) -> np.ndarray:
    """Normalized coefficients on ``shape`` of padded-grid samples."""
    m1, m2 = values.shape[:2]
    n1, n2 = shape
    big = sfft.fft2(values, axes=(0, 1)) / (m1 * m2)
    h1, h2 = n1 // 2, n2 // 2
    r1 = np.r_[0:h1, m1 - (n1 - h1):m1] if n1 > 1 else np.array([0])
    r2 = np.r_[0:h2, m2 - (n2 - h2):m2] if n2 > 1 else np.array([0])
    out = big[np.ix_(r1, r2)]
    if n1 > 1:
        out[h1] = 0.0
    if n2 > 1:
        out[:, h2] = 0.0
    return out


def evaluate_at(coeffs: np.ndarray, grid: TorusGrid, y1, y2, chunk: int = 2048) -> np.ndarray:
    """Trigonometric interpolant at scattered points (direct summation).

    ``coeffs`` may carry trailing axes; output has shape ``y1.shape + trailing``.
    """
    y1 = np.asarray(y1, float)
    y2 = np.asarray(y2, float)
    shp = y1.shape
    p1, p2 = y1.ravel(), np.broadcast_to(y2, shp).ravel()
    k1 = np.rint(np.fft.fftfreq(grid.n1) * grid.n1)
    k2 = np.rint(np.fft.fftfreq(grid.n2) * grid.n2) / grid.ell
    c = coeffs.reshape(grid.n1, grid.n2, -1)
    c = c.copy()
    if grid.n1 > 1:
        c[grid.n1 // 2] *= 0.0
    if grid.n2 > 1:
        c[:, grid.n2 // 2] *= 0.0
    out = np.empty((p1.size, c.shape[2]), complex)
    for s in range(0, p1.size, chunk):
        e1 = np.exp(1j * np.outer(p1[s:s + chunk], k1))
        e2 = np.exp(1j * np.outer(p2[s:s + chunk], k2))
        t = np.einsum("pk,klr->plr", e1, c)
        out[s:s + chunk] = np.einsum("plr,pl->pr", t, e2)
    return out.reshape(shp + coeffs.shape[2:])


def forward_transform(grid: TorusGrid, values, parity="none") -> FourierField:
    return FourierField.from_values(grid, values, parity)


def inverse_transform(f: FourierField) -> np.ndarray:
    return f.values


def sobolev_norm(f: FourierField, s: float) -> float:
    """(sum <xi>^(2s) |f_hat|^2)^(1/2) with normalized coefficients."""
    w = f.grid.bracket ** (2.0 * s)
    return float(np.sqrt(np.sum(w * np.abs(f.coeffs) ** 2)))


def lp_multiplier(grid: TorusGrid, k: int) -> np.ndarray:
    if k < 0:
        raise ValueError("block index must be non-negative")
    br = grid.bracket
    hi = bump(br / 2.0**k)
    if k == 0:
        return hi
    return hi - bump(br / 2.0 ** (k - 1))


def lp_block(f: FourierField, k: int) -> FourierField:
    """Dyadic block Delta_k f; its spectrum sits in 0.55*2^k < <xi> < 1.9*2^k."""
    return f.with_coeffs(f.coeffs * lp_multiplier(f.grid, k), "none")


def lp_count(grid: TorusGrid) -> int:
    """Number of blocks needed so that the blocks sum to the identity."""
    top = float(grid.bracket.max())
    k = 0
    while 1.1 * 2.0**k < top:
        k += 1
    return k + 1


def lp_blocks(f: FourierField) -> list:
    return [lp_block(f, k) for k in range(lp_count(f.grid))]


def band_norms(f: FourierField, kmax: Optional[int] = None) -> np.ndarray:
    n = lp_count(f.grid) if kmax is None else kmax + 1
    return np.array([lp_block(f, k).l2() for k in range(n)])


def enforce_parity(f: FourierField, p) -> FourierField:
    """Projection onto the parity class ``p`` ('ee', 'oe', 'eo', 'oo')."""
    p = normalize_parity(p)
    if p == "none":
        return f.with_coeffs(f.coeffs, "none")
    i1, i2 = f.grid.neg_index()
    c = f.coeffs
    c = 0.5 * (c + _SIGN[p[0]] * c[i1, :])
    if f.grid.dim == 2:
        c = 0.5 * (c + _SIGN[p[1]] * c[:, i2])
    elif p[1] == "o":
        c = np.zeros_like(c)
    return FourierField(f.grid, c, p)


def parity_defect(f: FourierField, p) -> float:
    """Sup-norm distance (in coefficients) to the parity class, relative."""
    p = normalize_parity(p)
    scale = max(np.abs(f.coeffs).max(), 1e-300)
    return float(np.abs(f.coeffs - enforce_parity(f, p).coeffs).max() / scale)


def random_field(grid: TorusGrid, rng: np.random.Generator, kmax: float = 4.0, decay: float = 0.0,
                 kmin: float = 0.0, parity="none", zero_mean: bool = False) -> FourierField:
    """Real random trigonometric polynomial with |xi| in [kmin, kmax]."""
    r = grid.absxi
    mask = (r <= kmax) & (r >= kmin) & ~grid.nyquist_mask
    amp = np.where(mask, grid.bracket ** (-decay), 0.0)
    c = (rng.standard_normal(grid.shape) + 1j * rng.standard_normal(grid.shape)) * amp
    f = FourierField(grid, c).real_part()
    if zero_mean:
        f = f.zero_mean()
    if normalize_parity(parity) != "none":
        f = enforce_parity(f, parity)
    return f
