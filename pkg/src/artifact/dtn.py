"""Dirichlet-Neumann operator from a flattened elliptic solve, and its paralinearization.

The fluid domain ``{y < sigma(x)}`` is mapped to the strip ``-L <= z <= 0`` by

    y = z + rho(z) sigma(x),   rho(z) = cos^2(pi z / (2 L)),

so the map is the identity (with vanishing z-derivative) at ``z = -L``.  Below
that level the potential is harmonic in a flat half-space, and the bottom
condition ``v_z = |D| v`` is exact.  With ``blend=False`` the map is
``y = z + sigma(x)`` and the same bottom condition is an approximation.

The transformed potential ``v(x, z) = phi(x, y)`` solves

    div_x(J grad v - rho v_z grad sigma) + d_z(Q v_z - rho grad sigma . grad v) = 0,

with ``J = 1 + rho' sigma`` and ``Q = (1 + rho^2 |grad sigma|^2) / J``.  Written as
``Lap v + v_zz = F(v)`` it is solved by GMRES preconditioned with the flat
operator, Fourier in ``x`` and Chebyshev-Gauss-Lobatto in ``z``.
"""

from __future__ import annotations

import io
from functools import lru_cache
from dataclasses import dataclass, field
from typing import Optional

import numpy as np
from scipy.sparse.linalg import LinearOperator, gmres

from .paradiff import CutoffPair, DEFAULT_CUTOFF, apply_paradiff, paraproduct
from .symbolcalc import dtn_symbol_expansion
from .torus import FourierField, TorusGrid, band_norms, pad_values, padded_shape, truncate_values


class SolverDivergence(RuntimeError):
    """The elliptic iteration failed to reach its tolerance."""


@dataclass(frozen=True)
class SolverConfig:
    """Options of the flattened elliptic solve.

    ``bottom`` is ``"radiation"`` (infinite depth) or ``"neumann"`` (flat bottom at ``y = -depth``).
    """

    depth: float = 1.5
    nz: int = 32
    tol: float = 1e-12
    max_iter: int = 200
    blend: bool = True
    bottom: str = "radiation"

    def __post_init__(self):
        if self.depth <= 0:
            raise ValueError("depth must be positive")
        if self.nz < 4:
            raise ValueError("nz must be at least 4")
        if self.bottom not in ("radiation", "neumann"):
            raise ValueError("bottom must be 'radiation' or 'neumann'")

    def to_json(self) -> dict:
        return dict(depth=self.depth, nz=self.nz, tol=self.tol, max_iter=self.max_iter,
                    blend=self.blend, bottom=self.bottom)


def cheb_points(n: int) -> np.ndarray:
    """Gauss-Lobatto points ``cos(pi j / n)``, from +1 down to -1."""
    return np.cos(np.pi * np.arange(n + 1) / n)


def cheb_matrix(n: int) -> np.ndarray:
    """Chebyshev differentiation matrix on ``cheb_points(n)``."""
    s = cheb_points(n)
    c = np.ones(n + 1)
    c[0] = c[-1] = 2.0
    c *= (-1.0) ** np.arange(n + 1)
    ds = s[:, None] - s[None, :]
    D = np.outer(c, 1.0 / c) / (ds + np.eye(n + 1))
    D -= np.diag(D.sum(axis=1))
    return D


@dataclass(frozen=True, eq=False)
class FlattenedPotential:
    """Solution of the flattened problem at the vertical collocation nodes.

    ``coeffs[..., j]`` holds the x-Fourier coefficients of ``v(., z[j])``; ``z[0] = 0``.
    """

    grid: TorusGrid
    depth: float
    nz: int
    z: np.ndarray
    coeffs: np.ndarray
    dz: np.ndarray
    iterations: int
    residual: float
    config: SolverConfig

    def slice(self, j: int) -> FourierField:
        return FourierField(self.grid, self.coeffs[:, :, j])

    def surface_dz(self) -> FourierField:
        """``v_z`` at ``z = 0``."""
        return FourierField(self.grid, self.coeffs @ self.dz[0])


def _blend_profile(z, depth, blend):
    if not blend:
        one = np.ones_like(z)
        return one, 0 * one, 0 * one
    a = np.pi / depth
    rho = 0.5 * (1.0 + np.cos(a * z))
    return rho, -0.5 * a * np.sin(a * z), -0.5 * a * a * np.cos(a * z)


class _FlatSolver:
    """Per-|k| inverses of ``D_zz - |k|^2`` with Dirichlet top and Robin/Neumann bottom."""

    def __init__(self, grid: TorusGrid, nz: int, depth: float, bottom: str):
        self.grid = grid
        n = nz + 1
        D = cheb_matrix(nz) * (2.0 / depth)
        D2 = D @ D
        k = grid.absxi.ravel()
        uniq, inv = np.unique(np.round(k, 12), return_inverse=True)
        self.groups = [np.nonzero(inv == i)[0] for i in range(uniq.size)]
        self.inverses = []
        for kk in uniq:
            M = D2 - kk * kk * np.eye(n)
            M[0] = 0.0
            M[0, 0] = 1.0
            M[-1] = D[-1] - (kk if bottom == "radiation" else 0.0) * np.eye(n)[-1]
            self.inverses.append(np.linalg.inv(M))
        self.D, self.D2, self.n = D, D2, n

    def solve(self, rhs: np.ndarray) -> np.ndarray:
        """rhs: (n1*n2, nz+1) with boundary data in the first and last columns."""
        out = np.empty_like(rhs)
        for idx, Minv in zip(self.groups, self.inverses):
            out[idx] = rhs[idx] @ Minv.T
        return out


@lru_cache(maxsize=8)
def _flat_solver(grid: TorusGrid, nz: int, depth: float, bottom: str) -> _FlatSolver:
    return _FlatSolver(grid, nz, depth, bottom)


def _padded(grid, f: FourierField):
    return pad_values(f.coeffs).real


def solve_flattened(sigma: FourierField, psi: FourierField, config: SolverConfig = SolverConfig(),
                    depth: Optional[float] = None, nz: Optional[int] = None) -> FlattenedPotential:
    """Solve for the harmonic extension of ``psi`` below the surface ``sigma``.

    Parameters
    ----------
    sigma, psi : FourierField
        Real surface elevation and Dirichlet datum on the same grid.
    config : SolverConfig
        Depth, vertical resolution, tolerance and map options.  ``depth`` and
        ``nz`` override the config when given.

    Raises
    ------
    SolverDivergence
        If GMRES does not reach ``config.tol`` within ``config.max_iter`` iterations.
    """
    if sigma.grid != psi.grid:
        raise ValueError("sigma and psi must share a grid")
    if not (sigma.is_real() and psi.is_real()):
        raise ValueError("sigma and psi must be real")
    cfg = SolverConfig(depth if depth is not None else config.depth, nz if nz is not None else config.nz,
                       config.tol, config.max_iter, config.blend, config.bottom)
    grid = sigma.grid
    L, nz = cfg.depth, cfg.nz
    if cfg.blend and float(np.abs(sigma.values).max()) * np.pi / (2 * L) >= 0.9:
        raise ValueError("surface amplitude too large for the blended map at this depth")
    n = nz + 1
    z = L * (cheb_points(nz) - 1.0) / 2.0
    flat = _flat_solver(grid, nz, L, cfg.bottom)
    D, D2 = flat.D, flat.D2
    psi_hat = psi.coeffs.copy()
    psi_hat[0, 0] = 0.0
    psi_hat[grid.nyquist_mask] = 0.0

    # coefficient fields on the padded grid
    pshape = padded_shape(grid.shape)
    sig_p = _padded(grid, sigma)
    g1_p = _padded(grid, sigma.dx1())
    g2_p = _padded(grid, sigma.dx2()) if grid.dim == 2 else np.zeros(pshape)
    lap_p = _padded(grid, sigma.laplacian())
    gsq = (g1_p**2 + g2_p**2)[:, :, None]
    rho, drho, ddrho = (a[None, None, :] for a in _blend_profile(z, L, cfg.blend))
    J = 1.0 + drho * sig_p[:, :, None]
    Q = (1.0 + rho**2 * gsq) / J
    Qz = 2 * rho * drho * gsq / J - (1.0 + rho**2 * gsq) * ddrho * sig_p[:, :, None] / J**2
    c_lap = -drho * sig_p[:, :, None]          # multiplies Lap v
    c_zz = 1.0 - Q                              # multiplies v_zz
    c_z = rho * lap_p[:, :, None] - Qz          # multiplies v_z
    c_g1 = 2 * rho * g1_p[:, :, None]           # multiplies d1 v_z
    c_g2 = 2 * rho * g2_p[:, :, None]           # multiplies d2 v_z
    nonflat = bool(np.abs(sig_p).max() > 0)
    ik1 = (1j * grid.xi1)[:, :, None]
    ik2 = (1j * grid.xi2)[:, :, None]
    lapk = (-(grid.absxi**2))[:, :, None]
    nyq = grid.nyquist_mask[:, :, None]
    ik1 = np.where(nyq, 0.0, ik1)
    ik2 = np.where(nyq, 0.0, ik2)

    def forcing(vh):
        """F(v) at all nodes, as x-coefficients, shape (n1, n2, n)."""
        vz = vh @ D.T
        vzz = vh @ D2.T
        phys = (c_lap * pad_values(lapk * vh).real + c_zz * pad_values(vzz).real
                + c_z * pad_values(vz).real + c_g1 * pad_values(ik1 * vz).real
                + c_g2 * pad_values(ik2 * vz).real)
        return truncate_values(phys, grid.shape)

    shape3 = grid.shape + (n,)

    def precond_apply(rhs3):
        r = rhs3.reshape(-1, n)
        return flat.solve(r).reshape(shape3)

    def operator(x):
        vh = x.reshape(shape3)
        f = forcing(vh)
        f[:, :, 0] = 0.0
        f[:, :, -1] = 0.0
        return (vh - precond_apply(f)).ravel()

    b3 = np.zeros(shape3, complex)
    b3[:, :, 0] = psi_hat
    b = precond_apply(b3).ravel()
    iters = [0]
    if not nonflat or not np.any(psi_hat):
        sol = b
    else:
        A = LinearOperator((b.size, b.size), matvec=operator, dtype=complex)

        def cb(_):
            iters[0] += 1

        sol, info = gmres(A, b, rtol=cfg.tol, atol=0.0, restart=60, maxiter=cfg.max_iter,
                          callback=cb, callback_type="pr_norm")
        if info != 0:
            res = np.linalg.norm(operator(sol) - b) / max(np.linalg.norm(b), 1e-300)
            raise SolverDivergence(f"elliptic solve did not converge: relative residual {res:.3e}")
    vh = sol.reshape(shape3)
    res = _discrete_residual(vh, psi_hat, forcing, D, D2, lapk, cfg.bottom, grid)
    return FlattenedPotential(grid, L, nz, z, vh, D, iters[0], res, cfg)


def _discrete_residual(vh, psi_hat, forcing, D, D2, lapk, bottom, grid) -> float:
    """Relative max residual of the collocated equations and boundary conditions."""
    lhs = vh @ D2.T + lapk * vh - forcing(vh)
    interior = np.abs(lhs[:, :, 1:-1]).max(initial=0.0)
    top = np.abs(vh[:, :, 0] - psi_hat).max()
    k = grid.absxi if bottom == "radiation" else 0.0 * grid.absxi
    bot = np.abs(vh @ D[-1] - k * vh[:, :, -1]).max()
    scale = max(np.abs(psi_hat).max() * max(1.0, float(grid.absxi.max()) ** 2), 1e-300)
    return float(max(interior, top, bot) / scale)


def dtn_trace(sigma: FourierField, psi: FourierField, pot: FlattenedPotential) -> FourierField:
    """``(1 + |grad sigma|^2) v_z - grad sigma . grad v`` at ``z = 0``."""
    vz = pot.surface_dz()
    p = psi.zero_mean()
    g1, g2 = sigma.dx1(), sigma.dx2()
    gsq = g1 * g1 + g2 * g2
    out = vz + gsq * vz - g1 * p.dx1() - g2 * p.dx2()
    return out.real_part()


def dtn_apply(sigma: FourierField, psi: FourierField, config: SolverConfig = SolverConfig()) -> FourierField:
    """Dirichlet-Neumann operator ``G(sigma) psi``."""
    pot = solve_flattened(sigma, psi, config)
    return dtn_trace(sigma, psi, pot)


# ----------------------------------------------------------------------
# Boundary coefficients and paralinearization
# ----------------------------------------------------------------------

@dataclass(frozen=True, eq=False)
class BoundaryCoefficients:
    """Vertical velocity ``b``, horizontal velocity ``V = c + grad psi - b grad sigma`` and ``a = mu + V . grad b``."""

    b: FourierField
    V1: FourierField
    V2: FourierField
    taylor: FourierField
    mu: float
    travelling: bool = True

    @property
    def divV(self) -> FourierField:
        return self.V1.dx1() + self.V2.dx2()


def boundary_coefficients(sigma: FourierField, psi: FourierField, Gpsi: FourierField, mu: float,
                          travelling: bool = True) -> BoundaryCoefficients:
    """Coefficients of the paralinearized system at the state ``(sigma, psi)``."""
    g1, g2 = sigma.dx1(), sigma.dx2()
    p1, p2 = psi.dx1(), psi.dx2()
    num = g1 * p1 + g2 * p2 + Gpsi
    den = 1.0 + g1 * g1 + g2 * g2
    b = _divide(num, den)
    V1 = p1 - b * g1 + (1.0 if travelling else 0.0)
    V2 = p2 - b * g2
    taylor = V1 * b.dx1() + V2 * b.dx2() + mu
    return BoundaryCoefficients(b.real_part(), V1.real_part(), V2.real_part(), taylor.real_part(),
                                float(mu), travelling)


def _divide(num: FourierField, den: FourierField) -> FourierField:
    """Pointwise quotient on the padded grid."""
    g = num.grid
    q = pad_values(num.coeffs) / pad_values(den.coeffs)
    return FourierField(g, truncate_values(q, g.shape))


def good_unknown(sigma: FourierField, psi: FourierField, b: FourierField,
                 cut: CutoffPair = DEFAULT_CUTOFF) -> FourierField:
    """``psi - T_b sigma``."""
    return psi - paraproduct(b, sigma, cut)


@dataclass(frozen=True, eq=False)
class DtNReport:
    """Trace, coefficients, good unknown and paralinearization remainder with band diagnostics."""

    trace: FourierField
    coeffs: BoundaryCoefficients
    good_unknown: FourierField
    remainder: FourierField
    paralinear: FourierField
    order: int
    diagnostics: dict = field(default_factory=dict)

    def to_csv(self) -> str:
        buf = io.StringIO()
        buf.write("band,remainder,sigma,psi,trace\n")
        d = self.diagnostics
        for k, row in enumerate(zip(d["remainder"], d["sigma"], d["psi"], d["trace"])):
            buf.write(f"{k}," + ",".join(f"{x:.6e}" for x in row) + "\n")
        return buf.getvalue()


def paralin_remainder(sigma: FourierField, psi: FourierField, order: int = 3,
                      config: SolverConfig = SolverConfig(), ndir: int = 64,
                      cut: CutoffPair = DEFAULT_CUTOFF, Gpsi: Optional[FourierField] = None) -> DtNReport:
    """Remainder ``R = G psi - [T_lambda (psi - T_b sigma) - T_V . grad sigma - T_{div V} sigma]``.

    ``V`` here is ``grad psi - b grad sigma`` (no frame velocity).
    """
    if order not in (1, 2, 3):
        raise ValueError("order must be 1, 2 or 3")
    psi0 = psi.zero_mean()
    G = dtn_apply(sigma, psi0, config) if Gpsi is None else Gpsi
    co = boundary_coefficients(sigma, psi0, G, 0.0, travelling=False)
    u = good_unknown(sigma, psi0, co.b, cut)
    lam = dtn_symbol_expansion(sigma, order, ndir)
    main = apply_paradiff(lam, u, cut)
    main = main - paraproduct(co.V1, sigma.dx1(), cut) - paraproduct(co.V2, sigma.dx2(), cut)
    main = main - paraproduct(co.divV, sigma, cut)
    main = main.real_part()
    R = G - main
    diag = {"remainder": band_norms(R).tolist(), "sigma": band_norms(sigma).tolist(),
            "psi": band_norms(psi0).tolist(), "trace": band_norms(G).tolist()}
    return DtNReport(G, co, u, R, main, order, diag)


@dataclass(frozen=True)
class TaylorSign:
    minimum: float
    location: tuple
    positive: bool


def taylor_sign_check(coeffs: BoundaryCoefficients) -> TaylorSign:
    """Grid minimum of the Taylor coefficient and where it is attained."""
    v = coeffs.taylor.values.real
    i = np.unravel_index(np.argmin(v), v.shape)
    g = coeffs.taylor.grid
    loc = (float(g.x1[i]), float(g.x2[i]))
    m = float(v[i])
    return TaylorSign(m, loc, m > 0)
