"""Diamond-wave data, first-order Stokes waves and residuals of the travelling-wave system."""

from __future__ import annotations

import json
from dataclasses import dataclass
from typing import Optional

import numpy as np

from .dtn import BoundaryCoefficients, SolverConfig, _divide, boundary_coefficients, dtn_apply
from .torus import FourierField, TorusGrid, parity_defect

MAX_AMPLITUDE = 0.2


@dataclass(frozen=True, eq=False)
class DiamondWave:
    """Travelling-wave state ``(mu, sigma, psi)`` on the torus ``R/2pi x R/2pi ell``."""

    mu: float
    sigma: FourierField
    psi: FourierField
    eps: float = 0.0

    def __post_init__(self):
        if not self.mu > 0:
            raise ValueError("mu must be positive")
        if self.sigma.grid != self.psi.grid:
            raise ValueError("sigma and psi must share a grid")

    @property
    def grid(self) -> TorusGrid:
        return self.sigma.grid

    @property
    def ell(self) -> float:
        return self.grid.ell

    def header(self) -> dict:
        g = self.grid
        return {"mu": self.mu, "ell": g.ell, "eps": self.eps, "n1": g.n1, "n2": g.n2,
                "source": "first-order Stokes profile"}

    def to_json(self) -> str:
        return json.dumps({"header": self.header(), "sigma": self.sigma.to_csv(),
                           "psi": self.psi.to_csv()})

    @classmethod
    def from_json(cls, text: str) -> "DiamondWave":
        d = json.loads(text)
        h = d["header"]
        return cls(h["mu"], FourierField.from_csv(d["sigma"]), FourierField.from_csv(d["psi"]),
                   h.get("eps", 0.0))


@dataclass(frozen=True, eq=False)
class StokesData:
    eps: float
    mu_c: float
    mu1: float
    sigma1: FourierField
    psi1: FourierField


def critical_mu(ell: float) -> float:
    return ell / np.sqrt(1.0 + ell * ell)


def mu1_coefficient(mu_c: float) -> float:
    """Second-order speed correction of the Stokes expansion."""
    m = mu_c
    return 1 / (4 * m**3) - 1 / (2 * m**2) - 3 / (4 * m) + 2 + m / 2 - 9 / (4 * (2 - m))


def stokes_wave(ell: float, eps: float, n: int = 32, grid: Optional[TorusGrid] = None,
                max_amplitude: float = MAX_AMPLITUDE):
    """First-order Stokes diamond wave ``(mu_c + eps^2 mu1, eps sigma1, eps psi1)``.

    Returns
    -------
    (DiamondWave, StokesData)
    """
    if not ell > 0:
        raise ValueError("ell must be positive")
    if not 0 <= eps <= max_amplitude:
        raise ValueError(f"eps must lie in [0, {max_amplitude}]")
    g = grid if grid is not None else TorusGrid(n, n, ell)
    if g.ell != ell:
        raise ValueError("grid ell does not match")
    mc = critical_mu(ell)
    m1 = mu1_coefficient(mc)
    s1 = FourierField.from_function(g, lambda x1, x2: -np.cos(x1) * np.cos(x2 / ell) / mc, "ee")
    p1 = FourierField.from_function(g, lambda x1, x2: np.sin(x1) * np.cos(x2 / ell), "oe")
    w = DiamondWave(mc + eps * eps * m1, s1 * eps, p1 * eps, eps)
    return w, StokesData(eps, mc, m1, s1, p1)


def system_residual(w: DiamondWave, cfg: SolverConfig = SolverConfig(), Gpsi: Optional[FourierField] = None):
    """Left-hand sides of the kinematic and Bernoulli equations."""
    s, p = w.sigma, w.psi
    G = dtn_apply(s, p, cfg) if Gpsi is None else Gpsi
    r1 = G - s.dx1()
    s1, s2 = s.dx1(), s.dx2()
    p1, p2 = p.dx1(), p.dx2()
    num = s1 * p1 + s2 * p2 + s1
    den = 1.0 + s1 * s1 + s2 * s2
    q = _divide(num * num, den)
    r2 = s * w.mu + p1 + (p1 * p1 + p2 * p2) * 0.5 - q * 0.5
    return r1.real_part(), r2.real_part()


def residual_norm(r1: FourierField, r2: FourierField) -> float:
    return float(np.hypot(r1.l2(), r2.l2()))


def wave_coefficients(w: DiamondWave, cfg: SolverConfig = SolverConfig(),
                      Gpsi: Optional[FourierField] = None) -> BoundaryCoefficients:
    """Boundary coefficients in the travelling frame (``V1`` includes the unit speed)."""
    G = dtn_apply(w.sigma, w.psi, cfg) if Gpsi is None else Gpsi
    return boundary_coefficients(w.sigma, w.psi, G, w.mu, travelling=True)


@dataclass(frozen=True)
class DiamondReport:
    sigma_parity_defect: float
    psi_parity_defect: float
    min_abs_V1: float
    parity_ok: bool
    transversal: bool

    @property
    def passed(self) -> bool:
        return self.parity_ok and self.transversal

    def to_json(self) -> dict:
        d = dict(self.__dict__)
        d["passed"] = self.passed
        return d


def validate_diamond(w: DiamondWave, cfg: SolverConfig = SolverConfig(), tol: float = 1e-10,
                     coeffs: Optional[BoundaryCoefficients] = None) -> DiamondReport:
    """Parity classes of ``(sigma, psi)`` and the surface transversality ``V1 != 0``."""
    ds = parity_defect(w.sigma, "ee")
    dp = parity_defect(w.psi, "oe")
    scale = max(w.sigma.sup(), w.psi.sup(), 1.0)
    co = coeffs if coeffs is not None else wave_coefficients(w, cfg)
    mv = float(np.abs(co.V1.values).min())
    # a sign change between grid points also loses transversality
    v = co.V1.values
    crosses = bool(v.min() < 0 < v.max())
    ok_par = ds <= tol * scale and dp <= tol * scale
    return DiamondReport(ds, dp, mv, ok_par, mv > tol and not crosses)
