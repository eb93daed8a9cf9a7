"""Diffeomorphisms of the torus written as a linear part plus periodic corrections."""

from __future__ import annotations

from dataclasses import dataclass
from typing import Tuple

import numpy as np

from .torus import FourierField, TorusGrid, evaluate_at


@dataclass(frozen=True, eq=False)
class Diffeo:
    """chi(x) = L x + (p1(x), p2(x)) with p1, p2 bi-periodic.

    ``L`` must map the period lattice into itself so that chi descends to the torus.
    """

    grid: TorusGrid
    p1: FourierField
    p2: FourierField
    lin: Tuple[Tuple[float, float], Tuple[float, float]] = ((1.0, 0.0), (0.0, 1.0))

    @classmethod
    def identity(cls, grid: TorusGrid) -> "Diffeo":
        z = FourierField.zeros(grid)
        return cls(grid, z, z)

    @classmethod
    def linear(cls, grid: TorusGrid, lin) -> "Diffeo":
        z = FourierField.zeros(grid)
        return cls(grid, z, z, tuple(map(tuple, lin)))

    @property
    def L(self) -> np.ndarray:
        return np.asarray(self.lin, float)

    def __call__(self, x1, x2) -> Tuple[np.ndarray, np.ndarray]:
        L = self.L
        q1 = evaluate_at(self.p1.coeffs, self.grid, x1, x2).real
        q2 = evaluate_at(self.p2.coeffs, self.grid, x1, x2).real
        return L[0, 0] * x1 + L[0, 1] * x2 + q1, L[1, 0] * x1 + L[1, 1] * x2 + q2

    def on_grid(self) -> Tuple[np.ndarray, np.ndarray]:
        g, L = self.grid, self.L
        return (L[0, 0] * g.x1 + L[0, 1] * g.x2 + self.p1.values.real,
                L[1, 0] * g.x1 + L[1, 1] * g.x2 + self.p2.values.real)

    def jacobian(self) -> np.ndarray:
        """chi'(x) on the grid, shape (2, 2, n1, n2); entry [i, j] = d chi_i / d x_j."""
        L = self.L
        J = np.empty((2, 2) + self.grid.shape)
        for i, p in enumerate((self.p1, self.p2)):
            J[i, 0] = L[i, 0] + p.dx1().values.real
            J[i, 1] = L[i, 1] + p.dx2().values.real
        return J

    def hessian(self) -> np.ndarray:
        """Second derivatives, shape (2, 2, 2, n1, n2); entry [i, j, k] = d^2 chi_i / dx_j dx_k."""
        H = np.empty((2, 2, 2) + self.grid.shape)
        for i, p in enumerate((self.p1, self.p2)):
            H[i, 0, 0] = p.dx1(2).values.real
            H[i, 1, 1] = p.dx2(2).values.real
            H[i, 0, 1] = H[i, 1, 0] = p.dx1().dx2().values.real
        return H

    def min_jacobian(self) -> float:
        J = self.jacobian()
        return float((J[0, 0] * J[1, 1] - J[0, 1] * J[1, 0]).min())

    def inverse_points(self, y1, y2, tol: float = 1e-13, maxit: int = 60):
        """Solve chi(x) = y by damped Newton iteration on scattered points."""
        if self.min_jacobian() <= 0:
            raise ValueError("diffeomorphism has a non-positive Jacobian on the grid")
        L = self.L
        Li = np.linalg.inv(L)
        y1 = np.asarray(y1, float)
        y2 = np.asarray(y2, float)
        x1 = Li[0, 0] * y1 + Li[0, 1] * y2
        x2 = Li[1, 0] * y1 + Li[1, 1] * y2
        d = [[self.p1.dx1(), self.p1.dx2()], [self.p2.dx1(), self.p2.dx2()]]
        for _ in range(maxit):
            c1, c2 = self(x1, x2)
            r1, r2 = c1 - y1, c2 - y2
            if max(np.abs(r1).max(initial=0), np.abs(r2).max(initial=0)) < tol:
                break
            a = L[0, 0] + evaluate_at(d[0][0].coeffs, self.grid, x1, x2).real
            b = L[0, 1] + evaluate_at(d[0][1].coeffs, self.grid, x1, x2).real
            c = L[1, 0] + evaluate_at(d[1][0].coeffs, self.grid, x1, x2).real
            e = L[1, 1] + evaluate_at(d[1][1].coeffs, self.grid, x1, x2).real
            det = a * e - b * c
            x1 = x1 - (e * r1 - b * r2) / det
            x2 = x2 - (-c * r1 + a * r2) / det
        else:
            raise RuntimeError("inverse map iteration did not converge")
        return x1, x2

    def inverse(self) -> "Diffeo":
        g = self.grid
        x1, x2 = self.inverse_points(g.x1, g.x2)
        Li = np.linalg.inv(self.L)
        q1 = x1 - (Li[0, 0] * g.x1 + Li[0, 1] * g.x2)
        q2 = x2 - (Li[1, 0] * g.x1 + Li[1, 1] * g.x2)
        return Diffeo(g, FourierField.from_values(g, q1), FourierField.from_values(g, q2),
                      tuple(map(tuple, Li)))

    def compose_field(self, f: FourierField) -> FourierField:
        """f o chi sampled on the grid (spectral evaluation, no filtering)."""
        y1, y2 = self.on_grid()
        return FourierField.from_values(self.grid, evaluate_at(f.coeffs, f.grid, y1, y2))
