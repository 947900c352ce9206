"""Closed-form manufactured solutions for convergence studies.

The stream function is ``A(t) r exp(-a r^2) cos 2z`` and the field ratio
``B(t) exp(-b r^2) cos z`` with ``A = A0 (1 + sin(t) / 2)`` and
``B = B0 (1 + cos(t) / 2)``.  Every derivative is written out by hand;
the test suite checks them against symbolic differentiation.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .grid import dz_spectral
from .solver import AxisymmetricSolver, State


@dataclass(frozen=True)
class Manufactured:
    a: float = 1.5
    b: float = 2.0
    A0: float = 1.0
    B0: float = 1.0

    def amp(self, t):
        return self.A0 * (1 + 0.5 * np.sin(t)), 0.5 * self.A0 * np.cos(t)

    def famp(self, t):
        return self.B0 * (1 + 0.5 * np.cos(t)), -0.5 * self.B0 * np.sin(t)

    def _mesh(self, grid):
        return grid.r[:, None], grid.z[None, :]

    def stream(self, grid, t):
        r, z = self._mesh(grid)
        A, _ = self.amp(t)
        return A * r * np.exp(-self.a * r**2) * np.cos(2 * z)

    def velocity(self, grid, t):
        r, z = self._mesh(grid)
        A, _ = self.amp(t)
        E = np.exp(-self.a * r**2)
        return 2 * A * r * E * np.sin(2 * z), A * (2 - 2 * self.a * r**2) * E * np.cos(2 * z)

    def _profile(self, r):
        a = self.a
        return 4 + 8 * a - 4 * a**2 * r**2

    def vort_ratio(self, grid, t):
        r, z = self._mesh(grid)
        A, _ = self.amp(t)
        return A * self._profile(r) * np.exp(-self.a * r**2) * np.cos(2 * z)

    def field_ratio(self, grid, t):
        r, z = self._mesh(grid)
        B, _ = self.famp(t)
        return B * np.exp(-self.b * r**2) * np.cos(z)

    def state(self, grid, t=0.0):
        return State(grid, t, np.ascontiguousarray(self.vort_ratio(grid, t)),
                     np.ascontiguousarray(self.field_ratio(grid, t)))

    def forcing(self, grid, t):
        """Continuous residuals ``(f_w, f_m)`` making the pair an exact solution."""
        r, z = self._mesh(grid)
        a, b = self.a, self.b
        A, dA = self.amp(t)
        B, dB = self.famp(t)
        E = np.exp(-a * r**2)
        F = np.exp(-b * r**2)
        P = self._profile(r)
        c2, s2 = np.cos(2 * z), np.sin(2 * z)
        ur, uz = self.velocity(grid, t)
        w = A * P * E * c2
        w_t = dA * P * E * c2
        w_r = A * (-8 * a**2 * r - 2 * a * r * P) * E * c2
        w_z = -2 * A * P * E * s2
        w_zz = -4 * w
        m = B * F * np.cos(z)
        m_t = dB * F * np.cos(z)
        m_r = -2 * b * r * m
        m_z = -B * F * np.sin(z)
        dz_m2 = -(B**2) * F**2 * s2
        fw = w_t + ur * w_r + uz * w_z + dz_m2 - w_zz
        fm = m_t + ur * m_r + uz * m_z
        return fw, fm

    def continuous_forcing(self, grid):
        return lambda t: self.forcing(grid, t)

    def discrete_forcing(self, grid, scheme="central2", dealias=True):
        """Forcing that makes the sampled pair an exact solution of the semi-discrete system."""
        plain = AxisymmetricSolver(grid, scheme=scheme, dealias=dealias)

        def f(t):
            w = self.vort_ratio(grid, t)
            m = self.field_ratio(grid, t)
            r, z = self._mesh(grid)
            _, dA = self.amp(t)
            _, dB = self.famp(t)
            w_t = dA * self._profile(r) * np.exp(-self.a * r**2) * np.cos(2 * z)
            m_t = dB * np.exp(-self.b * r**2) * np.cos(z)
            dw, dm, _ = plain.tendencies_values(w, m, t)
            return w_t - dw - dz_spectral(w, grid, 2), m_t - dm

        return f


def solution_error(grid, state, sol):
    """Relative weighted ``L^2`` errors of both prognostic fields against ``sol``."""
    w = grid.weights
    out = []
    for got, exact in ((state.vort_ratio, sol.vort_ratio(grid, state.t)),
                       (state.field_ratio, sol.field_ratio(grid, state.t))):
        out.append(float(np.sqrt(np.sum((got - exact) ** 2 * w) / np.sum(exact**2 * w))))
    return tuple(out)


def mms_run(grid, sol, dt, T, forcing="continuous", scheme="central2"):
    """Advance the manufactured problem to ``T`` with fixed ``dt`` and return the errors."""
    if forcing == "continuous":
        f = sol.continuous_forcing(grid)
    else:
        f = sol.discrete_forcing(grid, scheme)
    solver = AxisymmetricSolver(grid, scheme=scheme, forcing=f, cfl=1.0)
    state = sol.state(grid)
    n = int(round(T / dt))
    for _ in range(n):
        state = solver.step(state, T / n)
    return solution_error(grid, state, sol)


__all__ = ["Manufactured", "solution_error", "mms_run"]
