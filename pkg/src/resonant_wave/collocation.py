"""Dealiased space-time quadrature grid used for all pointwise products.

Time: uniform grid with n_t > (degree + 1) L points, so products of degree
``degree`` in fields of cutoff L are resolved exactly by the FFT.
Space: Gauss-Legendre nodes on (0, pi).  The sine-coefficient analysis
``(2/pi) int_0^pi F sin(jx) dx`` is then exact (to rounding) for trigonometric
polynomials of the resolved degree and spectrally accurate for the entire
coefficient profiles (polynomials, cosines) allowed in the nonlinearity, none
of which need to be odd about x = 0.
"""

from __future__ import annotations

from dataclasses import dataclass
from functools import lru_cache

import numpy as np
import scipy.fft
from scipy.special import roots_legendre


@dataclass(frozen=True, eq=False)
class Collocation:
    L: int
    J: int
    nt: int
    nx: int
    x: np.ndarray
    w: np.ndarray
    S: np.ndarray  # (J, nx): sin(j x_m)
    A: np.ndarray  # (nx, J): analysis weights (2/pi) w_m sin(j x_m)

    @property
    def t(self):
        return 2.0 * np.pi * np.arange(self.nt) / self.nt

    def to_grid(self, coeffs):
        """(L+1, J) complex coefficients -> (nt, nx) real values."""
        Y = np.zeros((self.nt // 2 + 1, self.nx), dtype=complex)
        Y[: self.L + 1] = coeffs @ self.S
        return scipy.fft.irfft(Y, n=self.nt, axis=0, norm="forward")

    def from_grid(self, values):
        """(nt, nx) real values -> (L+1, J) complex coefficients (projection)."""
        F = scipy.fft.rfft(values, axis=0, norm="forward")[: self.L + 1]
        c = F @ self.A
        c[0] = c[0].real
        return c

    def time_mean(self, values):
        return values.mean(axis=0)

    def integrate(self, values):
        """int_0^{2pi} int_0^pi values dx dt."""
        return 2.0 * np.pi * float(self.time_mean(values) @ self.w)


def grid_sizes(L, J, degree, extra_freq=0):
    nt = scipy.fft.next_fast_len(max((degree + 1) * L + 2, 8), real=True)
    if nt % 2:
        nt += 1
    omega = (degree + 1) * J + int(extra_freq)
    nx = int(np.ceil(0.9 * omega)) + 32
    return nt, nx


@lru_cache(maxsize=64)
def _build(L, J, nt, nx):
    xi, wi = roots_legendre(nx)
    x = 0.5 * np.pi * (xi + 1.0)
    w = 0.5 * np.pi * wi
    S = np.sin(np.multiply.outer(np.arange(1, J + 1), x))
    A = ((2.0 / np.pi) * S * w).T.copy()
    for arr in (x, w, S, A):
        arr.setflags(write=False)
    return Collocation(L, J, nt, nx, x, w, S, A)


def get_collocation(L, J, degree, extra_freq=0, refine=1):
    """Cached grid resolving degree-``degree`` products; ``refine`` scales both sizes."""
    nt, nx = grid_sizes(L, J, degree, extra_freq)
    if refine != 1:
        nt = int(nt * refine) + (int(nt * refine) % 2)
        nx = int(nx * refine)
    return _build(int(L), int(J), int(nt), int(nx))


@lru_cache(maxsize=16)
def _legendre_tools(nx):
    xi, wi = roots_legendre(nx)
    V = np.polynomial.legendre.legvander(xi, nx - 1)
    scale = (2 * np.arange(nx) + 1) / 2.0
    fwd = (V * wi[:, None]).T * scale[:, None]  # values -> Legendre coefficients
    return xi, wi, fwd


def h1_norm_on_nodes(values, coll):
    """H^1(0, pi) norm of a function given by its values at the Gauss-Legendre nodes."""
    xi, wi, fwd = _legendre_tools(coll.nx)
    c = fwd @ np.asarray(values, dtype=float)
    dc = np.polynomial.legendre.legder(c) * (2.0 / np.pi)
    dv = np.polynomial.legendre.legval(xi, dc)
    return float(np.sqrt(coll.w @ (np.asarray(values) ** 2 + dv**2)))
