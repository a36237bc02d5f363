"""Step 2 core: the linearized range operator L_p = D - M1 - M2.

Per time mode k, ``D`` is ``omega^2 k^2 - A_k`` where ``A_k`` is the Galerkin
matrix of ``-d_xx + eps a_0(x)`` on span{sin jx : j != k}; it is diagonalized
exactly.  M1 (zero-mean part of d_u g) and M2 (coupling through v2) are
treated as a perturbation by a Neumann series, whose divergence is the
exclusion signal used by the Nash-Moser driver.
"""

from __future__ import annotations

import csv
import io
import logging
import math
from dataclasses import dataclass

import numpy as np
from scipy.special import roots_legendre

from .collocation import h1_norm_on_nodes
from .errors import InversionFailure, WaveError
from .q2_solver import dv2_dw_apply
from .spectral_field import Field, Subspace, sigma_s_norm

log = logging.getLogger(__name__)

__all__ = [
    "SturmLiouvilleSpectrum",
    "AsymptoticsReport",
    "sl_spectrum",
    "potential_matrix",
    "check_asymptotics",
    "LinearizedOperator",
    "assemble_and_invert_Lp",
    "spectrum_csv",
]


@dataclass(frozen=True, eq=False)
class SturmLiouvilleSpectrum:
    """Spectrum of -d_xx + eps a_0 restricted to {sin kx}^perp (k = 0: no restriction)."""

    k: int
    eps: float
    j: np.ndarray  # label j of each eigenvalue
    eigenvalues: np.ndarray  # lambda_{k,j}, ascending
    deviation: np.ndarray  # lambda_{k,j} - j^2, computed without cancellation
    eigenvectors: np.ndarray  # columns, in the sine coordinates listed in ``basis``
    basis: np.ndarray  # sine indices j spanning the space

    def divisors(self, omega):
        """omega^2 k^2 - lambda_{k,j} (the eigenvalues of D at this mode)."""
        k = self.k
        return (omega * omega - 1.0) * k * k + (k * k - self.j.astype(float) ** 2) - self.deviation

    def alpha(self, omega):
        """min_j |omega^2 k^2 - lambda_{k,j}|."""
        return float(np.min(np.abs(self.divisors(omega))))


def potential_matrix(a0, J, n_quad=None):
    """(2/pi) int_0^pi a0(x) sin(jx) sin(j'x) dx for j, j' = 1..J (a0 callable)."""
    extra = int(getattr(a0, "J", 0) or getattr(a0, "max_freq", 0) or 16)
    n = n_quad or int(1.0 * (2 * J + extra)) + 64
    xi, wi = roots_legendre(n)
    x = 0.5 * np.pi * (xi + 1.0)
    w = 0.5 * np.pi * wi
    S = np.sin(np.multiply.outer(np.arange(1, J + 1), x))
    vals = np.asarray(a0(x), dtype=float)
    return (2.0 / np.pi) * (S * (w * vals)) @ S.T


def _spectrum_from_potential(eps, P, k):
    J = P.shape[0]
    basis = np.array([j for j in range(1, J + 1) if j != k])
    idx = basis - 1
    d = basis.astype(float) ** 2
    A = np.diag(d) + eps * P[np.ix_(idx, idx)]
    if not np.allclose(A, A.T, rtol=0, atol=1e-13 * max(1.0, np.max(np.abs(A)))):
        raise WaveError("Sturm-Liouville matrix is not symmetric")
    try:
        lam, vec = np.linalg.eigh(A)
    except np.linalg.LinAlgError as exc:
        raise WaveError(f"eigensolver failure: {exc}") from exc
    # Rayleigh quotient form of lambda - j^2 avoids cancellation against j^2.
    sq = vec**2
    dev = np.einsum("mi,mi->i", sq, d[:, None] - d[None, :]) + eps * np.einsum("mi,mn,ni->i", vec, P[np.ix_(idx, idx)], vec)
    return SturmLiouvilleSpectrum(int(k), float(eps), basis, lam, dev, vec, basis)


def sl_spectrum(eps, a0, k, J, n_quad=None):
    """Dense Galerkin eigendecomposition of -d_xx + eps a0 on span{sin jx, j <= J, j != k}."""
    if J <= k:
        raise ValueError("need J > k")
    return _spectrum_from_potential(eps, potential_matrix(a0, J, n_quad), k)


@dataclass(frozen=True)
class AsymptoticsReport:
    j: np.ndarray
    r: np.ndarray
    window: tuple
    sup: float
    slope: float
    passed: bool


def check_asymptotics(spec, eps, M, a0, bound=10.0, max_slope=0.5, vanish=1e-10):
    """r_j = j |lambda_{k,j} - j^2 - eps M| / (|eps| ||a0||_{H^1}) over j in [J/2, 0.9 J]."""
    norm = a0 if isinstance(a0, (int, float)) else a0.h1_norm()
    j = spec.j.astype(float)
    num = np.abs(spec.deviation - eps * M)
    if eps == 0 or norm == 0:
        r = np.zeros_like(num) if np.all(num == 0) else np.full_like(num, np.inf)
    else:
        r = j * num / (abs(eps) * norm)
    Jmax = int(spec.basis.max())
    win = (j >= Jmax / 2) & (j <= 0.9 * Jmax)
    rw = r[win]
    sup = float(np.max(rw)) if rw.size else 0.0
    if sup <= vanish:
        slope, passed = 0.0, True
    else:
        pos = rw > 0
        slope = float(np.polyfit(np.log(j[win][pos]), np.log(rw[pos]), 1)[0]) if pos.sum() > 2 else 0.0
        passed = sup <= bound and slope <= max_slope
    return AsymptoticsReport(spec.j, r, (Jmax / 2, 0.9 * Jmax), sup, slope, passed)


def spectrum_csv(spectra, omega):
    buf = io.StringIO()
    wr = csv.writer(buf, lineterminator="\n")
    wr.writerow(["k", "j", "lambda", "divisor"])
    for sp in spectra:
        div = sp.divisors(omega)
        for jj, lam, dv in zip(sp.j, sp.eigenvalues, div):
            wr.writerow([sp.k, int(jj), repr(float(lam)), repr(float(dv))])
    return buf.getvalue()


class LinearizedOperator:
    """L_p(delta, v1, w) at a converged (Q2) state, restricted to W^(p).

    ``a0_values`` may carry the time mean used by a previous spectrum; the
    split a = a0 + abar is then taken with that a0 so that D - M1 - M2 stays
    exactly equal to L_p.
    """

    def __init__(self, q2state, eps, omega, Lp, sigma, s, prev=None, reuse_factor=0.1):
        self.state = q2state
        self.eps = float(eps)
        self.omega = float(omega)
        self.Lp = int(Lp)
        self.sigma, self.s = sigma, s
        coll = q2state.coll
        self.coll = coll
        L, J = q2state.u.L, q2state.u.J
        self.L, self.J = L, J
        a0 = coll.time_mean(q2state.a_grid)
        reused = False
        if prev is not None and prev.Lp >= self.Lp and prev.coll is coll:
            diff = h1_norm_on_nodes(a0 - prev.a0_values, coll)
            if diff <= reuse_factor * abs(self.eps) and prev.eps == self.eps:
                a0, reused = prev.a0_values, True
        self.reused_spectrum = reused
        self.a0_values = a0
        self.M = float(coll.w @ a0) / np.pi
        self.abar_grid = q2state.a_grid - a0[None, :]
        if reused:
            self.P = prev.P
            self.spectra = prev.spectra[: self.Lp + 1]
        else:
            self.P = coll.S @ (a0[:, None] * coll.A)
            self.P = 0.5 * (self.P + self.P.T)
            self.spectra = [_spectrum_from_potential(self.eps, self.P, k) for k in range(self.Lp + 1)]
        self.mask = Subspace.Wp(self.Lp).mask(L, J)
        self._inv = []
        for sp in self.spectra:
            self._inv.append((sp.basis - 1, sp.eigenvectors, 1.0 / sp.divisors(self.omega)))
        self.ratio = None

    # small-divisor diagnostics
    def alphas(self):
        return np.array([sp.alpha(self.omega) for sp in self.spectra])

    def alpha_bound_ok(self, gamma, tau):
        a = self.alphas()
        k = np.arange(len(a))
        ok = a[1:] >= gamma / k[1:] ** (tau - 1.0)
        return bool(np.all(ok)), a

    def product_bound_min(self, tau):
        """min alpha_k alpha_l / |eps|^(tau-1) over k != l, |k-l| <= max(k,l)^((2-tau)/tau)."""
        a = self.alphas()
        best = math.inf
        n = len(a)
        for k in range(1, n):
            for l in range(1, n):
                if k != l and abs(k - l) <= max(k, l) ** ((2.0 - tau) / tau):
                    best = min(best, a[k] * a[l])
        if not math.isfinite(best):
            return math.inf
        return best / abs(self.eps) ** (tau - 1.0) if self.eps else math.inf

    # operator pieces on raw (L+1, J) coefficient arrays
    def _restrict(self, c):
        return np.where(self.mask, c, 0.0)

    def apply_D(self, c):
        l = np.arange(self.L + 1, dtype=float)[:, None]
        j = np.arange(1, self.J + 1, dtype=float)[None, :]
        out = (self.omega**2 * l**2 - j**2) * c
        out[: self.Lp + 1] -= self.eps * (c[: self.Lp + 1] @ self.P.T)
        return self._restrict(out)

    def apply_D_inv(self, c):
        out = np.zeros_like(c)
        for k, (idx, vec, inv) in enumerate(self._inv):
            out[k, idx] = vec @ (inv * (vec.T @ c[k, idx]))
        return self._restrict(out)

    def apply_M(self, c):
        """(M1 + M2) h = eps P_p Pi_W (abar h + a dv2[h])."""
        coll = self.coll
        h = Field(c)
        k = dv2_dw_apply(self.state, h)
        prod = self.abar_grid * coll.to_grid(c) + self.state.a_grid * coll.to_grid(k.coeffs)
        return self._restrict(self.eps * coll.from_grid(prod))

    def apply(self, c):
        return self.apply_D(c) - self.apply_M(c)

    def norm(self, c):
        return sigma_s_norm(Field(c), self.sigma, self.s)

    def solve(self, rhs, tol=1e-12, max_iter=200):
        """Neumann iteration h <- D^{-1}(rhs + (M1 + M2) h)."""
        rhs = self._restrict(np.asarray(rhs, dtype=complex))
        if self.eps == 0:
            self.ratio = 0.0
            return self.apply_D_inv(rhs)
        h = self.apply_D_inv(rhs)
        diffs = []
        for _ in range(max_iter):
            new = self.apply_D_inv(rhs + self.apply_M(h))
            d = self.norm(new - h)
            h = new
            diffs.append(d)
            hn = self.norm(h)
            if d <= tol * max(hn, 1e-300) or d == 0:
                break
            if len(diffs) >= 3 and diffs[-1] >= diffs[-2] >= diffs[-3]:
                raise InversionFailure(diffs[-1] / diffs[-2])
        else:
            raise InversionFailure(diffs[-1] / diffs[-2] if len(diffs) > 1 else math.inf)
        ratios = [b / a for a, b in zip(diffs[:-1], diffs[1:]) if a > 0]
        self.ratio = float(max(ratios)) if ratios else 0.0
        return h


def assemble_and_invert_Lp(q2state, eps, omega, Lp, rhs, tol=1e-12, sigma=0.0, s=1.0):
    """Solve L_p h = rhs on W^(p); returns (h, operator)."""
    op = LinearizedOperator(q2state, eps, omega, Lp, sigma, s)
    c = rhs.coeffs if isinstance(rhs, Field) else rhs
    h = op.solve(c, tol=tol)
    return Field(h, sigma, s), op
