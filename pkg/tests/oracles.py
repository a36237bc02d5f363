"""Independent reference computations used by the test suite.

None of these call the package's collocation grid, Picard/Neumann solvers or
Sturm-Liouville routines; they use closed forms, adaptive quadrature, finite
differences on uniform grids or plain Newton on small dense systems.
"""

from __future__ import annotations

import math

import numpy as np
from scipy import integrate, linalg, optimize

# --------------------------------------------------------------------------
# closed forms


def sin3_sin3_coeffs():
    """(sin t sin x)^3 as {(l, j): coefficient of e^{ilt} sin(jx)}, l >= 0.

    sin^3 a = (3 sin a - sin 3a)/4 and sin(mt) = -i/2 e^{imt} + c.c.
    """
    time = {1: 3.0 / 4.0, 3: -1.0 / 4.0}
    space = {1: 3.0 / 4.0, 3: -1.0 / 4.0}
    return {(m, j): -0.5j * a * b for m, a in time.items() for j, b in space.items()}


def x_sin2_sin2_coeffs(J):
    """x sin^2 t sin^2 x: time modes 0 (1/2) and 2 (-1/4); space by adaptive quadrature."""
    out = {}
    for j in range(1, J + 1):
        cj = (2.0 / math.pi) * integrate.quad(
            lambda x: x * math.sin(x) ** 2 * math.sin(j * x), 0.0, math.pi, limit=200, epsabs=1e-13, epsrel=1e-13
        )[0]
        out[(0, j)] = 0.5 * cj
        out[(2, j)] = -0.25 * cj
    return out


def phi0_quadratic_one_mode(A):
    """(1/2) int (v_t^2 + v_x^2) for v = 2A cos t sin x, by 2-d adaptive quadrature."""
    f = lambda x, t: 0.5 * ((2 * A * math.sin(t) * math.sin(x)) ** 2 + (2 * A * math.cos(t) * math.cos(x)) ** 2)
    return integrate.dblquad(f, 0.0, 2 * math.pi, 0.0, math.pi, epsabs=1e-13, epsrel=1e-13)[0]


# --------------------------------------------------------------------------
# uniform-grid spectral evaluation (midpoint rule in x, trapezoid in t)


class MidpointGrid:
    """Exact for trigonometric polynomials of degree < 2 nx in x and < nt in t."""

    def __init__(self, L, J, nt, nx):
        self.L, self.J, self.nt, self.nx = L, J, nt, nx
        self.t = 2 * math.pi * np.arange(nt) / nt
        self.x = math.pi * (np.arange(nx) + 0.5) / nx
        self.E = np.exp(1j * np.outer(np.arange(L + 1), self.t))  # (L+1, nt)
        self.S = np.sin(np.outer(np.arange(1, J + 1), self.x))  # (J, nx)

    def values(self, c):
        """(L+1, J) coefficients -> (nt, nx) real grid values."""
        spatial = c @ self.S  # (L+1, nx)
        v = (self.E[0][:, None] * spatial[0][None, :]).real
        v = v + 2.0 * (self.E[1:].T @ spatial[1:]).real
        return v

    def coeffs(self, vals):
        """Projection onto e^{ilt} sin(jx), l = 0..L, j = 1..J."""
        tm = (np.conj(self.E) @ vals) / self.nt  # (L+1, nx)
        c = tm @ self.S.T * (2.0 / self.nx)
        c[0] = c[0].real
        return c


def g_grid_poly(terms, delta, p, s_star, x, u):
    """s* sum delta^{k-p} a_k(x) u^k with ``terms`` = {k: callable a_k}."""
    out = np.zeros_like(u)
    for k, a in terms.items():
        out = out + delta ** (k - p) * a(x)[None, :] * u**k
    return s_star * out


# --------------------------------------------------------------------------
# Newton on the truncated (Q2) system


def q2_newton(terms, p, delta, v1, w, N, nt=96, nx=96, tol=1e-13):
    """Solve 2 l^2 v2_l = [Pi g(v1 + w + v2)]_{l,l}, l = N+1..min(L,J), by Newton with FD Jacobian."""
    L, J = v1.shape[0] - 1, v1.shape[1]
    grid = MidpointGrid(L, J, nt, nx)
    ls = np.arange(N + 1, min(L, J) + 1)
    base = v1 + w

    def unpack(z):
        c = np.zeros_like(base)
        c[ls, ls - 1] = z[: len(ls)] + 1j * z[len(ls):]
        return c

    def F(z):
        c = unpack(z)
        gv = grid.coeffs(g_grid_poly(terms, delta, p, 1, grid.x, grid.values(base + c)))
        r = 2.0 * ls**2 * c[ls, ls - 1] - gv[ls, ls - 1]
        return np.concatenate([r.real, r.imag])

    z = np.zeros(2 * len(ls))
    for _ in range(50):
        r = F(z)
        if np.max(np.abs(r)) < tol:
            break
        h = 1e-7
        Jm = np.column_stack([(F(z + h * e) - F(z - h * e)) / (2 * h) for e in np.eye(len(z))])
        z = z - np.linalg.solve(Jm, r)
    return unpack(z)


# --------------------------------------------------------------------------
# full-space Newton on the truncated rescaled equation (no splitting)


def full_space_newton(terms, p, s_star, delta, c0, nt=64, nx=64, tol=1e-13, max_iter=40):
    """omega^2 u_tt - u_xx + eps g(delta, u) = 0 on all modes l <= L, j <= J.

    The time-translation orbit is removed with Im u_{1,1} = 0; the Jacobian is
    assembled column by column from the linearization on the grid.
    """
    L, J = c0.shape[0] - 1, c0.shape[1]
    grid = MidpointGrid(L, J, nt, nx)
    eps = s_star * delta ** (p - 1)
    om2 = 1.0 + 2.0 * eps
    l = np.arange(L + 1)[:, None]
    j = np.arange(1, J + 1)[None, :]
    lin = -om2 * l**2 + j**2

    re_idx = [(a, b) for a in range(L + 1) for b in range(J)]
    im_idx = [(a, b) for a in range(1, L + 1) for b in range(J) if not (a == 1 and b == 0)]
    n_re = len(re_idx)

    def pack(c):
        return np.concatenate([[c[a, b].real for a, b in re_idx], [c[a, b].imag for a, b in im_idx]])

    def unpack(z):
        c = np.zeros((L + 1, J), dtype=complex)
        for i, (a, b) in enumerate(re_idx):
            c[a, b] += z[i]
        for i, (a, b) in enumerate(im_idx):
            c[a, b] += 1j * z[n_re + i]
        return c

    def residual_c(c):
        u = grid.values(c)
        return lin * c + eps * grid.coeffs(g_grid_poly(terms, delta, p, s_star, grid.x, u))

    def residual_vec(c):
        r = residual_c(c)
        rows_re = [r[a, b].real for a, b in re_idx]
        rows_im = [r[a, b].imag for a in range(1, L + 1) for b in range(J)]
        return np.array(rows_re + rows_im)

    def jac(c):
        u = grid.values(c)
        h = 1e-7
        da = (g_grid_poly(terms, delta, p, s_star, grid.x, u + h) - g_grid_poly(terms, delta, p, s_star, grid.x, u - h)) / (2 * h)
        cols = []
        for k in range(len(pack(c))):
            e = np.zeros(len(pack(c)))
            e[k] = 1.0
            ec = unpack(e)
            dr = lin * ec + eps * grid.coeffs(da * grid.values(ec))
            cols.append(
                np.array([dr[a, b].real for a, b in re_idx] + [dr[a, b].imag for a in range(1, L + 1) for b in range(J)])
            )
        return np.column_stack(cols)

    c = np.array(c0, dtype=complex)
    c[1, 0] = abs(c[1, 0])
    z = pack(c)
    hist = []
    for _ in range(max_iter):
        r = residual_vec(unpack(z))
        hist.append(float(np.max(np.abs(r))))
        if hist[-1] < tol:
            break
        step = np.linalg.lstsq(jac(unpack(z)), -r, rcond=None)[0]
        z = z + step
    return unpack(z), hist


# --------------------------------------------------------------------------
# Sturm-Liouville by finite differences with Richardson extrapolation


def fd_dirichlet_eigs(eps, a0, n_eigs, n=10_000):
    """Lowest eigenvalues of -y'' + eps a0 y on (0, pi), y(0) = y(pi) = 0."""

    def raw(m):
        h = math.pi / m
        x = h * np.arange(1, m)
        d = 2.0 / h**2 + eps * a0(x)
        e = -np.ones(m - 2) / h**2
        return linalg.eigh_tridiagonal(d, e, select="i", select_range=(0, n_eigs - 1), eigvals_only=True)

    coarse, fine = raw(n), raw(2 * n)
    return (4.0 * fine - coarse) / 3.0


# --------------------------------------------------------------------------
# brute-force Diophantine screen


def brute_force_diophantine(omega, eps, M, gamma, tau, Lp):
    """(passed, worst gated margin) by plain loops."""
    passed, worst = True, math.inf
    thr = math.inf if eps == 0 else 1.0 / (3.0 * abs(eps))
    for k in range(1, Lp + 1):
        for j in range(1, Lp + 1):
            if k == j or not k > thr:
                continue
            c = gamma / (k + j) ** tau
            m = min(abs(omega * k - j) - c, abs(omega * k - j - eps * M / (2 * j)) - c)
            worst = min(worst, m)
            if m < 0:
                passed = False
    return passed, worst


# --------------------------------------------------------------------------
# 1-d maximization along a ray


def argmax_on_ray(level, lo, hi, n=41):
    """Grid scan then bounded scalar refinement of a unimodal level(A)."""
    A = np.linspace(lo, hi, n)
    vals = np.array([level(a) for a in A])
    i = int(np.argmax(vals))
    a_lo, a_hi = A[max(i - 1, 0)], A[min(i + 1, n - 1)]
    res = optimize.minimize_scalar(lambda a: -level(a), bounds=(a_lo, a_hi), method="bounded", options={"xatol": 1e-10})
    return float(res.x), float(-res.fun)
