"""Analytic nonlinearity f(x, u) = sum_{k >= p} a_k(x) u^k and its rescaled form g.

``g(delta, x, u) = s* f(x, delta u) / delta^p = s* sum_k delta^{k-p} a_k(x) u^k``,
evaluated pseudospectrally on a :mod:`collocation` grid.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field as dc_field

import numpy as np
from scipy.special import roots_legendre

from .collocation import get_collocation
from .errors import AmplitudeOutOfRangeError, ValidationError
from .spectral_field import Field, SpaceProfile

__all__ = [
    "CoeffProfile",
    "Nonlinearity",
    "eval_g",
    "eval_du_g",
    "eval_f",
    "g_on_grid",
    "du_g_on_grid",
    "time_average_coeff",
    "melnikov_M",
]

_TAIL_EPS = 1e-16


def _quad(n=256):
    xi, wi = roots_legendre(n)
    return 0.5 * np.pi * (xi + 1.0), 0.5 * np.pi * wi


@dataclass(frozen=True, eq=False)
class CoeffProfile:
    """Coefficient a(x) = sum sin[i] sin((i+1)x) + sum cos[i] cos(ix) + sum poly[i] x^i.

    Kept as an exact function of x; nothing is projected, so profiles that do
    not vanish at the boundary (a = 1, a = x) are represented exactly.
    """

    sin: tuple = ()
    cos: tuple = ()
    poly: tuple = ()

    def __post_init__(self):
        for name in ("sin", "cos", "poly"):
            vals = tuple(float(v) for v in getattr(self, name))
            if not all(math.isfinite(v) for v in vals):
                raise ValidationError(f"non-finite {name} coefficient")
            object.__setattr__(self, name, vals)

    @classmethod
    def constant(cls, c):
        return cls(poly=(c,))

    def __call__(self, x):
        x = np.asarray(x, dtype=float)
        out = np.zeros_like(x)
        for i, c in enumerate(self.sin):
            if c:
                out = out + c * np.sin((i + 1) * x)
        for i, c in enumerate(self.cos):
            if c:
                out = out + c * np.cos(i * x)
        if self.poly:
            out = out + np.polynomial.polynomial.polyval(x, self.poly)
        return out

    def derivative(self, x):
        x = np.asarray(x, dtype=float)
        out = np.zeros_like(x)
        for i, c in enumerate(self.sin):
            out = out + c * (i + 1) * np.cos((i + 1) * x)
        for i, c in enumerate(self.cos):
            out = out - c * i * np.sin(i * x)
        if len(self.poly) > 1:
            out = out + np.polynomial.polynomial.polyval(x, np.polynomial.polynomial.polyder(self.poly))
        return out

    @property
    def max_freq(self):
        return max(len(self.sin), len(self.cos), len(self.poly))

    def h1_norm(self):
        x, w = _quad(max(256, 2 * self.max_freq + 64))
        return math.sqrt(float(w @ (self(x) ** 2 + self.derivative(x) ** 2)))

    def is_zero(self):
        x, _ = _quad(max(64, 2 * self.max_freq + 16))
        return bool(np.all(self(x) == 0.0))

    def scaled(self, c):
        return CoeffProfile(tuple(c * v for v in self.sin), tuple(c * v for v in self.cos), tuple(c * v for v in self.poly))

    def to_sine(self, J):
        return SpaceProfile.from_function(self, J, n_quad=2 * J + 2 * self.max_freq + 64)

    def to_dict(self):
        return {"sin": list(self.sin), "cos": list(self.cos), "poly": list(self.poly)}


@dataclass(frozen=True, eq=False)
class Nonlinearity:
    """Data of hypothesis (H): order p, profiles a_k, radius rho, sign s*."""

    p: int
    coeffs: dict = dc_field(default_factory=dict)
    rho: float = math.inf
    s_star: int = 1
    k_max: int | None = None
    summability_bound: float = 1e8

    def __post_init__(self):
        if int(self.p) != self.p or self.p < 2:
            raise ValidationError("p must be an integer >= 2")
        coeffs = {int(k): v for k, v in self.coeffs.items()}
        if any(k < self.p for k in coeffs):
            raise ValidationError("all terms must have k >= p")
        a_p = coeffs.get(self.p)
        if a_p is None or a_p.is_zero():
            raise ValidationError("a_p must not be identically zero")
        if self.s_star not in (-1, 1):
            raise ValidationError("s_star must be +1 or -1")
        if not self.rho > 0:
            raise ValidationError("rho must be positive")
        if math.isfinite(self.rho):
            r = self.rho / 2
            total = sum(a.h1_norm() * r**k for k, a in coeffs.items())
            if not total <= self.summability_bound:
                raise ValidationError(f"sum ||a_k|| (rho/2)^k = {total:.3g} exceeds the configured bound")
        object.__setattr__(self, "coeffs", dict(sorted(coeffs.items())))

    @property
    def a_p(self):
        return self.coeffs[self.p]

    @property
    def max_freq(self):
        return max(a.max_freq for a in self.coeffs.values())

    def with_sign(self, s_star):
        return Nonlinearity(self.p, self.coeffs, self.rho, int(s_star), self.k_max, self.summability_bound)

    def with_coeffs(self, coeffs):
        return Nonlinearity(self.p, coeffs, self.rho, self.s_star, self.k_max, self.summability_bound)

    def active_terms(self, delta, u_bound):
        """Terms kept in the series at this delta: drop the negligible tail."""
        if delta == 0:
            return [self.p]
        kept = []
        for k, a in self.coeffs.items():
            if self.k_max is not None and k > self.k_max:
                break
            if k == self.p or a.h1_norm() * (2 * abs(delta) * u_bound) ** (k - self.p) >= _TAIL_EPS:
                kept.append(k)
        return kept

    def degree(self, delta, u_bound):
        return max(self.active_terms(delta, u_bound))


def sup_bound(u):
    """Cheap upper bound of max |u(t,x)|: l^1 norm of the coefficients."""
    c = np.abs(u.coeffs)
    return float(c[0].sum() + 2.0 * c[1:].sum())


def grid_for(nl, delta, L, J, u_bound, extra_degree=0):
    deg = nl.degree(delta, u_bound) + extra_degree
    return get_collocation(L, J, deg, extra_freq=nl.max_freq)


def _check_radius(nl, delta, ugrid):
    if delta != 0 and math.isfinite(nl.rho):
        m = abs(delta) * float(np.max(np.abs(ugrid), initial=0.0))
        if m >= nl.rho:
            raise AmplitudeOutOfRangeError(m, nl.rho)


def _profile_values(nl, k, coll):
    cache = nl.__dict__.setdefault("_grid_cache", {})
    key = (k, id(coll))
    if key not in cache:
        cache[key] = (coll, np.asarray(nl.coeffs[k](coll.x), dtype=float)[None, :])
    return cache[key][1]


def _series(nl, delta, ugrid, coll, terms, derivative):
    _check_radius(nl, delta, ugrid)
    out = np.zeros_like(ugrid)
    power = np.ones_like(ugrid)
    have = 0
    for k in sorted(terms):
        e = k - 1 if derivative else k
        while have < e:
            power = power * ugrid
            have += 1
        c = (delta ** (k - nl.p)) * (k if derivative else 1)
        out += c * _profile_values(nl, k, coll) * power
    return nl.s_star * out


def g_on_grid(nl, delta, ugrid, coll, terms):
    return _series(nl, delta, ugrid, coll, terms, False)


def du_g_on_grid(nl, delta, ugrid, coll, terms):
    return _series(nl, delta, ugrid, coll, terms, True)


def eval_g(nl, delta, u):
    """Sine-Galerkin projection of g(delta, x, u) at the cutoffs of ``u``."""
    terms = nl.active_terms(delta, sup_bound(u))
    coll = get_collocation(u.L, u.J, max(terms), extra_freq=nl.max_freq)
    ug = coll.to_grid(u.coeffs)
    return Field(coll.from_grid(g_on_grid(nl, delta, ug, coll, terms)), u.sigma, u.s)


def eval_du_g(nl, delta, u):
    """Sine-Galerkin projection of d_u g(delta, x, u)."""
    terms = nl.active_terms(delta, sup_bound(u))
    coll = get_collocation(u.L, u.J, max(terms), extra_freq=nl.max_freq)
    ug = coll.to_grid(u.coeffs)
    return Field(coll.from_grid(du_g_on_grid(nl, delta, ug, coll, terms)), u.sigma, u.s)


def eval_f(nl, U):
    """f(x, U) = sum a_k U^k for an unscaled field U (no s*, no rescaling)."""
    terms = [k for k in nl.coeffs if nl.k_max is None or k <= nl.k_max]
    coll = get_collocation(U.L, U.J, max(terms), extra_freq=nl.max_freq)
    Ug = coll.to_grid(U.coeffs)
    if math.isfinite(nl.rho) and float(np.max(np.abs(Ug), initial=0.0)) >= nl.rho:
        raise AmplitudeOutOfRangeError(np.max(np.abs(Ug)), nl.rho)
    vals = sum(nl.coeffs[k](coll.x)[None, :] * Ug**k for k in terms)
    return Field(coll.from_grid(vals))


def time_average_coeff(a):
    """Split a(t,x) into its time mean a_0(x) and the zero-mean rest."""
    a0 = SpaceProfile(a.coeffs[0].real)
    c = a.coeffs.copy()
    c[0] = 0.0
    return a0, Field(c, a.sigma, a.s)


def melnikov_M(a0):
    """(1/pi) int_0^pi a_0(x) dx."""
    if isinstance(a0, SpaceProfile):
        j = np.arange(1, a0.J + 1)
        odd = j % 2 == 1
        return float(np.sum(a0.sine_coeffs[odd] * 2.0 / j[odd]) / np.pi)
    x, w = _quad(512)
    return float(w @ np.asarray(a0(x), dtype=float)) / np.pi
