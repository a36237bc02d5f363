"""Space-time fields on (0, 2pi) x (0, pi) with Dirichlet conditions in x.

A field is ``u(t, x) = sum_l e^{ilt} u_l(x)`` with ``u_{-l} = conj(u_l)``;
each ``u_l`` is a finite sine series ``sum_j c_{l,j} sin(jx)``.  Only
``l = 0..L`` is stored, as a complex ``(L+1, J)`` array whose column ``j-1``
holds ``c_{l,j}``.
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass, field as dc_field

import numpy as np

from .errors import DomainError, InvalidCutoffError

__all__ = [
    "SpaceProfile",
    "Field",
    "Subspace",
    "sigma_s_norm",
    "h1_weights",
    "project",
    "inv_neg_delta_on_V",
    "neg_delta",
    "apply_L_omega",
    "l2_inner",
    "v_amplitudes",
    "from_v_amplitudes",
]


def h1_weights(J):
    """(pi/2)(1 + j^2): squared H^1 norm of sin(jx) on (0, pi)."""
    j = np.arange(1, J + 1)
    return 0.5 * np.pi * (1.0 + j**2)


@dataclass(frozen=True, eq=False)
class SpaceProfile:
    """Finite sine series ``y(x) = sum_j c_j sin(jx)`` on (0, pi)."""

    sine_coeffs: np.ndarray

    def __post_init__(self):
        c = np.asarray(self.sine_coeffs, dtype=float).copy()
        if c.ndim != 1:
            raise ValueError("sine_coeffs must be one-dimensional")
        if not np.all(np.isfinite(c)):
            raise ValueError("sine_coeffs must be finite")
        c.setflags(write=False)
        object.__setattr__(self, "sine_coeffs", c)

    @property
    def J(self):
        return self.sine_coeffs.size

    def __call__(self, x):
        x = np.asarray(x, dtype=float)
        j = np.arange(1, self.J + 1)
        return np.sin(np.multiply.outer(x, j)) @ self.sine_coeffs

    def h1_norm(self):
        return math.sqrt(float(np.sum(h1_weights(self.J) * self.sine_coeffs**2)))

    def grid_values(self, n_x):
        """Values on the sine-transform grid x_m = pi m / (n_x + 1), m = 1..n_x."""
        x = np.pi * np.arange(1, n_x + 1) / (n_x + 1)
        return self(x)

    @classmethod
    def from_function(cls, f, J, n_quad=None):
        """L^2 projection of ``f`` onto sin(x)..sin(Jx) by Gauss-Legendre quadrature."""
        n = n_quad or (2 * J + 64)
        xi, wi = np.polynomial.legendre.leggauss(n)
        x = 0.5 * np.pi * (xi + 1.0)
        w = 0.5 * np.pi * wi
        j = np.arange(1, J + 1)
        S = np.sin(np.multiply.outer(j, x))
        return cls((2.0 / np.pi) * S @ (w * np.asarray(f(x), dtype=float)))


def _as_coeff_array(coeffs):
    c = np.array(coeffs, dtype=complex)
    if c.ndim != 2:
        raise ValueError("field coefficients must have shape (L+1, J)")
    return c


@dataclass(frozen=True, eq=False)
class Field:
    """Time-Fourier field, immutable.  ``sigma``/``s`` record the last norm used."""

    coeffs: np.ndarray
    sigma: float = 0.0
    s: float = 1.0

    def __post_init__(self):
        c = _as_coeff_array(self.coeffs)
        if not np.all(np.isfinite(c)):
            raise ValueError("field coefficients must be finite")
        scale = 1.0 + float(np.max(np.abs(c), initial=0.0))
        if np.max(np.abs(c[0].imag), initial=0.0) > 1e-9 * scale:
            raise ValueError("mode l = 0 must be real (reality condition)")
        c[0] = c[0].real
        c.setflags(write=False)
        object.__setattr__(self, "coeffs", c)

    @property
    def L(self):
        return self.coeffs.shape[0] - 1

    @property
    def J(self):
        return self.coeffs.shape[1]

    @classmethod
    def zeros(cls, L, J):
        return cls(np.zeros((L + 1, J), dtype=complex))

    @classmethod
    def single(cls, L, J, l, j, value=1.0):
        c = np.zeros((L + 1, J), dtype=complex)
        c[l, j - 1] = value
        return cls(c)

    def mode(self, l):
        return self.coeffs[l]

    def resized(self, L, J):
        """Zero-pad or truncate to cutoffs (L, J)."""
        c = np.zeros((L + 1, J), dtype=complex)
        lm, jm = min(L, self.L), min(J, self.J)
        c[: lm + 1, :jm] = self.coeffs[: lm + 1, :jm]
        return Field(c, self.sigma, self.s)

    def norm(self, sigma=None, s=None):
        return sigma_s_norm(self, self.sigma if sigma is None else sigma, self.s if s is None else s)

    def with_norm_meta(self, sigma, s):
        return Field(self.coeffs, sigma, s)

    def __add__(self, other):
        return Field(self.coeffs + other.coeffs, self.sigma, self.s)

    def __sub__(self, other):
        return Field(self.coeffs - other.coeffs, self.sigma, self.s)

    def __neg__(self):
        return Field(-self.coeffs, self.sigma, self.s)

    def __mul__(self, scalar):
        return Field(self.coeffs * scalar, self.sigma, self.s)

    __rmul__ = __mul__

    def conj_time(self):
        """Time reversal t -> -t."""
        return Field(np.conj(self.coeffs), self.sigma, self.s)

    def shift_time(self, theta):
        """u(t + theta, x)."""
        l = np.arange(self.L + 1)[:, None]
        return Field(self.coeffs * np.exp(1j * l * theta), self.sigma, self.s)

    def values(self, t, x):
        """Point evaluation on the tensor grid t x x (slow path, for tests and output)."""
        t = np.atleast_1d(np.asarray(t, dtype=float))
        x = np.atleast_1d(np.asarray(x, dtype=float))
        E = np.exp(1j * np.multiply.outer(t, np.arange(self.L + 1)))
        E[:, 1:] *= 2.0
        S = np.sin(np.multiply.outer(np.arange(1, self.J + 1), x))
        return (E @ self.coeffs @ S).real

    def to_dict(self):
        modes = [
            {"l": int(l), "re": [float(v) for v in self.coeffs[l].real], "im": [float(v) for v in self.coeffs[l].imag]}
            for l in range(self.L + 1)
        ]
        return {"sigma": float(self.sigma), "s": float(self.s), "L": self.L, "J": self.J, "modes": modes}

    def to_json(self, **kw):
        return json.dumps(self.to_dict(), **kw)

    @classmethod
    def from_dict(cls, d):
        L, J = int(d["L"]), int(d["J"])
        c = np.zeros((L + 1, J), dtype=complex)
        for m in d["modes"]:
            l = int(m["l"])
            c[l] = np.asarray(m["re"], dtype=float) + 1j * np.asarray(m["im"], dtype=float)
        return cls(c, float(d.get("sigma", 0.0)), float(d.get("s", 1.0)))

    @classmethod
    def from_json(cls, text):
        return cls.from_dict(json.loads(text))


def _time_weights(L, sigma, s):
    l = np.arange(L + 1, dtype=float)
    lw = np.where(l > 0, l ** (2.0 * s), 0.0)
    w = np.exp(2.0 * sigma * l) * (lw + 1.0)
    w[1:] *= 2.0  # l and -l
    return w


def sigma_s_norm(u, sigma, s):
    """sqrt( sum_{l in Z} e^{2 sigma |l|} (|l|^{2s} + 1) ||u_l||_{H^1}^2 ).

    The l = 0 term carries weight 1 for every s.
    """
    h1 = np.abs(u.coeffs) ** 2 @ h1_weights(u.J)
    return math.sqrt(float(np.dot(_time_weights(u.L, sigma, s), h1)))


@dataclass(frozen=True)
class Subspace:
    """Mode-wise subspace selector; build with the classmethods."""

    kind: str
    cutoff: int | None = dc_field(default=None)

    _KINDS = ("V", "W", "V1", "V2", "Wp", "WpPerp")

    def __post_init__(self):
        if self.kind not in self._KINDS:
            raise ValueError(f"unknown subspace {self.kind!r}")
        if self.kind in ("V", "W"):
            if self.cutoff is not None:
                raise ValueError(f"{self.kind} takes no cutoff")
        elif self.cutoff is None or self.cutoff < 0:
            raise InvalidCutoffError(f"{self.kind} needs a non-negative cutoff")

    @classmethod
    def V(cls):
        return cls("V")

    @classmethod
    def W(cls):
        return cls("W")

    @classmethod
    def V1(cls, N):
        return cls("V1", int(N))

    @classmethod
    def V2(cls, N):
        return cls("V2", int(N))

    @classmethod
    def Wp(cls, Lp):
        return cls("Wp", int(Lp))

    @classmethod
    def WpPerp(cls, Lp):
        return cls("WpPerp", int(Lp))

    def mask(self, L, J):
        if self.cutoff is not None and self.cutoff > L:
            raise InvalidCutoffError(f"{self.kind} cutoff {self.cutoff} exceeds field cutoff L = {L}")
        l = np.arange(L + 1)[:, None]
        j = np.arange(1, J + 1)[None, :]
        v = (l == j) & (l >= 1)
        if self.kind == "V":
            return v
        if self.kind == "W":
            return ~v
        if self.kind == "V1":
            return v & (l <= self.cutoff)
        if self.kind == "V2":
            return v & (l > self.cutoff)
        if self.kind == "Wp":
            return ~v & (l <= self.cutoff)
        return ~v & (l > self.cutoff)


def project(u, tag):
    """Keep the coefficients selected by ``tag``, zero the rest."""
    return Field(np.where(tag.mask(u.L, u.J), u.coeffs, 0.0), u.sigma, u.s)


def _mode_grid(u):
    l = np.arange(u.L + 1, dtype=float)[:, None]
    j = np.arange(1, u.J + 1, dtype=float)[None, :]
    return l, j


def inv_neg_delta_on_V(v):
    """(-Delta)^{-1} on V: the (l, l) coefficient is divided by 2 l^2."""
    vmask = Subspace.V().mask(v.L, v.J)
    if np.any(v.coeffs[~vmask] != 0):
        raise DomainError("(-Delta)^{-1} is only defined on V; the input has W content")
    l, _ = _mode_grid(v)
    mult = np.where(vmask, 1.0 / np.maximum(2.0 * l**2, 1.0), 0.0)
    return Field(v.coeffs * mult, v.sigma, v.s)


def neg_delta(u):
    """-Delta = -(d_tt + d_xx): multiplier l^2 + j^2."""
    l, j = _mode_grid(u)
    return Field(u.coeffs * (l**2 + j**2), u.sigma, u.s)


def apply_L_omega(w, omega):
    """L_omega = -omega^2 d_tt + d_xx: multiplier omega^2 l^2 - j^2."""
    l, j = _mode_grid(w)
    return Field(w.coeffs * (omega**2 * l**2 - j**2), w.sigma, w.s)


def l2_inner(f, h):
    """Real L^2(Omega) pairing int_0^{2pi} int_0^pi f h dx dt."""
    prod = (f.coeffs * np.conj(h.coeffs)).real.sum(axis=1)
    return float(np.pi**2 * (prod[0] + 2.0 * prod[1:].sum()))


def v_amplitudes(v, N=None):
    """Complex amplitudes u_1..u_N of the V-component (coefficient of e^{ilt} sin(lx))."""
    n = min(v.L, v.J) if N is None else N
    return np.array([v.coeffs[l, l - 1] for l in range(1, n + 1)], dtype=complex)


def from_v_amplitudes(amps, L, J, first=1):
    """Field in V with coefficient amps[i] at (l, l), l = first + i."""
    c = np.zeros((L + 1, J), dtype=complex)
    for i, a in enumerate(np.asarray(amps, dtype=complex)):
        l = first + i
        if l > L or l > J:
            raise InvalidCutoffError(f"V mode {l} exceeds cutoffs (L={L}, J={J})")
        c[l, l - 1] = a
    return Field(c)
