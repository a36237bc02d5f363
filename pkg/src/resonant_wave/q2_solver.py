"""Step 1: the (Q2) equation -Delta v2 = Pi_{V2} g(delta, x, v1 + w + v2).

Solved by the Picard iteration of N(v2) = (-Delta)^{-1} Pi_{V2} g(...),
started at v2 = 0.  The converged state keeps d_u g on the collocation grid
so that the derivative of v2 in (v1, w) can be applied afterwards.
"""

from __future__ import annotations

import logging
from dataclasses import dataclass

import numpy as np

from .collocation import get_collocation
from .errors import ContractionFailure, DomainError, InvalidCutoffError
from .nonlinearity import du_g_on_grid, g_on_grid, sup_bound
from .spectral_field import Field, Subspace, project

log = logging.getLogger(__name__)

__all__ = ["Q2Config", "Q2State", "solve_q2", "dv2_dw_apply", "dv2_apply"]


@dataclass(frozen=True)
class Q2Config:
    N: int = 4
    sigma: float = 0.1
    s: float = 1.0
    tol: float = 1e-13
    max_iter: int = 200
    R: float | None = None  # a-priori bound on ||v1||_{0,s+1}; None disables the check
    ball_slack: float = 1.0

    def __post_init__(self):
        if self.N < 1:
            raise InvalidCutoffError("N must be >= 1")
        if not self.tol > 0:
            raise ValueError("tol must be positive")
        if not self.sigma >= 0:
            raise ValueError("sigma must be non-negative")

    def with_N(self, N):
        return Q2Config(int(N), self.sigma, self.s, self.tol, self.max_iter, self.R, self.ball_slack)


@dataclass(frozen=True, eq=False)
class Q2State:
    """Converged (Q2) solve: v2 plus what is needed to differentiate it."""

    v2: Field
    ratio: float
    iterations: int
    history: tuple
    cfg: Q2Config
    delta: float
    coll: object
    a_grid: np.ndarray  # d_u g at v1 + w + v2
    u: Field  # v1 + w + v2
    nl: object
    terms: tuple = ()


def _v_diag(L, J, N):
    """Indices l of V2 modes representable at cutoffs (L, J)."""
    return np.arange(N + 1, min(L, J) + 1)


def _pi_v2_inv_delta(coeffs, N):
    """(-Delta)^{-1} Pi_{V2} applied to raw coefficients."""
    L, J = coeffs.shape[0] - 1, coeffs.shape[1]
    out = np.zeros_like(coeffs)
    ls = _v_diag(L, J, N)
    out[ls, ls - 1] = coeffs[ls, ls - 1] / (2.0 * ls**2)
    return out


def _norm(c, sigma, s):
    from .spectral_field import sigma_s_norm

    return sigma_s_norm(Field(c), sigma, s)


def _ratio_estimate(diffs):
    tail = [b / a for a, b in zip(diffs[:-1], diffs[1:]) if a > 0][-3:]
    return float(np.median(tail)) if tail else 0.0


def solve_q2(nl, delta, v1, w, cfg, v2_init=None):
    """Fixed point of N(delta, v1, w, .) in V2(N); raises ContractionFailure."""
    L, J = v1.L, v1.J
    if cfg.N > L:
        raise InvalidCutoffError(f"N = {cfg.N} exceeds the time cutoff L = {L}")
    if np.any(project(v1, Subspace.V1(cfg.N)).coeffs != v1.coeffs):
        raise DomainError("v1 must lie in V1(N)")
    if cfg.R is not None and v1.norm(0.0, cfg.s + 1) > 2 * cfg.R * cfg.ball_slack:
        raise DomainError("v1 outside the a-priori ball ||v1||_{0,s+1} <= 2R")
    if cfg.R is not None and w.norm(cfg.sigma, cfg.s) > cfg.ball_slack:
        raise DomainError("w outside the unit ball ||w||_{sigma,s} <= 1")

    base = v1 + w
    terms = nl.active_terms(delta, sup_bound(base) + 2.0)
    coll = get_collocation(L, J, max(terms), extra_freq=nl.max_freq)
    base_grid = coll.to_grid(base.coeffs)
    v2c = np.zeros((L + 1, J), dtype=complex) if v2_init is None else v2_init.coeffs.copy()

    diffs = []
    for it in range(1, cfg.max_iter + 1):
        ug = base_grid + coll.to_grid(v2c)
        gc = coll.from_grid(g_on_grid(nl, delta, ug, coll, terms))
        new = _pi_v2_inv_delta(gc, cfg.N)
        d = _norm(new - v2c, cfg.sigma, cfg.s)
        v2c = new
        diffs.append(d)
        if d <= cfg.tol * max(1.0, _norm(v2c, cfg.sigma, cfg.s)):
            break
        if len(diffs) >= 6 and all(b >= a for a, b in zip(diffs[-6:-1], diffs[-5:])):
            raise ContractionFailure(_ratio_estimate(diffs), "Picard iteration for (Q2) is not contracting; raise N")
        if not np.isfinite(d) or d > 1e8:
            raise ContractionFailure(_ratio_estimate(diffs), "Picard iteration for (Q2) diverged; raise N")
    else:
        raise ContractionFailure(_ratio_estimate(diffs), f"(Q2) not converged in {cfg.max_iter} iterations")

    v2 = Field(v2c, cfg.sigma, cfg.s)
    u = base + v2
    ug = coll.to_grid(u.coeffs)
    a_grid = du_g_on_grid(nl, delta, ug, coll, terms)
    ratio = _ratio_estimate(diffs)
    log.debug("q2: N=%d iterations=%d ratio=%.3g", cfg.N, it, ratio)
    return Q2State(v2, ratio, it, tuple(diffs), cfg, delta, coll, a_grid, u, nl, tuple(terms))


def dv2_apply(state, h, tol=None, max_iter=None):
    """Derivative of v2 along a direction h (in W or in V1).

    Solves k = (-Delta)^{-1} Pi_{V2}(d_u g (h + k)) by Neumann iteration.
    """
    cfg = state.cfg
    tol = cfg.tol if tol is None else tol
    max_iter = cfg.max_iter if max_iter is None else max_iter
    coll = state.coll
    if not np.any(h.coeffs):
        return Field.zeros(h.L, h.J)
    hg = coll.to_grid(h.coeffs)
    kc = np.zeros_like(h.coeffs)
    diffs = []
    for _ in range(max_iter):
        prod = state.a_grid * (hg + coll.to_grid(kc))
        new = _pi_v2_inv_delta(coll.from_grid(prod), cfg.N)
        d = _norm(new - kc, cfg.sigma, cfg.s)
        kc = new
        diffs.append(d)
        if d <= tol * max(_norm(kc, cfg.sigma, cfg.s), 1e-300) or d == 0.0:
            return Field(kc, cfg.sigma, cfg.s)
        if len(diffs) >= 6 and all(b >= a for a, b in zip(diffs[-6:-1], diffs[-5:])):
            break
    raise ContractionFailure(_ratio_estimate(diffs), "linearized (Q2) Neumann series does not converge")


def dv2_dw_apply(state, h, tol=None):
    """d_w v2(delta, v1, w)[h] for h in W."""
    return dv2_apply(state, h, tol)
