"""Step 3: the finite-dimensional bifurcation equation (Q1) and its continuation.

At delta = 0, (Q1) is the Euler-Lagrange equation of the reduced action
Phi~0(v1) = Phi0(v1 + v2(0, v1, 0)) on V1.  Nonzero critical points are found
by deflated Newton from a deterministic seed set in a phase-fixed chart
(Im u_l* = 0 on the first active mode l*), and continued in delta with
w supplied by the Nash-Moser driver.
"""

from __future__ import annotations

import csv
import io
import logging
import math
from dataclasses import dataclass, field as dc_field

import numpy as np

from .collocation import get_collocation
from .errors import (
    ContractionFailure,
    DegenerateNonlinearityError,
    NonConvergenceError,
    SearchFailure,
    WaveError,
)
from .nash_moser import eps_of_delta, nash_moser_run, omega_of_delta
from .nonlinearity import eval_f, g_on_grid
from .q2_solver import dv2_apply, solve_q2
from .spectral_field import (
    Field,
    Subspace,
    from_v_amplitudes,
    l2_inner,
    neg_delta,
    project,
    v_amplitudes,
)

log = logging.getLogger(__name__)

__all__ = [
    "V1Point",
    "CriticalPoint",
    "BranchPoint",
    "SolutionBranch",
    "phi0",
    "phi0_gradient",
    "choose_sign",
    "ReducedProblem",
    "find_critical_point",
    "continue_branch",
    "pde_residual",
]

TWO_PI2 = 2.0 * np.pi**2


# --------------------------------------------------------------------------
# the action functional on V


def _integral_term(v, a_p, p):
    coll = get_collocation(v.L, v.J, p + 1, extra_freq=getattr(a_p, "max_freq", 16))
    vg = coll.to_grid(v.coeffs)
    return coll.integrate(a_p(coll.x)[None, :] * vg ** (p + 1)) / (p + 1)


def phi0(v, a_p, p):
    """Phi0(v) = (1/2) int (v_t^2 + v_x^2) - int a_p v^{p+1}/(p+1), over (0,2pi) x (0,pi)."""
    return 0.5 * l2_inner(neg_delta(v), v) - _integral_term(v, a_p, p)


def phi0_gradient(v, a_p, p):
    """L^2(Omega) gradient of Phi0 on V: -Delta v - Pi_V(a_p v^p)."""
    coll = get_collocation(v.L, v.J, p, extra_freq=getattr(a_p, "max_freq", 16))
    vg = coll.to_grid(v.coeffs)
    nl_part = Field(coll.from_grid(a_p(coll.x)[None, :] * vg**p))
    return project(neg_delta(v) - nl_part, Subspace.V())


def _probe_set(L, J):
    probes = []
    for l in range(1, min(4, L, J) + 1):
        probes.append({l: 1.0})
    for l1, l2 in ((1, 2), (1, 3), (2, 4), (1, 4), (2, 3)):
        if max(l1, l2) <= min(L, J):
            for ph in (1.0, 1j, -1.0, -1j):
                probes.append({l1: 1.0, l2: ph})
    for mix in ({1: 1.0, 2: 0.5, 3: 0.25}, {1: 1.0, 2: 0.5j, 3: -0.25}):
        if 3 <= min(L, J):
            probes.append(mix)
    out = []
    for d in probes:
        amps = np.zeros(max(d), dtype=complex)
        for l, a in d.items():
            amps[l - 1] = a
        v = from_v_amplitudes(amps, L, J)
        out.extend([v, -v])
    return out


def choose_sign(a_p, p, L=8, J=24, probes=None, rtol=1e-12):
    """Sign s* making int a_p v^{p+1} > 0 for some probe v in V; returns (s*, note)."""
    probes = _probe_set(L, J) if probes is None else probes
    vals = np.array([_integral_term(v, a_p, p) for v in probes])
    scale = max(1.0, float(np.max(np.abs(vals))))
    pos = bool(np.any(vals > rtol * scale))
    neg = bool(np.any(vals < -rtol * scale))
    if not pos and not neg:
        raise DegenerateNonlinearityError(
            "int a_p v^{p+1} vanishes on every probe: Pi_V(a_p v^p) is degenerate (higher-order terms needed)"
        )
    if pos and neg:
        return 1, "both signs occur on the probe set; both branches admissible, taking s* = +1"
    return (1, "") if pos else (-1, "")


# --------------------------------------------------------------------------
# reduced problem on V1


@dataclass(frozen=True)
class V1Point:
    """Complex amplitudes u_1..u_N of v1; phase_fixed means Im u_{phase_mode} = 0."""

    amps: np.ndarray
    phase_fixed: bool = True
    phase_mode: int = 1

    @property
    def N(self):
        return len(self.amps)

    def to_field(self, L, J):
        return from_v_amplitudes(self.amps, L, J)


class ReducedProblem:
    """(Q1) in real coordinates x = (Re u_1, Im u_1, ..., Re u_N, Im u_N).

    The chart drops Im u_{phase_mode}.  ``residual`` returns the real vector of
    2 l^2 u_l - [Pi_{V1} G]_{l,l}; at delta = 0 this is grad Phi~0 / (2 pi^2).
    """

    def __init__(self, nl, L, J, N, q2cfg, phase_mode=1):
        self.nl, self.L, self.J, self.N = nl, L, J, N
        self.q2cfg = q2cfg.with_N(N) if q2cfg.N != N else q2cfg
        self.phase_mode = phase_mode
        drop = 2 * (phase_mode - 1) + 1
        self.chart_idx = np.array([i for i in range(2 * N) if i != drop])

    # coordinates
    def amps_from_full(self, xf):
        return xf[0::2] + 1j * xf[1::2]

    def full_from_amps(self, amps):
        xf = np.empty(2 * self.N)
        xf[0::2], xf[1::2] = np.real(amps), np.imag(amps)
        return xf

    def full_from_chart(self, x):
        xf = np.zeros(2 * self.N)
        xf[self.chart_idx] = x
        return xf

    def field(self, xf):
        return from_v_amplitudes(self.amps_from_full(xf), self.L, self.J)

    def basis_field(self, i):
        e = np.zeros(2 * self.N)
        e[i] = 1.0
        return self.field(e)

    # delta = 0 quantities
    def q2(self, xf, delta=0.0, w=None):
        w = Field.zeros(self.L, self.J) if w is None else w
        return solve_q2(self.nl, delta, self.field(xf), w, self.q2cfg)

    def _v1_residual(self, xf, state, delta):
        coll = state.coll
        ug = coll.to_grid(state.u.coeffs)
        gc = coll.from_grid(g_on_grid(self.nl, delta, ug, coll, state.terms))
        amps = self.amps_from_full(xf)
        ls = np.arange(1, self.N + 1)
        f = 2.0 * ls**2 * amps - gc[ls, ls - 1]
        return self.full_from_amps(f)

    def level(self, xf, state=None):
        state = state or self.q2(xf)
        a = self.nl.a_p.scaled(self.nl.s_star)
        return phi0(state.u, a, self.nl.p)

    def gradient(self, xf, state=None):
        """grad Phi~0 in full real coordinates."""
        state = state or self.q2(xf)
        return TWO_PI2 * self._v1_residual(xf, state, 0.0)

    def _jac_columns(self, state, cols, delta=0.0, range_op=None):
        """d(residual)/dx_i via the chain rule through v2 (and w when range_op is given)."""
        coll = state.coll
        ls = np.arange(1, self.N + 1)
        out = np.zeros((2 * self.N, len(cols)))
        for c, i in enumerate(cols):
            e = self.basis_field(i)
            h = e
            if range_op is not None and range_op.eps != 0:
                k = dv2_apply(state, e)
                rhs = range_op.eps * coll.from_grid(state.a_grid * coll.to_grid((e + k).coeffs))
                dw = range_op.solve(np.where(range_op.mask, rhs, 0.0))
                h = e + Field(dw)
            k = dv2_apply(state, h)
            dg = coll.from_grid(state.a_grid * coll.to_grid((h + k).coeffs))
            de = self.amps_from_full(np.eye(2 * self.N)[i])
            out[:, c] = self.full_from_amps(2.0 * ls**2 * de - dg[ls, ls - 1])
        return out

    def hessian(self, xf, state=None):
        """Full 2N x 2N Hessian of Phi~0 (analytic chain rule through v2)."""
        state = state or self.q2(xf)
        H = TWO_PI2 * self._jac_columns(state, range(2 * self.N))
        return 0.5 * (H + H.T)

    def translation_generator(self, xf):
        """d/dtheta of the time shift: u_l -> i l u_l."""
        amps = self.amps_from_full(xf)
        return self.full_from_amps(1j * np.arange(1, self.N + 1) * amps)


# --------------------------------------------------------------------------
# critical point search


@dataclass
class CriticalPoint:
    v1bar: V1Point
    level: float
    hessian_eigs: np.ndarray
    nondegenerate_mod_S1: bool
    u0: Field
    v2: Field
    N: int
    R: float
    grad_norm: float
    mp_level: float
    q2_ratio: float
    all_levels: list = dc_field(default_factory=list)
    note: str = ""

    def v1_field(self, L, J):
        return self.v1bar.to_field(L, J)


@dataclass(frozen=True)
class SearchConfig:
    radii_factors: tuple = (0.5, 1.0, 2.0)
    directions_per_radius: int = 4
    seed: int = 0
    max_newton: int = 60
    patience: int = 12
    grad_tol: float = 1e-10
    zero_tol: float = 1e-7  # relative size of the translation eigenvalue
    max_starts: int | None = None
    N_max: int = 16


def _one_mode_amplitude(nl, L, J, q2cfg=None):
    """Seed radius: 2A = A^p [Pi_V g(0, e^{it} sin x + c.c.)]_{1,1} (v2 omitted).

    When that coefficient vanishes (e.g. p even with x-dependent a_p), the
    radius maximizing Phi~0 along the pure l = 1 ray is used instead.
    """
    v = from_v_amplitudes([1.0], L, J)
    coll = get_collocation(L, J, nl.p, extra_freq=nl.max_freq)
    gc = coll.from_grid(g_on_grid(nl, 0.0, coll.to_grid(v.coeffs), coll, [nl.p]))
    G1 = abs(gc[1, 0].real)
    if G1 > 1e-10 or q2cfg is None:
        return (2.0 / G1) ** (1.0 / (nl.p - 1)) if G1 > 1e-14 else 1.0
    prob = ReducedProblem(nl, L, J, q2cfg.N, q2cfg)
    best, arg = -np.inf, 1.0
    for A in np.geomspace(0.05, 50.0, 61):
        xf = np.zeros(2 * prob.N)
        xf[0] = A
        try:
            lev = prob.level(xf)
        except (ContractionFailure, WaveError):
            break
        if lev > best:
            best, arg = lev, A
        elif lev < best - 1e-12:
            break
    return float(arg)


def _deflation(x, roots, power=2, shift=1.0):
    """log mu(x) gradient for mu = prod (1/||x - r||^power + shift)."""
    g = np.zeros_like(x)
    for r in roots:
        d = x - r
        n2 = float(d @ d)
        if n2 == 0:
            return None
        m = n2 ** (-power / 2) + shift
        g += (-power * n2 ** (-power / 2 - 1) * d) / m
    return g


def _newton_chart(prob, x0, roots, cfg, scale):
    x = np.array(x0, dtype=float)
    best = []
    for _ in range(cfg.max_newton):
        xf = prob.full_from_chart(x)
        try:
            state = prob.q2(xf)
            g = prob._v1_residual(xf, state, 0.0)[prob.chart_idx]
            Jm = None
            if np.max(np.abs(TWO_PI2 * g)) > cfg.grad_tol:
                Jm = prob._jac_columns(state, prob.chart_idx)[prob.chart_idx]
        except (ContractionFailure, WaveError):
            return None
        gn = float(np.max(np.abs(TWO_PI2 * g)))
        if gn <= cfg.grad_tol:
            return x
        best.append(min(gn, best[-1]) if best else gn)
        if len(best) > cfg.patience and best[-1] > 0.1 * best[-1 - cfg.patience]:
            return None  # wandering start: give up early
        try:
            dF = -np.linalg.solve(Jm, g)
        except np.linalg.LinAlgError:
            return None
        dlog = _deflation(x, roots)
        if dlog is None:
            return None
        denom = 1.0 - float(dlog @ dF)
        step = dF / denom if abs(denom) > 1e-12 else dF
        n = np.linalg.norm(step)
        if n > scale:
            step *= scale / n
        x = x + step
        if not np.all(np.isfinite(x)) or np.linalg.norm(x) > 50 * scale:
            return None
    return None


def _seeds(prob, A, cfg):
    dim = len(prob.chart_idx)
    seeds = [np.eye(dim)[0] * A]
    rng = np.random.default_rng(cfg.seed)
    for f in cfg.radii_factors:
        for _ in range(cfg.directions_per_radius):
            d = rng.standard_normal(dim)
            seeds.append(f * A * d / np.linalg.norm(d))
    return seeds if cfg.max_starts is None else seeds[: cfg.max_starts]


def _classify(prob, xf, cfg):
    state = prob.q2(xf)
    H = prob.hessian(xf, state)
    eigs, vecs = np.linalg.eigh(H)
    scale = max(1.0, float(np.max(np.abs(eigs))))
    near = np.abs(eigs) <= cfg.zero_tol * scale
    T = prob.translation_generator(xf)
    aligned = False
    if near.sum() == 1 and np.linalg.norm(T) > 0:
        vz = vecs[:, near][:, 0]
        aligned = abs(vz @ T) / np.linalg.norm(T) > 0.99
    return state, eigs, bool(near.sum() == 1 and aligned)


def _mp_level(prob, xf, n=41):
    levels = [prob.level(t * xf) for t in np.linspace(0.0, 1.0, n)]
    return float(max(levels))


def find_critical_point(nl, L, J, q2cfg, N="auto", search=None):
    """Nonzero, preferably non-degenerate (mod time shifts), critical point of Phi~0 on V1."""
    search = search or SearchConfig()
    Ns = [q2cfg.N] if N == "auto" else [int(N)]
    if N == "auto":
        while Ns[-1] * 2 <= min(search.N_max, L):
            Ns.append(Ns[-1] * 2)
    last_err = None
    prev_u = None
    for n in Ns:
        A = _one_mode_amplitude(nl, L, J, q2cfg.with_N(n))
        prob = ReducedProblem(nl, L, J, n, q2cfg)
        found = []
        roots = [np.zeros(len(prob.chart_idx))]
        seeds = _seeds(prob, A, search)
        if prev_u is not None:
            amps = v_amplitudes(prev_u, n)
            amps = amps * np.exp(-1j * np.angle(amps[0])) if abs(amps[0]) > 0 else amps
            seeds.insert(0, prob.full_from_amps(amps)[prob.chart_idx])
        for x0 in seeds:
            x = _newton_chart(prob, x0, roots, search, scale=A)
            if x is None or np.linalg.norm(x) < 1e-6 * A:
                continue
            roots.append(x)
            xf = prob.full_from_chart(x)
            if xf[0] < 0:  # rotate by pi in time when mode 1 is odd-symmetric
                xf_alt = prob.full_from_amps(prob.amps_from_full(xf) * (-1.0) ** np.arange(1, n + 1))
                if prob.amps_from_full(xf_alt)[0].real > 0:
                    xf = xf_alt
            state, eigs, nondeg = _classify(prob, xf, search)
            found.append((xf, state, eigs, nondeg, prob.level(xf, state)))
        if not found:
            last_err = SearchFailure(f"no nonzero critical point of the reduced action found with N = {n}")
            continue
        nd = [f for f in found if f[3]]
        pool = nd or found
        xf, state, eigs, nondeg, level = min(pool, key=lambda f: (f[4] <= 0, abs(f[4])))
        prev_u = state.u
        if N == "auto" and state.ratio > 0.5 and n != Ns[-1]:
            log.info("N = %d: (Q2) contraction ratio %.3g > 1/2, doubling N", n, state.ratio)
            continue
        v1f = prob.field(xf)
        grad = prob.gradient(xf, state)
        return CriticalPoint(
            v1bar=V1Point(prob.amps_from_full(xf), True, 1),
            level=level,
            hessian_eigs=eigs,
            nondegenerate_mod_S1=nondeg,
            u0=state.u,
            v2=state.v2,
            N=n,
            R=v1f.norm(0.0, q2cfg.s + 1.0),
            grad_norm=float(np.max(np.abs(grad[prob.chart_idx]))),
            mp_level=_mp_level(prob, xf),
            q2_ratio=state.ratio,
            all_levels=sorted(f[4] for f in found),
        )
    raise last_err or SearchFailure("critical point search failed")


# --------------------------------------------------------------------------
# continuation in delta


def pde_residual(nl, delta, u):
    """Relative Galerkin residual of omega^2 U_tt - U_xx + f(x, U) for U = delta u.

    Measured in the (0, s=1) norm at the working truncation.  At delta = 0 the
    rescaled form omega^2 u_tt - u_xx + eps g is used (it vanishes on V).
    """
    omega = omega_of_delta(delta, nl.p, nl.s_star)
    l = np.arange(u.L + 1, dtype=float)[:, None]
    j = np.arange(1, u.J + 1, dtype=float)[None, :]
    lin = -(omega**2) * l**2 + j**2
    if delta == 0:
        F = Field(lin * u.coeffs)
        return F.norm(0.0, 1.0) / u.norm(0.0, 1.0)
    U = u * delta
    F = Field(lin * U.coeffs) + eval_f(nl, U)
    return F.norm(0.0, 1.0) / U.norm(0.0, 1.0)


@dataclass
class BranchPoint:
    delta: float
    omega: float
    eps: float
    v1: Field
    w: Field
    v2: Field
    accepted: bool
    residual: float
    v1_norm: float
    w_norm: float
    amp_dev: float
    rejected_stage: int | None = None
    q1_iterations: int = 0
    q1_residual: float = 0.0
    nm: object = None
    terminated: str = ""

    @property
    def u(self):
        return self.v1 + self.w + self.v2

    @property
    def u_unscaled(self):
        """u~(delta) = delta (v1 + w + v2), in normalized time."""
        return self.u * self.delta


@dataclass
class SolutionBranch:
    points: list
    u0: Field
    sigma: float
    s: float

    CSV_COLUMNS = ("delta", "omega", "v1_norm", "w_norm", "residual", "accepted", "amp_dev", "rejected_stage")

    def csv(self):
        buf = io.StringIO()
        wr = csv.writer(buf, lineterminator="\n")
        wr.writerow(self.CSV_COLUMNS)
        for pt in self.points:
            wr.writerow(
                [
                    repr(float(pt.delta)),
                    repr(float(pt.omega)),
                    repr(float(pt.v1_norm)),
                    repr(float(pt.w_norm)),
                    repr(float(pt.residual)),
                    int(pt.accepted),
                    repr(float(pt.amp_dev)),
                    "" if pt.rejected_stage is None else pt.rejected_stage,
                ]
            )
        return buf.getvalue()

    def to_dict(self):
        return {
            "sigma": self.sigma,
            "s": self.s,
            "points": [
                {
                    "delta": pt.delta,
                    "omega": pt.omega,
                    "eps": pt.eps,
                    "accepted": pt.accepted,
                    "residual": pt.residual,
                    "v1_norm": pt.v1_norm,
                    "w_norm": pt.w_norm,
                    "amp_dev": pt.amp_dev,
                    "rejected_stage": pt.rejected_stage,
                    "q1_iterations": pt.q1_iterations,
                    "q1_residual": pt.q1_residual,
                    "terminated": pt.terminated,
                    "v1_amplitudes": [[float(a.real), float(a.imag)] for a in v_amplitudes(pt.v1)[: _n_active(pt.v1)]],
                }
                for pt in self.points
            ],
        }


def _n_active(v1):
    amps = v_amplitudes(v1)
    nz = np.nonzero(amps)[0]
    return int(nz[-1]) + 1 if nz.size else 0


def solve_q1(nl, delta, x0, prob, sched, tol=1e-12, max_iter=20, jac=None):
    """Newton (Gauss-Newton in the phase-fixed chart) for (Q1) at fixed delta.

    Returns (x_chart, nm_result, iterations, residual_norm, jac).
    """
    x = np.array(x0, dtype=float)
    hist = []
    nm = None
    for it in range(max_iter + 1):
        xf = prob.full_from_chart(x)
        v1 = prob.field(xf)
        nm = nash_moser_run(nl, delta, v1, sched, prob.q2cfg)
        state = nm.q2_state
        r = prob._v1_residual(xf, state, delta)
        rn = float(np.max(np.abs(r)))
        hist.append(rn)
        if rn <= tol:
            return x, nm, it, rn, jac
        op = nm.final_operator if nm.accepted else None
        if op is not None:
            jac = prob._jac_columns(state, prob.chart_idx, delta, op)
        elif jac is None:
            jac = prob._jac_columns(state, prob.chart_idx, delta)
        step = np.linalg.lstsq(jac, -r, rcond=None)[0]
        x = x + step
        if len(hist) >= 4 and hist[-1] > 0.5 * hist[-3]:
            break
    raise NonConvergenceError(f"(Q1) Newton did not converge at delta = {delta}", hist)


def continue_branch(nl, cp, sched, deltas, q2cfg, L=None, J=None, tol=1e-12, max_halvings=4):
    """Predictor-corrector continuation of v1(delta) from the delta = 0 critical point.

    Steps that fail (Newton divergence, collapse onto v1 = 0) are retried
    through intermediate deltas, halving up to ``max_halvings`` times; only
    the requested deltas are reported.
    """
    L = cp.u0.L if L is None else L
    J = cp.u0.J if J is None else J
    if not cp.nondegenerate_mod_S1:
        log.warning("critical point is degenerate modulo time translations; continuation may fail")
    prob = ReducedProblem(nl, L, J, cp.N, q2cfg)
    sigma = sched.sigma_bar / 2
    s = sched.s
    hist_x = [prob.full_from_amps(cp.v1bar.amps)[prob.chart_idx]]
    hist_d = [0.0]
    state = {"jac": None}
    u0 = cp.u0

    def predict(delta):
        if len(hist_x) >= 2 and hist_d[-1] != hist_d[-2]:
            slope = (hist_x[-1] - hist_x[-2]) / (hist_d[-1] - hist_d[-2])
            return hist_x[-1] + slope * (delta - hist_d[-1])
        return hist_x[-1]

    def correct(delta):
        x, nm, its, rn, jac = solve_q1(nl, delta, predict(delta), prob, sched, tol=tol, jac=state["jac"])
        if np.linalg.norm(x) < 0.1 * np.linalg.norm(hist_x[-1]):
            raise NonConvergenceError(f"(Q1) Newton collapsed onto v1 = 0 at delta = {delta}", [rn])
        state["jac"] = jac
        hist_x.append(x)
        hist_d.append(delta)
        return x, nm, its, rn

    pts = []
    for delta in sorted(float(d) for d in deltas):
        eps = eps_of_delta(delta, nl.p, nl.s_star)
        omega = omega_of_delta(delta, nl.p, nl.s_star)
        try:
            pending, depth = [delta], 0
            while pending:
                target = pending[-1]
                try:
                    out = correct(target)
                    pending.pop()
                except (NonConvergenceError, WaveError):
                    depth += 1
                    if depth > max_halvings:
                        raise
                    pending.append(0.5 * (hist_d[-1] + target))
            x, nm, its, rn = out
        except (NonConvergenceError, WaveError) as exc:
            log.warning("branch terminated at delta = %g: %s", delta, exc)
            z = Field.zeros(L, J)
            pts.append(
                BranchPoint(delta, omega, eps, z, z, z, False, math.nan, math.nan, math.nan, math.nan,
                            None, 0, math.nan, None, str(exc))
            )
            break
        xf = prob.full_from_chart(x)
        v1 = prob.field(xf)
        u = v1 + nm.w + nm.v2
        res = pde_residual(nl, delta, u)
        amp_dev = (u * delta - u0 * delta).norm(sigma, s)
        pts.append(
            BranchPoint(
                delta, omega, eps, v1, nm.w, nm.v2, nm.accepted, res,
                v1.norm(sigma, s), nm.w.norm(sigma, s), amp_dev, nm.rejected_stage, its, rn, nm,
            )
        )
    return SolutionBranch(pts, u0, sigma, s)
