"""Step 2 driver: Nash-Moser iteration for the range equation (P).

Stage p solves (P_p)  L_omega w - eps P_p Pi_W Gamma(delta, v1, w) = 0  on
W^(p) (time modes l <= L_p = L0 2^p) by Newton steps, after screening the
parameter with the first-order Melnikov (Diophantine) conditions that
define the nested sets A_p.
"""

from __future__ import annotations

import logging
import math
from dataclasses import dataclass, field as dc_field, asdict

import numpy as np

from .errors import InversionFailure, NonConvergenceError, ValidationError
from .linearized_inverse import LinearizedOperator
from .nonlinearity import g_on_grid
from .q2_solver import solve_q2
from .spectral_field import Field, Subspace, apply_L_omega, project

log = logging.getLogger(__name__)

__all__ = [
    "NashMoserSchedule",
    "DiophantineParams",
    "DiophantineReport",
    "StageRecord",
    "NashMoserResult",
    "diophantine_check",
    "nash_moser_run",
    "omega_of_delta",
    "eps_of_delta",
    "stage_tolerance",
]

# sum_{p >= 0} 1/(p^2 + 1) = (1 + pi coth pi) / 2
LOSS_SERIES = 0.5 * (1.0 + math.pi / math.tanh(math.pi))


def eps_of_delta(delta, p, s_star):
    return s_star * delta ** (p - 1)


def omega_of_delta(delta, p, s_star):
    return math.sqrt(2.0 * s_star * delta ** (p - 1) + 1.0)


@dataclass(frozen=True)
class DiophantineParams:
    gamma: float = 1e-3
    tau: float = 1.5

    def __post_init__(self):
        if not 1.0 < self.tau < 2.0:
            raise ValidationError("tau must lie strictly inside (1, 2)")
        if not 0.0 <= self.gamma < 1.0:
            raise ValidationError("gamma must satisfy 0 <= gamma < 1")

    @staticmethod
    def k_threshold(eps):
        """Pairs with k <= 1/(3|eps|) satisfy the first inequality automatically."""
        return math.inf if eps == 0 else 1.0 / (3.0 * abs(eps))


@dataclass(frozen=True)
class NashMoserSchedule:
    L0: int = 8
    sigma_bar: float = 0.2
    gamma0: float = 0.04
    gamma: float = 1e-3
    tau: float = 1.5
    p_max: int = 5
    delta0: float = 0.15
    s: float = 1.0

    def __post_init__(self):
        if self.L0 < 1 or self.p_max < 0:
            raise ValidationError("need L0 >= 1 and p_max >= 0")
        if not self.sigma_bar > 0:
            raise ValidationError("sigma_bar must be positive")
        if not self.gamma0 > 0 or self.gamma0 * LOSS_SERIES > self.sigma_bar / 2 + 1e-15:
            raise ValidationError(
                f"total analyticity loss gamma0 * {LOSS_SERIES:.4f} must not exceed sigma_bar / 2"
            )
        DiophantineParams(self.gamma, self.tau)

    @property
    def dioph(self):
        return DiophantineParams(self.gamma, self.tau)

    def L(self, p):
        return self.L0 * 2**p

    @property
    def L_max(self):
        return self.L(self.p_max)

    def gamma_p(self, p):
        return self.gamma0 / (p * p + 1.0)

    def sigma(self, p):
        return self.sigma_bar - sum(self.gamma_p(q) for q in range(p))


@dataclass(frozen=True)
class DiophantineReport:
    passed: bool
    worst_margin: float
    worst_pair: tuple | None
    violations: list
    anomalies: list
    warning: str | None = None


def _pair_margins(omega, eps, M, dp, Lp):
    k, j = np.meshgrid(np.arange(1, Lp + 1), np.arange(1, Lp + 1), indexing="ij")
    k, j = k.ravel(), j.ravel()
    keep = k != j
    k, j = k[keep].astype(float), j[keep].astype(float)
    thr = dp.gamma / (k + j) ** dp.tau
    m1 = np.abs(omega * k - j) - thr
    m2 = np.abs(omega * k - j - eps * M / (2.0 * j)) - thr
    return k, j, m1, m2


def diophantine_check(omega, eps, M, dp, Lp):
    """First-order Melnikov conditions for all k != j <= Lp, gated at k > 1/(3|eps|)."""
    warning = "gamma = 0: the Diophantine bound is vacuous" if dp.gamma == 0 else None
    if Lp < 2:
        return DiophantineReport(True, math.inf, None, [], [], warning)
    k, j, m1, m2 = _pair_margins(omega, eps, M, dp, Lp)
    gated = k > dp.k_threshold(eps)
    margin = np.minimum(m1, m2)
    violations = [
        (int(a), int(b), "first" if x < 0 else "second", float(min(x, y)))
        for a, b, x, y in zip(k[gated], j[gated], m1[gated], m2[gated])
        if min(x, y) < 0
    ]
    anomalies = [
        (int(a), int(b), "first" if x < 0 else "second", float(min(x, y)))
        for a, b, x, y in zip(k[~gated], j[~gated], m1[~gated], m2[~gated])
        if min(x, y) < 0
    ]
    if np.any(gated):
        i = int(np.argmin(np.where(gated, margin, np.inf)))
        worst, pair = float(margin[i]), (int(k[i]), int(j[i]))
    else:
        worst, pair = math.inf, None
    return DiophantineReport(not violations, worst, pair, violations, anomalies, warning)


def stage_tolerance(eps, p, cap=1e-10):
    return min(cap, abs(eps) * 2.0 ** (-1.5 * p))


@dataclass
class StageRecord:
    p: int
    L_p: int
    sigma_p: float
    residual: float  # (P)-residual of the iterate entering the stage, all W modes
    solved_residual: float  # ||P_p (P)-residual|| after the Newton steps
    newton_steps: int
    accepted: bool
    reason: str = ""
    M: float = 0.0
    dioph_worst_margin: float = math.inf
    dioph_worst_pair: tuple | None = None
    dioph_anomalies: int = 0
    alpha_min: float = math.inf
    alpha_bound_ok: bool = True
    product_min: float = math.inf
    neumann_ratio: float = 0.0
    q2_ratio: float = 0.0


@dataclass
class NashMoserResult:
    delta: float
    eps: float
    omega: float
    w: Field
    v2: Field
    converged: bool
    accepted: bool
    rejected_stage: int | None
    stages: list = dc_field(default_factory=list)
    final_residual: float = 0.0
    w_norm: float = 0.0
    w_over_eps: float = 0.0
    q2_state: object = None
    final_operator: object = None  # L_{p_max} at the final iterate (accepted runs)

    def report(self):
        """JSON-ready summary (fields are referenced, not embedded)."""
        return {
            "delta": self.delta,
            "eps": self.eps,
            "omega": self.omega,
            "converged": self.converged,
            "accepted": self.accepted,
            "rejected_stage": self.rejected_stage,
            "final_residual": self.final_residual,
            "w_norm_sigma_bar_half": self.w_norm,
            "w_over_eps": self.w_over_eps,
            "stages": [_jsonable(asdict(s)) for s in self.stages],
        }


def _jsonable(d):
    out = {}
    for k, v in d.items():
        if isinstance(v, float) and not math.isfinite(v):
            v = None if math.isnan(v) else ("inf" if v > 0 else "-inf")
        elif isinstance(v, tuple):
            v = list(v)
        out[k] = v
    return out


def _range_residual(nl, delta, eps, omega, w, state):
    """L_omega w - eps Pi_W Gamma on every W mode of the working cutoff."""
    coll = state.coll
    ug = coll.to_grid(state.u.coeffs)
    gam = coll.from_grid(g_on_grid(nl, delta, ug, coll, state.terms))
    R = apply_L_omega(w, omega).coeffs - eps * gam
    return np.where(Subspace.W().mask(w.L, w.J), R, 0.0)


def nash_moser_run(nl, delta, v1, sched, q2cfg, w_init=None, max_newton=12, neumann_tol=1e-13):
    """Run the stage sequence p = 0..p_max; see :class:`NashMoserResult`."""
    if delta < 0 or delta > sched.delta0:
        raise ValidationError(f"delta = {delta} outside [0, delta0 = {sched.delta0}]")
    L, J = v1.L, v1.J
    if sched.L_max > L:
        raise ValidationError(f"field cutoff L = {L} below the final stage cutoff {sched.L_max}")
    eps = eps_of_delta(delta, nl.p, nl.s_star)
    if 1.0 + 2.0 * eps <= 0:
        raise ValidationError("omega^2 = 1 + 2 eps must be positive")
    omega = omega_of_delta(delta, nl.p, nl.s_star)
    dp = sched.dioph
    s = sched.s

    w = Field.zeros(L, J) if w_init is None else project(w_init, Subspace.Wp(sched.L_max))
    state = solve_q2(nl, delta, v1, w, q2cfg)
    stages = []
    rejected = None
    prev_op = None
    for p in range(sched.p_max + 1):
        Lp, sig = sched.L(p), sched.sigma(p)
        full = _range_residual(nl, delta, eps, omega, w, state)
        entry = Field(full).norm(sig, s)
        op = LinearizedOperator(state, eps, omega, Lp, sig, s, prev=prev_op)
        rec = StageRecord(p, Lp, sig, entry, math.nan, 0, False, M=op.M, q2_ratio=state.ratio)
        dio = diophantine_check(omega, eps, op.M, dp, Lp)
        rec.dioph_worst_margin, rec.dioph_worst_pair = dio.worst_margin, dio.worst_pair
        rec.dioph_anomalies = len(dio.anomalies)
        if dio.anomalies:
            log.warning("stage %d: %d ungated pairs violate the Melnikov bound", p, len(dio.anomalies))
        if not dio.passed:
            rec.reason = f"diophantine: {dio.violations[0]}"
            stages.append(rec)
            rejected = p
            break
        if eps != 0:
            ok, alphas = op.alpha_bound_ok(dp.gamma, dp.tau)
            rec.alpha_min = float(np.min(alphas[1:])) if len(alphas) > 1 else math.inf
            rec.alpha_bound_ok = ok
            rec.product_min = op.product_bound_min(dp.tau)
            if not ok:
                rec.reason = "small divisor alpha_k below gamma / k^(tau-1)"
                stages.append(rec)
                rejected = p
                break
        tol_p = stage_tolerance(eps, p)
        mask_p = Subspace.Wp(Lp).mask(L, J)
        history = []
        w_start, state_start = w, state
        steps = 0
        failed = False
        while True:
            Rp = np.where(mask_p, full, 0.0)
            res = Field(Rp).norm(sig, s)
            history.append(res)
            if res <= tol_p or eps == 0:
                break
            if steps >= max_newton or (len(history) >= 3 and history[-1] > 0.5 * history[-3]):
                raise NonConvergenceError(f"Newton stagnated at stage {p}", history)
            try:
                h = op.solve(-Rp, tol=neumann_tol)
            except InversionFailure as exc:
                rec.reason = f"inversion failure: {exc}"
                failed = True
                break
            rec.neumann_ratio = max(rec.neumann_ratio, op.ratio or 0.0)
            w = w + Field(h)
            steps += 1
            state = solve_q2(nl, delta, v1, w, q2cfg, v2_init=state.v2)
            full = _range_residual(nl, delta, eps, omega, w, state)
            op = LinearizedOperator(state, eps, omega, Lp, sig, s, prev=op)
        rec.newton_steps = steps
        rec.solved_residual = history[-1]
        rec.q2_ratio = state.ratio
        if failed:
            w, state = w_start, state_start
            stages.append(rec)
            rejected = p
            break
        rec.accepted = True
        stages.append(rec)
        prev_op = op

    accepted = rejected is None
    final = Field(_range_residual(nl, delta, eps, omega, w, state)).norm(sched.sigma(sched.p_max), s)
    w_norm = w.norm(sched.sigma_bar / 2, s)
    return NashMoserResult(
        delta=delta,
        eps=eps,
        omega=omega,
        w=w,
        v2=state.v2,
        converged=accepted,
        accepted=accepted,
        rejected_stage=rejected,
        stages=stages,
        final_residual=final,
        w_norm=w_norm,
        w_over_eps=w_norm / abs(eps) if eps else 0.0,
        q2_state=state,
        final_operator=prev_op if accepted else None,
    )
