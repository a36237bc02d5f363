"""Density of the admissible parameter set near delta = 0.

Along omega(delta) = sqrt(2 s* delta^{p-1} + 1) each resonance (k, j) removes
the delta-set where

    |omega k - j| < gamma / (k + j)^tau                       (first)
    |omega k - j - eps M / (2 j)| < gamma / (k + j)^tau       (second)

restricted to k > 1/(3|eps|), the same gating the Nash-Moser screen uses.
Both sets are intervals found by inverting omega (the second one through a
quadratic in omega), so their union is exact up to the resonance cutoff
K_max.  A stratified sample checked pair by pair gives an independent
estimate.
"""

from __future__ import annotations

import csv
import io
import logging
import math
from dataclasses import dataclass, field as dc_field

import numpy as np

from .errors import ValidationError

log = logging.getLogger(__name__)

__all__ = [
    "CantorEstimate",
    "excluded_intervals_exact",
    "sampled_density",
    "density_curve",
    "exclusion_bound",
    "merge_intervals",
    "is_excluded",
]


@dataclass
class CantorEstimate:
    eta: float
    density_sampled: float
    density_interval: float
    n_samples: int
    K_max: int
    excluded_intervals: list  # (lo, hi, k, j, which), sorted by lo
    merged: list = dc_field(default_factory=list)
    stderr: float = 0.0
    anomalies: int = 0  # ungated pairs that would violate (should be 0)
    warning: str | None = None

    def summary(self):
        return {
            "eta": self.eta,
            "density_sampled": self.density_sampled,
            "density_interval": self.density_interval,
            "n_samples": self.n_samples,
            "K_max": self.K_max,
            "n_excluded_intervals": len(self.excluded_intervals),
            "n_merged_intervals": len(self.merged),
            "excluded_measure": self.eta * (1.0 - self.density_interval),
            "stderr": self.stderr,
            "anomalies": self.anomalies,
            "warning": self.warning,
        }

    def intervals_csv(self):
        buf = io.StringIO()
        wr = csv.writer(buf, lineterminator="\n")
        wr.writerow(["delta_lo", "delta_hi", "k", "j", "condition"])
        for lo, hi, k, j, which in self.excluded_intervals:
            wr.writerow([repr(float(lo)), repr(float(hi)), k, j, which])
        return buf.getvalue()


def _omega(delta, p, s):
    return np.sqrt(1.0 + 2.0 * s * np.asarray(delta, dtype=float) ** (p - 1))


def _delta_of_omega(om, p, s):
    e = (np.asarray(om, dtype=float) ** 2 - 1.0) / (2.0 * s)
    return np.where(e > 0, np.abs(e), 0.0) ** (1.0 / (p - 1))


def _gate(k, p):
    """delta above which k > 1/(3|eps(delta)|)."""
    return (1.0 / (3.0 * k)) ** (1.0 / (p - 1))


def merge_intervals(iv):
    """Sorted, pairwise-merged union of (lo, hi) intervals."""
    out = []
    for lo, hi in sorted((a, b) for a, b in iv if b > a):
        if out and lo <= out[-1][1]:
            out[-1][1] = max(out[-1][1], hi)
        else:
            out.append([lo, hi])
    return [tuple(x) for x in out]


def _omega_window_second(k, j, c, M):
    """omega-interval where |k omega - j - (omega^2 - 1) M / (4 j)| < c near omega = j/k.

    Returns None when the quadratic has no admissible branch there.
    """
    if M == 0:
        return (j - c) / k, (j + c) / k
    a = -M / (4.0 * j)
    roots = []
    for rhs in (-c, c):
        # a w^2 + k w + cc = 0, root nearest j / k
        cc = -j + M / (4.0 * j) - rhs
        disc = k * k - 4.0 * a * cc
        if disc < 0:
            return None
        sq = math.sqrt(disc)
        # numerically stable root near -cc / k
        q = -0.5 * (k + math.copysign(sq, k))
        roots.append(cc / q)
    return min(roots), max(roots)


def _pair_intervals(p, s, gamma, tau, M_of, eta, K_max):
    """Yield (lo, hi, k, j, which, gated) delta-intervals inside (0, eta)."""
    om_lo, om_hi = sorted((1.0, float(_omega(eta, p, s))))
    for k in range(1, K_max + 1):
        j_min = max(1, int(math.floor(om_lo * k - 1)))
        j_max = min(K_max, int(math.ceil(om_hi * k + 1)))
        for j in range(j_min, j_max + 1):
            if j == k:
                continue
            c = gamma / (k + j) ** tau
            windows = [("first", (j - c) / k, (j + c) / k)]
            # the second condition depends on M at the location; two fixed-point passes
            M = M_of(float(_delta_of_omega(j / k, p, s)) if om_lo < j / k < om_hi else 0.0)
            for _ in range(2):
                w2 = _omega_window_second(k, j, c, M)
                if w2 is None:
                    break
                mid = float(_delta_of_omega(0.5 * (w2[0] + w2[1]), p, s))
                M_new = M_of(min(max(mid, 0.0), eta))
                if M_new == M:
                    break
                M = M_new
            if w2 is not None:
                windows.append(("second", w2[0], w2[1]))
            for which, wlo, whi in windows:
                wlo, whi = max(wlo, om_lo), min(whi, om_hi)
                if whi <= wlo:
                    continue
                d1, d2 = sorted((float(_delta_of_omega(wlo, p, s)), float(_delta_of_omega(whi, p, s))))
                d1, d2 = max(d1, 0.0), min(d2, eta)
                if d2 <= d1:
                    continue
                g = _gate(k, p)
                if d2 > g:
                    yield max(d1, g), d2, k, j, which, True
                if d1 < g:
                    yield d1, min(d2, g), k, j, which, False


def _as_callable(M):
    if callable(M):
        return M
    Mc = float(M)
    return lambda d: Mc


def _interval_estimate(p, s, gamma, tau, M, eta, K_max):
    M_of = _as_callable(M)
    gated, anomalies = [], 0
    for lo, hi, k, j, which, g in _pair_intervals(p, s, gamma, tau, M_of, eta, K_max):
        if g:
            gated.append((lo, hi, k, j, which))
        else:
            anomalies += 1
    gated.sort()
    merged = merge_intervals([(a, b) for a, b, *_ in gated])
    meas = sum(b - a for a, b in merged)
    return 1.0 - meas / eta, gated, merged, anomalies


def _validate(gamma, tau, p, s, eta, K_max):
    if not 0.0 <= gamma < 1.0:
        raise ValidationError("gamma must satisfy 0 <= gamma < 1")
    if not 1.0 < tau < 2.0:
        raise ValidationError("tau must lie strictly inside (1, 2)")
    if int(p) != p or p < 2:
        raise ValidationError("p must be an integer >= 2")
    if s not in (-1, 1):
        raise ValidationError("s_star must be +1 or -1")
    if not eta > 0 or (s < 0 and 2.0 * eta ** (p - 1) >= 1.0):
        raise ValidationError("need eta > 0 with omega(delta) real on (0, eta)")
    if K_max < 2:
        raise ValidationError("K_max must be >= 2")


def excluded_intervals_exact(dp, p, s_star, M, eta, K_max, n_samples=0, seed=0, check_stability=True):
    """Exact union of excluded delta-intervals in (0, eta) for k, j <= K_max.

    ``M`` is a constant or a callable delta -> M(delta) (e.g. interpolated
    from solved branch samples).  With ``n_samples > 0`` the stratified
    sampling estimate is attached.
    """
    gamma, tau = dp.gamma, dp.tau
    _validate(gamma, tau, p, s_star, eta, K_max)
    dens, gated, merged, anomalies = _interval_estimate(p, s_star, gamma, tau, M, eta, K_max)
    warning = None
    if check_stability and gamma > 0:
        d2 = _interval_estimate(p, s_star, gamma, tau, M, eta, 2 * K_max)[0]
        if abs(d2 - dens) > 1e-3:
            warning = f"K_max = {K_max} does not stabilize the density (2 K_max moves it by {abs(d2 - dens):.2e})"
            log.warning(warning)
    if anomalies:
        log.warning("%d ungated resonances intersect (0, %g)", anomalies, eta)
    ds, se = (math.nan, 0.0)
    if n_samples:
        ds, se = sampled_density(dp, p, s_star, M, eta, n_samples, K_max, seed)
    return CantorEstimate(eta, ds, dens, int(n_samples), int(K_max), gated, merged, se, anomalies, warning)


def is_excluded(delta, dp, p, s_star, M, K_max):
    """Direct check of every pair k != j <= K_max at the points ``delta`` (vectorized)."""
    delta = np.atleast_1d(np.asarray(delta, dtype=float))
    M_of = _as_callable(M)
    Mv = np.array([M_of(float(d)) for d in delta]) if callable(M) else np.full(delta.shape, float(M))
    om = _omega(delta, p, s_star)
    eps = s_star * delta ** (p - 1)
    thr_k = np.where(eps != 0, 1.0 / (3.0 * np.abs(np.where(eps != 0, eps, 1.0))), np.inf)
    bad = np.zeros(delta.shape, dtype=bool)
    for k in range(1, K_max + 1):
        active = k > thr_k
        if not np.any(active):
            continue
        # only j within 1 of omega k can violate a threshold below 1/2
        base = np.rint(om * k).astype(int)
        for dj in (-1, 0, 1):
            j = base + dj
            ok = (j >= 1) & (j <= K_max) & (j != k) & active
            if not np.any(ok):
                continue
            jf = np.where(ok, j, 1).astype(float)
            c = dp.gamma / (k + jf) ** dp.tau
            m1 = np.abs(om * k - jf) < c
            m2 = np.abs(om * k - jf - eps * Mv / (2.0 * jf)) < c
            bad |= ok & (m1 | m2)
    return bad


def sampled_density(dp, p, s_star, M, eta, n, K_max, seed=0):
    """Stratified estimate: one jittered point per cell of a uniform n-grid on (0, eta).

    Returns (density, standard error).
    """
    rng = np.random.default_rng(seed)
    delta = (np.arange(n) + rng.random(n)) * (eta / n)
    bad = is_excluded(delta, dp, p, s_star, M, K_max)
    dens = 1.0 - bad.mean()
    se = math.sqrt(max(dens * (1.0 - dens), 0.0) / n)
    return float(dens), se


def density_curve(dp, p, s_star, M, etas, n_samples=100_000, K_max=200, seed=0):
    """CantorEstimate per eta (eta list given in decreasing order)."""
    etas = [float(e) for e in etas]
    if any(b >= a for a, b in zip(etas[:-1], etas[1:])):
        raise ValidationError("eta list must be strictly decreasing")
    return [excluded_intervals_exact(dp, p, s_star, M, e, K_max, n_samples, seed) for e in etas]


def exclusion_bound(dp, p, s_star, M, eta, K_max):
    """Upper bound on the excluded measure: each pair's omega-width over min |d omega / d delta|.

    Gives the sanity inequality density >= 1 - bound / eta.
    """
    gamma, tau = dp.gamma, dp.tau
    om_lo, om_hi = sorted((1.0, float(_omega(eta, p, s_star))))
    Mabs = abs(float(M)) if not callable(M) else max(abs(M(d)) for d in np.linspace(0, eta, 65))
    total = 0.0
    for k in range(1, K_max + 1):
        g = _gate(k, p)
        if g >= eta:
            continue
        # |d omega / d delta| = (p-1) delta^{p-2} / omega, minimized on [g, eta]
        cand = [(p - 1) * d ** (p - 2) / float(_omega(d, p, s_star)) for d in (g, eta)]
        slope = min(cand)
        for j in range(max(1, int(om_lo * k) - 1), min(K_max, int(math.ceil(om_hi * k)) + 1) + 1):
            if j == k:
                continue
            c = gamma / (k + j) ** tau
            total += (2.0 * c / k) / slope
            h_min = k - Mabs * om_hi / (2.0 * j)
            total += (2.0 * c / h_min) / slope if h_min > 0 else eta
    return total
