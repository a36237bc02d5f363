"""Acceptance criteria 1-10.  Each test prints one PASS/FAIL line (also listed
in the terminal summary) and then asserts."""

import math
import time

import numpy as np

from conftest import ACCEPTANCE_LINES, random_field
from oracles import full_space_newton
from resonant_wave.bifurcation import (
    ReducedProblem,
    continue_branch,
    find_critical_point,
    phi0,
    phi0_gradient,
)
from resonant_wave.cantor_measure import density_curve
from resonant_wave.cli import melnikov_at
from resonant_wave.collocation import get_collocation
from resonant_wave.linearized_inverse import check_asymptotics, sl_spectrum
from resonant_wave.nash_moser import DiophantineParams, NashMoserSchedule
from resonant_wave.nonlinearity import (
    CoeffProfile,
    Nonlinearity,
    du_g_on_grid,
    eval_g,
    melnikov_M,
    sup_bound,
)
from resonant_wave.q2_solver import Q2Config, dv2_apply, solve_q2
from resonant_wave.spectral_field import (
    Field,
    Subspace,
    from_v_amplitudes,
    l2_inner,
    project,
)

ULP4 = 4 * np.finfo(float).eps


def record(n, title, ok, detail):
    line = f"[{'PASS' if ok else 'FAIL'}] criterion {n:2d}: {title} -- {detail}"
    print(line)
    ACCEPTANCE_LINES.append(line)
    assert ok, line


def accepted_points(branch):
    return [p for p in branch.points if p.delta > 0 and p.accepted]


def test_criterion_01_end_to_end_residual(cubic_nl, cubic_cp, cubic_sched):
    out = []
    for d in (0.02, 0.05, 0.1):
        t0 = time.perf_counter()
        pt = continue_branch(cubic_nl, cubic_cp, cubic_sched, [d], Q2Config(N=cubic_cp.N)).points[-1]
        out.append((d, pt.accepted, pt.residual, time.perf_counter() - t0))
    ok = all(a and r <= 1e-8 and t <= 120 for _, a, r, t in out)
    detail = "; ".join(f"delta={d:g}: accepted={a} residual={r:.2e} time={t:.1f}s" for d, a, r, t in out)
    record(1, "PDE residual <= 1e-8 at 3 accepted deltas", ok, detail)


def test_criterion_02_amplitude_law(cubic_branch):
    pts = accepted_points(cubic_branch)
    d = np.array([p.delta for p in pts])
    dev = np.array([p.amp_dev for p in pts])
    slope = float(np.polyfit(np.log(d), np.log(dev), 1)[0])
    decade = d.max() / d.min()
    record(2, "log-log slope of ||u~ - delta u0|| >= 1.9", slope >= 1.9 and decade >= 10 - 1e-9,
           f"slope={slope:.4f} over delta in [{d.min():g}, {d.max():g}] ({len(d)} accepted points)")


def test_criterion_03_frequency_law(cubic_branch, nonodd_branch):
    errs = []
    for br, p in ((cubic_branch, 3), (nonodd_branch, 2)):
        for pt in br.points:
            errs.append(abs(pt.omega**2 - 1 - 2 * pt.delta ** (p - 1)))
    worst = max(errs)
    record(3, "omega^2 - 1 - 2 s* delta^(p-1) = 0", worst <= ULP4, f"max deviation {worst:.2e} over {len(errs)} rows")


def test_criterion_04_eigenvalue_asymptotics():
    eps, J = 0.02, 200
    cases = {"1": CoeffProfile.constant(1.0), "sin x": CoeffProfile(sin=(1.0,)), "cos 2x": CoeffProfile(cos=(0.0, 0.0, 1.0))}
    ok, parts = True, []
    for name, a0 in cases.items():
        sups = []
        for k in (0, 1, 2, 3):
            rep = check_asymptotics(sl_spectrum(eps, a0, k, J), eps, melnikov_M(a0), a0)
            ok &= rep.passed and rep.slope <= 0.5
            sups.append(rep.sup)
        if name == "1":
            ok &= max(sups) <= 1e-10
        parts.append(f"a0={name}: sup r={max(sups):.2e}")
    zero = CoeffProfile()
    sup0 = max(check_asymptotics(sl_spectrum(eps, zero, k, J), eps, 0.0, zero).sup for k in (0, 1, 2, 3))
    ok &= sup0 <= 1e-10
    parts.append(f"a0=0: sup r={sup0:.1e}")
    record(4, "r_j bounded up to J = 200; vanishes for a0 in {0, 1}", ok, "; ".join(parts))


def test_criterion_05_small_divisors(cubic_branch, nonodd_branch):
    ok, amin, pmin, n = True, math.inf, math.inf, 0
    for br in (cubic_branch, nonodd_branch):
        for pt in accepted_points(br):
            for st in pt.nm.stages:
                n += 1
                ok &= st.alpha_bound_ok and st.product_min > 0
                amin, pmin = min(amin, st.alpha_min), min(pmin, st.product_min)
    record(5, "alpha_k >= gamma / k^(tau-1) and product floor > 0", ok and n > 0,
           f"{n} accepted stages; min alpha={amin:.4g}; min alpha_k alpha_l/|eps|^(tau-1)={pmin:.4g}")


def test_criterion_06_cantor_density(cubic_nl, cubic_cp):
    n = 100_000
    M = melnikov_at(cubic_nl, 0.0, cubic_cp.u0)
    ests = density_curve(DiophantineParams(1e-3, 1.5), 3, 1, M, (0.2, 0.1, 0.05), n_samples=n, K_max=200)
    d = [e.density_interval for e in ests]
    agree = max(abs(e.density_sampled - e.density_interval) for e in ests)
    ok = all(x >= 0.9 for x in d) and d == sorted(d) and agree <= 2 / math.sqrt(n)
    record(6, "densities >= 0.9, nondecreasing, sampled ~ interval", ok,
           f"M={M:.4f}; densities {', '.join(f'{x:.6f}' for x in d)}; max |sampled - interval|={agree:.1e}")


def test_criterion_07_oracle_equivalence(cubic_nl):
    L = J = 12
    delta = 0.05
    sched = NashMoserSchedule(L0=3, p_max=2)
    cp = find_critical_point(cubic_nl, L, J, Q2Config(N=1), N="auto")
    pt = continue_branch(cubic_nl, cp, sched, [delta], Q2Config(N=cp.N)).points[-1]
    c0 = from_v_amplitudes([math.sqrt(2 / 2.25)], L, J).coeffs
    ref, hist = full_space_newton({3: lambda x: np.ones_like(x)}, 3, 1, delta, c0)
    # phase alignment: both are normalized to Im u_{1,1} = 0, Re u_{1,1} > 0
    u = pt.u.coeffs
    diff = Field(u - ref).norm(0.0, 1.0)
    ok = pt.accepted and diff <= 1e-6 and hist[-1] < 1e-12
    record(7, "full-space Newton agrees with pipeline (cutoffs 12)", ok,
           f"||u_pipeline - u_oracle||_(0,1)={diff:.2e}; oracle Newton iterations={len(hist)}")


def test_criterion_08_convergence_structure(cubic_cp, cubic_branch, nonodd_cp, nonodd_branch):
    ok, checked, worst = True, 0, 0.0
    ratios = [cubic_cp.q2_ratio, nonodd_cp.q2_ratio]
    for br in (cubic_branch, nonodd_branch):
        for pt in accepted_points(br):
            r = [s.residual for s in pt.nm.stages]
            ok &= len(r) >= 3
            for a, b in zip(r[:-1], r[1:]):
                if a < 1e-2:
                    checked += 1
                    ok &= b <= a**1.5
                    worst = max(worst, b / a**1.5)
            ratios += [s.q2_ratio for s in pt.nm.stages]
    ok &= checked > 0 and max(ratios) <= 0.5
    record(8, "residual_(p+1) <= residual_p^1.5 below 1e-2; (Q2) ratio <= 1/2", ok,
           f"{checked} stage pairs checked, max r_(p+1)/r_p^1.5={worst:.2e}; max (Q2) ratio={max(ratios):.3f}")


def test_criterion_09_non_odd_nonlinearity(nonodd_cp, nonodd_branch):
    pts = nonodd_branch.points
    ok = nonodd_cp.nondegenerate_mod_S1 and len(pts) == 3 and all(p.accepted and p.residual <= 1e-8 for p in pts)
    record(9, "f = x u^2 + u^3: pipeline succeeds, residual <= 1e-8", ok,
           "; ".join(f"delta={p.delta:g}: accepted={p.accepted} residual={p.residual:.2e}" for p in pts))


def test_criterion_10_invariant_suites():
    rng = np.random.default_rng(2024)
    fails = []

    # projector algebra and reality
    for _ in range(10):
        u = random_field(rng, 6, 8)
        V, W = Subspace.V(), Subspace.W()
        if not np.array_equal((project(u, V) + project(u, W)).coeffs, u.coeffs):
            fails.append("V + W")
        if np.any(project(project(u, V), W).coeffs):
            fails.append("V W = 0")
        for tag in (Subspace.V1(3), Subspace.V2(3), Subspace.Wp(4), Subspace.WpPerp(4)):
            if not np.array_equal(project(project(u, tag), tag).coeffs, project(u, tag).coeffs):
                fails.append(f"idempotent {tag.kind}")
        vals = u.values(rng.random(4) * 6.28, rng.random(4) * 3.14)
        if not np.all(np.isreal(vals)):
            fails.append("reality")
        # norm monotonicity
        a, b = u.norm(0.1, 1.0), u.norm(0.3, 1.0)
        c = u.norm(0.1, 2.0)
        if not (a <= b and a <= c):
            fails.append("norm monotonicity")

    # gradient of Phi0
    a3 = CoeffProfile.constant(1.0)
    for _ in range(5):
        v = from_v_amplitudes(0.5 * (rng.standard_normal(3) + 1j * rng.standard_normal(3)), 8, 10)
        h = from_v_amplitudes(rng.standard_normal(3) + 1j * rng.standard_normal(3), 8, 10)
        t = 1e-5
        fd = (phi0(v + h * t, a3, 3) - phi0(v - h * t, a3, 3)) / (2 * t)
        an = l2_inner(phi0_gradient(v, a3, 3), h)
        if abs(fd - an) > 1e-6 * max(1, abs(an)):
            fails.append("Phi0 gradient")

    # gradient of the reduced action
    nl = Nonlinearity(3, {3: a3})
    prob = ReducedProblem(nl, 12, 16, 2, Q2Config(N=2, tol=1e-15))
    for _ in range(3):
        xf, h = 0.25 * rng.standard_normal(4), rng.standard_normal(4)
        t = 1e-5
        fd = (prob.level(xf + t * h) - prob.level(xf - t * h)) / (2 * t)
        an = prob.gradient(xf) @ h
        if abs(fd - an) > 1e-6 * max(1, abs(an)):
            fails.append("reduced gradient")

    # derivative of g (central difference at t = 1e-4, exact Galerkin product on the grid)
    nl4 = Nonlinearity(3, {3: a3, 4: CoeffProfile(poly=(0.0, 1.0))})
    for _ in range(3):
        u, h = random_field(rng, 3, 6, 0.3), random_field(rng, 3, 6, 0.3)
        t = 1e-4
        fd = (eval_g(nl4, 0.1, u + h * t).coeffs - eval_g(nl4, 0.1, u - h * t).coeffs) / (2 * t)
        terms = nl4.active_terms(0.1, sup_bound(u))
        coll = get_collocation(u.L, u.J, max(terms), extra_freq=nl4.max_freq)
        prod = coll.from_grid(du_g_on_grid(nl4, 0.1, coll.to_grid(u.coeffs), coll, terms) * coll.to_grid(h.coeffs))
        rel = np.max(np.abs(fd - prod)) / max(1.0, np.max(np.abs(prod)))
        if rel > 1e-6:
            fails.append(f"g derivative {rel:.1e}")

    # derivative of v2
    L, J = 6, 8
    for _ in range(3):
        v1 = from_v_amplitudes([0.5, 0.2 + 0.1j], L, J)
        w = project(random_field(rng, L, J, 0.05), Subspace.W())
        h = project(random_field(rng, L, J, 1.0), Subspace.W())
        cfg = Q2Config(N=2, tol=1e-15)
        st = solve_q2(nl4, 0.03, v1, w, cfg)
        t = 1e-5
        fd = (solve_q2(nl4, 0.03, v1, w + h * t, cfg).v2.coeffs - st.v2.coeffs) / t
        an = dv2_apply(st, h).coeffs
        if np.max(np.abs(fd - an)) > 1e-5 * max(1.0, np.max(np.abs(an))):
            fails.append("v2 derivative")

    record(10, "projector, reality, norm, gradient and derivative checks", not fails,
           "all checks passed" if not fails else ", ".join(sorted(set(fails))))
