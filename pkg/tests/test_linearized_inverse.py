import math

import numpy as np
import pytest

from oracles import fd_dirichlet_eigs
from resonant_wave.linearized_inverse import (
    LinearizedOperator,
    assemble_and_invert_Lp,
    check_asymptotics,
    potential_matrix,
    sl_spectrum,
    spectrum_csv,
)
from resonant_wave.nash_moser import NashMoserSchedule, _range_residual, nash_moser_run
from resonant_wave.nonlinearity import CoeffProfile, Nonlinearity, melnikov_M
from resonant_wave.q2_solver import Q2Config, solve_q2
from resonant_wave.spectral_field import Field, Subspace, from_v_amplitudes, project

CUBIC = Nonlinearity(3, {3: CoeffProfile.constant(1.0)})
SIN_X_BASELINE = 9.006285643895591e-4  # sup r_j for a0 = sin x, eps = 0.02, J = 200 (first verified run)


def test_free_laplacian():
    sp = sl_spectrum(0.0, CoeffProfile(sin=(1.0,)), 2, 12)
    assert np.array_equal(sp.eigenvalues, sp.basis.astype(float) ** 2)
    assert np.allclose(np.abs(sp.eigenvectors), np.eye(11), atol=0)
    assert 2 not in sp.basis


@pytest.mark.parametrize("eps", [0.02, -0.05, 0.3])
def test_constant_potential_shift(eps):
    sp = sl_spectrum(eps, CoeffProfile.constant(1.0), 1, 40)
    assert np.max(np.abs(sp.eigenvalues - (sp.basis**2 + eps))) <= 1e-12 * 1600
    assert np.max(np.abs(sp.deviation - eps)) <= 1e-13


def test_cos2x_matches_finite_difference_solver():
    eps = 0.01
    sp = sl_spectrum(eps, CoeffProfile(cos=(0.0, 0.0, 1.0)), 0, 64)
    ref = fd_dirichlet_eigs(eps, lambda x: np.cos(2 * x), 5)
    assert np.max(np.abs(sp.eigenvalues[:5] - ref)) <= 1e-7


def test_potential_matrix_is_symmetric():
    P = potential_matrix(CoeffProfile(poly=(0.0, 1.0), cos=(0.2, 0.3)), 30)
    assert np.max(np.abs(P - P.T)) <= 1e-13


@pytest.mark.parametrize("a0", [CoeffProfile(), CoeffProfile.constant(1.0)])
@pytest.mark.parametrize("k", [0, 1, 3])
def test_asymptotics_vanish_for_trivial_potentials(a0, k):
    eps = 0.02
    sp = sl_spectrum(eps, a0, k, 200)
    rep = check_asymptotics(sp, eps, melnikov_M(a0) if not a0.is_zero() else 0.0, a0)
    assert rep.sup <= 1e-10 and rep.passed


@pytest.mark.parametrize("k", [0, 1, 2, 3])
def test_asymptotics_sin_x_regression(k):
    a0 = CoeffProfile(sin=(1.0,))
    sp = sl_spectrum(0.02, a0, k, 200)
    rep = check_asymptotics(sp, 0.02, melnikov_M(a0), a0)
    assert rep.passed and rep.slope < 0
    assert math.isclose(rep.sup, SIN_X_BASELINE, rel_tol=1e-6)


def test_spectrum_csv_header_and_rows():
    sp = sl_spectrum(0.0, CoeffProfile.constant(1.0), 1, 5)
    text = spectrum_csv([sp], 1.0).splitlines()
    assert text[0] == "k,j,lambda,divisor"
    assert len(text) == 1 + 4


# operators at a converged state ---------------------------------------------

L, J = 16, 24
SCHED = NashMoserSchedule(L0=4, p_max=2)
DELTA = 0.05


@pytest.fixture(scope="module")
def converged():
    v1 = from_v_amplitudes([0.94], L, J)
    res = nash_moser_run(CUBIC, DELTA, v1, SCHED, Q2Config(N=1))
    assert res.accepted
    return v1, res


def test_eps_zero_is_diagonal_division():
    v1 = from_v_amplitudes([0.5], 8, 10)
    state = solve_q2(CUBIC, 0.0, v1, Field.zeros(8, 10), Q2Config(N=1))
    omega = 1.0
    c = np.full((9, 10), 1 + 0.5j)
    c[0] = 1.0
    rhs = project(Field(c), Subspace.Wp(4))
    h, _ = assemble_and_invert_Lp(state, 0.0, omega, 4, rhs)
    l = np.arange(9)[:, None]
    j = np.arange(1, 11)[None, :]
    div = np.where(Subspace.Wp(4).mask(8, 10), omega**2 * l**2 - j**2, 1.0)
    assert np.max(np.abs(h.coeffs - np.where(Subspace.Wp(4).mask(8, 10), rhs.coeffs / div, 0))) <= 1e-15


def test_time_independent_potential_inverts_in_one_shot():
    # v1 = 0, w = 0: a = 0 and dv2 = 0, so D is the whole operator
    st = solve_q2(CUBIC, 0.0, Field.zeros(8, 10), Field.zeros(8, 10), Q2Config(N=1))
    op = LinearizedOperator(st, 0.02, math.sqrt(1.04), 4, 0.0, 1.0)
    rng = np.random.default_rng(0)
    rhs = rng.standard_normal((9, 10)) + 1j * rng.standard_normal((9, 10))
    rhs[0] = rhs[0].real
    rhs = np.where(op.mask, rhs, 0)
    h = op.solve(rhs)
    assert not np.any(op.apply_M(h))
    assert np.max(np.abs(op.apply(h) - rhs)) <= 1e-12 * np.max(np.abs(rhs))


def test_D_blocks_are_symmetric(converged):
    _, res = converged
    op = res.final_operator
    for k, sp in enumerate(op.spectra):
        idx = sp.basis - 1
        A = np.diag(sp.basis.astype(float) ** 2) + op.eps * op.P[np.ix_(idx, idx)]
        assert np.max(np.abs(A - A.T)) <= 1e-13 * np.max(np.abs(A))


def test_D_inverse_inverts_D(converged):
    _, res = converged
    op = res.final_operator
    rng = np.random.default_rng(1)
    c = rng.standard_normal((L + 1, J)) + 1j * rng.standard_normal((L + 1, J))
    c[0] = c[0].real
    c = np.where(op.mask, c, 0)
    assert np.max(np.abs(op.apply_D(op.apply_D_inv(c)) - c)) <= 1e-11


def _fd_operator(v1, res, h, t):
    nl = CUBIC
    eps, omega = res.eps, res.omega

    def F(w):
        st = solve_q2(nl, DELTA, v1, w, Q2Config(N=1, tol=1e-15), v2_init=res.v2)
        return _range_residual(nl, DELTA, eps, omega, w, st)

    hf = Field(h)
    d = lambda s: (F(res.w + hf * s) - F(res.w - hf * s)) / (2 * s)
    return (4 * d(t / 2) - d(t)) / 3


def test_operator_consistency_with_finite_differences(converged):
    v1, res = converged
    op = res.final_operator
    rng = np.random.default_rng(2)
    rhs = (rng.standard_normal((L + 1, J)) + 1j * rng.standard_normal((L + 1, J))) * 1e-3
    rhs[0] = rhs[0].real
    rhs = np.where(op.mask, rhs, 0)
    tol = 1e-12
    h = op.solve(rhs, tol=tol)
    applied = np.where(op.mask, _fd_operator(v1, res, h, 1e-2), 0)
    rel = op.norm(applied - rhs) / op.norm(rhs)
    assert rel <= 10 * max(tol, 1e-10)
    assert op.ratio < 1


def test_m2_shrinks_with_smoothing():
    """||M2|| estimated by probes decreases when the (Q2) split moves up (N larger)."""
    rng = np.random.default_rng(3)
    v1 = from_v_amplitudes([0.94], L, J)
    norms = []
    for N in (1, 3, 5):
        v1N = v1 if N == 1 else v1 + project(solve_q2(CUBIC, 0.0, v1, Field.zeros(L, J), Q2Config(N=1)).v2, Subspace.V1(N))
        st = solve_q2(CUBIC, 0.0, v1N, Field.zeros(L, J), Q2Config(N=N))
        op = LinearizedOperator(st, 0.02, math.sqrt(1.04), 8, 0.0, 1.0)
        best = 0.0
        for _ in range(5):
            c = rng.standard_normal((L + 1, J)) + 1j * rng.standard_normal((L + 1, J))
            c[0] = c[0].real
            c = np.where(op.mask, c, 0)
            m1 = op._restrict(op.eps * op.coll.from_grid(op.abar_grid * op.coll.to_grid(c)))
            m2 = op.apply_M(c) - m1
            best = max(best, op.norm(m2) / op.norm(c))
        norms.append(best)
    assert norms[0] > norms[1] > norms[2]
