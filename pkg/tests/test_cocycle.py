import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from spectra.cocycle import (
    FourierMatrixSpec,
    cocycle_product,
    empirical_cB,
    eval_direct_B,
    eval_internal_B,
    expected_steps,
    fibonacci_q,
    internal_spec,
    riesz_limit,
    window_ft,
)

TAU = (1 + 5**0.5) / 2
SIGMA = 1 - TAU
ALL = ["fibonacci", "pisa_3", "pisa_5", "pisa_6", "tribonacci", "twisted_tribonacci", "pisa4",
       "twisted_fib_ext", "rho_prime", "rho_tilde"]


def setup(s):
    return internal_spec(s), s.emb.R, 1 / s.pf.lam


def rand_y(s, n, seed=0, scale=3.0):
    return np.random.default_rng(seed).uniform(-scale, scale, (n, s.emb.internal_dim))


@pytest.mark.parametrize("name", ALL)
def test_B_at_zero_is_M(sys_of, name):
    s = sys_of(name)
    spec = internal_spec(s)
    B0 = eval_internal_B(spec, np.zeros(spec.dim))
    assert np.array_equal(np.rint(B0.real).astype(int), s.M)
    assert np.all(np.abs(B0.imag) == 0)


def test_B_fibonacci(sys_of):
    spec = internal_spec(sys_of("fibonacci"))
    for y in (0.3, -1.7, 4.2):
        expected = np.array([[1, 1], [np.exp(2j * np.pi * SIGMA * y), 0]])
        assert np.allclose(eval_internal_B(spec, [y]), expected, atol=1e-14)


def test_B_pisa4_single_exponential(sys_of):
    # the one off-diagonal term of the first row is e(y) for the displacement lam
    s = sys_of("pisa4")
    emb = s.emb
    mu, alpha = emb.real_roots[1], emb.complex_roots[0]
    y = np.array([0.3, -0.7, 1.1])
    e = np.exp(2j * np.pi * (mu * y[0] + alpha.real * y[1] + alpha.imag * y[2]))
    B = eval_internal_B(internal_spec(s), y)
    assert B[1, 0] == pytest.approx(e, abs=1e-13)


def test_dimension_mismatch(sys_of):
    spec = internal_spec(sys_of("tribonacci"))
    with pytest.raises(ValueError):
        eval_internal_B(spec, [0.1, 0.2, 0.3])


def test_spec_multiplicity_check():
    with pytest.raises(ValueError):
        FourierMatrixSpec.from_cells([[np.zeros(1)]], np.array([[2]]))


def test_cocycle_trivial_cases(sys_of):
    s = sys_of("tribonacci")
    spec, R, _ = setup(s)
    y = np.array([0.4, -0.2])
    assert np.array_equal(cocycle_product(spec, R, y, 0), np.eye(3))
    P5 = cocycle_product(spec, R, np.zeros(2), 5)
    assert np.allclose(P5, np.linalg.matrix_power(s.M, 5))


@pytest.mark.parametrize("name", ["fibonacci", "tribonacci", "pisa4", "rho_prime"])
def test_cocycle_identity(sys_of, name):
    s = sys_of(name)
    spec, R, _ = setup(s)
    for y in rand_y(s, 10):
        lhs = cocycle_product(spec, R, y, 7)
        rhs = cocycle_product(spec, R, y, 3) @ cocycle_product(spec, R, np.linalg.matrix_power(R, 3) @ y, 4)
        assert np.max(np.abs(lhs - rhs)) < 1e-10


@pytest.mark.parametrize("name", ["tribonacci", "twisted_tribonacci", "pisa4"])
def test_cocycle_entrywise_bound(sys_of, name):
    s = sys_of(name)
    spec, R, _ = setup(s)
    Y = rand_y(s, 50, seed=3, scale=10)
    for n in (1, 5, 12, 20):
        P = cocycle_product(spec, R, Y, n)
        Mn = np.linalg.matrix_power(s.M.astype(float), n)
        assert np.all(np.abs(P) <= Mn + 1e-9)


def test_riesz_at_zero(sys_of):
    s = sys_of("tribonacci")
    spec, R, beta = setup(s)
    res = riesz_limit(spec, R, beta, np.zeros(2), s.pf.v)
    assert np.max(np.abs(res.C - s.pf.P)) < 1e-10
    assert np.allclose(res.c, s.pf.v, atol=1e-10)
    assert res.residual < 1e-10


@pytest.mark.parametrize("name", ALL)
def test_riesz_structure(sys_of, name):
    s = sys_of(name)
    spec, R, beta = setup(s)
    res = riesz_limit(spec, R, beta, rand_y(s, 200, seed=7), s.pf.v)
    assert np.all(res.residual < 1e-10)
    assert np.all(res.rank1_ratio < 1e-6)
    # C(y) M = lam C(y)
    assert np.max(np.abs(res.C @ s.M - s.pf.lam * res.C)) < 1e-8
    # rows are multiples of u
    u = s.pf.u / np.linalg.norm(s.pf.u)
    for C in res.C:
        for row in C:
            nr = np.linalg.norm(row)
            if nr > 1e-8:
                assert 1 - abs(np.vdot(u, row)) / nr < 1e-6


@pytest.mark.parametrize("name", ["fibonacci", "tribonacci", "twisted_fib_ext"])
def test_hermitian_symmetry(sys_of, name):
    s = sys_of(name)
    spec, R, beta = setup(s)
    Y = rand_y(s, 50, seed=11)
    a = riesz_limit(spec, R, beta, Y, s.pf.v)
    b = riesz_limit(spec, R, beta, -Y, s.pf.v)
    assert np.max(np.abs(a.C - np.conj(b.C))) < 1e-10


@pytest.mark.parametrize("name", ["fibonacci", "tribonacci", "pisa4", "rho_tilde"])
def test_transfer_equation(sys_of, win_of, name):
    s = sys_of(name)
    spec, R, beta = setup(s)
    eta = win_of(name).eta
    Y = rand_y(s, 50, seed=5)
    f = window_ft(riesz_limit(spec, R, beta, Y, s.pf.v), eta)
    fR = window_ft(riesz_limit(spec, R, beta, Y @ R.T, s.pf.v), eta)
    B = eval_internal_B(spec, Y)
    assert np.max(np.abs(f - beta * np.einsum("nij,nj->ni", B, fR))) < 1e-8


def test_fibonacci_component_relation(sys_of):
    s = sys_of("fibonacci")
    spec, R, beta = setup(s)
    y = np.linspace(-5, 5, 41)
    c = riesz_limit(spec, R, beta, y[:, None], s.pf.v).c
    ca_s = riesz_limit(spec, R, beta, SIGMA * y[:, None], s.pf.v).c[:, 0]
    # c_a enters at sigma*y; with c_a(y) in place of c_a(sigma*y) the identity fails
    assert np.max(np.abs(c[:, 1] - abs(SIGMA) * np.exp(2j * np.pi * SIGMA * y) * ca_s)) < 1e-10
    assert np.max(np.abs(c[:, 1] - abs(SIGMA) * np.exp(2j * np.pi * SIGMA * y) * c[:, 0])) > 1e-2


def test_fibonacci_window_ft_matches_intervals(sys_of, win_of):
    s = sys_of("fibonacci")
    spec, R, beta = setup(s)
    sol = win_of("fibonacci")
    y = np.linspace(-5, 5, 101)
    f = window_ft(riesz_limit(spec, R, beta, y[:, None], s.pf.v), sol.eta)
    for i, W in enumerate(sol.windows):
        assert np.max(np.abs(f[:, i] - W.ft(y))) < 1e-8


@pytest.mark.parametrize("n, tol", [(40, 1e-6), (80, 1e-9)])
def test_fibonacci_q_recursion(sys_of, n, tol):
    s = sys_of("fibonacci")
    spec, R, beta = setup(s)
    y = np.linspace(-5, 5, 101)
    ca = riesz_limit(spec, R, beta, y[:, None], s.pf.v, tol=1e-13).c[:, 0]
    assert np.max(np.abs(fibonacci_q(y, n) - ca)) < tol


def test_direct_B(sys_of):
    s = sys_of("fibonacci")
    T = [[np.array([t.real_value() for t in cell]) for cell in row] for row in s.T.T]
    assert np.allclose(eval_direct_B(T, 0.0, s.M), s.M)
    B = eval_direct_B(T, 0.5, s.M)
    assert B[1, 0] == pytest.approx(np.exp(1j * np.pi * TAU), abs=1e-14)


@settings(max_examples=40, deadline=None)
@given(st.floats(-50, 50))
def test_direct_B_bound(sys_of, k):
    s = sys_of("tribonacci")
    T = [[np.array([t.real_value() for t in cell]) for cell in row] for row in s.T.T]
    assert np.all(np.abs(eval_direct_B(T, k, s.M)) <= s.M + 1e-12)


def test_non_convergence_reported(sys_of):
    s = sys_of("tribonacci")
    spec, R, beta = setup(s)
    res = riesz_limit(spec, R, beta, np.array([0.7, 0.3]), s.pf.v, tol=1e-10, n_max=3)
    assert res.n_used == 3
    assert res.residual > 1e-10
    assert 0 < res.theta < 1
    assert expected_steps(res.theta, 1e-10) > 3


def test_empirical_cB_at_least_one(sys_of):
    s = sys_of("tribonacci")
    spec, R, beta = setup(s)
    cB = empirical_cB(spec, R, beta, rand_y(s, 20), n_max=30)
    assert 1 <= cB < 10
