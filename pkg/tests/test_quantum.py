import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from dilatron.dynamics import EnvSymbol, example2_coupling
from dilatron.errors import HorizonExceedsWindow, SizeGuardExceeded
from dilatron.markov import canonical_decomposition, random_stochastic, sparse_decomposition, validate_stochastic
from dilatron.quantum import (
    build_quantum_dilation,
    build_T,
    commuting_calculus,
    conditional_expectation,
    cylinder_probability,
    diagonal_image_check,
    embed_diagonal,
    eqexp_check,
    extension_check,
    group_dilation_check,
    hermiticity_check,
    is_density,
    max_norm,
    one_step_dilation_check,
    qsf_check,
    qsf_recursive,
    cumulative_V,
    theta_commutes_check,
    three_route_check,
    trajectory_distribution_check,
    unitarity_check,
)


def T_oracle(dec, a):
    """sum over (l, i) of q_l |i><beta_l(i)| a |beta_l(i)><i|, built from outer products."""
    n = len(a)
    out = np.zeros((n, n), dtype=complex)
    basis = np.eye(n)
    for q, beta in dec.terms():
        for i in range(n):
            k = np.outer(basis[i], basis[beta(i)])
            out += q * k @ a @ k.T
    return out


def partial_trace_oracle(A, sigma, n):
    """tr_2[A (1 ⊗ sigma)] via an explicit double loop."""
    z = len(sigma)
    out = np.zeros((n, n), dtype=complex)
    for a in range(n):
        for b in range(n):
            block = A[a * z:(a + 1) * z, b * z:(b + 1) * z]
            out[a, b] = np.trace(block @ sigma)
    return out


def _rand_op(rng, n):
    return rng.normal(size=(n, n)) + 1j * rng.normal(size=(n, n))


@pytest.mark.parametrize("n", [2, 3, 4])
def test_T_against_oracle(rng, n):
    p = random_stochastic(rng, n)
    dec = sparse_decomposition(p)
    T = build_T(p, dec)
    for _ in range(5):
        a = _rand_op(rng, n)
        assert max_norm(T(a) - T_oracle(dec, a)) < 1e-13


def test_T_extends_P(example2):
    T = build_T(example2, canonical_decomposition(example2))
    assert extension_check(T, example2).passed
    f = np.array([2.0, -1.0])
    assert np.allclose(np.diag(T(embed_diagonal(f))), example2.entries @ f)
    assert T(np.eye(2)) == pytest.approx(np.eye(2))


def test_T_properties(rng):
    T = build_T(*(lambda p: (p, sparse_decomposition(p)))(random_stochastic(rng, 3)))
    assert hermiticity_check(T).passed
    assert diagonal_image_check(T).passed


def test_conditional_expectation_oracle(rng):
    n, z = 2, 3
    A = _rand_op(rng, n * z)
    v = rng.normal(size=z) + 1j * rng.normal(size=z)
    sigma = np.outer(v, v.conj()) / np.vdot(v, v)
    assert max_norm(conditional_expectation(A, sigma, n) - partial_trace_oracle(A, sigma, n)) < 1e-13


def test_is_density():
    assert is_density(np.diag([0.3, 0.7]))
    assert not is_density(np.diag([1.3, -0.3]))


@pytest.mark.parametrize("decomp", [sparse_decomposition, canonical_decomposition])
def test_one_step_example2(example2, decomp):
    qd = build_quantum_dilation(example2, decomp(example2), window=1)
    assert unitarity_check("V", qd.V).passed
    assert one_step_dilation_check(qd.T, qd.V, qd.phi).passed


def test_example2_completion_dilates(example2):
    c = example2_coupling()
    qd = build_quantum_dilation(example2, canonical_decomposition(example2), window=2, coupling=c)
    assert one_step_dilation_check(qd.T, qd.V, qd.phi).passed
    assert group_dilation_check(qd).passed


@settings(max_examples=20, deadline=None)
@given(st.integers(0, 2**32 - 1), st.integers(2, 3))
def test_one_step_random(seed, n):
    p = random_stochastic(np.random.default_rng(seed), n, sparsity=0.3)
    qd = build_quantum_dilation(p, window=1)
    assert one_step_dilation_check(qd.T, qd.V, qd.phi).max_abs_deviation < 1e-10


def test_qsf_recursion_stack(example2):
    qd = build_quantum_dilation(example2, window=2)
    rng = np.random.default_rng(0)
    ops = np.array([_rand_op(rng, 2) for _ in range(3)])
    stacked = qsf_recursive(qd.V, ops, 2, 2)
    vt = cumulative_V(qd.V, 2, qd.zdim, 2)
    for a, jt in zip(ops, stacked):
        assert max_norm(jt - vt.conj().T @ np.kron(a, np.eye(qd.zdim**2)) @ vt) < 1e-12


@pytest.mark.parametrize("W", [1, 2, 3])
def test_group_dilation_windows(example2, W):
    qd = build_quantum_dilation(example2, window=W)
    assert unitarity_check("U", qd.U).passed
    assert group_dilation_check(qd).passed
    assert theta_commutes_check(qd).passed
    assert three_route_check(qd, W).passed


def test_beyond_window_guard(example2):
    qd = build_quantum_dilation(example2, window=1)
    with pytest.raises(HorizonExceedsWindow):
        group_dilation_check(qd, 2)
    with pytest.raises(HorizonExceedsWindow):
        three_route_check(qd, 2)


def test_surrogate_breaks_past_window(example2):
    # after W steps the window wraps and the environment is no longer fresh
    qd = build_quantum_dilation(example2, window=1)
    U2 = qd.U @ qd.U
    a = np.diag([1.0, 0.0]).astype(complex)
    sigma = np.outer(qd.psi, qd.psi.conj())
    got = conditional_expectation(U2.conj().T @ np.kron(a, np.eye(qd.zdim)) @ U2, sigma, 2)
    assert max_norm(got - qd.T.power(a, 2)) > 0.1


def test_qsf_check(example2):
    qd = build_quantum_dilation(example2, window=2)
    assert qsf_check(qd.T, qd.V, qd.phi, 2).passed


def test_dimension_guard(example2):
    with pytest.raises(SizeGuardExceeded):
        build_quantum_dilation(example2, canonical_decomposition(example2), window=4, cap=100)


@pytest.mark.parametrize("k", [0, 1])
def test_trajectory_distributions(example2, k):
    qd = build_quantum_dilation(example2, window=2)
    rec = trajectory_distribution_check(qd, k)
    assert rec.passed and rec.checked >= 50


def test_cylinder_fixture(example2):
    # first slot carries (distinguished, swap) with weight p_01 * p_10
    qd = build_quantum_dilation(example2, canonical_decomposition(example2), window=2)
    c, q = cylinder_probability(qd, 0, 0, EnvSymbol(0, 2))
    assert c == pytest.approx(0.125, abs=1e-15)
    assert q == pytest.approx(0.125, abs=1e-12)


def test_eqexp(example2):
    T = build_T(example2, sparse_decomposition(example2))
    for k in range(2):
        assert eqexp_check(T, example2, k, 4).passed


def test_commuting_calculus():
    a, b = np.diag([1.0, 3.0]), np.diag([2.0, 0.0])
    assert np.allclose(commuting_calculus(np.maximum, a, b), np.diag([2.0, 3.0]))
    with pytest.raises(ValueError):
        commuting_calculus(np.maximum, np.ones((2, 2)))
