import itertools

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st
from scipy.stats import chisquare

from dilatron.dynamics import EnvSymbol, universal_dynamics
from dilatron.errors import HorizonExceedsWindow, SupportExplosion, WindowTooShort
from dilatron.markov import MatrixSequence, random_stochastic, sparse_decomposition
from dilatron.sample_space import (
    SymbolLaw,
    build_measure,
    conditional_table,
    distribution_check,
    enumerate_windows,
    exact_state_distribution,
    flow_equation_check,
    monte_carlo_check,
    replica_uniforms,
    simulate,
    verify_markov_property,
)

from conftest import oracle_product


def automaton_oracle(seq, k, t, decomposer=sparse_decomposition):
    """Law of X_t for X_s = beta_{Y_s}(X_{s-1}) with independent labels."""
    terms = [decomposer(seq.at(s)).terms() for s in range(1, t + 1)]
    out = np.zeros(seq.n)
    for combo in itertools.product(*terms):
        x, w = k, 1.0
        for q, beta in combo:
            x, w = beta(x), w * q
        out[x] += w
    return out


def _random_seq(rng, n, horizon, homogeneous):
    if homogeneous:
        return MatrixSequence.constant(random_stochastic(rng, n, sparsity=0.3), horizon)
    return MatrixSequence.of([random_stochastic(rng, n, sparsity=0.3) for _ in range(horizon)])


def test_default_window_and_universality(example2, rng):
    seq = MatrixSequence.constant(example2, 2)
    m, d = build_measure(seq)
    assert d.window == 3
    other, d2 = build_measure(_random_seq(rng, 2, 2, False))
    assert d2 is d
    assert other.env != m.env


def test_window_too_short(example2):
    with pytest.raises(WindowTooShort):
        build_measure(MatrixSequence.constant(example2, 3), window=2)


@pytest.mark.parametrize("n,horizon,homogeneous", [(2, 3, True), (2, 3, False), (3, 2, False), (3, 3, True)])
def test_exact_distribution_against_oracles(rng, n, horizon, homogeneous):
    seq = _random_seq(rng, n, horizon, homogeneous)
    mats = [seq.at(t).entries for t in range(1, horizon + 1)]
    m, d = build_measure(seq)
    for k in range(n):
        mk = m.with_start(k)
        for t in range(horizon + 1):
            got = exact_state_distribution(mk, d, t).as_array(n)
            assert np.abs(got - oracle_product(mats, t)[k]).max() < 1e-12
            assert np.abs(got - automaton_oracle(seq, k, t)).max() < 1e-12


def test_include_past_is_same(example2):
    seq = MatrixSequence.constant(example2, 2)
    m, d = build_measure(seq, window=4, q0=SymbolLaw.uniform(2, 4))
    for t in range(3):
        a = exact_state_distribution(m, d, t).as_array(2)
        b = exact_state_distribution(m, d, t, include_past=True).as_array(2)
        assert np.abs(a - b).max() < 1e-14


def test_beyond_horizon(example2):
    m, d = build_measure(MatrixSequence.constant(example2, 2))
    with pytest.raises(HorizonExceedsWindow):
        exact_state_distribution(m, d, 3)


def test_support_cap(example2):
    m, d = build_measure(MatrixSequence.constant(example2, 2), q0=SymbolLaw.uniform(2, 4))
    with pytest.raises(SupportExplosion):
        list(enumerate_windows(m, range(3), cap=10))


def test_markov_property_example2(example2):
    m, d = build_measure(MatrixSequence.constant(example2, 3), decomposer="canonical")
    for k in range(2):
        rec = verify_markov_property(m.with_start(k), d, 3)
        assert rec.passed and rec.checked > 0


@settings(max_examples=15, deadline=None)
@given(st.integers(0, 2**32 - 1), st.integers(2, 3), st.booleans())
def test_markov_property_random(seed, n, homogeneous):
    rng = np.random.default_rng(seed)
    seq = _random_seq(rng, n, 3 if n == 2 else 2, homogeneous)
    m, d = build_measure(seq)
    for k in range(n):
        assert verify_markov_property(m.with_start(k), d, seq.horizon).max_abs_deviation < 1e-10
        for t in range(seq.horizon + 1):
            assert distribution_check(m.with_start(k), d, t).passed


def test_invariance_under_completion_and_q0(rng):
    seq = _random_seq(rng, 3, 2, False)
    base_m, base_d = build_measure(seq)
    rev_m, rev_d = build_measure(seq, completion="reverse")
    q0_m, q0_d = build_measure(seq, q0=SymbolLaw.uniform(3, 27))
    ref = conditional_table(base_m, base_d, 2)
    for m, d in ((rev_m, rev_d), (q0_m, q0_d)):
        other = conditional_table(m, d, 2)
        assert other.keys() == ref.keys()
        assert max(np.abs(other[key] - ref[key]).max() for key in ref) < 1e-12


def test_flow_equation(example2):
    m, d = build_measure(MatrixSequence.constant(example2, 3), window=3)
    assert flow_equation_check(m, d, 3).passed
    rec = flow_equation_check(m, d, 3, exhaustive=True)
    assert rec.passed and rec.checked == 8**3  # |G| = 2 * 4 symbols per slot


def test_replica_uniforms_partition_free():
    a = replica_uniforms(7, np.arange(100), 3)
    b = np.vstack([replica_uniforms(7, np.arange(0, 37), 3), replica_uniforms(7, np.arange(37, 100), 3)])
    assert np.array_equal(a, b)
    assert ((a >= 0) & (a < 1)).all()
    assert not np.array_equal(a, replica_uniforms(8, np.arange(100), 3))


def test_simulate_deterministic_and_chunk_free(example2):
    m, d = build_measure(MatrixSequence.constant(example2, 2))
    r1 = simulate(m, d, 2, 5000, seed=3, chunk=1000)
    r2 = simulate(m, d, 2, 5000, seed=3, chunk=1 << 16)
    assert np.array_equal(r1.counts, r2.counts)


def test_simulated_paths_follow_matrix_support(rng):
    seq = MatrixSequence.of([random_stochastic(rng, 3, sparsity=0.5) for _ in range(3)])
    m, d = build_measure(seq)
    paths = simulate(m, d, 3, 2000, seed=1, return_paths=True).paths
    for t in range(1, 4):
        p = seq.at(t).entries
        assert (p[paths[:, t - 1], paths[:, t]] > 0).all()


def test_simulation_goodness_of_fit(rng):
    seq = MatrixSequence.of([random_stochastic(rng, 3) for _ in range(2)])
    m, d = build_measure(seq)
    n = 60000
    res = simulate(m, d, 2, n, seed=11)
    expected = exact_state_distribution(m, d, 2).as_array(3) * n
    assert chisquare(res.counts, expected).pvalue > 1e-4


def test_monte_carlo_example2(example2):
    m, d = build_measure(MatrixSequence.constant(example2, 2))
    for t in (1, 2):
        assert monte_carlo_check(m, d, t, 100_000, 42).passed
