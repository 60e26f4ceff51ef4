import itertools

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from dilatron.dynamics import (
    EnvSymbol,
    WindowedGlobalState,
    build_coupling,
    cocycle_map,
    example2_coupling,
    rotate,
    step,
    step_batch,
    step_inverse,
    trajectory,
    universal_coupling,
    universal_dynamics,
)
from dilatron.errors import HorizonExceedsWindow
from dilatron.markov import DeterministicMap, LabelSet


def test_coupling_sizes():
    assert universal_coupling(2).size == 16
    assert universal_coupling(3).size == 3 * 3 * 27


@pytest.mark.parametrize("n", [1, 2, 3])
@pytest.mark.parametrize("completion", ["lex", "reverse"])
def test_coupling_bijective(n, completion):
    c = build_coupling(LabelSet.full(n), completion)
    seen = set()
    for i in range(n):
        for g in c.symbols():
            out = c.apply(i, g)
            assert c.invert(*out) == (i, g)
            seen.add(out)
    assert len(seen) == c.size


def test_distinguished_block_formula():
    for n in (2, 3):
        c = universal_coupling(n)
        for l, beta in enumerate(c.labels):
            for i in range(n):
                assert c.apply(i, EnvSymbol(0, l)) == (beta(i), EnvSymbol(i, l))


def test_example2_completion():
    c = example2_coupling()
    maps = [DeterministicMap.from_code(l, 2) for l in range(4)]
    for l in range(4):
        assert c.apply(0, EnvSymbol(1, l)) == (maps[(l + 2) % 4](0), EnvSymbol(0, l))
        assert c.apply(1, EnvSymbol(1, l)) == (maps[(l + 1) % 4](1), EnvSymbol(1, l))
        for i in range(2):
            assert c.apply(i, EnvSymbol(0, l)) == (maps[l](i), EnvSymbol(i, l))


def test_completions_differ_off_block():
    lex = build_coupling(LabelSet.full(3), "lex")
    rev = build_coupling(LabelSet.full(3), "reverse")
    assert not np.array_equal(lex.forward, rev.forward)


def test_sparse_label_set():
    labels = LabelSet(3, (DeterministicMap((1, 2, 0)), DeterministicMap((0, 0, 0))))
    c = build_coupling(labels)
    assert c.size == 3 * 3 * 2
    assert sorted(c.forward.tolist()) == list(range(c.size))


def test_rotate():
    assert rotate((1, 2, 3)) == (2, 3, 1)
    assert rotate((1, 2, 3), -1) == (3, 1, 2)


def _line_oracle(c, x, window, t):
    """Two-sided sequence with an explicit origin: phi on slot 0, then shift."""
    line = dict(enumerate(window))
    origin = 0
    for _ in range(t):
        x, line[origin] = c.apply(x, line[origin])
        origin += 1
    return x, line


def test_step_against_line_oracle():
    d = universal_dynamics(2, 3)
    for idx in range(d.n_states):
        s = d.decode(idx)
        for t in range(4):
            x, line = _line_oracle(d.coupling, s.x, s.window, t)
            got = trajectory(d, s, t)[-1]
            assert got.x == x
            # after t steps the window starts at the line's origin t, cyclically
            assert got.window == tuple(line[(t + j) % 3] for j in range(3))


@pytest.mark.parametrize("n,W", [(2, 1), (2, 3), (3, 2)])
def test_step_is_bijection(n, W):
    d = universal_dynamics(n, W)
    images = {d.encode(step(d, d.decode(i))) for i in range(d.n_states)}
    assert len(images) == d.n_states
    for i in range(d.n_states):
        s = d.decode(i)
        assert step_inverse(d, step(d, s)) == s


def test_encode_roundtrip():
    d = universal_dynamics(2, 2)
    for i in range(d.n_states):
        assert d.encode(d.decode(i)) == i


def test_cocycle_routes_agree():
    d = universal_dynamics(2, 3)
    for i in range(d.n_states):
        s = d.decode(i)
        for t in range(4):
            assert cocycle_map(d, t, s, "shift") == cocycle_map(d, t, s, "direct")


def test_horizon_guard():
    d = universal_dynamics(2, 2)
    s = d.state(0, [EnvSymbol(0, 1)] * 2)
    with pytest.raises(HorizonExceedsWindow):
        trajectory(d, s, 3)
    with pytest.raises(HorizonExceedsWindow):
        cocycle_map(d, 3, s)


@settings(max_examples=50, deadline=None)
@given(st.integers(0, 2), st.lists(st.integers(0, 3 * 27 - 1), min_size=3, max_size=3))
def test_step_batch_matches_step(x, codes):
    d = universal_dynamics(3, 3)
    c = d.coupling
    s = WindowedGlobalState(x, tuple(c.symbol(k) for k in codes))
    xb, wb = step_batch(d, np.array([x]), np.array([codes]))
    expect = step(d, s)
    assert xb[0] == expect.x
    assert tuple(c.symbol(k) for k in wb[0]) == expect.window


def test_automaton_realization():
    # with every slot distinguished, X_t = beta_{l_t}(X_{t-1})
    d = universal_dynamics(3, 4)
    rng = np.random.default_rng(1)
    for _ in range(20):
        labels = rng.integers(0, 27, size=4)
        x0 = int(rng.integers(0, 3))
        s = d.state(x0, [EnvSymbol(0, int(l)) for l in labels])
        path = [o.x for o in trajectory(d, s, 4)]
        x = x0
        for t, l in enumerate(labels):
            x = d.coupling.labels[int(l)](x)
            assert path[t + 1] == x
