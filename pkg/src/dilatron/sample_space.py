"""Environment laws, exact enumeration and seeded Monte Carlo for the dilation.

A :class:`DilationMeasure` is delta_k on the system times a product law on
the window: slot s-1 carries delta_0 ⊗ q(s), the label weights of P(s), for
s = 1..horizon, and the remaining (never interacting) slots carry Q0.
"""

from __future__ import annotations

import itertools
import math
from dataclasses import dataclass, field

import numpy as np

from .dynamics import (
    DISTINGUISHED,
    Dynamics,
    EnvSymbol,
    WindowedGlobalState,
    build_coupling,
    step,
    step_batch,
    universal_dynamics,
)
from .errors import HorizonExceedsWindow, SupportExplosion, WindowTooShort
from .markov import (
    ROW_TOL,
    Decomposition,
    DeterministicMap,
    LabelSet,
    MatrixSequence,
    decompose,
    label_cap,
    product_matrix,
)
from .reports import CheckRecord

MARKOV_TOL = 1e-10
FLOW_TOL = 1e-12
DEFAULT_ENUM_CAP = 10**7


@dataclass(frozen=True, eq=False)
class SymbolLaw:
    """Probability vector over G = E x L, indexed by symbol code j * |L| + l."""

    n: int
    n_labels: int
    probs: np.ndarray

    def __post_init__(self):
        p = np.array(self.probs, dtype=float)
        if p.shape != (self.n * self.n_labels,):
            raise ValueError("law must cover every symbol")
        if np.any(p < 0) or abs(p.sum() - 1.0) > ROW_TOL:
            raise ValueError("law must be a probability vector")
        p.setflags(write=False)
        object.__setattr__(self, "probs", p)

    @classmethod
    def from_label_weights(cls, q, n: int) -> SymbolLaw:
        """delta_0 ⊗ q: all mass on symbols (0, l)."""
        q = np.asarray(q, dtype=float)
        probs = np.zeros(n * len(q))
        probs[DISTINGUISHED * len(q) : (DISTINGUISHED + 1) * len(q)] = q
        return cls(n, len(q), probs)

    @classmethod
    def point_mass(cls, g: EnvSymbol, n: int, n_labels: int) -> SymbolLaw:
        probs = np.zeros(n * n_labels)
        probs[g.j * n_labels + g.label] = 1.0
        return cls(n, n_labels, probs)

    @classmethod
    def uniform(cls, n: int, n_labels: int) -> SymbolLaw:
        return cls(n, n_labels, np.full(n * n_labels, 1.0 / (n * n_labels)))

    def prob(self, g: EnvSymbol) -> float:
        return float(self.probs[g.j * self.n_labels + g.label])

    def support(self) -> list[tuple[EnvSymbol, float]]:
        return [
            (EnvSymbol(*divmod(c, self.n_labels)), float(p))
            for c, p in enumerate(self.probs)
            if p > 0
        ]


@dataclass(frozen=True)
class EnvProductLaw:
    slots: tuple[SymbolLaw, ...]
    horizon: int

    def __post_init__(self):
        if len(self.slots) < self.horizon:
            raise WindowTooShort(f"window {len(self.slots)} shorter than horizon {self.horizon}")

    @property
    def window(self) -> int:
        return len(self.slots)

    def prob(self, window) -> float:
        return math.prod(law.prob(g) for law, g in zip(self.slots, window))


@dataclass(frozen=True)
class DilationMeasure:
    k: int
    env: EnvProductLaw
    sequence: MatrixSequence | None = None
    decompositions: tuple[Decomposition, ...] = field(default=(), compare=False)

    def __post_init__(self):
        n = self.env.slots[0].n
        if not 0 <= self.k < n:
            raise ValueError(f"starting state {self.k} outside 0..{n - 1}")

    def with_start(self, k: int) -> DilationMeasure:
        return DilationMeasure(k, self.env, self.sequence, self.decompositions)


@dataclass(frozen=True)
class PathDistribution:
    t: int
    probs: dict

    def __post_init__(self):
        total = sum(self.probs.values())
        if abs(total - 1.0) > 1e-10:
            raise ValueError(f"distribution sums to {total!r}")

    def as_array(self, n: int) -> np.ndarray:
        out = np.zeros(n)
        for x, p in self.probs.items():
            out[x] = p
        return out


def _label_weights_on(labels: LabelSet, dec: Decomposition) -> np.ndarray:
    q = np.zeros(len(labels))
    for w, m in dec.terms():
        if w > 0:
            if m not in labels:
                raise ValueError(f"map {m.image} missing from the dynamics label set")
            q[labels.index(m)] += w
    return q


def build_measure(
    seq: MatrixSequence,
    decomposer: str = "sparse",
    k: int = 0,
    window: int | None = None,
    q0: SymbolLaw | None = None,
    labels: LabelSet | None = None,
    completion: str = "lex",
) -> tuple[DilationMeasure, Dynamics]:
    """Decompose every P(t) and install delta_0 ⊗ q(t) on slot t-1.

    With the default full label set the returned dynamics comes from a
    cache keyed on (n, window) alone, so any two sequences on the same state
    space share one Dynamics object. When n**n is over the size cap the
    labels fall back to the union of the decompositions' supports.
    """
    window = seq.horizon + 1 if window is None else window
    if window < seq.horizon:
        raise WindowTooShort(f"window {window} shorter than horizon {seq.horizon}")
    n = seq.n
    decs = tuple(decompose(seq.at(t), decomposer) for t in range(1, seq.horizon + 1))
    universal = labels is None and completion == "lex" and n**n <= label_cap()
    if labels is None:
        if n**n <= label_cap():
            labels = LabelSet.full(n)
        else:
            seen = {}
            for dec in decs:
                for w, m in dec.terms():
                    if w > 0:
                        seen.setdefault(m.code, m)
            labels = LabelSet(n, tuple(seen[c] for c in sorted(seen)))
    if universal:
        dynamics = universal_dynamics(n, window)
    else:
        dynamics = Dynamics(build_coupling(labels, completion), window)
    nl = len(labels)
    if q0 is None:
        ident = DeterministicMap.identity(n)
        identity = labels.index(ident) if ident in labels else 0
        q0 = SymbolLaw.point_mass(EnvSymbol(DISTINGUISHED, identity), n, nl)
    slots = [SymbolLaw.from_label_weights(_label_weights_on(labels, dec), n) for dec in decs]
    slots += [q0] * (window - seq.horizon)
    env = EnvProductLaw(tuple(slots), seq.horizon)
    return DilationMeasure(k, env, seq, decs), dynamics


def _check_t(m: DilationMeasure, d: Dynamics, t: int):
    if not 0 <= t <= d.window:
        raise HorizonExceedsWindow(f"t={t} outside 0..{d.window}")
    if t > m.env.horizon:
        raise HorizonExceedsWindow(f"t={t} beyond the measure horizon {m.env.horizon}")


def enumerate_windows(m: DilationMeasure, slots, cap: int = DEFAULT_ENUM_CAP):
    """Yield (window, probability) over the product support of ``slots``.

    Slots not listed are pinned to the first point of their law's support;
    their value never reaches the system before time min(unlisted slot) + 1.
    """
    slots = sorted(slots)
    supports = [m.env.slots[s].support() for s in slots]
    count = math.prod(len(s) for s in supports)
    if count > cap:
        raise SupportExplosion(f"{count} assignments exceed cap {cap}")
    filler = [law.support()[0][0] for law in m.env.slots]
    for combo in itertools.product(*supports):
        window = list(filler)
        p = 1.0
        for s, (g, w) in zip(slots, combo):
            window[s] = g
            p *= w
        yield tuple(window), p


def exact_state_distribution(
    m: DilationMeasure,
    d: Dynamics,
    t: int,
    cap: int = DEFAULT_ENUM_CAP,
    include_past: bool = False,
) -> PathDistribution:
    """Law of X_t under the measure, by pushing every window through alpha^t.

    ``include_past`` also enumerates the non-interacting slots so the result
    visibly does not depend on Q0.
    """
    _check_t(m, d, t)
    slots = range(d.window) if include_past else range(t)
    acc: dict[int, float] = {}
    for window, p in enumerate_windows(m, slots, cap):
        s = WindowedGlobalState(m.k, window)
        for _ in range(t):
            s = step(d, s)
        acc[s.x] = acc.get(s.x, 0.0) + p
    return PathDistribution(t, dict(sorted(acc.items())))


def expectation(m: DilationMeasure, d: Dynamics, F, t: int = 0, cap: int = DEFAULT_ENUM_CAP) -> float:
    """E_k[F ∘ alpha^t] for a callable F on WindowedGlobalState, every slot enumerated."""
    total = 0.0
    for window, p in enumerate_windows(m, range(d.window), cap):
        s = WindowedGlobalState(m.k, window)
        for _ in range(t):
            s = step(d, s)
        total += p * F(s)
    return total


def _histories(m: DilationMeasure, d: Dynamics, t: int, cap: int):
    """Map (Y_1..Y_t) -> [prob, X_t, {X_{t+1}: joint prob}] over positive-probability windows."""
    table: dict[tuple, list] = {}
    for window, p in enumerate_windows(m, range(t + 1), cap):
        s = WindowedGlobalState(m.k, window)
        for _ in range(t):
            s = step(d, s)
        x_t = s.x
        x_next = step(d, s).x
        key = window[:t]
        rec = table.setdefault(key, [0.0, x_t, {}])
        if rec[1] != x_t:
            raise AssertionError("X_t is not a function of (X_0, Y_1..Y_t)")
        rec[0] += p
        rec[2][x_next] = rec[2].get(x_next, 0.0) + p
    return table


def verify_markov_property(
    m: DilationMeasure,
    d: Dynamics,
    horizon: int,
    cap: int = DEFAULT_ENUM_CAP,
    tol: float = MARKOV_TOL,
) -> CheckRecord:
    """P(X_{t+1} = j | X_0 = k, Y_1..Y_t) against p_{X_t j}(t+1), every history."""
    if horizon > d.window:
        raise HorizonExceedsWindow(f"horizon {horizon} exceeds window {d.window}")
    if m.sequence is None:
        raise ValueError("measure carries no matrix sequence to compare against")
    worst, checked = 0.0, 0
    for t in range(horizon):
        p_next = m.sequence.at(t + 1).entries
        for prob, x_t, joint in _histories(m, d, t, cap).values():
            if prob <= 0:
                continue
            checked += 1
            for j in range(d.n):
                cond = joint.get(j, 0.0) / prob
                worst = max(worst, abs(cond - p_next[x_t, j]))
    return CheckRecord("markov_property", worst, tol, checked)


def conditional_table(m: DilationMeasure, d: Dynamics, horizon: int, cap: int = DEFAULT_ENUM_CAP) -> dict:
    """{(t, history): conditional law of X_{t+1}} for comparing two dilations."""
    out = {}
    for t in range(horizon):
        for key, (prob, _, joint) in _histories(m, d, t, cap).items():
            if prob > 0:
                out[(t, key)] = np.array([joint.get(j, 0.0) / prob for j in range(d.n)])
    return out


def distribution_check(
    m: DilationMeasure, d: Dynamics, t: int, tol: float = MARKOV_TOL, include_past: bool = False
) -> CheckRecord:
    """Exact law of X_t against row k of P(1)...P(t)."""
    exact = exact_state_distribution(m, d, t, include_past=include_past).as_array(d.n)
    row = product_matrix(m.sequence, t)[m.k]
    return CheckRecord(f"distribution_k{m.k}_t{t}", float(np.abs(exact - row).max()), tol, 1)


_MASK64 = np.uint64(0xFFFFFFFFFFFFFFFF)


def splitmix64(z: np.ndarray) -> np.ndarray:
    """Vectorized SplitMix64 finalizer on uint64 arrays (wrapping arithmetic)."""
    z = np.asarray(z, dtype=np.uint64)
    with np.errstate(over="ignore"):
        z = z + np.uint64(0x9E3779B97F4A7C15)
        z = (z ^ (z >> np.uint64(30))) * np.uint64(0xBF58476D1CE4E5B9)
        z = (z ^ (z >> np.uint64(27))) * np.uint64(0x94D049BB133111EB)
    return z ^ (z >> np.uint64(31))


def replica_uniforms(seed: int, replicas: np.ndarray, slots: int) -> np.ndarray:
    """Uniforms in [0, 1), shape (len(replicas), slots).

    Replica r draws from splitmix64(splitmix64(seed ^ r) + slot): a pure
    function of (seed, r, slot), so any partition of replicas across workers
    yields the same numbers.
    """
    seed = np.uint64(seed & 0xFFFFFFFFFFFFFFFF)
    base = splitmix64(np.asarray(replicas, dtype=np.uint64) ^ seed)
    with np.errstate(over="ignore"):
        z = splitmix64(base[:, None] + np.arange(slots, dtype=np.uint64)[None, :])
    return (z >> np.uint64(11)).astype(np.float64) * (1.0 / 2**53)


@dataclass(frozen=True)
class SimulationResult:
    distribution: PathDistribution
    counts: np.ndarray
    paths: np.ndarray | None = None


def simulate(
    m: DilationMeasure,
    d: Dynamics,
    t: int,
    replicas: int,
    seed: int = 42,
    return_paths: bool = False,
    chunk: int = 1 << 16,
) -> SimulationResult:
    """Sample the window slot by slot, run the dynamics, tally X_t.

    Replicas are processed in chunks; results do not depend on ``chunk``.
    """
    _check_t(m, d, t)
    nsym = d.coupling.n_symbols
    cdfs = np.array([np.cumsum(law.probs) for law in m.env.slots])
    cdfs[:, -1] = np.inf
    counts = np.zeros(d.n, dtype=np.int64)
    paths = np.empty((replicas, t + 1), dtype=np.intp) if return_paths else None
    for start in range(0, replicas, chunk):
        ids = np.arange(start, min(start + chunk, replicas))
        u = replica_uniforms(seed, ids, d.window)
        window = np.empty((len(ids), d.window), dtype=np.intp)
        for s in range(d.window):
            window[:, s] = np.searchsorted(cdfs[s], u[:, s], side="right")
        window = np.minimum(window, nsym - 1)
        x = np.full(len(ids), m.k, dtype=np.intp)
        if return_paths:
            paths[ids, 0] = x
        for step_no in range(1, t + 1):
            x, window = step_batch(d, x, window)
            if return_paths:
                paths[ids, step_no] = x
        counts += np.bincount(x, minlength=d.n)
    freq = counts / replicas
    dist = PathDistribution(t, {int(i): float(f) for i, f in enumerate(freq) if counts[i]})
    return SimulationResult(dist, counts, paths)


def monte_carlo_check(m: DilationMeasure, d: Dynamics, t: int, replicas: int, seed: int, sigmas: float = 4.0):
    """Largest z-score of the empirical state frequencies against the exact law."""
    exact = exact_state_distribution(m, d, t).as_array(d.n)
    emp = simulate(m, d, t, replicas, seed).counts / replicas
    worst = 0.0
    for p, f in zip(exact, emp):
        se = math.sqrt(p * (1 - p) / replicas)
        if se == 0:
            z = 0.0 if abs(f - p) < 1e-15 else math.inf
        else:
            z = abs(f - p) / se
        worst = max(worst, z)
    return CheckRecord(f"monte_carlo_k{m.k}_t{t}", worst, sigmas, replicas)


def flow_equation_check(
    m: DilationMeasure, d: Dynamics, t: int, exhaustive: bool = False, tol: float = FLOW_TOL
) -> CheckRecord:
    """j_s[f] = sum_g j_{s-1}[E_g[f ∘ phi]] 1(Y_s = g) for indicators f, s = 1..t.

    Both sides are evaluated on each history: the left from the dynamics at
    time s, the right from the state at time s-1 and the observable
    i -> f(phi^E(i, g)) summed against the indicator of the slot's symbol.
    ``exhaustive`` walks every symbol assignment instead of the support.
    """
    _check_t(m, d, t)
    c = d.coupling
    symbols = c.symbols()
    basis = np.eye(d.n)
    # E_g[f ∘ phi] as a table over (g, i) per basis f
    lifted = np.array([[[f[c.apply(i, g)[0]] for i in range(d.n)] for g in symbols] for f in basis])
    if exhaustive:
        assignments = (
            (tuple(w) + tuple(m.env.slots[s].support()[0][0] for s in range(t, d.window)), 1.0)
            for w in itertools.product(symbols, repeat=t)
        )
    else:
        assignments = enumerate_windows(m, range(t))
    worst, checked = 0.0, 0
    for window, _p in assignments:
        s = WindowedGlobalState(m.k, window)
        for step_no in range(1, t + 1):
            prev = s
            s = step(d, s)
            y = window[step_no - 1]
            for fi, f in enumerate(basis):
                lhs = f[s.x]
                rhs = sum(
                    lifted[fi, gi, prev.x] * (1.0 if g == y else 0.0) for gi, g in enumerate(symbols)
                )
                worst = max(worst, abs(lhs - rhs))
        checked += 1
    return CheckRecord("flow_equation", worst, tol, checked)
