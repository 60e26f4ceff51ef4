"""Stochastic and deterministic matrices on E = {0, ..., n-1}.

States are 0-based throughout. A deterministic map is identified by its
label code: the base-n number whose most significant digit is the image of
state 0, so ``itertools.product(range(n), repeat=n)`` enumerates labels in
code order. For n = 2 this reproduces the D1..D4 ordering used in the
classic two-state worked example (constant-1, identity, swap, constant-2).
"""

from __future__ import annotations

import itertools
import os
from dataclasses import dataclass, field
from typing import Iterator, Sequence

import numpy as np

from .errors import (
    DimensionMismatch,
    HorizonExceeded,
    NegativeEntry,
    NonConvergence,
    RowSumViolation,
    SizeGuardExceeded,
)

ROW_TOL = 1e-9
REC_TOL = 1e-12
DEFAULT_LABEL_CAP = 6**6


def label_cap() -> int:
    """Largest admissible n**n; ``DILATRON_SIZE_CAP`` overrides the default."""
    raw = os.environ.get("DILATRON_SIZE_CAP")
    return int(raw) if raw else DEFAULT_LABEL_CAP


def _readonly(a: np.ndarray) -> np.ndarray:
    a = np.array(a, copy=True)
    a.setflags(write=False)
    return a


@dataclass(frozen=True)
class StateSpace:
    n: int

    def __post_init__(self):
        if self.n < 1:
            raise ValueError("state space needs at least one state")

    def __iter__(self):
        return iter(range(self.n))


@dataclass(frozen=True, eq=False)
class StochasticMatrix:
    """Validated row-stochastic matrix. Build with :func:`validate_stochastic`."""

    entries: np.ndarray

    @property
    def n(self) -> int:
        return self.entries.shape[0]

    def __array__(self, dtype=None, copy=None):
        return np.asarray(self.entries, dtype=dtype)

    def __eq__(self, other):
        if not isinstance(other, StochasticMatrix):
            return NotImplemented
        return np.array_equal(self.entries, other.entries)

    def __hash__(self):
        return hash(self.entries.tobytes())


def validate_stochastic(raw, tol: float = ROW_TOL) -> StochasticMatrix:
    a = np.asarray(raw, dtype=float)
    if a.ndim != 2 or a.shape[0] != a.shape[1] or a.shape[0] == 0:
        raise DimensionMismatch(f"expected a nonempty square matrix, got shape {a.shape}")
    if not np.all(np.isfinite(a)):
        raise ValueError("matrix has non-finite entries")
    neg = np.argwhere(a < 0)
    if len(neg):
        i, j = (int(v) for v in neg[0])
        raise NegativeEntry(i, j, float(a[i, j]))
    sums = a.sum(axis=1)
    for i, s in enumerate(sums):
        if abs(s - 1.0) > tol:
            raise RowSumViolation(i, float(s))
    return StochasticMatrix(_readonly(a))


@dataclass(frozen=True)
class DeterministicMap:
    """A map beta: E -> E stored as its image tuple, beta(i) = image[i]."""

    image: tuple[int, ...]

    def __post_init__(self):
        n = len(self.image)
        if n == 0 or any(not 0 <= b < n for b in self.image):
            raise ValueError(f"invalid image {self.image!r}")

    @property
    def n(self) -> int:
        return len(self.image)

    def __call__(self, i: int) -> int:
        return self.image[i]

    @property
    def code(self) -> int:
        c = 0
        for b in self.image:
            c = c * self.n + b
        return c

    @classmethod
    def from_code(cls, code: int, n: int) -> DeterministicMap:
        if not 0 <= code < n**n:
            raise ValueError(f"label code {code} out of range for n={n}")
        digits = []
        for _ in range(n):
            code, d = divmod(code, n)
            digits.append(d)
        return cls(tuple(reversed(digits)))

    @classmethod
    def identity(cls, n: int) -> DeterministicMap:
        return cls(tuple(range(n)))

    def matrix(self) -> np.ndarray:
        d = np.zeros((self.n, self.n))
        d[np.arange(self.n), self.image] = 1.0
        return d

    def as_stochastic(self) -> StochasticMatrix:
        return StochasticMatrix(_readonly(self.matrix()))

    def compose(self, other: DeterministicMap) -> DeterministicMap:
        """``self ∘ other``: apply ``other`` first."""
        return DeterministicMap(tuple(self.image[b] for b in other.image))

    def is_permutation(self) -> bool:
        return len(set(self.image)) == self.n


@dataclass(frozen=True)
class LabelSet:
    """Ordered, duplicate-free collection of deterministic maps on one state space."""

    n: int
    maps: tuple[DeterministicMap, ...]
    _index: dict = field(init=False, repr=False, compare=False, hash=False)

    def __post_init__(self):
        if not self.maps:
            raise ValueError("label set must be nonempty")
        index = {}
        for pos, m in enumerate(self.maps):
            if m.n != self.n:
                raise DimensionMismatch(f"map {m.image} is not on {self.n} states")
            if m in index:
                raise ValueError(f"duplicate map {m.image}")
            index[m] = pos
        object.__setattr__(self, "_index", index)

    @classmethod
    def full(cls, n: int, cap: int | None = None) -> LabelSet:
        cap = label_cap() if cap is None else cap
        if n**n > cap:
            raise SizeGuardExceeded(f"{n}**{n} = {n**n} labels exceeds cap {cap}")
        maps = tuple(DeterministicMap(img) for img in itertools.product(range(n), repeat=n))
        return cls(n, maps)

    def __len__(self) -> int:
        return len(self.maps)

    def __getitem__(self, pos: int) -> DeterministicMap:
        return self.maps[pos]

    def __iter__(self) -> Iterator[DeterministicMap]:
        return iter(self.maps)

    def __contains__(self, m) -> bool:
        return m in self._index

    def index(self, m: DeterministicMap) -> int:
        return self._index[m]

    def images(self) -> np.ndarray:
        """(len, n) integer array; row l is the image of map l."""
        return np.array([m.image for m in self.maps], dtype=np.intp)

    def is_full(self) -> bool:
        return len(self) == self.n**self.n


@dataclass(frozen=True, eq=False)
class Decomposition:
    labels: LabelSet
    weights: np.ndarray

    def __post_init__(self):
        w = _readonly(np.asarray(self.weights, dtype=float))
        if w.shape != (len(self.labels),):
            raise DimensionMismatch("one weight per label required")
        if np.any(w < 0):
            raise ValueError("weights must be nonnegative")
        if abs(w.sum() - 1.0) > ROW_TOL:
            raise ValueError(f"weights sum to {w.sum()!r}")
        object.__setattr__(self, "weights", w)

    @property
    def n(self) -> int:
        return self.labels.n

    def __len__(self) -> int:
        return len(self.labels)

    def terms(self) -> list[tuple[float, DeterministicMap]]:
        return [(float(q), m) for q, m in zip(self.weights, self.labels)]

    def support(self) -> list[int]:
        return [pos for pos, q in enumerate(self.weights) if q > 0]


@dataclass(frozen=True)
class MatrixSequence:
    """P(1), ..., P(horizon). A homogeneous sequence stores one matrix."""

    matrices: tuple[StochasticMatrix, ...]
    horizon: int
    homogeneous: bool = False

    def __post_init__(self):
        if self.horizon < 1:
            raise ValueError("horizon must be positive")
        if not self.matrices:
            raise ValueError("empty matrix sequence")
        if len({m.n for m in self.matrices}) != 1:
            raise DimensionMismatch("all matrices must share the state count")
        if self.homogeneous and len(self.matrices) != 1:
            raise ValueError("homogeneous sequence takes exactly one matrix")
        if not self.homogeneous and len(self.matrices) != self.horizon:
            raise ValueError("inhomogeneous sequence needs one matrix per step")

    @classmethod
    def constant(cls, p: StochasticMatrix, horizon: int) -> MatrixSequence:
        return cls((p,), horizon, True)

    @classmethod
    def of(cls, matrices: Sequence[StochasticMatrix]) -> MatrixSequence:
        return cls(tuple(matrices), len(matrices), False)

    @property
    def n(self) -> int:
        return self.matrices[0].n

    def at(self, t: int) -> StochasticMatrix:
        """The transition matrix used between times t-1 and t (t >= 1)."""
        if not 1 <= t <= self.horizon:
            raise HorizonExceeded(f"t={t} outside 1..{self.horizon}")
        return self.matrices[0] if self.homogeneous else self.matrices[t - 1]

    def truncate(self, horizon: int) -> MatrixSequence:
        if horizon > self.horizon:
            raise HorizonExceeded(f"cannot extend horizon {self.horizon} to {horizon}")
        if self.homogeneous:
            return MatrixSequence(self.matrices, horizon, True)
        return MatrixSequence(self.matrices[:horizon], horizon, False)


def _entries(p) -> np.ndarray:
    if isinstance(p, DeterministicMap):
        return p.matrix()
    return np.asarray(p, dtype=float)


def apply_to_observable(p, f) -> np.ndarray:
    """(Pf)(i) = sum_j p_ij f(j)."""
    a = _entries(p)
    f = np.asarray(f)
    if f.shape != (a.shape[0],):
        raise DimensionMismatch(f"observable has shape {f.shape}, expected ({a.shape[0]},)")
    return a @ f


def evolution_product(seq: MatrixSequence, t: int, f) -> np.ndarray:
    """P(1) ... P(t) f, with t = 0 returning f."""
    if not 0 <= t <= seq.horizon:
        raise HorizonExceeded(f"t={t} outside 0..{seq.horizon}")
    out = np.asarray(f)
    if out.shape != (seq.n,):
        raise DimensionMismatch(f"observable has shape {out.shape}, expected ({seq.n},)")
    for s in range(t, 0, -1):
        out = apply_to_observable(seq.at(s), out)
    return out


def product_matrix(seq: MatrixSequence, t: int) -> np.ndarray:
    """The matrix P(1) ... P(t); row k is the law of X_t started at k."""
    return np.column_stack([evolution_product(seq, t, e) for e in np.eye(seq.n)])


def canonical_decomposition(p: StochasticMatrix, cap: int | None = None) -> Decomposition:
    """All n**n deterministic maps, weighted by q_l = prod_i p[i, beta_l(i)].

    Zero-weight labels stay in the result so the label set is the same for
    every input matrix.
    """
    labels = LabelSet.full(p.n, cap)
    a = p.entries
    weights = np.prod(a[np.arange(p.n), labels.images()], axis=1)
    return Decomposition(labels, weights)


def sparse_decomposition(p: StochasticMatrix, tol: float = REC_TOL) -> Decomposition:
    """Greedy residual peeling into at most nnz(P) - n + 1 deterministic maps.

    Each round picks, row by row, the column holding the largest residual
    (ties go to the smallest column), weights the resulting map by the
    smallest picked entry and subtracts it. The smallest picked entry hits
    zero exactly, so every round removes at least one nonzero.
    """
    n = p.n
    residual = np.array(p.entries, dtype=float)
    rows = np.arange(n)
    weights: dict[DeterministicMap, float] = {}
    for _ in range(n * n):
        if residual.max() <= tol:
            break
        cols = residual.argmax(axis=1)
        w = float(residual[rows, cols].min())
        if w <= tol:
            # a row ran dry while others still carry input slack (<= ROW_TOL)
            break
        beta = DeterministicMap(tuple(int(c) for c in cols))
        weights[beta] = weights.get(beta, 0.0) + w
        residual[rows, cols] -= w
    else:
        if residual.max() > tol:
            raise NonConvergence(f"residual {residual.max()!r} after {n * n} rounds")
    if residual.max() > ROW_TOL:
        raise NonConvergence(f"residual {residual.max()!r} left after peeling")
    labels = LabelSet(n, tuple(weights))
    return Decomposition(labels, np.array(list(weights.values())))


def recompose(d: Decomposition) -> StochasticMatrix:
    """sum_l q_l D_l."""
    out = np.zeros((d.n, d.n))
    rows = np.arange(d.n)
    for q, m in zip(d.weights, d.labels):
        out[rows, m.image] += q
    return StochasticMatrix(_readonly(out))


def decompose(p: StochasticMatrix, method: str = "sparse", cap: int | None = None) -> Decomposition:
    if method == "sparse":
        return sparse_decomposition(p)
    if method == "canonical":
        return canonical_decomposition(p, cap)
    raise ValueError(f"unknown decomposer {method!r}")


def random_stochastic(rng: np.random.Generator, n: int, sparsity: float = 0.0) -> StochasticMatrix:
    """Dirichlet rows; with ``sparsity`` > 0 some entries are zeroed (one kept per row)."""
    a = rng.dirichlet(np.ones(n), size=n)
    if sparsity > 0:
        mask = rng.random((n, n)) < sparsity
        mask[np.arange(n), rng.integers(0, n, size=n)] = False
        a[mask] = 0.0
        a /= a.sum(axis=1, keepdims=True)
    return validate_stochastic(a)
