"""The universal coupling on E x G and the cyclic-window global dynamics.

G = E x L where L is a label set of deterministic maps. Points of E x G are
linearized mixed-radix as ``(i * n + j) * len(L) + l`` (system index
slowest), which is also the computational-basis order used by
:mod:`dilatron.quantum`.

The two-sided environment G^Z is replaced by a window of W slots
(0-based here, slot 0 is the one that interacts next). One step couples the
system with slot 0 and rotates the window left, the coupled symbol landing
in the last slot. The system trajectory is exact for t <= W.
"""

from __future__ import annotations

from dataclasses import dataclass
from functools import lru_cache
from typing import NamedTuple

import numpy as np

from .errors import HorizonExceedsWindow
from .markov import LabelSet

# the state whose G-symbols carry all the probability mass
DISTINGUISHED = 0


class EnvSymbol(NamedTuple):
    j: int
    label: int


@dataclass(frozen=True, eq=False)
class Coupling:
    """Bijection on E x G stored as forward/backward lookup tables."""

    labels: LabelSet
    forward: np.ndarray
    backward: np.ndarray

    @property
    def n(self) -> int:
        return self.labels.n

    @property
    def n_labels(self) -> int:
        return len(self.labels)

    @property
    def n_symbols(self) -> int:
        return self.n * self.n_labels

    @property
    def size(self) -> int:
        return self.n * self.n_symbols

    def symbol_code(self, g: EnvSymbol) -> int:
        return g.j * self.n_labels + g.label

    def symbol(self, code: int) -> EnvSymbol:
        return EnvSymbol(*divmod(int(code), self.n_labels))

    def encode(self, i: int, g: EnvSymbol) -> int:
        return (i * self.n + g.j) * self.n_labels + g.label

    def decode(self, idx: int) -> tuple[int, EnvSymbol]:
        i, code = divmod(int(idx), self.n_symbols)
        return i, self.symbol(code)

    def apply(self, i: int, g: EnvSymbol) -> tuple[int, EnvSymbol]:
        return self.decode(self.forward[self.encode(i, g)])

    def invert(self, i: int, g: EnvSymbol) -> tuple[int, EnvSymbol]:
        return self.decode(self.backward[self.encode(i, g)])

    def symbols(self) -> list[EnvSymbol]:
        return [self.symbol(c) for c in range(self.n_symbols)]


def _coupling_from_forward(labels: LabelSet, forward: np.ndarray) -> Coupling:
    size = len(forward)
    if sorted(forward.tolist()) != list(range(size)):
        raise ValueError("coupling table is not a bijection")
    backward = np.empty_like(forward)
    backward[forward] = np.arange(size)
    forward.setflags(write=False)
    backward.setflags(write=False)
    return Coupling(labels, forward, backward)


def build_coupling(labels: LabelSet, completion: str = "lex") -> Coupling:
    """Coupling with phi(i, (0, l)) = (beta_l(i), (i, l)).

    Points with j != 0 are paired, in lexicographic order of (i, j, l), with
    the codomain points (k, (i', l')) having k != beta_l'(i'), taken in
    lexicographic order (``completion="lex"``) or in reverse
    (``completion="reverse"``, an alternative used to probe that nothing
    observable depends on the completion).
    """
    n, nl = labels.n, len(labels)
    images = labels.images()
    idx = lambda i, j, l: (i * n + j) * nl + l  # noqa: E731
    forward = np.full(n * n * nl, -1, dtype=np.intp)
    for i in range(n):
        for l in range(nl):
            forward[idx(i, DISTINGUISHED, l)] = idx(images[l, i], i, l)
    domain = [idx(i, j, l) for i in range(n) for j in range(n) if j != DISTINGUISHED for l in range(nl)]
    codomain = [idx(k, i, l) for k in range(n) for i in range(n) for l in range(nl) if k != images[l, i]]
    if completion == "reverse":
        codomain.reverse()
    elif completion != "lex":
        raise ValueError(f"unknown completion {completion!r}")
    forward[domain] = codomain
    return _coupling_from_forward(labels, forward)


def example2_coupling() -> Coupling:
    """The hand-written two-state completion on the full 4-label set.

    For j = 1 (the second state): phi(0, (1, l)) = (beta_{l+2}(0), (0, l)) and
    phi(1, (1, l)) = (beta_{l+1}(1), (1, l)), label arithmetic mod 4.
    """
    labels = LabelSet.full(2)
    images = labels.images()
    idx = lambda i, j, l: (i * 2 + j) * 4 + l  # noqa: E731
    forward = np.empty(16, dtype=np.intp)
    for i in range(2):
        for l in range(4):
            forward[idx(i, 0, l)] = idx(images[l, i], i, l)
            shift = 2 if i == 0 else 1
            forward[idx(i, 1, l)] = idx(images[(l + shift) % 4, i], i, l)
    return _coupling_from_forward(labels, forward)


@lru_cache(maxsize=None)
def universal_coupling(n: int) -> Coupling:
    """The coupling over the full label set; depends only on n."""
    return build_coupling(LabelSet.full(n))


@dataclass(frozen=True)
class WindowedGlobalState:
    x: int
    window: tuple[EnvSymbol, ...]


@dataclass(frozen=True, eq=False)
class Dynamics:
    coupling: Coupling
    window: int

    def __post_init__(self):
        if self.window < 1:
            raise ValueError("window must hold at least one slot")

    @property
    def n(self) -> int:
        return self.coupling.n

    @property
    def n_states(self) -> int:
        """|E x G^W|."""
        return self.n * self.coupling.n_symbols**self.window

    def state(self, x: int, window) -> WindowedGlobalState:
        window = tuple(EnvSymbol(*g) for g in window)
        if len(window) != self.window:
            raise ValueError(f"window has {len(window)} slots, expected {self.window}")
        return WindowedGlobalState(x, window)

    def encode(self, s: WindowedGlobalState) -> int:
        """Mixed-radix index of s: system slowest, then slot 0, ..., slot W-1."""
        c = self.coupling
        idx = s.x
        for g in s.window:
            idx = idx * c.n_symbols + c.symbol_code(g)
        return idx

    def decode(self, idx: int) -> WindowedGlobalState:
        c = self.coupling
        codes = []
        for _ in range(self.window):
            idx, code = divmod(idx, c.n_symbols)
            codes.append(c.symbol(code))
        return WindowedGlobalState(int(idx), tuple(reversed(codes)))

    def all_states(self):
        for idx in range(self.n_states):
            yield self.decode(idx)


@lru_cache(maxsize=None)
def universal_dynamics(n: int, window: int) -> Dynamics:
    return Dynamics(universal_coupling(n), window)


def rotate(window: tuple, steps: int = 1) -> tuple:
    """Shift theta on the cyclic window: slot n receives slot n + steps."""
    steps %= len(window)
    return window[steps:] + window[:steps]


def step(d: Dynamics, s: WindowedGlobalState) -> WindowedGlobalState:
    """alpha = theta ∘ phi_1."""
    x, g = d.coupling.apply(s.x, s.window[0])
    return WindowedGlobalState(x, s.window[1:] + (g,))


def step_inverse(d: Dynamics, s: WindowedGlobalState) -> WindowedGlobalState:
    window = rotate(s.window, -1)
    x, g = d.coupling.invert(s.x, window[0])
    return WindowedGlobalState(x, (g,) + window[1:])


def _check_horizon(d: Dynamics, t: int):
    if not 0 <= t <= d.window:
        raise HorizonExceedsWindow(f"t={t} outside 0..{d.window}")


def trajectory(d: Dynamics, s0: WindowedGlobalState, t: int) -> list[WindowedGlobalState]:
    _check_horizon(d, t)
    orbit = [s0]
    for _ in range(t):
        orbit.append(step(d, orbit[-1]))
    return orbit


def cocycle_map(d: Dynamics, t: int, s: WindowedGlobalState, route: str = "shift") -> WindowedGlobalState:
    """phi~_t = phi_t ∘ ... ∘ phi_1 = theta^{-t} ∘ alpha^t.

    ``route="shift"`` evaluates the right-hand side, ``route="direct"`` lets
    the coupling act on slot s-1 at the s-th factor, never moving the window.
    """
    _check_horizon(d, t)
    if route == "shift":
        out = s
        for _ in range(t):
            out = step(d, out)
        return WindowedGlobalState(out.x, rotate(out.window, -t))
    if route == "direct":
        x, window = s.x, list(s.window)
        for slot in range(t):
            x, window[slot] = d.coupling.apply(x, window[slot])
        return WindowedGlobalState(x, tuple(window))
    raise ValueError(f"unknown route {route!r}")


def step_batch(d: Dynamics, x: np.ndarray, window: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    """Vectorized step on arrays of states.

    ``window`` holds symbol codes, shape (replicas, W). Returns new arrays.
    """
    c = d.coupling
    out = c.forward[x * c.n_symbols + window[:, 0]]
    x_new, g_new = np.divmod(out, c.n_symbols)
    return x_new, np.concatenate([window[:, 1:], g_new[:, None]], axis=1)


def system_path(d: Dynamics, s0: WindowedGlobalState, t: int) -> list[int]:
    return [s.x for s in trajectory(d, s0, t)]
