"""Finite-dimensional quantum extension of the classical dilation.

System space H = C^n, one environment slot Z = C^{n * |L|} with basis
|j, l>, and a window of W slots. Operators are dense complex arrays in the
basis |i; z_0; ...; z_{W-1}> with the system index slowest, matching
:meth:`dilatron.dynamics.Dynamics.encode`.
"""

from __future__ import annotations

import itertools
from dataclasses import dataclass

import numpy as np

from .dynamics import Coupling, Dynamics, WindowedGlobalState, build_coupling, step
from .errors import DimensionMismatch, HorizonExceedsWindow, SizeGuardExceeded
from .markov import (
    ROW_TOL,
    Decomposition,
    MatrixSequence,
    StochasticMatrix,
    apply_to_observable,
    evolution_product,
    recompose,
    sparse_decomposition,
)
from .reports import CheckRecord
from .sample_space import DilationMeasure, EnvProductLaw, SymbolLaw, expectation

QUANTUM_TOL = 1e-10
EXACT_TOL = 1e-12
DEFAULT_DIM_CAP = 2048


def max_norm(a) -> float:
    return float(np.abs(a).max()) if np.size(a) else 0.0


def _guard(dim: int, cap: int):
    if dim > cap:
        raise SizeGuardExceeded(f"operator dimension {dim} exceeds cap {cap}")


def embed_diagonal(f, dim: int | None = None) -> np.ndarray:
    """m_f = sum_i f(i) |i><i|."""
    f = np.asarray(f)
    if f.ndim != 1 or (dim is not None and len(f) != dim):
        raise DimensionMismatch(f"observable of shape {f.shape} does not fit dimension {dim}")
    return np.diag(f.astype(complex))


def matrix_units(dim: int):
    """The operator basis |a><b|."""
    for a, b in itertools.product(range(dim), repeat=2):
        e = np.zeros((dim, dim), dtype=complex)
        e[a, b] = 1.0
        yield e


def is_density(rho, herm_tol: float = EXACT_TOL, psd_tol: float = 1e-10) -> bool:
    rho = np.asarray(rho)
    if max_norm(rho - rho.conj().T) > herm_tol:
        return False
    if abs(np.trace(rho) - 1) > herm_tol:
        return False
    return bool(np.linalg.eigvalsh((rho + rho.conj().T) / 2).min() >= -psd_tol)


@dataclass(frozen=True)
class KrausMap:
    """T[a] = sum_K K a K^*."""

    ops: tuple[np.ndarray, ...]

    def __call__(self, a) -> np.ndarray:
        a = np.asarray(a, dtype=complex)
        return sum(k @ a @ k.conj().T for k in self.ops)

    def power(self, a, t: int) -> np.ndarray:
        out = np.asarray(a, dtype=complex)
        for _ in range(t):
            out = self(out)
        return out

    @property
    def dim(self) -> int:
        return self.ops[0].shape[0]


def build_T(p: StochasticMatrix, dec: Decomposition) -> KrausMap:
    """Kraus operators sqrt(q_l) |i><beta_l(i)| for every label with q_l > 0 and state i."""
    if max_norm(recompose(dec).entries - p.entries) > ROW_TOL:
        raise ValueError("decomposition does not recompose the matrix")
    n = p.n
    ops = []
    for q, m in dec.terms():
        if q <= 0:
            continue
        for i in range(n):
            k = np.zeros((n, n), dtype=complex)
            k[i, m(i)] = np.sqrt(q)
            ops.append(k)
    return KrausMap(tuple(ops))


def build_V(c: Coupling) -> np.ndarray:
    """V = sum |phi(i, (j, l))><i, j, l|, a permutation unitary on H ⊗ Z."""
    v = np.zeros((c.size, c.size), dtype=complex)
    v[c.forward, np.arange(c.size)] = 1.0
    return v


def env_vector(weights, n: int) -> np.ndarray:
    """phi = sum_l sqrt(q_l) |0, l> in Z."""
    q = np.asarray(weights, dtype=float)
    phi = np.zeros(n * len(q), dtype=complex)
    phi[: len(q)] = np.sqrt(q)
    return phi


def conditional_expectation(A, sigma, sys_dim: int) -> np.ndarray:
    """E_sigma[A] on H: tr[E_sigma[A] rho] = tr[A (rho ⊗ sigma)].

    ``sigma`` may be any operator on the environment (e.g. |z><z'|).
    """
    A = np.asarray(A)
    sigma = np.asarray(sigma)
    env = sigma.shape[0]
    if A.shape != (sys_dim * env, sys_dim * env):
        raise DimensionMismatch(f"operator {A.shape} does not factor as {sys_dim} x {env}")
    return np.einsum("aebf,fe->ab", A.reshape(sys_dim, env, sys_dim, env), sigma)


def permute_factors(M, dims, perm) -> np.ndarray:
    """Reorder the tensor factors of M: new factor p is old factor perm[p]."""
    k = len(dims)
    t = np.asarray(M).reshape(tuple(dims) * 2)
    t = t.transpose(list(perm) + [k + p for p in perm])
    new_dims = [dims[p] for p in perm]
    d = int(np.prod(new_dims))
    return t.reshape(d, d)


def on_slot(op, n: int, zdim: int, slot: int, slots: int) -> np.ndarray:
    """Extend an operator on H ⊗ Z to H ⊗ Z^{⊗slots}, acting on ``slot``."""
    full = np.kron(op, np.eye(zdim ** (slots - 1), dtype=complex))
    old = ["h", slot] + [r for r in range(slots) if r != slot]
    new = ["h"] + list(range(slots))
    dims = [n] + [zdim] * slots
    return permute_factors(full, dims, [old.index(x) for x in new])


def shift_operator(n: int, zdim: int, slots: int) -> np.ndarray:
    """Theta |i; z_0, ..., z_{W-1}> = |i; z_1, ..., z_{W-1}, z_0>."""
    dims = [n] + [zdim] * slots
    idx = np.arange(int(np.prod(dims))).reshape(dims)
    # target[i, z_0, ..., z_{W-1}] = idx[i, z_1, ..., z_{W-1}, z_0]
    target = idx.transpose([0, slots] + list(range(1, slots))).reshape(-1)
    d = len(target)
    theta = np.zeros((d, d), dtype=complex)
    theta[target, idx.reshape(-1)] = 1.0
    return theta


def cumulative_V(V, n: int, zdim: int, t: int) -> np.ndarray:
    """V~_t = V_t ... V_1 on H ⊗ Z^{⊗t}."""
    out = np.eye(n * zdim**t, dtype=complex)
    for s in range(t):
        out = on_slot(V, n, zdim, s, t) @ out
    return out


@dataclass(frozen=True, eq=False)
class QuantumDilation:
    p: StochasticMatrix
    decomposition: Decomposition
    coupling: Coupling
    T: KrausMap
    V: np.ndarray
    phi: np.ndarray
    window: int
    theta: np.ndarray
    U: np.ndarray

    @property
    def n(self) -> int:
        return self.p.n

    @property
    def zdim(self) -> int:
        return len(self.phi)

    @property
    def dims(self) -> list[int]:
        return [self.n] + [self.zdim] * self.window

    @property
    def psi(self) -> np.ndarray:
        """Psi_W = phi^{⊗W}."""
        out = np.ones(1, dtype=complex)
        for _ in range(self.window):
            out = np.kron(out, self.phi)
        return out

    def dynamics(self) -> Dynamics:
        return Dynamics(self.coupling, self.window)


def build_quantum_dilation(
    p: StochasticMatrix,
    dec: Decomposition | None = None,
    window: int = 2,
    coupling: Coupling | None = None,
    cap: int = DEFAULT_DIM_CAP,
) -> QuantumDilation:
    """T, V, phi, Theta_W and U = Theta_W V_1 over the decomposition's label set."""
    dec = sparse_decomposition(p) if dec is None else dec
    coupling = build_coupling(dec.labels) if coupling is None else coupling
    if coupling.labels != dec.labels:
        raise ValueError("coupling and decomposition use different label sets")
    n, zdim = p.n, coupling.n_symbols
    _guard(n * zdim**window, cap)
    V = build_V(coupling)
    theta = shift_operator(n, zdim, window)
    U = theta @ on_slot(V, n, zdim, 0, window)
    return QuantumDilation(p, dec, coupling, build_T(p, dec), V, env_vector(dec.weights, n), window, theta, U)


def unitarity_check(name: str, u) -> CheckRecord:
    eye = np.eye(len(u))
    dev = max(max_norm(u.conj().T @ u - eye), max_norm(u @ u.conj().T - eye))
    return CheckRecord(name, dev, EXACT_TOL, 1)


def extension_check(T: KrausMap, p: StochasticMatrix) -> CheckRecord:
    """T[1] = 1 and T[m_f] = m_{Pf} over the indicator basis."""
    n = p.n
    worst = max_norm(T(np.eye(n)) - np.eye(n))
    for f in np.eye(n):
        worst = max(worst, max_norm(T(embed_diagonal(f)) - embed_diagonal(apply_to_observable(p, f))))
    return CheckRecord("extension_identity", worst, EXACT_TOL, n + 1)


def one_step_dilation_check(T: KrausMap, V, phi, tol: float = QUANTUM_TOL) -> CheckRecord:
    """max over matrix units a of |E_{|phi><phi|}[V^*(a ⊗ 1)V] - T[a]|."""
    n = T.dim
    zdim = len(phi)
    sigma = np.outer(phi, phi.conj())
    worst = 0.0
    for a in matrix_units(n):
        lhs = conditional_expectation(V.conj().T @ np.kron(a, np.eye(zdim)) @ V, sigma, n)
        worst = max(worst, max_norm(lhs - T(a)))
    return CheckRecord("one_step_dilation", worst, tol, n * n, {"dim": n * zdim})


def qsf_recursive(V, a_stack, t: int, n: int) -> np.ndarray:
    """j_t[a] from j_0 = id and j_t[a] = sum_{zz'} j_{t-1}[E_{|z><z'|}[nu(a)]] ⊗ |z'><z|.

    nu(a) = V^*(a ⊗ 1)V. Works on a stack of operators, shape (..., n, n).
    """
    a_stack = np.asarray(a_stack, dtype=complex)
    if t == 0:
        return a_stack
    zdim = V.shape[0] // n
    lead = a_stack.shape[:-2]
    lifted = np.einsum("...ab,zy->...azby", a_stack, np.eye(zdim)).reshape(lead + (n * zdim, n * zdim))
    nu = V.conj().T @ lifted @ V
    # E_{|z><z'|}[nu]_{ab} = nu[(a, z'), (b, z)]
    blocks = nu.reshape(lead + (n, zdim, n, zdim)).transpose(
        tuple(range(len(lead))) + tuple(len(lead) + p for p in (1, 3, 0, 2))
    )
    inner = qsf_recursive(V, blocks, t - 1, n)  # (..., z', z, D, D)
    D = inner.shape[-1]
    out = inner.transpose(tuple(range(len(lead))) + tuple(len(lead) + p for p in (2, 0, 3, 1)))
    return out.reshape(lead + (D * zdim, D * zdim))


def qsf_check(T: KrausMap, V, phi, t_max: int, tol: float = QUANTUM_TOL, cap: int = DEFAULT_DIM_CAP) -> CheckRecord:
    """Recursion vs V~_t^*(a ⊗ 1)V~_t, and E_{phi^{⊗t}}[j_t[a]] vs T^t[a]."""
    n = T.dim
    zdim = len(phi)
    _guard(n * zdim**t_max, cap)
    rec_dev = exp_dev = 0.0
    units = np.array(list(matrix_units(n)))
    for t in range(1, t_max + 1):
        vt = cumulative_V(V, n, zdim, t)
        psi = np.ones(1, dtype=complex)
        for _ in range(t):
            psi = np.kron(psi, phi)
        sigma = np.outer(psi, psi.conj())
        recursive = qsf_recursive(V, units, t, n)
        lift = np.eye(zdim**t)
        for a, jt in zip(units, recursive):
            direct = vt.conj().T @ np.kron(a, lift) @ vt
            rec_dev = max(rec_dev, max_norm(jt - direct))
            exp_dev = max(exp_dev, max_norm(conditional_expectation(direct, sigma, n) - T.power(a, t)))
    return CheckRecord(
        "qsf", max(rec_dev, exp_dev), tol, t_max * n * n,
        {"recursion_deviation": rec_dev, "expectation_deviation": exp_dev, "dim": n * zdim**t_max},
    )


def group_dilation_check(qd: QuantumDilation, t_max: int | None = None, tol: float = QUANTUM_TOL,
                         n_random: int = 8, seed: int = 0) -> CheckRecord:
    """E_{Psi_W}[U^{*t}(a ⊗ 1)U^t] = T^t[a] and U^{*t} m_F U^t = m_{F ∘ alpha^t}, t <= W.

    Also compares U^{*t}(a ⊗ 1)U^t with the flow j_t[a] ⊗ 1 built from V~_t.
    """
    n, zdim, W = qd.n, qd.zdim, qd.window
    t_max = W if t_max is None else t_max
    if t_max > W:
        raise HorizonExceedsWindow(f"t={t_max} exceeds window {W}")
    D = n * zdim**W
    U, Ud = qd.U, qd.U.conj().T
    sigma = np.outer(qd.psi, qd.psi.conj())
    env_eye = np.eye(zdim**W)
    dev_T = dev_flow = dev_F = dev_diag = 0.0
    units = list(matrix_units(n))
    dyn = qd.dynamics()
    rng = np.random.default_rng(seed)
    # diagonal window observables: cylinders on every slot plus random F
    observables = []
    for slot in range(W):
        for code in range(zdim):
            observables.append(lambda s, slot=slot, code=code: float(qd.coupling.symbol_code(s.window[slot]) == code))
    tables = [rng.random(D) for _ in range(n_random)]
    states = [dyn.decode(i) for i in range(D)]
    Ut = np.eye(D, dtype=complex)
    for t in range(1, t_max + 1):
        Ut = U @ Ut
        Utd = Ut.conj().T
        vt_small = cumulative_V(qd.V, n, zdim, t)
        vt = np.kron(vt_small, np.eye(zdim ** (W - t)))
        for a in units:
            conj = Utd @ np.kron(a, env_eye) @ Ut
            dev_T = max(dev_T, max_norm(conditional_expectation(conj, sigma, n) - qd.T.power(a, t)))
            dev_flow = max(dev_flow, max_norm(conj - vt.conj().T @ np.kron(a, env_eye) @ vt))
        evolved = []
        for s in states:
            for _ in range(t):
                s = step(dyn, s)
            evolved.append(s)
        idx_evolved = np.array([dyn.encode(s) for s in evolved])
        for F in observables:
            vals = np.array([F(s) for s in states])
            mf = embed_diagonal(vals)
            out = Utd @ mf @ Ut
            dev_F = max(dev_F, max_norm(np.diag(out) - np.array([F(s) for s in evolved])))
            dev_diag = max(dev_diag, max_norm(out - np.diag(np.diag(out))))
        for vals in tables:
            out = Utd @ embed_diagonal(vals) @ Ut
            dev_F = max(dev_F, max_norm(np.diag(out) - vals[idx_evolved]))
            dev_diag = max(dev_diag, max_norm(out - np.diag(np.diag(out))))
    worst = max(dev_T, dev_flow, dev_F, dev_diag)
    return CheckRecord(
        "group_dilation", worst, tol, t_max * (len(units) + len(observables) + n_random),
        {"semigroup_deviation": dev_T, "flow_deviation": dev_flow,
         "observable_deviation": dev_F, "offdiagonal": dev_diag, "dim": D},
    )


def theta_commutes_check(qd: QuantumDilation) -> CheckRecord:
    """Theta commutes with a ⊗ 1, so U^*(a ⊗ 1)U = V_1^*(a ⊗ 1)V_1."""
    n, zdim, W = qd.n, qd.zdim, qd.window
    env_eye = np.eye(zdim**W)
    v1 = on_slot(qd.V, n, zdim, 0, W)
    worst = 0.0
    for a in matrix_units(n):
        big = np.kron(a, env_eye)
        worst = max(worst, max_norm(qd.theta @ big - big @ qd.theta))
        worst = max(worst, max_norm(qd.U.conj().T @ big @ qd.U - v1.conj().T @ big @ v1))
    return CheckRecord("theta_commutes", worst, EXACT_TOL, n * n)


def classical_measure(qd: QuantumDilation, k: int) -> DilationMeasure:
    """delta_k ⊗ (delta_0 ⊗ q)^{⊗W}: the law matching |k><k| ⊗ |Psi_W><Psi_W|."""
    law = SymbolLaw.from_label_weights(qd.decomposition.weights, qd.n)
    seq = MatrixSequence.constant(qd.p, qd.window)
    return DilationMeasure(k, EnvProductLaw((law,) * qd.window, qd.window), seq)


def trajectory_distribution_check(
    qd: QuantumDilation, k: int, n_random: int = 20, seed: int = 0, tol: float = QUANTUM_TOL
) -> CheckRecord:
    """Classical E_k[F] against tr[m_F |k><k| ⊗ |Psi_W><Psi_W|] for a family of F.

    The family holds constants, initial-state indicators, one-slot cylinders,
    seeded random F, system indicators transported by alpha^t (quantum side
    via U^t) and product / max compositions of random pairs.
    """
    dyn = qd.dynamics()
    m = classical_measure(qd, k)
    D = dyn.n_states
    states = [dyn.decode(i) for i in range(D)]
    ket = np.zeros(qd.n, dtype=complex)
    ket[k] = 1.0
    vec = np.kron(ket, qd.psi)

    def quantum_mean(op):
        return complex(vec.conj() @ op @ vec)

    def diag_of(F):
        return np.array([F(s) for s in states], dtype=float)

    cases: list[tuple[str, float, complex]] = []

    def static(name, F):
        cases.append((name, expectation(m, dyn, F), quantum_mean(embed_diagonal(diag_of(F)))))

    static("one", lambda s: 1.0)
    for kk in range(qd.n):
        static(f"X0={kk}", lambda s, kk=kk: float(s.x == kk))
    for slot in range(qd.window):
        for g in qd.coupling.symbols():
            static(f"Y{slot + 1}={tuple(g)}", lambda s, slot=slot, g=g: float(s.window[slot] == g))
    rng = np.random.default_rng(seed)
    tables = [rng.random(D) for _ in range(n_random)]
    for r, tab in enumerate(tables):
        static(f"random{r}", lambda s, tab=tab: float(tab[dyn.encode(s)]))
    Ut = np.eye(D, dtype=complex)
    for t in range(1, qd.window + 1):
        Ut = qd.U @ Ut
        for j in range(qd.n):
            F = lambda s, j=j: float(s.x == j)  # noqa: E731
            cases.append((f"X{t}={j}", expectation(m, dyn, F, t),
                          quantum_mean(Ut.conj().T @ embed_diagonal(diag_of(F)) @ Ut)))
    for r in range(0, n_random - 1, 2):
        f1, f2 = tables[r], tables[r + 1]
        m1, m2 = embed_diagonal(f1), embed_diagonal(f2)
        cases.append((f"product{r}", expectation(m, dyn, lambda s: float(f1[dyn.encode(s)] * f2[dyn.encode(s)])),
                      quantum_mean(m1 @ m2)))
        cases.append((f"max{r}", expectation(m, dyn, lambda s: float(max(f1[dyn.encode(s)], f2[dyn.encode(s)]))),
                      quantum_mean(commuting_calculus(np.maximum, m1, m2))))
    worst = max(abs(c - q) for _, c, q in cases)
    return CheckRecord(f"trajectory_distribution_k{k}", worst, tol, len(cases))


def commuting_calculus(eta, *ops) -> np.ndarray:
    """eta(A_1, ..., A_n) for simultaneously diagonal operators."""
    for op in ops:
        if max_norm(op - np.diag(np.diag(op))) > 0:
            raise ValueError("operators are not diagonal in the computational basis")
    return np.diag(eta(*(np.diag(op) for op in ops)).astype(complex))


def cylinder_probability(qd: QuantumDilation, k: int, slot: int, g) -> tuple[float, float]:
    """(classical, quantum) probability that window slot ``slot`` holds ``g``."""
    dyn = qd.dynamics()
    F = lambda s: float(s.window[slot] == tuple(g))  # noqa: E731
    classical = expectation(classical_measure(qd, k), dyn, F)
    ket = np.zeros(qd.n, dtype=complex)
    ket[k] = 1.0
    vec = np.kron(ket, qd.psi)
    diag = np.array([F(dyn.decode(i)) for i in range(dyn.n_states)])
    return classical, float(np.real(vec.conj() @ embed_diagonal(diag) @ vec))


def eqexp_check(T: KrausMap, p: StochasticMatrix, k: int, t_max: int, tol: float = EXACT_TOL) -> CheckRecord:
    """P^t f(k) = tr[T^t[m_f] |k><k|] for indicator f, t = 0..t_max."""
    n = p.n
    seq = MatrixSequence.constant(p, max(t_max, 1))
    rho = np.zeros((n, n), dtype=complex)
    rho[k, k] = 1.0
    worst = 0.0
    for t in range(t_max + 1):
        for f in np.eye(n):
            classical = evolution_product(seq, t, f)[k]
            quantum = np.trace(T.power(embed_diagonal(f), t) @ rho)
            worst = max(worst, abs(classical - quantum))
    return CheckRecord(f"eqexp_k{k}", worst, tol, (t_max + 1) * n)


def three_route_check(qd: QuantumDilation, t_max: int, tol: float = QUANTUM_TOL) -> CheckRecord:
    """T^t[a] by Kraus iteration, by the V~_t flow and by U^t agree."""
    n, zdim, W = qd.n, qd.zdim, qd.window
    if t_max > W:
        raise HorizonExceedsWindow(f"t={t_max} exceeds window {W}")
    worst = 0.0
    env_eye = np.eye(zdim**W)
    sigma_W = np.outer(qd.psi, qd.psi.conj())
    Ut = np.eye(len(qd.U), dtype=complex)
    for t in range(1, t_max + 1):
        Ut = qd.U @ Ut
        vt = cumulative_V(qd.V, n, zdim, t)
        psi_t = np.ones(1, dtype=complex)
        for _ in range(t):
            psi_t = np.kron(psi_t, qd.phi)
        sigma_t = np.outer(psi_t, psi_t.conj())
        for a in matrix_units(n):
            kraus = qd.T.power(a, t)
            flow = conditional_expectation(vt.conj().T @ np.kron(a, np.eye(zdim**t)) @ vt, sigma_t, n)
            group = conditional_expectation(Ut.conj().T @ np.kron(a, env_eye) @ Ut, sigma_W, n)
            worst = max(worst, max_norm(kraus - flow), max_norm(kraus - group), max_norm(flow - group))
    return CheckRecord("three_routes", worst, tol, t_max * n * n)


def hermiticity_check(T: KrausMap, seed: int = 0, samples: int = 10) -> CheckRecord:
    rng = np.random.default_rng(seed)
    worst = 0.0
    for _ in range(samples):
        a = rng.normal(size=(T.dim, T.dim)) + 1j * rng.normal(size=(T.dim, T.dim))
        worst = max(worst, max_norm(T(a.conj().T) - T(a).conj().T))
    return CheckRecord("hermiticity", worst, EXACT_TOL, samples)


def diagonal_image_check(T: KrausMap, seed: int = 0, samples: int = 10) -> CheckRecord:
    """T maps every operator into the diagonal algebra."""
    rng = np.random.default_rng(seed)
    worst = 0.0
    for _ in range(samples):
        a = rng.normal(size=(T.dim, T.dim)) + 1j * rng.normal(size=(T.dim, T.dim))
        out = T(a)
        worst = max(worst, max_norm(out - np.diag(np.diag(out))))
    return CheckRecord("diagonal_image", worst, EXACT_TOL, samples)
