"""``dilatron`` command line: decompose, simulate, verify, quantum.

Exit status is 0 when every check passes, 1 when any check fails and 2 on
bad input or an exceeded size guard.
"""

from __future__ import annotations

import argparse
import sys
import time
from contextlib import contextmanager
from dataclasses import dataclass, field

import numpy as np

from . import quantum as q
from .dynamics import (
    DISTINGUISHED,
    Dynamics,
    EnvSymbol,
    build_coupling,
    cocycle_map,
    example2_coupling,
    step,
    step_inverse,
)
from .errors import DilatronError, WindowTooShort
from .exchange import load_sequence
from .markov import (
    REC_TOL,
    MatrixSequence,
    canonical_decomposition,
    label_cap,
    product_matrix,
    recompose,
    sparse_decomposition,
)
from .reports import CheckRecord, Report
from .sample_space import (
    MARKOV_TOL,
    SymbolLaw,
    build_measure,
    conditional_table,
    distribution_check,
    exact_state_distribution,
    flow_equation_check,
    monte_carlo_check,
    simulate,
    verify_markov_property,
)

COMMANDS = ("decompose", "simulate", "verify", "quantum")
EXHAUSTIVE_STATES = 20_000
SAMPLED_STATES = 5_000


@dataclass
class RunConfig:
    command: str
    input: str
    seed: int = 42
    window: int | None = None
    horizon: int | None = None
    replicas: int = 100_000
    decomposer: str = "sparse"
    format: str = "table"
    output: str | None = None
    timings: bool = False
    tolerances: dict = field(default_factory=dict)

    def tol(self, name: str, default: float) -> float:
        return self.tolerances.get(name, default)


@contextmanager
def _timed(report: Report, name: str):
    start = time.perf_counter()
    yield
    report.timings[name] = time.perf_counter() - start


def _map_str(m) -> str:
    return "(" + ",".join(str(b) for b in m.image) + ")"


def _window(cfg: RunConfig, seq: MatrixSequence) -> int:
    w = seq.horizon + 1 if cfg.window is None else cfg.window
    if w < seq.horizon:
        raise WindowTooShort(f"window {w} shorter than horizon {seq.horizon}")
    return w


def cmd_decompose(cfg: RunConfig) -> Report:
    seq = load_sequence(cfg.input, cfg.horizon)
    report = Report("decompose", cfg.input)
    n = seq.n
    bound = n * n - n + 1
    rec_tol = cfg.tol("recomposition", REC_TOL)
    with _timed(report, "decompose"):
        for t, p in enumerate(seq.matrices, start=1):
            sparse = sparse_decomposition(p)
            err = float(np.abs(recompose(sparse).entries - p.entries).max())
            nnz = int(np.count_nonzero(p.entries))
            section = {
                "sparse_terms": len(sparse),
                "bound": bound,
                "sparse": [f"{w:.12g} * {_map_str(m)}" for w, m in sparse.terms()],
            }
            report.add(CheckRecord(f"P{t}_sparse_recomposition", err, rec_tol, 1))
            report.add(CheckRecord(
                f"P{t}_sparse_term_bound", float(max(0, len(sparse) - min(bound, nnz - n + 1))), 0, 1,
                {"terms": len(sparse), "bound": bound, "nonzero_bound": nnz - n + 1},
            ))
            if n**n <= label_cap():
                canon = canonical_decomposition(p)
                err_c = float(np.abs(recompose(canon).entries - p.entries).max())
                section["canonical_terms"] = len(canon)
                section["canonical_nonzero"] = int(np.count_nonzero(canon.weights))
                section["canonical"] = [f"{w:.12g} * {_map_str(m)}" for w, m in canon.terms()]
                report.add(CheckRecord(f"P{t}_canonical_recomposition", err_c, rec_tol, 1))
                report.add(CheckRecord(f"P{t}_canonical_weight_sum", abs(float(canon.weights.sum()) - 1.0), rec_tol, 1))
            else:
                section["canonical"] = f"skipped: {n}**{n} exceeds label cap {label_cap()}"
            report.sections[f"P{t}"] = section
    return report


def cmd_simulate(cfg: RunConfig) -> Report:
    seq = load_sequence(cfg.input, cfg.horizon)
    report = Report("simulate", cfg.input)
    W = _window(cfg, seq)
    T = seq.horizon
    with _timed(report, "simulate"):
        m0, d = build_measure(seq, cfg.decomposer, 0, W)
        prod = product_matrix(seq, T)
        for k in range(seq.n):
            m = m0.with_start(k)
            exact = exact_state_distribution(m, d, T).as_array(seq.n)
            sim = simulate(m, d, T, cfg.replicas, cfg.seed)
            emp = sim.counts / cfg.replicas
            report.sections[f"k={k}"] = {
                "t": T,
                "exact": [f"{v:.10f}" for v in exact],
                "empirical": [f"{v:.10f}" for v in emp],
                "matrix_product": [f"{v:.10f}" for v in prod[k]],
            }
            report.add(distribution_check(m, d, T, cfg.tol("markov", MARKOV_TOL)))
            report.add(monte_carlo_check(m, d, T, cfg.replicas, cfg.seed, cfg.tol("sigmas", 4.0)))
    return report


def _states_for(d: Dynamics, rng: np.random.Generator):
    if d.n_states <= EXHAUSTIVE_STATES:
        return list(d.all_states())
    idx = rng.choice(d.n_states, size=SAMPLED_STATES, replace=False)
    return [d.decode(int(i)) for i in sorted(idx)]


def _max_table_diff(a: dict, b: dict) -> float:
    if a.keys() != b.keys():
        return float("inf")
    return max((float(np.abs(a[key] - b[key]).max()) for key in a), default=0.0)


def cmd_verify(cfg: RunConfig) -> Report:
    seq = load_sequence(cfg.input, cfg.horizon)
    report = Report("verify", cfg.input)
    W = _window(cfg, seq)
    T = seq.horizon
    tol = cfg.tol("markov", MARKOV_TOL)
    m0, d = build_measure(seq, cfg.decomposer, 0, W)
    c = d.coupling
    report.sections["setup"] = {
        "states": seq.n, "labels": len(c.labels), "window": W, "horizon": T,
        "decomposer": cfg.decomposer, "global_states": d.n_states,
    }
    rng = np.random.default_rng(cfg.seed)

    with _timed(report, "coupling"):
        pts = np.arange(c.size)
        report.add(CheckRecord("coupling_bijective", float(np.count_nonzero(c.backward[c.forward] != pts)), 0, c.size))
        images = c.labels.images()
        bad = sum(
            c.apply(i, EnvSymbol(DISTINGUISHED, l)) != (images[l, i], (i, l))
            for i in range(c.n) for l in range(c.n_labels)
        )
        report.add(CheckRecord("coupling_distinguished_block", float(bad), 0, c.n * c.n_labels))

    with _timed(report, "dynamics"):
        states = _states_for(d, rng)
        inv_bad = sum(step_inverse(d, step(d, s)) != s or step(d, step_inverse(d, s)) != s for s in states)
        report.add(CheckRecord("step_inverse", float(inv_bad), 0, len(states)))
        coc_bad = sum(
            cocycle_map(d, t, s, "shift") != cocycle_map(d, t, s, "direct")
            for s in states for t in range(1, W + 1)
        )
        report.add(CheckRecord("cocycle_identity", float(coc_bad), 0, len(states) * W))

    with _timed(report, "markov"):
        for k in range(seq.n):
            m = m0.with_start(k)
            for t in range(1, T + 1):
                report.add(distribution_check(m, d, t, tol))
            rec = verify_markov_property(m, d, T, tol=tol)
            rec.name = f"markov_property_k{k}"
            report.add(rec)
            flow = flow_equation_check(m, d, T)
            flow.name = f"flow_equation_k{k}"
            report.add(flow)

    with _timed(report, "independence"):
        alternatives = [("reverse", build_coupling(c.labels, "reverse"))]
        if seq.n == 2 and c.labels.is_full():
            alternatives.append(("example2", example2_coupling()))
        for k in range(seq.n):
            m = m0.with_start(k)
            base = conditional_table(m, d, T)
            for name, alt in alternatives:
                diff = _max_table_diff(base, conditional_table(m, Dynamics(alt, W), T))
                report.add(CheckRecord(f"completion_{name}_k{k}", diff, tol, len(base)))
        if W > T:
            q0 = SymbolLaw.uniform(seq.n, len(c.labels))
            m_alt, _ = build_measure(seq, cfg.decomposer, 0, W, q0=q0, labels=c.labels)
            for k in range(seq.n):
                rec = distribution_check(m_alt.with_start(k), d, T, tol, include_past=True)
                rec.name = f"q0_uniform_k{k}"
                report.add(rec)
                rec = verify_markov_property(m_alt.with_start(k), d, T, tol=tol)
                rec.name = f"q0_uniform_markov_k{k}"
                report.add(rec)
    return report


def cmd_quantum(cfg: RunConfig) -> Report:
    seq = load_sequence(cfg.input, cfg.horizon)
    report = Report("quantum", cfg.input)
    W = 2 if cfg.window is None else cfg.window
    T = min(seq.horizon, W)
    p = seq.at(1)
    dec = canonical_decomposition(p) if cfg.decomposer == "canonical" else sparse_decomposition(p)
    with _timed(report, "build"):
        qd = q.build_quantum_dilation(p, dec, W)
    report.sections["setup"] = {
        "states": p.n, "labels": len(dec.labels), "slot_dim": qd.zdim, "window": W,
        "total_dim": int(np.prod(qd.dims)), "horizon": T, "decomposer": cfg.decomposer,
        "homogeneous": seq.homogeneous,
    }
    tol = cfg.tol("quantum", q.QUANTUM_TOL)
    with _timed(report, "structure"):
        report.add(q.unitarity_check("V_unitary", qd.V))
        report.add(q.unitarity_check("theta_unitary", qd.theta))
        report.add(q.unitarity_check("U_unitary", qd.U))
        report.add(q.extension_check(qd.T, p))
        report.add(q.hermiticity_check(qd.T, cfg.seed))
        report.add(q.diagonal_image_check(qd.T, cfg.seed))
    with _timed(report, "one_step"):
        report.add(q.one_step_dilation_check(qd.T, qd.V, qd.phi, tol))
        report.add(q.theta_commutes_check(qd))
    with _timed(report, "multi_step"):
        report.add(q.qsf_check(qd.T, qd.V, qd.phi, T, tol))
        report.add(q.group_dilation_check(qd, T, tol, seed=cfg.seed))
        report.add(q.three_route_check(qd, T, tol))
    with _timed(report, "trajectories"):
        for k in range(p.n):
            report.add(q.trajectory_distribution_check(qd, k, seed=cfg.seed, tol=tol))
            report.add(q.eqexp_check(qd.T, p, k, T))
    return report


HANDLERS = {
    "decompose": cmd_decompose,
    "simulate": cmd_simulate,
    "verify": cmd_verify,
    "quantum": cmd_quantum,
}


def _tolerance(text: str) -> tuple[str, float]:
    name, _, value = text.partition("=")
    if not value:
        raise argparse.ArgumentTypeError("expected NAME=VALUE")
    return name, float(value)


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="dilatron", description=__doc__.splitlines()[0])
    parser.add_argument("command", choices=COMMANDS)
    parser.add_argument("--input", required=True, help="matrix file, or builtin:NAME")
    parser.add_argument("--seed", type=int, default=42)
    parser.add_argument("--window", type=int)
    parser.add_argument("--horizon", type=int)
    parser.add_argument("--replicas", type=int, default=100_000)
    parser.add_argument("--decomposer", choices=("sparse", "canonical"), default="sparse")
    parser.add_argument("--format", choices=("table", "structured"), default="table")
    parser.add_argument("--output")
    parser.add_argument("--timings", action="store_true", help="include timings in structured output")
    parser.add_argument("--tol", type=_tolerance, action="append", default=[], metavar="NAME=VALUE",
                        help="override a tolerance (recomposition, markov, sigmas, quantum)")
    return parser


def run(cfg: RunConfig) -> Report:
    return HANDLERS[cfg.command](cfg)


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    cfg = RunConfig(
        command=args.command, input=args.input, seed=args.seed, window=args.window,
        horizon=args.horizon, replicas=args.replicas, decomposer=args.decomposer,
        format=args.format, output=args.output, timings=args.timings, tolerances=dict(args.tol),
    )
    try:
        report = run(cfg)
    except (DilatronError, OSError) as exc:
        print(f"dilatron {cfg.command}: {type(exc).__name__}: {exc}", file=sys.stderr)
        return 2
    text = report.to_json(cfg.timings) if cfg.format == "structured" else report.to_table()
    if cfg.output:
        with open(cfg.output, "w") as fh:
            fh.write(text)
    else:
        sys.stdout.write(text)
    return 0 if report.passed else 1


if __name__ == "__main__":
    sys.exit(main())
