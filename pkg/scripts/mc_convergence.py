"""Monte Carlo error of the dilation sampler as the replica count grows.

    python3 scripts/mc_convergence.py --input builtin:example2 --t 2
"""

import argparse

import numpy as np

from dilatron.exchange import load_sequence
from dilatron.sample_space import build_measure, exact_state_distribution, simulate


def main():
    ap = argparse.ArgumentParser()
    ap.add_argument("--input", default="builtin:example2")
    ap.add_argument("--t", type=int, default=2)
    ap.add_argument("--k", type=int, default=0)
    ap.add_argument("--seed", type=int, default=42)
    args = ap.parse_args()
    seq = load_sequence(args.input, max(args.t, 1))
    m, d = build_measure(seq, k=args.k)
    exact = exact_state_distribution(m, d, args.t).as_array(seq.n)
    print(f"exact law of X_{args.t} from {args.k}: {np.round(exact, 6)}")
    print(f"{'replicas':>9} {'max |err|':>10} {'err*sqrt(R)':>12}")
    for r in (10**3, 10**4, 10**5, 10**6):
        emp = simulate(m, d, args.t, r, args.seed).counts / r
        err = np.abs(emp - exact).max()
        print(f"{r:9d} {err:10.2e} {err * np.sqrt(r):12.3f}")


if __name__ == "__main__":
    main()
