"""Term counts of the greedy sparse decomposition against the n^2 - n + 1 bound.

    python3 scripts/decomposition_survey.py --samples 200 --max-n 6
"""

import argparse

import numpy as np

from dilatron.markov import random_stochastic, recompose, sparse_decomposition


def main():
    ap = argparse.ArgumentParser()
    ap.add_argument("--samples", type=int, default=200)
    ap.add_argument("--max-n", type=int, default=6)
    ap.add_argument("--seed", type=int, default=0)
    args = ap.parse_args()
    rng = np.random.default_rng(args.seed)
    print(f"{'n':>3} {'sparsity':>8} {'mean':>7} {'max':>4} {'bound':>5} {'rec err':>9}")
    for n in range(2, args.max_n + 1):
        for sparsity in (0.0, 0.3, 0.6):
            counts, err = [], 0.0
            for _ in range(args.samples):
                p = random_stochastic(rng, n, sparsity)
                dec = sparse_decomposition(p)
                counts.append(len(dec))
                err = max(err, np.abs(recompose(dec).entries - p.entries).max())
            print(f"{n:3d} {sparsity:8.1f} {np.mean(counts):7.2f} {max(counts):4d} {n * n - n + 1:5d} {err:9.1e}")


if __name__ == "__main__":
    main()
