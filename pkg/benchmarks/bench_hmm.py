"""Benchmark the compiled HMM kernels against the numpy fallback.

Usage: python benchmarks/bench_hmm.py [--tokens N] [--labels L] [--sources J]

Each backend runs the same workload: emission scoring, one full
forward-backward E-step (including transition counts), and a Viterbi
decode, repeated over several documents.
"""

import argparse
import time

import numpy as np

from weaklab.denoiser import _kernels_py
from weaklab.denoiser.hmm import emission_scores
from weaklab.tags import TagSpace, VoteGrid

try:
    from weaklab.denoiser import _kernels_c
except ImportError:
    _kernels_c = None


def make_workload(n_docs, n_tokens, n_labels, n_sources, seed=0):
    rng = np.random.default_rng(seed)
    space = TagSpace([f"L{i}" for i in range(n_labels)])
    K = space.K
    mask = space.transition_mask()
    pi = (rng.random(K) + 0.05) * space.start_mask()
    pi /= pi.sum()
    trans = (rng.random((K, K)) + 0.05) * mask
    trans /= trans.sum(axis=1, keepdims=True)
    emissions = []
    for _ in range(n_sources):
        emis = rng.random((K, K + 1)) + 0.05
        emis /= emis.sum(axis=1, keepdims=True)
        emissions.append(emis)
    grids = []
    for d in range(n_docs):
        obs = rng.integers(0, K + 1, size=(n_tokens, n_sources), dtype=np.int16)
        grids.append(VoteGrid(f"doc{d}", obs, [f"s{j}" for j in range(n_sources)], space))
    return pi, trans, emissions, grids, space


def run_backend(kernels, pi, trans, emissions, grids, space, repeats=3):
    class Params:
        pass

    params = Params()
    params.pi, params.trans, params.emissions = pi, trans, emissions
    params.tag_space = space

    best = float("inf")
    for _ in range(repeats):
        start = time.perf_counter()
        for grid in grids:
            B = emission_scores(params, grid)
            alpha, c = kernels.forward(pi, trans, B)
            beta = kernels.backward(trans, B, c)
            gamma = alpha * beta
            gamma /= gamma.sum(axis=1, keepdims=True)
            kernels.transition_counts(alpha, beta, trans, B, c)
            with np.errstate(divide="ignore"):
                kernels.viterbi_path(np.log(pi), np.log(trans), np.log(B))
        best = min(best, time.perf_counter() - start)
    return best


def main():
    parser = argparse.ArgumentParser()
    parser.add_argument("--docs", type=int, default=20)
    parser.add_argument("--tokens", type=int, default=2000)
    parser.add_argument("--labels", type=int, default=4)
    parser.add_argument("--sources", type=int, default=3)
    args = parser.parse_args()

    pi, trans, emissions, grids, space = make_workload(
        args.docs, args.tokens, args.labels, args.sources
    )
    workload = f"{args.docs} docs x {args.tokens} tokens, K={space.K}, J={args.sources}"
    print(f"workload: {workload}")

    t_py = run_backend(_kernels_py, pi, trans, emissions, grids, space)
    print(f"python kernels:   {t_py * 1000:8.1f} ms")
    if _kernels_c is None:
        print("compiled kernels: not built")
        return
    t_c = run_backend(_kernels_c, pi, trans, emissions, grids, space)
    print(f"compiled kernels: {t_c * 1000:8.1f} ms")
    print(f"speedup: {t_py / t_c:.1f}x")


if __name__ == "__main__":
    main()
