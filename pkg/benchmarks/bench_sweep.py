#!/usr/bin/env python3
"""Time one E-step sweep with the compiled and pure-Python kernels.

Uses a random degree-heterogeneous graph by default, or the MovieLens
co-purchase graph with ``--movielens DIR``. Both kernels receive identical
inputs (M-step coefficients at a random q(Z)); the script also reports the largest difference between their outputs.
"""

import argparse
import time

import numpy as np
import scipy.sparse as sp

from wsbmrec.copurchase import build_graph, from_adjacency
from wsbmrec.ingest import parse_ratings
from wsbmrec.wsbm import kernels
from wsbmrec.wsbm.inference import Priors, _Fitter, expected_stats


def random_graph(n, density, seed):
    rng = np.random.default_rng(seed)
    A = sp.random(n, n, density=density, random_state=rng, data_rvs=lambda k: rng.integers(1, 20, k)).tocsr()
    A = sp.triu(A, 1)
    return from_adjacency((A + A.T).astype(np.int64))


def inputs(graph, K, seed, family):
    """Sweep inputs as vb_fit builds them: M-step coefficients at a random q(Z)."""
    fit = _Fitter(graph, K, Priors(), 0.5, family, None)
    mu = np.random.default_rng(seed).dirichlet(np.ones(K), size=graph.n)
    C = fit.coefficient_matrices(*fit.m_step(expected_stats(fit.ga, mu)))
    return fit.ga, mu, C, fit.log_prior


def time_backend(name, ga, mu0, C, log_prior, repeat):
    sweep = kernels.get_sweep(name)
    best, out = np.inf, None
    for _ in range(repeat):
        mu = mu0.copy()
        t0 = time.perf_counter()
        sweep(ga.indptr, ga.indices, ga.data, ga.d, mu, C["r"], C["b"], C["q"], C["s"], log_prior, True)
        best = min(best, time.perf_counter() - t0)
        out = mu
    return best, out


def main(argv=None):
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--movielens", help="directory with u.data")
    ap.add_argument("--n", type=int, default=2000)
    ap.add_argument("--density", type=float, default=0.05)
    ap.add_argument("--k", type=int, nargs="+", default=[2, 4, 8])
    ap.add_argument("--repeat", type=int, default=3)
    ap.add_argument("--seed", type=int, default=0)
    ap.add_argument("--family", default="normal_weight", help="weight family (normal_weight exercises every term)")
    args = ap.parse_args(argv)

    if args.movielens:
        graph = build_graph(parse_ratings(f"{args.movielens}/u.data"))
        label = "movielens"
    else:
        graph = random_graph(args.n, args.density, args.seed)
        label = f"random n={args.n} density={args.density}"
    nnz = graph.adjacency.nnz
    print(f"graph: {label}, n={graph.n}, nnz={nnz}")
    if kernels.DEFAULT_BACKEND != "compiled":
        print("compiled kernel not available; only the Python backend is timed")
    print(f"{'K':>3} {'python [s]':>11} {'compiled [s]':>13} {'speedup':>8} {'max |diff|':>11}")
    for K in args.k:
        ga, mu0, C, lp = inputs(graph, K, args.seed, args.family)
        tp, mp = time_backend("python", ga, mu0, C, lp, args.repeat)
        if kernels.DEFAULT_BACKEND == "compiled":
            tc, mc = time_backend("compiled", ga, mu0, C, lp, args.repeat)
            print(f"{K:>3} {tp:>11.4f} {tc:>13.4f} {tp / tc:>7.1f}x {np.max(np.abs(mp - mc)):>11.2e}")
        else:
            print(f"{K:>3} {tp:>11.4f} {'-':>13} {'-':>8} {'-':>11}")


if __name__ == "__main__":
    main()
