"""Step-size grid for the leading eigenvector: rSV-LBFGS, rSVRG, VR-PCA.

All methods start from the same random unit vector. Prints passes to reach
each error threshold for the best configuration of each algorithm.

    python3 scripts/eig_grid.py --d 100 --N 10000 --gap 0.05 --mb 100 --seeds 0
"""
import argparse
import itertools
import time
import warnings

import numpy as np

from rsvlbfgs import (
    DivergenceError,
    OptimizerConfig,
    RayleighProblem,
    eig_error,
    gen_eig_data,
    run_rsv_lbfgs,
    run_rsvrg,
    run_vr_pca,
    top_eig_oracle,
)


def best(traces, thresholds):
    return min(traces, key=lambda tr: tuple(tr.passes_to(t) for t in thresholds))


def guarded(fn, *a, **kw):
    try:
        return fn(*a, **kw)
    except DivergenceError as exc:
        return exc.trace


def main():
    ap = argparse.ArgumentParser(description=__doc__, formatter_class=argparse.RawDescriptionHelpFormatter)
    ap.add_argument("--d", type=int, default=100)
    ap.add_argument("--N", type=int, default=10_000)
    ap.add_argument("--gap", type=float, default=0.05)
    ap.add_argument("--mb", type=int, default=100)
    ap.add_argument("--T", type=int, default=30)
    ap.add_argument("--M", type=int, default=10)
    ap.add_argument("--R", type=int, default=1)
    ap.add_argument("--curvature-eps", type=float, default=0.8)
    ap.add_argument("--seeds", type=int, nargs="+", default=[0, 1, 2, 3, 4])
    ap.add_argument("--eta1", type=float, nargs="+", default=[0.05, 0.1, 0.2])
    ap.add_argument("--eta2", type=float, nargs="+", default=[0.2, 0.5, 1.0])
    ap.add_argument("--rsvrg-eta1", type=float, nargs="+", default=[0.05, 0.1, 0.2, 0.3])
    ap.add_argument("--vrpca-eta1", type=float, nargs="+", default=[0.1, 0.2, 0.3, 0.5, 1.0])
    args = ap.parse_args()
    thresholds = (1e-10, 1e-12)
    warnings.simplefilter("ignore")  # diverging grid points pass near the cut locus

    for seed in args.seeds:
        t0 = time.perf_counter()
        data = gen_eig_data(args.d, args.N, args.gap, seed=seed)
        e, _ = top_eig_oracle(data)
        P = RayleighProblem(data)
        err = lambda z: eig_error(z, data, e)  # noqa: E731
        x0 = P.initial_point(np.random.default_rng(seed))
        base = OptimizerConfig(M=args.M, R=args.R, option=2, mb=args.mb, T=args.T, seed=seed, tol=1e-12)
        lb = [guarded(run_rsv_lbfgs, P, base.with_(eta1=a, eta2=b, curvature_eps=args.curvature_eps), x0=x0,
                      error_fn=err) for a, b in itertools.product(args.eta1, args.eta2)]
        sv = [guarded(run_rsvrg, P, base.with_(eta1=a), x0=x0, error_fn=err) for a in args.rsvrg_eta1]
        pc = [guarded(run_vr_pca, data, base.with_(eta1=a), x0=x0, error_fn=err) for a in args.vrpca_eta1]
        for name, trs in (("rsv-lbfgs", lb), ("rsvrg", sv), ("vr-pca", pc)):
            tr = best(trs, thresholds)
            reached = "  ".join(f"{t:.0e}@{tr.passes_to(t):g}" for t in thresholds)
            print(f"seed {seed}  {name:10s} eta1={tr.config.eta1:<5g} eta2={tr.config.eta2:<5g} {reached}")
        print(f"seed {seed}  ({time.perf_counter() - t0:.1f}s)")


if __name__ == "__main__":
    main()
