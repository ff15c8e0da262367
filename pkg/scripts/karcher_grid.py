"""Step-size grid for the Karcher mean: rSV-LBFGS against rSVRG.

Prints, per seed, passes to reach each error threshold for the best
configuration of each algorithm.

    python3 scripts/karcher_grid.py --n 20 --count 50 --cond 100 --mb 10 --seeds 0 1 2
"""
import argparse
import itertools
import time

from rsvlbfgs import (
    KarcherProblem,
    OptimizerConfig,
    gen_spd_data,
    karcher_error,
    karcher_oracle,
    run_rsv_lbfgs,
    run_rsvrg,
)


def best(traces, thresholds):
    return min(traces, key=lambda tr: tuple(tr.passes_to(t) for t in thresholds))


def main():
    ap = argparse.ArgumentParser(description=__doc__, formatter_class=argparse.RawDescriptionHelpFormatter)
    ap.add_argument("--n", type=int, default=20)
    ap.add_argument("--count", type=int, default=50)
    ap.add_argument("--cond", type=float, default=100.0)
    ap.add_argument("--mb", type=int, default=10)
    ap.add_argument("--T", type=int, default=20)
    ap.add_argument("--M", type=int, default=2)
    ap.add_argument("--seeds", type=int, nargs="+", default=[0, 1, 2, 3, 4])
    ap.add_argument("--eta1", type=float, nargs="+", default=[0.1, 0.3, 0.5])
    ap.add_argument("--eta2", type=float, nargs="+", default=[0.5, 0.6, 0.7, 0.8])
    ap.add_argument("--rsvrg-eta1", type=float, nargs="+", default=[0.1, 0.2, 0.3, 0.4, 0.5, 0.6])
    args = ap.parse_args()
    thresholds = (1e-8, 1e-10)

    for seed in args.seeds:
        t0 = time.perf_counter()
        data = gen_spd_data(args.n, args.count, args.cond, seed=seed)
        W = karcher_oracle(data)
        P = KarcherProblem(data)
        err = lambda X: karcher_error(X, W)  # noqa: E731
        base = OptimizerConfig(R=1, M=args.M, option=1, mb=args.mb, T=args.T, seed=seed, tol=1e-12)
        lb = [run_rsv_lbfgs(P, base.with_(eta1=a, eta2=b), error_fn=err)
              for a, b in itertools.product(args.eta1, args.eta2)]
        sv = [run_rsvrg(P, base.with_(eta1=a), error_fn=err) for a in args.rsvrg_eta1]
        for name, tr in (("rsv-lbfgs", best(lb, thresholds)), ("rsvrg", best(sv, thresholds))):
            reached = "  ".join(f"{t:.0e}@{tr.passes_to(t):g}" for t in thresholds)
            print(f"seed {seed}  {name:10s} eta1={tr.config.eta1:<5g} eta2={tr.config.eta2:<5g} {reached}")
        print(f"seed {seed}  ({time.perf_counter() - t0:.1f}s)")


if __name__ == "__main__":
    main()
