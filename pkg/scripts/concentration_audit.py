"""Compare empirical tail frequencies of the gradient and covariance
estimates with their concentration bounds on a grid of epsilon.

    python3 scripts/concentration_audit.py --trials 10000 --n 1000
"""

import argparse

from sdenet import conditions as cond
from sdenet import dynamics as dyn
from sdenet.errors import SdenetError
from sdenet.rng import derive_seed


def main():
    ap = argparse.ArgumentParser()
    ap.add_argument("--p", type=int, default=3)
    ap.add_argument("--k", type=float, default=1.0)
    ap.add_argument("--eta", type=float, default=0.1)
    ap.add_argument("--n", type=int, default=1000)
    ap.add_argument("--trials", type=int, default=10_000)
    ap.add_argument("--seed", type=int, default=0)
    args = ap.parse_args()
    model = dyn.make_random_binary_model(args.p, args.k, args.seed)
    S = list(model.supports[0])
    mom = cond.batch_moments(model, args.eta, args.n, args.trials, seed=derive_seed(args.seed, 1), row=0)
    print("statistic,epsilon,rate,wilson_lo,wilson_hi,bound,violation")
    for eps in (0.05, 0.1, 0.2, 0.3, 0.45):
        r = cond.empirical_tail_gradient(model, args.eta, args.n, S, eps, args.trials, moments=mom)
        print(f"gradient,{eps},{r.rate:.5f},{r.lo:.5f},{r.hi:.5f},{r.bound:.5g},{r.violation}")
    for eps in (0.1, 0.3, 0.6, 1.0):
        try:
            r = cond.empirical_tail_covariance(model, args.eta, args.n, 0, 0, eps, args.trials, moments=mom)
        except SdenetError as exc:
            print(f"covariance,{eps},,,,,{exc}")
            continue
        print(f"covariance,{eps},{r.rate:.5f},{r.lo:.5f},{r.hi:.5f},{r.bound:.5g},{r.violation}")


if __name__ == "__main__":
    main()
