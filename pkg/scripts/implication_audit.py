"""Count instances where the four sufficient conditions hold but the lasso
misses the signed support, over random 3-node stabilized models.

    python3 scripts/implication_audit.py --target 10000
"""

import argparse

from sdenet import conditions as cond
from sdenet import dynamics as dyn
from sdenet.rng import derive_seed


def main():
    ap = argparse.ArgumentParser()
    ap.add_argument("--eta", type=float, default=0.4)
    ap.add_argument("--n", type=int, default=20_000)
    ap.add_argument("--p", type=int, default=3)
    ap.add_argument("--k", type=float, default=1.0)
    ap.add_argument("--target", type=int, default=10_000, help="qualifying instances to collect")
    ap.add_argument("--batch", type=int, default=400, help="trajectories per model")
    ap.add_argument("--seed", type=int, default=808)
    args = ap.parse_args()
    total = cond.ImplicationAudit()
    s = 0
    while total.qualifying < args.target:
        model = dyn.make_random_binary_model(args.p, args.k, derive_seed(args.seed, s))
        s += 1
        if not model.contractive(args.eta):
            continue
        total.merge(cond.prop3_audit(model, args.eta, args.n, args.batch, seed=derive_seed(args.seed + 1, s)))
        print(f"model {s}: {total.qualifying} qualifying of {total.examined}")
    print(f"counterexamples: {total.counterexamples or 'none'}")


if __name__ == "__main__":
    main()
