"""Fit the n x n swapped-identity sign matrix with ComplEx at small rank.

Reports, per rank, whether every sign is reproduced and how many random
restarts that took.
"""

import argparse

from complexkg.data import swapped_identity
from complexkg.experiments import fit_sign_matrix


def main():
    parser = argparse.ArgumentParser(description=__doc__)
    parser.add_argument("--n", type=int, default=30)
    parser.add_argument("--ranks", nargs="+", type=int, default=[1, 2, 3, 4, 5, 6])
    parser.add_argument("--model", default="complex")
    parser.add_argument("--restarts", type=int, default=10)
    parser.add_argument("--epochs", type=int, default=500)
    parser.add_argument("--seed", type=int, default=0)
    args = parser.parse_args()

    signs = swapped_identity(args.n)
    print("model\trank\tsuccess\trestarts\taccuracy\tepochs")
    for rank in args.ranks:
        res = fit_sign_matrix(signs, rank, args.model, args.restarts, args.epochs, seed=args.seed)
        print(f"{args.model}\t{rank}\t{res.success}\t{res.restarts}\t{res.accuracy:.4f}\t{res.epochs}", flush=True)


if __name__ == "__main__":
    main()
