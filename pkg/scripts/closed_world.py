"""10-fold cross-validated AP on a fully observed data set (Kinships, UMLS).

``--data`` holds ``train.txt``/``valid.txt``/``test.txt`` or a single
``triples.txt`` of positive facts; every unlisted triple counts as negative.
"""

import argparse
from pathlib import Path

import numpy as np

from complexkg.data import Vocabulary, closed_world_triples, load_tsv
from complexkg.experiments import L2_GRID, closed_world_experiment
from complexkg.training import TrainConfig


def main():
    parser = argparse.ArgumentParser(description=__doc__)
    parser.add_argument("--data", required=True, type=Path)
    parser.add_argument("--models", nargs="+", default=["complex", "distmult", "cp", "rescal", "transe"])
    parser.add_argument("--ranks", nargs="+", type=int, default=[10, 20, 50])
    parser.add_argument("--folds", type=int, default=10)
    parser.add_argument("--l2", nargs="+", type=float, default=list(L2_GRID))
    parser.add_argument("--max-iter", type=int, default=1000)
    parser.add_argument("--seed", type=int, default=0)
    args = parser.parse_args()

    files = sorted(p for p in args.data.glob("*.txt"))
    if not files:
        parser.error(f"no .txt files in {args.data}")
    vocab = Vocabulary()
    positives = np.concatenate([load_tsv(f, vocab=vocab)[0] for f in files])
    triples = closed_world_triples(positives, vocab.n_entities, vocab.n_relations)
    print(f"{vocab.n_entities} entities, {vocab.n_relations} relations, "
          f"{len(triples)} labeled triples ({int((triples[:, 3] == 1).sum())} positive)")
    config = TrainConfig(max_iter=args.max_iter, seed=args.seed)
    print("model\trank\tl2\tAP")
    for model in args.models:
        for rank in args.ranks:
            res = closed_world_experiment(triples, vocab, model, rank, args.folds, args.seed, args.l2, config)
            print(f"{model}\t{rank}\t{res.best_l2}\t{res.best['test']:.4f}", flush=True)


if __name__ == "__main__":
    main()
