"""Filtered MRR and training time as a function of the negative ratio.

Expects ``train.txt``, ``valid.txt`` and ``test.txt`` (tab-separated
``subject relation object``) in ``--data``, e.g. a WN18 or FB15K copy.
"""

import argparse
from pathlib import Path

from complexkg.data import DatasetSplit, Vocabulary, load_tsv
from complexkg.experiments import NEG_RATIOS, negative_ratio_study
from complexkg.training import TrainConfig


def main():
    parser = argparse.ArgumentParser(description=__doc__)
    parser.add_argument("--data", required=True, type=Path)
    parser.add_argument("--model", default="complex")
    parser.add_argument("--rank", type=int, default=150)
    parser.add_argument("--lr", type=float, default=0.5)
    parser.add_argument("--l2", type=float, default=0.03)
    parser.add_argument("--etas", nargs="+", type=int, default=list(NEG_RATIOS))
    parser.add_argument("--max-iter", type=int, default=1000)
    parser.add_argument("--seed", type=int, default=0)
    args = parser.parse_args()

    vocab = Vocabulary()
    parts = [load_tsv(args.data / f"{name}.txt", vocab=vocab)[0] for name in ("train", "valid", "test")]
    split = DatasetSplit(*parts, vocab)
    config = TrainConfig(alpha=args.lr, l2=args.l2, max_iter=args.max_iter, seed=args.seed)
    print("eta\tmrr_filtered\thits@1\tepochs\tseconds")
    for row in negative_ratio_study(split, args.model, args.rank, config, args.etas):
        print(f"{row['eta']}\t{row['mrr_filtered']:.4f}\t{row['hits@1']:.4f}\t{row['epochs']}\t{row['seconds']:.1f}",
              flush=True)


if __name__ == "__main__":
    main()
