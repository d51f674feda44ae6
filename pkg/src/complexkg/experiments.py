"""Experiment drivers shared by scripts/ and the acceptance tests."""

from __future__ import annotations

import time
from dataclasses import dataclass, field, replace

import numpy as np

from .data import O, R, S, Y, DatasetSplit, Vocabulary, generate_synthetic, kfold_split, sign_matrix_triples
from .evaluation import FilterIndex, ranking_metrics, triple_average_precision
from .models import batch_score
from .params import ModelKind
from .training import TrainConfig, train

L2_GRID = (0.1, 0.03, 0.01, 0.003, 0.001, 0.0003, 0.00001, 0.0)
RANK_GRID = (10, 20, 50, 100, 150, 200)
NEG_RATIOS = (1, 2, 5, 10, 20, 50, 100, 200)


def _ap(params, triples):
    if not (triples[:, Y] == 1).any():
        return float("nan")
    return triple_average_precision(params, triples).average_precision


@dataclass
class CVResult:
    """Per-l2 fold scores and the l2 chosen by mean validation AP."""

    model: str
    rank: int
    scores: dict = field(default_factory=dict)
    best_l2: float | None = None

    def mean(self, l2, key):
        return float(np.nanmean([fold[key] for fold in self.scores[l2]]))

    @property
    def best(self) -> dict:
        keys = self.scores[self.best_l2][0].keys()
        return {key: self.mean(self.best_l2, key) for key in keys}


def cross_validated_ap(splits, model, rank: int, l2_grid=L2_GRID, config: TrainConfig | None = None,
                       relation_groups: dict | None = None, progress=None) -> CVResult:
    """Train every (l2, fold) pair and pick l2 by mean validation AP.

    ``relation_groups`` maps a label to relation ids whose test AP is
    reported separately (e.g. the symmetric and antisymmetric slices).
    """
    config = config or TrainConfig()
    name = model if isinstance(model, str) else model.name
    result = CVResult(model=name, rank=rank)
    for l2 in l2_grid:
        result.scores[l2] = []
        for i, split in enumerate(splits):
            cfg = replace(config, l2=l2, seed=config.seed + i)
            params, report = train(split, model, rank, cfg)
            fold = {"valid": _ap(params, split.valid), "test": _ap(params, split.test)}
            for label, rels in (relation_groups or {}).items():
                fold[label] = _ap(params, split.test[np.isin(split.test[:, R], rels)])
            result.scores[l2].append(fold)
            if progress:
                progress(f"{name} K={rank} l2={l2} fold={i}: {fold} ({report.epochs_run} epochs)")
    result.best_l2 = max(l2_grid, key=lambda l2: result.mean(l2, "valid"))
    return result


def synthetic_experiment(model, rank: int = 20, n_entities: int = 30, seed: int = 0,
                         l2_grid=L2_GRID, config: TrainConfig | None = None, progress=None) -> CVResult:
    """5-fold CV on the joint symmetric / antisymmetric random tensor."""
    splits = generate_synthetic(n_entities, seed).splits()
    return cross_validated_ap(splits, model, rank, l2_grid, config,
                              relation_groups={"symmetric": [0], "antisymmetric": [1]},
                              progress=progress)


def closed_world_experiment(triples, vocab: Vocabulary, model, rank: int, k: int = 10, seed: int = 0,
                            l2_grid=L2_GRID, config: TrainConfig | None = None, progress=None) -> CVResult:
    """k-fold CV with AP on a fully observed (labelled) data set."""
    splits, _ = kfold_split(triples, k, seed, vocab)
    return cross_validated_ap(splits, model, rank, l2_grid, config, progress=progress)


def sign_accuracy(params, triples) -> float:
    phi = batch_score(params, triples[:, R], triples[:, S], triples[:, O])
    predicted = np.where(phi >= 0, 1, -1)
    return float(np.mean(predicted == triples[:, Y]))


@dataclass
class SignFitResult:
    success: bool
    restarts: int
    accuracy: float
    epochs: int
    params: object = None


def fit_sign_matrix(signs: np.ndarray, rank: int, model="complex", restarts: int = 10,
                    epochs: int = 500, check_every: int = 25, config: TrainConfig | None = None,
                    seed: int = 0) -> SignFitResult:
    """Fit a fully observed sign matrix until every sign is reproduced.

    Each restart draws a fresh initialization; training stops as soon as
    the training-set sign accuracy reaches 1.
    """
    triples = sign_matrix_triples(signs)
    n = signs.shape[0]
    split = DatasetSplit(triples, np.zeros((0, 4)), np.zeros((0, 4)), Vocabulary.from_sizes(n, 1))
    base = config or TrainConfig()
    best_acc, params = 0.0, None
    for restart in range(1, restarts + 1):
        params, done = None, 0
        while done < epochs:
            cfg = replace(base, seed=seed * 100_003 + restart * 1009 + done,
                          max_iter=min(check_every, epochs - done))
            params, _ = train(split, model, rank, cfg, params=params)
            done += cfg.max_iter
            acc = sign_accuracy(params, triples)
            best_acc = max(best_acc, acc)
            if acc == 1.0:
                return SignFitResult(True, restart, acc, done, params)
    return SignFitResult(False, restarts, best_acc, epochs, params)


def negative_ratio_study(split: DatasetSplit, model, rank: int, config: TrainConfig,
                         etas=NEG_RATIOS, progress=None):
    """Filtered test MRR and training time as the number of negatives grows."""
    index = FilterIndex(split.all_known_positives)
    rows = []
    for eta in etas:
        start = time.perf_counter()
        params, report = train(split, model, rank, replace(config, eta=eta))
        elapsed = time.perf_counter() - start
        metrics = ranking_metrics(params, split.test, index)
        rows.append({"eta": eta, "mrr_filtered": metrics.mrr_filtered,
                     "hits@1": metrics.hits_at[1], "epochs": report.epochs_run, "seconds": elapsed})
        if progress:
            progress(str(rows[-1]))
    return rows


def model_kind(name: str, p: int | None = None, margin: float | None = None) -> ModelKind:
    if name.lower() == "transe":
        return ModelKind("transe", p=p, margin=margin)
    return ModelKind(name)
