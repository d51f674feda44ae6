"""Losses, negative sampling and mini-batch SGD with AdaGrad and early stopping."""

from __future__ import annotations

import logging
import math
from dataclasses import dataclass, field

import numpy as np
from scipy.special import expit

from .data import O, R, S, Y, DatasetSplit, LabeledTriple, as_triple_array
from .evaluation import FilterIndex, ranking_metrics, triple_average_precision
from .models import SparseGradient, batch_gradient, batch_score
from .params import ENTITY_MATRICES, ModelKind, ParameterSet, init_params, l2_norm_squared

log = logging.getLogger(__name__)

LOSSES = ("logistic", "max-margin")


class TrainingDivergedError(FloatingPointError):
    pass


@dataclass
class TrainConfig:
    alpha: float = 0.5
    l2: float = 0.0
    eta: int = 1
    batch_count: int = 100
    max_iter: int = 1000
    validate_every: int = 50
    seed: int = 0
    loss: str = "logistic"
    margin: float | None = None
    adagrad_eps: float = 1e-8

    def __post_init__(self):
        if self.alpha < 0:
            raise ValueError("learning rate must be non-negative")
        if self.l2 < 0:
            raise ValueError("l2 weight must be non-negative")
        if self.eta < 1 or self.batch_count < 1 or self.validate_every < 1 or self.max_iter < 0:
            raise ValueError("eta, batch_count and validate_every must be >= 1")
        if self.loss not in LOSSES:
            raise ValueError(f"loss must be one of {LOSSES}")
        if self.margin is not None and self.loss != "max-margin":
            raise ValueError("a margin only applies to the max-margin loss")


@dataclass
class TrainReport:
    epochs_run: int = 0
    history: list = field(default_factory=list)
    best_epoch: int | None = None
    best_score: float | None = None
    stop_reason: str = "max-iter"
    metric: str | None = None
    last_loss: float | None = None


def _touched_penalty(params: ParameterSet, grad: SparseGradient) -> float:
    return float(sum(np.sum(params[name][rows] ** 2) for name, (rows, _) in grad.items()))


def _add_l2(params: ParameterSet, grad: SparseGradient, l2: float) -> SparseGradient:
    if l2 == 0:
        return grad
    return SparseGradient({
        name: (rows, values + 2.0 * l2 * params[name][rows])
        for name, (rows, values) in grad.items()
    })


def logistic_loss(params: ParameterSet, triple, l2: float = 0.0) -> float:
    """``log(1 + exp(-y * score))`` plus ``l2`` times the squared norms of the touched rows."""
    r, s, o, y = _unpack(triple)
    phi = batch_score(params, r, s, o)[0]
    loss = float(np.logaddexp(0.0, -y * phi))
    if l2:
        loss += l2 * _touched_penalty(params, batch_gradient(params, r, s, o))
    return loss


def loss_gradient(params: ParameterSet, triple, l2: float = 0.0) -> SparseGradient:
    r, s, o, y = _unpack(triple)
    phi = batch_score(params, r, s, o)[0]
    coef = -y * expit(-y * phi)
    return _add_l2(params, batch_gradient(params, r, s, o, coef), l2)


def max_margin_loss(params: ParameterSet, pos, neg, gamma: float) -> float:
    phi_pos = batch_score(params, *_unpack(pos)[:3])[0]
    phi_neg = batch_score(params, *_unpack(neg)[:3])[0]
    return float(max(0.0, gamma + phi_neg - phi_pos))


def _unpack(triple):
    t = tuple(int(x) for x in triple)
    return t if len(t) == 4 else (*t, 1)


def corrupt(batch: np.ndarray, eta: int, n_entities: int, rng: np.random.Generator) -> np.ndarray:
    """``eta`` corrupted copies of each row, labelled -1.

    Each copy replaces the subject (probability 1/2) or the object with a
    uniformly drawn entity. Collisions with known positives are kept.
    """
    neg = np.repeat(as_triple_array(batch), eta, axis=0)
    count = len(neg)
    replacement = rng.integers(n_entities, size=count)
    corrupt_subject = rng.random(count) < 0.5
    neg[:, S] = np.where(corrupt_subject, replacement, neg[:, S])
    neg[:, O] = np.where(corrupt_subject, neg[:, O], replacement)
    neg[:, Y] = -1
    return neg


def sample_negatives(positive, eta: int, n_entities: int, rng: np.random.Generator):
    if n_entities < 1:
        raise ValueError("empty entity vocabulary")
    return [LabeledTriple(*row) for row in corrupt([_unpack(positive)], eta, n_entities, rng).tolist()]


def adagrad_step(params: ParameterSet, grad: SparseGradient, alpha: float, eps: float = 1e-8) -> None:
    """Per coordinate: ``acc += g**2``; ``v -= alpha * g / (sqrt(acc) + eps)``."""
    for name, (rows, g) in grad.coalesce().items():
        acc = params.accumulators[name]
        acc[rows] += g ** 2
        params.tensors[name][rows] -= alpha * g / (np.sqrt(acc[rows]) + eps)


def logistic_batch(params: ParameterSet, batch: np.ndarray, l2: float):
    """Summed regularized logistic loss over a batch and its gradient."""
    r, s, o, y = batch[:, R], batch[:, S], batch[:, O], batch[:, Y]
    phi = batch_score(params, r, s, o)
    grad = batch_gradient(params, r, s, o, -y * expit(-y * phi))
    loss = float(np.sum(np.logaddexp(0.0, -y * phi)))
    if l2:
        loss += l2 * _touched_penalty(params, grad)
    return loss, _add_l2(params, grad, l2)


def margin_batch(params: ParameterSet, pos: np.ndarray, neg: np.ndarray, gamma: float, l2: float):
    """Summed pairwise hinge loss ``max(0, gamma + score(neg) - score(pos))``."""
    phi_pos = batch_score(params, pos[:, R], pos[:, S], pos[:, O])
    phi_neg = batch_score(params, neg[:, R], neg[:, S], neg[:, O])
    active = (gamma + phi_neg - phi_pos > 0).astype(np.float64)
    grad = batch_gradient(params, pos[:, R], pos[:, S], pos[:, O], -active)
    for name, (rows, values) in batch_gradient(params, neg[:, R], neg[:, S], neg[:, O], active).items():
        grad.add(name, rows, values)
    loss = float(np.sum(np.maximum(0.0, gamma + phi_neg - phi_pos)))
    if l2:
        loss += l2 * _touched_penalty(params, grad)
    return loss, _add_l2(params, grad, l2)


def regularized_objective(params: ParameterSet, triples, l2: float) -> float:
    """Full-batch logistic negative log-likelihood plus ``l2 * ||params||^2``."""
    triples = as_triple_array(triples)
    phi = batch_score(params, triples[:, R], triples[:, S], triples[:, O])
    return float(np.sum(np.logaddexp(0.0, -triples[:, Y] * phi)) + l2 * l2_norm_squared(params))


def project_entities(params: ParameterSet, rows=None) -> None:
    """Rescale entity rows with norm above 1 onto the unit ball."""
    for name in ENTITY_MATRICES:
        if name not in params.tensors:
            continue
        mat = params.tensors[name]
        idx = np.arange(params.n) if rows is None else np.unique(rows)
        norms = np.linalg.norm(mat[idx], axis=1, keepdims=True)
        mat[idx] = mat[idx] / np.maximum(norms, 1.0)


def _pair_for_margin(batch, positives_pool, rng, generated, eta):
    pos = batch[batch[:, Y] == 1]
    neg = batch[batch[:, Y] == -1]
    if generated:
        return np.repeat(pos, eta, axis=0), neg
    if len(pos) == 0:
        pos = positives_pool[rng.integers(len(positives_pool), size=max(1, len(neg)))]
    if len(neg) == 0:
        return pos[:0], neg
    size = max(len(pos), len(neg))
    return np.resize(pos, (size, 4)), np.resize(neg, (size, 4))


def validation_score(params: ParameterSet, split: DatasetSplit, filter_index=None):
    """AP when the validation set has negatives, filtered MRR otherwise."""
    if (split.valid[:, Y] == -1).any():
        return "ap", triple_average_precision(params, split.valid).average_precision
    index = filter_index if filter_index is not None else FilterIndex(split.all_known_positives)
    return "mrr", ranking_metrics(params, split.valid, index).mrr_filtered


def train(split: DatasetSplit, model: ModelKind | str, K: int, config: TrainConfig,
          params: ParameterSet | None = None):
    """Train one model; returns ``(params, report)``.

    ``config.batch_count`` batches of ``ceil(|train| / batch_count)`` triples
    are drawn with replacement per epoch. Positive-only training data gets
    ``eta`` corrupted negatives per sampled positive. Every
    ``validate_every`` epochs the validation metric is computed; training
    stops at the first evaluation that does not improve on the previous one
    and the parameters of the best evaluation are returned.
    """
    if isinstance(model, str):
        model = ModelKind(model)
    train_set = split.train
    if len(train_set) == 0:
        raise ValueError("empty training set")
    n, m = split.vocabulary.n_entities, split.vocabulary.n_relations
    if params is None:
        params = init_params(model, n, m, K, config.seed)
    rng = np.random.default_rng((config.seed, 1))
    batch_size = math.ceil(len(train_set) / config.batch_count)
    generate = not (train_set[:, Y] == -1).any()
    positives_pool = train_set[train_set[:, Y] == 1]
    use_margin = config.loss == "max-margin"
    gamma = config.margin if config.margin is not None else (model.margin or 1.0)
    project = use_margin and model.name == "transe"
    validate = len(split.valid) > 0
    filter_index = FilterIndex(split.all_known_positives) if validate else None

    report = TrainReport()
    best = None
    previous = 0.0
    for epoch in range(1, config.max_iter + 1):
        epoch_loss = 0.0
        for _ in range(config.batch_count):
            batch = train_set[rng.integers(len(train_set), size=batch_size)]
            if generate:
                batch = np.concatenate([batch, corrupt(batch, config.eta, n, rng)])
            if use_margin:
                pos, neg = _pair_for_margin(batch, positives_pool, rng, generate, config.eta)
                loss, grad = margin_batch(params, pos, neg, gamma, config.l2)
            else:
                loss, grad = logistic_batch(params, batch, config.l2)
            if not math.isfinite(loss):
                raise TrainingDivergedError(
                    f"non-finite batch loss {loss} at epoch {epoch} ({model}, K={K}, "
                    f"alpha={config.alpha}, l2={config.l2})")
            epoch_loss += loss
            adagrad_step(params, grad, config.alpha, config.adagrad_eps)
            if project:
                project_entities(params, batch[:, [S, O]].ravel())
        report.epochs_run = epoch
        report.last_loss = epoch_loss
        if validate and epoch % config.validate_every == 0:
            report.metric, current = validation_score(params, split, filter_index)
            report.history.append((epoch, current))
            log.info("epoch %d: validation %s = %.6f (loss %.4f)", epoch, report.metric, current, epoch_loss)
            if current <= previous:
                report.stop_reason = "early-stop"
                break
            previous = current
            best = params.copy()
            report.best_epoch, report.best_score = epoch, current
    if best is None:
        return params, report
    return best, report
