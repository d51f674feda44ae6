"""Link-prediction ranking metrics and average precision."""

from __future__ import annotations

from collections import defaultdict
from dataclasses import dataclass, field

import numpy as np

from .data import O, R, S, Y, as_triple_array
from .models import batch_score, score_objects, score_subjects
from .params import ParameterSet

HITS_AT = (1, 3, 10)


@dataclass
class RankingReport:
    mrr_raw: float
    mrr_filtered: float
    hits_at: dict
    per_relation: dict
    triple_count: int
    raw_ranks: np.ndarray = field(repr=False, default=None)
    filtered_ranks: np.ndarray = field(repr=False, default=None)

    def rows(self, relation_names=None):
        rows = [("mrr_filtered", self.mrr_filtered), ("mrr_raw", self.mrr_raw)]
        rows += [(f"hits@{n}", v) for n, v in sorted(self.hits_at.items())]
        rows.append(("triples", self.triple_count))
        for rel, value in sorted(self.per_relation.items()):
            name = relation_names[rel] if relation_names is not None else str(rel)
            rows.append((f"mrr_filtered[{name}]", value))
        return rows


@dataclass
class APReport:
    average_precision: float
    positives_count: int
    total_count: int

    def rows(self, relation_names=None):
        return [("average_precision", self.average_precision),
                ("positives", self.positives_count), ("triples", self.total_count)]


class FilterIndex:
    """Known positives indexed by (r, s) -> objects and (r, o) -> subjects."""

    def __init__(self, known_positives=()):
        objects, subjects = defaultdict(list), defaultdict(list)
        for r, s, o in known_positives:
            objects[(r, s)].append(o)
            subjects[(r, o)].append(s)
        self.objects = {k: np.array(v, dtype=np.int64) for k, v in objects.items()}
        self.subjects = {k: np.array(v, dtype=np.int64) for k, v in subjects.items()}

    _EMPTY = np.zeros(0, dtype=np.int64)

    def known_objects(self, r, s):
        return self.objects.get((r, s), self._EMPTY)

    def known_subjects(self, r, o):
        return self.subjects.get((r, o), self._EMPTY)


def _as_filter(known_positives):
    if known_positives is None:
        return FilterIndex()
    if isinstance(known_positives, FilterIndex):
        return known_positives
    return FilterIndex(known_positives)


def rank_from_scores(scores: np.ndarray, target: int, exclude=()) -> float:
    """1 + #strictly better + #ties / 2, ignoring ``target`` and ``exclude``."""
    keep = np.ones(len(scores), dtype=bool)
    keep[np.asarray(exclude, dtype=np.int64)] = False
    keep[target] = False
    competitors = scores[keep]
    true_score = scores[target]
    greater = np.count_nonzero(competitors > true_score)
    ties = np.count_nonzero(competitors == true_score)
    return 1.0 + greater + ties / 2.0


def rank_triple(params: ParameterSet, test, mode: str = "raw", known_positives=None):
    """Ranks of the true subject and true object among all substitutions."""
    if mode not in ("raw", "filtered"):
        raise ValueError("mode must be 'raw' or 'filtered'")
    r, s, o = int(test[0]), int(test[1]), int(test[2])
    index = _as_filter(known_positives if mode == "filtered" else None)
    subject_rank = rank_from_scores(score_subjects(params, r, o), s, index.known_subjects(r, o))
    object_rank = rank_from_scores(score_objects(params, r, s), o, index.known_objects(r, s))
    return subject_rank, object_rank


def ranking_metrics(params: ParameterSet, test_set, known_positives=None) -> RankingReport:
    """Raw and filtered MRR, filtered Hits@{1,3,10}, filtered MRR per relation.

    Every test triple contributes two ranks, one for subject substitution and
    one for object substitution.
    """
    test_set = as_triple_array(test_set)
    if len(test_set) == 0:
        raise ValueError("empty test set")
    index = _as_filter(known_positives)
    raw = np.empty((len(test_set), 2))
    filt = np.empty((len(test_set), 2))
    for i, (r, s, o) in enumerate(test_set[:, :3].tolist()):
        subj_scores = score_subjects(params, r, o)
        obj_scores = score_objects(params, r, s)
        raw[i] = rank_from_scores(subj_scores, s), rank_from_scores(obj_scores, o)
        filt[i] = (rank_from_scores(subj_scores, s, index.known_subjects(r, o)),
                   rank_from_scores(obj_scores, o, index.known_objects(r, s)))
    per_relation = {}
    for rel in np.unique(test_set[:, R]).tolist():
        per_relation[rel] = float(np.mean(1.0 / filt[test_set[:, R] == rel]))
    return RankingReport(
        mrr_raw=float(np.mean(1.0 / raw)),
        mrr_filtered=float(np.mean(1.0 / filt)),
        hits_at={n: float(np.mean(filt <= n)) for n in HITS_AT},
        per_relation=per_relation,
        triple_count=len(test_set),
        raw_ranks=raw,
        filtered_ranks=filt,
    )


def average_precision(scores, labels=None) -> APReport:
    """Mean over positives of the precision at each positive's position.

    Accepts either a sequence of ``(score, label)`` pairs or two parallel
    arrays. Items are sorted by descending score; ties keep input order.
    """
    if labels is None:
        pairs = np.asarray(scores, dtype=np.float64).reshape(-1, 2)
        scores, labels = pairs[:, 0], pairs[:, 1]
    scores = np.asarray(scores, dtype=np.float64)
    positive = np.asarray(labels) > 0
    n_pos = int(positive.sum())
    if n_pos == 0:
        raise ValueError("average precision is undefined without positive labels")
    order = np.argsort(-scores, kind="stable")
    hits = positive[order]
    precision_at = np.cumsum(hits) / np.arange(1, len(hits) + 1)
    return APReport(
        average_precision=float(precision_at[hits].mean()),
        positives_count=n_pos,
        total_count=len(scores),
    )


def triple_average_precision(params: ParameterSet, triples) -> APReport:
    triples = as_triple_array(triples)
    scores = batch_score(params, triples[:, R], triples[:, S], triples[:, O])
    return average_precision(scores, triples[:, Y])


def render_tsv(rows) -> str:
    return "metric\tvalue\n" + "".join(f"{k}\t{_fmt(v)}\n" for k, v in rows)


def render_table(rows) -> str:
    width = max(len(k) for k, _ in rows)
    return "\n".join(f"{k:<{width}}  {_fmt(v):>10}" for k, v in rows)


def _fmt(v):
    return f"{v:.6f}" if isinstance(v, float) else str(v)
