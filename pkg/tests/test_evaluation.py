import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from complexkg.evaluation import (FilterIndex, average_precision, rank_from_scores, rank_triple,
                                  ranking_metrics, render_table, render_tsv,
                                  triple_average_precision)
from complexkg.params import ModelKind, init_params
from oracles import brute_force_ap, brute_force_rank


def test_rank_three_candidates():
    assert rank_from_scores(np.array([0.5, 0.9, 0.1]), 0) == 2


def test_rank_single_tie():
    assert rank_from_scores(np.array([0.3, 0.3, 0.1]), 0) == 1.5


def test_filter_removes_competitor_but_not_target():
    scores = np.array([0.5, 0.9, 0.1])
    assert rank_from_scores(scores, 0, exclude=[1]) == 1
    assert rank_from_scores(scores, 0, exclude=[0]) == 2


def test_mrr_of_ranks_two_and_four():
    # positive embeddings: both rankings follow ent_re
    params = init_params(ModelKind("distmult"), 5, 1, 1, seed=0)
    params.tensors["rel_re"][:] = 1.0
    params.tensors["ent_re"][:, 0] = [5.0, 4.0, 3.0, 2.0, 1.0]
    assert rank_triple(params, (0, 1, 3)) == (2.0, 4.0)
    report = ranking_metrics(params, [(0, 1, 3)])
    assert report.mrr_raw == 0.375
    assert report.per_relation == {0: 0.375}


def test_ap_worked_example():
    assert average_precision([0.9, 0.5, 0.1], [1, -1, 1]).average_precision == pytest.approx(5 / 6, abs=1e-12)
    assert average_precision([(0.9, 1), (0.5, -1), (0.1, 1)]).average_precision == pytest.approx(5 / 6)


def test_ap_ties_keep_input_order():
    assert average_precision([1.0, 1.0], [-1, 1]).average_precision == 0.5
    assert average_precision([1.0, 1.0], [1, -1]).average_precision == 1.0


def test_ap_without_positives():
    with pytest.raises(ValueError):
        average_precision([0.1, 0.2], [-1, -1])


def test_empty_test_set():
    params = init_params(ModelKind("complex"), 3, 1, 2, seed=0)
    with pytest.raises(ValueError):
        ranking_metrics(params, np.zeros((0, 4), dtype=int))


def test_bad_mode():
    params = init_params(ModelKind("complex"), 3, 1, 2, seed=0)
    with pytest.raises(ValueError):
        rank_triple(params, (0, 0, 1), mode="both")


def test_hits_use_filtered_ranks_and_count_fractional():
    params = init_params(ModelKind("distmult"), 4, 1, 1, seed=0)
    params.tensors["rel_re"][:] = 1.0
    params.tensors["ent_re"][:, 0] = [1.0, 1.0, 1.0, 0.0]
    report = ranking_metrics(params, [(0, 0, 1)])
    assert report.filtered_ranks.tolist() == [[2.0, 2.0]]
    assert report.hits_at[1] == 0.0 and report.hits_at[3] == 1.0


def test_report_rendering():
    params = init_params(ModelKind("complex"), 4, 2, 2, seed=0)
    report = ranking_metrics(params, [(0, 0, 1), (1, 2, 3)], [(0, 0, 1), (1, 2, 3)])
    text = render_tsv(report.rows(["a", "b"]))
    assert text.startswith("metric\tvalue\n")
    assert "mrr_filtered[b]" in text
    assert "hits@10" in render_table(report.rows())


@settings(max_examples=60, deadline=None)
@given(seed=st.integers(0, 2**32 - 1), n=st.integers(2, 12), kind=st.sampled_from(["complex", "distmult", "transe"]))
def test_ranks_match_brute_force(seed, n, kind):
    rng = np.random.default_rng(seed)
    params = init_params(ModelKind(kind), n, 2, 2, seed)
    test = np.column_stack([rng.integers(2, size=3), rng.integers(n, size=3), rng.integers(n, size=3)])
    known = {tuple(t) for t in test.tolist()}
    known |= {(int(rng.integers(2)), int(rng.integers(n)), int(rng.integers(n))) for _ in range(n)}
    report = ranking_metrics(params, test, FilterIndex(known))
    for i, (r, s, o) in enumerate(test.tolist()):
        assert report.raw_ranks[i, 0] == brute_force_rank(params, r, s, o, "subject")
        assert report.raw_ranks[i, 1] == brute_force_rank(params, r, s, o, "object")
        assert report.filtered_ranks[i, 0] == brute_force_rank(params, r, s, o, "subject", known)
        assert report.filtered_ranks[i, 1] == brute_force_rank(params, r, s, o, "object", known)
    assert np.all(report.filtered_ranks <= report.raw_ranks)
    assert report.mrr_filtered >= report.mrr_raw


@settings(max_examples=100, deadline=None)
@given(st.lists(st.tuples(st.integers(-5, 5), st.booleans()), min_size=1, max_size=20))
def test_ap_matches_brute_force(items):
    scores = [float(s) for s, _ in items]
    labels = [1 if y else -1 for _, y in items]
    if 1 not in labels:
        return
    assert average_precision(scores, labels).average_precision == pytest.approx(
        brute_force_ap(scores, labels), abs=1e-12)


@settings(max_examples=50, deadline=None)
@given(st.lists(st.floats(-1e3, 1e3, allow_nan=False), min_size=2, max_size=20, unique=True),
       st.integers(0, 2**32 - 1))
def test_ap_matches_sklearn_without_ties(scores, seed):
    metrics = pytest.importorskip("sklearn.metrics")
    labels = np.random.default_rng(seed).choice([-1, 1], len(scores))
    if not (labels == 1).any():
        labels[0] = 1
    ours = average_precision(scores, labels).average_precision
    assert ours == pytest.approx(metrics.average_precision_score(labels, scores), abs=1e-12)


@settings(max_examples=40, deadline=None)
@given(seed=st.integers(0, 2**32 - 1))
def test_monotone_transform_invariance(seed):
    rng = np.random.default_rng(seed)
    scores = rng.normal(size=15)
    labels = rng.choice([-1, 1], 15)
    labels[0] = 1
    base = average_precision(scores, labels).average_precision
    for transform in (np.exp, lambda x: 3 * x + 7, lambda x: 1 / (1 + np.exp(-x))):
        assert average_precision(transform(scores), labels).average_precision == base
        for t in range(15):
            assert rank_from_scores(transform(scores), t) == rank_from_scores(scores, t)


def test_triple_average_precision_uses_model_scores():
    params = init_params(ModelKind("distmult"), 3, 1, 1, seed=0)
    params.tensors["rel_re"][:] = 1.0
    params.tensors["ent_re"][:, 0] = [1.0, 2.0, -1.0]
    triples = np.array([[0, 1, 1, 1], [0, 0, 2, -1], [0, 0, 0, 1]])
    assert triple_average_precision(params, triples).average_precision == 1.0
