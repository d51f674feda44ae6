import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from complexkg.data import (DatasetSplit, TSVParseError, Vocabulary, closed_world_triples, generate_synthetic,
                            kfold_split, load_tsv, read_folds, sign_matrix_triples,
                            swapped_identity, write_folds, write_tsv)


def test_load_single_line(tmp_path):
    path = tmp_path / "t.tsv"
    path.write_text("a\tlikes\tb\n")
    triples, vocab = load_tsv(path)
    assert triples.tolist() == [[0, 0, 1, 1]]
    assert vocab.n_entities == 2 and vocab.n_relations == 1


def test_load_reuses_ids(tmp_path):
    path = tmp_path / "t.tsv"
    path.write_text("a\tr\tb\nb\tr\tc\nc\ts\ta\n")
    triples, vocab = load_tsv(path)
    assert vocab.n_entities == 3
    assert vocab.id_to_entity == ["a", "b", "c"]
    assert vocab.id_to_relation == ["r", "s"]
    assert triples[:, :3].tolist() == [[0, 0, 1], [0, 1, 2], [1, 2, 0]]


def test_load_labels(tmp_path):
    path = tmp_path / "t.tsv"
    path.write_text("a\tr\tb\t1\nb\tr\ta\t-1\n")
    triples, _ = load_tsv(path, has_labels=True)
    assert triples[:, 3].tolist() == [1, -1]


def test_malformed_line_reports_line_number(tmp_path):
    path = tmp_path / "t.tsv"
    path.write_text("a\tr\tb\nbroken line\n")
    with pytest.raises(TSVParseError) as err:
        load_tsv(path)
    assert err.value.lineno == 2


def test_bad_label(tmp_path):
    path = tmp_path / "t.tsv"
    path.write_text("a\tr\tb\t0\n")
    with pytest.raises(ValueError, match="label"):
        load_tsv(path, has_labels=True)


def test_conflicting_duplicate_rejected(tmp_path):
    path = tmp_path / "t.tsv"
    path.write_text("a\tr\tb\t1\na\tr\tb\t-1\n")
    with pytest.raises(ValueError, match="conflicting"):
        load_tsv(path, has_labels=True)


def test_frozen_vocabulary(tmp_path):
    path = tmp_path / "t.tsv"
    path.write_text("a\tr\tzzz\n")
    vocab = Vocabulary.from_sizes(2, 1)
    with pytest.raises(KeyError):
        load_tsv(path, vocab=vocab, frozen=True)


@given(st.lists(st.text(alphabet="abcdefgh", min_size=1, max_size=4), min_size=1, max_size=30))
def test_vocabulary_round_trip(names):
    vocab = Vocabulary()
    for name in names:
        vocab.add_entity(name)
    assert sorted(vocab.entity_to_id.values()) == list(range(vocab.n_entities))
    for name in names:
        assert vocab.id_to_entity[vocab.entity_to_id[name]] == name
    assert Vocabulary.from_dict(vocab.to_dict()) == vocab


def test_write_read_round_trip(tmp_path):
    vocab = Vocabulary.from_sizes(4, 2)
    triples = np.array([[0, 1, 2, 1], [1, 3, 0, -1]])
    write_tsv(tmp_path / "x.tsv", triples, vocab)
    back, _ = load_tsv(tmp_path / "x.tsv", has_labels=True, vocab=vocab, frozen=True)
    np.testing.assert_array_equal(back, triples)
    write_folds(tmp_path / "x.folds", [0, 3, -1])
    assert read_folds(tmp_path / "x.folds").tolist() == [0, 3, -1]


def test_synthetic_counts():
    splits = generate_synthetic(30, seed=7).splits()
    assert len(splits) == 5
    for split in splits:
        assert (len(split.train), len(split.valid), len(split.test)) == (1392, 174, 174)


@pytest.mark.parametrize("seed", [0, 1, 2])
def test_synthetic_symmetry(seed):
    tensor = generate_synthetic(12, seed)
    sym, anti = tensor.signs
    off = ~np.eye(12, dtype=bool)
    np.testing.assert_array_equal(sym[off], sym.T[off])
    np.testing.assert_array_equal(anti[off], -anti.T[off])
    assert np.all(np.diag(sym) == 0) and np.all(np.diag(anti) == 0)
    assert np.all(tensor.folds[:, np.arange(12), np.arange(12)] == tensor.UNOBSERVED)
    iu = np.triu_indices(12, 1)
    assert np.all(tensor.folds[:, iu[0], iu[1]] == tensor.ALWAYS_TRAIN)


def test_synthetic_deterministic():
    a, b = generate_synthetic(20, 3), generate_synthetic(20, 3)
    np.testing.assert_array_equal(a.signs, b.signs)
    np.testing.assert_array_equal(a.folds, b.folds)
    assert not np.array_equal(a.signs, generate_synthetic(20, 4).signs)


def test_synthetic_rejects_tiny():
    with pytest.raises(ValueError):
        generate_synthetic(1, 0)


def test_kfold_arithmetic():
    triples = np.column_stack([np.zeros(10), np.arange(10), np.arange(10), np.ones(10)]).astype(int)
    splits, folds = kfold_split(triples, 5, seed=0, vocab=Vocabulary.from_sizes(10, 1))
    assert np.bincount(folds).tolist() == [2] * 5
    for split in splits:
        assert (len(split.train), len(split.valid), len(split.test)) == (6, 2, 2)


def test_kfold_errors():
    with pytest.raises(ValueError):
        kfold_split(np.array([[0, 0, 1, 1]] * 2), 3, 0)
    with pytest.raises(ValueError):
        kfold_split(np.array([[0, 0, 1, 1]] * 10), 2, 0)


@settings(max_examples=30, deadline=None)
@given(count=st.integers(3, 60), k=st.integers(3, 8), seed=st.integers(0, 2**16))
def test_kfold_partition(count, k, seed):
    if count < k:
        return
    rng = np.random.default_rng(seed)
    triples = np.column_stack([rng.integers(0, 3, count), np.arange(count), rng.integers(0, count, count),
                               rng.choice([-1, 1], count)])
    vocab = Vocabulary.from_sizes(count, 3)
    splits, _ = kfold_split(triples, k, seed, vocab)
    tests = np.concatenate([s.test for s in splits])
    assert sorted(map(tuple, tests.tolist())) == sorted(map(tuple, triples.tolist()))
    for split in splits:
        assert len(split.train) + len(split.valid) + len(split.test) == count
        positives = {tuple(t[:3]) for t in triples.tolist() if t[3] == 1}
        assert split.all_known_positives >= positives


def test_kinships_size_arithmetic():
    assert 26 * 104 * 104 == 281_216


def test_split_bounds_checked():
    with pytest.raises(IndexError):
        DatasetSplit(np.array([[0, 0, 5, 1]]), [], [], Vocabulary.from_sizes(3, 1))


def test_swapped_identity():
    y = swapped_identity(6)
    assert (y == 1).sum() == 6
    assert y[0, 1] == y[1, 0] == y[4, 5] == 1
    assert y[0, 0] == -1
    assert len(sign_matrix_triples(y)) == 36


def test_closed_world_tensor():
    triples = closed_world_triples([(1, 0, 2, 1)], 3, 2)
    assert len(triples) == 2 * 3 * 3
    assert (triples[:, 3] == 1).sum() == 1
    assert triples[(triples[:, 3] == 1)].tolist() == [[1, 0, 2, 1]]
