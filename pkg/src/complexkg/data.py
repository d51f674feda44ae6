"""Triple ingestion, vocabularies, fold splitting and the synthetic task.

Triple collections are stored as ``(N, 4)`` int64 arrays with columns
``(r, s, o, y)``; :class:`LabeledTriple` is the single-row view.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from pathlib import Path
from typing import NamedTuple

import numpy as np

R, S, O, Y = 0, 1, 2, 3


class TSVParseError(ValueError):
    """A malformed line in a triple file."""

    def __init__(self, path, lineno, message):
        super().__init__(f"{path}:{lineno}: {message}")
        self.path = path
        self.lineno = lineno


class LabeledTriple(NamedTuple):
    r: int
    s: int
    o: int
    y: int = 1


@dataclass
class Vocabulary:
    """Bijective name/id maps for entities and relations."""

    entity_to_id: dict = field(default_factory=dict)
    id_to_entity: list = field(default_factory=list)
    relation_to_id: dict = field(default_factory=dict)
    id_to_relation: list = field(default_factory=list)

    @property
    def n_entities(self) -> int:
        return len(self.id_to_entity)

    @property
    def n_relations(self) -> int:
        return len(self.id_to_relation)

    def add_entity(self, name: str) -> int:
        idx = self.entity_to_id.get(name)
        if idx is None:
            idx = len(self.id_to_entity)
            self.entity_to_id[name] = idx
            self.id_to_entity.append(name)
        return idx

    def add_relation(self, name: str) -> int:
        idx = self.relation_to_id.get(name)
        if idx is None:
            idx = len(self.id_to_relation)
            self.relation_to_id[name] = idx
            self.id_to_relation.append(name)
        return idx

    @classmethod
    def from_sizes(cls, n: int, m: int, entity_prefix="e", relation_prefix="r"):
        vocab = cls()
        for i in range(n):
            vocab.add_entity(f"{entity_prefix}{i}")
        for i in range(m):
            vocab.add_relation(f"{relation_prefix}{i}")
        return vocab

    def to_dict(self) -> dict:
        return {"entities": list(self.id_to_entity), "relations": list(self.id_to_relation)}

    @classmethod
    def from_dict(cls, d: dict) -> "Vocabulary":
        vocab = cls()
        for name in d["entities"]:
            vocab.add_entity(name)
        for name in d["relations"]:
            vocab.add_relation(name)
        if vocab.n_entities != len(d["entities"]) or vocab.n_relations != len(d["relations"]):
            raise ValueError("vocabulary contains duplicate names")
        return vocab


@dataclass
class DatasetSplit:
    train: np.ndarray
    valid: np.ndarray
    test: np.ndarray
    vocabulary: Vocabulary
    all_known_positives: set = field(default_factory=set)

    def __post_init__(self):
        n, m = self.vocabulary.n_entities, self.vocabulary.n_relations
        for name in ("train", "valid", "test"):
            arr = as_triple_array(getattr(self, name))
            check_bounds(arr, n, m)
            setattr(self, name, arr)
        if not self.all_known_positives:
            self.all_known_positives = positive_set(self.train, self.valid, self.test)


def as_triple_array(triples) -> np.ndarray:
    arr = np.asarray(triples, dtype=np.int64)
    if arr.size == 0:
        return np.zeros((0, 4), dtype=np.int64)
    if arr.ndim != 2 or arr.shape[1] not in (3, 4):
        raise ValueError(f"expected an (N, 3) or (N, 4) triple array, got shape {arr.shape}")
    if arr.shape[1] == 3:
        arr = np.column_stack([arr, np.ones(len(arr), dtype=np.int64)])
    return arr


def check_bounds(triples: np.ndarray, n: int, m: int) -> None:
    if len(triples) == 0:
        return
    if triples[:, R].min() < 0 or triples[:, R].max() >= m:
        raise IndexError("relation id out of range")
    if min(triples[:, S].min(), triples[:, O].min()) < 0 or max(
        triples[:, S].max(), triples[:, O].max()
    ) >= n:
        raise IndexError("entity id out of range")
    if not np.isin(triples[:, Y], (-1, 1)).all():
        raise ValueError("labels must be -1 or +1")


def positive_set(*triple_arrays) -> set:
    known = set()
    for arr in triple_arrays:
        arr = as_triple_array(arr)
        pos = arr[arr[:, Y] == 1]
        known.update(map(tuple, pos[:, :3].tolist()))
    return known


def load_tsv(path, has_labels: bool = False, vocab: Vocabulary | None = None,
             frozen: bool = False):
    """Read ``subject<TAB>relation<TAB>object[<TAB>label]`` lines.

    Ids are handed out in order of first appearance, extending ``vocab`` if
    one is given. With ``frozen=True`` unknown names raise ``KeyError``
    instead. Returns ``(triples, vocab)``.
    """
    vocab = Vocabulary() if vocab is None else vocab
    rows = []
    seen = {}
    with open(path, encoding="utf-8") as fh:
        for lineno, line in enumerate(fh, start=1):
            line = line.rstrip("\n").rstrip("\r")
            if not line.strip():
                continue
            parts = line.split("\t")
            expected = 4 if has_labels else 3
            if len(parts) != expected:
                raise TSVParseError(path, lineno, f"expected {expected} tab-separated fields, got {len(parts)}")
            subj, rel, obj = parts[:3]
            if not subj or not rel or not obj:
                raise TSVParseError(path, lineno, "empty field")
            y = 1
            if has_labels:
                try:
                    y = int(parts[3])
                except ValueError:
                    raise TSVParseError(path, lineno, f"label {parts[3]!r} is not an integer") from None
                if y not in (-1, 1):
                    raise ValueError(f"{path}:{lineno}: label {y} not in {{-1, 1}}")
            if frozen:
                try:
                    ids = (vocab.relation_to_id[rel], vocab.entity_to_id[subj], vocab.entity_to_id[obj])
                except KeyError as exc:
                    raise KeyError(f"{path}:{lineno}: unknown name {exc.args[0]!r}") from None
            else:
                s_id = vocab.add_entity(subj)
                r_id = vocab.add_relation(rel)
                o_id = vocab.add_entity(obj)
                ids = (r_id, s_id, o_id)
            prev = seen.get(ids)
            if prev is not None and prev != y:
                raise ValueError(f"{path}:{lineno}: triple {subj} {rel} {obj} has conflicting labels")
            seen[ids] = y
            rows.append((*ids, y))
    return as_triple_array(rows), vocab


def sniff_has_labels(path) -> bool:
    """True if the first non-empty line has a fourth column."""
    with open(path, encoding="utf-8") as fh:
        for line in fh:
            if line.strip():
                return len(line.rstrip("\n").split("\t")) == 4
    return False


def write_tsv(path, triples, vocab: Vocabulary, with_labels: bool = True) -> None:
    triples = as_triple_array(triples)
    with open(path, "w", encoding="utf-8") as fh:
        for r, s, o, y in triples.tolist():
            cells = [vocab.id_to_entity[s], vocab.id_to_relation[r], vocab.id_to_entity[o]]
            if with_labels:
                cells.append(str(y))
            fh.write("\t".join(cells) + "\n")


def write_folds(path, folds) -> None:
    Path(path).write_text("".join(f"{int(f)}\n" for f in folds))


def read_folds(path) -> np.ndarray:
    return np.array([int(x) for x in Path(path).read_text().split()], dtype=np.int64)


def _round_robin_folds(count: int, k: int, rng: np.random.Generator) -> np.ndarray:
    order = rng.permutation(count)
    folds = np.empty(count, dtype=np.int64)
    folds[order] = np.arange(count) % k
    return folds


def splits_from_folds(triples, folds, k: int, vocab: Vocabulary, always_train=None):
    """Split ``i`` tests on fold ``i`` and validates on fold ``i + 1 mod k``."""
    triples = as_triple_array(triples)
    always_train = as_triple_array(always_train if always_train is not None else [])
    known = positive_set(triples, always_train)
    splits = []
    for i in range(k):
        test_mask = folds == i
        valid_mask = folds == (i + 1) % k
        train_mask = ~(test_mask | valid_mask)
        splits.append(DatasetSplit(
            train=np.concatenate([always_train, triples[train_mask]]),
            valid=triples[valid_mask],
            test=triples[test_mask],
            vocabulary=vocab,
            all_known_positives=set(known),
        ))
    return splits


def kfold_split(triples, k: int, seed: int, vocab: Vocabulary | None = None):
    """Partition ``triples`` into ``k`` folds after a seeded shuffle.

    Returns ``(splits, folds)`` where ``folds[i]`` is the fold of triple ``i``.
    """
    triples = as_triple_array(triples)
    if k < 3:
        raise ValueError("k-fold splitting needs k >= 3 (test, validation and training folds)")
    if len(triples) < k:
        raise ValueError(f"cannot split {len(triples)} triples into {k} folds")
    if vocab is None:
        vocab = Vocabulary.from_sizes(int(triples[:, [S, O]].max()) + 1, int(triples[:, R].max()) + 1)
    folds = _round_robin_folds(len(triples), k, np.random.default_rng(seed))
    return splits_from_folds(triples, folds, k, vocab), folds


@dataclass
class SyntheticTensor:
    """Fully observed 2 x n x n sign tensor with fold labels.

    ``folds`` holds -1 for upper-triangular cells (always in training),
    -2 for the unobserved diagonal and 0..k-1 for lower-triangular cells.
    """

    signs: np.ndarray
    folds: np.ndarray
    n_folds: int = 5

    ALWAYS_TRAIN = -1
    UNOBSERVED = -2

    @property
    def n_entities(self) -> int:
        return self.signs.shape[1]

    def vocabulary(self) -> Vocabulary:
        vocab = Vocabulary()
        for i in range(self.n_entities):
            vocab.add_entity(f"e{i}")
        vocab.add_relation("symmetric")
        vocab.add_relation("antisymmetric")
        return vocab

    def triples(self):
        """All observed cells as ``(triples, folds)`` in (r, s, o) order."""
        r, s, o = np.nonzero(self.folds != self.UNOBSERVED)
        triples = np.column_stack([r, s, o, self.signs[r, s, o]]).astype(np.int64)
        return triples, self.folds[r, s, o]

    def splits(self):
        triples, folds = self.triples()
        upper = folds == self.ALWAYS_TRAIN
        return splits_from_folds(triples[~upper], folds[~upper], self.n_folds,
                                 self.vocabulary(), always_train=triples[upper])


def generate_synthetic(n_entities: int, seed: int, n_folds: int = 5) -> SyntheticTensor:
    """One symmetric and one antisymmetric random sign relation.

    Upper-triangular cells are fair coin flips mirrored (slice 0) or
    mirrored with a sign flip (slice 1).
    """
    if n_entities < 2:
        raise ValueError("need at least two entities")
    rng = np.random.default_rng(seed)
    n = n_entities
    iu = np.triu_indices(n, k=1)
    signs = np.zeros((2, n, n), dtype=np.int64)
    for rel, mirror in ((0, 1), (1, -1)):
        upper = rng.choice(np.array([-1, 1]), size=len(iu[0]))
        signs[rel][iu] = upper
        signs[rel][iu[1], iu[0]] = mirror * upper

    folds = np.full((2, n, n), SyntheticTensor.ALWAYS_TRAIN, dtype=np.int64)
    diag = np.arange(n)
    folds[:, diag, diag] = SyntheticTensor.UNOBSERVED
    il = np.tril_indices(n, k=-1)
    lower_cells = [(rel, i, j) for rel in (0, 1) for i, j in zip(*il)]
    assignment = _round_robin_folds(len(lower_cells), n_folds, rng)
    rel_idx, i_idx, j_idx = np.array(lower_cells).T
    folds[rel_idx, i_idx, j_idx] = assignment
    return SyntheticTensor(signs=signs, folds=folds, n_folds=n_folds)


def swapped_identity(n: int) -> np.ndarray:
    """Sign matrix of the identity with columns 2j and 2j+1 swapped."""
    if n % 2:
        raise ValueError("n must be even")
    y = -np.ones((n, n), dtype=np.int64)
    idx = np.arange(n)
    y[idx, idx ^ 1] = 1
    return y


def sign_matrix_triples(signs: np.ndarray, relation: int = 0) -> np.ndarray:
    """Every cell of a fully observed sign matrix as labeled triples."""
    s, o = np.indices(signs.shape)
    s, o = s.ravel(), o.ravel()
    return np.column_stack([np.full(len(s), relation), s, o, signs[s, o]]).astype(np.int64)


def closed_world_triples(positives, n_entities: int, n_relations: int) -> np.ndarray:
    """Every (r, s, o) cell labeled +1 if listed in ``positives``, else -1."""
    positives = as_triple_array(positives)
    check_bounds(positives, n_entities, n_relations)
    labels = -np.ones((n_relations, n_entities, n_entities), dtype=np.int64)
    labels[positives[:, R], positives[:, S], positives[:, O]] = 1
    r, s, o = np.indices(labels.shape)
    return np.column_stack([r.ravel(), s.ravel(), o.ravel(), labels.ravel()])
