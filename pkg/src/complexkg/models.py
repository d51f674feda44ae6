"""Scores and analytic gradients for ComplEx, DistMult, CP, TransE and RESCAL.

All functions are vectorized over arrays of ``(r, s, o)`` ids; the scalar
:func:`score` and :func:`gradient` wrap them for a single triple.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .params import ParameterSet


@dataclass
class SparseGradient:
    """Row-sparse partial derivatives.

    ``entries[name] = (rows, values)`` where ``values[i]`` is the partial with
    respect to row ``rows[i]`` of matrix ``name``. Rows may repeat (e.g. when
    subject and object coincide); repeated contributions add up.
    """

    entries: dict = field(default_factory=dict)

    def add(self, name: str, rows, values) -> None:
        rows = np.atleast_1d(np.asarray(rows, dtype=np.int64))
        values = np.asarray(values, dtype=np.float64)
        if name in self.entries:
            old_rows, old_values = self.entries[name]
            rows = np.concatenate([old_rows, rows])
            values = np.concatenate([old_values, values])
        self.entries[name] = (rows, values)

    def items(self):
        return self.entries.items()

    def scaled(self, coef) -> "SparseGradient":
        """Multiply every contribution by a scalar."""
        return SparseGradient({name: (rows, coef * values) for name, (rows, values) in self.items()})

    def to_dense(self, params: ParameterSet) -> dict:
        dense = {}
        for name, (rows, values) in self.items():
            arr = np.zeros(params.shape_of(name))
            np.add.at(arr, rows, values)
            dense[name] = arr
        return dense

    def coalesce(self) -> "SparseGradient":
        """Merge repeated rows into one summed contribution each."""
        out = SparseGradient()
        for name, (rows, values) in self.items():
            uniq, inverse = np.unique(rows, return_inverse=True)
            summed = np.zeros((len(uniq),) + values.shape[1:])
            np.add.at(summed, inverse, values)
            out.entries[name] = (uniq, summed)
        return out


def _ids(params: ParameterSet, r, s, o):
    r = np.atleast_1d(np.asarray(r, dtype=np.int64))
    s = np.atleast_1d(np.asarray(s, dtype=np.int64))
    o = np.atleast_1d(np.asarray(o, dtype=np.int64))
    if r.size and (r.min() < 0 or r.max() >= params.m):
        raise IndexError(f"relation id out of range [0, {params.m})")
    for ent in (s, o):
        if ent.size and (ent.min() < 0 or ent.max() >= params.n):
            raise IndexError(f"entity id out of range [0, {params.n})")
    return r, s, o


def _transe_diff(params, r, s, o):
    e = params["ent_re"]
    return e[s] + params["rel_re"][r] - e[o]


def batch_score(params: ParameterSet, r, s, o) -> np.ndarray:
    r, s, o = _ids(params, r, s, o)
    kind = params.model.name
    if kind == "complex":
        a, b = params["ent_re"], params["ent_im"]
        wr, wi = params["rel_re"][r], params["rel_im"][r]
        a_s, b_s, a_o, b_o = a[s], b[s], a[o], b[o]
        return (np.sum(wr * a_s * a_o, axis=1) + np.sum(wr * b_s * b_o, axis=1)
                + np.sum(wi * a_s * b_o, axis=1) - np.sum(wi * b_s * a_o, axis=1))
    if kind == "distmult":
        e = params["ent_re"]
        return np.sum(params["rel_re"][r] * e[s] * e[o], axis=1)
    if kind == "cp":
        return np.sum(params["rel_re"][r] * params["ent_re"][s] * params["obj_ent"][o], axis=1)
    if kind == "rescal":
        e = params["ent_re"]
        return np.einsum("bi,bij,bj->b", e[s], params["rel_mat"][r], e[o])
    if kind == "transe":
        return -np.linalg.norm(_transe_diff(params, r, s, o), ord=params.model.p, axis=1)
    raise AssertionError(kind)


def score(params: ParameterSet, r: int, s: int, o: int) -> float:
    return float(batch_score(params, r, s, o)[0])


def batch_gradient(params: ParameterSet, r, s, o, coef=None) -> SparseGradient:
    """Gradients of the scores, each triple's contribution multiplied by ``coef``."""
    r, s, o = _ids(params, r, s, o)
    c = np.ones(len(r)) if coef is None else np.broadcast_to(np.asarray(coef, dtype=np.float64), r.shape)
    col = c[:, None]
    grad = SparseGradient()
    kind = params.model.name
    if kind == "complex":
        a, b = params["ent_re"], params["ent_im"]
        wr, wi = params["rel_re"][r], params["rel_im"][r]
        a_s, b_s, a_o, b_o = a[s], b[s], a[o], b[o]
        grad.add("ent_re", np.concatenate([s, o]), np.concatenate([
            col * (wr * a_o + wi * b_o),
            col * (wr * a_s - wi * b_s)]))
        grad.add("ent_im", np.concatenate([s, o]), np.concatenate([
            col * (wr * b_o - wi * a_o),
            col * (wr * b_s + wi * a_s)]))
        grad.add("rel_re", r, col * (a_s * a_o + b_s * b_o))
        grad.add("rel_im", r, col * (a_s * b_o - b_s * a_o))
    elif kind == "distmult":
        e, w = params["ent_re"], params["rel_re"][r]
        e_s, e_o = e[s], e[o]
        grad.add("ent_re", np.concatenate([s, o]), np.concatenate([col * w * e_o, col * w * e_s]))
        grad.add("rel_re", r, col * e_s * e_o)
    elif kind == "cp":
        u, v, w = params["ent_re"][s], params["obj_ent"][o], params["rel_re"][r]
        grad.add("ent_re", s, col * w * v)
        grad.add("obj_ent", o, col * w * u)
        grad.add("rel_re", r, col * u * v)
    elif kind == "rescal":
        e, W = params["ent_re"], params["rel_mat"][r]
        e_s, e_o = e[s], e[o]
        grad.add("ent_re", np.concatenate([s, o]), np.concatenate([
            col * np.einsum("bij,bj->bi", W, e_o),
            col * np.einsum("bij,bi->bj", W, e_s)]))
        grad.add("rel_mat", r, c[:, None, None] * e_s[:, :, None] * e_o[:, None, :])
    elif kind == "transe":
        d = _transe_diff(params, r, s, o)
        if params.model.p == 1:
            dphi = -np.sign(d)
        else:
            norm = np.linalg.norm(d, axis=1, keepdims=True)
            dphi = np.divide(-d, norm, out=np.zeros_like(d), where=norm > 0)
        dphi = col * dphi
        grad.add("ent_re", np.concatenate([s, o]), np.concatenate([dphi, -dphi]))
        grad.add("rel_re", r, dphi)
    else:
        raise AssertionError(kind)
    return grad


def gradient(params: ParameterSet, r: int, s: int, o: int) -> SparseGradient:
    return batch_gradient(params, r, s, o)


def score_objects(params: ParameterSet, r: int, s: int) -> np.ndarray:
    """Scores of ``(r, s, o')`` for every entity ``o'``."""
    kind = params.model.name
    if kind == "complex":
        a, b = params["ent_re"], params["ent_im"]
        wr, wi = params["rel_re"][r], params["rel_im"][r]
        return a @ (wr * a[s] - wi * b[s]) + b @ (wr * b[s] + wi * a[s])
    if kind == "distmult":
        e = params["ent_re"]
        return e @ (params["rel_re"][r] * e[s])
    if kind == "cp":
        return params["obj_ent"] @ (params["rel_re"][r] * params["ent_re"][s])
    if kind == "rescal":
        e = params["ent_re"]
        return e @ (params["rel_mat"][r].T @ e[s])
    if kind == "transe":
        e = params["ent_re"]
        return -np.linalg.norm(e[s] + params["rel_re"][r] - e, ord=params.model.p, axis=1)
    raise AssertionError(kind)


def score_subjects(params: ParameterSet, r: int, o: int) -> np.ndarray:
    """Scores of ``(r, s', o)`` for every entity ``s'``."""
    kind = params.model.name
    if kind == "complex":
        a, b = params["ent_re"], params["ent_im"]
        wr, wi = params["rel_re"][r], params["rel_im"][r]
        return a @ (wr * a[o] + wi * b[o]) + b @ (wr * b[o] - wi * a[o])
    if kind == "distmult":
        e = params["ent_re"]
        return e @ (params["rel_re"][r] * e[o])
    if kind == "cp":
        return params["ent_re"] @ (params["rel_re"][r] * params["obj_ent"][o])
    if kind == "rescal":
        e = params["ent_re"]
        return e @ (params["rel_mat"][r] @ e[o])
    if kind == "transe":
        e = params["ent_re"]
        return -np.linalg.norm(e + params["rel_re"][r] - e[o], ord=params.model.p, axis=1)
    raise AssertionError(kind)


def score_matrix(params: ParameterSet, r: int) -> np.ndarray:
    """Dense n x n score matrix of relation ``r`` (subjects on rows)."""
    return np.stack([score_objects(params, r, s) for s in range(params.n)])


def complex_score_reference(params: ParameterSet, r: int, s: int, o: int) -> float:
    """ComplEx score through explicit complex arithmetic, Re(sum w e_s conj(e_o))."""
    e = params["ent_re"] + 1j * params["ent_im"]
    w = params["rel_re"][r] + 1j * params["rel_im"][r]
    return float(np.real(np.sum(w * e[s] * np.conj(e[o]))))
