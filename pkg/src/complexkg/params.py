"""Parameter storage, initialization and the binary model file format.

Model file layout::

    COMPLEXKG <version> <kind> n=<n> m=<m> K=<K> [p=<p> margin=<gamma>]\\n
    <float64 little-endian payload>

The payload holds every parameter matrix present for the model kind in
``MATRIX_ORDER``, row-major, followed by the AdaGrad accumulators in the
same order.
"""

from __future__ import annotations

import copy
from dataclasses import dataclass, field

import numpy as np

FORMAT_MAGIC = "COMPLEXKG"
FORMAT_VERSION = 1

MODEL_KINDS = ("complex", "distmult", "cp", "transe", "rescal")

MATRIX_ORDER = ("ent_re", "ent_im", "obj_ent", "rel_re", "rel_im", "rel_mat")

_MATRICES = {
    "complex": ("ent_re", "ent_im", "rel_re", "rel_im"),
    "distmult": ("ent_re", "rel_re"),
    "cp": ("ent_re", "obj_ent", "rel_re"),
    "transe": ("ent_re", "rel_re"),
    "rescal": ("ent_re", "rel_mat"),
}

ENTITY_MATRICES = ("ent_re", "ent_im", "obj_ent")


class ModelFileError(ValueError):
    pass


class TruncatedModelError(ModelFileError):
    pass


class ModelShapeError(ModelFileError):
    pass


class ModelVersionError(ModelFileError):
    pass


@dataclass(frozen=True)
class ModelKind:
    """Scoring function choice; ``p`` and ``margin`` are TransE-only."""

    name: str
    p: int | None = None
    margin: float | None = None

    def __post_init__(self):
        name = self.name.lower()
        object.__setattr__(self, "name", name)
        if name not in MODEL_KINDS:
            raise ValueError(f"unknown model kind {self.name!r}; expected one of {MODEL_KINDS}")
        if name == "transe":
            if self.p is None:
                object.__setattr__(self, "p", 2)
            if self.margin is None:
                object.__setattr__(self, "margin", 1.0)
            if self.p not in (1, 2):
                raise ValueError("TransE norm order must be 1 or 2")
            if not self.margin > 0:
                raise ValueError("TransE margin must be positive")
        elif self.p is not None or self.margin is not None:
            raise ValueError("p and margin only apply to TransE")

    @property
    def matrices(self) -> tuple:
        return _MATRICES[self.name]

    def __str__(self):
        if self.name == "transe":
            return f"transe(p={self.p}, margin={self.margin})"
        return self.name


@dataclass
class ParameterSet:
    model: ModelKind
    n: int
    m: int
    K: int
    tensors: dict = field(default_factory=dict)
    accumulators: dict = field(default_factory=dict)

    def __post_init__(self):
        for name in self.model.matrices:
            shape = self.shape_of(name)
            for store in (self.tensors, self.accumulators):
                if name not in store:
                    store[name] = np.zeros(shape)
                elif store[name].shape != shape:
                    raise ModelShapeError(f"{name}: expected shape {shape}, got {store[name].shape}")
        extra = (set(self.tensors) | set(self.accumulators)) - set(self.model.matrices)
        if extra:
            raise ModelShapeError(f"matrices {sorted(extra)} do not belong to {self.model}")

    def shape_of(self, name: str) -> tuple:
        if name in ENTITY_MATRICES:
            return (self.n, self.K)
        if name == "rel_mat":
            return (self.m, self.K, self.K)
        return (self.m, self.K)

    def __getitem__(self, name: str) -> np.ndarray:
        return self.tensors[name]

    def names(self):
        return [name for name in MATRIX_ORDER if name in self.tensors]

    def copy(self) -> "ParameterSet":
        return copy.deepcopy(self)

    def equals(self, other: "ParameterSet") -> bool:
        """Bitwise equality of kind, shapes, parameters and accumulators."""
        if (self.model, self.n, self.m, self.K) != (other.model, other.n, other.m, other.K):
            return False
        return all(
            np.array_equal(a[name], b[name])
            for a, b in ((self.tensors, other.tensors), (self.accumulators, other.accumulators))
            for name in self.names()
        )


def init_params(model: ModelKind, n: int, m: int, K: int, seed: int) -> ParameterSet:
    """Standard-normal parameters, zeroed accumulators."""
    if min(n, m, K) < 1:
        raise ValueError("n, m and K must all be >= 1")
    rng = np.random.default_rng(seed)
    params = ParameterSet(model, n, m, K)
    for name in params.names():
        params.tensors[name] = rng.standard_normal(params.shape_of(name))
    return params


def l2_norm_squared(params: ParameterSet) -> float:
    return float(sum(np.sum(params[name] ** 2) for name in params.names()))


def _header(params: ParameterSet) -> str:
    fields = [FORMAT_MAGIC, str(FORMAT_VERSION), params.model.name,
              f"n={params.n}", f"m={params.m}", f"K={params.K}"]
    if params.model.name == "transe":
        fields += [f"p={params.model.p}", f"margin={params.model.margin!r}"]
    return " ".join(fields) + "\n"


def save_params(params: ParameterSet, path) -> None:
    chunks = [np.ascontiguousarray(store[name], dtype="<f8").tobytes()
              for store in (params.tensors, params.accumulators)
              for name in params.names()]
    with open(path, "wb") as fh:
        fh.write(_header(params).encode("ascii"))
        for chunk in chunks:
            fh.write(chunk)


def _parse_header(line: str):
    fields = line.split()
    if len(fields) < 6 or fields[0] != FORMAT_MAGIC:
        raise ModelFileError("not a model file (bad header)")
    try:
        version = int(fields[1])
    except ValueError:
        raise ModelFileError(f"bad format version {fields[1]!r}") from None
    if version != FORMAT_VERSION:
        raise ModelVersionError(f"model file version {version}, this build reads {FORMAT_VERSION}")
    kv = dict(f.split("=", 1) for f in fields[3:] if "=" in f)
    try:
        n, m, K = int(kv["n"]), int(kv["m"]), int(kv["K"])
        p = int(kv["p"]) if "p" in kv else None
        margin = float(kv["margin"]) if "margin" in kv else None
    except (KeyError, ValueError) as exc:
        raise ModelFileError(f"malformed header field: {exc}") from None
    return ModelKind(fields[2], p=p, margin=margin), n, m, K


def load_params(path) -> ParameterSet:
    with open(path, "rb") as fh:
        blob = fh.read()
    newline = blob.find(b"\n")
    if newline < 0:
        raise TruncatedModelError(f"{path}: missing header (empty or truncated file)")
    model, n, m, K = _parse_header(blob[:newline].decode("ascii", errors="replace"))
    payload = blob[newline + 1:]
    if len(payload) % 8:
        raise TruncatedModelError(f"{path}: payload is not a whole number of float64 values")
    skeleton = ParameterSet(model, n, m, K)
    sizes = [int(np.prod(skeleton.shape_of(name))) for name in skeleton.names()]
    expected = 2 * sum(sizes) * 8
    if len(payload) != expected:
        raise ModelShapeError(
            f"{path}: header advertises n={n}, m={m}, K={K} ({expected} payload bytes) "
            f"but payload has {len(payload)} bytes")
    values = np.frombuffer(payload, dtype="<f8").astype(np.float64)
    offset = 0
    for store in (skeleton.tensors, skeleton.accumulators):
        for name, size in zip(skeleton.names(), sizes):
            store[name] = values[offset:offset + size].reshape(skeleton.shape_of(name)).copy()
            offset += size
    return skeleton
