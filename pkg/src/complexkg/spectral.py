"""Constructive checks of the normal-matrix results behind complex embeddings.

Any real square ``X`` is the real part of the normal matrix ``X + i X^T``,
hence of a unitary diagonalization ``E W E^*``. The functions here build
those objects explicitly with a cyclic Jacobi eigensolver and report
residuals. Complex matrices are plain ``complex128`` arrays.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .params import ParameterSet

MAX_DIAG_SIZE = 64
MAX_SPLIT_SIZE = 4096


class NotNormalError(ValueError):
    pass


class RankExceededError(ValueError):
    def __init__(self, observed, k):
        super().__init__(f"matrix has numerical rank {observed}, more than k={k}")
        self.observed = observed
        self.k = k


@dataclass
class UnitaryDiagonalization:
    E: np.ndarray
    W: np.ndarray

    @property
    def rank(self) -> int:
        return len(self.W)

    def reconstruct(self) -> np.ndarray:
        return (self.E * self.W) @ self.E.conj().T

    def unitarity_residual(self) -> float:
        gram = self.E.conj().T @ self.E
        return float(np.max(np.abs(gram - np.eye(len(self.W))), initial=0.0))


@dataclass
class BlockDecomposition:
    E: np.ndarray
    diagonals: list

    def reconstruct(self, i: int) -> np.ndarray:
        return (self.E * self.diagonals[i]) @ self.E.conj().T


def _square(A, name="matrix"):
    A = np.asarray(A)
    if A.ndim != 2 or A.shape[0] != A.shape[1]:
        raise ValueError(f"{name} must be square, got shape {A.shape}")
    if not np.all(np.isfinite(A)):
        raise ValueError(f"{name} has non-finite entries")
    return A


def jacobi_eigh(H, tol: float = 1e-12, max_sweeps: int = 100):
    """Eigen-decomposition of a Hermitian matrix by cyclic Jacobi rotations.

    Returns ``(eigenvalues, V)`` with ``H = V diag(eigenvalues) V^*``,
    eigenvalues ascending. Sweeps stop once the off-diagonal Frobenius norm
    is below ``tol * ||H||_F``. Real symmetric input yields real ``V``.
    """
    H = _square(H)
    real_input = not np.iscomplexobj(H)
    A = np.array(H, dtype=np.complex128)
    A = (A + A.conj().T) / 2
    n = A.shape[0]
    V = np.eye(n, dtype=np.complex128)
    scale = np.linalg.norm(A)
    threshold = tol * scale
    for _ in range(max_sweeps):
        off = np.linalg.norm(A - np.diag(np.diag(A)))
        if off <= threshold:
            break
        for p in range(n - 1):
            for q in range(p + 1, n):
                apq = A[p, q]
                mag = abs(apq)
                if mag <= 1e-300 or mag <= 1e-18 * scale:
                    continue
                phase = apq / mag
                app, aqq = A[p, p].real, A[q, q].real
                tau = (aqq - app) / (2.0 * mag)
                t = (1.0 if tau >= 0 else -1.0) / (abs(tau) + np.sqrt(1.0 + tau * tau))
                c = 1.0 / np.sqrt(1.0 + t * t)
                s = t * c
                # Phase-align column q, then apply the real rotation on (p, q).
                J = np.array([[c, s], [-s * phase.conjugate(), c * phase.conjugate()]])
                cols = A[:, [p, q]] @ J
                A[:, p], A[:, q] = cols[:, 0], cols[:, 1]
                rows = J.conj().T @ A[[p, q], :]
                A[p, :], A[q, :] = rows[0], rows[1]
                A[p, q] = A[q, p] = 0.0
                A[p, p], A[q, q] = A[p, p].real, A[q, q].real
                vcols = V[:, [p, q]] @ J
                V[:, p], V[:, q] = vcols[:, 0], vcols[:, 1]
    eigenvalues = np.diag(A).real.copy()
    order = np.argsort(eigenvalues, kind="stable")
    eigenvalues, V = eigenvalues[order], V[:, order]
    if real_input:
        V = V.real
    return eigenvalues, V


def lift_to_normal(X) -> np.ndarray:
    """``Z = X + i X^T``; normal because ``Z^* = -i Z``."""
    X = _square(X)
    if np.iscomplexobj(X):
        raise ValueError("lift_to_normal expects a real matrix")
    X = np.asarray(X, dtype=np.float64)
    return X + 1j * X.T


def commutator_residual(Z) -> float:
    Z = _square(Z)
    Zh = Z.conj().T
    return float(np.linalg.norm(Z @ Zh - Zh @ Z))


def is_normal(Z, tol: float = 1e-10) -> bool:
    Z = _square(Z)
    return commutator_residual(Z) <= tol * max(1.0, np.linalg.norm(Z) ** 2)


def _order(w: np.ndarray) -> np.ndarray:
    # descending modulus, ties by descending real part
    return np.lexsort((-np.round(w.real, 12), -np.round(np.abs(w), 12)))


def diagonalize_normal(Z, tol: float = 1e-10, cluster_gap: float = 1e-8) -> UnitaryDiagonalization:
    """Unitary diagonalization of a normal matrix.

    ``H1 = (Z + Z^*) / 2`` and ``H2 = (Z - Z^*) / 2i`` are commuting
    Hermitian matrices. Jacobi on ``H1`` fixes the eigenspaces; inside each
    cluster of (numerically) equal ``H1`` eigenvalues a second Jacobi pass
    diagonalizes the compressed ``H2``.
    """
    Z = np.asarray(_square(Z), dtype=np.complex128)
    n = Z.shape[0]
    if n > MAX_DIAG_SIZE:
        raise ValueError(f"diagonalization is limited to n <= {MAX_DIAG_SIZE}")
    if not is_normal(Z, tol):
        raise NotNormalError(
            f"matrix is not normal: ||ZZ* - Z*Z||_F = {commutator_residual(Z):.3e}")
    Zh = Z.conj().T
    H1 = (Z + Zh) / 2
    H2 = (Z - Zh) / 2j
    lam, U = jacobi_eigh(H1)
    U = U.astype(np.complex128)
    gap = cluster_gap * max(1.0, float(np.max(np.abs(lam), initial=0.0)))
    start = 0
    for end in range(1, n + 1):
        if end == n or lam[end] - lam[end - 1] > gap:
            if end - start > 1:
                P = U[:, start:end]
                _, Q = jacobi_eigh(P.conj().T @ H2 @ P)
                U[:, start:end] = P @ Q
            start = end
    w = np.einsum("ij,ij->j", U.conj(), Z @ U)
    order = _order(w)
    return UnitaryDiagonalization(E=U[:, order], W=w[order])


def singular_values(X) -> np.ndarray:
    """Singular values, descending, from Jacobi on the Hermitian dilation."""
    X = np.asarray(X, dtype=np.float64)
    n, k = X.shape
    dilation = np.zeros((n + k, n + k))
    dilation[:n, n:] = X
    dilation[n:, :n] = X.T
    lam, _ = jacobi_eigh(dilation)
    return np.maximum(lam[::-1][:min(n, k)], 0.0)


def numerical_rank(X, tol: float = 1e-8) -> int:
    sv = singular_values(X)
    if sv.size == 0 or sv[0] == 0:
        return 0
    return int(np.count_nonzero(sv > tol * sv[0]))


def rank_bounded_decomposition(X, k: int, rank_tol: float = 1e-8,
                               drop_tol: float = 1e-8) -> UnitaryDiagonalization:
    """At most ``2k`` orthonormal columns ``E`` with ``Re(E W E^*) = X``.

    Requires ``rank(X) <= k``; eigenpairs of ``X + i X^T`` with modulus at
    most ``drop_tol`` times the largest are discarded.
    """
    X = np.asarray(_square(X), dtype=np.float64)
    observed = numerical_rank(X, rank_tol)
    if observed > k:
        raise RankExceededError(observed, k)
    full = diagonalize_normal(lift_to_normal(X))
    modulus = np.abs(full.W)
    top = float(np.max(modulus, initial=0.0))
    keep = np.flatnonzero(modulus > drop_tol * top) if top > 0 else np.zeros(0, dtype=np.int64)
    keep = keep[:2 * k]
    return UnitaryDiagonalization(E=full.E[:, keep], W=full.W[keep])


def block_tensor_decomposition(matrices) -> BlockDecomposition:
    """Shared ``E = [E_1 ... E_m]`` with block-sparse diagonals per matrix."""
    matrices = [np.asarray(_square(X), dtype=np.float64) for X in matrices]
    if not matrices:
        raise ValueError("need at least one matrix")
    n = matrices[0].shape[0]
    if any(X.shape != (n, n) for X in matrices):
        raise ValueError("all matrices must share the same n x n shape")
    m = len(matrices)
    parts = [diagonalize_normal(lift_to_normal(X)) for X in matrices]
    E = np.concatenate([d.E for d in parts], axis=1)
    diagonals = []
    for i, d in enumerate(parts):
        lam = np.zeros(n * m, dtype=np.complex128)
        lam[i * n:(i + 1) * n] = d.W
        diagonals.append(lam)
    return BlockDecomposition(E=E, diagonals=diagonals)


def split_symmetric_antisymmetric(params: ParameterSet, r: int):
    """Symmetric and antisymmetric parts of a ComplEx relation's score matrix.

    ``S = E' diag(w') E'^T + E'' diag(w') E''^T`` and
    ``A = E' diag(w'') E''^T - E'' diag(w'') E'^T``. Both are accumulated one
    rank-one term at a time so symmetry holds bit for bit.
    """
    if params.model.name != "complex":
        raise ValueError("the symmetric/antisymmetric split needs a ComplEx model")
    if params.n > MAX_SPLIT_SIZE:
        raise ValueError(f"n={params.n} exceeds the dense limit of {MAX_SPLIT_SIZE}")
    a, b = params["ent_re"], params["ent_im"]
    wr, wi = params["rel_re"][r], params["rel_im"][r]
    S = np.zeros((params.n, params.n))
    A = np.zeros((params.n, params.n))
    for k in range(params.K):
        S += wr[k] * (np.outer(a[:, k], a[:, k]) + np.outer(b[:, k], b[:, k]))
        A += wi[k] * (np.outer(a[:, k], b[:, k]) - np.outer(b[:, k], a[:, k]))
    return S, A


def principal_components(M, components: int):
    """Center the rows of ``M`` and project them on the top principal axes.

    Returns ``(coordinates, variances)``; variances are nonincreasing.
    """
    M = np.asarray(M, dtype=np.float64)
    dim = M.shape[1]
    if components < 1 or components > dim:
        raise ValueError(f"requested {components} components, data has dimension {dim}")
    centered = M - M.mean(axis=0)
    cov = centered.T @ centered / max(len(M) - 1, 1)
    lam, V = jacobi_eigh(cov)
    order = np.argsort(-lam, kind="stable")[:components]
    axes = V[:, order]
    # deterministic sign: largest-magnitude loading positive
    signs = np.sign(axes[np.argmax(np.abs(axes), axis=0), np.arange(components)])
    axes = axes * np.where(signs == 0, 1.0, signs)
    return centered @ axes, np.maximum(lam[order], 0.0)


def read_matrix(path) -> np.ndarray:
    """Tab-separated grid; a cell ``"re im"`` makes the matrix complex."""
    rows = []
    is_complex = False
    with open(path, encoding="utf-8") as fh:
        for line in fh:
            if not line.strip():
                continue
            row = []
            for cell in line.rstrip("\n").split("\t"):
                parts = cell.split()
                if len(parts) == 2:
                    is_complex = True
                    row.append(complex(float(parts[0]), float(parts[1])))
                elif len(parts) == 1:
                    row.append(complex(float(parts[0]), 0.0))
                else:
                    raise ValueError(f"bad matrix cell {cell!r}")
            rows.append(row)
    if len({len(r) for r in rows}) > 1:
        raise ValueError("ragged matrix rows")
    arr = np.array(rows, dtype=np.complex128)
    return arr if is_complex else arr.real.copy()


def write_matrix(path, A) -> None:
    A = np.asarray(A)
    with open(path, "w", encoding="utf-8") as fh:
        for row in A:
            if np.iscomplexobj(A):
                cells = [f"{z.real!r} {z.imag!r}" for z in row.tolist()]
            else:
                cells = [repr(float(x)) for x in row]
            fh.write("\t".join(cells) + "\n")
