"""Sparse Hermitian operators, states and spectra."""
from __future__ import annotations

from dataclasses import dataclass
from pathlib import Path

import numpy as np
import scipy.sparse as sp
from scipy.sparse.linalg import ArpackNoConvergence, LinearOperator, eigsh

from .errors import ConvergenceError, NotHermitianError, SchemaError
from .serialization import fmt_float

DENSE_LIMIT = 4096
NEAREST_DENSE_LIMIT = 1024
HERMITICITY_TOL = 1e-14
NORM_TOL = 1e-9


@dataclass(frozen=True, eq=False)
class SparseHermitian:
    """Hermitian operator in sparse row format with a basis label."""

    matrix: sp.csr_matrix
    basis_tag: str = "computational"
    check: bool = True

    def __post_init__(self):
        M = self.matrix
        if not sp.issparse(M):
            M = sp.csr_matrix(M)
        else:
            M = M.tocsr()
        object.__setattr__(self, "matrix", M)
        if M.shape[0] != M.shape[1]:
            raise NotHermitianError(f"operator is not square: {M.shape}")
        if self.check:
            D = M - M.conj().T
            dev = float(abs(D).max()) if D.nnz else 0.0
            scale = max(1.0, float(abs(M).max()) if M.nnz else 0.0)
            if dev > HERMITICITY_TOL * scale:
                raise NotHermitianError(f"max |H - H^dagger| = {dev:.3e}")

    @property
    def dim(self) -> int:
        return self.matrix.shape[0]

    @property
    def nnz(self) -> int:
        return self.matrix.nnz

    def toarray(self) -> np.ndarray:
        return self.matrix.toarray()

    def __matmul__(self, other):
        return self.matrix @ (other.amplitudes if isinstance(other, StateVector) else other)

    def expectation(self, psi) -> float:
        v = psi.amplitudes if isinstance(psi, StateVector) else np.asarray(psi)
        return float(np.real(np.vdot(v, self.matrix @ v)))

    def entries(self):
        """Coordinate list ``(row, col, value)`` in row-major order."""
        C = self.matrix.tocoo()
        order = np.lexsort((C.col, C.row))
        return C.row[order], C.col[order], C.data[order]


@dataclass(frozen=True, eq=False)
class StateVector:
    amplitudes: np.ndarray
    basis_tag: str = "computational"

    def __post_init__(self):
        a = np.asarray(self.amplitudes)
        nrm = np.linalg.norm(a)
        if abs(nrm - 1.0) > NORM_TOL:
            raise ValueError(f"state norm {nrm:.12f} differs from 1")
        object.__setattr__(self, "amplitudes", a)

    @property
    def dim(self) -> int:
        return len(self.amplitudes)

    @classmethod
    def normalized(cls, amplitudes, basis_tag: str = "computational") -> "StateVector":
        a = np.asarray(amplitudes)
        return cls(a / np.linalg.norm(a), basis_tag)

    @classmethod
    def basis(cls, dim: int, index: int, basis_tag: str = "computational") -> "StateVector":
        a = np.zeros(dim, dtype=complex)
        a[index] = 1.0
        return cls(a, basis_tag)


def fidelity(a, b) -> float:
    """``|<a|b>|^2``."""
    va = a.amplitudes if isinstance(a, StateVector) else np.asarray(a)
    vb = b.amplitudes if isinstance(b, StateVector) else np.asarray(b)
    return float(abs(np.vdot(va, vb)) ** 2)


@dataclass(frozen=True)
class Spectrum:
    """Lowest eigenvalues in ascending order with optional eigenvectors as columns."""

    eigenvalues: np.ndarray
    eigenvectors: np.ndarray | None = None

    @property
    def gap(self) -> float:
        return float(self.eigenvalues[1] - self.eigenvalues[0])

    def ground_state(self, basis_tag: str = "computational") -> StateVector:
        if self.eigenvectors is None:
            raise ValueError("spectrum was computed without eigenvectors")
        v = self.eigenvectors[:, 0]
        # fix the global phase so the largest component is real positive
        k = int(np.argmax(np.abs(v)))
        v = v * (abs(v[k]) / v[k])
        return StateVector.normalized(v, basis_tag)


def _as_sparse(H) -> sp.csr_matrix:
    if isinstance(H, SparseHermitian):
        return H.matrix
    return H if sp.issparse(H) else sp.csr_matrix(H)


def exact_spectrum(H, k: int | None = None, eigenvectors: bool = False, tol: float = 1e-10) -> Spectrum:
    """Lowest ``k`` eigenpairs.

    Dense diagonalization up to dimension 4096, otherwise Lanczos for the
    smallest algebraic eigenvalues with a residual check.
    """
    M = _as_sparse(H)
    dim = M.shape[0]
    if dim <= DENSE_LIMIT:
        A = M.toarray()
        if eigenvectors:
            w, V = np.linalg.eigh(A)
            return Spectrum(w[:k], V[:, :k])
        return Spectrum(np.linalg.eigvalsh(A)[:k])
    k = k or 6
    w, V = eigsh(M, k=k, which="SA", tol=tol * 1e-2)
    order = np.argsort(w)
    w, V = w[order], V[:, order]
    scale = max(1.0, float(abs(M).sum(axis=1).max()))
    res = np.linalg.norm(M @ V - V * w, axis=0).max()
    if res > tol * scale:
        raise ConvergenceError(f"Lanczos residual {res:.3e} above tolerance")
    return Spectrum(w, V if eigenvectors else None)


def nearest_eigenvalues(H, target: float = 0.0, k: int = 4, tol: float = 1e-12, max_iter: int = 20_000) -> np.ndarray:
    """Eigenvalues closest to ``target``, sorted by distance.

    Large operators use Lanczos on the folded operator ``(H - target)^2``,
    which needs only matrix-vector products, followed by a Rayleigh-Ritz
    step on the converged subspace to recover signs. Works well when the
    wanted eigenvalues are isolated; clustered interiors raise
    :class:`ConvergenceError`.
    """
    M = _as_sparse(H)
    dim = M.shape[0]
    if dim <= NEAREST_DENSE_LIMIT:
        w = np.linalg.eigvalsh(M.toarray())
        return w[np.argsort(np.abs(w - target))[:k]]
    shifted = M - target * sp.identity(dim, format="csr")
    op = LinearOperator((dim, dim), matvec=lambda x: shifted @ (shifted @ x), dtype=M.dtype)
    try:
        _, V = eigsh(op, k=k, which="SA", tol=tol, ncv=max(2 * k + 1, 40), maxiter=max_iter)
    except ArpackNoConvergence as exc:
        raise ConvergenceError(f"folded Lanczos did not converge: {exc}") from exc
    V, _ = np.linalg.qr(V)
    w = np.linalg.eigvalsh(V.conj().T @ (M @ V))
    return w[np.argsort(np.abs(w - target))]


def sigma_x_site(n: int, l: int) -> sp.csr_matrix:
    N = 1 << n
    idx = np.arange(N)
    return sp.csr_matrix((np.ones(N), (idx ^ (1 << l), idx)), shape=(N, N))


def sum_sigma_x(n: int) -> sp.csr_matrix:
    N = 1 << n
    idx = np.arange(N)
    rows = np.concatenate([idx ^ (1 << l) for l in range(n)])
    return sp.csr_matrix((np.ones(n * N), (rows, np.tile(idx, n))), shape=(N, N))


def dump_operator(path: str | Path, H: SparseHermitian) -> Path:
    """Write ``# dim=.. basis_tag=..`` then one ``row col real imag`` line per entry."""
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    r, c, v = H.entries()
    v = np.asarray(v, dtype=complex)
    lines = [f"# dim={H.dim} basis_tag={H.basis_tag}"]
    lines += [f"{a} {b} {fmt_float(x.real)} {fmt_float(x.imag)}" for a, b, x in zip(r, c, v)]
    path.write_text("\n".join(lines) + "\n")
    return path


def load_operator(path: str | Path) -> SparseHermitian:
    lines = Path(path).read_text().splitlines()
    if not lines or not lines[0].startswith("#"):
        raise SchemaError(f"{path}: missing operator header")
    head = dict(tok.split("=", 1) for tok in lines[0][1:].split())
    try:
        dim, tag = int(head["dim"]), head["basis_tag"]
    except KeyError as exc:
        raise SchemaError(f"{path}: header lacks {exc}") from exc
    body = np.array([ln.split() for ln in lines[1:] if ln.strip()], dtype=float).reshape(-1, 4)
    vals = body[:, 2] + 1j * body[:, 3]
    if not np.any(body[:, 3]):
        vals = body[:, 2]
    M = sp.csr_matrix((vals, (body[:, 0].astype(int), body[:, 1].astype(int))), shape=(dim, dim))
    return SparseHermitian(M, tag)
