"""Glued binary trees with an adjacency oracle.

Two complete binary trees of depth ``n`` are joined leaf to leaf by a random
alternating cycle. Vertices carry random bit-string names and are only
reachable through a neighbour oracle. Column ``j`` (0..2n+1) collects the
vertices at distance ``j`` from the entrance; in the basis of uniform column
states the adjacency matrix is tridiagonal with hopping ``sqrt(2)`` inside
the trees and ``2`` across the glued layer.

The interpolating Hamiltonian is
``H(s) = (1 - s) H_in - s (1 - s) A + s H_out`` with
``H_in = -alpha |entrance><entrance|`` and ``H_out = -alpha |exit><exit|``.
"""
from __future__ import annotations

import math
from dataclasses import dataclass
from pathlib import Path
from typing import Sequence

import numpy as np
import scipy.sparse as sp
from scipy.sparse.csgraph import shortest_path

from .errors import GuardExceededError, SchemaError, SubspaceLeakageError
from .evolution import evolve, make_schedule, min_gap_along_path
from .operators import SparseHermitian
from .rng import make_rng
from .serialization import read_json, write_csv, write_json

INVALID = "INVALID"
DEFAULT_ALPHA = 1.0 / math.sqrt(8.0)
MAX_DEPTH = 14


def name_bits(n: int) -> int:
    """Name length: ``2n`` bits, widened when that leaves no spare strings."""
    N = 2 ** (n + 2) - 2
    b = 2 * n
    while 2**b <= N:
        b += 1
    return b


@dataclass(frozen=True, eq=False)
class GluedTreesGraph:
    depth: int
    seed: int
    names: list[str]
    edges: np.ndarray  # (m, 2) vertex ids
    columns: np.ndarray
    entrance: int
    exit: int

    @property
    def n_vertices(self) -> int:
        return len(self.names)

    def adjacency(self) -> sp.csr_matrix:
        N = self.n_vertices
        e = self.edges
        A = sp.csr_matrix((np.ones(2 * len(e)), (np.r_[e[:, 0], e[:, 1]], np.r_[e[:, 1], e[:, 0]])), shape=(N, N))
        return A

    def degrees(self) -> np.ndarray:
        return np.bincount(self.edges.ravel(), minlength=self.n_vertices)

    def to_dict(self) -> dict:
        return {
            "n": self.depth,
            "seed": self.seed,
            "names": list(self.names),
            "edges": self.edges.tolist(),
            "entrance": self.names[self.entrance],
            "exit": self.names[self.exit],
        }


def generate(n: int, seed: int) -> GluedTreesGraph:
    """Random glued-trees graph of depth ``n`` (``2^(n+2) - 2`` vertices)."""
    if not 1 <= n <= MAX_DEPTH:
        raise GuardExceededError(f"depth must lie in [1, {MAX_DEPTH}]")
    rng = make_rng(seed, n)
    ncol = 2 * n + 2
    sizes = [2 ** min(j, ncol - 1 - j) for j in range(ncol)]
    offsets = np.concatenate([[0], np.cumsum(sizes)])
    N = int(offsets[-1])
    columns = np.repeat(np.arange(ncol), sizes)
    edges = []
    # left tree: vertex k of column j has children 2k, 2k+1 in column j+1
    for j in range(n):
        k = np.arange(sizes[j])
        for c in (0, 1):
            edges.append(np.stack([offsets[j] + k, offsets[j + 1] + 2 * k + c], 1))
    # right tree mirrored: column ncol-1-j is depth j from the exit
    for j in range(n):
        col, child = ncol - 1 - j, ncol - 2 - j
        k = np.arange(sizes[col])
        for c in (0, 1):
            edges.append(np.stack([offsets[col] + k, offsets[child] + 2 * k + c], 1))
    # random alternating cycle through the two leaf layers
    L = offsets[n] + rng.permutation(sizes[n])
    R = offsets[n + 1] + rng.permutation(sizes[n + 1])
    edges.append(np.stack([L, R], 1))
    edges.append(np.stack([R, np.roll(L, -1)], 1))
    edges = np.concatenate(edges).astype(np.int64)
    edges = np.sort(edges, axis=1)

    bits = name_bits(n)
    labels = rng.choice(2**bits, size=N, replace=False)
    names = [format(int(v), f"0{bits}b") for v in labels]
    return GluedTreesGraph(n, seed, names, edges, columns, 0, N - 1)


def save_graph(path, g: GluedTreesGraph) -> Path:
    return write_json(path, g.to_dict())


def load_graph(path) -> GluedTreesGraph:
    d = read_json(path)
    try:
        n, names, edges = int(d["n"]), list(d["names"]), np.asarray(d["edges"], dtype=np.int64)
    except KeyError as exc:
        raise SchemaError(f"graph file lacks {exc}") from exc
    N = len(names)
    A = sp.csr_matrix((np.ones(len(edges)), (edges[:, 0], edges[:, 1])), shape=(N, N))
    dist = shortest_path(A, directed=False, unweighted=True, indices=0)
    return GluedTreesGraph(n, int(d.get("seed", -1)), names, edges, dist.astype(np.int64), 0, N - 1)


class NameOracle:
    """Neighbour oracle over vertex names; counts every query."""

    def __init__(self, graph: GluedTreesGraph):
        self.graph = graph
        self.calls = 0
        self._index = {nm: i for i, nm in enumerate(graph.names)}
        A = graph.adjacency()
        self._nbrs = [A.indices[A.indptr[i] : A.indptr[i + 1]] for i in range(graph.n_vertices)]

    def neighbors(self, name: str) -> list[str] | str:
        self.calls += 1
        i = self._index.get(name)
        if i is None:
            return INVALID
        return sorted(self.graph.names[k] for k in self._nbrs[i])


def oracle_neighbors(oracle: NameOracle, name: str) -> list[str] | str:
    return oracle.neighbors(name)


def classical_random_walk(oracle: NameOracle, seed: int, max_calls: int = 10**6) -> tuple[bool, int]:
    """Random walk from the entrance until the exit is recognized.

    The exit is the only vertex besides the entrance with exactly two
    neighbours. Returns (found, oracle calls used).
    """
    rng = make_rng(seed)
    start = oracle.graph.names[oracle.graph.entrance]
    start_calls = oracle.calls
    cur = start
    while oracle.calls - start_calls < max_calls:
        nb = oracle.neighbors(cur)
        if len(nb) == 2 and cur != start:
            return True, oracle.calls - start_calls
        cur = nb[int(rng.integers(len(nb)))]
    return False, oracle.calls - start_calls


# --- Hamiltonians ------------------------------------------------------------------


def column_adjacency(n: int) -> np.ndarray:
    ncol = 2 * n + 2
    A = np.zeros((ncol, ncol))
    for j in range(ncol - 1):
        w = 2.0 if j == n else math.sqrt(2.0)
        A[j, j + 1] = A[j + 1, j] = w
    return A


def column_projector(g: GluedTreesGraph) -> sp.csr_matrix:
    """Isometry from column states to vertices (columns of unit norm)."""
    N = g.n_vertices
    ncol = 2 * g.depth + 2
    sizes = np.bincount(g.columns, minlength=ncol)
    return sp.csr_matrix((1.0 / np.sqrt(sizes[g.columns]), (np.arange(N), g.columns)), shape=(N, ncol))


@dataclass(frozen=True, eq=False)
class GluedTreesPath:
    """Callable ``s -> H(s)`` in the column basis (dense) or vertex basis (sparse)."""

    depth: int
    alpha: float = DEFAULT_ALPHA
    graph: GluedTreesGraph | None = None
    basis: str = "column"

    def __post_init__(self):
        if self.basis not in ("column", "vertex"):
            raise SchemaError("basis must be 'column' or 'vertex'")
        if self.basis == "vertex" and self.graph is None:
            raise SchemaError("vertex basis needs a graph")
        if self.basis == "column":
            A = column_adjacency(self.depth)
            ent = np.zeros_like(A)
            ext = np.zeros_like(A)
            ent[0, 0] = ext[-1, -1] = -self.alpha
        else:
            A = self.graph.adjacency()
            N = self.graph.n_vertices
            ent = sp.csr_matrix(([-self.alpha], ([self.graph.entrance], [self.graph.entrance])), shape=(N, N))
            ext = sp.csr_matrix(([-self.alpha], ([self.graph.exit], [self.graph.exit])), shape=(N, N))
        object.__setattr__(self, "_parts", (ent, A, ext))

    @property
    def dim(self) -> int:
        return self._parts[1].shape[0]

    @property
    def entrance_index(self) -> int:
        return 0 if self.basis == "column" else self.graph.entrance

    @property
    def exit_index(self) -> int:
        return self.dim - 1 if self.basis == "column" else self.graph.exit

    def __call__(self, s: float):
        ent, A, ext = self._parts
        return (1 - s) * ent - (s * (1 - s)) * A + s * ext


def build_hs(graph: GluedTreesGraph, s: float, alpha: float = DEFAULT_ALPHA, basis: str = "vertex") -> SparseHermitian:
    path = GluedTreesPath(graph.depth, alpha, graph, basis)
    return SparseHermitian(sp.csr_matrix(path(s)), basis)


@dataclass(frozen=True)
class ColumnCheck:
    max_leakage: float
    max_residual: float
    max_dense_deviation: float | None


def column_reduce_check(graph: GluedTreesGraph, s_grid: Sequence[float], alpha: float = DEFAULT_ALPHA, tol: float = 1e-9) -> ColumnCheck:
    """Verify that column states span an invariant subspace of ``H(s)``.

    Reports the leakage ``|(1 - P P^T) H P|``, the residual of every lifted
    column eigenpair in the vertex basis (bounding its distance to the vertex
    spectrum), and for small graphs a direct comparison with dense
    vertex eigenvalues.
    """
    P = column_projector(graph)
    vtx = GluedTreesPath(graph.depth, alpha, graph, "vertex")
    col = GluedTreesPath(graph.depth, alpha, None, "column")
    leak = resid = 0.0
    dense_dev = 0.0 if graph.n_vertices <= 1024 else None
    for s in s_grid:
        H = sp.csr_matrix(vtx(s))
        HP = (H @ P).toarray()
        Pd = P.toarray()
        leak = max(leak, float(np.abs(HP - Pd @ (Pd.T @ HP)).max()))
        Hc = col(s)
        w, V = np.linalg.eigh(Hc)
        lifted = P @ V
        resid = max(resid, float(np.linalg.norm(H @ lifted - lifted * w, axis=0).max()))
        if dense_dev is not None:
            wv = np.linalg.eigvalsh(H.toarray())
            dense_dev = max(dense_dev, float(np.max(np.min(np.abs(w[:, None] - wv[None, :]), axis=1))))
    if leak > tol:
        raise SubspaceLeakageError(f"column subspace leaks: {leak:.3e}")
    return ColumnCheck(leak, resid, dense_dev)


# --- spectra and runs --------------------------------------------------------------------


@dataclass(frozen=True)
class SpectrumProfile:
    s: np.ndarray
    levels: np.ndarray  # (len(s), 3)
    s_min_gap10: float
    min_gap10: float
    min_gap21: float
    s_min_gap21: float
    symmetry_residual: float

    def rows(self):
        l0, l1, l2 = self.levels.T
        return zip(self.s, l0, l1, l2, l1 - l0, l2 - l1)

    def write_csv(self, path, meta=None) -> Path:
        return write_csv(path, ["s", "lambda0", "lambda1", "lambda2", "gap10", "gap21"], self.rows(), meta)


def spectrum_profile(n: int, s_grid: Sequence[float] | None = None, alpha: float = DEFAULT_ALPHA) -> SpectrumProfile:
    """Three lowest column-basis levels along the path and their gaps.

    The smallest ``gap10`` is located in ``[0, 1/2]`` (the spectrum is
    mirror symmetric under ``s -> 1 - s``). The smallest ``gap21`` is taken
    between that crossing and its mirror image.
    """
    path = GluedTreesPath(n, alpha)
    s = np.linspace(0, 1, 257) if s_grid is None else np.asarray(s_grid, dtype=float)
    lev = np.array([np.linalg.eigvalsh(path(x))[:3] for x in s])
    mirror = np.array([np.linalg.eigvalsh(path(1 - x))[:2] for x in s])
    sym = float(np.max(np.abs(lev[:, :2] - mirror)))
    s10, g10 = min_gap_along_path(path, 256, (0.0, 0.5))
    lo, hi = s10, 1 - s10
    s21, g21 = min_gap_along_path(path, 256, (lo, hi), levels=(1, 2)) if hi > lo else (0.5, float("nan"))
    return SpectrumProfile(s, lev, s10, g10, g21, s21, sym)


@dataclass(frozen=True)
class DiabaticRun:
    total_time: float
    initial: str
    exit_probability: float
    s: np.ndarray
    populations: np.ndarray  # (len(s), 2) overlaps with two lowest levels
    norm_drift: float
    step_count: int

    def to_dict(self) -> dict:
        return {
            "T": self.total_time,
            "initial": self.initial,
            "exit_probability": self.exit_probability,
            "s": self.s.tolist(),
            "p0": self.populations[:, 0].tolist(),
            "p1": self.populations[:, 1].tolist(),
            "norm_drift": self.norm_drift,
            "step_count": self.step_count,
        }


def diabatic_run(
    n: int,
    total_time: float,
    initial: str = "entrance",
    seed: int = 0,
    alpha: float = DEFAULT_ALPHA,
    graph: GluedTreesGraph | None = None,
    max_dt: float = 0.5,
    min_steps: int = 400,
    s_initial: float = 1e-3,
    samples: int = 33,
) -> DiabaticRun:
    """Evolve along ``s = t/T`` and return the probability of ending at the exit.

    ``initial="entrance"`` starts in the entrance state (the ground state at
    ``s = 0``). ``"randomized_manifold"`` picks, with equal probability from
    the seed, the ground or first excited state of ``H(s_initial)``.
    Uses the column basis unless a graph is supplied.
    """
    path = GluedTreesPath(n, alpha, graph, "vertex" if graph is not None else "column")
    dim = path.dim
    if initial == "entrance":
        psi0 = np.zeros(dim, dtype=complex)
        psi0[path.entrance_index] = 1.0
    elif initial == "randomized_manifold":
        H0 = path(s_initial)
        H0 = H0.toarray() if sp.issparse(H0) else H0
        V = np.linalg.eigh(H0)[1]
        pick = int(make_rng(seed).integers(0, 2))
        psi0 = V[:, pick].astype(complex)
    else:
        raise SchemaError(f"unknown initial state {initial!r}")
    T = float(total_time)
    s_samples = np.linspace(0, 1, max(samples, 2))
    total_steps = max(min_steps, math.ceil(T / max_dt))
    pops = np.zeros((len(s_samples), 2))
    psi, drift, nsteps = psi0, 0.0, 0
    for k, s in enumerate(s_samples):
        if k and T > 0:
            prev = s_samples[k - 1]
            # one segment of the global schedule s = t / T
            seg = make_schedule("custom", times=[0.0, (s - prev) * T], values=[prev, s])
            m = max(1, math.ceil(total_steps * (s - prev)))
            res = evolve(path, seg, psi, order=4, steps=m, target=None, samples=1)
            psi, drift, nsteps = res.final_state, max(drift, res.norm_drift), nsteps + m
        H = path(s)
        H = H.toarray() if sp.issparse(H) else H
        V = np.linalg.eigh(H)[1][:, :2]
        pops[k] = np.abs(V.conj().T @ psi) ** 2
    p_exit = float(abs(psi[path.exit_index]) ** 2)
    return DiabaticRun(T, initial, p_exit, s_samples, pops, drift, nsteps)
