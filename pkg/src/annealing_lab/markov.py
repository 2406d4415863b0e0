"""Metropolis-type Markov chains and simulated annealing."""
from __future__ import annotations

from dataclasses import dataclass
from pathlib import Path
from typing import Callable

import numpy as np
import scipy.sparse as sp
from scipy.sparse.linalg import eigsh

from .errors import DetailedBalanceError, GuardExceededError
from .ising import ENUMERATION_LIMIT, ObjectiveFunction, check_enumerable, gibbs
from .rng import make_rng
from .serialization import write_csv, write_json

DENSE_SPECTRUM_LIMIT = 4096
DETAILED_BALANCE_TOL = 1e-10


@dataclass(frozen=True, eq=False)
class StochasticMatrix:
    """Column-stochastic transition matrix, ``matrix[i, j] = Pr(i | j)``.

    ``escape[j]`` holds the total off-diagonal mass of column ``j``; it is
    kept separately so that ``1 - Pr(j | j)`` never has to be formed by
    cancellation.
    """

    matrix: sp.csr_matrix
    beta: float
    chi: float
    kappa: float
    neighborhood: str
    objective: ObjectiveFunction
    escape: np.ndarray

    @property
    def dim(self) -> int:
        return self.matrix.shape[0]

    def stationary(self) -> np.ndarray:
        return gibbs(self.objective, self.beta).probabilities


def single_flip_kappa(E: ObjectiveFunction) -> float:
    """Largest single-flip ``|Delta E|`` by exhaustive scan."""
    vals = E.energies()
    idx = np.arange(E.dim)
    return float(max(np.max(np.abs(vals[idx ^ (1 << l)] - vals)) for l in range(E.n)))


def metropolis_matrix(E: ObjectiveFunction, beta: float) -> StochasticMatrix:
    """Single-flip chain with ``Pr(i|j) = chi exp(beta (E_j - E_i) / 2)``.

    ``chi = exp(-beta kappa) / n`` keeps every column substochastic off the
    diagonal; the diagonal takes the remaining mass.
    """
    check_enumerable(E.n)
    n, N = E.n, E.dim
    vals = E.energies()
    kappa = single_flip_kappa(E)
    chi = np.exp(-beta * kappa) / n
    cols = np.arange(N)
    rows, data = [], []
    escape = np.zeros(N)
    for l in range(n):
        r = cols ^ (1 << l)
        p = chi * np.exp(0.5 * beta * (vals - vals[r]))
        rows.append(r)
        data.append(p)
        escape += p
    rows.append(cols)
    data.append(1.0 - escape)
    S = sp.csr_matrix(
        (np.concatenate(data), (np.concatenate(rows), np.tile(cols, n + 1))), shape=(N, N)
    )
    return StochasticMatrix(S, float(beta), float(chi), kappa, "single_flip", E, escape)


def metropolis_complete_graph(E: ObjectiveFunction, beta: float) -> StochasticMatrix:
    """Metropolis chain with a uniform proposal over all configurations.

    ``Pr(i|j) = min(1, exp(-beta (E_i - E_j))) / N`` for ``i != j``.
    """
    check_enumerable(E.n)
    vals = E.energies()
    N = E.dim
    dE = vals[:, None] - vals[None, :]
    P = np.exp(-beta * np.maximum(dE, 0.0)) / N
    np.fill_diagonal(P, 0.0)
    escape = P.sum(axis=0)
    P[np.arange(N), np.arange(N)] = 1.0 - escape
    kappa = float(vals.max() - vals.min())
    return StochasticMatrix(sp.csr_matrix(P), float(beta), 1.0 / N, kappa, "complete_graph", E, escape)


def verify_detailed_balance(S: StochasticMatrix | sp.spmatrix, pi: np.ndarray) -> float:
    """Largest ``|Pr(i|j) pi_j - Pr(j|i) pi_i|`` over all pairs."""
    M = S.matrix if isinstance(S, StochasticMatrix) else sp.csr_matrix(S)
    F = sp.csr_matrix(M.multiply(np.asarray(pi)[None, :]))
    R = F - F.T
    return float(abs(R).max()) if R.nnz else 0.0


def symmetrized(S: StochasticMatrix, pi: np.ndarray | None = None, tol: float = DETAILED_BALANCE_TOL) -> sp.csr_matrix:
    """Similarity transform ``D^{-1/2} S D^{1/2}`` with ``D = diag(pi)``.

    For a column-stochastic ``S`` in detailed balance this is symmetric.
    """
    pi = S.stationary() if pi is None else np.asarray(pi)
    res = verify_detailed_balance(S, pi)
    if res > tol:
        raise DetailedBalanceError(f"detailed balance residual {res:.3e} exceeds {tol:.1e}")
    C = S.matrix.tocoo()
    logpi = np.log(pi)
    data = C.data * np.exp(0.5 * (logpi[C.col] - logpi[C.row]))
    M = sp.csr_matrix((data, (C.row, C.col)), shape=C.shape)
    return (M + M.T) * 0.5


@dataclass(frozen=True)
class ChainSpectrum:
    beta: float
    eigenvalues: np.ndarray  # descending

    @property
    def gap(self) -> float:
        return float(self.eigenvalues[0] - self.eigenvalues[1])

    def to_dict(self) -> dict:
        return {"beta": self.beta, "eigenvalues": [float(v) for v in self.eigenvalues], "gap": self.gap}


def chain_spectrum(S: StochasticMatrix, k: int | None = None, tol: float = DETAILED_BALANCE_TOL) -> ChainSpectrum:
    """Eigenvalues of a reversible chain, largest first.

    Dense for up to 4096 states; beyond that only the top ``k`` (default 6)
    are computed with Lanczos.
    """
    M = symmetrized(S, tol=tol)
    if S.dim <= DENSE_SPECTRUM_LIMIT:
        ev = np.linalg.eigvalsh(M.toarray())[::-1]
        if k is not None:
            ev = ev[:k]
    else:
        k = k or 6
        ev = np.sort(eigsh(M, k=k, which="LA", return_eigenvectors=False, tol=1e-12))[::-1]
    return ChainSpectrum(S.beta, ev)


def gap_lower_bound(E: ObjectiveFunction, beta: float) -> float:
    """Comparison bound ``gap(beta) >= (2/n) exp(-beta (kappa + 2 e_max))``.

    Follows from comparing Dirichlet forms and variances of the single-flip
    chain at ``beta`` against the uniform walk at ``beta = 0``.
    """
    kappa = single_flip_kappa(E)
    return 2.0 / E.n * np.exp(-beta * (kappa + 2.0 * E.e_max))


def write_spectrum_json(path: str | Path, spectra: list[ChainSpectrum], meta: dict | None = None) -> Path:
    return write_json(path, {"meta": meta or {}, "spectra": [s.to_dict() for s in spectra]})


# --- simulated annealing -----------------------------------------------------


@dataclass(frozen=True)
class SARun:
    """Trajectory of one annealing chain, recorded once per sweep."""

    seed: int
    steps: np.ndarray
    betas: np.ndarray
    energies: np.ndarray
    config_indices: np.ndarray
    final_index: int
    final_energy: float
    best_index: int
    best_energy: float
    acceptance_rate: float

    def write_trajectory(self, path: str | Path, meta: dict | None = None) -> Path:
        rows = zip(self.steps, self.betas, self.energies, self.config_indices)
        return write_csv(path, ["step", "beta", "energy", "config_index"], rows, meta)


def sa_run(
    E: ObjectiveFunction,
    schedule: Callable[[float], float],
    sweeps: int,
    seed: int,
    initial: int | None = None,
    kappa: float | None = None,
    record_every: int = 1,
) -> SARun:
    """Single-flip simulated annealing with the Metropolis rule above.

    Each move picks a site uniformly and flips it with probability
    ``exp(-beta kappa) exp(-beta dE / 2)``, which reproduces the transition
    matrix of :func:`metropolis_matrix`. ``schedule(t)`` gives beta at sweep
    ``t`` and must be nondecreasing. Uses one Philox stream per seed.
    """
    if sweeps < 0:
        raise ValueError("sweeps must be nonnegative")
    n = E.n
    if initial is None and n > 62:
        raise GuardExceededError("basis indices limited to 62 spins")
    rng = make_rng(seed)
    if kappa is None:
        kappa = single_flip_kappa(E) if n <= ENUMERATION_LIMIT else E.kappa_bound()
    cur = int(rng.integers(0, 1 << n)) if initial is None else int(initial)
    spins = 1.0 - 2.0 * ((cur >> np.arange(n)) & 1)
    tabled = E.table is not None
    if tabled:
        table = E.table
        energy = float(table[cur])
    else:
        h, J = E.h, E.J
        field = h + 2.0 * J @ spins
        energy = float(E.energy(spins))

    betas = np.array([schedule(t) for t in range(sweeps)], dtype=float)
    if np.any(np.diff(betas) < -1e-15):
        raise ValueError("annealing schedule must be nondecreasing in beta")
    n_rec = sweeps // record_every
    rec_step = np.empty(n_rec + 1, dtype=np.int64)
    rec_beta = np.empty(n_rec + 1)
    rec_e = np.empty(n_rec + 1)
    rec_idx = np.empty(n_rec + 1, dtype=np.int64)
    rec_step[0], rec_beta[0], rec_e[0], rec_idx[0] = 0, betas[0] if sweeps else 0.0, energy, cur
    best_idx, best_e = cur, energy
    accepted = 0
    r = 1
    for t in range(sweeps):
        beta = betas[t]
        sites = rng.integers(0, n, n)
        logu = np.log(rng.random(n))
        base = -beta * kappa
        for l, lu in zip(sites.tolist(), logu.tolist()):
            if tabled:
                new = cur ^ (1 << l)
                dE = float(table[new] - energy)
            else:
                dE = -2.0 * spins[l] * field[l]
            if lu < base - 0.5 * beta * dE:
                accepted += 1
                energy += dE
                cur ^= 1 << l
                if not tabled:
                    spins[l] = -spins[l]
                    field += 4.0 * J[:, l] * spins[l]
                if energy < best_e:
                    best_e, best_idx = energy, cur
        if (t + 1) % record_every == 0:
            rec_step[r], rec_beta[r], rec_e[r], rec_idx[r] = t + 1, beta, energy, cur
            r += 1
    moves = sweeps * n
    return SARun(
        seed=seed,
        steps=rec_step[:r],
        betas=rec_beta[:r],
        energies=rec_e[:r],
        config_indices=rec_idx[:r],
        final_index=cur,
        final_energy=float(E.energies()[cur]) if n <= ENUMERATION_LIMIT else energy,
        best_index=best_idx,
        best_energy=float(E.energies()[best_idx]) if n <= ENUMERATION_LIMIT else best_e,
        acceptance_rate=accepted / moves if moves else 0.0,
    )


def empirical_distribution(indices: np.ndarray, N: int) -> np.ndarray:
    counts = np.bincount(np.asarray(indices, dtype=np.int64), minlength=N)
    return counts / counts.sum()


def total_variation(p: np.ndarray, q: np.ndarray) -> float:
    return 0.5 * float(np.abs(np.asarray(p) - np.asarray(q)).sum())
