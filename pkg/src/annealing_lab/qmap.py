"""Quantum Hamiltonians derived from reversible Markov chains.

The map sends a chain ``S`` satisfying detailed balance for ``pi`` to
``H = 1 - sqrt(S o S^T)`` (entrywise), whose ground state is ``sqrt(pi)``
with energy zero and whose spectrum is one minus the spectrum of ``S``.
"""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np
import scipy.sparse as sp

from .errors import DetailedBalanceError, NotFrustrationFreeError
from .ising import ObjectiveFunction, gibbs, site_energy_diff
from .markov import DETAILED_BALANCE_TOL, StochasticMatrix, single_flip_kappa, verify_detailed_balance
from .operators import SparseHermitian, StateVector, exact_spectrum, sum_sigma_x


def h_from_stochastic(S: StochasticMatrix, tol: float = DETAILED_BALANCE_TOL) -> SparseHermitian:
    """Hamiltonian with off-diagonal ``-sqrt(Pr(i|j) Pr(j|i))`` and diagonal ``1 - Pr(j|j)``."""
    pi = S.stationary()
    res = verify_detailed_balance(S, pi)
    if res > tol:
        raise DetailedBalanceError(f"detailed balance residual {res:.3e} exceeds {tol:.1e}")
    M = S.matrix.tocsr().copy()
    M.setdiag(0.0)
    M.eliminate_zeros()
    off = M.multiply(M.T).sqrt()
    # 1 - Pr(j|j) equals the escape mass; use it directly to avoid cancellation
    H = sp.diags(S.escape) - off
    return SparseHermitian(sp.csr_matrix(H), "computational")


@dataclass(frozen=True, eq=False)
class FrustrationFreeHamiltonian:
    """Sum of local terms, each positive semidefinite and annihilating ``sqrt(pi)``.

    Term ``l`` acts on the pair ``(s, flip_l s)`` as the rank-one block
    ``chi [[e^{b x}, -1], [-1, e^{-b x}]]`` with ``x`` the half energy drop.
    """

    total: SparseHermitian
    terms: list[SparseHermitian]
    beta: float
    chi: float
    kappa: float
    objective: ObjectiveFunction


def _site_term(N: int, l: int, diag: np.ndarray, coupling: float) -> sp.csr_matrix:
    idx = np.arange(N)
    rows = np.concatenate([idx, idx ^ (1 << l)])
    data = np.concatenate([diag, np.full(N, -coupling)])
    return sp.csr_matrix((data, (rows, np.tile(idx, 2))), shape=(N, N))


def h_metropolis_ff(E: ObjectiveFunction, beta: float, check: bool = True, tol: float = 1e-10) -> FrustrationFreeHamiltonian:
    """Single-flip Metropolis Hamiltonian as a sum of per-site terms.

    Each term is ``chi exp(beta x_l) - chi sigma_x^l`` where ``x_l`` is the
    diagonal operator of half energy drops on flipping site ``l``.
    With ``check`` each term is verified to be positive semidefinite and to
    annihilate the square-root Gibbs state.
    """
    n, N = E.n, E.dim
    kappa = single_flip_kappa(E)
    chi = float(np.exp(-beta * kappa) / n)
    terms, diags = [], []
    for l in range(n):
        d = chi * np.exp(beta * site_energy_diff(E, l))
        diags.append(d)
        terms.append(SparseHermitian(_site_term(N, l, d, chi)))
    total = sp.diags(np.sum(diags, axis=0)) - chi * sum_sigma_x(n)
    ff = FrustrationFreeHamiltonian(SparseHermitian(sp.csr_matrix(total)), terms, float(beta), chi, kappa, E)
    if check:
        psi = np.sqrt(gibbs(E, beta).probabilities)
        for l, (T, d) in enumerate(zip(terms, diags)):
            partner = d[np.arange(N) ^ (1 << l)]
            # 2x2 blocks [[a, -chi], [-chi, b]]: PSD iff a, b >= 0 and ab >= chi^2
            if np.any(d < 0) or np.any(d * partner < chi**2 * (1 - 1e-9)):
                raise NotFrustrationFreeError(f"term {l} is not positive semidefinite")
            r = np.linalg.norm(T.matrix @ psi)
            if r > tol * max(chi, np.max(d)):
                raise NotFrustrationFreeError(f"term {l} does not annihilate the Gibbs state ({r:.2e})")
    return ff


def sqrt_gibbs_state(E: ObjectiveFunction, beta: float) -> StateVector:
    return StateVector(gibbs(E, beta).sqrt_amplitudes())


def eqa_hamiltonian(E: ObjectiveFunction, beta_m: float, gamma: float) -> SparseHermitian:
    """``sum_l chi exp(beta_m x_l) - gamma sum_l sigma_x^l`` with ``chi`` taken at ``beta_m``."""
    n = E.n
    chi = np.exp(-beta_m * single_flip_kappa(E)) / n
    diag = sum(chi * np.exp(beta_m * site_energy_diff(E, l)) for l in range(n))
    return SparseHermitian(sp.csr_matrix(sp.diags(diag) - gamma * sum_sigma_x(n)))


def transverse_ising(E: ObjectiveFunction, gamma: float) -> SparseHermitian:
    """``diag(E) - gamma sum_l sigma_x^l``."""
    return SparseHermitian(sp.csr_matrix(sp.diags(E.energies()) - gamma * sum_sigma_x(E.n)))


def ground_state(H: SparseHermitian) -> tuple[float, StateVector, float]:
    """Ground energy, ground state and spectral gap."""
    sp_ = exact_spectrum(H, k=2, eigenvectors=True)
    return float(sp_.eigenvalues[0]), sp_.ground_state(H.basis_tag), sp_.gap


def fit_gap_decay(E: ObjectiveFunction, betas, gaps) -> float:
    """Least-squares decay rate ``p`` in ``gap ~ C exp(-p beta n)``."""
    x = np.asarray(betas, dtype=float) * E.n
    y = np.log(np.asarray(gaps, dtype=float))
    slope = np.polyfit(x, y, 1)[0]
    return float(-slope)
