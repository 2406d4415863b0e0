import numpy as np
import pytest
import scipy.sparse as sp
from hypothesis import given, settings, strategies as st

from annealing_lab.errors import ConvergenceError, DetailedBalanceError, NotHermitianError
from annealing_lab.ising import build_ising, gibbs, random_ising
from annealing_lab.markov import chain_spectrum, metropolis_matrix
from annealing_lab.operators import (
    SparseHermitian,
    StateVector,
    dump_operator,
    exact_spectrum,
    fidelity,
    load_operator,
    nearest_eigenvalues,
    sigma_x_site,
)
from annealing_lab.qmap import (
    eqa_hamiltonian,
    fit_gap_decay,
    ground_state,
    h_from_stochastic,
    h_metropolis_ff,
    sqrt_gibbs_state,
    transverse_ising,
)


def test_single_spin_hamiltonian_closed_form():
    E = build_ising(1, [1.0], None)
    H = h_from_stochastic(metropolis_matrix(E, np.log(2))).toarray()
    assert np.allclose(H, [[0.5, -0.25], [-0.25, 0.125]])
    assert np.allclose(exact_spectrum(H).eigenvalues, [0.0, 0.625])


@given(st.integers(1, 6), st.integers(0, 10_000), st.sampled_from([0.0, 0.5, 1.0, 2.0]))
@settings(max_examples=30, deadline=None)
def test_ground_state_is_sqrt_gibbs(n, seed, beta):
    E = random_ising(n, seed)
    H = h_from_stochastic(metropolis_matrix(E, beta))
    sp_ = exact_spectrum(H, k=2, eigenvectors=True)
    assert abs(sp_.eigenvalues[0]) < 1e-12
    assert sp_.eigenvalues[1] > 0
    assert fidelity(sp_.ground_state(), sqrt_gibbs_state(E, beta)) > 1 - 1e-10


@pytest.mark.parametrize("seed", range(4))
def test_spectrum_is_one_minus_chain_spectrum(seed):
    E = random_ising(4, seed)
    S = metropolis_matrix(E, 1.2)
    h = np.linalg.eigvalsh(h_from_stochastic(S).toarray())
    s = chain_spectrum(S).eigenvalues
    assert np.allclose(np.sort(1 - s), h, atol=1e-12)


@pytest.mark.parametrize("seed,beta", [(0, 0.0), (1, 0.7), (2, 2.0), (3, 4.0)])
def test_term_sum_matches_stochastic_route(seed, beta):
    E = random_ising(5, seed)
    a = h_from_stochastic(metropolis_matrix(E, beta)).matrix
    b = h_metropolis_ff(E, beta).total.matrix
    assert abs(a - b).max() <= 1e-12


def test_terms_are_psd_and_annihilate_gibbs():
    E = random_ising(4, 1)
    ff = h_metropolis_ff(E, 1.5)
    psi = sqrt_gibbs_state(E, 1.5).amplitudes
    for T in ff.terms:
        w = np.linalg.eigvalsh(T.toarray())
        assert w.min() > -1e-14
        assert np.linalg.norm(T.matrix @ psi) < 1e-14
    assert abs(sum(t.matrix for t in ff.terms) - ff.total.matrix).max() < 1e-15


def test_detailed_balance_violation_rejected():
    E = random_ising(3, 0)
    S = metropolis_matrix(E, 1.0)
    M = S.matrix.tolil()
    M[1, 0] += 1e-3
    bad = type(S)(M.tocsr(), S.beta, S.chi, S.kappa, S.neighborhood, S.objective, S.escape)
    with pytest.raises(DetailedBalanceError):
        h_from_stochastic(bad)


def test_eqa_at_chi_coincides_with_term_sum():
    E = random_ising(3, 2)
    ff = h_metropolis_ff(E, 1.0)
    H = eqa_hamiltonian(E, 1.0, ff.chi)
    assert abs(H.matrix - ff.total.matrix).max() < 1e-15


def test_transverse_ising_limits():
    E = random_ising(3, 0)
    # large field: ground state is the uniform superposition
    _, psi, _ = ground_state(transverse_ising(E, 1e6))
    assert fidelity(psi, np.full(8, 1 / np.sqrt(8))) > 1 - 1e-9
    # zero field: diagonal
    H = transverse_ising(E, 0.0)
    assert np.allclose(H.toarray(), np.diag(E.energies()))


def test_gap_decay_rate_positive():
    E = random_ising(3, 1)
    betas = [0.5, 1.0, 2.0, 3.0]
    gaps = [chain_spectrum(metropolis_matrix(E, b)).gap for b in betas]
    p = fit_gap_decay(E, betas, gaps)
    assert np.isfinite(p) and p > 0


# --- operator container -------------------------------------------------------------


def test_hermiticity_enforced():
    with pytest.raises(NotHermitianError):
        SparseHermitian(sp.csr_matrix(np.array([[0, 1.0], [0.5, 0]])))
    with pytest.raises(NotHermitianError):
        SparseHermitian(sp.csr_matrix(np.ones((2, 3))))
    SparseHermitian(sp.csr_matrix(np.array([[1, 1j], [-1j, 0]])))


def test_state_norm_enforced():
    with pytest.raises(ValueError):
        StateVector(np.array([1.0, 1.0]))
    assert StateVector.normalized([3.0, 4.0]).amplitudes[1] == pytest.approx(0.8)


def test_operator_dump_roundtrip(tmp_path):
    E = random_ising(3, 0)
    H = h_metropolis_ff(E, 0.9).total
    G = load_operator(dump_operator(tmp_path / "h.txt", H))
    assert G.basis_tag == H.basis_tag and G.dim == H.dim
    assert abs(G.matrix - H.matrix).max() == 0.0


def test_complex_operator_roundtrip(tmp_path):
    H = SparseHermitian(sp.csr_matrix(np.array([[1, 0.3j], [-0.3j, 2]])), "column")
    G = load_operator(dump_operator(tmp_path / "c.txt", H))
    assert abs(G.matrix - H.matrix).max() == 0.0 and G.basis_tag == "column"


def test_sigma_x_flips_site():
    X = sigma_x_site(3, 1)
    e = np.zeros(8)
    e[0] = 1
    assert np.flatnonzero(X @ e).tolist() == [2]


def test_nearest_eigenvalues_matrix_free_matches_dense():
    rng = np.random.default_rng(0)
    N = 1500
    d = np.concatenate([[-0.02, 0.01, 0.03], rng.uniform(0.5, 3.0, N - 3) * rng.choice([-1, 1], N - 3)])
    A = sp.diags(d) + sp.diags(0.01 * rng.normal(size=N - 1), 1)
    A = sp.csr_matrix(A + A.T) * 0.5
    dense = np.linalg.eigvalsh(A.toarray())
    got = nearest_eigenvalues(A, 0.0, k=3)
    want = dense[np.argsort(np.abs(dense))[:3]]
    assert np.allclose(np.sort(got), np.sort(want), atol=1e-9)


def test_nearest_eigenvalues_reports_nonconvergence():
    rng = np.random.default_rng(0)
    A = sp.diags(rng.normal(size=1500))
    with pytest.raises(ConvergenceError):
        nearest_eigenvalues(A, 0.0, k=3, max_iter=5)


def test_lanczos_branch_of_exact_spectrum():
    E = random_ising(13, 0)
    H = h_metropolis_ff(E, 0.0, check=False).total
    sp_ = exact_spectrum(H, k=2, eigenvectors=True)
    assert abs(sp_.eigenvalues[0]) < 1e-9
    assert sp_.eigenvalues[1] == pytest.approx(2 / 13, rel=1e-8)
