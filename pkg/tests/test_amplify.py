import networkx as nx
import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from annealing_lab.amplify import (
    block_eigenvalues,
    build_amplified,
    check_coloring,
    gap_scaling_study,
    greedy_edge_coloring,
    misra_gries_coloring,
    relevant_gap,
    transition_graph,
    verify_amplified_spectrum,
)
from annealing_lab.errors import ColoringError
from annealing_lab.ising import build_ising, gibbs, random_ising
from annealing_lab.markov import chain_spectrum, metropolis_matrix
from annealing_lab.problems import GroverInstance, grover_sa_chain
from annealing_lab.qmap import h_from_stochastic, h_metropolis_ff

GOLDEN = (np.sqrt(5) - 1) / 2


def test_single_spin_amplified_spectrum():
    E = build_ising(1, [1.0], None)
    amp = build_amplified(transition_graph(metropolis_matrix(E, np.log(2))))
    evA = np.linalg.eigvalsh(amp.a_matrix.toarray())
    assert np.allclose(evA, [-np.sqrt(0.625), 0, 0, np.sqrt(0.625)], atol=1e-14)
    assert np.sqrt(0.625) == pytest.approx(0.790569415, abs=1e-9)
    rep = verify_amplified_spectrum(amp)
    assert rep.base_gap == pytest.approx(0.625)
    assert rep.relevant_gap == pytest.approx(GOLDEN * np.sqrt(0.625), rel=1e-12)


def test_edge_states_orthogonal_to_gibbs():
    E = random_ising(4, 2)
    S = metropolis_matrix(E, 1.3)
    g = transition_graph(S)
    psi = np.sqrt(gibbs(E, 1.3).probabilities)
    ai, aj = g.edge_vectors()
    overlaps = ai * psi[g.edges[:, 0]] + aj * psi[g.edges[:, 1]]
    assert np.max(np.abs(overlaps)) < 1e-15


def test_edge_projectors_sum_to_hamiltonian():
    E = random_ising(3, 0)
    S = metropolis_matrix(E, 0.8)
    amp = build_amplified(transition_graph(S))
    base = sum(t @ t for t in amp.sqrt_terms)
    assert abs(base - h_from_stochastic(S).matrix).max() < 1e-15


def test_single_flip_colors_are_sites():
    E = random_ising(4, 0)
    g = transition_graph(metropolis_matrix(E, 1.0))
    assert g.q == 4 and g.max_degree == 4
    check_coloring(g.edges, g.colors, g.n_vertices)


@pytest.mark.parametrize("seed,beta", [(0, 0.0), (1, 1.0), (2, 2.0), (3, 4.0)])
def test_graph_and_term_routes_agree(seed, beta):
    E = random_ising(3, seed)
    a = build_amplified(transition_graph(metropolis_matrix(E, beta)))
    b = build_amplified(h_metropolis_ff(E, beta), delta_bound=a.delta_bound)
    assert abs(a.h_tilde.matrix - b.h_tilde.matrix).max() < 1e-15


@pytest.mark.parametrize("seed", range(3))
def test_restricted_block(seed):
    E = random_ising(3, seed)
    S = metropolis_matrix(E, 1.0)
    amp = build_amplified(transition_graph(S))
    H = h_from_stochastic(S).toarray()
    lam, V = np.linalg.eigh(H)
    A = amp.a_matrix.toarray()
    for j in range(1, len(lam)):
        v0 = amp.lift(V[:, j])
        w = A @ v0
        # A|lam, 0> has squared norm lam and lies in the ancilla-excited sector
        assert w @ w == pytest.approx(lam[j], abs=1e-13)
        perp = w / np.linalg.norm(w)
        block = np.array([[v0 @ A @ v0, v0 @ A @ perp], [perp @ A @ v0, perp @ A @ perp]])
        assert np.allclose(block, [[0, np.sqrt(lam[j])], [np.sqrt(lam[j]), 0]], atol=1e-12)


def test_target_is_zero_mode():
    E = random_ising(4, 5)
    amp = build_amplified(transition_graph(metropolis_matrix(E, 2.0)))
    psi = amp.lift(np.sqrt(gibbs(E, 2.0).probabilities))
    assert np.linalg.norm(amp.h_tilde.matrix @ psi) < 1e-14
    assert verify_amplified_spectrum(amp).zero_degeneracy == 1


def test_block_eigenvalues_golden_ratio():
    lo, hi = block_eigenvalues(0.04, 0.2)
    assert abs(lo) == pytest.approx(GOLDEN * 0.2)
    assert hi == pytest.approx(0.2 / GOLDEN)


def test_relevant_gap_skips_target():
    assert relevant_gap([0.0, -0.3, 0.5, 1e-17]) == pytest.approx(1e-17)
    assert relevant_gap([1e-16, -0.3, 0.5]) == 0.3


def test_invalid_delta_rejected():
    E = random_ising(2, 0)
    g = transition_graph(metropolis_matrix(E, 1.0))
    with pytest.raises(ValueError):
        build_amplified(g, delta_bound=0.0)
    with pytest.raises(ValueError):
        build_amplified(g, delta_bound=-1.0)


def test_coloring_violation_rejected():
    E = random_ising(2, 0)
    g = transition_graph(metropolis_matrix(E, 1.0))
    bad = type(g)(g.n_vertices, g.edges, g.p_forward, g.p_backward, np.zeros_like(g.colors))
    with pytest.raises(ColoringError):
        build_amplified(bad)


def test_complete_graph_greedy_uses_n_minus_one_colors():
    N = 16
    edges = np.array([(i, j) for i in range(N) for j in range(i + 1, N)])
    c = greedy_edge_coloring(edges, N)
    check_coloring(edges, c, N)
    assert c.max() + 1 == N - 1


@given(st.integers(2, 25), st.integers(0, 10_000), st.floats(0.05, 0.9))
@settings(max_examples=60, deadline=None)
def test_coloring_proper_within_degree_plus_one(nv, seed, p):
    G = nx.gnp_random_graph(nv, p, seed=seed)
    edges = np.array(sorted(G.edges()), dtype=np.int64).reshape(-1, 2)
    if not len(edges):
        return
    D = max(d for _, d in G.degree())
    for c in (greedy_edge_coloring(edges, nv), misra_gries_coloring(edges, nv)):
        check_coloring(edges, c, nv)
        assert c.max() + 1 <= D + 1


def test_misra_gries_on_petersen():
    G = nx.petersen_graph()  # class two: needs D + 1 = 4 colors
    edges = np.array(sorted(G.edges()))
    c = misra_gries_coloring(edges, 10)
    check_coloring(edges, c, 10)
    assert c.max() + 1 == 4


def test_sparsity_scales_with_colors():
    E = random_ising(5, 0)
    S = metropolis_matrix(E, 1.0)
    amp = build_amplified(transition_graph(S))
    H = h_from_stochastic(S)
    assert amp.h_tilde.nnz <= 2 * amp.n_colors * H.nnz


def test_grover_amplified_gap_closed_form():
    for n in (3, 4):
        S = grover_sa_chain(GroverInstance(n, 1, -1))
        N = 2**n
        base = (2 * N - 1) / N**2  # two-level lumping at beta = log N
        assert chain_spectrum(S).gap == pytest.approx(base, rel=1e-12)
        rows = gap_scaling_study([(f"n{n}", S)])
        assert rows[0].amplified_gap == pytest.approx(GOLDEN * np.sqrt(base), rel=1e-10)
        assert rows[0].n_colors == N - 1
