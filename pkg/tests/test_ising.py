import itertools

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from annealing_lab.errors import GuardExceededError, SchemaError
from annealing_lab.ising import (
    Configuration,
    all_spins,
    brute_force_minima,
    build_ising,
    energy_table,
    ferromagnet,
    gibbs,
    index_from_spins,
    load_instance,
    random_ising,
    save_instance,
    site_energy_diff,
    spins_from_index,
    thermal_expectation,
)


def naive_energy(h, J, spins):
    n = len(h)
    e = sum(h[l] * spins[l] for l in range(n))
    for l in range(n):
        for m in range(n):
            if l != m:
                e += J[l][m] * spins[l] * spins[m]
    return e


def test_single_spin_energies():
    E = build_ising(1, [1.0], None)
    assert E.energy([1]) == 1.0
    assert E.energy([-1]) == -1.0
    assert list(E.energies()) == [1.0, -1.0]


def test_basis_index_convention():
    # bit 0 of the index is site 0 and bit value 1 means spin down
    assert list(spins_from_index(0, 3)) == [1, 1, 1]
    assert list(spins_from_index(1, 3)) == [-1, 1, 1]
    assert list(spins_from_index(6, 3)) == [1, -1, -1]
    assert index_from_spins([1, -1, -1]) == 6


@given(st.integers(1, 10), st.data())
def test_index_roundtrip(n, data):
    k = data.draw(st.integers(0, 2**n - 1))
    assert index_from_spins(spins_from_index(k, n)) == k
    c = Configuration.from_index(k, n)
    assert c.index == k and c.n == n


@pytest.mark.parametrize("seed", range(5))
def test_energies_match_pairwise_double_sum(seed):
    E = random_ising(4, seed)
    for k, s in enumerate(itertools.product([1, -1], repeat=4)):
        spins = np.array(s)[::-1]  # product varies the last entry fastest
        k2 = index_from_spins(spins)
        assert E.energies()[k2] == pytest.approx(naive_energy(E.h, E.J, spins), abs=1e-12)


def test_coupling_triples_are_symmetrized():
    E = build_ising(3, [0, 0, 0], [[0, 2, 0.5]])
    assert E.J[0, 2] == E.J[2, 0] == 0.5
    # pair counted twice in the energy
    assert E.energy([1, 1, 1]) == 1.0


def test_rejects_bad_couplings():
    with pytest.raises(SchemaError):
        build_ising(2, [0, 0], [[0, 1], [2, 0]])
    with pytest.raises(SchemaError):
        build_ising(2, [0, 0], [[1, 0], [0, 0]])
    with pytest.raises(SchemaError):
        build_ising(2, [0], None)
    with pytest.raises(SchemaError):
        build_ising(2, [0, 0], [[0, 0, 1.0]])


def test_enumeration_guard():
    E = build_ising(25, np.zeros(25), None)
    with pytest.raises(GuardExceededError):
        E.energies()
    with pytest.raises(GuardExceededError):
        all_spins(25)


def test_gibbs_limits():
    E = build_ising(1, [1.0], None)
    assert np.allclose(gibbs(E, 0).probabilities, [0.5, 0.5])
    p = gibbs(E, 50.0).probabilities
    assert p[1] == pytest.approx(1.0) and p[0] < 1e-40


def test_gibbs_matches_direct_formula():
    E = random_ising(3, 2)
    w = np.exp(-0.7 * E.energies())
    assert np.allclose(gibbs(E, 0.7).probabilities, w / w.sum(), rtol=1e-13)


def test_gibbs_stable_for_huge_beta():
    E = random_ising(5, 1)
    p = gibbs(E, 1e4).probabilities
    assert np.isfinite(p).all() and p.sum() == pytest.approx(1.0)


@given(st.integers(1, 6), st.integers(0, 10_000), st.floats(0, 5))
@settings(max_examples=40, deadline=None)
def test_gibbs_normalized_and_positive(n, seed, beta):
    p = gibbs(random_ising(n, seed), beta).probabilities
    assert abs(p.sum() - 1) < 1e-12
    assert np.all(p >= 0)


def test_thermal_expectation_of_energy():
    E = build_ising(1, [1.0], None)
    d = gibbs(E, np.log(2))
    # weights 1/2 and 2 on energies +1 and -1
    assert thermal_expectation(E.energies(), d) == pytest.approx((0.5 - 2) / 2.5)


@pytest.mark.parametrize("seed", range(3))
def test_site_energy_diff_closed_form(seed):
    E = random_ising(4, seed)
    s = all_spins(4).astype(float)
    for l in range(4):
        expected = s[:, l] * (E.h[l] + 2 * s @ E.J[l])
        assert np.allclose(site_energy_diff(E, l), expected, atol=1e-13)


def test_brute_force_minima_ferromagnet():
    E = ferromagnet(4, -1.0)
    mins = {c.index for c in brute_force_minima(E)}
    assert mins == {0, 15}


def test_table_objective_flip_deltas():
    E = energy_table(2, [0.0, 1.0, 2.0, 5.0])
    assert list(E.flip_deltas(0)) == [1.0, 2.0]
    assert list(E.flip_deltas(3)) == [-3.0, -4.0]


def test_instance_roundtrip(tmp_path):
    E = random_ising(5, 3)
    p = save_instance(tmp_path / "inst.json", E)
    F = load_instance(p)
    assert np.array_equal(F.h, E.h) and np.array_equal(F.J, E.J)


def test_instance_rejects_unknown_keys(tmp_path):
    (tmp_path / "x.json").write_text('{"n": 1, "h": [1.0], "J": [], "extra": 3}')
    with pytest.raises(SchemaError):
        load_instance(tmp_path / "x.json")
