"""End-to-end acceptance checks; each prints one PASS/FAIL line in the terminal summary."""
import time

import numpy as np
import pytest

from annealing_lab.amplify import (
    amplified_relevant_gap,
    build_amplified,
    gap_scaling_study,
    transition_graph,
    verify_amplified_spectrum,
)
from annealing_lab.analysis import fit_power_law
from annealing_lab.evolution import convergence_ratio, evolve, linear_schedule, make_schedule, zeno_randomized_evolution
from annealing_lab.glued_trees import (
    DEFAULT_ALPHA,
    GluedTreesPath,
    column_reduce_check,
    diabatic_run,
    generate,
    spectrum_profile,
)
from annealing_lab.ising import brute_force_minima, ferromagnet, gibbs, random_ising
from annealing_lab.markov import chain_spectrum, empirical_distribution, metropolis_matrix, sa_run, total_variation
from annealing_lab.operators import exact_spectrum, fidelity
from annealing_lab.problems import GroverInstance, grover_sa_chain, max2sat_hamiltonians, random_max2sat
from annealing_lab.qmap import ground_state, h_from_stochastic, h_metropolis_ff, sqrt_gibbs_state

BETAS = (0.0, 0.5, 1.0, 2.0, 4.0)
INSTANCES = [(2 + k % 7, k) for k in range(20)]  # (n, seed), n cycles through 2..8

# integrator norm drift is collected from every evolution run below
_DRIFTS: list[float] = []


@pytest.fixture(scope="module")
def chain_family():
    out = []
    for n, seed in INSTANCES:
        E = random_ising(n, seed)
        for b in BETAS:
            S = metropolis_matrix(E, b)
            out.append((n, seed, b, E, S))
    return out


def test_sqrt_gibbs_ground_state(report, chain_family):
    t0 = time.perf_counter()
    worst_fid, worst_diff = 1.0, 0.0
    for n, seed, b, E, S in chain_family:
        ff = h_metropolis_ff(E, b)
        H5 = h_from_stochastic(S)
        worst_diff = max(worst_diff, float(abs(H5.matrix - ff.total.matrix).max()))
        _, psi, _ = ground_state(ff.total)
        worst_fid = min(worst_fid, fidelity(psi, sqrt_gibbs_state(E, b)))
    elapsed = time.perf_counter() - t0
    ok = worst_fid >= 1 - 1e-10 and worst_diff <= 1e-12 and elapsed < 60
    report(
        "1 sqrt-Gibbs ground state",
        ok,
        f"min fidelity 1-{1 - worst_fid:.2e}, max entry diff {worst_diff:.2e}, {elapsed:.1f}s",
    )


def test_spectral_correspondence(report, chain_family):
    worst = 0.0
    for n, seed, b, E, S in chain_family:
        wH = np.linalg.eigvalsh(h_from_stochastic(S).toarray())
        wS = chain_spectrum(S).eigenvalues  # descending
        worst = max(worst, float(np.max(np.abs(wH - (1 - wS)))))
    report("2 eigenvalues of H = 1 - eigenvalues of S", worst <= 1e-9, f"max deviation {worst:.2e}")


def test_gap_amplification(report, chain_family):
    worst_dev, worst_ratio = 0.0, np.inf
    for n, seed, b, E, S in chain_family:
        amp = build_amplified(transition_graph(S))
        if n <= 6:
            rep = verify_amplified_spectrum(amp)
            worst_dev = max(worst_dev, rep.max_sqrt_deviation)
            ratio = rep.ratio
        else:
            ratio = amplified_relevant_gap(amp) / np.sqrt(amp.delta_bound)
        worst_ratio = min(worst_ratio, ratio)
    # single spin worked example, beta = log 2
    from annealing_lab.ising import build_ising

    E1 = build_ising(1, [1.0], None)
    S1 = metropolis_matrix(E1, np.log(2))
    wH = np.linalg.eigvalsh(h_from_stochastic(S1).toarray())
    wA = np.linalg.eigvalsh(build_amplified(transition_graph(S1)).a_matrix.toarray())
    ex_ok = np.allclose(wH, [0, 0.625], atol=1e-4) and np.allclose(wA[[0, -1]], [-0.7906, 0.7906], atol=1e-4)
    ok = worst_dev <= 1e-8 and worst_ratio >= 0.5 and ex_ok
    report(
        "3 gap amplification",
        ok,
        f"max +-sqrt(lambda) deviation {worst_dev:.2e}, min gap/sqrt(Delta) {worst_ratio:.4f}, "
        f"n=1 example {np.round(wH, 4).tolist()} / +-{wA[-1]:.4f}",
    )


def test_grover_quadratic_speedup(report):
    t0 = time.perf_counter()
    ns = range(4, 11)
    rows = gap_scaling_study([(f"n{n}", grover_sa_chain(GroverInstance(n, 0))) for n in ns])
    N = [r.n_states for r in rows]
    base = fit_power_law(N, [r.base_gap for r in rows])
    amp = fit_power_law(N, [r.amplified_gap for r in rows])
    elapsed = time.perf_counter() - t0
    ok = abs(base.slope + 1.0) <= 0.1 and abs(amp.slope + 0.5) <= 0.1 and elapsed < 600
    report("4 Grover gap exponents", ok, f"base {base.slope:.3f}, amplified {amp.slope:.3f}, {elapsed:.0f}s")


def test_simulated_annealing(report):
    E = random_ising(4, 0)
    burn = 1000
    r = sa_run(E, lambda t: 0.5, 40_000 + burn, seed=0)
    tv = total_variation(empirical_distribution(r.config_indices[burn:], E.dim), gibbs(E, 0.5).probabilities)
    report("5a fixed-beta sampler TV", tv <= 0.05, f"TV {tv:.4f} at n=4, beta=0.5")

    F = ferromagnet(8)
    optima = {c.index for c in brute_force_minima(F)}
    sched = make_schedule("sa_log", c=1.5, n=F.n)
    hits = [sa_run(F, sched, 500, seed=s).best_index in optima for s in range(100)]
    freq = float(np.mean(hits))
    report("5b annealed ferromagnet optimum", freq >= 0.95, f"frequency {freq:.2f} over 100 seeds")


def test_zeno_evolution(report):
    E = random_ising(4, 0)
    m = E.n**2
    betas = np.linspace(0.0, 2.0, m + 1)

    def path(b):
        return h_metropolis_ff(E, b, check=False).total

    delta = min(exact_spectrum(path(b), k=2).gap for b in betas[1:])
    target = sqrt_gibbs_state(E, 2.0)
    runs = [zeno_randomized_evolution(path, betas, delta, s, target=target) for s in range(100)]
    half = [zeno_randomized_evolution(path, betas, delta / 2, s, target=target) for s in range(100)]
    _DRIFTS.extend(r.norm_drift for r in runs + half)
    mean_fid = float(np.mean([r.fidelity for r in runs]))
    ratio = float(np.mean([r.realized_time for r in half]) / np.mean([r.realized_time for r in runs]))
    ok = mean_fid >= 0.9 and abs(ratio - 2.0) <= 0.2
    report("6 Zeno evolution", ok, f"mean fidelity {mean_fid:.4f}, time ratio at Delta/2 {ratio:.3f}")


def test_glued_trees_structure(report):
    bad = []
    for n in range(1, 9):
        for seed in range(50):
            g = generate(n, seed)
            deg = g.degrees()
            ok = g.n_vertices == 2 ** (n + 2) - 2 and np.sum(deg == 2) == 2 and np.sum(deg == 3) == g.n_vertices - 2
            if not ok:
                bad.append((n, seed))
    report("7 glued trees structure", not bad, f"{8 * 50 - len(bad)}/400 graphs valid")


@pytest.fixture(scope="module")
def glued_profiles():
    return {n: spectrum_profile(n) for n in range(4, 13)}


def test_glued_spectrum_symmetry(report, glued_profiles):
    worst = max(p.symmetry_residual for p in glued_profiles.values())
    report("8a glued spectrum s <-> 1-s symmetry", worst <= 1e-9, f"max residual {worst:.2e}")


def test_glued_min_gap_location(report, glued_profiles):
    locs = {n: glued_profiles[n].s_min_gap10 for n in range(6, 13)}
    worst = max(abs(s - 0.25) for s in locs.values())
    report(
        "8b glued min-gap location near 0.25",
        worst <= 0.05,
        f"alpha={DEFAULT_ALPHA:.4f}: " + ", ".join(f"n={n}: {s:.4f}" for n, s in locs.items()),
    )


def test_glued_gap21_exponent(report, glued_profiles):
    ns = sorted(glued_profiles)
    fit = fit_power_law(ns, [glued_profiles[n].min_gap21 for n in ns])
    report("8c glued Delta21 exponent in [-3.6, -2.4]", -3.6 <= fit.slope <= -2.4, f"slope {fit.slope:.3f} over n=4..12")


def test_glued_column_vertex_agreement(report):
    worst = 0.0
    for n in range(1, 7):
        chk = column_reduce_check(generate(n, 0), np.linspace(0, 1, 17))
        worst = max(worst, chk.max_dense_deviation, chk.max_residual)
    report("8d glued column/vertex spectra", worst <= 1e-9, f"max deviation {worst:.2e}")


@pytest.fixture(scope="module")
def diabatic_sweep():
    grid = (10.0, 100.0, 1000.0)
    needed = sorted({t * f for t in grid for f in (0.01, 1.0, 100.0)})
    runs = {T: diabatic_run(4, T) for T in needed}
    _DRIFTS.extend(r.norm_drift for r in runs.values())
    return grid, runs


def test_diabatic_window(report, diabatic_sweep):
    grid, runs = diabatic_sweep
    p = {T: r.exit_probability for T, r in runs.items()}
    margins = {T: min(p[T] - p[T / 100], p[T] - p[T * 100]) for T in grid}
    best = max(margins, key=margins.get)
    report(
        "9a diabatic window at n=4",
        margins[best] >= 0.1,
        "exit probabilities " + ", ".join(f"T={T:g}: {p[T]:.4f}" for T in sorted(p)) + f"; best margin {margins[best]:.4f}",
    )


def test_randomized_manifold(report, diabatic_sweep):
    grid, runs = diabatic_sweep
    T = max(grid, key=lambda t: runs[t].exit_probability)
    rand = [diabatic_run(4, T, initial="randomized_manifold", seed=s) for s in range(20)]
    _DRIFTS.extend(r.norm_drift for r in rand)
    ratio = float(np.mean([r.exit_probability for r in rand]) / runs[T].exit_probability)
    report("9b randomized-manifold success ratio", ratio >= 0.4, f"ratio {ratio:.3f} at T={T:g}")


def test_integrator_properties(report):
    path = GluedTreesPath(4)
    sch = linear_schedule(0, 1, 200.0)
    psi0 = np.zeros(path.dim, dtype=complex)
    psi0[0] = 1
    fw = evolve(path, sch, psi0, steps=800, order=4, target=None)
    bw = evolve(path, sch, fw.final_state, steps=800, order=4, target=None, direction=-1)
    fb = fidelity(psi0, bw.final_state)
    r2 = convergence_ratio(path, sch, psi0, steps=800, order=2)
    r4 = convergence_ratio(path, sch, psi0, steps=400, order=4)
    _DRIFTS.extend([fw.norm_drift, bw.norm_drift])
    drift = max(_DRIFTS)
    ok = drift <= 1e-9 and fb >= 1 - 1e-8 and min(r2, r4) >= 3.5
    report(
        "10 integrator properties",
        ok,
        f"max drift {drift:.2e} over {len(_DRIFTS)} runs, forward-backward 1-{1 - fb:.1e}, "
        f"dt-halving ratios {r2:.2f} (order 2) {r4:.2f} (order 4)",
    )


def _naive_maximizers(inst) -> set[int]:
    best, arg = -1, set()
    for z in range(1 << inst.n):
        truth = {v: bool((z >> (v - 1)) & 1) for v in range(1, inst.n + 1)}
        sat = sum(truth[abs(a)] == (a > 0) or truth[abs(b)] == (b > 0) for a, b in inst.clauses)
        if sat > best:
            best, arg = sat, {z}
        elif sat == best:
            arg.add(z)
    return arg


def test_max2sat_ground_space(report):
    mismatches = 0
    for k in range(50):
        n = 2 + k % 9
        inst = random_max2sat(n, 2 * n, k)
        _, HP = max2sat_hamiltonians(inst)
        w, V = np.linalg.eigh(HP.toarray())
        ground = {int(np.argmax(np.abs(V[:, j]))) for j in np.flatnonzero(w <= w[0] + 1e-12)}
        if ground != _naive_maximizers(inst):
            mismatches += 1
    report("11 MAX 2-SAT ground space", mismatches == 0, f"{50 - mismatches}/50 exact matches, n=2..10")
