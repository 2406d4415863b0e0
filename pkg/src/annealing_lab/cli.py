"""Command line entry point.

Exit codes: 0 success, 2 bad input or schema, 3 numerical failure,
4 size guard exceeded.
"""
from __future__ import annotations

import argparse
import sys
from pathlib import Path
from typing import Any, Sequence

import numpy as np

from . import __version__
from .amplify import build_amplified, transition_graph, verify_amplified_spectrum, amplified_relevant_gap
from .analysis import emit_plotdata, fit_power_law
from .config import InstanceConfig, load_config_file, resolve_config
from .errors import AnnealingLabError, GuardExceededError, NumericalError, SchemaError
from .evolution import adiabatic_sweep, make_schedule, zeno_randomized_evolution
from .glued_trees import (
    diabatic_run,
    generate,
    save_graph,
    spectrum_profile,
)
from .ising import brute_force_minima, build_ising, ferromagnet, load_instance, random_ising
from .markov import chain_spectrum, empirical_distribution, metropolis_matrix, sa_run, write_spectrum_json
from .operators import StateVector, dump_operator, exact_spectrum, fidelity
from .problems import (
    GroverInstance,
    diabatic_max2sat_run,
    grover_sa_chain,
    load_dimacs,
    max2sat_hamiltonians,
    random_max2sat,
)
from .qmap import ground_state, h_from_stochastic, h_metropolis_ff, sqrt_gibbs_state, transverse_ising
from .serialization import config_hash, write_csv, write_json


def make_instance(cfg: InstanceConfig):
    if cfg.kind == "file":
        if not cfg.path:
            raise SchemaError("instance.kind=file needs instance.path")
        return load_instance(cfg.path)
    if cfg.n is None:
        raise SchemaError("instance.n is required")
    if cfg.kind == "random":
        return random_ising(cfg.n, cfg.seed)
    if cfg.kind == "ferromagnet":
        return ferromagnet(cfg.n, cfg.coupling, cfg.field)
    if cfg.h is None:
        raise SchemaError("explicit instance needs h")
    return build_ising(cfg.n, cfg.h, cfg.J)


# --- subcommands -----------------------------------------------------------------------


def cmd_map(cfg, out: Path, meta: dict) -> list[Path]:
    E = make_instance(cfg.instance)
    rows = []
    written = []
    for b in cfg.betas:
        S = metropolis_matrix(E, b)
        H5 = h_from_stochastic(S)
        ff = h_metropolis_ff(E, b)
        e0, psi, gap = ground_state(ff.total)
        rows.append({
            "beta": b,
            "ground_energy": e0,
            "gap": gap,
            "fidelity": fidelity(psi, sqrt_gibbs_state(E, b)),
            "max_entry_difference": float(abs(H5.matrix - ff.total.matrix).max()),
        })
        if cfg.dump_operator:
            written.append(dump_operator(out / f"operator_beta{b:g}.txt", ff.total))
    written.append(write_json(out / "map.json", {"meta": meta, "n": E.n, "results": rows}))
    return written


def cmd_spectrum(cfg, out: Path, meta: dict) -> list[Path]:
    E = make_instance(cfg.instance)
    spectra = [chain_spectrum(metropolis_matrix(E, b)) for b in cfg.betas]
    return [
        write_spectrum_json(out / "spectrum.json", spectra, meta),
        write_csv(out / "chain_gaps.csv", ["beta", "gap"], [(s.beta, s.gap) for s in spectra], meta),
    ]


def cmd_sa(cfg, out: Path, meta: dict) -> list[Path]:
    E = make_instance(cfg.instance)
    sc = cfg.schedule
    if sc.kind == "sa_log":
        sched = make_schedule("sa_log", c=sc.c, n=E.n)
    else:
        sched = make_schedule("linear", max(cfg.sweeps, 1), start=sc.start, end=sc.end)
    optima = {c.index for c in brute_force_minima(E)}
    runs, written = [], []
    for k in range(cfg.runs):
        seed = cfg.seed + k
        r = sa_run(E, sched, cfg.sweeps, seed, record_every=cfg.record_every)
        if k == 0:
            written.append(r.write_trajectory(out / "trajectory.csv", meta))
        runs.append(r)
    hist = empirical_distribution([r.final_index for r in runs], E.dim)
    summary = {
        "meta": meta,
        "schedule": sched.to_dict(),
        "sweeps": cfg.sweeps,
        "optimum_energy": float(E.energies().min()),
        "best_found_frequency": float(np.mean([r.best_index in optima for r in runs])),
        "final_optimum_frequency": float(np.mean([r.final_index in optima for r in runs])),
        "best_energies": [r.best_energy for r in runs],
        "final_histogram": {str(i): float(p) for i, p in enumerate(hist) if p > 0},
    }
    written.append(write_json(out / "sa.json", summary))
    return written


def cmd_anneal(cfg, out: Path, meta: dict) -> list[Path]:
    E = make_instance(cfg.instance)
    records = []
    if cfg.mode == "transverse":
        def path(g):
            return transverse_ising(E, g)

        psi0 = ground_state(path(cfg.gamma_start))[1]
        target = ground_state(path(cfg.gamma_end))[1] if cfg.gamma_end > 0 else None
        if target is None:
            # classical end point: project on the ground space of E
            vals = E.energies()
            amp = np.where(vals <= vals.min() + 1e-12, 1.0, 0.0)
            target = StateVector.normalized(amp)
        sw = adiabatic_sweep(path, psi0, target, cfg.total_times, start=cfg.gamma_start, end=cfg.gamma_end, max_dt=cfg.max_dt)
        for T, f in zip(sw.total_times, sw.fidelities):
            records.append({"family": "transverse", "T": float(T), "fidelity": float(f)})
        body = {"meta": meta, "mode": cfg.mode, "sweep": sw.to_dict(), "fidelity_vs_T": records}
    else:
        m = cfg.steps or E.n**2
        betas = np.linspace(0.0, cfg.beta_final, m + 1)

        def path(b):
            return h_metropolis_ff(E, b, check=False).total

        delta = min(exact_spectrum(path(b), k=2).gap for b in betas[1:])
        target = sqrt_gibbs_state(E, cfg.beta_final)
        res = [zeno_randomized_evolution(path, betas, delta, cfg.seed + k, c3=cfg.c3, target=target) for k in range(cfg.runs)]
        body = {
            "meta": meta,
            "mode": cfg.mode,
            "steps": m,
            "delta": delta,
            "mean_fidelity": float(np.mean([r.fidelity for r in res])),
            "fidelities": [r.fidelity for r in res],
            "mean_realized_time": float(np.mean([r.realized_time for r in res])),
            "norm_drift": max(r.norm_drift for r in res),
        }
    return [write_json(out / "anneal.json", body)]


def cmd_amplify(cfg, out: Path, meta: dict) -> list[Path]:
    E = make_instance(cfg.instance)
    S = metropolis_matrix(E, cfg.beta)
    g = transition_graph(S)
    base_gap = chain_spectrum(S, k=2).gap
    amp = build_amplified(g, delta_bound=cfg.delta_factor * base_gap)
    body: dict[str, Any] = {"meta": meta, "beta": cfg.beta, "colors": g.q, "max_degree": g.max_degree, "dim": amp.h_tilde.dim}
    if amp.h_tilde.dim <= 4096:
        body["report"] = verify_amplified_spectrum(amp).to_dict()
    else:
        body["report"] = {"relevant_gap": amplified_relevant_gap(amp), "base_gap": base_gap}
    written = [write_json(out / "amplify.json", body)]
    if cfg.dump_operator:
        written.append(dump_operator(out / "amplified_operator.txt", amp.h_tilde))
    return written


def cmd_gluedtrees(cfg, out: Path, meta: dict) -> list[Path]:
    written = []
    if cfg.action == "generate":
        for n in cfg.depths:
            written.append(save_graph(out / f"graph_n{n}.json", generate(n, cfg.seed)))
    elif cfg.action in ("profile", "scaling"):
        rows = []
        for n in cfg.depths:
            pr = spectrum_profile(n, alpha=cfg.alpha)
            written.append(pr.write_csv(out / f"profile_n{n}.csv", meta))
            rows.append((n, pr.s_min_gap10, pr.min_gap10, pr.min_gap21, pr.symmetry_residual))
        written.append(write_csv(out / "profile_summary.csv", ["n", "s_min_gap10", "min_gap10", "min_gap21", "symmetry_residual"], rows, meta))
        if cfg.action == "scaling" and len(rows) >= 3:
            ns = [r[0] for r in rows]
            fits = [
                {"family": "glued_gap10", **fit_power_law(ns, [r[2] for r in rows], log_x=False).to_dict()},
                {"family": "glued_gap21", **fit_power_law(ns, [r[3] for r in rows]).to_dict()},
            ]
            written.append(write_json(out / "gluedtrees_fits.json", {"meta": meta, "fits": fits}))
    else:
        recs = []
        for n in cfg.depths:
            for T in cfg.total_times:
                r = diabatic_run(n, T, cfg.initial, cfg.seed, cfg.alpha, max_dt=cfg.max_dt)
                recs.append({"family": f"glued_n{n}_{cfg.initial}", "T": T, "fidelity": r.exit_probability, "norm_drift": r.norm_drift})
        written.append(write_json(out / "gluedtrees_runs.json", {"meta": meta, "fidelity_vs_T": recs}))
    return written


def cmd_grover(cfg, out: Path, meta: dict) -> list[Path]:
    rows = []
    for n in cfg.n_values:
        S = grover_sa_chain(GroverInstance(n, 0, cfg.sign), cfg.beta)
        base = chain_spectrum(S, k=2).gap
        amp_gap = float("nan")
        if cfg.amplified:
            amp = build_amplified(transition_graph(S), delta_bound=base)
            amp_gap = amplified_relevant_gap(amp)
        rows.append((n, 1 << n, base, amp_gap))
    written = [write_csv(out / "grover_gaps.csv", ["n", "N", "base_gap", "amplified_gap"], rows, meta)]
    if len(rows) >= 3:
        N = [r[1] for r in rows]
        fits = [{"family": "grover_base", **fit_power_law(N, [r[2] for r in rows]).to_dict()}]
        if cfg.amplified:
            fits.append({"family": "grover_amplified", **fit_power_law(N, [r[3] for r in rows]).to_dict()})
        written.append(write_json(out / "grover_fits.json", {"meta": meta, "fits": fits}))
    return written


def cmd_max2sat(cfg, out: Path, meta: dict) -> list[Path]:
    inst = load_dimacs(cfg.path) if cfg.path else random_max2sat(cfg.n, cfg.clauses, cfg.seed)
    _, HP = max2sat_hamiltonians(inst)
    levels = np.linalg.eigvalsh(HP.toarray())
    ground = set(np.flatnonzero(HP.matrix.diagonal() <= levels[0] + 1e-12).tolist())
    curve = diabatic_max2sat_run(inst, cfg.total_times, max_dt=cfg.max_dt)
    recs = [{"family": "max2sat", "T": float(T), "fidelity": float(p)} for T, p in zip(curve.total_times, curve.success)]
    body = {
        "meta": meta,
        "n": inst.n,
        "clauses": [list(c) for c in inst.clauses],
        "ground_space_matches_maximizers": ground == inst.maximizers(),
        "curve": curve.to_dict(),
        "fidelity_vs_T": recs,
    }
    return [write_json(out / "max2sat.json", body)]


def cmd_plotdata(cfg, out: Path, meta: dict) -> list[Path]:
    return emit_plotdata(cfg.run_dir, out, meta)


COMMANDS = {
    "map": cmd_map,
    "spectrum": cmd_spectrum,
    "sa": cmd_sa,
    "anneal": cmd_anneal,
    "amplify": cmd_amplify,
    "gluedtrees": cmd_gluedtrees,
    "grover": cmd_grover,
    "max2sat": cmd_max2sat,
    "plotdata": cmd_plotdata,
}

# flag name -> (dotted config key, type, help)
_FLAGS: dict[str, list[tuple[str, str, Any, str]]] = {
    "map": [("--n", "instance.n", int, "spin count"), ("--betas", "betas", float, "inverse temperatures")],
    "spectrum": [("--n", "instance.n", int, "spin count"), ("--betas", "betas", float, "inverse temperatures")],
    "sa": [("--n", "instance.n", int, "spin count"), ("--sweeps", "sweeps", int, "sweeps per run"), ("--runs", "runs", int, "independent runs")],
    "anneal": [("--n", "instance.n", int, "spin count"), ("--mode", "mode", str, "transverse or zeno"), ("--runs", "runs", int, "random repetitions")],
    "amplify": [("--n", "instance.n", int, "spin count"), ("--beta", "beta", float, "inverse temperature")],
    "gluedtrees": [("--action", "action", str, "generate, profile, run or scaling"), ("--depths", "depths", int, "tree depths")],
    "grover": [("--n-values", "n_values", int, "register sizes"), ("--beta", "beta", float, "inverse temperature"), ("--sign", "sign", int, "objective sign")],
    "max2sat": [("--file", "path", str, "DIMACS clause file"), ("--n", "n", int, "variables for a random instance")],
    "plotdata": [("--run-dir", "run_dir", str, "directory with run artifacts")],
}
_LIST_KEYS = {"betas", "depths", "n_values", "total_times"}


def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="annealing-lab", description="Annealing and Markov-chain Hamiltonian experiments")
    p.add_argument("--version", action="version", version=__version__)
    sub = p.add_subparsers(dest="command", required=True)
    for name in COMMANDS:
        sp_ = sub.add_parser(name)
        sp_.add_argument("--config", help="YAML or JSON config file")
        sp_.add_argument("--seed", type=int)
        sp_.add_argument("--out", help="output directory")
        for flag, key, typ, hlp in _FLAGS[name]:
            nargs = "+" if key.split(".")[-1] in _LIST_KEYS else None
            sp_.add_argument(flag, dest=key.replace(".", "__"), type=typ, nargs=nargs, help=hlp)
        if name in ("anneal", "gluedtrees", "max2sat"):
            sp_.add_argument("--total-times", dest="total_times", type=float, nargs="+")
    return p


def run(argv: Sequence[str] | None = None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        file_data = load_config_file(args.config)
        overrides = {"seed": args.seed, "out": args.out}
        for _, key, _, _ in _FLAGS[args.command]:
            overrides[key] = getattr(args, key.replace(".", "__"))
        if hasattr(args, "total_times"):
            overrides["total_times"] = args.total_times
        cfg = resolve_config(args.command, file_data, overrides)
        cfg_dict = cfg.model_dump()
        # the output location does not change results, so it stays out of the hash
        hashed = {k: v for k, v in cfg_dict.items() if k != "out"}
        meta = {"command": args.command, "config_hash": config_hash(hashed), "seed": cfg.seed, "version": __version__}
        out = Path(cfg.out)
        written = COMMANDS[args.command](cfg, out, meta)
        write_json(out / f"{args.command}_config.json", {"meta": meta, "config": cfg_dict})
    except SchemaError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2
    except GuardExceededError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 4
    except NumericalError as exc:
        print(f"numerical failure: {exc}", file=sys.stderr)
        return 3
    except AnnealingLabError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2
    for w in written:
        print(w)
    return 0


def main() -> None:
    sys.exit(run())


if __name__ == "__main__":
    main()
