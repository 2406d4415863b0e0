"""Benchmark problems: unstructured search and MAX 2-SAT."""
from __future__ import annotations

from dataclasses import dataclass
from pathlib import Path
from typing import Sequence

import numpy as np
import scipy.sparse as sp

from .errors import DegenerateStepError, DetailedBalanceError, SchemaError
from .ising import ObjectiveFunction, check_enumerable, energy_table
from .markov import StochasticMatrix, metropolis_complete_graph, verify_detailed_balance
from .operators import SparseHermitian, StateVector, exact_spectrum, sum_sigma_x
from .rng import make_rng
from .serialization import read_json, write_json


# --- unstructured search ------------------------------------------------------


@dataclass(frozen=True)
class GroverInstance:
    """``E(s) = sign`` on the marked configuration and ``0`` elsewhere."""

    n: int
    marked: int
    sign: int = -1

    def __post_init__(self):
        if self.sign not in (-1, 1):
            raise SchemaError("sign must be +1 or -1")
        if not 0 <= self.marked < (1 << self.n):
            raise SchemaError("marked index out of range")

    def to_dict(self) -> dict:
        return {"n": self.n, "marked": self.marked, "sign": self.sign}

    @classmethod
    def from_dict(cls, d) -> "GroverInstance":
        extra = set(d) - {"n", "marked", "sign"}
        if extra:
            raise SchemaError(f"unknown keys {sorted(extra)}")
        return cls(int(d["n"]), int(d["marked"]), int(d.get("sign", -1)))


def grover_objective(inst: GroverInstance) -> ObjectiveFunction:
    check_enumerable(inst.n)
    values = np.zeros(1 << inst.n)
    values[inst.marked] = inst.sign
    return energy_table(inst.n, values, kind="grover", marked=inst.marked, sign=inst.sign)


def grover_sa_chain(inst: GroverInstance, beta: float | None = None) -> StochasticMatrix:
    """Complete-graph Metropolis chain for the search objective; checked for detailed balance.

    ``beta`` defaults to ``log N``, where leaving the marked state costs a
    factor ``1/N`` and the gap scales as ``1/N`` for ``sign = -1``.
    """
    if beta is None:
        beta = inst.n * np.log(2.0)
    E = grover_objective(inst)
    S = metropolis_complete_graph(E, beta)
    res = verify_detailed_balance(S, S.stationary())
    if res > 1e-12:
        raise DetailedBalanceError(f"detailed balance residual {res:.2e}")
    return S


def save_grover(path, inst: GroverInstance) -> Path:
    return write_json(path, inst.to_dict())


def load_grover(path) -> GroverInstance:
    return GroverInstance.from_dict(read_json(path))


# --- MAX 2-SAT -----------------------------------------------------------------


@dataclass(frozen=True)
class Max2SatInstance:
    """Clauses as pairs of signed 1-based literals; ``+v`` is true when bit ``v-1`` is 1."""

    n: int
    clauses: tuple[tuple[int, int], ...]

    def __post_init__(self):
        for c in self.clauses:
            if len(c) != 2 or any(lit == 0 or abs(lit) > self.n for lit in c):
                raise SchemaError(f"bad clause {c}")

    def satisfied_counts(self) -> np.ndarray:
        """Number of satisfied clauses for every assignment in basis order."""
        check_enumerable(self.n)
        z = np.arange(1 << self.n)
        f = np.zeros(len(z), dtype=np.int64)
        for a, b in self.clauses:
            f += (_literal(z, a) | _literal(z, b)).astype(np.int64)
        return f

    def maximizers(self) -> set[int]:
        f = self.satisfied_counts()
        return set(np.flatnonzero(f == f.max()).tolist())


def _literal(z: np.ndarray, lit: int) -> np.ndarray:
    bit = (z >> (abs(lit) - 1)) & 1
    return bit.astype(bool) if lit > 0 else ~bit.astype(bool)


def random_max2sat(n: int, m: int, seed: int) -> Max2SatInstance:
    rng = make_rng(seed, n, m)
    clauses = []
    for _ in range(m):
        v = rng.choice(n, size=2, replace=False) + 1
        s = rng.choice([-1, 1], size=2)
        clauses.append((int(v[0] * s[0]), int(v[1] * s[1])))
    return Max2SatInstance(n, tuple(clauses))


def parse_dimacs(text: str) -> Max2SatInstance:
    n = None
    clauses = []
    for raw in text.splitlines():
        line = raw.strip()
        if not line or line.startswith("c"):
            continue
        if line.startswith("p"):
            parts = line.split()
            if len(parts) != 4 or parts[1] != "cnf":
                raise SchemaError(f"bad header: {line}")
            n = int(parts[2])
            continue
        lits = [int(t) for t in line.split()]
        if not lits or lits[-1] != 0:
            raise SchemaError(f"clause line must end with 0: {line}")
        if len(lits) != 3:
            raise SchemaError(f"only 2-literal clauses are supported: {line}")
        clauses.append((lits[0], lits[1]))
    if n is None:
        raise SchemaError("missing 'p cnf' header")
    return Max2SatInstance(n, tuple(clauses))


def format_dimacs(inst: Max2SatInstance) -> str:
    lines = [f"p cnf {inst.n} {len(inst.clauses)}"]
    lines += [f"{a} {b} 0" for a, b in inst.clauses]
    return "\n".join(lines) + "\n"


def load_dimacs(path) -> Max2SatInstance:
    return parse_dimacs(Path(path).read_text())


def max2sat_hamiltonians(inst: Max2SatInstance) -> tuple[SparseHermitian, SparseHermitian]:
    """Driver ``-sum_l (1 - sigma_x^l)/2`` and problem ``-sum_z f(z)|z><z|``."""
    N = 1 << inst.n
    HB = -0.5 * (inst.n * sp.identity(N, format="csr") - sum_sigma_x(inst.n))
    HP = sp.diags(-inst.satisfied_counts().astype(float))
    return SparseHermitian(sp.csr_matrix(HB)), SparseHermitian(sp.csr_matrix(HP))


def driver_ground_state(n: int) -> StateVector:
    """Ground state of the driver: every qubit in ``|->``."""
    v = np.ones(1)
    minus = np.array([1.0, -1.0]) / np.sqrt(2)
    for _ in range(n):
        v = np.kron(minus, v)
    return StateVector(v)


@dataclass(frozen=True)
class DiabaticCurve:
    total_times: np.ndarray
    success: np.ndarray
    monotone: bool
    min_gap: float
    norm_drift: float

    def to_dict(self) -> dict:
        return {
            "T": self.total_times.tolist(),
            "success": self.success.tolist(),
            "monotone": self.monotone,
            "min_gap": self.min_gap,
            "norm_drift": self.norm_drift,
        }


def diabatic_max2sat_run(
    inst: Max2SatInstance,
    total_times: Sequence[float],
    max_dt: float = 0.05,
    gap_points: int = 64,
    monotone_tol: float = 1e-6,
) -> DiabaticCurve:
    """Ground-space population of ``H_P`` after a linear sweep from ``H_B``, vs total time.

    The interpolation ``(1 - s) H_B + s H_P`` restricted to the symmetric
    sector must stay nondegenerate for ``s < 1``; this is checked on a grid.
    """
    from .evolution import evolve, linear_schedule

    HB, HP = max2sat_hamiltonians(inst)
    B, P = HB.toarray(), HP.toarray()
    f = inst.satisfied_counts()
    ground = np.flatnonzero(f == f.max())
    psi0 = driver_ground_state(inst.n)

    def path(s):
        return (1 - s) * B + s * P

    gaps = []
    for s in np.linspace(0, 1, gap_points, endpoint=False):
        w, V = np.linalg.eigh(path(s))
        # gap to the first level reachable from the initial state's sector
        ov = np.abs(V.T @ psi0.amplitudes) ** 2
        lvl = w[ov > 1e-12]
        g = lvl[1] - lvl[0] if len(lvl) > 1 else np.inf
        gaps.append(g)
    min_gap = float(np.min(gaps))
    if min_gap < 1e-9:
        raise DegenerateStepError("interpolation path closes its gap before s = 1")
    succ, drift = [], 0.0
    for T in total_times:
        res = evolve(path, linear_schedule(0.0, 1.0, T), psi0, max_dt=max_dt)
        succ.append(float(np.sum(np.abs(res.final_state[ground]) ** 2)))
        drift = max(drift, res.norm_drift)
    succ = np.asarray(succ)
    Ts = np.asarray(total_times, dtype=float)
    order = np.argsort(Ts)
    mono = bool(np.all(np.diff(succ[order]) >= -monotone_tol))
    return DiabaticCurve(Ts, succ, mono, min_gap, drift)
