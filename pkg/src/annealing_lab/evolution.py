"""Annealing schedules and time evolution under slowly varying Hamiltonians."""
from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Any, Callable, Sequence

import numpy as np
import scipy.sparse as sp
from scipy.optimize import minimize_scalar
from scipy.sparse.linalg import expm_multiply

from .errors import DegenerateStepError, IntegrationError, SchemaError
from .operators import SparseHermitian, StateVector, fidelity
from .rng import make_rng

DENSE_EVOLUTION_LIMIT = 1024

# --- schedules -------------------------------------------------------------------

SCHEDULE_KINDS = ("sa_log", "eqa_power", "linear", "glued", "custom")


@dataclass(frozen=True)
class Schedule:
    """Map from time ``t in [0, total_time]`` to a path parameter."""

    kind: str
    total_time: float
    params: dict = field(default_factory=dict)

    def __call__(self, t: float) -> float:
        p = self.params
        k = self.kind
        if k == "linear":
            if self.total_time == 0:
                return p["end"]
            return p["start"] + (p["end"] - p["start"]) * (t / self.total_time)
        if k == "sa_log":
            return p["c"] * math.log1p(t) / p["n"]
        if k == "eqa_power":
            if t >= self.total_time:
                return p["chi"]
            return p["c"] * (t + p["t0"]) ** (-1.0 / (2 * p["n"] - 1))
        if k == "glued":
            return min(1.0, t / self.total_time)
        if k == "custom":
            return float(np.interp(t, p["times"], p["values"]))
        raise SchemaError(f"unknown schedule kind {k!r}")

    def to_dict(self) -> dict:
        return {"kind": self.kind, "total_time": self.total_time, "params": dict(self.params)}


def make_schedule(kind: str, total_time: float | None = None, **params: Any) -> Schedule:
    """Build a schedule by kind.

    ``linear``: ``start``, ``end``, ``total_time``.
    ``sa_log``: ``beta(t) = c log(1 + t) / n``.
    ``eqa_power``: ``gamma(t) = c (t + t0)^(-1/(2n-1))`` decreasing from
    ``gamma0`` at ``t = 0`` to exactly ``chi`` at ``t = total_time``.
    ``glued``: ``s = t / T`` with ``T = c n^6`` unless ``total_time`` is given.
    ``custom``: piecewise-linear through ``times`` / ``values``.
    """
    if kind == "linear":
        return Schedule(kind, float(total_time), {"start": float(params["start"]), "end": float(params["end"])})
    if kind == "sa_log":
        T = float("inf") if total_time is None else float(total_time)
        return Schedule(kind, T, {"c": float(params["c"]), "n": int(params["n"])})
    if kind == "eqa_power":
        g0, chi, n = float(params["gamma0"]), float(params["chi"]), int(params["n"])
        if not g0 > chi > 0:
            raise SchemaError("eqa_power needs gamma0 > chi > 0")
        T = float(total_time)
        p = 1.0 / (2 * n - 1)
        t0 = T / ((g0 / chi) ** (1.0 / p) - 1.0)
        return Schedule(kind, T, {"gamma0": g0, "chi": chi, "n": n, "t0": t0, "c": g0 * t0**p})
    if kind == "glued":
        n, c = int(params["n"]), float(params.get("c", 1.0))
        T = c * n**6 if total_time is None else float(total_time)
        return Schedule(kind, T, {"n": n, "c": c})
    if kind == "custom":
        times = np.asarray(params["times"], dtype=float)
        if np.any(np.diff(times) <= 0):
            raise SchemaError("custom schedule times must increase")
        return Schedule(kind, float(times[-1]), {"times": times.tolist(), "values": list(map(float, params["values"]))})
    raise SchemaError(f"unknown schedule kind {kind!r}")


def linear_schedule(start: float, end: float, total_time: float) -> Schedule:
    return make_schedule("linear", total_time, start=start, end=end)


# --- propagation ----------------------------------------------------------------

Path = Callable[[float], Any]

_CF4_A1 = 0.25 - math.sqrt(3) / 6
_CF4_A2 = 0.25 + math.sqrt(3) / 6
_CF4_C1 = 0.5 - math.sqrt(3) / 6
_CF4_C2 = 0.5 + math.sqrt(3) / 6


def _operator(H):
    if isinstance(H, SparseHermitian):
        H = H.matrix
    if sp.issparse(H):
        return H.toarray() if H.shape[0] <= DENSE_EVOLUTION_LIMIT else H.tocsr()
    return np.asarray(H)


def _expmv(H, tau: float, psi: np.ndarray) -> np.ndarray:
    """``exp(-i tau H) psi``."""
    if sp.issparse(H):
        return expm_multiply(-1j * tau * H, psi)
    w, V = np.linalg.eigh(H)
    return V @ (np.exp(-1j * tau * w) * (V.conj().T @ psi))


class _Stepper:
    """One-step maps of a given order, forward or backward in time."""

    def __init__(self, path: Path, schedule: Schedule, order: int, direction: int):
        if order not in (2, 4):
            raise ValueError("order must be 2 or 4")
        self.H = lambda t: _operator(path(schedule(t)))
        self.order = order
        self.direction = direction

    def __call__(self, t: float, h: float, psi: np.ndarray) -> np.ndarray:
        d = self.direction
        if self.order == 2:
            return _expmv(self.H(t + 0.5 * h), d * h, psi)
        H1, H2 = self.H(t + _CF4_C1 * h), self.H(t + _CF4_C2 * h)
        first = _CF4_A2 * H1 + _CF4_A1 * H2
        second = _CF4_A1 * H1 + _CF4_A2 * H2
        if d > 0:
            return _expmv(second, h, _expmv(first, h, psi))
        return _expmv(first, -h, _expmv(second, -h, psi))


@dataclass(frozen=True)
class EvolutionResult:
    final_state: np.ndarray
    times: np.ndarray
    fidelity_trace: np.ndarray
    norm_drift: float
    step_count: int
    rejected_steps: int = 0

    @property
    def final_fidelity(self) -> float:
        return float(self.fidelity_trace[-1]) if len(self.fidelity_trace) else float("nan")


def _ground(H) -> np.ndarray:
    A = _operator(H)
    A = A.toarray() if sp.issparse(A) else A
    return np.linalg.eigh(A)[1][:, 0]


def evolve(
    path: Path,
    schedule: Schedule,
    psi0,
    *,
    steps: int | None = None,
    max_dt: float = 0.1,
    min_steps: int = 16,
    order: int = 2,
    adaptive: bool = False,
    tol: float = 1e-8,
    target="instantaneous",
    samples: int = 33,
    direction: int = 1,
    max_steps: int = 10_000_000,
) -> EvolutionResult:
    """Integrate the Schrodinger equation along ``H(t) = path(schedule(t))``.

    Piecewise-constant exponentials: ``order=2`` uses the Hamiltonian at
    each step midpoint, ``order=4`` a two-exponential commutator-free scheme
    at the Gauss points. Both are time-symmetric. With ``adaptive`` the step
    is controlled by step doubling so that the accumulated error estimate
    stays below ``tol``.

    ``target`` is a fixed state, ``"instantaneous"`` for the ground state of
    ``H(t)`` at each sample, or ``None`` to skip fidelity tracking.
    ``direction=-1`` integrates from ``T`` back to ``0`` and undoes a forward run.
    """
    T = float(schedule.total_time)
    psi = np.asarray(psi0.amplitudes if isinstance(psi0, StateVector) else psi0, dtype=complex).copy()
    step = _Stepper(path, schedule, order, direction)

    def fid_at(t, v):
        if target is None:
            return np.nan
        if isinstance(target, str):
            return fidelity(_ground(path(schedule(t))), v)
        return fidelity(target, v)

    times, fids = [], []
    drift = 0.0
    if T == 0:
        times.append(0.0)
        fids.append(fid_at(0.0, psi))
        return EvolutionResult(psi, np.array(times), np.array(fids), 0.0, 0)

    sample_pts = np.linspace(0, T, samples) if samples > 1 else np.array([T])
    if direction < 0:
        sample_pts = sample_pts[::-1]
    nxt = 0

    def record(t, v):
        nonlocal nxt
        while nxt < len(sample_pts) and (
            (direction > 0 and t >= sample_pts[nxt] - 1e-12 * T) or (direction < 0 and t <= sample_pts[nxt] + 1e-12 * T)
        ):
            times.append(t)
            fids.append(fid_at(t, v))
            nxt += 1

    t = 0.0 if direction > 0 else T
    record(t, psi)
    nsteps = rejected = 0
    if not adaptive:
        n = steps if steps is not None else max(min_steps, math.ceil(T / max_dt))
        if n > max_steps:
            raise IntegrationError(f"{n} steps exceeds max_steps={max_steps}")
        h = T / n
        for k in range(n):
            a = k * h if direction > 0 else T - (k + 1) * h
            psi = step(a, h, psi)
            nsteps += 1
            drift = max(drift, abs(np.linalg.norm(psi) - 1.0))
            t = (k + 1) * h if direction > 0 else T - (k + 1) * h
            record(t, psi)
    else:
        p = order
        h = T / min_steps
        done = 0.0
        while done < T * (1 - 1e-14):
            h = min(h, T - done)
            a = done if direction > 0 else T - done - h
            if direction > 0:
                coarse = step(a, h, psi)
                fine = step(a + 0.5 * h, 0.5 * h, step(a, 0.5 * h, psi))
            else:
                coarse = step(a, h, psi)
                fine = step(a, 0.5 * h, step(a + 0.5 * h, 0.5 * h, psi))
            err = np.linalg.norm(fine - coarse) / (2**p - 1)
            allowed = tol * h / T
            if err <= allowed:
                psi = fine
                done += h
                nsteps += 1
                drift = max(drift, abs(np.linalg.norm(psi) - 1.0))
                t = done if direction > 0 else T - done
                record(t, psi)
            else:
                rejected += 1
            fac = 2.0 if err == 0 else min(2.0, max(0.2, 0.9 * (allowed / err) ** (1.0 / p)))
            h *= fac
            if h < 1e-13 * T or nsteps + rejected > max_steps:
                raise IntegrationError(f"step size collapsed at t={t:.6g} (h={h:.3g})")
    return EvolutionResult(psi, np.array(times), np.array(fids), drift, nsteps, rejected)


def convergence_ratio(path: Path, schedule: Schedule, psi0, steps: int, order: int = 2, reference_steps: int | None = None) -> float:
    """Error reduction factor when the step count is doubled.

    The reference solution uses the fourth-order scheme with many more steps.
    """
    ref_n = reference_steps or 16 * steps
    ref = evolve(path, schedule, psi0, steps=ref_n, order=4, target=None).final_state
    e1 = np.linalg.norm(evolve(path, schedule, psi0, steps=steps, order=order, target=None).final_state - ref)
    e2 = np.linalg.norm(evolve(path, schedule, psi0, steps=2 * steps, order=order, target=None).final_state - ref)
    return float(e1 / e2)


# --- gaps along a path -----------------------------------------------------------------


def _levels(path: Path, s: float, k: int = 2) -> np.ndarray:
    A = _operator(path(s))
    A = A.toarray() if sp.issparse(A) else A
    return np.linalg.eigvalsh(A)[:k]


def min_gap_along_path(
    path: Path,
    s_points: int = 64,
    bounds: tuple[float, float] = (0.0, 1.0),
    refine: bool = True,
    levels: tuple[int, int] = (0, 1),
) -> tuple[float, float]:
    """Location and value of the smallest gap between two levels.

    Scans at least 64 points, then refines around the best grid point with a
    bounded golden-section/parabolic search.
    """
    s_points = max(64, s_points)
    lo, hi = bounds
    grid = np.linspace(lo, hi, s_points)
    a, b = levels

    def gap(s):
        w = _levels(path, s, b + 1)
        return float(w[b] - w[a])

    g = np.array([gap(s) for s in grid])
    k = int(np.argmin(g))
    if not refine:
        return float(grid[k]), float(g[k])
    left, right = grid[max(k - 1, 0)], grid[min(k + 1, len(grid) - 1)]
    if right <= left:
        return float(grid[k]), float(g[k])
    res = minimize_scalar(gap, bounds=(left, right), method="bounded", options={"xatol": 1e-12 * max(1.0, hi - lo)})
    if res.fun <= g[k]:
        return float(res.x), float(res.fun)
    return float(grid[k]), float(g[k])


@dataclass(frozen=True)
class SweepResult:
    total_times: np.ndarray
    fidelities: np.ndarray
    min_gap: float
    s_at_min_gap: float
    norm_drift: float

    def to_dict(self) -> dict:
        return {
            "T": self.total_times.tolist(),
            "fidelity": self.fidelities.tolist(),
            "min_gap": self.min_gap,
            "s_at_min_gap": self.s_at_min_gap,
            "norm_drift": self.norm_drift,
        }


def adiabatic_sweep(
    path: Path,
    psi0,
    target,
    total_times: Sequence[float],
    start: float = 0.0,
    end: float = 1.0,
    s_points: int = 64,
    **evolve_kwargs,
) -> SweepResult:
    """Final fidelity with ``target`` for linear sweeps of several durations."""
    lo, hi = min(start, end), max(start, end)
    s_min, g_min = min_gap_along_path(path, s_points, (lo, hi))
    fids, drift = [], 0.0
    for T in total_times:
        res = evolve(path, linear_schedule(start, end, T), psi0, target=target, samples=1, **evolve_kwargs)
        fids.append(fidelity(target, res.final_state))
        drift = max(drift, res.norm_drift)
    return SweepResult(np.asarray(total_times, float), np.asarray(fids), g_min, s_min, drift)


# --- randomized evolution ----------------------------------------------------------


@dataclass(frozen=True)
class ZenoResult:
    final_state: np.ndarray
    fidelity: float
    realized_time: float
    durations: np.ndarray
    norm_drift: float


def zeno_randomized_evolution(
    path: Path,
    params: Sequence[float],
    delta: float,
    seed: int,
    c3: float = 2 * math.pi,
    psi0=None,
    target=None,
    degeneracy_tol: float = 1e-12,
) -> ZenoResult:
    """Walk through ground states by evolving for random durations.

    For each parameter after the first, applies ``exp(+i H (tau1 + tau2))``
    with ``tau1, tau2 ~ U[0, c3 / delta]``. This dephases the excited
    components, so the state approximately follows the sequence of ground
    states. ``delta`` should lower-bound the gaps along the path.
    """
    if delta <= 0:
        raise ValueError("delta must be positive")
    rng = make_rng(seed)
    first = _operator(path(params[0]))
    first = first.toarray() if sp.issparse(first) else first
    if psi0 is None:
        psi = np.linalg.eigh(first)[1][:, 0].astype(complex)
    else:
        psi = np.asarray(psi0.amplitudes if isinstance(psi0, StateVector) else psi0, dtype=complex).copy()
    durations, drift = [], 0.0
    last = None
    for p in params[1:]:
        H = _operator(path(p))
        H = H.toarray() if sp.issparse(H) else H
        w, V = np.linalg.eigh(H)
        scale = max(1.0, float(np.max(np.abs(w))))
        if w[1] - w[0] < degeneracy_tol * scale:
            raise DegenerateStepError(f"degenerate ground level at parameter {p}")
        tau = float(rng.uniform(0, c3 / delta, 2).sum())
        psi = V @ (np.exp(1j * tau * w) * (V.conj().T @ psi))
        durations.append(tau)
        drift = max(drift, abs(np.linalg.norm(psi) - 1.0))
        last = V[:, 0]
    if target is None:
        target = last if last is not None else np.linalg.eigh(first)[1][:, 0]
    return ZenoResult(psi, fidelity(target, psi), float(np.sum(durations)), np.asarray(durations), drift)
