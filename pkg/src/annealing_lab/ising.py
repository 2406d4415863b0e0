"""Classical objectives over spin configurations.

Conventions used throughout the package:

* a configuration is a vector of spins in {+1, -1};
* basis index ``k`` encodes spins bitwise with site 0 as the least
  significant bit and bit value 0 meaning spin +1;
* the Ising energy is ``E = sum_l h_l s_l + sum_{l != l'} J_{ll'} s_l s_l'``
  with ``J`` symmetric and zero on the diagonal, so each pair is counted twice.
"""
from __future__ import annotations

from dataclasses import dataclass, field
from functools import cached_property
from pathlib import Path
from typing import Any, Mapping, Sequence

import numpy as np
from scipy.special import logsumexp

from .errors import GuardExceededError, SchemaError
from .rng import make_rng
from .serialization import read_json, write_json

ENUMERATION_LIMIT = 24
_CHUNK = 1 << 18


def check_enumerable(n: int, limit: int = ENUMERATION_LIMIT) -> None:
    if n > limit:
        raise GuardExceededError(f"n={n} exceeds the exhaustive enumeration limit {limit}")


def spins_from_index(index, n: int) -> np.ndarray:
    """Spin vector(s) for basis index (or array of indices)."""
    idx = np.asarray(index, dtype=np.int64)
    bits = (idx[..., None] >> np.arange(n, dtype=np.int64)) & 1
    return (1 - 2 * bits).astype(np.int8)


def index_from_spins(spins) -> int | np.ndarray:
    s = np.asarray(spins)
    bits = (s < 0).astype(np.int64)
    out = (bits << np.arange(s.shape[-1], dtype=np.int64)).sum(axis=-1)
    return int(out) if out.ndim == 0 else out


def all_spins(n: int) -> np.ndarray:
    check_enumerable(n)
    return spins_from_index(np.arange(1 << n), n)


@dataclass(frozen=True)
class Configuration:
    spins: tuple[int, ...]

    @property
    def n(self) -> int:
        return len(self.spins)

    @property
    def index(self) -> int:
        return index_from_spins(self.spins)

    @classmethod
    def from_index(cls, index: int, n: int) -> "Configuration":
        return cls(tuple(int(v) for v in spins_from_index(index, n)))


@dataclass(frozen=True, eq=False)
class ObjectiveFunction:
    """Energy function over ``n`` spins.

    Either Ising form (``h``, ``J``) or an explicit ``table`` of energies
    indexed by basis index. ``e_max`` bounds ``|E|`` over all configurations.
    """

    n: int
    h: np.ndarray | None = None
    J: np.ndarray | None = None
    table: np.ndarray | None = None
    kind: str = "ising"
    metadata: dict = field(default_factory=dict)

    def __post_init__(self):
        if self.table is None and (self.h is None or self.J is None):
            raise SchemaError("objective needs (h, J) or an energy table")
        if self.table is not None and len(self.table) != 1 << self.n:
            raise SchemaError("energy table length must be 2**n")

    @property
    def dim(self) -> int:
        return 1 << self.n

    def energy(self, spins) -> float:
        s = np.asarray(spins)
        if self.table is not None:
            return float(self.table[index_from_spins(s)])
        s = s.astype(float)
        return float(self.h @ s + s @ self.J @ s)

    def __call__(self, config: Configuration | Sequence[int]) -> float:
        spins = config.spins if isinstance(config, Configuration) else config
        return self.energy(spins)

    def energies(self) -> np.ndarray:
        """Energies of all ``2**n`` configurations in basis order."""
        return self._energies

    @cached_property
    def _energies(self) -> np.ndarray:
        check_enumerable(self.n)
        if self.table is not None:
            return np.asarray(self.table, dtype=float)
        N = self.dim
        out = np.empty(N)
        for a in range(0, N, _CHUNK):
            s = spins_from_index(np.arange(a, min(a + _CHUNK, N)), self.n).astype(float)
            out[a : a + len(s)] = s @ self.h + np.einsum("ki,ij,kj->k", s, self.J, s)
        return out

    @cached_property
    def e_max(self) -> float:
        if self.n <= ENUMERATION_LIMIT:
            return float(np.max(np.abs(self.energies())))
        return float(np.abs(self.h).sum() + np.abs(self.J).sum())

    def flip_deltas(self, index: int) -> np.ndarray:
        """``E(flip_l s) - E(s)`` for every site ``l``."""
        if self.table is not None:
            flips = index ^ (1 << np.arange(self.n))
            return self.table[flips] - self.table[index]
        s = spins_from_index(index, self.n).astype(float)
        return -2.0 * s * (self.h + 2.0 * self.J @ s)

    def kappa_bound(self) -> float:
        """Upper bound on the largest single-flip energy change."""
        if self.table is not None:
            return float(2 * np.max(np.abs(self.table)))
        return float(np.max(2.0 * (np.abs(self.h) + 2.0 * np.abs(self.J).sum(axis=1))))


def build_ising(n: int, h, J, kind: str = "ising") -> ObjectiveFunction:
    """Validated Ising objective.

    ``J`` may be an ``n x n`` matrix or a list of ``(l, l', value)`` triples;
    triples are symmetrized. A nonzero diagonal or asymmetric matrix is rejected.
    """
    if n < 1:
        raise SchemaError("n must be positive")
    h = np.asarray(h, dtype=float)
    if h.shape != (n,):
        raise SchemaError(f"h must have length {n}")
    Jm = _coupling_matrix(n, J)
    if np.any(np.diag(Jm) != 0):
        raise SchemaError("coupling matrix must have zero diagonal")
    if not np.allclose(Jm, Jm.T, rtol=0, atol=1e-14):
        raise SchemaError("coupling matrix must be symmetric")
    if not (np.all(np.isfinite(h)) and np.all(np.isfinite(Jm))):
        raise SchemaError("fields and couplings must be finite")
    return ObjectiveFunction(n=n, h=h, J=Jm, kind=kind)


def _coupling_matrix(n: int, J) -> np.ndarray:
    if J is None:
        return np.zeros((n, n))
    arr = np.asarray(J, dtype=float)
    if arr.shape == (n, n):
        return arr.copy()
    if arr.size == 0:
        return np.zeros((n, n))
    if arr.ndim != 2 or arr.shape[1] != 3:
        raise SchemaError("J must be an n x n matrix or a list of (l, l', value)")
    Jm = np.zeros((n, n))
    for l, lp, v in arr:
        l, lp = int(l), int(lp)
        if not (0 <= l < n and 0 <= lp < n):
            raise SchemaError(f"coupling index out of range: ({l}, {lp})")
        if l == lp:
            raise SchemaError("self coupling is not allowed")
        Jm[l, lp] = Jm[lp, l] = v
    return Jm


def energy_table(n: int, values, kind: str = "table", **metadata) -> ObjectiveFunction:
    values = np.asarray(values, dtype=float)
    return ObjectiveFunction(n=n, table=values, kind=kind, metadata=dict(metadata))


def random_ising(n: int, seed: int, field_scale: float = 1.0, coupling_scale: float | None = None) -> ObjectiveFunction:
    """Random instance with uniform fields and mean-field scaled couplings.

    ``h_l ~ U[-field_scale, field_scale]`` and ``J_{ll'} ~ U[-c, c]`` with
    ``c = coupling_scale`` (default ``1/n``) so energies grow linearly in n.
    """
    rng = make_rng(seed, n)
    c = 1.0 / n if coupling_scale is None else coupling_scale
    h = rng.uniform(-field_scale, field_scale, n)
    J = np.triu(rng.uniform(-c, c, (n, n)), 1)
    return build_ising(n, h, J + J.T, kind="random")


def ferromagnet(n: int, coupling: float = -0.5, field: float = 0.0, ring: bool = True) -> ObjectiveFunction:
    """Uniform nearest-neighbour chain (or ring); negative coupling is ferromagnetic."""
    J = np.zeros((n, n))
    for l in range(n - 1 + (1 if ring and n > 2 else 0)):
        a, b = l, (l + 1) % n
        J[a, b] = J[b, a] = coupling
    return build_ising(n, np.full(n, field), J, kind="ferromagnet")


@dataclass(frozen=True)
class GibbsDistribution:
    beta: float
    probabilities: np.ndarray
    log_partition: float

    def sqrt_amplitudes(self) -> np.ndarray:
        return np.sqrt(self.probabilities)


def gibbs(E: ObjectiveFunction, beta: float) -> GibbsDistribution:
    """Gibbs weights ``exp(-beta E)/Z`` computed stably with log-sum-exp."""
    if not np.isfinite(beta) or beta < 0:
        raise ValueError("beta must be finite and nonnegative")
    logw = -beta * E.energies()
    logz = float(logsumexp(logw))
    p = np.exp(logw - logz)
    return GibbsDistribution(float(beta), p / p.sum(), logz)


def thermal_expectation(values, dist: GibbsDistribution) -> float:
    values = np.asarray(values, dtype=float)
    if values.shape != dist.probabilities.shape:
        raise ValueError("observable must be given on every configuration")
    return float(values @ dist.probabilities)


def site_energy_diff(E: ObjectiveFunction, l: int) -> np.ndarray:
    """Half the energy drop on flipping site ``l``, for every configuration.

    Returns ``(E(s) - E(flip_l s)) / 2`` in basis order. For Ising energies this
    equals ``s_l (h_l + 2 sum_l' J_{ll'} s_l')``.
    """
    if not 0 <= l < E.n:
        raise IndexError(f"site {l} out of range")
    vals = E.energies()
    idx = np.arange(E.dim)
    return 0.5 * (vals - vals[idx ^ (1 << l)])


def brute_force_minima(E: ObjectiveFunction, rtol: float = 1e-12) -> list[Configuration]:
    vals = E.energies()
    m = vals.min()
    tol = rtol * max(1.0, abs(m))
    return [Configuration.from_index(int(k), E.n) for k in np.flatnonzero(vals <= m + tol)]


def instance_to_dict(E: ObjectiveFunction) -> dict[str, Any]:
    if E.h is None:
        raise SchemaError("only Ising-form objectives have an instance file format")
    iu = np.argwhere(np.triu(E.J, 1) != 0)
    return {
        "n": E.n,
        "kind": E.kind,
        "h": [float(v) for v in E.h],
        "J": [[int(a), int(b), float(E.J[a, b])] for a, b in iu],
    }


def instance_from_dict(d: Mapping[str, Any]) -> ObjectiveFunction:
    extra = set(d) - {"n", "h", "J", "kind"}
    if extra:
        raise SchemaError(f"unknown instance keys: {sorted(extra)}")
    try:
        n = int(d["n"])
        h = d["h"]
        J = d.get("J", [])
    except KeyError as exc:
        raise SchemaError(f"instance is missing {exc}") from exc
    return build_ising(n, h, J if len(J) else None, kind=str(d.get("kind", "ising")))


def save_instance(path: str | Path, E: ObjectiveFunction) -> Path:
    return write_json(path, instance_to_dict(E))


def load_instance(path: str | Path) -> ObjectiveFunction:
    return instance_from_dict(read_json(path))
