"""Spectral gap amplification.

Given a reversible chain, every transition edge ``(i, j)`` defines the state
``mu_ij = sqrt(Pr(i|j)) |j> - sqrt(Pr(j|i)) |i>``. Edges of one color share no
vertex, so ``O_k = sum |mu><mu|`` over color ``k`` has the closed-form square
root ``sum |mu><mu| / |mu|``. The amplified operator couples each ``sqrt(O_k)``
to an ancilla register::

    A = sum_k sqrt(O_k) (x) (|k><0| + |0><k|)
    H_amp = A + sqrt(delta) (1 - |0><0|)

Ancilla is the slow index: global index ``= ancilla * N + state``.
"""
from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np
import scipy.sparse as sp

from .errors import ColoringError, NotFrustrationFreeError
from .markov import StochasticMatrix, chain_spectrum
from .operators import SparseHermitian, Spectrum, exact_spectrum, nearest_eigenvalues
from .qmap import FrustrationFreeHamiltonian

AMPLIFIED_TAG = "computational(x)ancilla"


@dataclass(frozen=True, eq=False)
class TransitionGraph:
    """Undirected transition edges ``i < j`` with their two transition probabilities."""

    n_vertices: int
    edges: np.ndarray  # (m, 2)
    p_forward: np.ndarray  # Pr(i | j)
    p_backward: np.ndarray  # Pr(j | i)
    colors: np.ndarray

    @property
    def q(self) -> int:
        return int(self.colors.max()) + 1 if len(self.colors) else 0

    @property
    def max_degree(self) -> int:
        if not len(self.edges):
            return 0
        return int(np.bincount(self.edges.ravel(), minlength=self.n_vertices).max())

    def edge_vectors(self) -> tuple[np.ndarray, np.ndarray]:
        """Amplitudes of each edge state on ``|i>`` and ``|j>``."""
        return -np.sqrt(self.p_backward), np.sqrt(self.p_forward)


def check_coloring(edges: np.ndarray, colors: np.ndarray, n_vertices: int) -> None:
    for k in np.unique(colors):
        ends = edges[colors == k].ravel()
        if len(np.unique(ends)) != len(ends):
            raise ColoringError(f"color {k} has two edges sharing a vertex")


def greedy_edge_coloring(edges: np.ndarray, n_vertices: int) -> np.ndarray:
    """Proper edge coloring with at most ``D + 1`` colors.

    Edges are visited by decreasing endpoint degree sum (stable, so ties keep
    input order) and take the first color free at both ends. If that exceeds
    ``D + 1`` colors the Misra-Gries construction is used instead.
    """
    edges = np.asarray(edges, dtype=np.int64).reshape(-1, 2)
    m = len(edges)
    if m == 0:
        return np.zeros(0, dtype=np.int64)
    deg = np.bincount(edges.ravel(), minlength=n_vertices)
    D = int(deg.max())
    order = np.argsort(-(deg[edges[:, 0]] + deg[edges[:, 1]]), kind="stable")
    used = np.zeros((n_vertices, 2 * D + 1), dtype=bool)
    colors = np.empty(m, dtype=np.int64)
    for e in order:
        a, b = edges[e]
        c = int(np.argmin(used[a] | used[b]))
        colors[e] = c
        used[a, c] = used[b, c] = True
    if colors.max() + 1 > D + 1:
        colors = misra_gries_coloring(edges, n_vertices)
    return colors


def misra_gries_coloring(edges: np.ndarray, n_vertices: int) -> np.ndarray:
    """Misra-Gries edge coloring using at most ``D + 1`` colors."""
    edges = np.asarray(edges, dtype=np.int64).reshape(-1, 2)
    deg = np.bincount(edges.ravel(), minlength=n_vertices)
    ncol = int(deg.max()) + 1
    at: list[dict[int, int]] = [dict() for _ in range(n_vertices)]  # color -> neighbour
    col: dict[tuple[int, int], int] = {}
    nbrs: list[list[int]] = [[] for _ in range(n_vertices)]
    for a, b in edges:
        nbrs[a].append(int(b))
        nbrs[b].append(int(a))

    def key(a, b):
        return (a, b) if a < b else (b, a)

    def free(v):
        for c in range(ncol):
            if c not in at[v]:
                return c
        raise ColoringError("no free color")  # unreachable with D + 1 colors

    def is_free(v, c):
        return c not in at[v]

    def set_color(a, b, c):
        old = col.get(key(a, b))
        if old is not None:
            del at[a][old], at[b][old]
        if c is None:
            col.pop(key(a, b), None)
        else:
            col[key(a, b)] = c
            at[a][c] = b
            at[b][c] = a

    for u, v in edges.tolist():
        # maximal fan of u starting at v
        fan = [v]
        infan = {v}
        grew = True
        while grew:
            grew = False
            for w in nbrs[u]:
                if w in infan:
                    continue
                c = col.get(key(u, w))
                if c is not None and is_free(fan[-1], c):
                    fan.append(w)
                    infan.add(w)
                    grew = True
                    break
        c = free(u)
        d = free(fan[-1])
        # invert the cd path from u
        if not is_free(u, d):
            path = [u]
            cur, want = u, d
            while want in at[cur]:
                nxt = at[cur][want]
                path.append(nxt)
                cur, want = nxt, (c if want == d else d)
            segs = [(path[k], path[k + 1], col[key(path[k], path[k + 1])]) for k in range(len(path) - 1)]
            for a, b, _ in segs:
                set_color(a, b, None)
            for a, b, cc in segs:
                set_color(a, b, d if cc == c else c)
        # first fan vertex where d is free; the prefix up to it is still a fan
        k = next(i for i, w in enumerate(fan) if is_free(w, d) and _prefix_is_fan(u, fan[: i + 1], col, at, key))
        for i in range(k):
            nc = col[key(u, fan[i + 1])]
            set_color(u, fan[i + 1], None)
            set_color(u, fan[i], nc)
        set_color(u, fan[k], d)
    out = np.array([col[key(int(a), int(b))] for a, b in edges], dtype=np.int64)
    check_coloring(edges, out, n_vertices)
    return out


def _prefix_is_fan(u, fan, col, at, key) -> bool:
    for i in range(1, len(fan)):
        c = col.get(key(u, fan[i]))
        if c is None or c in at[fan[i - 1]]:
            return False
    return True


def transition_graph(S: StochasticMatrix) -> TransitionGraph:
    """Edges of a chain with colors.

    Single-flip chains are colored by the flipped site (``q = n``); other
    chains use :func:`greedy_edge_coloring`.
    """
    M = S.matrix.tocsr()
    U = sp.triu(M + M.T, k=1).tocoo()
    keep = U.data != 0
    i, j = U.row[keep].astype(np.int64), U.col[keep].astype(np.int64)
    order = np.lexsort((j, i))
    i, j = i[order], j[order]
    edges = np.stack([i, j], axis=1)
    pf = np.asarray(M[i, j]).ravel()
    pb = np.asarray(M[j, i]).ravel()
    if S.neighborhood == "single_flip":
        colors = np.log2(i ^ j).round().astype(np.int64)
    else:
        colors = greedy_edge_coloring(edges, S.dim)
    return TransitionGraph(S.dim, edges, pf, pb, colors)


@dataclass(frozen=True, eq=False)
class AmplifiedOperator:
    a_matrix: SparseHermitian
    h_tilde: SparseHermitian
    n_states: int
    n_colors: int
    delta_bound: float
    sqrt_terms: list[sp.csr_matrix] = field(repr=False)

    @property
    def penalty(self) -> float:
        return float(np.sqrt(self.delta_bound))

    def lift(self, v: np.ndarray, k: int = 0) -> np.ndarray:
        """Embed a system vector with ancilla in state ``|k>``."""
        out = np.zeros(self.h_tilde.dim, dtype=np.result_type(v, float))
        out[k * self.n_states : (k + 1) * self.n_states] = v
        return out


def _sqrt_terms_from_graph(g: TransitionGraph) -> list[sp.csr_matrix]:
    ai, aj = g.edge_vectors()
    norm2 = ai**2 + aj**2
    i, j = g.edges[:, 0], g.edges[:, 1]
    out = []
    for k in range(g.q):
        sel = g.colors == k
        ii, jj, vi, vj, nn = i[sel], j[sel], ai[sel], aj[sel], np.sqrt(norm2[sel])
        rows = np.concatenate([ii, ii, jj, jj])
        cols = np.concatenate([ii, jj, ii, jj])
        data = np.concatenate([vi * vi, vi * vj, vj * vi, vj * vj]) / np.tile(nn, 4)
        out.append(sp.csr_matrix((data, (rows, cols)), shape=(g.n_vertices, g.n_vertices)))
    return out


def _sqrt_terms_from_ff(ff: FrustrationFreeHamiltonian) -> list[sp.csr_matrix]:
    out = []
    N = ff.total.dim
    idx = np.arange(N)
    for l, T in enumerate(ff.terms):
        M = T.matrix
        d = M.diagonal()
        partner = idx ^ (1 << l)
        trace = d + d[partner]
        off = np.asarray(M[partner, idx]).ravel()
        # each 2x2 block is rank one, so its square root is block / sqrt(trace)
        if np.max(np.abs(d * d[partner] - off**2)) > 1e-9 * np.max(trace) ** 2:
            raise NotFrustrationFreeError(f"term {l} is not a rank-one pair operator")
        out.append(sp.csr_matrix(sp.diags(1.0 / np.sqrt(trace)) @ M))
    return out


def build_amplified(
    source: TransitionGraph | FrustrationFreeHamiltonian,
    delta_bound: float | None = None,
    base_gap: float | None = None,
) -> AmplifiedOperator:
    """Assemble the amplified operator.

    ``source`` is a colored transition graph or a per-site term list.
    ``delta_bound`` must lie in ``(0, gap]``; it defaults to the exact gap of
    the unamplified Hamiltonian (computed if ``base_gap`` is not supplied).
    """
    if isinstance(source, TransitionGraph):
        check_coloring(source.edges, source.colors, source.n_vertices)
        terms = _sqrt_terms_from_graph(source)
        N = source.n_vertices
    elif isinstance(source, FrustrationFreeHamiltonian):
        terms = _sqrt_terms_from_ff(source)
        N = source.total.dim
    else:
        raise TypeError("source must be a TransitionGraph or FrustrationFreeHamiltonian")
    q = len(terms)
    if delta_bound is None:
        if base_gap is None:
            base = sum(t @ t for t in terms)
            base_gap = exact_spectrum(base, k=2).gap
        delta_bound = base_gap
    if not delta_bound > 0:
        raise ValueError("delta_bound must be positive")
    rows, cols, data = [], [], []
    for k, T in enumerate(terms, start=1):
        C = T.tocoo()
        rows += [k * N + C.row, C.row]
        cols += [C.col, k * N + C.col]
        data += [C.data, C.data]
    D = (q + 1) * N
    A = sp.csr_matrix((np.concatenate(data), (np.concatenate(rows), np.concatenate(cols))), shape=(D, D))
    pen = np.zeros(D)
    pen[N:] = np.sqrt(delta_bound)
    Ht = A + sp.diags(pen)
    return AmplifiedOperator(
        SparseHermitian(A, AMPLIFIED_TAG),
        SparseHermitian(sp.csr_matrix(Ht), AMPLIFIED_TAG),
        N,
        q,
        float(delta_bound),
        terms,
    )


def base_hamiltonian(amp: AmplifiedOperator) -> sp.csr_matrix:
    """``sum_k O_k`` rebuilt from the square-root terms."""
    return sp.csr_matrix(sum(t @ t for t in amp.sqrt_terms))


def block_eigenvalues(lam, penalty: float) -> tuple[np.ndarray, np.ndarray]:
    """Eigenvalues of ``[[0, sqrt(lam)], [sqrt(lam), penalty]]``."""
    lam = np.asarray(lam, dtype=float)
    r = np.sqrt(penalty**2 + 4 * lam)
    return 0.5 * (penalty - r), 0.5 * (penalty + r)


def relevant_gap(eigenvalues) -> float:
    """Second-smallest ``|eigenvalue|``; the smallest belongs to the target state."""
    a = np.sort(np.abs(np.asarray(eigenvalues)))
    return float(a[1])


@dataclass(frozen=True)
class AmplifiedReport:
    max_sqrt_deviation: float
    max_block_deviation: float
    relevant_gap: float
    base_gap: float
    ratio: float
    zero_degeneracy: int
    predicted_relevant_gap: float

    def to_dict(self) -> dict:
        return dict(self.__dict__)


def _match(predicted: np.ndarray, found: np.ndarray) -> float:
    if not len(predicted):
        return 0.0
    return float(np.max(np.min(np.abs(predicted[:, None] - found[None, :]), axis=1)))


def verify_amplified_spectrum(amp: AmplifiedOperator, base: Spectrum | None = None, zero_tol: float = 1e-9) -> AmplifiedReport:
    """Compare the amplified spectra with predictions from the base spectrum.

    Every nonzero base eigenvalue ``lam`` must appear as ``+-sqrt(lam)`` in
    the spectrum of ``A`` and as the two roots of the 2x2 block in the
    spectrum of ``H_amp``. Dense; intended for small systems.
    """
    H = base_hamiltonian(amp)
    lam = base.eigenvalues if base is not None else np.linalg.eigvalsh(H.toarray())
    lam = np.sort(lam)
    scale = max(1.0, float(np.max(np.abs(lam))))
    nz = lam[lam > zero_tol * scale]
    evA = np.linalg.eigvalsh(amp.a_matrix.toarray())
    evH = np.linalg.eigvalsh(amp.h_tilde.toarray())
    pred_a = np.concatenate([np.sqrt(nz), -np.sqrt(nz)])
    lo, hi = block_eigenvalues(nz, amp.penalty)
    pred_h = np.concatenate([lo, hi])
    gap_base = float(nz[0]) if len(nz) else 0.0
    rg = relevant_gap(evH)
    pred_rg = float(min(np.min(np.abs(lo)), amp.penalty)) if len(nz) else amp.penalty
    zdeg = int(np.sum(np.abs(evH) < zero_tol * max(1.0, float(np.max(np.abs(evH))))))
    return AmplifiedReport(
        max_sqrt_deviation=_match(pred_a, evA),
        max_block_deviation=_match(pred_h, evH),
        relevant_gap=rg,
        base_gap=gap_base,
        ratio=rg / np.sqrt(gap_base) if gap_base > 0 else float("nan"),
        zero_degeneracy=zdeg,
        predicted_relevant_gap=pred_rg,
    )


def amplified_relevant_gap(amp: AmplifiedOperator, k: int = 4) -> float:
    """Relevant gap of ``H_amp`` via eigenvalues nearest zero (matrix-free for large operators)."""
    return relevant_gap(nearest_eigenvalues(amp.h_tilde, 0.0, k=k))


@dataclass(frozen=True)
class GapScalingRow:
    label: str
    n_states: int
    base_gap: float
    amplified_gap: float
    n_colors: int

    @property
    def ratio(self) -> float:
        return self.amplified_gap / np.sqrt(self.base_gap)


def gap_scaling_study(chains: list[tuple[str, StochasticMatrix]], delta_factor: float = 1.0) -> list[GapScalingRow]:
    """Base and amplified gaps for a family of chains.

    ``delta_factor`` scales the penalty parameter relative to the exact base gap.
    """
    rows = []
    for label, S in chains:
        g = transition_graph(S)
        base_gap = chain_spectrum(S, k=2).gap
        amp = build_amplified(g, delta_bound=delta_factor * base_gap)
        rows.append(GapScalingRow(label, S.dim, base_gap, amplified_relevant_gap(amp), g.q))
    return rows
