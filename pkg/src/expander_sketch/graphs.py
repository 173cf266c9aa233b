"""Regular graphs, spectral certification, double covers and the mixing lemma."""

from __future__ import annotations

import math
from collections import Counter
from dataclasses import dataclass, field, replace
from functools import cached_property
from pathlib import Path

import numpy as np
import scipy.sparse as sp
from scipy.sparse.csgraph import connected_components


class GraphError(ValueError):
    pass


class DisconnectedGraphError(GraphError):
    pass


class CertificationError(GraphError):
    pass


class ConvergenceError(RuntimeError):
    def __init__(self, message: str, last_estimate: float):
        super().__init__(message)
        self.last_estimate = last_estimate


@dataclass(frozen=True, eq=False)
class RegularGraph:
    """Simple undirected d-regular graph on vertices ``0..N-1``.

    ``edges`` is an ``(N*d/2, 2)`` integer array of pairs ``u < v`` in
    lexicographic order.
    """

    N: int
    d: int
    edges: np.ndarray
    certified_lambda: float | None = None

    def __post_init__(self):
        edges = np.asarray(self.edges, dtype=np.int64).reshape(-1, 2)
        edges = np.sort(edges, axis=1)
        edges = edges[np.lexsort((edges[:, 1], edges[:, 0]))]
        edges.setflags(write=False)
        object.__setattr__(self, "edges", edges)
        _check_regular(self.N, self.d, edges)
        if self.certified_lambda is not None and not 0 <= self.certified_lambda < self.d:
            raise GraphError(f"certified lambda {self.certified_lambda} must lie in [0, d={self.d})")

    @cached_property
    def adjacency(self) -> sp.csr_matrix:
        u, v = self.edges[:, 0], self.edges[:, 1]
        rows = np.concatenate([u, v])
        cols = np.concatenate([v, u])
        data = np.ones(rows.size)
        return sp.csr_matrix((data, (rows, cols)), shape=(self.N, self.N))

    @cached_property
    def neighbors(self) -> np.ndarray:
        """``(N, d)`` array of sorted neighbour lists."""
        A = self.adjacency
        return A.indices.reshape(self.N, self.d).copy()

    def is_connected(self) -> bool:
        n_comp, _ = connected_components(self.adjacency, directed=False)
        return n_comp == 1

    def is_bipartite(self) -> bool:
        color = np.full(self.N, -1)
        nbrs = self.neighbors
        for root in range(self.N):
            if color[root] >= 0:
                continue
            color[root] = 0
            stack = [root]
            while stack:
                u = stack.pop()
                for w in nbrs[u]:
                    if color[w] < 0:
                        color[w] = 1 - color[u]
                        stack.append(w)
                    elif color[w] == color[u]:
                        return False
        return True


def _check_regular(N: int, d: int, edges: np.ndarray) -> None:
    if N < 1 or d < 1:
        raise GraphError("N and d must be positive")
    if d >= N:
        raise GraphError(f"degree d={d} must be smaller than N={N}")
    if (N * d) % 2:
        raise GraphError(f"N*d = {N * d} is odd; no {d}-regular graph on {N} vertices exists")
    if edges.shape[0] != N * d // 2:
        raise GraphError(f"expected {N * d // 2} edges, got {edges.shape[0]}")
    if edges.size and (edges.min() < 0 or edges.max() >= N):
        raise GraphError("vertex index out of range")
    if np.any(edges[:, 0] == edges[:, 1]):
        raise GraphError("graph has a self-loop")
    if edges.shape[0] > 1 and np.any(np.all(edges[1:] == edges[:-1], axis=1)):
        raise GraphError("graph has a repeated edge")
    deg = np.bincount(edges.ravel(), minlength=N)
    if np.any(deg != d):
        raise GraphError("graph is not regular")


def complete_graph(N: int) -> RegularGraph:
    u, v = np.triu_indices(N, k=1)
    return RegularGraph(N, N - 1, np.column_stack([u, v]))


def cycle_graph(N: int) -> RegularGraph:
    u = np.arange(N)
    return RegularGraph(N, 2, np.column_stack([u, (u + 1) % N]))


def random_regular(
    N: int,
    d: int,
    seed=None,
    *,
    method: str = "auto",
    max_tries: int = 1000,
) -> RegularGraph:
    """Sample a simple d-regular graph on N vertices from the pairing model.

    ``method="pairing"`` rejects any pairing with a loop or a repeated edge and
    redraws, up to ``max_tries`` times. ``method="switch"`` keeps the first
    pairing and repairs its defects with degree-preserving double-edge
    switches, which is the only practical route once ``d`` is more than a
    handful (the simple-pairing probability decays like ``exp(-d**2/4)``).
    ``"auto"`` picks pairing for ``d <= 4`` and switching otherwise.
    """
    if N * d % 2:
        raise GraphError(f"N*d = {N * d} is odd; no {d}-regular graph on {N} vertices exists")
    if not 0 < d < N:
        raise GraphError(f"need 0 < d < N, got d={d}, N={N}")
    rng = np.random.default_rng(seed)
    if method == "auto":
        method = "pairing" if d <= 4 else "switch"
    stubs = np.repeat(np.arange(N), d)

    if method == "pairing":
        for _ in range(max_tries):
            pairs = np.sort(rng.permutation(stubs).reshape(-1, 2), axis=1)
            if np.any(pairs[:, 0] == pairs[:, 1]):
                continue
            keys = pairs[:, 0] * N + pairs[:, 1]
            if np.unique(keys).size == keys.size:
                return RegularGraph(N, d, pairs)
        raise GraphError(
            f"pairing model produced no simple graph in {max_tries} tries; "
            f"(N={N}, d={d}) is too dense for rejection sampling, use method='switch'"
        )
    if method == "switch":
        pairs = rng.permutation(stubs).reshape(-1, 2)
        return RegularGraph(N, d, _repair_by_switching(pairs, N, rng, max_tries))
    raise ValueError(f"unknown method {method!r}")


def _edge_key(a: int, b: int) -> tuple[int, int]:
    return (a, b) if a < b else (b, a)


def _repair_by_switching(pairs: np.ndarray, N: int, rng, max_rounds: int) -> np.ndarray:
    edges = [tuple(p) for p in pairs.tolist()]
    count = Counter(_edge_key(a, b) for a, b in edges)
    # every copy of a repeated edge is queued; copies left single are skipped on pop
    bad = [i for i, (a, b) in enumerate(edges) if a == b or count[_edge_key(a, b)] > 1]
    M = len(edges)
    budget = max_rounds * max(M, 1)
    attempts = 0
    while bad:
        i = bad[-1]
        a, b = edges[i]
        if a != b and count[_edge_key(a, b)] == 1:
            bad.pop()
            continue
        attempts += 1
        if attempts > budget:
            raise GraphError("switch repair did not converge; parameters are too dense")
        j = int(rng.integers(M))
        if j == i:
            continue
        c, e = edges[j]
        if rng.random() < 0.5:
            c, e = e, c
        if a == c or b == e:
            continue
        k1, k2 = _edge_key(a, c), _edge_key(b, e)
        if k1 == k2 or k1 in count or k2 in count:
            continue
        for old in (_edge_key(a, b), _edge_key(c, e)):
            count[old] -= 1
            if not count[old]:
                del count[old]
        count[k1] += 1
        count[k2] += 1
        edges[i] = (a, c)
        edges[j] = (b, e)
        bad.pop()
    return np.array(edges, dtype=np.int64)


def second_eigenvalue(
    G: RegularGraph,
    tol: float = 1e-6,
    max_iters: int = 100_000,
    seed=0,
    *,
    signed: bool = False,
) -> float:
    """Second adjacency eigenvalue of G by power iteration on the complement of 𝟙.

    With ``signed=False`` (the expander parameter) this is the largest
    magnitude eigenvalue orthogonal to the all-ones vector; with
    ``signed=True`` it is the largest algebraic one. The iterate is
    re-projected against 𝟙 every step. Stops once the estimate has stagnated
    below ``tol / 10`` and the geometric tail of the remaining changes is below
    ``tol / 10`` as well.
    """
    if tol <= 0:
        raise ValueError("tol must be positive")
    if not G.is_connected():
        raise DisconnectedGraphError("graph is disconnected; its second eigenvalue equals d")
    A = G.adjacency
    shift = float(G.d) if signed else 0.0
    rng = np.random.default_rng(seed)
    v = rng.standard_normal(G.N)
    v -= v.mean()
    v /= np.linalg.norm(v)
    est = prev_delta = None
    for _ in range(max_iters):
        w = A @ v
        if shift:
            w += shift * v
        w -= w.mean()
        norm = np.linalg.norm(w)
        new = float(v @ w) - shift if signed else float(norm)
        if norm == 0.0:
            return 0.0
        v = w / norm
        if est is not None:
            delta = abs(new - est)
            if delta == 0.0:
                return new
            if delta < tol / 10 and prev_delta:
                q = delta / prev_delta
                if q < 1 and delta * q / (1 - q) < tol / 10:
                    return new
            prev_delta = delta
        est = new
    raise ConvergenceError(
        f"power iteration did not converge in {max_iters} iterations (last estimate {est})", est
    )


def certify(G: RegularGraph, tol: float = 1e-6, max_iters: int = 100_000, seed=0) -> RegularGraph:
    """Return a copy of G carrying the upper bound ``lambda_hat + tol``."""
    lam = second_eigenvalue(G, tol=tol, max_iters=max_iters, seed=seed)
    bound = lam + tol
    if bound >= G.d:
        raise CertificationError(
            f"second eigenvalue {lam:.6g} is not below d={G.d}; bipartite graphs cannot be certified"
        )
    return replace(G, certified_lambda=bound)


@dataclass(frozen=True, eq=False)
class DoubleCover:
    """Bipartite double cover with edge labels ``0..N*d-1``.

    Edge ``label`` joins left vertex ``left[label]`` and right vertex
    ``right[label]``. Labels follow lexicographic order of (left, right), so
    ``gamma_left[u]`` is the block ``u*d .. u*d+d-1``. ``gamma_right[v]``
    lists the labels at right vertex v in increasing order.
    """

    N: int
    d: int
    left: np.ndarray
    right: np.ndarray
    gamma_left: np.ndarray
    gamma_right: np.ndarray
    graph: RegularGraph | None = field(default=None, repr=False)

    @property
    def n_edges(self) -> int:
        return self.N * self.d

    def gamma(self, v: int, side: str) -> np.ndarray:
        return (self.gamma_left if side == "L" else self.gamma_right)[v]

    def edge_list(self) -> list[tuple[int, int, int]]:
        return [(int(u), int(v), i) for i, (u, v) in enumerate(zip(self.left, self.right))]


def double_cover(G: RegularGraph) -> DoubleCover:
    u, v = G.edges[:, 0], G.edges[:, 1]
    left = np.concatenate([u, v])
    right = np.concatenate([v, u])
    order = np.lexsort((right, left))
    left, right = left[order], right[order]
    gamma_left = np.arange(G.N * G.d).reshape(G.N, G.d)
    gamma_right = np.argsort(right, kind="stable").reshape(G.N, G.d)
    for arr in (left, right, gamma_left, gamma_right):
        arr.setflags(write=False)
    return DoubleCover(G.N, G.d, left, right, gamma_left, gamma_right, G)


def _mask(N: int, vertices) -> np.ndarray:
    m = np.zeros(N, dtype=bool)
    idx = np.asarray(list(vertices) if not isinstance(vertices, np.ndarray) else vertices, dtype=np.int64)
    m[idx] = True
    return m


def edges_between(H: DoubleCover, S, T) -> int:
    """Number of edges of H with left end in S and right end in T."""
    in_S = S if isinstance(S, np.ndarray) and S.dtype == bool else _mask(H.N, S)
    in_T = T if isinstance(T, np.ndarray) and T.dtype == bool else _mask(H.N, T)
    return int(np.count_nonzero(in_S[H.left] & in_T[H.right]))


def mixing_discrepancy(H: DoubleCover, S, T, lam: float) -> tuple[float, float]:
    """Return ``(| |E(S,T)| - d|S||T|/N |, lam * sqrt(|S||T|))``."""
    in_S, in_T = _mask(H.N, S), _mask(H.N, T)
    s, t = int(in_S.sum()), int(in_T.sum())
    lhs = abs(edges_between(H, in_S, in_T) - H.d * s * t / H.N)
    return lhs, lam * math.sqrt(s * t)


@dataclass
class MixingReport:
    trials: int
    max_ratio: float
    violations: int
    passed: bool
    worst: tuple[int, int, float, float] | None = None  # (|S|, |T|, lhs, rhs)


def mixing_check(H: DoubleCover, lam: float, trials: int = 1000, seed=0) -> MixingReport:
    """Test the bipartite mixing bound on random vertex-set pairs.

    Trial ``t`` draws from its own stream ``default_rng([seed, t])`` so the
    report does not depend on evaluation order.
    """
    max_ratio = 0.0
    violations = 0
    worst = None
    slack = 1e-9 * H.d * H.N
    for t in range(trials):
        rng = np.random.default_rng([int(seed), t])
        s, k = rng.integers(0, H.N + 1, size=2)
        S = rng.choice(H.N, size=s, replace=False)
        T = rng.choice(H.N, size=k, replace=False)
        lhs, rhs = mixing_discrepancy(H, S, T, lam)
        if lhs > rhs + slack:
            violations += 1
        ratio = lhs / rhs if rhs > 0 else 0.0
        if ratio >= max_ratio:
            max_ratio = ratio
            worst = (int(s), int(k), lhs, rhs)
    return MixingReport(trials, max_ratio, violations, violations == 0, worst)


def write_graph(G: RegularGraph, path) -> None:
    lines = [f"{G.N} {G.d}"] + [f"{u} {v}" for u, v in G.edges.tolist()]
    Path(path).write_text("\n".join(lines) + "\n")


def read_graph(path, certified_lambda: float | None = None) -> RegularGraph:
    text = Path(path).read_text().split("\n")
    rows = [line.split() for line in text if line.strip()]
    if not rows or len(rows[0]) != 2:
        raise GraphError(f"{path}: first line must be 'N d'")
    N, d = int(rows[0][0]), int(rows[0][1])
    edges = []
    for lineno, row in enumerate(rows[1:], start=2):
        if len(row) != 2:
            raise GraphError(f"{path}:{lineno}: expected 'u v'")
        u, v = int(row[0]), int(row[1])
        if not u < v:
            raise GraphError(f"{path}:{lineno}: edges must be written with u < v")
        edges.append((u, v))
    return RegularGraph(N, d, np.array(edges, dtype=np.int64).reshape(-1, 2), certified_lambda)
