"""Robust null space property (RNSP) verification and inner-code search.

A matrix M has the RNSP of order s with constants (rho, tau) when
``||x_S||_1 <= rho ||x_Sbar||_1 + tau ||M x||_1`` for all x and all |S| <= s.
The inequality is homogeneous, so for a fixed support S and sign pattern
sigma it holds iff the LP

    maximize sigma . x_S   subject to   rho ||x_Sbar||_1 + tau ||M x||_1 <= 1

has optimum at most 1. Both sides are monotone in S, so only |S| = s is
enumerated, and sigma -> -sigma is a symmetry, so the sign of the first
coordinate of S is pinned to +1.
"""

from __future__ import annotations

import itertools
import json
import math
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from .lp import OPTIMAL, UNBOUNDED, simplex

DEFAULT_LP_TOL = 1e-8
DEFAULT_BUDGET = 200_000


class BudgetExceeded(ValueError):
    pass


class SearchFailed(RuntimeError):
    def __init__(self, message: str, best_nsp_constant: float):
        super().__init__(message)
        self.best_nsp_constant = best_nsp_constant


@dataclass
class RnspCertificate:
    order: int
    rho: float
    tau: float
    per_support_values: dict[tuple[int, ...], float]
    method: dict = field(default_factory=dict)

    certified = True

    @property
    def max_value(self) -> float:
        return max(self.per_support_values.values(), default=0.0)

    def to_json(self) -> dict:
        return {
            "order": self.order,
            "rho": self.rho,
            "tau": self.tau,
            "max_value": self.max_value,
            "per_support_values": [[list(S), v] for S, v in self.per_support_values.items()],
            "method": self.method,
        }


@dataclass
class RnspRefutation:
    """A support, sign pattern and vector violating the RNSP inequality."""

    order: int
    rho: float
    tau: float
    support: tuple[int, ...]
    signs: tuple[int, ...]
    x: np.ndarray
    objective: float
    unbounded: bool = False

    certified = False

    def violation(self, M) -> float:
        return rnsp_violation(M, self.x, self.support, self.rho, self.tau)


def rnsp_violation(M, x, S, rho: float, tau: float) -> float:
    """``||x_S|| - rho ||x_Sbar|| - tau ||Mx||``; positive means violated."""
    M = np.asarray(M, dtype=float)
    x = np.asarray(x, dtype=float)
    mask = np.zeros(x.size, dtype=bool)
    mask[list(S)] = True
    return float(np.abs(x[mask]).sum() - rho * np.abs(x[~mask]).sum() - tau * np.abs(M @ x).sum())


def _num_problems(n: int, s: int) -> int:
    return math.comb(n, s) * 2 ** max(s - 1, 0)


def _sign_patterns(s: int):
    for rest in itertools.product((1, -1), repeat=s - 1):
        yield (1,) + rest


class _SupportLP:
    """LP family  max sigma.x_S - alpha||x_Sbar||  s.t.  beta||x_Sbar|| + gamma||Mx|| <= 1.

    Variables are ``[p, q, u_plus, u_minus]`` with ``x = p - q`` and
    ``Mx = u_plus - u_minus``. The slack of the budget row together with
    ``u_minus`` forms a feasible starting basis.
    """

    def __init__(self, M: np.ndarray, alpha: float, beta: float, gamma: float):
        self.M = M
        m, n = M.shape
        self.m, self.n = m, n
        self.alpha, self.beta, self.gamma = alpha, beta, gamma
        A_eq = np.zeros((m, 2 * n + 2 * m))
        A_eq[:, :n] = M
        A_eq[:, n:2 * n] = -M
        A_eq[:, 2 * n:2 * n + m] = -np.eye(m)
        A_eq[:, 2 * n + m:] = np.eye(m)
        self.A_eq = A_eq
        self.basis = [2 * n + 2 * m] + [2 * n + m + i for i in range(m)]

    def solve(self, S, sigma, tol):
        n, m = self.n, self.m
        off = np.ones(n, dtype=bool)
        off[list(S)] = False
        A_ub = np.zeros((1, 2 * n + 2 * m))
        A_ub[0, :n] = self.beta * off
        A_ub[0, n:2 * n] = self.beta * off
        A_ub[0, 2 * n:] = self.gamma
        c = np.zeros(2 * n + 2 * m)
        c[list(S)] = sigma
        c[[n + j for j in S]] = -np.asarray(sigma, dtype=float)
        c[:n] -= self.alpha * off
        c[n:2 * n] -= self.alpha * off
        res = simplex(c, A_ub, [1.0], self.A_eq, np.zeros(m), basis=self.basis, tol=tol)
        x = None if res.x is None else res.x[:n] - res.x[n:2 * n]
        ray = None if res.ray is None else res.ray[:n] - res.ray[n:2 * n]
        return res, x, ray


def _check_common(M, s, budget):
    M = np.atleast_2d(np.asarray(M, dtype=float))
    n = M.shape[1]
    if not 1 <= s <= n:
        raise ValueError(f"order s={s} must satisfy 1 <= s <= n={n}")
    count = _num_problems(n, s)
    if count > budget:
        raise BudgetExceeded(f"{count} support/sign LPs exceed the budget of {budget}")
    return M, n


def verify_rnsp(
    M,
    s: int,
    rho: float,
    tau: float,
    lp_tol: float = DEFAULT_LP_TOL,
    budget: int = DEFAULT_BUDGET,
) -> RnspCertificate | RnspRefutation:
    """Decide the RNSP of order s for M by enumerating support LPs.

    Returns an :class:`RnspCertificate` holding, per support, the largest LP
    optimum over sign patterns, or the first :class:`RnspRefutation` found
    (supports in lexicographic order). A refutation from an unbounded LP
    carries the unbounded ray, scaled so that its violation is 1.
    """
    if not 0 < rho < 1:
        raise ValueError("rho must lie in (0, 1)")
    if tau <= 0:
        raise ValueError("tau must be positive")
    M, n = _check_common(M, s, budget)
    lp = _SupportLP(M, 0.0, rho, tau)
    values: dict[tuple[int, ...], float] = {}
    for S in itertools.combinations(range(n), s):
        best = -np.inf
        for sigma in _sign_patterns(s):
            res, x, ray = lp.solve(S, sigma, tol=lp_tol * 1e-2)
            if res.status == UNBOUNDED:
                viol = rnsp_violation(M, ray, S, rho, tau)
                return RnspRefutation(s, rho, tau, S, sigma, ray / viol, np.inf, unbounded=True)
            if res.status != OPTIMAL:
                raise RuntimeError(f"LP for support {S} ended with status {res.status}")
            if res.objective > 1 + lp_tol:
                return RnspRefutation(s, rho, tau, S, sigma, x, res.objective)
            best = max(best, res.objective)
        values[S] = best
    method = {"lp": "dense simplex", "lp_tol": lp_tol, "supports": len(values), "sign_patterns": 2 ** (s - 1)}
    return RnspCertificate(s, rho, tau, values, method)


def min_tau(M, s: int, rho: float, lp_tol: float = DEFAULT_LP_TOL, budget: int = DEFAULT_BUDGET) -> float:
    """Smallest tau for which M has the RNSP of order s with constant rho.

    Computed exactly as the maximum over supports and sign patterns of
    ``sup (sigma.x_S - rho||x_Sbar||) / ||Mx||``, an LP under the
    normalisation ``||Mx||_1 <= 1``. Returns ``inf`` when some kernel vector
    already violates the null space inequality.
    """
    if not 0 < rho < 1:
        raise ValueError("rho must lie in (0, 1)")
    M, n = _check_common(M, s, budget)
    lp = _SupportLP(M, rho, 0.0, 1.0)
    worst = 0.0
    for S in itertools.combinations(range(n), s):
        for sigma in _sign_patterns(s):
            res, _, _ = lp.solve(S, sigma, tol=lp_tol * 1e-2)
            if res.status == UNBOUNDED:
                return math.inf
            if res.status != OPTIMAL:
                raise RuntimeError(f"LP for support {S} ended with status {res.status}")
            worst = max(worst, res.objective)
    return worst


def nsp_constant(M, s: int, lp_tol: float = DEFAULT_LP_TOL, budget: int = DEFAULT_BUDGET) -> float:
    """Smallest rho with ``||x_S|| <= rho ||x_Sbar||`` on ker M, over |S| = s."""
    M, n = _check_common(M, s, budget)
    m = M.shape[0]
    # max sigma.x_S  s.t.  Mx = 0, ||x_Sbar|| <= 1
    worst = 0.0
    for S in itertools.combinations(range(n), s):
        off = np.ones(n, dtype=bool)
        off[list(S)] = False
        A_eq = np.hstack([M, -M])
        A_ub = np.concatenate([off, off]).astype(float)[None, :]
        for sigma in _sign_patterns(s):
            c = np.zeros(2 * n)
            c[list(S)] = sigma
            c[[n + j for j in S]] = -np.asarray(sigma, dtype=float)
            res = simplex(c, A_ub, [1.0], A_eq, np.zeros(m), tol=lp_tol * 1e-2)
            if res.status == UNBOUNDED:
                return math.inf
            worst = max(worst, res.objective)
    return worst


@dataclass(eq=False)
class InnerCode:
    matrix: np.ndarray
    delta0: float
    rho0: float
    tau0: float
    certificate: RnspCertificate | None = None

    def __post_init__(self):
        self.matrix = np.asarray(self.matrix, dtype=np.int8)
        if not np.isin(self.matrix, (0, 1)).all():
            raise ValueError("inner code must be a 0/1 matrix")
        if self.k > self.d:
            raise ValueError(f"inner code has k={self.k} > d={self.d} rows")
        if not 0 < self.rho0 < 1 / 3:
            raise ValueError("rho0 must lie in (0, 1/3)")
        if self.tau0 <= 0:
            raise ValueError("tau0 must be positive")

    @property
    def k(self) -> int:
        return self.matrix.shape[0]

    @property
    def d(self) -> int:
        return self.matrix.shape[1]

    @property
    def order(self) -> int:
        return int(math.floor(self.delta0 * self.d + 1e-12))

    @property
    def column_weight(self) -> int:
        return int(self.matrix.sum(axis=0).max())

    def verify(self, lp_tol: float = DEFAULT_LP_TOL, budget: int = DEFAULT_BUDGET):
        return verify_rnsp(self.matrix, self.order, self.rho0, self.tau0, lp_tol, budget)

    def to_text(self) -> str:
        head = f"{self.k} {self.d} {self.delta0!r} {self.rho0!r} {self.tau0!r}"
        rows = ["".join(str(int(b)) for b in row) for row in self.matrix]
        return "\n".join([head, *rows]) + "\n"

    @classmethod
    def from_text(cls, text: str) -> InnerCode:
        lines = [line.strip() for line in text.splitlines() if line.strip()]
        if not lines:
            raise ValueError("empty inner code file")
        head = lines[0].split()
        if len(head) != 5:
            raise ValueError("header must read 'k d delta0 rho0 tau0'")
        k, d = int(head[0]), int(head[1])
        delta0, rho0, tau0 = map(float, head[2:])
        rows = lines[1:]
        if len(rows) != k or any(len(r) != d or set(r) - {"0", "1"} for r in rows):
            raise ValueError(f"expected {k} rows of {d} characters in {{0,1}}")
        matrix = np.array([[int(ch) for ch in r] for r in rows], dtype=np.int8).reshape(k, d)
        return cls(matrix, delta0, rho0, tau0)

    def save(self, path) -> None:
        path = Path(path)
        path.write_text(self.to_text())
        if self.certificate is not None:
            cert_path = path.with_suffix(path.suffix + ".cert.json")
            cert_path.write_text(json.dumps(self.certificate.to_json(), indent=1, sort_keys=True) + "\n")

    @classmethod
    def load(cls, path) -> InnerCode:
        return cls.from_text(Path(path).read_text())


def default_caps(d: int, delta0: float) -> tuple[int, int]:
    """``(row_cap, weight_cap)`` from ``100 d0 log2(1/d0) d`` and ``100 log2(1/d0)``, clipped to d."""
    lg = math.log2(1 / delta0) if delta0 < 1 else 0.0
    row_cap = min(d, max(1, math.ceil(100 * delta0 * lg * d)))
    weight_cap = min(d, max(1, math.ceil(100 * lg)))
    return row_cap, weight_cap


def random_binary_matrix(k: int, d: int, weight: int, rng) -> np.ndarray:
    """k x d 0/1 matrix with ``min(weight, k)`` ones per column at random rows."""
    w = min(weight, k)
    C = np.zeros((k, d), dtype=np.int8)
    for j in range(d):
        C[rng.choice(k, size=w, replace=False), j] = 1
    return C


def search_inner_code(
    d: int,
    delta0: float,
    rho0: float,
    weight_cap: int | None = None,
    row_cap: int | None = None,
    attempts: int = 50,
    seed=0,
    *,
    k_min: int = 1,
    lp_tol: float = DEFAULT_LP_TOL,
    budget: int = DEFAULT_BUDGET,
) -> InnerCode:
    """Random search for a certified inner code, smallest row count first.

    For each k from ``k_min`` to ``row_cap`` draws ``attempts`` candidates with
    ``weight_cap`` ones per column. The first candidate with finite
    :func:`min_tau` is returned with ``tau0`` set to that value. When k
    reaches d the identity is tried as a last resort.
    """
    s = int(math.floor(delta0 * d + 1e-12))
    if s < 1:
        raise ValueError(f"delta0*d = {delta0 * d} gives order 0")
    if s >= d:
        raise ValueError(
            f"order s={s} >= d={d}: the RNSP would need tau||Cx|| >= (1-rho)||x|| on all x, "
            "impossible with a kernel and pointless without one"
        )
    if not 0 < rho0 < 1 / 3:
        raise ValueError("rho0 must lie in (0, 1/3)")
    default_rows, default_weight = default_caps(d, delta0)
    row_cap = default_rows if row_cap is None else row_cap
    weight_cap = default_weight if weight_cap is None else weight_cap
    if row_cap > d:
        raise ValueError("row_cap must not exceed d")
    rng = np.random.default_rng(seed)
    best_nsp = math.inf
    for k in range(max(1, k_min), row_cap + 1):
        candidates = (random_binary_matrix(k, d, weight_cap, rng) for _ in range(attempts))
        if k == d:
            candidates = itertools.chain(candidates, [np.eye(d, dtype=np.int8)])
        for C in candidates:
            tau = min_tau(C, s, rho0, lp_tol, budget)
            if math.isfinite(tau):
                cert = verify_rnsp(C, s, rho0, tau, lp_tol, budget)
                if cert.certified:
                    return InnerCode(C, delta0, rho0, tau, cert)
            else:
                best_nsp = min(best_nsp, nsp_constant(C, s, lp_tol, budget))
    raise SearchFailed(
        f"no certified inner code with k <= {row_cap} after {attempts} attempts per k; "
        f"best null space constant {best_nsp:.4g} vs rho0 = {rho0}",
        best_nsp,
    )
