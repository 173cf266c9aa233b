"""Executable checks for the Tanner-matrix RNSP argument.

The support of a signal is peeled alternately from the left and right side
of the double cover: edges whose endpoint on the current side has degree at
most ``delta0 * d`` inside the remaining support form the next slice ``T_i``;
the rest survive as ``S_i``, touching the vertex set ``V_i``.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from .graphs import DoubleCover
from .inner_code import (
    DEFAULT_BUDGET,
    DEFAULT_LP_TOL,
    InnerCode,
    RnspCertificate,
    RnspRefutation,
    verify_rnsp,
)
from .tanner import BinaryMatrix, TannerMatrix

_EPS = 1e-9


class HypothesisError(ValueError):
    def __init__(self, failed: list[str]):
        super().__init__("hypotheses not met: " + "; ".join(failed))
        self.failed = failed


@dataclass
class PeelStep:
    i: int
    side: str
    T: np.ndarray  # edge labels peeled at this step
    S: np.ndarray  # surviving edge labels S_i
    V: np.ndarray  # vertices on `side` touching S_i


@dataclass
class Peeling:
    S: np.ndarray
    delta0: float
    d: int
    steps: list[PeelStep] = field(default_factory=list)

    @property
    def T_sets(self) -> list[np.ndarray]:
        return [st.T for st in self.steps]

    @property
    def V_sizes(self) -> list[int]:
        return [int(st.V.size) for st in self.steps]

    def trace(self) -> list[dict]:
        return [
            {"i": st.i, "side": st.side, "T_size": int(st.T.size), "S_size": int(st.S.size), "V_size": int(st.V.size)}
            for st in self.steps
        ]


def vertex_degrees(H: DoubleCover, labels: np.ndarray, side: str) -> np.ndarray:
    """``deg(v, labels)`` for every vertex v on one side."""
    ends = (H.left if side == "L" else H.right)[labels]
    return np.bincount(ends, minlength=H.N)


def decompose_support(H: DoubleCover, S, delta0: float) -> Peeling:
    S = np.unique(np.asarray(list(S) if not isinstance(S, np.ndarray) else S, dtype=np.int64))
    if S.size and (S.min() < 0 or S.max() >= H.n_edges):
        raise ValueError("support contains labels outside 0..N*d-1")
    threshold = delta0 * H.d
    if threshold < 1 - _EPS:
        raise ValueError(f"delta0 * d = {threshold} is below 1")
    peeling = Peeling(S, delta0, H.d)
    current = S
    stalled = 0
    i = 0
    while current.size:
        i += 1
        if i > H.n_edges + 2:
            raise RuntimeError("peeling did not terminate")
        side = "L" if i % 2 else "R"
        ends = (H.left if side == "L" else H.right)[current]
        deg = np.bincount(ends, minlength=H.N)
        high = deg[ends] > threshold + _EPS
        nxt = current[high]
        peeling.steps.append(PeelStep(i, side, current[~high], nxt, np.unique(ends[high])))
        stalled = stalled + 1 if nxt.size == current.size else 0
        if stalled >= 2:
            raise RuntimeError(
                f"peeling stalled at step {i}: {nxt.size} edges have high degree on both sides"
            )
        current = nxt
    return peeling


@dataclass
class ContractionReport:
    steps: int
    worst_ratio: float
    bound_ratio: float
    size_cap: float
    size_violations: list[int]
    ratio_violations: list[int]
    bound_violations: list[int]

    @property
    def passed(self) -> bool:
        return not (self.size_violations or self.ratio_violations or self.bound_violations)


def theorem_hypotheses(d: int, lam: float, delta: float, delta0: float) -> list[str]:
    """Names of the violated hypotheses of the lifting theorem (empty if all hold)."""
    failed = []
    if not math.isclose(delta0, 2 * math.sqrt(delta), rel_tol=1e-9):
        failed.append(f"delta0 = 2 sqrt(delta) (got delta0={delta0}, 2 sqrt(delta)={2 * math.sqrt(delta)})")
    if not d > 16 / delta:
        failed.append(f"d > 16/delta (got d={d}, 16/delta={16 / delta:g})")
    if not lam < 3 * math.sqrt(d):
        failed.append(f"lambda < 3 sqrt(d) (got lambda={lam:g}, 3 sqrt(d)={3 * math.sqrt(d):g})")
    return failed


def contraction_bound(lam: float, d: int, delta: float, delta0: float) -> float:
    """``(lam/2) / (delta0 d - delta d / delta0 - lam/2)``."""
    denom = delta0 * d - delta * d / delta0 - lam / 2
    return math.inf if denom <= 0 else (lam / 2) / denom


def contraction_check(peeling: Peeling, lam: float, d: int, N: int, delta: float, delta0: float) -> ContractionReport:
    """Check ``|V_i| < delta N / delta0`` and ``|V_{i+1}| < |V_i| / 3`` on a peeling trace.

    Raises :class:`HypothesisError` when the graph/parameter hypotheses fail,
    since the inequalities are then not claimed.
    """
    failed = theorem_hypotheses(d, lam, delta, delta0)
    if peeling.S.size > delta * N * d + _EPS:
        failed.append(f"|S| <= delta N d (got {peeling.S.size} > {delta * N * d:g})")
    if failed:
        raise HypothesisError(failed)
    cap = delta * N / delta0
    bound = contraction_bound(lam, d, delta, delta0)
    sizes = [st.V.size for st in peeling.steps]
    nonempty = [st.S.size > 0 for st in peeling.steps]
    size_bad, ratio_bad, bound_bad = [], [], []
    worst = 0.0
    for idx, st in enumerate(peeling.steps):
        if nonempty[idx] and not sizes[idx] < cap:
            size_bad.append(st.i)
        if idx + 1 < len(sizes) and nonempty[idx]:
            ratio = sizes[idx + 1] / sizes[idx]
            worst = max(worst, ratio)
            if not 3 * sizes[idx + 1] < sizes[idx]:
                ratio_bad.append(st.i)
            if not sizes[idx + 1] < bound * sizes[idx]:
                bound_bad.append(st.i)
    return ContractionReport(len(sizes), worst, bound, cap, size_bad, ratio_bad, bound_bad)


def lift_constants(rho0: float, tau0: float) -> tuple[float, float]:
    """``(2 rho0 / (1 - rho0), tau0 / (1 - rho0))``; needs ``0 < rho0 < 1/3``."""
    if not 0 < rho0 < 1 / 3:
        raise ValueError(f"rho0 = {rho0} must lie in (0, 1/3); the lifted rho would reach 1")
    if tau0 <= 0:
        raise ValueError("tau0 must be positive")
    return 2 * rho0 / (1 - rho0), tau0 / (1 - rho0)


@dataclass
class BlockInequalityReport:
    side: str
    per_vertex_slack: float
    summed_slack: float
    final_slack: float
    chain_slack: float

    @property
    def min_slack(self) -> float:
        return min(self.per_vertex_slack, self.summed_slack, self.final_slack, self.chain_slack)


def per_block_inequality_check(H: DoubleCover, C0: InnerCode, x, S) -> BlockInequalityReport:
    """Evaluate each step of the one-sided bound for a support of low degree.

    Uses whichever side has ``deg(v, S) <= delta0 d`` everywhere (left first)
    and returns slacks (rhs - lhs) for the per-vertex inner-code inequality,
    their sum, the rearranged form with the one-sided block sum, and the
    final form with ``||Ax||_1``.
    """
    x = np.asarray(x, dtype=float)
    S = np.unique(np.asarray(list(S) if not isinstance(S, np.ndarray) else S, dtype=np.int64))
    threshold = C0.delta0 * H.d
    side = None
    for cand in ("L", "R"):
        if vertex_degrees(H, S, cand).max(initial=0) <= threshold + _EPS:
            side = cand
            break
    if side is None:
        raise ValueError("deg(v, S) exceeds delta0*d on both sides")
    C = np.asarray(C0.matrix, dtype=float)
    rho0, tau0 = C0.rho0, C0.tau0
    in_S = np.zeros(H.n_edges, dtype=bool)
    in_S[S] = True
    gamma = H.gamma_left if side == "L" else H.gamma_right
    xg = x[gamma]  # (N, d)
    sg = in_S[gamma]
    block_l1 = np.abs(xg @ C.T).sum(axis=1)
    lhs_v = np.abs(np.where(sg, xg, 0.0)).sum(axis=1)
    rhs_v = rho0 * np.abs(np.where(sg, 0.0, xg)).sum(axis=1) + tau0 * block_l1
    per_vertex = float((rhs_v - lhs_v).min(initial=np.inf))

    xS = np.abs(x[in_S]).sum()
    xSbar = np.abs(x[~in_S]).sum()
    side_sum = block_l1.sum()
    summed = float(rho0 * xSbar + tau0 * side_sum - xS)
    total = xS + xSbar
    chain = float(rho0 / (1 + rho0) * total + tau0 / (1 + rho0) * side_sum - xS)
    full_gamma = np.vstack([H.gamma_left, H.gamma_right])
    Ax_l1 = np.abs(x[full_gamma] @ C.T).sum()
    final = float(rho0 / (1 + rho0) * total + tau0 / (1 + rho0) * Ax_l1 - xS)
    return BlockInequalityReport(side, per_vertex, summed, final, chain)


@dataclass
class TannerCertification:
    result: RnspCertificate | RnspRefutation
    predicted: bool | None
    reason: str

    @property
    def certified(self) -> bool:
        return self.result.certified

    @property
    def consistent(self) -> bool:
        """False only when the theory predicts certification and the LPs refute it."""
        return not (self.predicted and not self.result.certified)


def predict_certification(A: TannerMatrix, s: int, rho: float, tau: float, delta: float | None = None) -> tuple[bool | None, str]:
    code = A.code
    if s <= code.order and rho >= code.rho0 - _EPS and tau >= code.tau0 - _EPS:
        return True, "every support of size <= s has low degree on both sides"
    graph = A.cover.graph
    lam = None if graph is None else graph.certified_lambda
    if delta is not None and lam is not None and code.rho0 < 1 / 3:
        rho_l, tau_l = lift_constants(code.rho0, code.tau0)
        if (
            not theorem_hypotheses(A.cover.d, lam, delta, code.delta0)
            and s <= delta * A.cover.N * A.cover.d + _EPS
            and rho >= rho_l - _EPS
            and tau >= tau_l - _EPS
        ):
            return True, "lifting theorem hypotheses hold"
    return None, "no prediction"


def certify_tanner_rnsp(
    A,
    s: int,
    rho: float,
    tau: float,
    budget: int = DEFAULT_BUDGET,
    lp_tol: float = DEFAULT_LP_TOL,
    delta: float | None = None,
) -> TannerCertification:
    """Directly verify the RNSP of an assembled matrix and cross-check theory.

    ``A`` is normally a :class:`TannerMatrix`; any binary or dense matrix is
    accepted, in which case no prediction is made.
    """
    if s == 0:
        return TannerCertification(RnspCertificate(0, rho, tau, {}, {"trivial": True}), True, "order 0")
    dense = A.to_dense() if isinstance(A, BinaryMatrix) else np.asarray(A, dtype=float)
    result = verify_rnsp(dense, s, rho, tau, lp_tol=lp_tol, budget=budget)
    if isinstance(A, TannerMatrix):
        predicted, reason = predict_certification(A, s, rho, tau, delta)
    else:
        predicted, reason = None, "not a Tanner matrix"
    return TannerCertification(result, predicted, reason)


def accounting_report(N: int, d: int, delta: float, lam: float | None = None) -> dict:
    """Row and column-weight bounds under both conventions relating delta and delta0.

    The lifting theorem sets ``delta0 = 2 sqrt(delta)``; the closing count
    instead substitutes ``delta = delta0 (delta0 - 2 lam / d) ~ delta0**2``.
    Both are reported side by side. Logarithms are base 2.
    """
    delta0 = 2 * math.sqrt(delta)
    lg0 = math.log2(1 / delta0) if delta0 < 1 else 0.0
    out = {
        "delta": delta,
        "delta0": delta0,
        "k_cap": 100 * delta0 * lg0 * d,
        "rows_bound": 200 * N * delta0 * d * lg0,
        "rows_claim_sqrt_delta": 100 * math.sqrt(delta) * math.log2(1 / delta) * N * d,
        "column_weight_bound": 200 * lg0,
        "column_weight_claim": 200 * math.log2(1 / delta),
    }
    if lam is not None:
        out["delta_closing_convention"] = delta0 * (delta0 - 2 * lam / d)
    return out
