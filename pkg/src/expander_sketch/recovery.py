"""Basis pursuit by linear programming and the l1/l1 recovery guarantee."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
import scipy.sparse as sp

from .lp import INFEASIBLE, OPTIMAL, simplex
from .tanner import BinaryMatrix

DEFAULT_LP_TOL = 1e-8
GUARANTEE_TOL = 1e-6


class RecoveryError(RuntimeError):
    pass


def _dense(A) -> np.ndarray:
    if isinstance(A, BinaryMatrix):
        return A.to_dense().astype(float)
    if sp.issparse(A):
        return A.toarray().astype(float)
    return np.atleast_2d(np.asarray(A, dtype=float))


def sigma_s(x, s: int, p: int = 1) -> float:
    """l_p norm of x after removing its s largest-magnitude entries.

    Among equal magnitudes the lower index counts as larger.
    """
    x = np.asarray(x, dtype=float).ravel()
    if s < 0:
        raise ValueError("s must be non-negative")
    if p not in (1, 2):
        raise ValueError("p must be 1 or 2")
    order = np.argsort(-np.abs(x), kind="stable")
    tail = x[order[s:]]
    return float(np.abs(tail).sum() if p == 1 else np.sqrt(tail @ tail))


@dataclass
class RecoveryResult:
    z: np.ndarray
    objective: float
    residual: float
    iterations: int
    guarantee_slack: float | None = None

    def to_json(self) -> dict:
        out = {"z": self.z.tolist(), "objective": self.objective, "residual": self.residual}
        if self.guarantee_slack is not None:
            out["guarantee_slack"] = self.guarantee_slack
        return out


def l1_minimize(A, y, eta: float, lp_tol: float = DEFAULT_LP_TOL, max_iter: int | None = None) -> RecoveryResult:
    """Solve ``min ||z||_1  s.t.  ||y - A z||_1 <= eta``.

    Standard form: ``A(z+ - z-) + r+ - r- = y``, ``sum(r+ + r-) <= eta``,
    everything non-negative.
    """
    A = _dense(A)
    y = np.asarray(y, dtype=float).ravel()
    m, n = A.shape
    if y.size != m:
        raise ValueError(f"y has length {y.size}, expected {m}")
    if eta < 0:
        raise ValueError("eta must be non-negative")

    nv = 2 * n + 2 * m
    c = np.zeros(nv)
    c[:2 * n] = -1.0
    A_eq = np.hstack([A, -A, np.eye(m), -np.eye(m)])
    A_ub = np.zeros((1, nv))
    A_ub[0, 2 * n:] = 1.0
    basis = None
    if np.abs(y).sum() <= eta:
        # r = y is feasible with z = 0
        basis = [nv] + [2 * n + i if y[i] >= 0 else 2 * n + m + i for i in range(m)]
    if max_iter is None:
        max_iter = 50 * (nv + 1)
    res = simplex(c, A_ub, [eta], A_eq, y, basis=basis, tol=lp_tol * 1e-2, max_iter=max_iter)
    if res.status == INFEASIBLE:
        raise RecoveryError("no z satisfies ||y - Az||_1 <= eta")
    if res.status != OPTIMAL:
        raise RecoveryError(f"simplex stopped with status {res.status} after {res.iterations} pivots")
    z = res.x[:n] - res.x[n:2 * n]
    residual = float(np.abs(y - A @ z).sum())
    return RecoveryResult(z, float(np.abs(z).sum()), residual, res.iterations)


def recovery_constants(rho: float, tau: float) -> tuple[float, float]:
    """``(C1, C2) = (2(1+rho)/(1-rho), 4 tau/(1-rho))``."""
    if not 0 < rho < 1:
        raise ValueError("rho must lie in (0, 1)")
    if tau <= 0:
        raise ValueError("tau must be positive")
    return 2 * (1 + rho) / (1 - rho), 4 * tau / (1 - rho)


@dataclass
class GuaranteeReport:
    C1: float
    C2: float
    lhs: float
    rhs: float
    passed: bool

    @property
    def slack(self) -> float:
        return self.rhs - self.lhs


def guarantee_check(z, x_true, s: int, eta: float, rho: float, tau: float, tol: float = GUARANTEE_TOL) -> GuaranteeReport:
    """Check ``||z - x||_1 <= C1 sigma_s(x)_1 + C2 eta`` up to ``tol``."""
    C1, C2 = recovery_constants(rho, tau)
    lhs = float(np.abs(np.asarray(z, float) - np.asarray(x_true, float)).sum())
    rhs = C1 * sigma_s(x_true, s, 1) + C2 * eta
    return GuaranteeReport(C1, C2, lhs, rhs, lhs <= rhs + tol)
