import numpy as np
import pytest
from scipy.optimize import linprog

from expander_sketch.lp import INFEASIBLE, OPTIMAL, UNBOUNDED, LPError, simplex


def highs(c, A_ub, b_ub, A_eq, b_eq):
    return linprog(-np.asarray(c), A_ub=A_ub, b_ub=b_ub, A_eq=A_eq, b_eq=b_eq, method="highs")


def test_textbook_problem():
    # max 3x + 5y  s.t. x <= 4, 2y <= 12, 3x + 2y <= 18
    res = simplex([3, 5], [[1, 0], [0, 2], [3, 2]], [4, 12, 18])
    assert res.status == OPTIMAL
    assert res.objective == pytest.approx(36)
    assert np.allclose(res.x, [2, 6])


def test_unbounded_with_ray():
    res = simplex([1, 1], [[1, -1]], [1])
    assert res.status == UNBOUNDED
    A = np.array([[1.0, -1.0]])
    assert np.all(res.ray >= -1e-12)
    assert np.all(A @ res.ray <= 1e-12)
    assert np.array([1, 1]) @ res.ray > 0


def test_infeasible():
    res = simplex([1, 0], [[1, 1]], [1], [[1, 1]], [3])
    assert res.status == INFEASIBLE


def test_equality_with_redundant_row():
    res = simplex([1, 2, 0], A_eq=[[1, 1, 1], [2, 2, 2]], b_eq=[1, 2])
    assert res.status == OPTIMAL
    assert res.objective == pytest.approx(2)


def test_negative_rhs_inequality():
    # x + y >= 2 written as -x - y <= -2; minimize x + 2y
    res = simplex([-1, -2], [[-1, -1]], [-2])
    assert res.status == OPTIMAL
    assert res.objective == pytest.approx(-2)


def test_infeasible_starting_basis_rejected():
    with pytest.raises(LPError):
        simplex([1], A_eq=[[1]], b_eq=[-1], basis=[0])


def test_degenerate_cycling_example():
    # Beale's example cycles under the textbook Dantzig rule without anti-cycling.
    c = [0.75, -150, 0.02, -6]
    A = [[0.25, -60, -0.04, 9], [0.5, -90, -0.02, 3], [0, 0, 1, 0]]
    b = [0, 0, 1]
    for bland_after in (0, 1, 5, None):
        res = simplex(c, A, b, bland_after=bland_after)
        assert res.status == OPTIMAL
        assert res.objective == pytest.approx(0.05)


@pytest.mark.parametrize("seed", range(80))
def test_random_lps_against_highs(seed):
    rng = np.random.default_rng(seed)
    n = int(rng.integers(2, 9))
    m_ub, m_eq = int(rng.integers(0, 6)), int(rng.integers(0, 3))
    c = rng.standard_normal(n)
    A_ub = rng.standard_normal((m_ub, n)) if m_ub else None
    b_ub = rng.standard_normal(m_ub) + 0.5 if m_ub else None
    A_eq = rng.standard_normal((m_eq, n)) if m_eq else None
    b_eq = rng.standard_normal(m_eq) if m_eq else None
    if seed % 3 == 0 and m_ub:
        # add a bounding row so many instances are bounded
        A_ub = np.vstack([A_ub, np.ones(n)])
        b_ub = np.append(b_ub, 3.0)
    ours = simplex(c, A_ub, b_ub, A_eq, b_eq)
    ref = highs(c, A_ub, b_ub, A_eq, b_eq)
    expected = {0: OPTIMAL, 2: INFEASIBLE, 3: UNBOUNDED}[ref.status]
    assert ours.status == expected
    if expected == OPTIMAL:
        assert ours.objective == pytest.approx(-ref.fun, abs=1e-7, rel=1e-7)
        if A_ub is not None:
            assert np.all(A_ub @ ours.x <= b_ub + 1e-7)
        if A_eq is not None:
            assert np.allclose(A_eq @ ours.x, b_eq, atol=1e-7)
        assert np.all(ours.x >= 0)
