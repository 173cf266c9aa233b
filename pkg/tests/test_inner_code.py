import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

import oracles
from expander_sketch import inner_code as ic
from expander_sketch.inner_code import (
    BudgetExceeded,
    InnerCode,
    RnspCertificate,
    RnspRefutation,
    SearchFailed,
)


@pytest.mark.parametrize("n, s, rho", [(4, 1, 0.1), (5, 2, 0.5), (6, 3, 0.9)])
def test_identity_certified(n, s, rho):
    out = ic.verify_rnsp(np.eye(n), s, rho, 1.0)
    assert isinstance(out, RnspCertificate)
    assert len(out.per_support_values) == math.comb(n, s)
    assert out.max_value <= 1 + 1e-8


@pytest.mark.parametrize("n, s, rho", [(4, 1, 0.1), (5, 2, 0.5)])
def test_identity_min_tau_at_most_one(n, s, rho):
    assert ic.min_tau(np.eye(n), s, rho) <= 1 + 1e-9


def test_zero_matrix_refuted_by_unit_vector():
    M = np.zeros((3, 4))
    out = ic.verify_rnsp(M, 1, 0.5, 1e6)
    assert isinstance(out, RnspRefutation)
    assert out.support == (0,)
    assert out.unbounded
    x = out.x / np.abs(out.x).max()
    assert np.allclose(np.abs(x), [1, 0, 0, 0])
    assert out.violation(M) > 1e-8
    assert ic.min_tau(M, 1, 0.5) == math.inf


def test_budget_and_precondition_errors():
    with pytest.raises(BudgetExceeded):
        ic.verify_rnsp(np.eye(10), 3, 0.5, 1.0, budget=100)
    with pytest.raises(ValueError):
        ic.verify_rnsp(np.eye(3), 0, 0.5, 1.0)
    with pytest.raises(ValueError):
        ic.verify_rnsp(np.eye(3), 4, 0.5, 1.0)
    with pytest.raises(ValueError):
        ic.verify_rnsp(np.eye(3), 1, 1.0, 1.0)
    with pytest.raises(ValueError):
        ic.verify_rnsp(np.eye(3), 1, 0.5, 0.0)


def random_instance(seed):
    rng = np.random.default_rng(seed)
    n = int(rng.integers(3, 9))
    m = int(rng.integers(max(1, n - 3), n + 2))
    M = rng.integers(0, 2, (m, n)).astype(float) if seed % 2 else rng.standard_normal((m, n))
    s = int(rng.integers(1, 3))
    rho = float(rng.choice([0.3, 0.6, 0.9]))
    return M, s, rho


@pytest.mark.parametrize("seed", range(12))
def test_min_tau_matches_vertex_enumeration(seed):
    M, s, rho = random_instance(seed)
    expected = oracles.critical_tau(M, s, rho)
    got = ic.min_tau(M, s, rho)
    if math.isinf(expected):
        assert math.isinf(got)
    else:
        assert got == pytest.approx(expected, rel=1e-9, abs=1e-12)


@pytest.mark.parametrize("seed", range(12))
def test_min_tau_self_consistent(seed):
    M, s, rho = random_instance(seed)
    tau = ic.min_tau(M, s, rho)
    if math.isinf(tau):
        assert not ic.verify_rnsp(M, s, rho, 1e6).certified
        return
    if tau == 0:
        pytest.skip("M is injective on every relevant cone")
    assert ic.verify_rnsp(M, s, rho, tau * 1.01).certified
    refuted = ic.verify_rnsp(M, s, rho, tau / 1.01)
    assert not refuted.certified
    assert refuted.violation(M) > 1e-8


def test_monotone_in_rho_and_tau():
    M, s, rho = random_instance(4)
    tau = ic.min_tau(M, s, rho)
    assert math.isfinite(tau)
    for r2, t2 in [(rho, tau * 1.1), (min(0.99, rho + 0.05), tau * 1.1), (min(0.99, rho + 0.05), tau * 2)]:
        assert ic.verify_rnsp(M, s, r2, t2).certified


@pytest.mark.parametrize("c", [0.25, 3.0])
def test_scale_covariance(c):
    M, s, rho = random_instance(4)
    tau = ic.min_tau(M, s, rho)
    assert ic.min_tau(c * M, s, rho) == pytest.approx(tau / c, rel=1e-9)
    for factor in (1.02, 1 / 1.02):
        a = ic.verify_rnsp(M, s, rho, tau * factor).certified
        b = ic.verify_rnsp(c * M, s, rho, tau * factor / c).certified
        assert a == b


@settings(max_examples=25, deadline=None)
@given(
    st.integers(2, 6).flatmap(
        lambda n: st.tuples(
            st.just(n),
            st.lists(st.lists(st.integers(0, 1), min_size=n, max_size=n), min_size=1, max_size=n),
            st.integers(1, min(2, n - 1)),
            st.sampled_from([0.2, 0.5, 0.8]),
            st.sampled_from([0.5, 2.0, 8.0]),
        )
    )
)
def test_refutations_replay_and_certificates_hold(args):
    n, rows, s, rho, tau = args
    M = np.array(rows, dtype=float)
    out = ic.verify_rnsp(M, s, rho, tau)
    value, _, _ = oracles.rnsp_oracle(M, s, rho, tau)
    if out.certified:
        assert value <= 1e-9
        assert out.max_value <= 1 + 1e-8
    else:
        assert out.violation(M) > 1e-8
        assert value > 0


def test_certified_matrix_survives_random_sampling():
    M = np.array(
        [[1, 1, 0, 0, 1, 0], [0, 1, 1, 0, 0, 1], [1, 0, 1, 1, 0, 0], [0, 0, 0, 1, 1, 1], [1, 0, 0, 0, 0, 1]],
        dtype=float,
    )
    tau = ic.min_tau(M, 1, 0.5)
    assert math.isfinite(tau)
    assert ic.verify_rnsp(M, 1, 0.5, tau * 1.001).certified
    rng = np.random.default_rng(0)
    X = rng.standard_normal((100_000, 6))
    X /= np.abs(X).sum(axis=1, keepdims=True)
    head = np.abs(X).max(axis=1)
    viol = head - 0.5 * (1 - head) - tau * 1.001 * np.abs(X @ M.T).sum(axis=1)
    assert viol.max() <= 0


def test_nsp_constant_identity_and_kernel():
    assert ic.nsp_constant(np.eye(4), 1) == 0
    # kernel spanned by (1, -1, 0): ||x_S|| / ||x_Sbar|| = 1
    assert ic.nsp_constant(np.array([[1.0, 1.0, 0.0], [0.0, 0.0, 1.0]]), 1) == pytest.approx(1.0)


# ---------------------------------------------------------------- InnerCode

def test_inner_code_validation():
    with pytest.raises(ValueError):
        InnerCode(np.ones((5, 4)), 0.25, 0.3, 1.0)
    with pytest.raises(ValueError):
        InnerCode(np.eye(4), 0.25, 0.34, 1.0)
    with pytest.raises(ValueError):
        InnerCode(np.eye(4), 0.25, 0.3, 0.0)
    with pytest.raises(ValueError):
        InnerCode(2 * np.eye(4), 0.25, 0.3, 1.0)


def test_inner_code_properties_and_text_round_trip(tmp_path):
    C = InnerCode(np.array([[1, 1, 0, 1], [0, 1, 1, 1]]), 0.5, 0.25, 1.5)
    assert (C.k, C.d, C.order, C.column_weight) == (2, 4, 2, 2)
    text = C.to_text()
    assert text.splitlines()[1:] == ["1101", "0111"]
    D = InnerCode.from_text(text)
    assert np.array_equal(C.matrix, D.matrix)
    assert (D.delta0, D.rho0, D.tau0) == (0.5, 0.25, 1.5)
    path = tmp_path / "c0.txt"
    E = ic.search_inner_code(4, 0.25, 0.3, weight_cap=1, row_cap=4, attempts=3, seed=0)
    E.save(path)
    F = InnerCode.load(path)
    assert np.array_equal(E.matrix, F.matrix) and F.tau0 == E.tau0
    assert (tmp_path / "c0.txt.cert.json").exists()


def test_default_caps_use_log2():
    rows, weight = ic.default_caps(8, 0.25)
    # 100 * 0.25 * log2(4) * 8 = 400 and 100 * log2(4) = 200, both clipped to d
    assert rows == 8 and weight == 8


def test_random_binary_matrix_column_weight():
    C = ic.random_binary_matrix(5, 9, 3, np.random.default_rng(0))
    assert np.all(C.sum(axis=0) == 3)


def test_search_d8():
    C = ic.search_inner_code(8, 0.25, 0.3, weight_cap=3, row_cap=8, attempts=20, seed=0)
    assert C.k <= 8 and C.order == 2
    assert np.all(C.matrix.sum(axis=0) <= 3)
    assert C.certificate.certified
    assert ic.verify_rnsp(C.matrix, 2, 0.3, C.tau0 * 1.01).certified


def test_search_order_equal_to_d_rejected():
    with pytest.raises(ValueError, match="s=4 >= d=4"):
        ic.search_inner_code(4, 1.0, 0.3, row_cap=2)


def test_search_failure_reports_near_miss():
    with pytest.raises(SearchFailed) as info:
        ic.search_inner_code(6, 0.34, 0.3, weight_cap=2, row_cap=3, attempts=3, seed=0)
    assert info.value.best_nsp_constant >= 0.3


@pytest.mark.parametrize("d", [3, 5, 6])
def test_identity_fallback(d):
    C = ic.search_inner_code(d, 1 / d, 0.3, weight_cap=1, row_cap=d, attempts=2, seed=1)
    assert C.k == d
    assert C.tau0 <= 1 + 1e-9
