import math

import numpy as np
import pytest

from expander_sketch import analysis, graphs
from expander_sketch.analysis import HypothesisError
from expander_sketch.inner_code import InnerCode, search_inner_code, verify_rnsp
from expander_sketch.tanner import BinaryMatrix, assemble


def check_peeling_invariants(H, S, peel):
    S = np.unique(np.asarray(S, dtype=np.int64))
    T = np.concatenate(peel.T_sets) if peel.steps else np.zeros(0, np.int64)
    assert np.array_equal(np.sort(T), S)  # partition, each label once
    residual = S
    for st in peel.steps:
        assert st.side == ("L" if st.i % 2 else "R")
        ends = (H.left if st.side == "L" else H.right)
        deg = np.bincount(ends[residual], minlength=H.N)
        assert np.all(deg[ends[st.T]] <= peel.delta0 * H.d + 1e-9)
        assert np.all(deg[ends[st.S]] > peel.delta0 * H.d)
        assert np.array_equal(np.sort(np.concatenate([st.T, st.S])), np.sort(residual))
        assert np.array_equal(st.V, np.unique(ends[st.S]))
        residual = st.S
    assert residual.size == 0
    assert len(peel.steps) <= 2 * max(S.size, 1)


@pytest.fixture(scope="module")
def cover():
    return graphs.double_cover(graphs.random_regular(40, 10, seed=1))


def test_empty_support(cover):
    peel = analysis.decompose_support(cover, [], 0.3)
    assert peel.steps == []
    assert peel.trace() == []


def test_low_degree_support_single_step(cover):
    # one edge per left vertex is always below delta0*d
    S = cover.gamma_left[:, 0]
    peel = analysis.decompose_support(cover, S, 0.3)
    assert len(peel.steps) == 1
    assert np.array_equal(np.sort(peel.steps[0].T), np.sort(S))


@pytest.mark.parametrize("seed", range(6))
def test_peeling_invariants_random_supports(cover, seed):
    rng = np.random.default_rng(seed)
    size = int(rng.integers(1, cover.n_edges // 2))
    S = rng.choice(cover.n_edges, size=size, replace=False)
    peel = analysis.decompose_support(cover, S, 0.3)
    check_peeling_invariants(cover, S, peel)


def test_high_degree_support_peels_in_several_steps(cover):
    # full stars at left vertices 0..4 plus one stray edge at vertex 5
    S = np.concatenate([cover.gamma_left[:5].ravel(), cover.gamma_left[5, :1]])
    peel = analysis.decompose_support(cover, S, 0.3)
    check_peeling_invariants(cover, S, peel)
    assert len(peel.steps) >= 2
    assert np.array_equal(peel.steps[0].T, cover.gamma_left[5, :1])
    assert np.array_equal(peel.steps[0].V, np.arange(5))
    trace = peel.trace()
    assert [row["i"] for row in trace] == list(range(1, len(trace) + 1))
    assert trace[0] == {"i": 1, "side": "L", "T_size": 1, "S_size": 50, "V_size": 5}


def test_stalled_peeling_raises():
    H = graphs.double_cover(graphs.complete_graph(6))
    with pytest.raises(RuntimeError, match="stalled"):
        analysis.decompose_support(H, np.arange(H.n_edges), 0.2)


def test_label_range_checked(cover):
    with pytest.raises(ValueError):
        analysis.decompose_support(cover, [cover.n_edges], 0.3)
    with pytest.raises(ValueError):
        analysis.decompose_support(cover, [0], 0.05)


# ---------------------------------------------------------------- contraction

def fake_peeling(sizes, delta0=0.4, d=500):
    steps = [
        analysis.PeelStep(i + 1, "LR"[i % 2], np.zeros(0, np.int64), np.arange(1), np.arange(v))
        for i, v in enumerate(sizes)
    ]
    return analysis.Peeling(np.zeros(0, np.int64), delta0, d, steps)


def test_contraction_vacuous_cases():
    for peel in (fake_peeling([]), fake_peeling([5])):
        rep = analysis.contraction_check(peel, 60.0, 500, 2000, 0.04, 0.4)
        assert rep.passed


def test_contraction_flags_bad_ratio_and_size():
    rep = analysis.contraction_check(fake_peeling([100, 50, 10]), 60.0, 500, 2000, 0.04, 0.4)
    assert rep.ratio_violations == [1]
    assert not rep.passed
    rep = analysis.contraction_check(fake_peeling([250, 10]), 60.0, 500, 2000, 0.04, 0.4)
    assert rep.size_violations == [1]


def test_contraction_bound_value():
    # (30/2) / (0.4*500 - 0.04*500/0.4 - 15) = 15 / 135
    assert analysis.contraction_bound(30.0, 500, 0.04, 0.4) == pytest.approx(1 / 9)


@pytest.mark.parametrize(
    "lam, d, delta, delta0, needle",
    [
        (60.0, 500, 0.04, 0.3, "delta0 = 2 sqrt"),
        (60.0, 300, 0.04, 0.4, "d > 16/delta"),
        (70.0, 500, 0.04, 0.4, "lambda < 3 sqrt"),
    ],
)
def test_hypothesis_failures_are_named(lam, d, delta, delta0, needle):
    with pytest.raises(HypothesisError) as info:
        analysis.contraction_check(fake_peeling([3, 1]), lam, d, 2000, delta, delta0)
    assert any(needle in f for f in info.value.failed)


def test_support_size_hypothesis():
    peel = analysis.Peeling(np.arange(40001), 0.4, 500, [])
    with pytest.raises(HypothesisError):
        analysis.contraction_check(peel, 60.0, 500, 2000, 0.04, 0.4)


# ---------------------------------------------------------------- constants

def test_lift_constants():
    assert analysis.lift_constants(0.25, 1.0) == pytest.approx((2 / 3, 4 / 3))
    rho, tau = analysis.lift_constants(1e-9, 1.0)
    assert rho == pytest.approx(0, abs=1e-8) and tau == pytest.approx(1)
    with pytest.raises(ValueError):
        analysis.lift_constants(1 / 3, 1.0)
    with pytest.raises(ValueError):
        analysis.lift_constants(0.2, 0.0)


def test_accounting_reports_both_conventions():
    rep = analysis.accounting_report(2000, 500, 0.04, lam=40.0)
    assert rep["delta0"] == pytest.approx(0.4)
    assert rep["delta_closing_convention"] == pytest.approx(0.4 * (0.4 - 0.16))
    assert rep["column_weight_bound"] == pytest.approx(200 * math.log2(2.5))


# ---------------------------------------------------------------- block inequality

@pytest.fixture(scope="module")
def tiny():
    H = graphs.double_cover(graphs.complete_graph(5))
    C0 = InnerCode(np.array([[1, 1, 0, 0], [0, 1, 1, 0], [0, 0, 1, 1], [1, 0, 0, 1]]), 0.25, 0.3, 1.0)
    return H, C0


def test_block_inequality_trivial_cases(tiny):
    H, C0 = tiny
    S = H.gamma_left[:, 0]
    rep = analysis.per_block_inequality_check(H, C0, np.zeros(H.n_edges), S)
    assert rep.min_slack >= 0
    x = np.random.default_rng(0).standard_normal(H.n_edges)
    assert analysis.per_block_inequality_check(H, C0, x, []).min_slack >= 0


def test_block_inequality_with_certified_code():
    H = graphs.double_cover(graphs.cycle_graph(3))
    C = np.array([[1, 0], [0, 1]])
    # identity 2x2 has RNSP of order 1 with any rho and tau = 1
    C0 = InnerCode(C, 0.5, 0.25, 1.0)
    assert verify_rnsp(C, 1, 0.25, 1.0).certified
    rng = np.random.default_rng(1)
    for _ in range(50):
        x = rng.standard_normal(H.n_edges)
        S = [int(g[rng.integers(2)]) for g in H.gamma_left]
        rep = analysis.per_block_inequality_check(H, C0, x, S)
        assert rep.min_slack >= -1e-9


def test_block_inequality_searched_code():
    H = graphs.double_cover(graphs.random_regular(12, 8, seed=0))
    C0 = search_inner_code(8, 0.25, 0.3, weight_cap=3, row_cap=8, attempts=20, seed=0)
    rng = np.random.default_rng(2)
    for _ in range(30):
        x = rng.standard_normal(H.n_edges)
        S = np.concatenate([g[rng.choice(8, 2, replace=False)] for g in H.gamma_right])
        rep = analysis.per_block_inequality_check(H, C0, x, S)
        assert rep.side in "LR"
        assert rep.min_slack >= -1e-9


def test_block_inequality_rejects_dense_support(tiny):
    H, C0 = tiny
    with pytest.raises(ValueError):
        analysis.per_block_inequality_check(H, C0, np.ones(H.n_edges), np.arange(H.n_edges))


# ---------------------------------------------------------------- direct certification

def test_identity_inner_code_tanner_certified():
    G = graphs.certify(graphs.complete_graph(5))
    H = graphs.double_cover(G)
    C0 = InnerCode(np.eye(4, dtype=int), 0.25, 0.1, 1.0)
    A = assemble(H, C0)
    rho, tau = analysis.lift_constants(0.1, 1.0)
    for s in (1, 2):
        out = analysis.certify_tanner_rnsp(A, s, rho, tau)
        assert out.certified and out.consistent
        # order of the inner code is floor(0.25 * 4) = 1
        assert bool(out.predicted) == (s <= C0.order)


def test_order_zero_trivial():
    out = analysis.certify_tanner_rnsp(np.zeros((2, 3)), 0, 0.5, 1.0)
    assert out.certified


def test_corrupted_matrix_verdict_is_consistent():
    H = graphs.double_cover(graphs.complete_graph(5))
    A = assemble(H, InnerCode(np.eye(4, dtype=int), 0.25, 0.1, 1.0))
    rng = np.random.default_rng(0)
    for _ in range(4):
        D = A.to_dense().copy()
        i, j = rng.integers(D.shape[0]), rng.integers(D.shape[1])
        D[i, j] = 1 - D[i, j]
        out = analysis.certify_tanner_rnsp(BinaryMatrix.from_dense(D), 1, 0.3, 0.6)
        assert out.predicted is None and out.consistent
        if not out.certified:
            assert out.result.violation(D) > 1e-8
        else:
            assert out.result.max_value <= 1 + 1e-8


def test_too_small_tau_refuted_with_replaying_witness():
    H = graphs.double_cover(graphs.complete_graph(5))
    A = assemble(H, InnerCode(np.eye(4, dtype=int), 0.25, 0.1, 1.0))
    out = analysis.certify_tanner_rnsp(A, 2, 0.2, 0.1)
    assert not out.certified
    assert out.result.violation(A.to_dense()) > 1e-8
