import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st
from hypothesis.extra.numpy import arrays

from blindarx import (
    ModelOrders,
    OutputSeries,
    assemble_estimate,
    ar_least_squares,
    build_lifted_problem,
    check_recoverability,
    extract_rank1,
    gaussian_basis,
    scale_invariant_error,
    zoh_basis,
)
from blindarx.lifting import LiftedProblem, RecoveryReport

from conftest import make_instance


def direct_residual(y, D, orders, X, a):
    """Loop evaluation of y(t) - sum a_k y(t-k) - sum_j (D X)(t-nk-j, j), 1-based t."""
    DX = D @ X
    out = []
    for t in range(orders.n, len(y) + 1):
        v = y[t - 1]
        for k in range(1, orders.n_a + 1):
            v -= a[k - 1] * y[t - k - 1]
        for j in range(1, orders.n_b + 1):
            v -= DX[t - orders.n_k - j - 1, j - 1]
        out.append(v)
    return np.array(out)


def test_defining_identity():
    problem, truth = make_instance("gaussian", seed=3)
    X = np.outer(truth["x"], truth["model"].b)
    theta = problem.pack(X, truth["model"].a)
    assert np.max(np.abs(problem.A @ theta - problem.rhs)) <= 1e-10


def test_dimensions_paper_model():
    problem, _ = make_instance("zoh", N=60)
    assert problem.n == 4
    assert problem.A.shape == (57, 3 * 10 + 1)
    assert problem.rhs.shape == (57,)


def test_single_block_input_columns_constant():
    y = np.random.default_rng(0).standard_normal(12)
    problem = build_lifted_problem(y, zoh_basis(12, 12), ModelOrders(1, 3, 0))
    np.testing.assert_array_equal(problem.A[:, :3], 1.0)


def test_layout_matches_display():
    rng = np.random.default_rng(1)
    y = rng.standard_normal(15)
    basis = gaussian_basis(15, 2, 5)
    orders = ModelOrders(2, 2, 1)
    P = build_lifted_problem(y, basis, orders)
    n = orders.n  # max(2, 3) + 1 = 4
    t = n  # first row
    D = basis.D
    row = P.A[0]
    np.testing.assert_array_equal(row[0:2], D[t - 1 - 1 - 1])  # d_{t-nk-1}
    np.testing.assert_array_equal(row[2:4], D[t - 1 - 2 - 1])  # d_{t-nk-2}
    np.testing.assert_array_equal(row[4:], [-y[t - 2], -y[t - 3]])


def test_linear_operator_consistency_random():
    rng = np.random.default_rng(42)
    y = rng.standard_normal(30)
    basis = gaussian_basis(30, 4, 1)
    orders = ModelOrders(2, 3, 1)
    P = build_lifted_problem(y, basis, orders)
    for _ in range(100):
        X = rng.standard_normal((4, 3))
        a = rng.standard_normal(2)
        ref = direct_residual(y, basis.D, orders, X, a)
        got = P.rhs - P.A @ P.pack(X, a)
        assert np.max(np.abs(got - ref)) <= 1e-12 * max(1.0, np.max(np.abs(ref)))


def test_pack_unpack_roundtrip():
    P, _ = make_instance("zoh")
    X = np.arange(30.0).reshape(10, 3)
    X2, a2 = P.unpack(P.pack(X, [0.25]))
    np.testing.assert_array_equal(X2, X)
    np.testing.assert_array_equal(a2, [0.25])
    # column-by-column vectorization
    np.testing.assert_array_equal(P.pack(X, [0.25])[:10], X[:, 0])


def test_dimension_mismatch():
    with pytest.raises(ValueError):
        build_lifted_problem(np.zeros(10), zoh_basis(12, 6), ModelOrders(1, 1))
    with pytest.raises(ValueError):
        build_lifted_problem(np.zeros(3), zoh_basis(3, 1), ModelOrders(1, 3))


def test_recoverability_zoh_false():
    P, _ = make_instance("zoh")
    rep = check_recoverability(P)
    assert not rep.full_column_rank
    assert rep.rank < rep.columns


def test_recoverability_gaussian_true():
    P, _ = make_instance("gaussian", seed=0)
    rep = check_recoverability(P)
    assert rep.full_column_rank and rep.rank == 31
    assert np.isfinite(rep.condition)


def test_recoverability_wide():
    P, _ = make_instance("gaussian", N=20, m=10)
    rep = check_recoverability(P)
    assert rep.rows < rep.columns
    assert not rep.full_column_rank
    assert rep.smallest_singular_value == 0.0


def test_recoverability_duplicate_column():
    P, _ = make_instance("gaussian", seed=2)
    A = P.A.copy()
    A[:, 1] = A[:, 0]
    fake = LiftedProblem(P.y, P.basis, P.orders, A, P.rhs)
    assert not check_recoverability(fake).full_column_rank


def test_extract_rank1_exact():
    f = extract_rank1(np.outer([1.0, 2.0], [3.0, 4.0]))
    np.testing.assert_allclose(f.b, [0.6, 0.8], atol=1e-15)
    np.testing.assert_allclose(f.x, [5.0, 10.0], atol=1e-14)
    assert f.rank_gap <= 1e-15 and not f.is_zero


def test_extract_rank1_identity():
    f = extract_rank1(np.eye(2))
    assert f.rank_gap == pytest.approx(1.0)
    assert np.linalg.norm(f.b) == pytest.approx(1.0)


def test_extract_rank1_zero():
    f = extract_rank1(np.zeros((3, 2)))
    assert f.is_zero and f.rank_gap == 0.0
    assert not np.any(f.x) and not np.any(f.b)


def test_extract_rank1_perturbed():
    rng = np.random.default_rng(0)
    x, b = rng.standard_normal(5), rng.standard_normal(3)
    f = extract_rank1(np.outer(x, b) + 1e-8 * rng.standard_normal((5, 3)))
    assert f.rank_gap <= 1e-6
    assert scale_invariant_error(x, f.x) <= 1e-6
    assert scale_invariant_error(b, f.b) <= 1e-6


def test_extract_rank1_sign_normalization():
    f = extract_rank1(np.outer([1.0, -1.0], [-2.0, 1.0]))
    assert f.b[0] > 0
    f = extract_rank1(np.outer([1.0, 2.0], [0.0, -3.0]))
    assert f.b[1] > 0


vec = arrays(np.float64, 4, elements=st.floats(-10, 10)).filter(lambda v: np.linalg.norm(v) > 1e-2)


@settings(max_examples=60, deadline=None)
@given(x=vec, b=arrays(np.float64, 3, elements=st.floats(-10, 10)).filter(lambda v: np.linalg.norm(v) > 1e-2))
def test_extract_rank1_roundtrip(x, b):
    f = extract_rank1(np.outer(x, b))
    np.testing.assert_allclose(np.outer(f.x, f.b), np.outer(x, b), atol=1e-12 * np.abs(x).max() * np.abs(b).max() * 10)
    assert np.linalg.norm(f.b) == pytest.approx(1.0, abs=1e-12)
    nz = np.flatnonzero(f.b)
    assert f.b[nz[0]] > 0


def test_scale_invariant_error_examples():
    v = np.array([1.0, -2.0, 0.5])
    assert scale_invariant_error(v, -3.0 * v) <= 1e-15
    assert scale_invariant_error([1.0, 0.0], [0.0, 2.0]) == 1.0
    assert scale_invariant_error([1.0, 0.0], [1.0, 1.0]) == pytest.approx(0.7071067811865476, abs=1e-15)
    assert scale_invariant_error(v, np.zeros(3)) == 1.0
    with pytest.raises(ValueError):
        scale_invariant_error(np.zeros(3), v)


@settings(max_examples=60, deadline=None)
@given(v=vec, w=vec, c1=st.sampled_from([-7.0, -0.5, 0.3, 2.0, 1e3]), c2=st.sampled_from([-2.0, 0.1, 5.0]))
def test_scale_invariant_error_invariance(v, w, c1, c2):
    e = scale_invariant_error(v, w)
    assert 0.0 <= e <= 1.0
    assert scale_invariant_error(c1 * v, c2 * w) == pytest.approx(e, abs=1e-12)


def test_assemble_zero_gives_ar_residual():
    P, truth = make_instance("zoh", seed=4)
    fit = ar_least_squares(P.y, 1, start=P.n)
    est = assemble_estimate(np.zeros((10, 3)), fit.a, P)
    np.testing.assert_allclose(est.eta, fit.residuals, atol=1e-13)
    assert est.is_zero


def test_assemble_exact_solution():
    P, truth = make_instance("gaussian", seed=1)
    X = np.outer(truth["x"], truth["model"].b)
    est = assemble_estimate(X, truth["model"].a, P)
    assert np.max(np.abs(est.eta)) <= 1e-8
    np.testing.assert_allclose(est.u_hat, P.basis.D @ est.x_hat)
    assert scale_invariant_error(truth["u"], est.u_hat) <= 1e-12
    # independent recomputation of eta from the model form
    ref = direct_residual(P.y.y, P.basis.D, P.orders, X, truth["model"].a)
    np.testing.assert_allclose(est.eta, ref, atol=1e-12)


def test_estimate_to_dict_fields():
    P, truth = make_instance("gaussian", seed=1)
    d = assemble_estimate(np.outer(truth["x"], truth["model"].b), truth["model"].a, P).to_dict()
    for key in ("a", "b", "x", "u", "rank_gap", "eta_norm", "iterations", "status"):
        assert key in d


def test_recovery_report_dict():
    P, _ = make_instance("zoh")
    d = check_recoverability(P).to_dict()
    assert set(d) == set(RecoveryReport.__dataclass_fields__)
