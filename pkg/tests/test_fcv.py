import itertools
from pathlib import Path

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from weaknesslab import fcv, simplex
from lp_oracles import highs_feasible, highs_margin, random_fm, random_search, substitution_ok


def test_rows_per_point_and_dedup():
    fm = fcv.FeatureMatrix([[1.0, 2.0], [1.0, 2.0], [0.5, 0.0]], [1, 1, 0], np.zeros((1, 2)), 3)
    prob = fcv.build_problem(fm)
    assert prob.n_rows == 4 and prob.n_base == 4  # duplicate point dropped
    A = prob.matrix()
    z = fcv.join_witness(np.array([[0, 0], [1, 1], [0, 0]]), np.array([0.0, 0.0, 0.0]))
    np.testing.assert_allclose(A @ z, [3.0, 3.0, -0.5, 0.0])


def test_bad_extras_and_margin():
    fm = fcv.FeatureMatrix([[1.0]], [0], [[2.0]], 2)
    with pytest.raises(ValueError):
        fcv.build_problem(fm, [(0, 5)])
    with pytest.raises(ValueError):
        fcv.build_problem(fm, [(3, 0)])
    with pytest.raises(ValueError):
        fcv.build_problem(fm, margin=0)


def test_empty_problem_is_feasible():
    fm = fcv.FeatureMatrix(np.zeros((0, 2)), [], np.zeros((0, 2)), 3)
    assert fcv.lp_feasible(fcv.build_problem(fm)).feasible


def test_gauge_roundtrip():
    z = np.arange(1.0, 1 + 3 * 2 + 3)
    cols = fcv.gauge_columns(3, 2)
    assert len(cols) == 3 * 2 + 3 - 3
    full = fcv.expand_gauge(z[cols], 3, 2)
    np.testing.assert_array_equal(full[cols], z[cols])
    assert not full[:2].any() and full[6] == 0


def test_planted_witness_is_feasible():
    rng = np.random.Generator(np.random.PCG64(0))
    for _ in range(20):
        W, b = rng.standard_normal((4, 3)), rng.standard_normal(4)
        f = rng.uniform(0, 1, (30, 3))
        y = np.argmax(f @ W.T + b, axis=1)
        prob = fcv.build_problem(fcv.FeatureMatrix(f, y, np.zeros((0, 3)), 4))
        res = fcv.lp_feasible(prob)
        assert res.feasible and substitution_ok(prob, res)


def test_same_point_two_labels_is_infeasible():
    fm = fcv.FeatureMatrix([[0.3, 0.2], [0.3, 0.2]], [0, 1], np.zeros((0, 2)), 2)
    res = fcv.lp_feasible(fcv.build_problem(fm))
    assert not res.feasible
    assert res.certificate.min() >= 0 and res.certificate.sum() == pytest.approx(1)


@given(st.integers(0, 2**32), st.integers(2, 3), st.integers(1, 3), st.integers(2, 9))
def test_verdicts_against_highs_and_search(seed, K, d, n):
    rng = np.random.Generator(np.random.PCG64(seed))
    fm = random_fm(rng, n, 1, K, d, integer=bool(seed % 2))
    prob = fcv.build_problem(fm, [(0, int(rng.integers(K)))])
    res = fcv.lp_feasible(prob)
    assert res.feasible == highs_feasible(prob)
    if res.feasible:
        assert substitution_ok(prob, res)
    else:
        assert random_search(prob, rng, 500) is None
        A = prob.matrix()
        assert np.abs(A.T @ res.certificate).max() <= 1e-7 * max(1, np.abs(A).max())


@pytest.mark.parametrize("kernel", sorted(simplex.KERNELS))
def test_max_margin_against_highs(kernel):
    rng = np.random.Generator(np.random.PCG64(5))
    W, b = rng.standard_normal((3, 4)), rng.standard_normal(3)
    f = rng.uniform(0, 1, (25, 4))
    fm = fcv.FeatureMatrix(f, np.argmax(f @ W.T + b, axis=1), np.zeros((0, 4)), 3)
    eps, (Wz, bz) = fcv.max_margin(fm, kernel, return_witness=True)
    assert eps == pytest.approx(highs_margin(fcv.build_problem(fm, (), 1.0).matrix()), abs=1e-7)
    assert max(np.abs(Wz).max(), np.abs(bz).max()) <= 1 + 1e-9


def test_max_margin_degenerate():
    fm = fcv.FeatureMatrix([[1.0], [1.0]], [0, 1], np.zeros((0, 1)), 2)
    with pytest.raises(fcv.DegeneratePolicyError):
        fcv.max_margin(fm)
    with pytest.raises(fcv.DegeneratePolicyError):
        fcv.pair_proxy(fcv.FeatureMatrix([[1.0], [1.0]], [0, 1], [[0.5]], 2))


@given(st.integers(0, 2**32), st.integers(1, 3), st.integers(2, 3), st.integers(1, 2))
@settings(max_examples=25)
def test_pointwise_equals_joint_marginals(seed, m, K, d):
    rng = np.random.Generator(np.random.PCG64(seed))
    W, b = rng.standard_normal((K, d)), rng.standard_normal(K)
    f = rng.uniform(0, 1, (4, d))
    fm = fcv.FeatureMatrix(f, np.argmax(f @ W.T + b, axis=1), rng.uniform(0, 1, (m, d)), K)
    pp = fcv.pair_proxy(fm)
    assert pp.extensions == fcv.joint_extension_classes(fm)


def test_pair_proxy_bounds_and_known_witness():
    rng = np.random.Generator(np.random.PCG64(9))
    W, b = rng.standard_normal((4, 3)), rng.standard_normal(4)
    f = rng.uniform(0, 1, (20, 3))
    y = np.argmax(f @ W.T + b, axis=1)
    fm = fcv.FeatureMatrix(f, y, rng.uniform(0, 1, (6, 3)), 4)
    plain = fcv.pair_proxy(fm)
    hinted = fcv.pair_proxy(fm, known_witness=(W, b))
    assert plain.extensions == hinted.extensions
    assert 6 <= plain.total <= 24
    assert hinted.n_shortcut >= 1
    # the trained layer's own prediction is always feasible
    pred = np.argmax(fm.probe_features @ W.T + b, axis=1)
    assert all(pred[j] in plain.extensions[j] for j in range(6))
    assert plain.counts() == [len(plain.extensions[j]) for j in range(6)]


def test_margin_value_does_not_change_verdicts():
    rng = np.random.Generator(np.random.PCG64(2))
    W, b = rng.standard_normal((3, 2)), rng.standard_normal(3)
    f = rng.uniform(0, 1, (8, 2))
    fm = fcv.FeatureMatrix(f, np.argmax(f @ W.T + b, axis=1), rng.uniform(0, 1, (4, 2)), 3)
    ref = fcv.pair_proxy(fm, 1e-3).extensions
    for eps in (1e-4, 1e-2, 10.0):
        assert fcv.pair_proxy(fm, eps).extensions == ref


def test_affine_invariance():
    rng = np.random.Generator(np.random.PCG64(4))
    W, b = rng.standard_normal((3, 3)), rng.standard_normal(3)
    f = rng.uniform(0, 1, (12, 3))
    fm = fcv.FeatureMatrix(f, np.argmax(f @ W.T + b, axis=1), rng.uniform(0, 1, (4, 3)), 3)
    assert fcv.affine_invariance_check(fm, 2 * np.eye(3))
    with pytest.raises(ValueError):
        fcv.affine_invariance_check(fm, np.zeros((3, 3)))


def test_kernels_give_identical_extensions():
    if len(simplex.KERNELS) < 2:
        pytest.skip("compiled kernel not built")
    rng = np.random.Generator(np.random.PCG64(8))
    W, b = rng.standard_normal((5, 4)), rng.standard_normal(5)
    f = rng.uniform(0, 1, (40, 4))
    fm = fcv.FeatureMatrix(f, np.argmax(f @ W.T + b, axis=1), rng.uniform(0, 1, (8, 4)), 5)
    a, c = (fcv.pair_proxy(fm, kernel=k) for k in sorted(simplex.KERNELS))
    assert a.extensions == c.extensions


@pytest.mark.parametrize("kernel", sorted(simplex.KERNELS))
def test_near_degenerate_working_set(kernel):
    # rows and warm basis from a trained net whose margin optimum sits about 1e-6 above zero;
    # removing the rhs perturbation used to leave the basis slightly primal infeasible
    path = Path(__file__).parent / "data" / "near_degenerate_lp.npz"
    with np.load(path) as f:
        rows, basis = f["rows"], f["basis"]
    res = fcv.MarginSolver(rows, kernel)._run(rows, basis.copy(), verify=True)
    assert res.verdict.feasible
    assert res.margin == pytest.approx(highs_margin(rows), abs=1e-9)
    assert (rows @ res.verdict.witness).min() > 1.0 - 1e-6
