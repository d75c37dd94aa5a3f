import numpy as np
import pytest
from hypothesis import given, strategies as st
from scipy.optimize import linprog

from weaknesslab import simplex
from weaknesslab import _simplex_py

KERNELS = sorted(simplex.KERNELS)


def slack_lp(seed, m=4, n=5):
    """min c.x  s.t.  A x + s = b, x, s >= 0, b >= 0: the slack basis is feasible."""
    rng = np.random.Generator(np.random.PCG64(seed))
    A = rng.uniform(-1, 2, (m, n))
    b = rng.uniform(0.5, 3, m)
    c = rng.uniform(-2, 1, n)
    cols = np.vstack([A.T, np.eye(m)])
    cost = np.concatenate([c, np.zeros(m)])
    basis = np.arange(n, n + m, dtype=np.int64)
    return A, b, c, cols, cost, basis


@pytest.mark.parametrize("name", KERNELS)
@given(st.integers(0, 100_000))
def test_kernel_matches_highs(name, seed):
    A, b, c, cols, cost, basis = slack_lp(seed)
    kernel = simplex.get_kernel(name)
    status, B, x, lam, it = kernel(cols, b, cost, basis, 500)
    # a large box instead of free rays: HiGHS can report unbounded programs as infeasible
    ref = linprog(c, A_ub=A, b_ub=b, bounds=[(0, 1e6)] * len(c), method="highs")
    assert ref.status == 0
    if ref.x.max() > 1e5:
        assert status == simplex.UNBOUNDED
        return
    assert status == simplex.OPTIMAL
    assert cost[B] @ x == pytest.approx(ref.fun, abs=1e-8)
    red = cost - cols @ lam
    assert red.min() > -1e-8  # dual feasibility


@given(st.integers(0, 100_000))
def test_kernels_agree_pivot_for_pivot(seed):
    if len(KERNELS) < 2:
        pytest.skip("compiled kernel not built")
    _, b, _, cols, cost, basis = slack_lp(seed, 6, 8)
    outs = [simplex.get_kernel(k)(cols, b, cost, basis.copy(), 500) for k in KERNELS]
    (s0, b0, x0, l0, i0), (s1, b1, x1, l1, i1) = outs
    assert s0 == s1 and i0 == i1
    np.testing.assert_array_equal(b0, b1)
    np.testing.assert_allclose(x0, x1, atol=1e-10)


@pytest.mark.parametrize("name", KERNELS)
def test_unbounded_and_iteration_limit(name):
    kernel = simplex.get_kernel(name)
    # min -x1 s.t. x1 - x2 + s = 1: x1 can grow with x2
    cols = np.array([[1.0], [-1.0], [1.0]])
    status, *_ = kernel(cols, np.array([1.0]), np.array([-1.0, 0.0, 0.0]), np.array([2], np.int64), 50)
    assert status == simplex.UNBOUNDED
    A, b, c, cols, cost, basis = slack_lp(3, 6, 8)
    status, *_, it = kernel(cols, b, cost, basis, 0)
    assert status in (simplex.ITERATION_LIMIT, simplex.OPTIMAL) and it == 0


@pytest.mark.parametrize("name", KERNELS)
def test_singular_start(name):
    cols = np.array([[1.0, 0.0], [2.0, 0.0], [0.0, 1.0]])
    status, *_ = simplex.get_kernel(name)(cols, np.ones(2), np.zeros(3), np.array([0, 1], np.int64), 10)
    assert status == simplex.SINGULAR


@pytest.mark.parametrize("name", KERNELS)
def test_run_lp_reports_true_rhs_values(name):
    _, b, _, cols, cost, basis = slack_lp(11)
    status, B, x, _, _ = simplex.run_lp(simplex.get_kernel(name), cols, b, cost, basis, 500)
    assert status == simplex.OPTIMAL
    np.testing.assert_allclose(cols[B].T @ x, b, atol=1e-12)
    assert x.min() >= -simplex.CLEANUP_TOL


@given(st.integers(0, 100_000), st.integers(0, 100_000))
def test_dual_cleanup_reaches_optimum_after_rhs_change(seed, shift_seed):
    A, b, c, cols, cost, basis = slack_lp(seed, 6, 8)
    status, B, _, _, _ = simplex.get_kernel("python")(cols, b, cost, basis, 500)
    if status != simplex.OPTIMAL:
        return
    # the optimal basis stays dual feasible under a new rhs, but usually not primal feasible
    b2 = b * np.random.Generator(np.random.PCG64(shift_seed)).uniform(0.2, 3.0, b.size)
    ref = linprog(c, A_ub=A, b_ub=b2, bounds=[(0, 1e6)] * len(c), method="highs")
    if ref.status != 0 or ref.x.max() > 1e5:
        return
    status, x, lam, _ = simplex.dual_cleanup(cols, b2, cost, B)
    assert status == simplex.OPTIMAL
    assert x.min() >= -simplex.CLEANUP_TOL
    np.testing.assert_allclose(cols[B].T @ x, b2, atol=1e-10)
    assert cost[B] @ x == pytest.approx(ref.fun, abs=1e-8)
    assert (cost - cols @ lam).min() > -1e-8


def test_get_kernel():
    assert simplex.get_kernel("python") is _simplex_py.simplex
    assert simplex.get_kernel(_simplex_py.simplex) is _simplex_py.simplex
    assert simplex.BACKEND in simplex.KERNELS
    with pytest.raises(ValueError):
        simplex.get_kernel("fortran")


def test_benchmark_smoke(capsys):
    import importlib.util
    from pathlib import Path
    path = Path(__file__).resolve().parents[1] / "benchmarks" / "bench_simplex.py"
    spec = importlib.util.spec_from_file_location("bench_simplex", path)
    mod = importlib.util.module_from_spec(spec)
    spec.loader.exec_module(mod)
    mod.main(["--lps", "2", "--m", "10", "--n", "12", "--probes", "3"])
    assert "pair proxy" in capsys.readouterr().out


@pytest.mark.parametrize("setup, expected", [
    ("import os; os.environ['WEAKNESSLAB_PURE_PYTHON'] = '1'", "python"),
    ("import sys; sys.modules['weaknesslab._simplex'] = None", "python"),
])
def test_fallback_selected_at_import(setup, expected):
    import subprocess
    import sys
    code = f"{setup}\nimport weaknesslab\nprint(weaknesslab.BACKEND, sorted(weaknesslab.KERNELS))"
    out = subprocess.run([sys.executable, "-c", code], capture_output=True, text=True, check=True).stdout
    assert out.split()[0] == expected
