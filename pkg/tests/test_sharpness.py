import numpy as np
import pytest
from hypothesis import given, strategies as st

from weaknesslab import mlp, sharpness
from test_mlp import batch, small_net


def test_rademacher_trace_of_diagonal_is_exact():
    est = sharpness.hessian_trace(sharpness.QuadraticObjective(np.diag([1.0, 2.0, 3.0])), n_probes=50, seed=0)
    assert est.value == 6.0


@given(st.integers(1, 6), st.integers(0, 1000))
def test_diagonal_trace_exact_any_seed(n, seed):
    d = np.arange(1.0, n + 1)
    assert sharpness.hessian_trace(sharpness.QuadraticObjective(np.diag(d)), n_probes=3, seed=seed).value == d.sum()


def test_trace_unbiased_against_full_hessian():
    p, (x, y) = small_net(2), batch(2)
    obj = sharpness.MlpObjective(p, x, y)
    H = np.stack([obj.hvp(e) for e in np.eye(p.size)])
    est = sharpness.hessian_trace(p, (x, y), n_probes=4000, seed=1)
    sd = np.std(est.per_probe) / np.sqrt(4000)
    assert abs(est.value - np.trace(H)) < 4 * sd


def test_hessian_is_symmetric():
    p, (x, y) = small_net(4), batch(4)
    obj = sharpness.MlpObjective(p, x, y)
    H = np.stack([obj.hvp(e) for e in np.eye(p.size)])
    np.testing.assert_allclose(H, H.T, atol=1e-10)


def test_seed_determinism_and_probe_count():
    p, b = small_net(5), batch(5)
    a = sharpness.hessian_trace(p, b, 5, seed=3)
    assert a.value == sharpness.hessian_trace(p, b, 5, seed=3).value
    assert len(a.per_probe) == 5
    with pytest.raises(ValueError):
        sharpness.hessian_trace(p, b, 0)


def test_hvp_shape_check():
    p, b = small_net(0), batch(0)
    with pytest.raises(ValueError):
        sharpness.hvp(p, b, np.zeros(3))


def test_weight_norms():
    p = mlp.MlpParams.zeros(2, 2, 2, 2)
    p.W1[0, 0] = 3.0
    p.b3[1] = -4.0
    assert sharpness.weight_norms(p) == (7.0, 5.0)
