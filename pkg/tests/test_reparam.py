import numpy as np
import pytest
from hypothesis import given, strategies as st

from weaknesslab import mlp, regions, reparam, sharpness
from test_mlp import batch, small_net


@given(st.sampled_from(["beta", "gamma"]), st.floats(0.05, 50), st.integers(0, 1000))
def test_rescaling_preserves_function_and_patterns(kind, s, seed):
    p = small_net(seed)
    q = reparam.apply(reparam.ReparamSpec(kind, s), p)
    x = np.random.Generator(np.random.PCG64(seed)).standard_normal((20, 5))
    np.testing.assert_allclose(mlp.logits(q, x), mlp.logits(p, x), rtol=1e-9, atol=1e-9)
    for layer in (1, 2):
        np.testing.assert_array_equal(regions.pattern_matrix(q, x, layer), regions.pattern_matrix(p, x, layer))


def test_identity_scale_is_identity():
    p = small_net(1)
    assert reparam.apply(reparam.ReparamSpec("beta", 1.0), p).equals(p)


def test_bad_specs():
    with pytest.raises(ValueError):
        reparam.ReparamSpec("delta", 2)
    with pytest.raises(ValueError):
        reparam.ReparamSpec("beta", 0)


def test_hessian_changes_under_rescaling():
    p, b = small_net(2), batch(2)
    h1 = sharpness.hessian_trace(p, b, 20, 0).value
    h5 = sharpness.hessian_trace(reparam.apply(reparam.ReparamSpec("beta", 5), p), b, 20, 0).value
    assert h5 != pytest.approx(h1)


def test_report_and_csv(tmp_path):
    p, (x, y) = small_net(3), batch(3)
    specs = [reparam.ReparamSpec("beta", 1), reparam.ReparamSpec("gamma", 5)]
    rows = reparam.invariance_report(p, specs, (x, y), (x, y), (x, y), peers=[small_net(4)], n_probes=3)
    assert rows[0].l1 == rows[1].l1 and rows[0].test_acc == rows[1].test_acc
    reparam.write_report_csv(rows, tmp_path / "r.csv")
    lines = (tmp_path / "r.csv").read_text().splitlines()
    assert lines[0] == ",".join(reparam.CSV_COLUMNS) and len(lines) == 3
