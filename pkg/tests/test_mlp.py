import numpy as np
import pytest
from hypothesis import given, strategies as st

from weaknesslab import mlp


def small_net(seed, d=5, h1=4, h2=3, k=3):
    rng = np.random.Generator(np.random.PCG64(seed))
    p = mlp.init_params(d, h1, h2, k, rng)
    return mlp.MlpParams(*(a + 0.1 * rng.standard_normal(a.shape) for a in p.arrays()))


def batch(seed, n=7, d=5, k=3):
    rng = np.random.Generator(np.random.PCG64(seed + 100))
    return rng.standard_normal((n, d)), rng.integers(0, k, n)


def relerr(a, b):
    return np.linalg.norm(a - b) / max(np.linalg.norm(a), np.linalg.norm(b), 1e-30)


@given(st.integers(0, 10_000))
def test_gradient_matches_central_differences(seed):
    p = small_net(seed)
    x, y = batch(seed)
    _, g = mlp.loss_and_grad(p, x, y)
    theta = p.flat()
    h = 1e-6
    fd = np.empty_like(theta)
    for i in range(theta.size):
        e = np.zeros_like(theta)
        e[i] = h
        fd[i] = (mlp.loss(p.unflat(theta + e), x, y) - mlp.loss(p.unflat(theta - e), x, y)) / (2 * h)
    assert relerr(g.flat(), fd) < 1e-5


@given(st.integers(0, 10_000))
def test_hvp_matches_gradient_differences(seed):
    p = small_net(seed)
    x, y = batch(seed)
    v = np.random.Generator(np.random.PCG64(seed)).standard_normal(p.size)
    hv = mlp.hessian_vector_product(p, x, y, p.unflat(v)).flat()
    h = 1e-5
    theta = p.flat()
    gp = mlp.loss_and_grad(p.unflat(theta + h * v), x, y)[1].flat()
    gm = mlp.loss_and_grad(p.unflat(theta - h * v), x, y)[1].flat()
    assert relerr(hv, (gp - gm) / (2 * h)) < 1e-4


def test_loss_matches_grad_loss():
    p, (x, y) = small_net(1), batch(1)
    assert mlp.loss(p, x, y) == pytest.approx(mlp.loss_and_grad(p, x, y)[0], abs=0)


def test_predict_ties_go_to_lowest_class():
    p = mlp.MlpParams.zeros(2, 2, 2, 3)
    assert mlp.predict(p, np.zeros(2)) == 0


def test_shape_and_value_errors():
    p = small_net(0)
    with pytest.raises(ValueError):
        mlp.forward(p, np.zeros(4))
    with pytest.raises(mlp.NumericError):
        mlp.loss_and_grad(p, np.full((1, 5), np.nan), [0])
    with pytest.raises(ValueError):
        mlp.MlpParams(np.zeros((2, 3)), np.zeros(3), np.zeros((2, 2)), np.zeros(2), np.zeros((2, 2)), np.zeros(2))


def test_checkpoint_roundtrip(tmp_path):
    p = small_net(3)
    p.save(tmp_path / "n.ckpt")
    assert mlp.MlpParams.load(tmp_path / "n.ckpt").equals(p)
    (tmp_path / "bad").write_bytes(b"nope")
    with pytest.raises(ValueError):
        mlp.MlpParams.load(tmp_path / "bad")


def test_training_is_seeded_and_memorises():
    rng = np.random.Generator(np.random.PCG64(0))
    x = rng.uniform(0, 1, (40, 6))
    y = np.arange(40) % 3
    cfg = mlp.TrainConfig(widths=(16, 8), batch_size=8, learning_rate=0.1, max_epochs=3000, seed=5)
    p1, log1 = mlp.train(cfg, x, y)
    p2, _ = mlp.train(cfg, x, y)
    assert p1.equals(p2)
    assert log1.reached_target and log1.final_train_accuracy == 1.0


def test_divergence_raises(monkeypatch):
    monkeypatch.setattr(mlp, "loss_and_grad", lambda params, x, y: (float("nan"), params))
    cfg = mlp.TrainConfig(widths=(4, 4), batch_size=4, max_epochs=5, seed=0)
    with pytest.raises(mlp.TrainingError) as info:
        mlp.train(cfg, np.ones((4, 3)), np.array([0, 1, 2, 0]))
    assert info.value.epoch == 1


def test_train_config_validation():
    with pytest.raises(ValueError):
        mlp.TrainConfig(learning_rate=0)
    with pytest.raises(ValueError):
        mlp.TrainConfig(target_train_accuracy=1.5)
