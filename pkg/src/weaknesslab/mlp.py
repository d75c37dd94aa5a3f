"""A fixed-architecture ReLU MLP, ``d -> H1 -> H2 -> K``, with hand-written derivatives.

Everything runs in float64.  Activation patterns use strict ``> 0`` on the
pre-activation (zero counts as inactive) and the ReLU's second derivative is
taken to be zero, so Hessian-vector products treat the network as linear
inside its current activation region.
"""
from __future__ import annotations

import json
import math
import struct
from dataclasses import asdict, dataclass, field
from pathlib import Path

import numpy as np

PARAM_NAMES = ("W1", "b1", "W2", "b2", "W3", "b3")
CKPT_MAGIC = b"WLMP"
CKPT_VERSION = 1


class NumericError(ArithmeticError):
    """A non-finite value appeared where finite values are required."""


class TrainingError(RuntimeError):
    def __init__(self, epoch: int, message: str):
        super().__init__(f"epoch {epoch}: {message}")
        self.epoch = epoch


@dataclass(eq=False)
class MlpParams:
    W1: np.ndarray
    b1: np.ndarray
    W2: np.ndarray
    b2: np.ndarray
    W3: np.ndarray
    b3: np.ndarray

    def __post_init__(self):
        for name in PARAM_NAMES:
            setattr(self, name, np.asarray(getattr(self, name), dtype=np.float64))
        h1, d = self.W1.shape
        h2 = self.W2.shape[0]
        k = self.W3.shape[0]
        if (self.b1.shape != (h1,) or self.W2.shape != (h2, h1) or self.b2.shape != (h2,)
                or self.W3.shape != (k, h2) or self.b3.shape != (k,)):
            raise ValueError("inconsistent parameter shapes")

    @property
    def widths(self) -> tuple[int, int, int, int]:
        return self.W1.shape[1], self.W1.shape[0], self.W2.shape[0], self.W3.shape[0]

    def arrays(self) -> list[np.ndarray]:
        return [getattr(self, n) for n in PARAM_NAMES]

    @property
    def size(self) -> int:
        return sum(a.size for a in self.arrays())

    def flat(self) -> np.ndarray:
        return np.concatenate([a.ravel() for a in self.arrays()])

    def unflat(self, vec: np.ndarray) -> "MlpParams":
        """New params with this object's shapes, filled from ``vec``."""
        vec = np.asarray(vec, dtype=np.float64)
        if vec.shape != (self.size,):
            raise ValueError(f"vector of length {vec.shape} does not match {self.size} parameters")
        out, i = [], 0
        for a in self.arrays():
            out.append(vec[i:i + a.size].reshape(a.shape))
            i += a.size
        return MlpParams(*out)

    def copy(self) -> "MlpParams":
        return MlpParams(*(a.copy() for a in self.arrays()))

    def equals(self, other: "MlpParams") -> bool:
        return all(np.array_equal(a, b) for a, b in zip(self.arrays(), other.arrays()))

    @classmethod
    def zeros(cls, d: int, h1: int, h2: int, k: int) -> "MlpParams":
        return cls(np.zeros((h1, d)), np.zeros(h1), np.zeros((h2, h1)), np.zeros(h2),
                   np.zeros((k, h2)), np.zeros(k))

    def save(self, path) -> None:
        """Checkpoint: magic, u32 version, u32 d/H1/H2/K, then the six arrays as
        little-endian row-major float64 in the order W1 b1 W2 b2 W3 b3."""
        with open(path, "wb") as fh:
            fh.write(CKPT_MAGIC + struct.pack("<IIIII", CKPT_VERSION, *self.widths))
            for a in self.arrays():
                fh.write(np.ascontiguousarray(a, dtype="<f8").tobytes())

    @classmethod
    def load(cls, path) -> "MlpParams":
        buf = Path(path).read_bytes()
        if buf[:4] != CKPT_MAGIC:
            raise ValueError(f"{path}: not a parameter checkpoint")
        version, d, h1, h2, k = struct.unpack("<IIIII", buf[4:24])
        if version != CKPT_VERSION:
            raise ValueError(f"{path}: checkpoint version {version}")
        template = cls.zeros(d, h1, h2, k)
        if len(buf) != 24 + 8 * template.size:
            raise ValueError(f"{path}: truncated checkpoint")
        return template.unflat(np.frombuffer(buf, dtype="<f8", offset=24))


@dataclass(eq=False)
class ForwardTrace:
    pre1: np.ndarray
    post1: np.ndarray
    pre2: np.ndarray
    post2: np.ndarray
    logits: np.ndarray


def _as_batch(params: MlpParams, x) -> tuple[np.ndarray, bool]:
    x = np.asarray(x, dtype=np.float64)
    single = x.ndim == 1
    if single:
        x = x[None, :]
    if x.ndim != 2 or x.shape[1] != params.W1.shape[1]:
        raise ValueError(f"input of shape {x.shape} does not match input width {params.W1.shape[1]}")
    return x, single


def relu(z: np.ndarray) -> np.ndarray:
    return np.where(z > 0, z, 0.0)


def forward(params: MlpParams, x) -> ForwardTrace:
    """Forward pass over one input (1-D) or a batch (rows)."""
    X, single = _as_batch(params, x)
    pre1 = X @ params.W1.T + params.b1
    post1 = relu(pre1)
    pre2 = post1 @ params.W2.T + params.b2
    post2 = relu(pre2)
    logits = post2 @ params.W3.T + params.b3
    if single:
        return ForwardTrace(pre1[0], post1[0], pre2[0], post2[0], logits[0])
    return ForwardTrace(pre1, post1, pre2, post2, logits)


def features(params: MlpParams, x) -> np.ndarray:
    """Post-ReLU layer-2 representation (the frozen feature map)."""
    return forward(params, x).post2


def logits(params: MlpParams, x) -> np.ndarray:
    return forward(params, x).logits


def predict(params: MlpParams, x) -> np.ndarray:
    # np.argmax returns the first maximum, i.e. ties go to the lowest class index
    return np.argmax(forward(params, x).logits, axis=-1)


def accuracy(params: MlpParams, xs, ys) -> float:
    ys = np.asarray(ys)
    if ys.size == 0:
        return float("nan")
    return float(np.mean(predict(params, xs) == ys))


def _softmax(s: np.ndarray) -> np.ndarray:
    e = np.exp(s - s.max(axis=1, keepdims=True))
    return e / e.sum(axis=1, keepdims=True)


def _check_finite(*arrays):
    for a in arrays:
        if not np.all(np.isfinite(a)):
            raise NumericError("non-finite value in inputs")


def loss_and_grad(params: MlpParams, batch_x, batch_y) -> tuple[float, MlpParams]:
    """Mean softmax cross-entropy and its gradient by reverse accumulation."""
    X, _ = _as_batch(params, batch_x)
    y = np.asarray(batch_y, dtype=np.int64).ravel()
    if X.shape[0] == 0 or y.shape[0] != X.shape[0]:
        raise ValueError("need a nonempty batch with one label per row")
    _check_finite(X, *params.arrays())
    n = X.shape[0]
    t = forward(params, X)
    s = t.logits
    shifted = s - s.max(axis=1, keepdims=True)
    logz = np.log(np.exp(shifted).sum(axis=1))
    loss = float(np.mean(logz - shifted[np.arange(n), y]))
    p = np.exp(shifted - logz[:, None])

    ds = p
    ds[np.arange(n), y] -= 1.0
    ds /= n
    gW3 = ds.T @ t.post2
    gb3 = ds.sum(axis=0)
    dz2 = (ds @ params.W3) * (t.pre2 > 0)
    gW2 = dz2.T @ t.post1
    gb2 = dz2.sum(axis=0)
    dz1 = (dz2 @ params.W2) * (t.pre1 > 0)
    gW1 = dz1.T @ X
    gb1 = dz1.sum(axis=0)
    return loss, MlpParams(gW1, gb1, gW2, gb2, gW3, gb3)


def loss(params: MlpParams, batch_x, batch_y) -> float:
    X, _ = _as_batch(params, batch_x)
    y = np.asarray(batch_y, dtype=np.int64).ravel()
    s = forward(params, X).logits
    shifted = s - s.max(axis=1, keepdims=True)
    logz = np.log(np.exp(shifted).sum(axis=1))
    return float(np.mean(logz - shifted[np.arange(len(y)), y]))


def hessian_vector_product(params: MlpParams, batch_x, batch_y, v: MlpParams) -> MlpParams:
    """H·v of the mean cross-entropy, forward-mode (R-operator) over the backward pass."""
    X, _ = _as_batch(params, batch_x)
    y = np.asarray(batch_y, dtype=np.int64).ravel()
    n = X.shape[0]
    W1, b1, W2, b2, W3, b3 = params.arrays()
    V1, c1, V2, c2, V3, c3 = v.arrays()

    z1 = X @ W1.T + b1
    m1 = z1 > 0
    h1 = np.where(m1, z1, 0.0)
    z2 = h1 @ W2.T + b2
    m2 = z2 > 0
    h2 = np.where(m2, z2, 0.0)
    p = _softmax(h2 @ W3.T + b3)

    # tangents of the forward pass
    Rz1 = X @ V1.T + c1
    Rh1 = Rz1 * m1
    Rz2 = Rh1 @ W2.T + h1 @ V2.T + c2
    Rh2 = Rz2 * m2
    Rs = Rh2 @ W3.T + h2 @ V3.T + c3
    Rp = p * (Rs - np.sum(p * Rs, axis=1, keepdims=True))

    ds = p.copy()
    ds[np.arange(n), y] -= 1.0
    ds /= n
    Rds = Rp / n

    dz2 = (ds @ W3) * m2
    Rdz2 = (Rds @ W3 + ds @ V3) * m2
    dz1 = (dz2 @ W2) * m1
    Rdz1 = (Rdz2 @ W2 + dz2 @ V2) * m1

    out = MlpParams(
        Rdz1.T @ X, Rdz1.sum(axis=0),
        Rdz2.T @ h1 + dz2.T @ Rh1, Rdz2.sum(axis=0),
        Rds.T @ h2 + ds.T @ Rh2, Rds.sum(axis=0),
    )
    if not np.all(np.isfinite(out.flat())):
        raise NumericError("non-finite Hessian-vector product")
    return out


@dataclass
class TrainConfig:
    widths: tuple[int, int] = (64, 8)
    batch_size: int = 64
    learning_rate: float = 0.05
    max_epochs: int = 2000
    target_train_accuracy: float = 1.0
    seed: int = 0
    n_classes: int = 10

    def __post_init__(self):
        self.widths = tuple(int(w) for w in self.widths)
        if min(self.widths) < 1 or self.batch_size < 1 or self.max_epochs < 1 or self.n_classes < 2:
            raise ValueError("sizes must be positive")
        if not 0 < self.target_train_accuracy <= 1:
            raise ValueError("target_train_accuracy must lie in (0, 1]")
        if not self.learning_rate > 0:
            raise ValueError("learning_rate must be positive")


@dataclass
class TrainLog:
    config: dict
    init_scheme: str
    epochs: int = 0
    losses: list = field(default_factory=list)
    accuracies: list = field(default_factory=list)
    final_train_accuracy: float = 0.0
    reached_target: bool = False

    def to_json(self) -> str:
        return json.dumps(asdict(self), sort_keys=True)


def init_params(d: int, h1: int, h2: int, k: int, rng: np.random.Generator) -> MlpParams:
    """Symmetric uniform init with half-width sqrt(6 / (fan_in + fan_out)); zero biases."""
    def layer(fan_out, fan_in):
        a = math.sqrt(6.0 / (fan_in + fan_out))
        return rng.uniform(-a, a, size=(fan_out, fan_in))
    return MlpParams(layer(h1, d), np.zeros(h1), layer(h2, h1), np.zeros(h2), layer(k, h2), np.zeros(k))


def train(config: TrainConfig, x_train, y_train) -> tuple[MlpParams, TrainLog]:
    """Minibatch SGD, reshuffled every epoch, until the training accuracy target or ``max_epochs``."""
    X = np.asarray(x_train, dtype=np.float64)
    y = np.asarray(y_train, dtype=np.int64)
    n, d = X.shape
    init_ss, shuffle_ss = np.random.SeedSequence(config.seed).spawn(2)
    params = init_params(d, *config.widths, config.n_classes, np.random.Generator(np.random.PCG64(init_ss)))
    shuffle_rng = np.random.Generator(np.random.PCG64(shuffle_ss))
    log = TrainLog(asdict(config), "uniform_sqrt6_fanavg")
    lr = config.learning_rate
    bs = min(config.batch_size, n)
    for epoch in range(1, config.max_epochs + 1):
        order = shuffle_rng.permutation(n)
        total = 0.0
        for start in range(0, n, bs):
            idx = order[start:start + bs]
            batch_loss, g = loss_and_grad(params, X[idx], y[idx])
            if not math.isfinite(batch_loss):
                raise TrainingError(epoch, "loss is not finite")
            total += batch_loss * len(idx)
            for name in PARAM_NAMES:
                getattr(params, name)[...] -= lr * getattr(g, name)
        acc = accuracy(params, X, y)
        log.losses.append(total / n)
        log.accuracies.append(acc)
        log.epochs = epoch
        if not np.all(np.isfinite(params.flat())):
            raise TrainingError(epoch, "parameters diverged")
        if acc >= config.target_train_accuracy:
            log.reached_target = True
            break
    log.final_train_accuracy = log.accuracies[-1]
    return params, log
