"""Parameterisation-dependent measures: Hutchinson Hessian trace and weight norms."""
from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .mlp import MlpParams, NumericError, hessian_vector_product, loss_and_grad

DEFAULT_PROBES = 50


class MlpObjective:
    """Mean cross-entropy of a network on a fixed batch, exposed on flat parameter vectors."""

    def __init__(self, params: MlpParams, batch_x, batch_y):
        self.params = params
        self.x = np.asarray(batch_x, dtype=np.float64)
        self.y = np.asarray(batch_y, dtype=np.int64)

    @property
    def dim(self) -> int:
        return self.params.size

    def grad(self, theta: np.ndarray) -> np.ndarray:
        return loss_and_grad(self.params.unflat(theta), self.x, self.y)[1].flat()

    def hvp(self, v: np.ndarray) -> np.ndarray:
        return hessian_vector_product(self.params, self.x, self.y, self.params.unflat(v)).flat()


class QuadraticObjective:
    """``L(theta) = 0.5 theta^T D theta`` behind the same interface; used to pin the estimator."""

    def __init__(self, D):
        self.D = np.atleast_2d(np.asarray(D, dtype=np.float64))

    @property
    def dim(self) -> int:
        return self.D.shape[0]

    def grad(self, theta: np.ndarray) -> np.ndarray:
        return 0.5 * (self.D + self.D.T) @ theta

    def hvp(self, v: np.ndarray) -> np.ndarray:
        return 0.5 * (self.D + self.D.T) @ v


def hvp(params: MlpParams, batch, v) -> np.ndarray:
    """Exact Hessian-vector product of the batch loss, as a flat vector."""
    x, y = batch
    if isinstance(v, MlpParams):
        v = v.flat()
    v = np.asarray(v, dtype=np.float64)
    if v.shape != (params.size,):
        raise ValueError(f"direction has shape {v.shape}, parameters have {params.size} entries")
    return MlpObjective(params, x, y).hvp(v)


@dataclass
class TraceEstimate:
    value: float
    n_probes: int
    probe_seed: int
    per_probe: list = field(default_factory=list)


def rademacher(dim: int, n: int, seed: int) -> np.ndarray:
    rng = np.random.Generator(np.random.PCG64(seed))
    return rng.integers(0, 2, size=(n, dim)).astype(np.float64) * 2.0 - 1.0


def hessian_trace(target, batch=None, n_probes: int = DEFAULT_PROBES, seed: int = 0) -> TraceEstimate:
    """Hutchinson estimate ``mean_i v_i^T H v_i`` over Rademacher probes.

    ``target`` is either an :class:`MlpParams` (with ``batch=(x, y)``) or any
    object with ``dim`` and ``hvp``.
    """
    if n_probes < 1:
        raise ValueError("need at least one probe")
    obj = MlpObjective(target, *batch) if isinstance(target, MlpParams) else target
    probes = rademacher(obj.dim, n_probes, seed)
    per_probe = [float(v @ obj.hvp(v)) for v in probes]
    if not np.all(np.isfinite(per_probe)):
        raise NumericError("non-finite probe value")
    value = float(np.sum(per_probe) / n_probes)
    return TraceEstimate(value, n_probes, seed, per_probe)


def weight_norms(params: MlpParams) -> tuple[float, float]:
    """(L1, L2) over every weight and bias entry."""
    flat = params.flat()
    return float(np.abs(flat).sum()), float(np.sqrt(flat @ flat))
