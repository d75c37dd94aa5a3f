"""Activation-pattern measures that depend only on the function a network computes.

Patterns use strict ``> 0`` on pre-activations, so a pre-activation that is
exactly zero counts as inactive.  Patterns are packed into bytes and hashed.
"""
from __future__ import annotations

import math
from collections import Counter
from dataclasses import dataclass

import numpy as np

from .mlp import MlpParams, forward, predict

MAX_PATTERN_WIDTH = 256


@dataclass(frozen=True)
class ActivationPattern:
    bits: bytes
    width: int
    layer: int

    def as_array(self) -> np.ndarray:
        return np.unpackbits(np.frombuffer(self.bits, dtype=np.uint8), count=self.width).astype(bool)


def pattern_matrix(params: MlpParams, inputs, layer: int) -> np.ndarray:
    """Boolean (n, width) matrix of ``pre-activation > 0`` at layer 1 or 2."""
    if layer not in (1, 2):
        raise ValueError("layer must be 1 or 2")
    x = np.asarray(inputs, dtype=np.float64)
    if x.ndim == 1:
        x = x[None, :]
    t = forward(params, x)
    return (t.pre1 if layer == 1 else t.pre2) > 0


def _pack(mat: np.ndarray) -> list[bytes]:
    if mat.shape[1] > MAX_PATTERN_WIDTH:
        raise ValueError(f"pattern width {mat.shape[1]} exceeds {MAX_PATTERN_WIDTH}")
    packed = np.packbits(mat, axis=1)
    return [row.tobytes() for row in packed]


def patterns(params: MlpParams, inputs, layer: int) -> set[ActivationPattern]:
    mat = pattern_matrix(params, inputs, layer)
    return {ActivationPattern(b, mat.shape[1], layer) for b in _pack(mat)}


def pattern_count(params: MlpParams, inputs, layer: int) -> int:
    mat = pattern_matrix(params, inputs, layer)
    if mat.shape[0] == 0:
        return 0
    return len(set(_pack(mat)))


@dataclass
class RegionTable:
    """Layer-2 regions touched by data, with train/unseen occupancy counts."""

    counts: dict  # ActivationPattern -> (n_train, n_unseen)

    @property
    def k_free(self) -> int:
        return sum(1 for nt, nu in self.counts.values() if nt == 0 and nu > 0)

    @property
    def n_regions(self) -> int:
        return len(self.counts)

    @property
    def train_regions(self) -> int:
        return sum(1 for nt, _ in self.counts.values() if nt > 0)

    def totals(self) -> tuple[int, int]:
        return (sum(nt for nt, _ in self.counts.values()), sum(nu for _, nu in self.counts.values()))


def region_table(params: MlpParams, train_inputs, unseen_inputs) -> RegionTable:
    width = params.W2.shape[0]
    tr = Counter(_pack(pattern_matrix(params, train_inputs, 2))) if len(train_inputs) else Counter()
    un = Counter(_pack(pattern_matrix(params, unseen_inputs, 2))) if len(unseen_inputs) else Counter()
    keys = sorted(set(tr) | set(un))
    return RegionTable({ActivationPattern(k, width, 2): (tr.get(k, 0), un.get(k, 0)) for k in keys})


def k_free(table: RegionTable) -> int:
    return table.k_free


def free_parameters(table: RegionTable, d2: int, n_classes: int = 10, train_only: bool = False) -> int:
    """``sum_r max(0, d2*K + K - n_r)`` with ``n_r`` the training points in region ``r``.

    The default sums over every region in the table; ``train_only=True``
    restricts the sum to regions holding training data.
    """
    cap = d2 * n_classes + n_classes
    return sum(max(0, cap - nt) for nt, _ in table.counts.values() if nt > 0 or not train_only)


def region_weakness_log(k_free: int, n_classes: int = 10) -> float:
    """Log of the training-label policy's weakness, ``k * ln(K + 1)``."""
    if k_free < 0:
        raise ValueError("k_free must be nonnegative")
    return k_free * math.log(n_classes + 1)


NO_ERRORS = None


def ensemble_agreement(subject: MlpParams, peers, unseen_x, unseen_y):
    """Among the subject's unseen errors, the fraction of (point, peer) pairs where the peer is right.

    Returns ``NO_ERRORS`` (``None``) when the subject makes no unseen errors.
    """
    peers = list(peers)
    if not peers:
        raise ValueError("need at least one peer network")
    return agreement_from_predictions(predict(subject, unseen_x), [predict(p, unseen_x) for p in peers], unseen_y)


def agreement_from_predictions(subject_pred, peer_preds, labels):
    """``ensemble_agreement`` on precomputed class predictions."""
    peer_preds = [np.asarray(p) for p in peer_preds]
    if not peer_preds:
        raise ValueError("need at least one peer network")
    y = np.asarray(labels)
    wrong = np.asarray(subject_pred) != y
    n_wrong = int(np.count_nonzero(wrong))
    if n_wrong == 0:
        return NO_ERRORS
    hits = sum(int(np.count_nonzero(p[wrong] == y[wrong])) for p in peer_preds)
    return hits / (len(peer_preds) * n_wrong)
