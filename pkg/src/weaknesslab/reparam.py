"""Function-preserving layer rescalings and the invariance report they feed."""
from __future__ import annotations

import csv
from dataclasses import dataclass

import numpy as np

from .mlp import MlpParams, accuracy, predict
from .regions import ensemble_agreement, pattern_count
from .sharpness import DEFAULT_PROBES, hessian_trace


@dataclass(frozen=True)
class ReparamSpec:
    kind: str  # "beta": layers 1-2, "gamma": layers 2-3
    value: float

    def __post_init__(self):
        if self.kind not in ("beta", "gamma"):
            raise ValueError(f"unknown reparameterisation {self.kind!r}")
        if not self.value > 0:
            raise ValueError("scale must be positive")


def apply(spec: ReparamSpec, params: MlpParams) -> MlpParams:
    """beta: (bW1, bb1, W2/b, b2, W3, b3); gamma: (W1, b1, gW2, gb2, W3/g, b3)."""
    W1, b1, W2, b2, W3, b3 = params.arrays()
    s = float(spec.value)
    if spec.kind == "beta":
        return MlpParams(s * W1, s * b1, W2 / s, b2.copy(), W3.copy(), b3.copy())
    return MlpParams(W1.copy(), b1.copy(), s * W2, s * b2, W3 / s, b3.copy())


@dataclass
class ReportRow:
    kind: str
    value: float
    test_acc: float
    hessian: float
    l1: int
    l2: int
    ea: float | None


CSV_COLUMNS = ("reparam", "value", "test_acc", "hessian", "l1", "l2", "ea")


def invariance_report(params: MlpParams, specs, train, test, unseen, peers=(),
                      n_probes: int = DEFAULT_PROBES, probe_seed: int = 0) -> list[ReportRow]:
    """One row per spec; every row shares the same Hutchinson probe seed.

    ``train``, ``test`` and ``unseen`` are ``(x, y)`` pairs.  The Hessian is
    taken on the training loss, pattern counts over the unseen inputs, and
    ensemble agreement against the (unmodified) peers when any are given.
    """
    rows = []
    for spec in specs:
        q = apply(spec, params)
        ea = ensemble_agreement(q, peers, *unseen) if peers else None
        rows.append(ReportRow(
            spec.kind, float(spec.value),
            accuracy(q, *test),
            hessian_trace(q, train, n_probes, probe_seed).value,
            pattern_count(q, unseen[0], 1),
            pattern_count(q, unseen[0], 2),
            ea,
        ))
    return rows


def write_report_csv(rows, path) -> None:
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(CSV_COLUMNS)
        for r in rows:
            w.writerow([r.kind, repr(r.value), repr(r.test_acc), repr(r.hessian), r.l1, r.l2,
                        "" if r.ea is None else repr(r.ea)])


def prediction_agreement(a: MlpParams, b: MlpParams, x) -> float:
    return float(np.mean(predict(a, x) == predict(b, x)))
