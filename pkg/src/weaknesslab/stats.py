"""Rank correlation and two-sample tests, with the Student-t tail computed in-house."""
from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

T_APPROX = "t_approx"
PERMUTATION = "permutation"
DEFAULT_PERMUTATIONS = 10_000

_CF_EPS = 1e-15
_CF_TINY = 1e-300
_CF_MAX_ITER = 10_000


class UndefinedCorrelation(ValueError):
    """A constant input has no ranks to correlate."""


class DegenerateVariance(ValueError):
    """Both samples have zero variance."""


@dataclass(frozen=True)
class CorrelationResult:
    rho: float
    p_value: float
    n: int
    method: str

    def to_json(self) -> dict:
        return {"rho": self.rho, "p_value": self.p_value, "n": self.n, "method": self.method}


def _betacf(a: float, b: float, x: float) -> float:
    """Continued fraction for the regularised incomplete beta (modified Lentz)."""
    qab, qap, qam = a + b, a + 1.0, a - 1.0
    c = 1.0
    d = 1.0 - qab * x / qap
    if abs(d) < _CF_TINY:
        d = _CF_TINY
    d = 1.0 / d
    h = d
    for m in range(1, _CF_MAX_ITER + 1):
        m2 = 2 * m
        aa = m * (b - m) * x / ((qam + m2) * (a + m2))
        d = 1.0 + aa * d
        d = _CF_TINY if abs(d) < _CF_TINY else d
        c = 1.0 + aa / c
        c = _CF_TINY if abs(c) < _CF_TINY else c
        d = 1.0 / d
        h *= d * c
        aa = -(a + m) * (qab + m) * x / ((a + m2) * (qap + m2))
        d = 1.0 + aa * d
        d = _CF_TINY if abs(d) < _CF_TINY else d
        c = 1.0 + aa / c
        c = _CF_TINY if abs(c) < _CF_TINY else c
        d = 1.0 / d
        delta = d * c
        h *= delta
        if abs(delta - 1.0) < _CF_EPS:
            return h
    raise ArithmeticError("incomplete beta continued fraction did not converge")


def betainc(a: float, b: float, x: float) -> float:
    """Regularised incomplete beta I_x(a, b)."""
    if not (a > 0 and b > 0):
        raise ValueError("a and b must be positive")
    if x <= 0.0:
        return 0.0
    if x >= 1.0:
        return 1.0
    log_front = (math.lgamma(a + b) - math.lgamma(a) - math.lgamma(b)
                 + a * math.log(x) + b * math.log1p(-x))
    front = math.exp(log_front)
    # the fraction converges fast on the side of the mean
    if x < (a + 1.0) / (a + b + 2.0):
        return front * _betacf(a, b, x) / a
    return 1.0 - front * _betacf(b, a, 1.0 - x) / b


def t_two_sided(t: float, df: float) -> float:
    """P(|T| >= |t|) for Student's t with ``df`` degrees of freedom."""
    if math.isnan(t):
        return float("nan")
    if math.isinf(t):
        return 0.0
    return min(1.0, betainc(0.5 * df, 0.5, df / (df + t * t)))


def rankdata(xs) -> np.ndarray:
    """Ranks 1..n, ties get the average of the ranks they span."""
    x = np.asarray(xs, dtype=np.float64)
    order = np.argsort(x, kind="mergesort")
    ranks = np.empty(x.size)
    sx = x[order]
    i = 0
    while i < x.size:
        j = i
        while j + 1 < x.size and sx[j + 1] == sx[i]:
            j += 1
        ranks[order[i:j + 1]] = 0.5 * (i + j) + 1.0
        i = j + 1
    return ranks


def _pearson(a: np.ndarray, b: np.ndarray) -> float:
    a = a - a.mean()
    b = b - b.mean()
    r = float(a @ b / math.sqrt(float(a @ a) * float(b @ b)))
    return max(-1.0, min(1.0, r))


def spearman(xs, ys, method: str = T_APPROX, seed: int = 0,
             n_permutations: int = DEFAULT_PERMUTATIONS) -> CorrelationResult:
    x = np.asarray(xs, dtype=np.float64).ravel()
    y = np.asarray(ys, dtype=np.float64).ravel()
    if x.size != y.size:
        raise ValueError("inputs differ in length")
    n = x.size
    if n < 3:
        raise ValueError("need at least three pairs")
    if np.all(x == x[0]) or np.all(y == y[0]):
        raise UndefinedCorrelation("constant input")
    rx, ry = rankdata(x), rankdata(y)
    if np.unique(x).size == n and np.unique(y).size == n:
        # integer ranks: sum of squared rank differences is exact
        d2 = int(((rx - ry).astype(np.int64) ** 2).sum())
        rho = 1.0 - 6 * d2 / (n * (n * n - 1))
    else:
        rho = _pearson(rx, ry)
    if method == T_APPROX:
        if abs(rho) >= 1.0:
            return CorrelationResult(rho, 0.0, n, method)
        t = rho * math.sqrt((n - 2) / (1.0 - rho * rho))
        return CorrelationResult(rho, t_two_sided(t, n - 2), n, method)
    if method == PERMUTATION:
        rng = np.random.Generator(np.random.PCG64(seed))
        rx_c = rx - rx.mean()
        ry_c = ry - ry.mean()
        denom = math.sqrt(float(rx_c @ rx_c) * float(ry_c @ ry_c))
        hits = 0
        for _ in range(n_permutations):
            r = float(rx_c @ rng.permutation(ry_c)) / denom
            if abs(r) >= abs(rho) - 1e-12:
                hits += 1
        return CorrelationResult(rho, (hits + 1) / (n_permutations + 1), n, method)
    raise ValueError(f"unknown method {method!r}")


def welch(xs, ys) -> tuple[float, float]:
    """Welch's unequal-variance t statistic and its two-sided p-value."""
    x = np.asarray(xs, dtype=np.float64).ravel()
    y = np.asarray(ys, dtype=np.float64).ravel()
    if x.size < 2 or y.size < 2:
        raise ValueError("each sample needs at least two values")
    vx, vy = x.var(ddof=1) / x.size, y.var(ddof=1) / y.size
    se2 = vx + vy
    if se2 <= 0.0:
        raise DegenerateVariance("both samples are constant")
    t = float((x.mean() - y.mean()) / math.sqrt(se2))
    df = se2 * se2 / (vx * vx / (x.size - 1) + vy * vy / (y.size - 1))
    return t, t_two_sided(t, df)
