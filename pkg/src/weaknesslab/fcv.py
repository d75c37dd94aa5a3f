"""Feature-classifier vocabulary: which classes can a probe take while the training labels stay realisable?

A final linear layer ``(W, b)`` with ``W`` of shape ``(K, d)`` acts on frozen
features.  The program "x is classified as c" is the set of ``(W, b)`` with
``W_c.phi(x) + b_c > W_c'.phi(x) + b_c'`` for every ``c' != c``, one strict
row per loser class.  A set of programs is consistent exactly when the row
system ``a_i . z >= eps`` has a solution; without a box on ``z`` this does
not depend on ``eps`` (scale any witness), so ``eps`` only fixes the scale of
the reported witness.

Feasibility is decided by the box-bounded margin LP ``max t : A z >= t,
|z|_inf <= 1``, solved through its dual over the probability simplex, which
has ``Kd + K + 1`` constraints however many rows there are.  The rows admit
``A z > 0`` iff ``t* > 0``; then the optimal duals are a witness ``z``.  At
``t* = 0`` the basic ``y >= 0`` has ``A^T y = 0``, the alternative (Gordan)
certificate of infeasibility.
"""
from __future__ import annotations

import itertools
import time
from dataclasses import dataclass, field

import numpy as np

from .simplex import OPTIMAL, get_kernel, run_lp

SLACK_TOL = 1e-9
VERDICT_TOL = 1e-9
CERT_TOL = 1e-7
ITER_FACTOR = 50
POOL_SIZE = 256
# (rhs perturbation, pivots between refactorisations), tried in order
RETRY_LADDER = ((1e-7, 128), (1e-6, 32), (1e-8, 16), (1e-5, 8))


class SolverError(RuntimeError):
    """The LP engine failed to reach a verdict (iteration cap, singular basis)."""


class DegeneratePolicyError(ValueError):
    """The training assignments admit no positive margin."""


@dataclass(eq=False)
class FeatureMatrix:
    train_features: np.ndarray
    train_labels: np.ndarray
    probe_features: np.ndarray
    n_classes: int = 10

    def __post_init__(self):
        self.train_features = np.atleast_2d(np.asarray(self.train_features, dtype=np.float64))
        self.train_labels = np.asarray(self.train_labels, dtype=np.int64).ravel()
        d = self.train_features.shape[1]
        self.probe_features = np.asarray(self.probe_features, dtype=np.float64).reshape(-1, d)
        if self.train_features.shape[0] != self.train_labels.shape[0]:
            raise ValueError("one label per training feature row")
        if self.train_labels.size and (self.train_labels.min() < 0 or self.train_labels.max() >= self.n_classes):
            raise ValueError("training label out of range")
        if not (np.all(np.isfinite(self.train_features)) and np.all(np.isfinite(self.probe_features))):
            raise ValueError("features must be finite")

    @property
    def d(self) -> int:
        return self.train_features.shape[1]

    @property
    def n_vars(self) -> int:
        return self.n_classes * self.d + self.n_classes

    def transformed(self, A: np.ndarray) -> "FeatureMatrix":
        """Features mapped by ``phi -> A phi``."""
        return FeatureMatrix(self.train_features @ A.T, self.train_labels, self.probe_features @ A.T, self.n_classes)


@dataclass(eq=False)
class FeasibilityProblem:
    features: np.ndarray  # (rows, d)
    winners: np.ndarray
    losers: np.ndarray
    margin: float
    n_classes: int
    n_base: int = 0  # leading rows that come from the training policy

    def __post_init__(self):
        if not self.margin > 0:
            raise ValueError("margin must be positive")
        if np.any(self.winners == self.losers):
            raise ValueError("winner and loser must differ")

    @property
    def d(self) -> int:
        return self.features.shape[1]

    @property
    def n_vars(self) -> int:
        return self.n_classes * self.d + self.n_classes

    @property
    def n_rows(self) -> int:
        return self.features.shape[0]

    def matrix(self) -> np.ndarray:
        """Dense row matrix over z = (W row-major, b)."""
        return row_matrix(self.features, self.winners, self.losers, self.n_classes)


def row_matrix(feats, winners, losers, K) -> np.ndarray:
    R, d = feats.shape
    A = np.zeros((R, K * d + K))
    r = np.arange(R)
    for k in range(d):
        A[r, winners * d + k] += feats[:, k]
        A[r, losers * d + k] -= feats[:, k]
    A[r, K * d + winners] += 1.0
    A[r, K * d + losers] -= 1.0
    return A


def _rows_for(feats: np.ndarray, labels: np.ndarray, K: int):
    n = feats.shape[0]
    winners = np.repeat(labels, K - 1)
    losers = np.array([c for y in labels for c in range(K) if c != y], dtype=np.int64).reshape(-1)
    return np.repeat(feats, K - 1, axis=0).reshape(n * (K - 1), feats.shape[1]), winners, losers


def _dedup(feats, winners, losers, seen: set):
    keep = []
    for i in range(feats.shape[0]):
        key = (feats[i].tobytes(), int(winners[i]), int(losers[i]))
        if key not in seen:
            seen.add(key)
            keep.append(i)
    keep = np.array(keep, dtype=np.int64)
    return feats[keep], winners[keep], losers[keep]


def build_problem(fm: FeatureMatrix, extra=(), margin: float = 1e-3) -> FeasibilityProblem:
    """Training rows (winner = label) followed by rows for each ``(probe_index, class)`` in ``extra``.

    Exact duplicate rows are dropped; the training rows stay a prefix so that
    solvers can warm-start from the training-only problem.
    """
    K, d = fm.n_classes, fm.d
    extra = list(extra)
    for j, c in extra:
        if not 0 <= c < K:
            raise ValueError(f"class {c} out of range")
        if not 0 <= j < fm.probe_features.shape[0]:
            raise ValueError(f"probe index {j} out of range")
    seen: set = set()
    f0, w0, l0 = _dedup(*_rows_for(fm.train_features, fm.train_labels, K), seen)
    if extra:
        pf = fm.probe_features[[j for j, _ in extra]]
        pc = np.array([c for _, c in extra], dtype=np.int64)
        f1, w1, l1 = _dedup(*_rows_for(pf, pc, K), seen)
    else:
        f1, w1, l1 = np.zeros((0, d)), np.zeros(0, np.int64), np.zeros(0, np.int64)
    return FeasibilityProblem(np.vstack([f0, f1]), np.concatenate([w0, w1]), np.concatenate([l0, l1]),
                              margin, K, n_base=f0.shape[0])


@dataclass(eq=False)
class FeasibilityResult:
    feasible: bool
    witness: tuple | None = None  # (W, b) with every row slack >= margin
    iterations: int = 0
    certificate: np.ndarray | None = None  # y >= 0, sum 1, A^T y ~ 0 when infeasible
    certificate_residual: float = float("nan")
    basis: np.ndarray | None = field(default=None, repr=False)

    @property
    def verdict(self) -> str:
        return "feasible" if self.feasible else "infeasible"


def split_witness(z: np.ndarray, K: int, d: int) -> tuple[np.ndarray, np.ndarray]:
    return z[:K * d].reshape(K, d).copy(), z[K * d:].copy()


def join_witness(W: np.ndarray, b: np.ndarray) -> np.ndarray:
    return np.concatenate([np.asarray(W, dtype=np.float64).ravel(), np.asarray(b, dtype=np.float64)])


def row_slacks(problem: FeasibilityProblem, W, b) -> np.ndarray:
    return problem.matrix() @ join_witness(W, b)


def gauge_columns(K: int, d: int) -> np.ndarray:
    """Variables left after pinning class 0 to ``W_0 = 0, b_0 = 0``.

    Every row depends on ``(W, b)`` only through class differences, so the
    pinned system has the same verdicts and full column rank.
    """
    keep = np.ones(K * d + K, dtype=bool)
    keep[:d] = False
    keep[K * d] = False
    return np.flatnonzero(keep)


def expand_gauge(z: np.ndarray, K: int, d: int) -> np.ndarray:
    full = np.zeros(K * d + K)
    full[gauge_columns(K, d)] = z
    return full


class MarginSolver:
    """``max t`` subject to ``A z >= t`` row-wise and ``|z|_inf <= 1``, for a fixed base row set.

    Solved through the dual ``min |A^T y|_1`` over ``{y >= 0, sum y = 1}``,
    written as ``min 1.p + 1.q`` with ``-A^T y + p - q = 0``.  Columns are laid
    out ``[p, q, rows]`` so that appended rows keep earlier indices, and
    ``check(extra_rows)`` continues from the base optimum: every check starts
    from the same basis whatever order checks are issued in.  The optimal
    duals are the maximising ``z``; at ``t = 0`` the basic ``y`` is the
    alternative certificate.
    """

    def __init__(self, base_rows: np.ndarray, kernel=None):
        self.A0 = np.asarray(base_rows, dtype=np.float64)
        if self.A0.ndim != 2 or self.A0.shape[0] == 0:
            raise DegeneratePolicyError("no rows")
        self.n = self.A0.shape[1]
        self.m = self.n + 1
        self.kernel = get_kernel(kernel)
        self.rhs = np.zeros(self.m)
        self.rhs[-1] = 1.0
        self.base_basis = None
        self.base_result = None

    def _cols(self, rows: np.ndarray) -> np.ndarray:
        n, R = self.n, rows.shape[0]
        cols = np.zeros((2 * n + R, self.m))
        cols[:n, :n] = np.eye(n)
        cols[n:2 * n, :n] = -np.eye(n)
        cols[2 * n:, :n] = -rows
        cols[2 * n:, n] = 1.0
        return cols

    def _start(self) -> np.ndarray:
        # y_0 = 1 with p_k - q_k = a_0k
        a0 = self.A0[0]
        return np.array([k if a0[k] >= 0 else self.n + k for k in range(self.n)] + [2 * self.n],
                        dtype=np.int64)

    def _run(self, rows: np.ndarray, basis: np.ndarray, verify: bool = False) -> "MarginResult":
        """Optimise from ``basis``; on a numerical failure retry down a fixed ladder of settings.

        With ``verify`` a zero-margin answer also needs a valid certificate to be accepted.
        """
        cols = self._cols(rows)
        cost = np.zeros(cols.shape[0])
        cost[:2 * self.n] = 1.0
        max_iter = ITER_FACTOR * cols.shape[0]
        failures = []
        for perturb, refactor in RETRY_LADDER:
            status, b, x, lam, it = run_lp(self.kernel, cols, self.rhs, cost, basis.copy(), max_iter,
                                           VERDICT_TOL, perturb=perturb, refactor=refactor)
            if status == OPTIMAL and np.all(np.isfinite(lam)) and np.abs(lam[:self.n]).max() <= 1.0 + 1e-6:
                z = np.clip(lam[:self.n], -1.0, 1.0)
                y = np.zeros(rows.shape[0])
                for i, j in enumerate(b):
                    if j >= 2 * self.n:
                        y[j - 2 * self.n] += max(x[i], 0.0)
                res = MarginResult(float((rows @ z).min()), z, y, int(it), b.copy())
                if not verify:
                    return res
                try:
                    res.verdict = _verdict(rows, res)
                    return res
                except SolverError:
                    status = "certificate"
            failures.append(status)
        raise SolverError(f"simplex failed on every retry (status codes {failures})")

    def solve(self) -> "MarginResult":
        res = self._run(self.A0, self._start())
        self.base_basis = res.basis
        self.base_result = res
        return res

    def check(self, extra_rows: np.ndarray) -> "MarginResult":
        if self.base_basis is None:
            self.solve()
        extra = np.asarray(extra_rows, dtype=np.float64).reshape(-1, self.n)
        return self._run(np.vstack([self.A0, extra]), self.base_basis.copy())


@dataclass(eq=False)
class MarginResult:
    margin: float  # min row slack of z, |z|_inf <= 1
    z: np.ndarray
    y: np.ndarray
    iterations: int
    basis: np.ndarray = field(repr=False)
    verdict: "FeasibilityResult | None" = field(default=None, repr=False)


def _verdict(rows: np.ndarray, res: MarginResult) -> FeasibilityResult:
    """Feasible with a unit-margin direction when ``z`` clears every row, else certify with ``y``."""
    if res.margin > VERDICT_TOL:
        return FeasibilityResult(True, res.z / res.margin, res.iterations, basis=res.basis)
    y = res.y
    total = y.sum()
    if total <= 0:
        raise SolverError("no certificate in the final basis")
    y = y / total
    resid = float(np.abs(rows.T @ y).max())
    if resid > CERT_TOL * max(1.0, float(np.abs(rows).max())):
        raise SolverError(f"infeasibility certificate residual {resid:.3g} too large")
    return FeasibilityResult(False, None, res.iterations, y, resid, res.basis)


def _finish(problem: FeasibilityProblem, res: FeasibilityResult) -> FeasibilityResult:
    """Rescale a unit-margin direction to the problem's margin and split it into (W, b)."""
    if res.feasible:
        z = expand_gauge(res.witness, problem.n_classes, problem.d) * problem.margin * (1.0 + 1e-12)
        res.witness = split_witness(z, problem.n_classes, problem.d)
    return res


def lp_feasible(problem: FeasibilityProblem, kernel=None) -> FeasibilityResult:
    """Exact verdict for ``{row slack >= margin}``; a feasible verdict carries a witness."""
    if problem.n_rows == 0:
        z = np.zeros(problem.n_vars)
        return FeasibilityResult(True, split_witness(z, problem.n_classes, problem.d))
    A = problem.matrix()[:, gauge_columns(problem.n_classes, problem.d)]
    solver = MarginSolver(A, kernel)
    return _finish(problem, solver._run(A, solver._start(), verify=True).verdict)


def max_margin(fm: FeatureMatrix, kernel=None, return_witness: bool = False):
    """Largest ``eps`` with every training row slack ``>= eps`` and ``|(W, b)|_inf <= 1``."""
    A = build_problem(fm, (), 1.0).matrix()
    if A.shape[0] == 0:
        raise DegeneratePolicyError("no training rows")
    res = MarginSolver(A, kernel).solve()
    if res.margin <= VERDICT_TOL:
        raise DegeneratePolicyError("training assignments are not strictly separable by any linear layer")
    if return_witness:
        return res.margin, split_witness(res.z, fm.n_classes, fm.d)
    return res.margin


@dataclass
class PairProxyResult:
    total: int
    extensions: dict  # probe index -> sorted feasible classes
    margin: float
    n_lps: int = 0
    n_shortcut: int = 0
    pivots: int = 0
    seconds: float = 0.0

    def counts(self) -> list[int]:
        return [len(self.extensions[j]) for j in sorted(self.extensions)]


class WorkingSetChecker:
    """Decides ``base rows + extra rows`` feasibility on a small working set of base rows.

    The working set starts as the rows in the optimal base basis; the LP on
    ``working rows + extra rows`` warm-starts from that basis.  A positive
    margin whose direction clears every base row is a verified witness; a
    violated base row joins the working set (appended columns keep the basis
    valid) and the LP continues.  A zero margin is certified on a subset of
    the rows, hence on all of them.
    """

    ADD_BATCH = 50

    def __init__(self, base: MarginSolver):
        self.base = base
        res = base.solve() if base.base_basis is None else base.base_result
        n = base.n
        self.support = sorted({int(j) - 2 * n for j in res.basis if j >= 2 * n})
        pos = {r: i for i, r in enumerate(self.support)}
        self.start = np.array([j if j < 2 * n else 2 * n + pos[int(j) - 2 * n] for j in res.basis], dtype=np.int64)

    def check(self, extra_rows: np.ndarray) -> FeasibilityResult:
        A0 = self.base.A0
        extra = np.asarray(extra_rows, dtype=np.float64).reshape(-1, self.base.n)
        rows = np.vstack([A0[self.support], extra])
        basis = self.start.copy()
        in_set = np.zeros(A0.shape[0], dtype=bool)
        in_set[self.support] = True
        pivots = 0
        while True:
            res = MarginSolver(rows, self.base.kernel)._run(rows, basis, verify=True)
            pivots += res.iterations
            verdict = res.verdict
            if not verdict.feasible:
                verdict.iterations = pivots
                return verdict
            slack = A0 @ res.z
            if slack.min() > VERDICT_TOL:
                verdict.iterations = pivots
                return verdict
            cand = np.flatnonzero((slack < res.margin) & ~in_set)
            if cand.size == 0:
                raise SolverError("working set stalled")
            cand = cand[np.argsort(slack[cand], kind="stable")][:self.ADD_BATCH]
            in_set[cand] = True
            rows = np.vstack([rows, A0[cand]])
            basis = res.basis


class PointwiseExtension:
    """Shared state for the K single-point checks of every probe against one training policy."""

    def __init__(self, fm: FeatureMatrix, margin: float = 1e-3, kernel=None, known_witness=None):
        if not margin > 0:
            raise ValueError("margin must be positive")
        self.fm = fm
        self.margin = margin
        base = build_problem(fm, (), margin)
        self.base_problem = base
        self.cols = gauge_columns(fm.n_classes, fm.d)
        self.solver = MarginSolver(base.matrix()[:, self.cols], kernel) if base.n_rows else None
        self._checker = None
        # verified directions (gauge coordinates) that clear every base row
        self.pool = np.zeros((len(self.cols), 0))
        if known_witness is not None:
            W, b = known_witness
            z = join_witness(np.asarray(W) - np.asarray(W)[0], np.asarray(b) - np.asarray(b)[0])[self.cols]
            if base.n_rows == 0 or (self.solver.A0 @ z).min() > 0:
                self.pool = z[:, None]
        self.n_lps = 0
        self.n_shortcut = 0
        self.pivots = 0

    def _extra_rows(self, j: int, c: int) -> np.ndarray:
        K = self.fm.n_classes
        phi = self.fm.probe_features[j][None, :]
        f, w, l = _rows_for(phi, np.array([c]), K)
        return row_matrix(f, w, l, K)

    def base_margin(self) -> float:
        if self.solver is None:
            return float("inf")
        if self.solver.base_result is None:
            self.solver.solve()
            self.pivots += self.solver.base_result.iterations
        return self.solver.base_result.margin

    def feasible(self, j: int, c: int) -> bool:
        if not 0 <= c < self.fm.n_classes:
            raise ValueError(f"class {c} out of range")
        rows = self._extra_rows(j, c)[:, self.cols]
        if self.pool.shape[1] and np.any((rows @ self.pool).min(axis=0) > 0):
            self.n_shortcut += 1
            return True
        if self.solver is None:
            return True
        if self.base_margin() <= VERDICT_TOL:
            raise DegeneratePolicyError("training policy is inconsistent")
        if self._checker is None:
            self._checker = WorkingSetChecker(self.solver)
        res = self._checker.check(rows)
        self.n_lps += 1
        self.pivots += res.iterations
        if res.feasible and self.pool.shape[1] < POOL_SIZE:
            self.pool = np.hstack([self.pool, res.witness[:, None]])
        return res.feasible

    def classes(self, j: int) -> list[int]:
        return [c for c in range(self.fm.n_classes) if self.feasible(j, c)]


def pointwise_extension(fm: FeatureMatrix, probe_index: int, margin: float = 1e-3, kernel=None) -> list[int]:
    """Classes ``c`` for which training policy + "probe j is c" stays consistent."""
    return PointwiseExtension(fm, margin, kernel).classes(probe_index)


def pair_proxy(fm: FeatureMatrix, margin: float = 1e-3, kernel=None, known_witness=None) -> PairProxyResult:
    """Sum over probes of the number of feasibly assignable classes.

    ``known_witness`` (e.g. the trained final layer) short-circuits checks it
    already satisfies strictly; it never changes a verdict.
    """
    t0 = time.perf_counter()
    pe = PointwiseExtension(fm, margin, kernel, known_witness)
    if pe.base_margin() <= VERDICT_TOL:
        raise DegeneratePolicyError("training policy is inconsistent")
    ext = {j: pe.classes(j) for j in range(fm.probe_features.shape[0])}
    return PairProxyResult(sum(len(v) for v in ext.values()), ext, margin,
                           pe.n_lps, pe.n_shortcut, pe.pivots, time.perf_counter() - t0)


def joint_extension_classes(fm: FeatureMatrix, margin: float = 1e-3, kernel=None) -> dict:
    """For each probe, the classes it takes in some jointly consistent total assignment of all probes.

    Enumerates all ``K^m`` assignments; only meant for tiny instances.
    """
    m, K = fm.probe_features.shape[0], fm.n_classes
    out = {j: set() for j in range(m)}
    for assignment in itertools.product(range(K), repeat=m):
        prob = build_problem(fm, list(enumerate(assignment)), margin)
        if lp_feasible(prob, kernel).feasible:
            for j, c in enumerate(assignment):
                out[j].add(c)
    return {j: sorted(v) for j, v in out.items()}


def affine_invariance_check(fm: FeatureMatrix, A, margin: float = 1e-3, kernel=None) -> bool:
    """Per-probe extension sets agree under ``phi -> A phi`` for invertible ``A``.

    Witnesses map by ``(W, b) -> (W A^-1, b)``; with no box on ``(W, b)`` the
    margin carries over unchanged.
    """
    A = np.asarray(A, dtype=np.float64)
    if A.shape != (fm.d, fm.d):
        raise ValueError("A must be d x d")
    if not np.isfinite(np.linalg.cond(A)) or np.linalg.cond(A) >= 1e8:
        raise ValueError("A is singular or too ill-conditioned")
    before = pair_proxy(fm, margin, kernel).extensions
    after = pair_proxy(fm.transformed(A), margin, kernel).extensions
    return before == after
