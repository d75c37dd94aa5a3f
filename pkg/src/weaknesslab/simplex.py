"""Kernel selection: the compiled simplex when it was built, the NumPy twin otherwise.

Set ``WEAKNESSLAB_PURE_PYTHON=1`` to force the NumPy kernel.
"""
import os

import numpy as np

from . import _simplex_py
from ._simplex_py import ITERATION_LIMIT, OPTIMAL, SINGULAR, UNBOUNDED  # noqa: F401

try:
    from . import _simplex as _compiled
except ImportError:  # extension not built
    _compiled = None

KERNELS = {"python": _simplex_py.simplex}
if _compiled is not None:
    KERNELS["cython"] = _compiled.simplex

if os.environ.get("WEAKNESSLAB_PURE_PYTHON") or _compiled is None:
    BACKEND = "python"
else:
    BACKEND = "cython"


def get_kernel(name=None):
    """Kernel by name (default ``BACKEND``); a kernel function passes straight through."""
    if callable(name):
        return name
    name = name or BACKEND
    try:
        return KERNELS[name]
    except KeyError:
        raise ValueError(f"simplex kernel {name!r} unavailable; have {sorted(KERNELS)}") from None



PERTURB = 1e-7
RESTART_FACTOR = 20
RESTART_MIN = 500
_GOLDEN = 0.6180339887498949


def run_lp(kernel, cols, rhs, cost, basis, max_iter, tol=1e-9, n_art=0, phase2=False,
           perturb=PERTURB, refactor=32):
    """Run ``kernel`` on a perturbed right-hand side, then re-solve the final basis on the true one.

    The current basic values are shifted by small distinct positive amounts
    (a fixed sequence, so runs are reproducible), renewed every
    ``RESTART_FACTOR * m`` pivots.  This keeps the heavily degenerate programs
    here from stalling.  Duals do not depend on the right-hand side; callers
    verify whatever they use from the result.
    """
    cols = np.ascontiguousarray(cols, dtype=np.float64)
    rhs = np.ascontiguousarray(rhs, dtype=np.float64)
    cost = np.ascontiguousarray(cost, dtype=np.float64)
    basis = np.ascontiguousarray(basis, dtype=np.int64)
    m = rhs.shape[0]
    if not perturb:
        return kernel(cols, rhs, cost, basis, max_iter, tol, n_art, phase2, refactor)
    delta = perturb * max(1.0, float(np.abs(rhs).max())) * (1.0 + (np.arange(m) * _GOLDEN) % 1.0)
    chunk = max(RESTART_MIN, RESTART_FACTOR * m)
    it = 0
    while True:
        shifted = rhs + cols[basis].T @ delta
        status, basis, x, lam, k = kernel(cols, shifted, cost, basis, min(chunk, max_iter - it), tol, n_art, phase2,
                                          refactor)
        it += k
        if status != ITERATION_LIMIT or it >= max_iter:
            break
    if status == OPTIMAL:
        try:
            x = np.linalg.solve(cols[basis].T, rhs)
            if x.min() < -CLEANUP_TOL:
                status, x, lam, k = dual_cleanup(cols, rhs, cost, basis, n_art if phase2 else 0)
                it += k
        except np.linalg.LinAlgError:
            status = SINGULAR
    return status, basis, x, lam, it


CLEANUP_TOL = 1e-9
CLEANUP_PIVOT_TOL = 1e-9


def dual_cleanup(cols, rhs, cost, basis, n_barred=0, max_iter=None):
    """Dual simplex from a dual-feasible ``basis`` until it is primal feasible on ``rhs``.

    An optimum of the perturbed program can be off by the perturbation once
    the true right-hand side is restored; a few dual pivots repair it.
    Columns below ``n_barred`` never enter.  ``basis`` is updated in place.
    Returns ``(status, x, duals, pivots)``.
    """
    N, m = cols.shape
    max_iter = max_iter or 10 * m
    for k in range(max_iter + 1):
        B = cols[basis].T
        x = np.linalg.solve(B, rhs)
        lam = np.linalg.solve(B.T, cost[basis])
        if x.min() >= -CLEANUP_TOL:
            return OPTIMAL, x, lam, k
        if k == max_iter:
            break
        r = int(np.argmin(x))
        # row r of B^-1 N
        alpha = cols @ np.linalg.solve(B.T, np.eye(m)[r])
        rc = np.maximum(cost - cols @ lam, 0.0)
        ok = alpha < -CLEANUP_PIVOT_TOL
        ok[basis] = False
        ok[:n_barred] = False
        cand = np.flatnonzero(ok)
        if cand.size == 0:
            return UNBOUNDED, x, lam, k  # the primal is infeasible
        ratio = rc[cand] / -alpha[cand]
        best = ratio.min()
        tied = cand[ratio <= best + 1e-12]
        basis[r] = int(tied[np.argmin(alpha[tied])])
    return ITERATION_LIMIT, x, lam, max_iter
