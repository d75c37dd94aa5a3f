"""Pure NumPy revised simplex; reference twin of the compiled ``_simplex`` kernel.

Solves ``min c.x  s.t.  M x = r, x >= 0`` from a caller-supplied feasible
basis.  Columns of ``M`` are stored as rows of ``cols`` (shape ``(N, m)``).

Entering column: most negative reduced cost, lowest index on ties.  Leaving
row: Harris two-pass ratio test, the largest pivot among rows whose ratio
stays within a ``FEAS_TOL`` relaxation of the minimum, then lowest basic
index.  Degeneracy is handled by the caller (``simplex.run_lp`` perturbs the
right-hand side).  Optimal and unbounded answers are only returned from a
freshly refactored basis.

The first ``n_art`` columns are artificial; with ``phase2`` set they may not
enter, and a basic artificial sitting at zero is pivoted out as soon as the
entering direction touches its row.
"""
import numpy as np

OPTIMAL, ITERATION_LIMIT, UNBOUNDED, SINGULAR = 0, 1, 2, 3
REFACTOR_EVERY = 32
FEAS_TOL = 1e-9


def _leaving_row(x, d, Binv, basis, tol):
    """Harris two-pass ratio test: bound with a feasibility slack, then take the largest pivot."""
    pos = np.flatnonzero(d > tol)
    if pos.size == 0:
        return -1, 0.0
    bound = ((x[pos] + FEAS_TOL) / d[pos]).min()
    cand = pos[x[pos] / d[pos] <= bound]
    best = d[cand].max()
    cand = cand[d[cand] >= best]
    r = int(cand[np.argmin(basis[cand])])
    return r, max(x[r], 0.0) / d[r]


def simplex(cols, rhs, cost, basis, max_iter, tol=1e-9, n_art=0, phase2=False, refactor=REFACTOR_EVERY):
    """Returns ``(status, basis, x_basic, duals, iterations)``; ``basis`` is updated in place."""
    cols = np.asarray(cols, dtype=np.float64)
    rhs = np.asarray(rhs, dtype=np.float64)
    cost = np.asarray(cost, dtype=np.float64)
    N, m = cols.shape
    barred = np.zeros(N, dtype=bool)
    barred[basis] = True
    if phase2:
        barred[:n_art] = True

    try:
        Binv = np.linalg.inv(cols[basis].T)
    except np.linalg.LinAlgError:
        return SINGULAR, basis, np.zeros(m), np.zeros(m), 0
    x = Binv @ rhs
    it = 0
    fresh = True
    status = OPTIMAL
    while True:
        lam = cost[basis] @ Binv
        red = cost - cols @ lam
        red[barred] = 0.0
        j = int(np.argmin(red))
        if red[j] >= -tol:
            if fresh:
                status = OPTIMAL
                break
            # confirm optimality on a freshly factored basis
            try:
                Binv = np.linalg.inv(cols[basis].T)
            except np.linalg.LinAlgError:
                return SINGULAR, basis, x, lam, it
            x = Binv @ rhs
            fresh = True
            continue
        if it >= max_iter:
            status = ITERATION_LIMIT
            break
        d = Binv @ cols[j]

        r = -1
        theta = 0.0
        if phase2 and n_art:
            art_rows = np.flatnonzero((basis < n_art) & (np.abs(d) > tol))
            if art_rows.size:
                r = int(art_rows[np.argmin(basis[art_rows])])
        if r < 0:
            r, theta = _leaving_row(x, d, Binv, basis, tol)
            if r < 0:
                if fresh:
                    status = UNBOUNDED
                    break
                try:
                    Binv = np.linalg.inv(cols[basis].T)
                except np.linalg.LinAlgError:
                    return SINGULAR, basis, x, lam, it
                x = Binv @ rhs
                fresh = True
                continue
        fresh = False

        x -= theta * d
        x[r] = theta
        piv = Binv[r] / d[r]
        Binv -= np.outer(d, piv)
        Binv[r] = piv

        leaving = basis[r]
        barred[leaving] = phase2 and leaving < n_art
        basis[r] = j
        barred[j] = True
        it += 1
        if it % refactor == 0:
            try:
                Binv = np.linalg.inv(cols[basis].T)
            except np.linalg.LinAlgError:
                return SINGULAR, basis, x, cost[basis] @ Binv, it
            x = Binv @ rhs
            fresh = True
    lam = cost[basis] @ Binv
    return status, basis, x, lam, it
