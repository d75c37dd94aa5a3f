# cython: language_level=3, boundscheck=False, wraparound=False, cdivision=True, initializedcheck=False
"""Compiled revised simplex, same contract and pivoting rules as ``_simplex_py.simplex``."""
import numpy as np
cimport numpy as cnp
from libc.math cimport fabs

cnp.import_array()

cdef enum:
    REFACTOR_EVERY = 32
    OPTIMAL = 0
    ITERATION_LIMIT = 1
    UNBOUNDED = 2
    SINGULAR = 3

cdef double FEAS_TOL = 1e-9


cdef int invert(double[:, ::1] cols, cnp.int64_t[::1] basis, double[:, ::1] Binv,
                double[:, ::1] work) noexcept nogil:
    """Gauss-Jordan with partial pivoting: Binv = inverse of [cols[basis[0]] ... ]^T."""
    cdef Py_ssize_t m = Binv.shape[0]
    cdef Py_ssize_t i, j, k, p
    cdef double best, v, f
    for i in range(m):
        for j in range(m):
            work[i, j] = cols[basis[j], i]
            Binv[i, j] = 1.0 if i == j else 0.0
    for k in range(m):
        p = k
        best = fabs(work[k, k])
        for i in range(k + 1, m):
            v = fabs(work[i, k])
            if v > best:
                best = v
                p = i
        if best < 1e-14:
            return 1
        if p != k:
            for j in range(m):
                v = work[k, j]; work[k, j] = work[p, j]; work[p, j] = v
                v = Binv[k, j]; Binv[k, j] = Binv[p, j]; Binv[p, j] = v
        f = 1.0 / work[k, k]
        for j in range(k + 1, m):
            work[k, j] *= f
        for j in range(m):
            Binv[k, j] *= f
        for i in range(m):
            if i != k:
                f = work[i, k]
                if f != 0.0:
                    # columns <= k of work are never read again
                    for j in range(k + 1, m):
                        work[i, j] -= f * work[k, j]
                    for j in range(m):
                        Binv[i, j] -= f * Binv[k, j]
    return 0


cdef void mat_vec(double[:, ::1] A, double[::1] v, double[::1] out) noexcept nogil:
    cdef Py_ssize_t i, j, m = A.shape[0]
    cdef double s
    for i in range(m):
        s = 0.0
        for j in range(m):
            s += A[i, j] * v[j]
        out[i] = s


cdef void duals(double[:, ::1] Binv, double[::1] cost, cnp.int64_t[::1] basis,
                double[::1] lam) noexcept nogil:
    cdef Py_ssize_t i, j, m = Binv.shape[0]
    cdef double cb
    for j in range(m):
        lam[j] = 0.0
    for i in range(m):
        cb = cost[basis[i]]
        if cb != 0.0:
            for j in range(m):
                lam[j] += cb * Binv[i, j]


cdef Py_ssize_t leaving_row(double[::1] x, double[::1] d, cnp.int64_t[::1] basis, double tol,
                            double* theta_out) noexcept nogil:
    """Harris two-pass ratio test: bound with a feasibility slack, then take the largest pivot."""
    cdef Py_ssize_t m = x.shape[0]
    cdef Py_ssize_t i, r = -1
    cdef double bound = 0.0, v, best = 0.0
    cdef bint found = False
    for i in range(m):
        if d[i] > tol:
            v = (x[i] + FEAS_TOL) / d[i]
            if not found or v < bound:
                bound = v
                found = True
    if not found:
        return -1
    for i in range(m):
        if d[i] > tol and x[i] / d[i] <= bound:
            if r < 0 or d[i] > best or (d[i] == best and basis[i] < basis[r]):
                best = d[i]
                r = i
    theta_out[0] = (x[r] if x[r] > 0.0 else 0.0) / d[r]
    return r


def simplex(cols_in, rhs_in, cost_in, cnp.int64_t[::1] basis, long max_iter,
            double tol=1e-9, long n_art=0, bint phase2=False, long refactor=REFACTOR_EVERY):
    """Returns ``(status, basis, x_basic, duals, iterations)``; ``basis`` is updated in place."""
    cdef double[:, ::1] cols = np.ascontiguousarray(cols_in, dtype=np.float64)
    cdef double[::1] rhs = np.ascontiguousarray(rhs_in, dtype=np.float64)
    cdef double[::1] cost = np.ascontiguousarray(cost_in, dtype=np.float64)
    cdef Py_ssize_t N = cols.shape[0], m = cols.shape[1]
    cdef Py_ssize_t i, j, k, r, jent, leaving
    cdef long it = 0
    cdef int status = OPTIMAL
    cdef bint fresh = True
    cdef double rc, best_rc, theta, piv, f
    cdef cnp.int64_t best_idx

    Binv_a = np.empty((m, m), dtype=np.float64)
    work_a = np.empty((m, m), dtype=np.float64)
    x_a = np.empty(m, dtype=np.float64)
    lam_a = np.zeros(m, dtype=np.float64)
    d_a = np.empty(m, dtype=np.float64)
    barred_a = np.zeros(N, dtype=np.uint8)
    cdef double[:, ::1] Binv = Binv_a
    cdef double[:, ::1] work = work_a
    cdef double[::1] x = x_a
    cdef double[::1] lam = lam_a
    cdef double[::1] d = d_a
    cdef unsigned char[::1] barred = barred_a

    for i in range(m):
        barred[basis[i]] = 1
    if phase2:
        for j in range(min(n_art, N)):
            barred[j] = 1

    with nogil:
        if invert(cols, basis, Binv, work):
            status = SINGULAR
        else:
            mat_vec(Binv, rhs, x)
            while True:
                duals(Binv, cost, basis, lam)
                jent = -1
                best_rc = -tol
                for j in range(N):
                    if barred[j]:
                        continue
                    rc = cost[j]
                    for k in range(m):
                        rc -= cols[j, k] * lam[k]
                    if rc < best_rc:
                        jent = j
                        best_rc = rc
                if jent < 0:
                    if fresh:
                        status = OPTIMAL
                        break
                    # confirm optimality on a freshly factored basis
                    if invert(cols, basis, Binv, work):
                        status = SINGULAR
                        break
                    mat_vec(Binv, rhs, x)
                    fresh = True
                    continue
                if it >= max_iter:
                    status = ITERATION_LIMIT
                    break
                for i in range(m):
                    f = 0.0
                    for k in range(m):
                        f += Binv[i, k] * cols[jent, k]
                    d[i] = f

                r = -1
                theta = 0.0
                if phase2 and n_art > 0:
                    best_idx = -1
                    for i in range(m):
                        if basis[i] < n_art and fabs(d[i]) > tol:
                            if best_idx < 0 or basis[i] < best_idx:
                                best_idx = basis[i]
                                r = i
                if r < 0:
                    r = leaving_row(x, d, basis, tol, &theta)
                    if r < 0:
                        if fresh:
                            status = UNBOUNDED
                            break
                        if invert(cols, basis, Binv, work):
                            status = SINGULAR
                            break
                        mat_vec(Binv, rhs, x)
                        fresh = True
                        continue
                fresh = False

                for i in range(m):
                    x[i] -= theta * d[i]
                x[r] = theta
                piv = d[r]
                for k in range(m):
                    Binv[r, k] /= piv
                for i in range(m):
                    if i != r:
                        f = d[i]
                        if f != 0.0:
                            for k in range(m):
                                Binv[i, k] -= f * Binv[r, k]

                leaving = basis[r]
                barred[leaving] = 1 if (phase2 and leaving < n_art) else 0
                basis[r] = jent
                barred[jent] = 1
                it += 1
                if it % refactor == 0:
                    if invert(cols, basis, Binv, work):
                        status = SINGULAR
                        break
                    mat_vec(Binv, rhs, x)
                    fresh = True
            duals(Binv, cost, basis, lam)
    return status, np.asarray(basis), x_a, lam_a, it
