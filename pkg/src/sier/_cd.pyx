# cython: boundscheck=False, wraparound=False, cdivision=True, initializedcheck=False
"""Alternating-maximization kernel for the penalized component subproblem.

Maximizes  f(a) = |M'a|^2 / (a'Sa + rho*sum_l (d_l.a)^2
                              + tau_ridge*|a|_2^2 + tau_l1*|a|_1^2)

by alternating a best-response direction v = M'a/|M'a| with one cyclic
coordinate-descent sweep on the linear surrogate  -(Mv).a + g(a)/2,
where S = Z'Z is applied through the maintained residual r = Z a.  The
warm start is optimally rescaled before every sweep, which keeps f
monotone even though the inner problem is never solved to completion.
Each coordinate update is a closed-form soft-threshold: the squared-l1
term contributes a ridge plus a lasso weight tau_l1*(|a|_1 - |a_j|).
"""

from libc.math cimport fabs, sqrt

from scipy.linalg.cython_blas cimport daxpy, ddot, dscal

import numpy as np


def alternate_solve(double[::1] alpha,
                    double[:, ::1] zt,
                    double[::1] r,
                    double[:, ::1] mt,
                    double[:, ::1] dmat,
                    double[::1] e,
                    double[::1] diag_s,
                    double rho,
                    double tau_ridge,
                    double tau_l1,
                    int max_iters,
                    double tol):
    """Run until the relative change of f drops below ``tol``.

    ``alpha``, ``r`` (= Z alpha) and ``e`` (= dmat alpha) are updated in
    place.  Returns (iterations, converged, f_final).
    """
    cdef int p = alpha.shape[0]
    cdef int n = zt.shape[1]
    cdef int q = mt.shape[0]
    cdef int m = dmat.shape[0]
    cdef int one = 1
    cdef int it, j, l, iters
    cdef double aj, cj, sj, pen, denom, thr, new, delta, scale
    cdef double l1, nv2, inv, ba, g_val, num, den, f_old, f_new
    cdef bint converged = 0

    cdef double[::1] v = np.empty(q)
    cdef double[::1] b = np.empty(p)
    cdef double[::1] dsq = np.zeros(p)

    with nogil:
        if m > 0 and rho > 0.0:
            for j in range(p):
                pen = 0.0
                for l in range(m):
                    pen += dmat[l, j] * dmat[l, j]
                dsq[j] = pen

        for l in range(q):
            v[l] = ddot(&p, &mt[l, 0], &one, &alpha[0], &one)

        f_old = -1.0
        iters = 0
        for it in range(max_iters):
            iters = it + 1
            nv2 = ddot(&q, &v[0], &one, &v[0], &one)
            if nv2 <= 0.0:
                break
            inv = 1.0 / sqrt(nv2)
            for j in range(p):
                b[j] = 0.0
            for l in range(q):
                scale = v[l] * inv
                daxpy(&p, &scale, &mt[l, 0], &one, &b[0], &one)

            l1 = 0.0
            for j in range(p):
                l1 += fabs(alpha[j])
            ba = ddot(&p, &b[0], &one, &alpha[0], &one)
            g_val = ddot(&n, &r[0], &one, &r[0], &one) \
                + tau_ridge * ddot(&p, &alpha[0], &one, &alpha[0], &one) \
                + tau_l1 * l1 * l1
            if m > 0:
                g_val += rho * ddot(&m, &e[0], &one, &e[0], &one)
            if g_val > 0.0 and ba != 0.0:
                scale = ba / g_val
                dscal(&p, &scale, &alpha[0], &one)
                dscal(&n, &scale, &r[0], &one)
                if m > 0:
                    dscal(&m, &scale, &e[0], &one)
                l1 *= fabs(scale)

            for j in range(p):
                aj = alpha[j]
                sj = ddot(&n, &zt[j, 0], &one, &r[0], &one)
                cj = b[j] - (sj - diag_s[j] * aj)
                if m > 0 and rho > 0.0:
                    pen = 0.0
                    for l in range(m):
                        pen += dmat[l, j] * e[l]
                    cj -= rho * (pen - dsq[j] * aj)
                denom = diag_s[j] + rho * dsq[j] + tau_ridge + tau_l1
                thr = tau_l1 * (l1 - fabs(aj))
                if cj > thr:
                    new = (cj - thr) / denom
                elif cj < -thr:
                    new = (cj + thr) / denom
                else:
                    new = 0.0
                if new != aj:
                    delta = new - aj
                    daxpy(&n, &delta, &zt[j, 0], &one, &r[0], &one)
                    for l in range(m):
                        e[l] += delta * dmat[l, j]
                    l1 += fabs(new) - fabs(aj)
                    alpha[j] = new

            for l in range(q):
                v[l] = ddot(&p, &mt[l, 0], &one, &alpha[0], &one)
            num = ddot(&q, &v[0], &one, &v[0], &one)
            l1 = 0.0
            for j in range(p):
                l1 += fabs(alpha[j])
            den = ddot(&n, &r[0], &one, &r[0], &one) \
                + tau_ridge * ddot(&p, &alpha[0], &one, &alpha[0], &one) \
                + tau_l1 * l1 * l1
            if m > 0:
                den += rho * ddot(&m, &e[0], &one, &e[0], &one)
            if den <= 0.0 or num <= 0.0:
                break
            f_new = num / den
            if f_old >= 0.0 and fabs(f_new - f_old) <= tol * f_old:
                converged = 1
                f_old = f_new
                break
            f_old = f_new

    return iters, bool(converged), (f_old if f_old >= 0.0 else 0.0)
