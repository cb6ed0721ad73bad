"""Pure-Python twin of the compiled alternation kernel.

Same iteration structure and update rule as ``_cd.alternate_solve``,
written against numpy only.  Used automatically when the compiled
extension is unavailable, and by the kernel-agreement tests and the
benchmark.
"""

import numpy as np


def alternate_solve(alpha, zt, r, mt, dmat, e, diag_s, rho, tau_ridge, tau_l1,
                    max_iters, tol):
    p = alpha.shape[0]
    m = dmat.shape[0]
    use_pen = m > 0 and rho > 0.0
    dsq = np.einsum("ij,ij->j", dmat, dmat) if use_pen else np.zeros(p)

    v = mt @ alpha
    f_old = -1.0
    converged = False
    iters = 0
    for it in range(max_iters):
        iters = it + 1
        nv2 = float(v @ v)
        if nv2 <= 0.0:
            break
        b = (v / np.sqrt(nv2)) @ mt

        l1 = float(np.abs(alpha).sum())
        ba = float(b @ alpha)
        g_val = float(r @ r) + tau_ridge * float(alpha @ alpha) + tau_l1 * l1 * l1
        if m:
            g_val += rho * float(e @ e)
        if g_val > 0.0 and ba != 0.0:
            scale = ba / g_val
            alpha *= scale
            r *= scale
            if m:
                e *= scale
            l1 *= abs(scale)

        for j in range(p):
            aj = alpha[j]
            sj = float(zt[j] @ r)
            cj = b[j] - (sj - diag_s[j] * aj)
            if use_pen:
                pen = float(dmat[:, j] @ e)
                cj -= rho * (pen - dsq[j] * aj)
            denom = diag_s[j] + rho * dsq[j] + tau_ridge + tau_l1
            thr = tau_l1 * (l1 - abs(aj))
            if cj > thr:
                new = (cj - thr) / denom
            elif cj < -thr:
                new = (cj + thr) / denom
            else:
                new = 0.0
            if new != aj:
                delta = new - aj
                r += delta * zt[j]
                if m:
                    e += delta * dmat[:, j]
                l1 += abs(new) - abs(aj)
                alpha[j] = new

        v = mt @ alpha
        num = float(v @ v)
        l1 = float(np.abs(alpha).sum())
        den = float(r @ r) + tau_ridge * float(alpha @ alpha) + tau_l1 * l1 * l1
        if m:
            den += rho * float(e @ e)
        if den <= 0.0 or num <= 0.0:
            break
        f_new = num / den
        if f_old >= 0.0 and abs(f_new - f_old) <= tol * f_old:
            converged = True
            f_old = f_new
            break
        f_old = f_new

    return iters, converged, (f_old if f_old >= 0.0 else 0.0)
