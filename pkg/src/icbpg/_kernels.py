"""Compiled coordinate-descent kernels for small dense subproblems.

These back the high-accuracy reference minimizations used by the
certificate machinery: an l1-regularized quadratic solved in the primal,
and a box-constrained quadratic solved for subgradient witnesses. Both
run exact coordinate minimization sweeps until the maximum KKT residual
falls below a tolerance. The residual is evaluated in a separate pass
after each sweep: residuals measured mid-sweep go stale as soon as a
later coordinate moves, and right after a coordinate's own exact update
its residual is zero by construction.
"""

import numpy as np
from numba import njit

# refresh the cached gradient from scratch this often to cap drift
_REFRESH_EVERY = 64


@njit(cache=True)
def l1_quad_cd(Q, c, lam, y, tol, max_sweeps):
    """Minimize 0.5 y'Qy + c'y + sum_j lam_j |y_j| by coordinate descent.

    Q must be dense SPD. y is updated in place and returned together with
    the final KKT residual and the number of sweeps performed.
    """
    n = y.shape[0]
    q = np.dot(Q, y)
    kkt = 0.0
    sweeps = 0
    for sweep in range(max_sweeps):
        sweeps = sweep + 1
        for j in range(n):
            qjj = Q[j, j]
            gj = q[j] + c[j]
            z = y[j] - gj / qjj
            t = lam[j] / qjj
            if z > t:
                ynew = z - t
            elif z < -t:
                ynew = z + t
            else:
                ynew = 0.0
            d = ynew - y[j]
            if d != 0.0:
                y[j] = ynew
                for i in range(n):
                    q[i] += Q[i, j] * d
        if sweeps % _REFRESH_EVERY == 0:
            q = np.dot(Q, y)
        kkt = 0.0
        for j in range(n):
            gj = q[j] + c[j]
            if y[j] > 0.0:
                viol = abs(gj + lam[j])
            elif y[j] < 0.0:
                viol = abs(gj - lam[j])
            else:
                viol = abs(gj) - lam[j]
                if viol < 0.0:
                    viol = 0.0
            if viol > kkt:
                kkt = viol
        if kkt <= tol:
            break
    return y, kkt, sweeps


@njit(cache=True)
def box_qp_cd(Q, c, lo, hi, r, tol, max_sweeps):
    """Minimize 0.5 r'Qr + c'r subject to lo <= r <= hi by coordinate descent."""
    n = r.shape[0]
    q = np.dot(Q, r)
    kkt = 0.0
    sweeps = 0
    for sweep in range(max_sweeps):
        sweeps = sweep + 1
        for j in range(n):
            qjj = Q[j, j]
            gj = q[j] + c[j]
            rnew = r[j] - gj / qjj
            if rnew < lo[j]:
                rnew = lo[j]
            elif rnew > hi[j]:
                rnew = hi[j]
            d = rnew - r[j]
            if d != 0.0:
                r[j] = rnew
                for i in range(n):
                    q[i] += Q[i, j] * d
        if sweeps % _REFRESH_EVERY == 0:
            q = np.dot(Q, r)
        kkt = 0.0
        for j in range(n):
            gj = q[j] + c[j]
            if r[j] <= lo[j]:
                viol = -gj if gj < 0.0 else 0.0
            elif r[j] >= hi[j]:
                viol = gj if gj > 0.0 else 0.0
            else:
                viol = abs(gj)
            if viol > kkt:
                kkt = viol
        if kkt <= tol:
            break
    return r, kkt, sweeps
