"""Numpy implementation of the fixed-point rate kernel.

Mirrors ``_fastloop.pyx`` operation for operation; selected at import time
when the compiled extension is unavailable (see :mod:`decoyrate.backend`).
The sample axis is vectorized with an active-index set that shrinks as
samples finish (degenerate bounds, ill-defined inflation, zero rate, or
convergence).
"""

import math

import numpy as np

STATUS_OK = 0
STATUS_DEGENERATE = 1
STATUS_ILL_GAMMA = 2
STATUS_MAX_ITER = 3

_TWO_PI = 2.0 * math.pi


def _h2(x):
    out = np.zeros_like(x)
    m = (x > 0.0) & (x < 1.0)
    xm = x[m]
    out[m] = -(xm * np.log2(xm) + (1.0 - xm) * np.log2(1.0 - xm))
    return out


def iterate_rates(
    a_x0, b_x0, a_x1, b_x1, a_z1, b_z1, a_e1, b_e1,
    qbar_x, qbar_z, ec,
    exp_mean, mu_exp_mean, p_x, s_x, s_z,
    eps_cor, kappa, chi_val, asymptotic, max_iter, rtol,
    out_rate, out_status,
):
    n = len(a_x0)
    pxx = p_x * p_x

    if asymptotic:
        yx0 = np.clip(a_x0, 0.0, 1.0)
        yx1 = np.clip(a_x1, 0.0, 1.0)
        yz1 = np.clip(a_z1, 0.0, 1.0)
        y1e1 = np.clip(a_e1, 0.0, 0.5)
        deg = yz1 <= 0.0
        with np.errstate(divide="ignore", invalid="ignore"):
            e1 = np.where(deg, 0.0, np.minimum(0.5, y1e1 / np.where(deg, 1.0, yz1)))
        r = exp_mean * yx0 + mu_exp_mean * yx1 * (1.0 - _h2(e1)) - ec
        out_rate[:] = np.where(deg, 0.0, np.maximum(0.0, pxx * r))
        out_status[:] = np.where(deg, STATUS_DEGENERATE, STATUS_OK).astype(np.int8)
        return

    log2_cor = math.log2(2.0 / eps_cor)
    ell = np.full(n, s_x)
    r_prev = np.full(n, np.nan)
    out_rate[:] = 0.0
    out_status[:] = STATUS_OK
    active = np.arange(n)

    for _ in range(max_iter):
        if active.size == 0:
            return
        eps = kappa * ell[active]
        bad = eps >= chi_val  # budget larger than one failure item: no valid radii
        with np.errstate(divide="ignore", invalid="ignore"):
            sq = np.sqrt(np.log(chi_val / eps))
            yx0 = np.clip(a_x0[active] - sq * b_x0[active], 0.0, 1.0)
            yx1 = np.clip(a_x1[active] - sq * b_x1[active], 0.0, 1.0)
            yz1 = np.clip(a_z1[active] - sq * b_z1[active], 0.0, 1.0)
            y1e1 = np.clip(a_e1[active] + sq * b_e1[active], 0.0, 0.5)

            deg = bad | (yz1 <= 0.0)
            e1 = np.where(deg, 0.0, np.minimum(0.5, y1e1 / np.where(deg, 1.0, yz1)))

            g = np.zeros_like(e1)
            need_g = ~deg & (e1 > 0.0)
            deg |= need_g & (yx1 <= 0.0)
            need_g &= yx1 > 0.0
            ill = np.zeros_like(deg)
            if np.any(need_g):
                c = s_z * yz1 * mu_exp_mean / qbar_z[active]
                d = s_x * yx1 * mu_exp_mean / qbar_x[active]
                fail = eps / chi_val
                arg = (c + d) / (_TWO_PI * c * d * (1.0 - e1) * e1 * fail * fail)
                ill = need_g & (arg <= 1.0)
                ok_g = need_g & ~ill
                g[ok_g] = np.sqrt(
                    ((c + d) * (1.0 - e1) * e1 / (c * d))[ok_g] * np.log(arg[ok_g])
                )
            ep = np.minimum(0.5, e1 + g)
            leak = 6.0 * np.log2(chi_val / eps) + log2_cor
            r = (
                exp_mean * yx0
                + mu_exp_mean * yx1 * (1.0 - _h2(ep))
                - ec[active]
                - qbar_x[active] / s_x * leak
            )
            r = np.maximum(0.0, pxx * r)

        alive = ~deg & ~ill
        out_rate[active[deg | ill]] = 0.0
        out_status[active[deg]] = STATUS_DEGENERATE
        out_status[active[ill]] = STATUS_ILL_GAMMA

        zero = alive & (r == 0.0)
        out_rate[active[zero]] = 0.0
        out_status[active[zero]] = STATUS_OK

        cont = alive & ~zero
        conv = cont & ~np.isnan(r_prev[active]) & (
            np.abs(r - r_prev[active]) <= rtol * r_prev[active]
        )
        out_rate[active[conv]] = r[conv]
        out_status[active[conv]] = STATUS_OK

        keep = cont & ~conv
        out_rate[active[keep]] = r[keep]  # provisional; final write on exit below
        ell[active[keep]] = r[keep] * s_x / (pxx * qbar_x[active[keep]])
        r_prev[active[keep]] = r[keep]
        active = active[keep]

    out_status[active] = STATUS_MAX_ITER
