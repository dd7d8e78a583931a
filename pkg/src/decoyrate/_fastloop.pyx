# cython: boundscheck=False, wraparound=False, cdivision=True
"""Compiled fixed-point rate kernel.

Per-sample serial loop over the same affine bound pieces consumed by the
numpy fallback (``_slowloop.py``); the two must stay operation-for-operation
equivalent.  Releases the GIL so chunked threading scales.
"""

from libc.math cimport fabs, log, log2, sqrt


STATUS_OK = 0
STATUS_DEGENERATE = 1
STATUS_ILL_GAMMA = 2
STATUS_MAX_ITER = 3

cdef double TWO_PI = 6.283185307179586476925286766559
cdef signed char C_OK = 0
cdef signed char C_DEG = 1
cdef signed char C_ILL = 2
cdef signed char C_MAXIT = 3


cdef inline double _h2(double x) noexcept nogil:
    if x <= 0.0 or x >= 1.0:
        return 0.0
    return -(x * log2(x) + (1.0 - x) * log2(1.0 - x))


cdef inline double _clip(double v, double lo, double hi) noexcept nogil:
    if v < lo:
        return lo
    if v > hi:
        return hi
    return v


cdef inline void _one(
    double ax0, double bx0, double ax1, double bx1,
    double az1, double bz1, double ae1, double be1,
    double qbx, double qbz, double ec,
    double exp_mean, double mu_exp_mean, double pxx,
    double s_x, double s_z, double log2_cor,
    double kappa, double chi_val,
    bint asymptotic, int max_iter, double rtol,
    double* rate_out, signed char* status_out,
) noexcept nogil:
    cdef double ell, eps, sq, yx0, yx1, yz1, y1e1, e1, g, ep, r, r_prev
    cdef double c, d, fail, arg, leak
    cdef bint have_prev = 0
    cdef int it

    if asymptotic:
        yx0 = _clip(ax0, 0.0, 1.0)
        yx1 = _clip(ax1, 0.0, 1.0)
        yz1 = _clip(az1, 0.0, 1.0)
        y1e1 = _clip(ae1, 0.0, 0.5)
        if yz1 <= 0.0:
            rate_out[0] = 0.0
            status_out[0] = C_DEG
            return
        e1 = y1e1 / yz1
        if e1 > 0.5:
            e1 = 0.5
        r = exp_mean * yx0 + mu_exp_mean * yx1 * (1.0 - _h2(e1)) - ec
        r = pxx * r
        rate_out[0] = r if r > 0.0 else 0.0
        status_out[0] = C_OK
        return

    ell = s_x
    r_prev = 0.0
    r = 0.0
    for it in range(max_iter):
        eps = kappa * ell
        if eps >= chi_val:
            rate_out[0] = 0.0
            status_out[0] = C_DEG
            return
        sq = sqrt(log(chi_val / eps))
        yx0 = _clip(ax0 - sq * bx0, 0.0, 1.0)
        yx1 = _clip(ax1 - sq * bx1, 0.0, 1.0)
        yz1 = _clip(az1 - sq * bz1, 0.0, 1.0)
        y1e1 = _clip(ae1 + sq * be1, 0.0, 0.5)
        if yz1 <= 0.0:
            rate_out[0] = 0.0
            status_out[0] = C_DEG
            return
        e1 = y1e1 / yz1
        if e1 > 0.5:
            e1 = 0.5
        g = 0.0
        if e1 > 0.0:
            if yx1 <= 0.0:
                rate_out[0] = 0.0
                status_out[0] = C_DEG
                return
            c = s_z * yz1 * mu_exp_mean / qbz
            d = s_x * yx1 * mu_exp_mean / qbx
            fail = eps / chi_val
            arg = (c + d) / (TWO_PI * c * d * (1.0 - e1) * e1 * fail * fail)
            if arg <= 1.0:
                rate_out[0] = 0.0
                status_out[0] = C_ILL
                return
            g = sqrt((c + d) * (1.0 - e1) * e1 / (c * d) * log(arg))
        ep = e1 + g
        if ep > 0.5:
            ep = 0.5
        leak = 6.0 * log2(chi_val / eps) + log2_cor
        r = exp_mean * yx0 + mu_exp_mean * yx1 * (1.0 - _h2(ep)) - ec - qbx / s_x * leak
        r = pxx * r
        if r <= 0.0:
            rate_out[0] = 0.0
            status_out[0] = C_OK
            return
        ell = r * s_x / (pxx * qbx)
        if have_prev and fabs(r - r_prev) <= rtol * r_prev:
            rate_out[0] = r
            status_out[0] = C_OK
            return
        r_prev = r
        have_prev = 1
    rate_out[0] = r
    status_out[0] = C_MAXIT


def iterate_rates(
    double[::1] a_x0, double[::1] b_x0, double[::1] a_x1, double[::1] b_x1,
    double[::1] a_z1, double[::1] b_z1, double[::1] a_e1, double[::1] b_e1,
    double[::1] qbar_x, double[::1] qbar_z, double[::1] ec,
    double exp_mean, double mu_exp_mean, double p_x, double s_x, double s_z,
    double eps_cor, double kappa, double chi_val,
    bint asymptotic, int max_iter, double rtol,
    double[::1] out_rate, signed char[::1] out_status,
):
    cdef Py_ssize_t n = a_x0.shape[0]
    cdef Py_ssize_t i
    cdef double pxx = p_x * p_x
    cdef double log2_cor = log2(2.0 / eps_cor)
    with nogil:
        for i in range(n):
            _one(
                a_x0[i], b_x0[i], a_x1[i], b_x1[i],
                a_z1[i], b_z1[i], a_e1[i], b_e1[i],
                qbar_x[i], qbar_z[i], ec[i],
                exp_mean, mu_exp_mean, pxx, s_x, s_z, log2_cor,
                kappa, chi_val, asymptotic, max_iter, rtol,
                &out_rate[i], &out_status[i],
            )
