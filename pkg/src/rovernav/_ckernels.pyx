# cython: language_level=3, boundscheck=False, wraparound=False, cdivision=True, initializedcheck=False
"""
Compiled per-sample kernels. Same signatures and math as ``_pykernels``.
"""

import numpy as np
cimport numpy as cnp
from libc.math cimport sin, cos, sqrt, pow, atan2, M_PI

cnp.import_array()

NAME = "cython"


cdef void _mechanize(double[:, :] C, double[:] v, double[:] pos, double[:] w,
                     double[:] f, double dt, double[:] params,
                     double[:, :] c1, double[:] v1, double[:] p1,
                     double[:] f_ned) noexcept nogil:
    cdef double a = params[0], e2 = params[1], we = params[2]
    cdef double ge = params[3], gk = params[4], mode = params[5]
    cdef double lat = pos[0], lon = pos[1], h = pos[2]
    cdef double vn = v[0], ve = v[1], vd = v[2]
    cdef double sl = sin(lat), cl = cos(lat)
    cdef double tl = sl / cl
    cdef double denom = 1.0 - e2 * sl * sl
    cdef double r_n = a * (1.0 - e2) / pow(denom, 1.5)
    cdef double r_e = a / sqrt(denom)
    cdef double wie0 = we * cl, wie2 = -we * sl
    cdef double wen0 = ve / (r_e + h), wen1 = -vn / (r_n + h), wen2 = -ve * tl / (r_e + h)
    cdef double wi0 = wie0 + wen0, wi1 = wen1, wi2 = wie2 + wen2
    cdef double m[3][3]
    cdef double t[3][3]
    cdef double s[3][3]
    cdef int i, j, k, it
    cdef double acc, defect

    # C (I + [w x] dt)
    m[0][0] = 1.0;      m[0][1] = -w[2] * dt; m[0][2] = w[1] * dt
    m[1][0] = w[2] * dt; m[1][1] = 1.0;      m[1][2] = -w[0] * dt
    m[2][0] = -w[1] * dt; m[2][1] = w[0] * dt; m[2][2] = 1.0
    for i in range(3):
        for j in range(3):
            acc = 0.0
            for k in range(3):
                acc += C[i, k] * m[k][j]
            t[i][j] = acc
    # - [w_in x] C dt
    for j in range(3):
        t[0][j] -= (-wi2 * C[1, j] + wi1 * C[2, j]) * dt
        t[1][j] -= (wi2 * C[0, j] - wi0 * C[2, j]) * dt
        t[2][j] -= (-wi1 * C[0, j] + wi0 * C[1, j]) * dt
    # t <- t - t (t^T t - I) / 2 until the defect is below 1e-12
    for it in range(4):
        for i in range(3):
            for j in range(3):
                acc = 0.0
                for k in range(3):
                    acc += t[k][i] * t[k][j]
                s[i][j] = acc
            s[i][i] -= 1.0
        for i in range(3):
            for j in range(3):
                acc = 0.0
                for k in range(3):
                    acc += t[i][k] * s[k][j]
                m[i][j] = t[i][j] - 0.5 * acc
        defect = 0.0
        for i in range(3):
            for j in range(3):
                t[i][j] = m[i][j]
        for i in range(3):
            for j in range(3):
                acc = 0.0
                for k in range(3):
                    acc += t[k][i] * t[k][j]
                if i == j:
                    acc -= 1.0
                defect += acc * acc
        if defect < 1e-24:
            break
    for i in range(3):
        for j in range(3):
            c1[i, j] = t[i][j]

    for i in range(3):
        acc = 0.0
        for k in range(3):
            acc += 0.5 * (C[i, k] + c1[i, k]) * f[k]
        f_ned[i] = acc

    cdef double c0 = wen0 + 2.0 * wie0, cc1 = wen1, c2 = wen2 + 2.0 * wie2
    cdef double cor0 = cc1 * vd - c2 * ve
    cdef double cor1 = c2 * vn - c0 * vd
    cdef double cor2 = c0 * ve - cc1 * vn
    cdef double g0 = ge * (1.0 + gk * sl * sl) / sqrt(denom)
    cdef double gd
    if mode == 0.0:
        gd = g0 * (1.0 - 2.0 * h / a)
    else:
        gd = g0 * (a / (a + h)) * (a / (a + h))
    v1[0] = vn + (f_ned[0] - cor0) * dt
    v1[1] = ve + (f_ned[1] - cor1) * dt
    v1[2] = vd + (f_ned[2] + gd - cor2) * dt

    cdef double h1 = h - 0.5 * dt * (vd + v1[2])
    cdef double lat1 = lat + 0.5 * dt * (vn / (r_n + h) + v1[0] / (r_n + h1))
    cdef double lon1 = lon + 0.5 * dt * (ve / ((r_e + h) * cl) + v1[1] / ((r_e + h1) * cos(lat1)))
    if lon1 > M_PI:
        lon1 -= 2.0 * M_PI
    elif lon1 <= -M_PI:
        lon1 += 2.0 * M_PI
    p1[0] = lat1
    p1[1] = lon1
    p1[2] = h1


cdef void _system_matrix(double[:, :] C, double[:] v, double[:] pos, double[:] fn,
                         double[:] params, double tau_a, double tau_g,
                         double[:, :] F) noexcept nogil:
    cdef double a = params[0], e2 = params[1], we = params[2]
    cdef double ge = params[3], gk = params[4], mode = params[5]
    cdef double lat = pos[0], h = pos[2]
    cdef double vn = v[0], ve = v[1], vd = v[2]
    cdef double s = sin(lat), c = cos(lat)
    cdef double t = s / c
    cdef double denom = 1.0 - e2 * s * s
    cdef double r_n = a * (1.0 - e2) / pow(denom, 1.5)
    cdef double r_e = a / sqrt(denom)
    cdef double dr_n = 3.0 * a * (1.0 - e2) * e2 * s * c / pow(denom, 2.5)
    cdef double dr_e = a * e2 * s * c / pow(denom, 1.5)
    cdef double rnh = r_n + h, reh = r_e + h
    cdef double wie[3]
    cdef double dwie[3]
    cdef double wen[3]
    cdef double dwl[3]
    cdef double dwh[3]
    cdef double dwv[3][3]
    cdef double sv[3][3]
    cdef double x[3]
    cdef int i, j, k
    cdef double acc, sq, g0, dg0, hf, dhf

    wie[0] = we * c; wie[1] = 0.0; wie[2] = -we * s
    dwie[0] = -we * s; dwie[1] = 0.0; dwie[2] = -we * c
    wen[0] = ve / reh; wen[1] = -vn / rnh; wen[2] = -ve * t / reh
    dwl[0] = -ve * dr_e / (reh * reh)
    dwl[1] = vn * dr_n / (rnh * rnh)
    dwl[2] = -ve * (1.0 / (c * c * reh) - t * dr_e / (reh * reh))
    dwh[0] = -ve / (reh * reh); dwh[1] = vn / (rnh * rnh); dwh[2] = ve * t / (reh * reh)
    for i in range(3):
        for j in range(3):
            dwv[i][j] = 0.0
    dwv[0][1] = 1.0 / reh
    dwv[1][0] = -1.0 / rnh
    dwv[2][1] = -t / reh
    sv[0][0] = 0.0; sv[0][1] = -vd; sv[0][2] = ve
    sv[1][0] = vd; sv[1][1] = 0.0; sv[1][2] = -vn
    sv[2][0] = -ve; sv[2][1] = vn; sv[2][2] = 0.0

    sq = sqrt(denom)
    g0 = ge * (1.0 + gk * s * s) / sq
    dg0 = ge * (2.0 * gk * s * c / sq + (1.0 + gk * s * s) * e2 * s * c / pow(denom, 1.5))
    if mode == 0.0:
        hf = 1.0 - 2.0 * h / a
        dhf = -2.0 / a
    else:
        hf = (a / (a + h)) * (a / (a + h))
        dhf = -2.0 * a * a / ((a + h) * (a + h) * (a + h))

    for i in range(15):
        for j in range(15):
            F[i, j] = 0.0

    # attitude rows
    x[0] = wie[0] + wen[0]; x[1] = wie[1] + wen[1]; x[2] = wie[2] + wen[2]
    F[0, 1] = x[2]; F[0, 2] = -x[1]
    F[1, 0] = -x[2]; F[1, 2] = x[0]
    F[2, 0] = x[1]; F[2, 1] = -x[0]
    for i in range(3):
        for j in range(3):
            F[i, 3 + j] = -dwv[i][j]
            F[i, 12 + j] = C[i, j]
            F[3 + i, 9 + j] = C[i, j]
        F[i, 6] = -(dwie[i] + dwl[i])
        F[i, 8] = -dwh[i]

    # velocity rows
    F[3, 1] = fn[2]; F[3, 2] = -fn[1]
    F[4, 0] = -fn[2]; F[4, 2] = fn[0]
    F[5, 0] = fn[1]; F[5, 1] = -fn[0]
    x[0] = wen[0] + 2.0 * wie[0]; x[1] = wen[1] + 2.0 * wie[1]; x[2] = wen[2] + 2.0 * wie[2]
    for i in range(3):
        for j in range(3):
            acc = 0.0
            for k in range(3):
                acc += sv[i][k] * dwv[k][j]
            F[3 + i, 3 + j] = acc
    F[3, 4] += x[2]; F[3, 5] -= x[1]
    F[4, 3] -= x[2]; F[4, 5] += x[0]
    F[5, 3] += x[1]; F[5, 4] -= x[0]
    for i in range(3):
        acc = 0.0
        for k in range(3):
            acc += sv[i][k] * (dwl[k] + 2.0 * dwie[k])
        F[3 + i, 6] = acc
        acc = 0.0
        for k in range(3):
            acc += sv[i][k] * dwh[k]
        F[3 + i, 8] = acc
    F[5, 6] += dg0 * hf
    F[5, 8] += g0 * dhf

    # position rows
    F[6, 3] = 1.0 / rnh
    F[7, 4] = 1.0 / (reh * c)
    F[8, 5] = -1.0
    F[6, 6] = -vn * dr_n / (rnh * rnh)
    F[6, 8] = -vn / (rnh * rnh)
    F[7, 6] = ve * t / (c * reh) - ve * dr_e / (reh * reh * c)
    F[7, 8] = -ve / (reh * reh * c)

    if tau_a > 0.0 and tau_a < 1e300:
        F[9, 9] = -1.0 / tau_a; F[10, 10] = -1.0 / tau_a; F[11, 11] = -1.0 / tau_a
    if tau_g > 0.0 and tau_g < 1e300:
        F[12, 12] = -1.0 / tau_g; F[13, 13] = -1.0 / tau_g; F[14, 14] = -1.0 / tau_g


cdef void _propagate(double[:, :] P, double[:, :] F, double dt, double[:] q,
                     double[:, :] phi, double[:, :] pp, double[:, :] tmp) noexcept nogil:
    cdef int i, j, k
    cdef double acc
    for i in range(15):
        for j in range(15):
            phi[i, j] = F[i, j] * dt
        phi[i, i] += 1.0
    # tmp = phi P
    for i in range(15):
        for j in range(15):
            acc = 0.0
            for k in range(15):
                if phi[i, k] != 0.0:
                    acc += phi[i, k] * P[k, j]
            tmp[i, j] = acc
    # pp = tmp phi^T, symmetric: compute upper triangle
    for i in range(15):
        for j in range(i, 15):
            acc = 0.0
            for k in range(15):
                acc += tmp[i, k] * phi[j, k]
            pp[i, j] = acc
    for i in range(15):
        for j in range(i + 1, 15):
            pp[j, i] = pp[i, j]
        pp[i, i] += q[i]


cdef int _cholesky(double[:, :] a, int n) noexcept nogil:
    """In-place lower Cholesky factor; returns 1 when ``a`` is not positive-definite."""
    cdef int i, j, k
    cdef double acc
    for j in range(n):
        acc = a[j, j]
        for k in range(j):
            acc -= a[j, k] * a[j, k]
        if not acc > 0.0:
            return 1
        a[j, j] = sqrt(acc)
        for i in range(j + 1, n):
            acc = a[i, j]
            for k in range(j):
                acc -= a[i, k] * a[j, k]
            a[i, j] = acc / a[j, j]
        for i in range(j):
            a[i, j] = 0.0
    return 0


cdef void _chol_solve(double[:, :] L, int n, double[:, :] b, int ncol) noexcept nogil:
    """Overwrite ``b`` (n x ncol) with ``(L L^T)^-1 b``."""
    cdef int i, k, c
    cdef double acc
    for c in range(ncol):
        for i in range(n):
            acc = b[i, c]
            for k in range(i):
                acc -= L[i, k] * b[k, c]
            b[i, c] = acc / L[i, i]
        for i in range(n - 1, -1, -1):
            acc = b[i, c]
            for k in range(i + 1, n):
                acc -= L[k, i] * b[k, c]
            b[i, c] = acc / L[i, i]


cdef void _window_add(double[:, :] C, double[:] v, double[:] w, double[:] lv,
                      double dt, double[:] acc, double* yaw) noexcept nogil:
    cdef int i, j
    cdef double s_theta, c_theta, roll, psi
    cdef double vx[3][3]
    vx[0][0] = 0.0; vx[0][1] = -v[2]; vx[0][2] = v[1]
    vx[1][0] = v[2]; vx[1][1] = 0.0; vx[1][2] = -v[0]
    vx[2][0] = -v[1]; vx[2][1] = v[0]; vx[2][2] = 0.0
    acc[0] += (C[0, 0] * v[0] + C[1, 0] * v[1] + C[2, 0] * v[2] + w[1] * lv[2] - w[2] * lv[1]) * dt
    acc[1] += (C[0, 1] * v[0] + C[1, 1] * v[1] + C[2, 1] * v[2] + w[2] * lv[0] - w[0] * lv[2]) * dt
    acc[2] += (C[0, 2] * v[0] + C[1, 2] * v[1] + C[2, 2] * v[2] + w[0] * lv[1] - w[1] * lv[0]) * dt
    for i in range(3):
        for j in range(3):
            acc[3 + 3 * i + j] += C[j, i] * dt
            acc[12 + 3 * i + j] += (C[0, i] * vx[0][j] + C[1, i] * vx[1][j] + C[2, i] * vx[2][j]) * dt
    s_theta = -C[2, 0]
    c_theta = 1.0 - s_theta * s_theta
    c_theta = sqrt(c_theta) if c_theta > 0.0 else 0.0
    psi = atan2(C[1, 0], C[0, 0])
    roll = atan2(C[2, 1], C[2, 2])
    acc[21] += s_theta * sin(psi) * dt
    acc[22] -= s_theta * cos(psi) * dt
    acc[25] += sin(roll) * dt
    acc[26] += cos(roll) * dt
    acc[27] += c_theta * dt
    yaw[0] = psi


def _f64(x):
    return np.ascontiguousarray(x, dtype=np.float64)


def mechanize_step(C, v, pos, w, f, dt, params):
    """One first-order strapdown step. Returns ``(C, v, pos, f_ned)``."""
    c1 = np.empty((3, 3))
    v1 = np.empty(3)
    p1 = np.empty(3)
    fn = np.empty(3)
    _mechanize(_f64(C), _f64(v), _f64(pos), _f64(w), _f64(f), dt, _f64(params),
               c1, v1, p1, fn)
    return c1, v1, p1, fn


def system_matrix(C, v, pos, f_ned, params, tau_a, tau_g):
    """Continuous-time 15x15 error-state dynamics matrix."""
    F = np.empty((15, 15))
    _system_matrix(_f64(C), _f64(v), _f64(pos), _f64(f_ned), _f64(params),
                   tau_a, tau_g, F)
    return F


def propagate(P, F, dt, qdiag):
    """First-order transition and predicted covariance ``(Phi, Phi P Phi^T + Q)``."""
    phi = np.empty((15, 15))
    pp = np.empty((15, 15))
    tmp = np.empty((15, 15))
    _propagate(_f64(P), _f64(F), dt, _f64(qdiag), phi, pp, tmp)
    return phi, pp


def time_update(C, v, pos, w, f, dt, params, tau_a, tau_g, P, qdiag):
    """Fused mechanization + covariance propagation for the filter loop."""
    cdef double[:, :] Cv = _f64(C)
    cdef double[:] vv = _f64(v)
    cdef double[:] pv = _f64(pos)
    cdef double[:] par = _f64(params)
    c1 = np.empty((3, 3))
    v1 = np.empty(3)
    p1 = np.empty(3)
    fn = np.empty(3)
    F = np.empty((15, 15))
    phi = np.empty((15, 15))
    pp = np.empty((15, 15))
    tmp = np.empty((15, 15))
    _mechanize(Cv, vv, pv, _f64(w), _f64(f), dt, par, c1, v1, p1, fn)
    _system_matrix(Cv, vv, pv, fn, par, tau_a, tau_g, F)
    _propagate(_f64(P), F, dt, _f64(qdiag), phi, pp, tmp)
    return c1, v1, p1, fn, phi, pp



def window_add(C, v, w, lever, dt, double[:] acc):
    """Accumulate one IMU interval into ``acc`` in place; returns the yaw angle."""
    cdef double yaw = 0.0
    _window_add(_f64(C), _f64(v), _f64(w), _f64(lever), dt, acc, &yaw)
    return yaw


def kalman_update(P, H, R, z):
    """
    Joseph-form update. Returns ``(dx, P_post, chi)``; ``chi = -1`` when the
    innovation covariance is not positive-definite.
    """
    cdef double[:, :] Pv = _f64(P)
    cdef double[:, :] Hv = _f64(H)
    cdef double[:, :] Rv = _f64(R)
    cdef double[:] zv = _f64(z)
    cdef int n = Pv.shape[0], m = Hv.shape[0]
    cdef int i, j, k
    cdef double acc, chi
    PHt_a = np.empty((n, m))
    S_a = np.empty((m, m))
    Kt_a = np.empty((m, n))
    A_a = np.empty((n, n))
    B_a = np.empty((n, n))
    KR_a = np.empty((n, m))
    dx_a = np.empty(n)
    P1_a = np.empty((n, n))
    r_a = np.empty((m, 1))
    cdef double[:, :] PHt = PHt_a, S = S_a, Kt = Kt_a, A = A_a, B = B_a, KR = KR_a, P1 = P1_a, r = r_a
    cdef double[:] dx = dx_a
    with nogil:
        for i in range(n):
            for j in range(m):
                acc = 0.0
                for k in range(n):
                    acc += Pv[i, k] * Hv[j, k]
                PHt[i, j] = acc
        for i in range(m):
            for j in range(m):
                acc = 0.0
                for k in range(n):
                    acc += Hv[i, k] * PHt[k, j]
                S[i, j] = acc + Rv[i, j]
        for i in range(m):
            for j in range(i + 1, m):
                acc = 0.5 * (S[i, j] + S[j, i])
                S[i, j] = acc
                S[j, i] = acc
    if _cholesky(S, m):
        return None, None, -1.0
    with nogil:
        for i in range(m):
            for j in range(n):
                Kt[i, j] = PHt[j, i]
        _chol_solve(S, m, Kt, n)
        for i in range(n):
            acc = 0.0
            for k in range(m):
                acc += Kt[k, i] * zv[k]
            dx[i] = acc
        # A = I - K H
        for i in range(n):
            for j in range(n):
                acc = 1.0 if i == j else 0.0
                for k in range(m):
                    acc -= Kt[k, i] * Hv[k, j]
                A[i, j] = acc
        for i in range(n):
            for j in range(n):
                acc = 0.0
                for k in range(n):
                    acc += A[i, k] * Pv[k, j]
                B[i, j] = acc
        for i in range(n):
            for j in range(m):
                acc = 0.0
                for k in range(m):
                    acc += Kt[k, i] * Rv[k, j]
                KR[i, j] = acc
        for i in range(n):
            for j in range(i, n):
                acc = 0.0
                for k in range(n):
                    acc += B[i, k] * A[j, k] + B[j, k] * A[i, k]
                acc *= 0.5
                for k in range(m):
                    acc += 0.5 * (KR[i, k] * Kt[k, j] + KR[j, k] * Kt[k, i])
                P1[i, j] = acc
                P1[j, i] = acc
        # post-fit residual whitened by the lower factor
        chi = 0.0
        for i in range(m):
            acc = zv[i]
            for k in range(n):
                acc -= Hv[i, k] * dx[k]
            for k in range(i):
                acc -= S[i, k] * r[k, 0]
            r[i, 0] = acc / S[i, i]
            chi += r[i, 0] * r[i, 0]
    return dx_a, P1_a, sqrt(chi)


def rts_backward(P, phi, Pp, u):
    """
    Closed-loop RTS backward pass. Returns ``(d, P_s, bad)`` where ``bad``
    is the first epoch whose predicted covariance failed to factor, or -1.
    """
    cdef double[:, :, :] Pv = _f64(P)
    cdef double[:, :, :] Fv = _f64(phi)
    cdef double[:, :, :] Qv = _f64(Pp)
    cdef double[:, :] uv = _f64(u)
    cdef int N = Pv.shape[0], n = Pv.shape[1]
    cdef int i, j, k, kk
    cdef double acc
    d_a = np.zeros((N, n))
    Ps_a = np.array(Pv, copy=True)
    M_a = np.empty((n, n))
    At_a = np.empty((n, n))
    D_a = np.empty((n, n))
    T_a = np.empty((n, n))
    s_a = np.empty(n)
    cdef double[:, :] d = d_a, M = M_a, At = At_a, D = D_a, T = T_a
    cdef double[:, :, :] Ps = Ps_a
    cdef double[:] s = s_a
    cdef int bad = -1
    with nogil:
        for kk in range(N - 2, -1, -1):
            for i in range(n):
                if not Qv[kk + 1, i, i] > 0.0:
                    bad = kk + 1
                    break
                s[i] = 1.0 / sqrt(Qv[kk + 1, i, i])
            if bad >= 0:
                break
            for i in range(n):
                for j in range(n):
                    M[i, j] = Qv[kk + 1, i, j] * s[i] * s[j]
            if _cholesky(M, n):
                bad = kk + 1
                break
            # At = S M^-1 S Phi P_k
            for i in range(n):
                for j in range(n):
                    acc = 0.0
                    for k in range(n):
                        acc += Fv[kk + 1, i, k] * Pv[kk, k, j]
                    At[i, j] = acc * s[i]
            _chol_solve(M, n, At, n)
            for i in range(n):
                for j in range(n):
                    At[i, j] *= s[i]
            for i in range(n):
                acc = 0.0
                for k in range(n):
                    acc += At[k, i] * (d[kk + 1, k] + uv[kk + 1, k])
                d[kk, i] = acc
            for i in range(n):
                for j in range(n):
                    D[i, j] = Ps[kk + 1, i, j] - Qv[kk + 1, i, j]
            # T = A D
            for i in range(n):
                for j in range(n):
                    acc = 0.0
                    for k in range(n):
                        acc += At[k, i] * D[k, j]
                    T[i, j] = acc
            for i in range(n):
                for j in range(i, n):
                    acc = 0.0
                    for k in range(n):
                        acc += T[i, k] * At[k, j] + T[j, k] * At[k, i]
                    acc = 0.5 * (Pv[kk, i, j] + Pv[kk, j, i] + acc)
                    Ps[kk, i, j] = acc
                    Ps[kk, j, i] = acc
    return d_a, Ps_a, bad
