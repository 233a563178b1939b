"""
Pure numpy implementation of the hot per-sample kernels.

Mirrors ``_ckernels.pyx`` one-to-one; selected at import when the compiled
extension is unavailable or ``ROVERNAV_BACKEND=python`` is set.

``params`` is ``EllipsoidModel.as_array()``:
``[a, e2, rotation_rate, g_equator, g_k, height_model]``.
"""

import math

import numpy as np

NAME = "python"

_I3 = np.eye(3)


def _skew(x, y, z):
    return np.array([[0.0, -z, y], [z, 0.0, -x], [-y, x, 0.0]])


def _radii(lat, a, e2):
    s = math.sin(lat)
    denom = 1.0 - e2 * s * s
    return a * (1.0 - e2) / denom**1.5, a / math.sqrt(denom)


def _gravity_down(lat, h, params):
    a, e2, _, ge, gk, mode = params
    s2 = math.sin(lat) ** 2
    g0 = ge * (1.0 + gk * s2) / math.sqrt(1.0 - e2 * s2)
    if mode == 0.0:
        return g0 * (1.0 - 2.0 * h / a)
    return g0 * (a / (a + h)) ** 2


def mechanize_step(C, v, pos, w, f, dt, params):
    """One first-order strapdown step. Returns ``(C, v, pos, f_ned)``."""
    a, e2, we = params[0], params[1], params[2]
    lat, lon, h = pos
    vn, ve, vd = v
    r_n, r_e = _radii(lat, a, e2)
    cl, sl = math.cos(lat), math.sin(lat)
    tl = sl / cl

    w_ie = (we * cl, 0.0, -we * sl)
    w_en = (ve / (r_e + h), -vn / (r_n + h), -ve * tl / (r_e + h))
    w_in = _skew(w_ie[0] + w_en[0], w_ie[1] + w_en[1], w_ie[2] + w_en[2])

    c1 = C @ (_I3 + _skew(*w) * dt) - w_in @ C * dt
    for _ in range(4):
        e = c1.T @ c1 - _I3
        c1 = c1 - 0.5 * c1 @ e
        if np.linalg.norm(c1.T @ c1 - _I3) < 1e-12:
            break

    f_ned = 0.5 * (C + c1) @ f
    cor = np.cross(
        [w_en[0] + 2.0 * w_ie[0], w_en[1] + 2.0 * w_ie[1], w_en[2] + 2.0 * w_ie[2]], v
    )
    g_d = _gravity_down(lat, h, params)
    v1 = v + (f_ned + np.array([0.0, 0.0, g_d]) - cor) * dt

    h1 = h - 0.5 * dt * (vd + v1[2])
    lat1 = lat + 0.5 * dt * (vn / (r_n + h) + v1[0] / (r_n + h1))
    lon1 = lon + 0.5 * dt * (
        ve / ((r_e + h) * cl) + v1[1] / ((r_e + h1) * math.cos(lat1))
    )
    if lon1 > math.pi:
        lon1 -= 2.0 * math.pi
    elif lon1 <= -math.pi:
        lon1 += 2.0 * math.pi
    return c1, v1, np.array([lat1, lon1, h1]), f_ned


def system_matrix(C, v, pos, f_ned, params, tau_a, tau_g):
    """Continuous-time 15x15 error-state dynamics matrix."""
    a, e2, we = params[0], params[1], params[2]
    lat, _, h = pos
    vn, ve, _ = v
    s, c = math.sin(lat), math.cos(lat)
    t = s / c
    denom = 1.0 - e2 * s * s
    r_n = a * (1.0 - e2) / denom**1.5
    r_e = a / math.sqrt(denom)
    dr_n = 3.0 * a * (1.0 - e2) * e2 * s * c / denom**2.5
    dr_e = a * e2 * s * c / denom**1.5
    rnh, reh = r_n + h, r_e + h

    w_ie = np.array([we * c, 0.0, -we * s])
    dwie_dl = np.array([-we * s, 0.0, -we * c])
    w_en = np.array([ve / reh, -vn / rnh, -ve * t / reh])
    dwen_dv = np.array(
        [[0.0, 1.0 / reh, 0.0], [-1.0 / rnh, 0.0, 0.0], [0.0, -t / reh, 0.0]]
    )
    dwen_dl = np.array(
        [
            -ve * dr_e / reh**2,
            vn * dr_n / rnh**2,
            -ve * (1.0 / (c * c * reh) - t * dr_e / reh**2),
        ]
    )
    dwen_dh = np.array([-ve / reh**2, vn / rnh**2, ve * t / reh**2])

    # d(gravity_down)/d(lat, h)
    ge, gk, mode = params[3], params[4], params[5]
    sq = math.sqrt(denom)
    g0 = ge * (1.0 + gk * s * s) / sq
    dg0 = ge * (2.0 * gk * s * c / sq + (1.0 + gk * s * s) * e2 * s * c / denom**1.5)
    if mode == 0.0:
        hf, dhf = 1.0 - 2.0 * h / a, -2.0 / a
    else:
        hf, dhf = (a / (a + h)) ** 2, -2.0 * a * a / (a + h) ** 3

    F = np.zeros((15, 15))
    sv = _skew(*v)

    F[0:3, 0:3] = -_skew(*(w_ie + w_en))
    F[0:3, 3:6] = -dwen_dv
    F[0:3, 6] = -(dwie_dl + dwen_dl)
    F[0:3, 8] = -dwen_dh
    F[0:3, 12:15] = C

    F[3:6, 0:3] = -_skew(*f_ned)
    F[3:6, 3:6] = -_skew(*(w_en + 2.0 * w_ie)) + sv @ dwen_dv
    F[3:6, 6] = sv @ (dwen_dl + 2.0 * dwie_dl)
    F[5, 6] += dg0 * hf
    F[3:6, 8] = sv @ dwen_dh
    F[5, 8] += g0 * dhf
    F[3:6, 9:12] = C

    F[6, 3] = 1.0 / rnh
    F[7, 4] = 1.0 / (reh * c)
    F[8, 5] = -1.0
    F[6, 6] = -vn * dr_n / rnh**2
    F[6, 8] = -vn / rnh**2
    F[7, 6] = ve * t / (c * reh) - ve * dr_e / (reh**2 * c)
    F[7, 8] = -ve / (reh**2 * c)

    if tau_a > 0.0 and math.isfinite(tau_a):
        F[9, 9] = F[10, 10] = F[11, 11] = -1.0 / tau_a
    if tau_g > 0.0 and math.isfinite(tau_g):
        F[12, 12] = F[13, 13] = F[14, 14] = -1.0 / tau_g
    return F


def propagate(P, F, dt, qdiag):
    """First-order transition and predicted covariance ``(Phi, Phi P Phi^T + Q)``."""
    phi = np.eye(15) + F * dt
    pp = phi @ P @ phi.T
    pp[np.diag_indices(15)] += qdiag
    pp = 0.5 * (pp + pp.T)
    return phi, pp


def time_update(C, v, pos, w, f, dt, params, tau_a, tau_g, P, qdiag):
    """Fused mechanization + covariance propagation for the filter loop.

    The dynamics matrix is evaluated at the pre-step state with the step's
    NED specific force.
    """
    c1, v1, p1, f_ned = mechanize_step(C, v, pos, w, f, dt, params)
    F = system_matrix(C, v, pos, f_ned, params, tau_a, tau_g)
    phi, pp = propagate(P, F, dt, qdiag)
    return c1, v1, p1, f_ned, phi, pp


# Accumulator layout for the odometry window:
# [0:3] C^T v + w x L, [3:12] C^T, [12:21] C^T [v x], [21:24] pitch row,
# [24:27] gyro-bias row, [27] cos(pitch)
WINDOW_SIZE = 28


def window_add(C, v, w, lever, dt, acc):
    """Accumulate one IMU interval into ``acc`` in place; returns the yaw angle."""
    Ct = C.T
    acc[0:3] += (Ct @ v + np.cross(w, lever)) * dt
    acc[3:12] += Ct.ravel() * dt
    acc[12:21] += (Ct @ _skew(*v)).ravel() * dt
    s_theta = -C[2, 0]
    c_theta = math.sqrt(max(0.0, 1.0 - s_theta * s_theta))
    yaw = math.atan2(C[1, 0], C[0, 0])
    roll = math.atan2(C[2, 1], C[2, 2])
    acc[21] += s_theta * math.sin(yaw) * dt
    acc[22] -= s_theta * math.cos(yaw) * dt
    acc[25] += math.sin(roll) * dt
    acc[26] += math.cos(roll) * dt
    acc[27] += c_theta * dt
    return yaw


def kalman_update(P, H, R, z):
    """
    Joseph-form update. Returns ``(dx, P_post, chi)`` where ``chi`` is the
    post-fit Mahalanobis distance, or ``chi = -1`` if S is not positive-definite.
    """
    PHt = P @ H.T
    S = H @ PHt + R
    S = 0.5 * (S + S.T)
    try:
        L = np.linalg.cholesky(S)
    except np.linalg.LinAlgError:
        return None, None, -1.0
    K = np.linalg.solve(L.T, np.linalg.solve(L, PHt.T)).T
    dx = K @ z
    IKH = np.eye(P.shape[0]) - K @ H
    P1 = IKH @ P @ IKH.T + K @ R @ K.T
    P1 = 0.5 * (P1 + P1.T)
    r = np.linalg.solve(L, z - H @ dx)
    return dx, P1, math.sqrt(r @ r)


def rts_backward(P, phi, Pp, u):
    """
    Closed-loop RTS backward pass. Returns ``(d, P_s, bad)`` where ``bad``
    is the first epoch whose predicted covariance failed to factor, or -1.
    """
    N, n = P.shape[0], P.shape[1]
    d = np.zeros((N, n))
    Ps = P.copy()
    for k in range(N - 2, -1, -1):
        dg = np.diag(Pp[k + 1])
        if not np.all(dg > 0):
            return d, Ps, k + 1
        s = 1.0 / np.sqrt(dg)
        try:
            L = np.linalg.cholesky(Pp[k + 1] * np.outer(s, s))
        except np.linalg.LinAlgError:
            return d, Ps, k + 1
        rhs = (phi[k + 1] @ P[k]) * s[:, None]
        At = np.linalg.solve(L.T, np.linalg.solve(L, rhs)) * s[:, None]
        A = At.T
        d[k] = A @ (d[k + 1] + u[k + 1])
        Pk = P[k] + A @ (Ps[k + 1] - Pp[k + 1]) @ At
        Ps[k] = 0.5 * (Pk + Pk.T)
    return d, Ps, -1
