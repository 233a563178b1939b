"""
Rauch-Tung-Striebel fixed-interval smoothing between navigation stops.

The forward filter runs closed-loop, so each stored epoch carries its
total navigation state, the filtered covariance, the transition and
predicted covariance leading into it, and the correction applied at it.
Smoothing works on error deltas relative to the stored states; with a
zero filtered error at every epoch the additive recursion reduces to::

    d_k = A_k (d_{k+1} + u_{k+1}),   d_N = 0

where ``u_{k+1}`` is the correction applied at ``k+1`` and the smoothed
state is ``correct_nav_state(nav_k, d_k)``.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np
from numpy.typing import NDArray

from . import _kernels
from .ekf import N_STATES, FilterEpoch
from .errors import BufferOverflow, SingularPredictedCovariance
from .geodesy import GeodeticPosition, wrap_longitude
from .mechanization import NavState

DEFAULT_MAX_EPOCHS = 12_000  # 120 s at 100 Hz


def smoother_gain(P_filt, phi_next, P_pred_next) -> NDArray[np.float64]:
    """``A = P_filt Phi^T P_pred^-1`` via a diagonally scaled Cholesky solve."""
    d = np.sqrt(np.diag(P_pred_next))
    if not np.all(d > 0):
        raise SingularPredictedCovariance("predicted covariance has a non-positive diagonal")
    s = 1.0 / d
    M = P_pred_next * np.outer(s, s)
    try:
        L = np.linalg.cholesky(M)
    except np.linalg.LinAlgError:
        raise SingularPredictedCovariance("predicted covariance is not invertible") from None
    # A^T = P_pred^-1 Phi P_filt = S M^-1 S Phi P_filt
    rhs = (phi_next @ P_filt) * s[:, None]
    At = np.linalg.solve(L.T, np.linalg.solve(L, rhs)) * s[:, None]
    return At.T


def rts_linear(x_filt, P_filt, x_pred, P_pred, phi):
    """
    Textbook additive RTS pass for a generic linear-Gaussian model.

    Parameters
    ----------
    x_filt, P_filt : (N, n), (N, n, n)
        Filtered means and covariances.
    x_pred, P_pred, phi : (N, n), (N, n, n), (N, n, n)
        Prediction *into* epoch k and its transition; index 0 is unused.

    Returns
    -------
    x_s, P_s : ndarray
    """
    x_filt = np.asarray(x_filt, dtype=float)
    P_filt = np.asarray(P_filt, dtype=float)
    N = x_filt.shape[0]
    x_s = x_filt.copy()
    P_s = P_filt.copy()
    for k in range(N - 2, -1, -1):
        A = smoother_gain(P_filt[k], phi[k + 1], P_pred[k + 1])
        x_s[k] = x_filt[k] + A @ (x_s[k + 1] - x_pred[k + 1])
        P_s[k] = P_filt[k] + A @ (P_s[k + 1] - P_pred[k + 1]) @ A.T
        P_s[k] = 0.5 * (P_s[k] + P_s[k].T)
    return x_s, P_s


def smooth_closed_loop(P_filt, phi, P_pred, corrections):
    """
    Backward pass over closed-loop epochs.

    Returns the smoothed error deltas ``d`` (N, 15) and covariances (N, 15, 15).
    """
    d, P_s, bad = _kernels.rts_backward(
        np.ascontiguousarray(P_filt), np.ascontiguousarray(phi),
        np.ascontiguousarray(P_pred), np.ascontiguousarray(corrections),
    )
    if bad >= 0:
        raise SingularPredictedCovariance(f"predicted covariance at epoch {bad} is not invertible")
    return d, P_s


def apply_deltas(C, v, llh, biases, d):
    """Vectorized ``correct_nav_state`` plus bias accumulation."""
    dpsi = d[:, 0:3]
    Sk = np.zeros((len(d), 3, 3))
    Sk[:, 0, 1], Sk[:, 0, 2] = -dpsi[:, 2], dpsi[:, 1]
    Sk[:, 1, 0], Sk[:, 1, 2] = dpsi[:, 2], -dpsi[:, 0]
    Sk[:, 2, 0], Sk[:, 2, 1] = -dpsi[:, 1], dpsi[:, 0]
    C1 = C - Sk @ C
    CtC = np.transpose(C1, (0, 2, 1)) @ C1
    C1 = 0.5 * C1 @ (3.0 * np.eye(3) - CtC)
    llh1 = llh - d[:, 6:9]
    llh1[:, 1] = (llh1[:, 1] + np.pi) % (2.0 * np.pi) - np.pi
    return C1, v - d[:, 3:6], llh1, biases + d[:, 9:15]


@dataclass
class SmoothedSegment:
    epochs: list[FilterEpoch]
    smoothed_states: list[NavState]
    smoothed_covariances: list[NDArray[np.float64]]
    smoothed_biases: list[NDArray[np.float64]] = field(default_factory=list)


def rts_smooth(segment: list[FilterEpoch]) -> SmoothedSegment:
    """Smooth one inter-stop segment of closed-loop filter epochs."""
    if not segment:
        raise ValueError("segment must be non-empty")
    N = len(segment)
    for a, b in zip(segment, segment[1:]):
        if not b.time > a.time:
            raise ValueError("segment epochs must be time-ordered")
        if b.transition is None or b.predicted_covariance is None:
            raise ValueError("interior epochs need a stored transition and predicted covariance")
    P = np.array([e.covariance for e in segment])
    phi = np.zeros((N, N_STATES, N_STATES))
    Pp = np.zeros((N, N_STATES, N_STATES))
    u = np.zeros((N, N_STATES))
    for k, e in enumerate(segment[1:], start=1):
        phi[k] = e.transition
        Pp[k] = e.predicted_covariance
        if e.correction is not None:
            u[k] = e.correction
    d, P_s = smooth_closed_loop(P, phi, Pp, u)
    C = np.array([e.nav.attitude for e in segment])
    v = np.array([e.nav.velocity_ned for e in segment])
    llh = np.array([e.nav.llh for e in segment])
    b = np.array([e.biases for e in segment])
    C1, v1, llh1, b1 = apply_deltas(C, v, llh, b, d)
    states = [
        NavState(C1[k], v1[k], GeodeticPosition(llh1[k, 0], wrap_longitude(llh1[k, 1]), llh1[k, 2]), e.time)
        for k, e in enumerate(segment[:-1])
    ]
    states.append(segment[-1].nav.copy())
    biases = [b1[k] for k in range(N - 1)] + [np.array(segment[-1].biases, dtype=float)]
    covs = [P_s[k] for k in range(N - 1)] + [np.array(segment[-1].covariance)]
    return SmoothedSegment(list(segment), states, covs, biases)


class SegmentRecorder:
    """
    Fixed-capacity epoch buffer for one inter-stop segment.

    The first stored epoch is the anchor (the last epoch of the previous
    segment); :meth:`flush` smooths and keeps the final epoch as the next
    anchor. Forward-filter arrays are never modified.
    """

    def __init__(self, max_epochs: int = DEFAULT_MAX_EPOCHS):
        if max_epochs < 2:
            raise ValueError("max_epochs must be at least 2")
        n = self.capacity = int(max_epochs)
        self.t = np.zeros(n)
        self.C = np.zeros((n, 3, 3))
        self.v = np.zeros((n, 3))
        self.llh = np.zeros((n, 3))
        self.b = np.zeros((n, 6))
        self.P = np.zeros((n, N_STATES, N_STATES))
        self.phi = np.zeros((n, N_STATES, N_STATES))
        self.Pp = np.zeros((n, N_STATES, N_STATES))
        self.u = np.zeros((n, N_STATES))
        self.size = 0

    def __len__(self) -> int:
        return self.size

    def append(self, t, C, v, llh, biases, P, phi=None, P_pred=None, correction=None) -> None:
        k = self.size
        if k >= self.capacity:
            raise BufferOverflow(f"segment exceeds {self.capacity} epochs")
        self.t[k] = t
        self.C[k] = C
        self.v[k] = v
        self.llh[k] = llh
        self.b[k] = biases
        self.P[k] = P
        if phi is not None:
            self.phi[k] = phi
            self.Pp[k] = P_pred
        if correction is None:
            self.u[k] = 0.0
        else:
            self.u[k] = correction
        self.size = k + 1

    def amend_last(self, C, v, llh, biases, P, correction) -> None:
        """Overwrite the newest epoch after a measurement update and accumulate its correction."""
        k = self.size - 1
        self.C[k] = C
        self.v[k] = v
        self.llh[k] = llh
        self.b[k] = biases
        self.P[k] = P
        self.u[k] += correction

    def clear(self) -> None:
        self.size = 0

    def epochs(self) -> list[FilterEpoch]:
        out = []
        for k in range(self.size):
            out.append(
                FilterEpoch(
                    time=float(self.t[k]),
                    nav=NavState(self.C[k].copy(), self.v[k].copy(), GeodeticPosition(*self.llh[k]), float(self.t[k])),
                    biases=self.b[k].copy(),
                    covariance=self.P[k].copy(),
                    transition=self.phi[k].copy() if k else None,
                    predicted_covariance=self.Pp[k].copy() if k else None,
                    correction=self.u[k].copy(),
                )
            )
        return out

    def flush(self):
        """
        Smooth the buffered segment.

        Returns ``(t, C, v, llh, biases, P)`` arrays for every epoch after
        the anchor, or ``None`` when nothing new was recorded. The last
        epoch becomes the anchor of the next segment.
        """
        n = self.size
        if n < 2:
            return None
        d, P_s = smooth_closed_loop(self.P[:n], self.phi[:n], self.Pp[:n], self.u[:n])
        C1, v1, llh1, b1 = apply_deltas(self.C[1:n], self.v[1:n], self.llh[1:n], self.b[1:n], d[1:n])
        # terminal epoch stays bit-identical to the filtered one
        C1[-1], v1[-1], llh1[-1], b1[-1] = self.C[n - 1], self.v[n - 1], self.llh[n - 1], self.b[n - 1]
        out = (self.t[1:n].copy(), C1, v1, llh1, b1, P_s[1:n])
        self._reanchor(n - 1)
        return out

    def _reanchor(self, k: int) -> None:
        for arr in (self.t, self.C, self.v, self.llh, self.b, self.P):
            arr[0] = arr[k]
        self.u[0] = 0.0
        self.size = 1
