"""Row-wise compiled quaternion kernels behind :mod:`quatnav.geometry`.

Each public kernel takes 2-D C-contiguous arrays (one quaternion / vector per
row) and returns a new array. Broadcasting and reshaping live in the geometry
wrappers.
"""

from __future__ import annotations

import math

import numpy as np
from numba import njit

SMALL_ANGLE = 1e-4


@njit(cache=True)
def _canon(w, x, y, z):
    n = math.sqrt(w * w + x * x + y * y + z * z)
    w, x, y, z = w / n, x / n, y / n, z / n
    if w != 0.0:
        lead = w
    elif x != 0.0:
        lead = x
    elif y != 0.0:
        lead = y
    else:
        lead = z
    if lead < 0.0:
        return -w, -x, -y, -z
    return w, x, y, z


@njit(cache=True)
def _mul(aw, ax, ay, az, bw, bx, by, bz):
    # [aw bw - av.bv, aw bv + bw av + av x bv]
    w = aw * bw - (ax * bx + ay * by + az * bz)
    x = aw * bx + bw * ax + (ay * bz - az * by)
    y = aw * by + bw * ay + (az * bx - ax * bz)
    z = aw * bz + bw * az + (ax * by - ay * bx)
    return _canon(w, x, y, z)


@njit(cache=True)
def _from_rotvec(r0, r1, r2):
    angle = math.sqrt(r0 * r0 + r1 * r1 + r2 * r2)
    if angle < SMALL_ANGLE:
        coef = 0.5 - angle * angle / 48.0
    else:
        coef = math.sin(0.5 * angle) / angle
    return _canon(math.cos(0.5 * angle), coef * r0, coef * r1, coef * r2)


@njit(cache=True)
def _to_rotvec(w, x, y, z):
    w, x, y, z = _canon(w, x, y, z)
    n = math.sqrt(x * x + y * y + z * z)
    if n < SMALL_ANGLE:
        ratio = 2.0 / w * (1.0 - n * n / (3.0 * w * w))
    else:
        ratio = 2.0 * math.atan2(n, w) / n
    return ratio * x, ratio * y, ratio * z


@njit(cache=True)
def canonicalize(Q):
    out = np.empty_like(Q)
    for i in range(Q.shape[0]):
        out[i, 0], out[i, 1], out[i, 2], out[i, 3] = _canon(Q[i, 0], Q[i, 1], Q[i, 2], Q[i, 3])
    return out


@njit(cache=True)
def product(A, B):
    out = np.empty_like(A)
    for i in range(A.shape[0]):
        out[i, 0], out[i, 1], out[i, 2], out[i, 3] = _mul(
            A[i, 0], A[i, 1], A[i, 2], A[i, 3], B[i, 0], B[i, 1], B[i, 2], B[i, 3])
    return out


@njit(cache=True)
def inverse(Q):
    out = np.empty_like(Q)
    for i in range(Q.shape[0]):
        out[i, 0], out[i, 1], out[i, 2], out[i, 3] = _canon(Q[i, 0], -Q[i, 1], -Q[i, 2], -Q[i, 3])
    return out


@njit(cache=True)
def from_rotvec(R):
    out = np.empty((R.shape[0], 4))
    for i in range(R.shape[0]):
        out[i, 0], out[i, 1], out[i, 2], out[i, 3] = _from_rotvec(R[i, 0], R[i, 1], R[i, 2])
    return out


@njit(cache=True)
def to_rotvec(Q):
    out = np.empty((Q.shape[0], 3))
    for i in range(Q.shape[0]):
        out[i, 0], out[i, 1], out[i, 2] = _to_rotvec(Q[i, 0], Q[i, 1], Q[i, 2], Q[i, 3])
    return out


@njit(cache=True)
def to_rotmat(Q):
    out = np.empty((Q.shape[0], 3, 3))
    for i in range(Q.shape[0]):
        w, x, y, z = Q[i, 0], Q[i, 1], Q[i, 2], Q[i, 3]
        d = w * w - (x * x + y * y + z * z)
        out[i, 0, 0] = d + 2.0 * x * x
        out[i, 1, 1] = d + 2.0 * y * y
        out[i, 2, 2] = d + 2.0 * z * z
        out[i, 0, 1] = 2.0 * x * y - 2.0 * w * z
        out[i, 1, 0] = 2.0 * x * y + 2.0 * w * z
        out[i, 0, 2] = 2.0 * x * z + 2.0 * w * y
        out[i, 2, 0] = 2.0 * x * z - 2.0 * w * y
        out[i, 1, 2] = 2.0 * y * z - 2.0 * w * x
        out[i, 2, 1] = 2.0 * y * z + 2.0 * w * x
    return out


@njit(cache=True)
def boxplus(Q, R):
    """``q_r(r) (x) q`` row by row."""
    out = np.empty_like(Q)
    for i in range(Q.shape[0]):
        rw, rx, ry, rz = _from_rotvec(R[i, 0], R[i, 1], R[i, 2])
        out[i, 0], out[i, 1], out[i, 2], out[i, 3] = _mul(
            rw, rx, ry, rz, Q[i, 0], Q[i, 1], Q[i, 2], Q[i, 3])
    return out


@njit(cache=True)
def boxminus_qr(Q, R):
    """``q_r(r)^-1 (x) q`` row by row."""
    out = np.empty_like(Q)
    for i in range(Q.shape[0]):
        rw, rx, ry, rz = _from_rotvec(R[i, 0], R[i, 1], R[i, 2])
        out[i, 0], out[i, 1], out[i, 2], out[i, 3] = _mul(
            rw, -rx, -ry, -rz, Q[i, 0], Q[i, 1], Q[i, 2], Q[i, 3])
    return out


@njit(cache=True)
def boxminus_qq(A, B):
    """Rotation vector of ``a (x) b^-1`` row by row."""
    out = np.empty((A.shape[0], 3))
    for i in range(A.shape[0]):
        w, x, y, z = _mul(A[i, 0], A[i, 1], A[i, 2], A[i, 3], B[i, 0], -B[i, 1], -B[i, 2], -B[i, 3])
        out[i, 0], out[i, 1], out[i, 2] = _to_rotvec(w, x, y, z)
    return out


@njit(cache=True)
def attitude_transition(Q, W, dT):
    """``cos(|w| dT/2) q + sin(|w| dT/2)/|w| Gamma(w) q`` row by row."""
    out = np.empty_like(Q)
    for i in range(Q.shape[0]):
        qw, qx, qy, qz = Q[i, 0], Q[i, 1], Q[i, 2], Q[i, 3]
        wx, wy, wz = W[i, 0], W[i, 1], W[i, 2]
        rate = math.sqrt(wx * wx + wy * wy + wz * wz)
        half = 0.5 * rate * dT
        if rate * dT < 1e-8:
            s = 0.5 * dT * (1.0 - half * half / 6.0)
            c = 1.0 - 0.5 * half * half
        else:
            s = math.sin(half) / rate
            c = math.cos(half)
        # Gamma(w) q = [-w.v, qw w - w x v]
        gw = -(wx * qx + wy * qy + wz * qz)
        gx = qw * wx - (wy * qz - wz * qy)
        gy = qw * wy - (wz * qx - wx * qz)
        gz = qw * wz - (wx * qy - wy * qx)
        out[i, 0], out[i, 1], out[i, 2], out[i, 3] = _canon(
            c * qw + s * gw, c * qx + s * gx, c * qy + s * gy, c * qz + s * gz)
    return out
