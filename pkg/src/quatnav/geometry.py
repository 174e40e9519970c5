"""Quaternion, rotation-matrix and rotation-vector algebra.

Quaternions are stored as ``[w, x, y, z]`` (scalar first). Every function that
returns a quaternion returns it unit-norm and sign-canonical: ``w >= 0``, and
when ``w == 0`` the first nonzero vector component is positive. All functions
broadcast over leading axes, so a ``(N, 4)`` array is a batch of N quaternions.
"""

from __future__ import annotations

import numpy as np
from numpy.typing import ArrayLike, NDArray
from scipy.linalg import lapack

from . import _kernels as _k
from .errors import NotPositiveDefiniteError, PreconditionError, QuaternionMeanAmbiguityError

Array = NDArray[np.float64]

Q_IDENTITY = np.array([1.0, 0.0, 0.0, 0.0])

JITTER_SCALE = 1e-9
JITTER_DOUBLINGS = 3

_SMALL_ANGLE = _k.SMALL_ANGLE
_LOG_2PI = np.log(2.0 * np.pi)


def skew(x: ArrayLike) -> Array:
    """Map a 3-vector to its cross-product matrix ``[x]x``."""
    x = np.asarray(x, dtype=float)
    out = np.zeros(x.shape[:-1] + (3, 3))
    out[..., 0, 1] = -x[..., 2]
    out[..., 0, 2] = x[..., 1]
    out[..., 1, 0] = x[..., 2]
    out[..., 1, 2] = -x[..., 0]
    out[..., 2, 0] = -x[..., 1]
    out[..., 2, 1] = x[..., 0]
    return out


def vex(M: ArrayLike, tol: float = 1e-9) -> Array:
    """Inverse of :func:`skew`. Raises if ``M`` is not skew-symmetric within ``tol``."""
    M = np.asarray(M, dtype=float)
    asym = np.max(np.abs(M + np.swapaxes(M, -1, -2)), initial=0.0)
    if asym > tol:
        raise PreconditionError(f"vex needs a skew-symmetric matrix (|M + M^T| = {asym:.3e})")
    return np.stack([M[..., 2, 1], M[..., 0, 2], M[..., 1, 0]], axis=-1)


def pa(D: ArrayLike) -> Array:
    """Anti-symmetric projection ``(D - D^T) / 2``."""
    D = np.asarray(D, dtype=float)
    return 0.5 * (D - np.swapaxes(D, -1, -2))


def _rowwise(kernel, tail: tuple[int, ...], *args, extra=()) -> Array:
    """Broadcast the leading axes of ``args``, run a row kernel, restore the shape."""
    arrays = [np.asarray(a, dtype=float) for a in args]
    lead = np.broadcast_shapes(*(a.shape[:-1] for a in arrays))
    flat = [np.ascontiguousarray(np.broadcast_to(a, lead + a.shape[-1:])).reshape(-1, a.shape[-1])
            for a in arrays]
    return kernel(*flat, *extra).reshape(lead + tail)


def canonicalize(q: ArrayLike) -> Array:
    """Normalize and flip sign so that ``w >= 0`` (tie: first nonzero component positive)."""
    return _rowwise(_k.canonicalize, (4,), q)


def quat_product(q1: ArrayLike, q2: ArrayLike) -> Array:
    """Hamilton product ``q1 (x) q2 = [w1 w2 - v1.v2, w1 v2 + w2 v1 + v1 x v2]``."""
    return _rowwise(_k.product, (4,), q1, q2)


def quat_inverse(q: ArrayLike) -> Array:
    return _rowwise(_k.inverse, (4,), q)


def quat_to_rotmat(q: ArrayLike) -> Array:
    """Rotation matrix ``(w^2 - |v|^2) I + 2 v v^T + 2 w [v]x`` (body to world)."""
    return _rowwise(_k.to_rotmat, (3, 3), q)


def rotvec_to_quat(r: ArrayLike) -> Array:
    """``[cos(a/2), sin(a/2) v]`` for ``r = a v``."""
    return _rowwise(_k.from_rotvec, (4,), r)


def quat_to_rotvec(q: ArrayLike) -> Array:
    """Rotation vector of the shorter rotation encoded by ``q``; norm lies in ``[0, pi]``.

    The angle is ``2 atan2(|v|, w)`` on the sign-canonical quaternion, which stays
    well conditioned at both zero and pi.
    """
    return _rowwise(_k.to_rotvec, (3,), q)


def rotvec_to_rotmat(r: ArrayLike) -> Array:
    """Rodrigues formula ``exp([r]x)``."""
    r = np.asarray(r, dtype=float)
    angle = np.linalg.norm(r, axis=-1)[..., None, None]
    small = angle < _SMALL_ANGLE
    safe = np.where(small, 1.0, angle)
    a = np.where(small, 1.0 - angle**2 / 6.0, np.sin(safe) / safe)
    b = np.where(small, 0.5 - angle**2 / 24.0, (1.0 - np.cos(safe)) / safe**2)
    K = skew(r)
    return np.eye(3) + a * K + b * (K @ K)


def boxminus_qq(q1: ArrayLike, q2: ArrayLike) -> Array:
    """``q1 - q2`` as the rotation vector of ``q1 (x) q2^-1``."""
    return _rowwise(_k.boxminus_qq, (3,), q1, q2)


def boxplus(q: ArrayLike, r: ArrayLike) -> Array:
    """``q + r`` as ``q_r(r) (x) q`` (perturbation expressed in the world frame)."""
    return _rowwise(_k.boxplus, (4,), q, r)


def boxminus_qr(q: ArrayLike, r: ArrayLike) -> Array:
    """``q - r`` as ``q_r(r)^-1 (x) q``."""
    return _rowwise(_k.boxminus_qr, (4,), q, r)


def quat_weighted_mean(quats: ArrayLike, weights: ArrayLike, gap_tol: float = 1e-12) -> Array:
    """Weighted quaternion mean via the dominant eigenvector of ``sum s_i q_i q_i^T``.

    ``quats`` has shape ``(..., n, 4)`` and ``weights`` shape ``(..., n)`` (or
    ``(n,)`` shared across the batch). The eigenvector of the eigenvalue with the
    largest magnitude is returned. If the two largest magnitudes are within
    ``gap_tol`` (relative to the largest) the mean is ambiguous and
    :class:`QuaternionMeanAmbiguityError` is raised.
    """
    quats = np.asarray(quats, dtype=float)
    weights = np.asarray(weights, dtype=float)
    if quats.shape[-2] == 0:
        raise PreconditionError("quat_weighted_mean needs at least one quaternion")
    if weights.shape[-1] != quats.shape[-2]:
        raise PreconditionError("quaternion and weight counts differ")
    D = np.swapaxes(quats * weights[..., None], -1, -2) @ quats
    eigval, eigvec = np.linalg.eigh(D)
    mag = np.abs(eigval)
    order = np.argsort(mag, axis=-1)
    top = np.take_along_axis(mag, order[..., -1:], axis=-1)[..., 0]
    second = np.take_along_axis(mag, order[..., -2:-1], axis=-1)[..., 0]
    gap = top - second
    bad = gap <= gap_tol * np.maximum(top, np.finfo(float).tiny)
    if np.any(bad):
        raise QuaternionMeanAmbiguityError(float(np.min(gap)))
    idx = order[..., -1]
    vec = np.take_along_axis(eigvec, idx[..., None, None], axis=-1)[..., 0]
    return canonicalize(vec)


def cholesky(P: ArrayLike) -> Array:
    """Lower Cholesky factor with the shared jitter policy.

    The input is symmetrized first. If factorization fails, ``1e-9 * tr(P)/n * I``
    is added and the attempt repeated, doubling the jitter up to three times.
    Works on a single matrix or a stack of matrices.
    """
    P = np.asarray(P, dtype=float)
    P = 0.5 * (P + np.swapaxes(P, -1, -2))
    try:
        L = np.linalg.cholesky(P)
        if np.all(np.isfinite(L)):
            return L
    except np.linalg.LinAlgError:
        pass
    if P.ndim == 2:
        return _cholesky_jittered(P, None)
    out = np.empty_like(P)
    for idx in np.ndindex(P.shape[:-2]):
        out[idx] = _cholesky_jittered(P[idx], idx)
    return out


def _cholesky_jittered(P: Array, index: tuple[int, ...] | None) -> Array:
    n = P.shape[-1]
    c, info = lapack.dpotrf(P, lower=1, clean=1)
    if info == 0:
        return c
    scale = np.trace(P) / n
    if not np.isfinite(scale) or scale <= 0.0:
        scale = 1e-12
    jitter = JITTER_SCALE * scale
    for _ in range(JITTER_DOUBLINGS + 1):
        c, info = lapack.dpotrf(P + jitter * np.eye(n), lower=1, clean=1)
        if info == 0:
            return c
        jitter *= 2.0
    if info < 0:
        raise NotPositiveDefiniteError(0, index, "invalid matrix passed to Cholesky")
    raise NotPositiveDefiniteError(info - 1, index)


def gaussian_logpdf(a: ArrayLike, mean: ArrayLike, cov: ArrayLike) -> Array:
    """Log of the multivariate normal density ``N(a | mean, cov)``; broadcasts over batches."""
    d = np.asarray(a, dtype=float) - np.asarray(mean, dtype=float)
    L = cholesky(cov)
    n = L.shape[-1]
    d = np.broadcast_to(d, L.shape[:-2] + (n,)) if d.ndim < L.ndim - 1 else d
    y = np.linalg.solve(L, d[..., None])[..., 0]
    logdet = 2.0 * np.sum(np.log(np.diagonal(L, axis1=-2, axis2=-1)), axis=-1)
    return -0.5 * (np.sum(y * y, axis=-1) + logdet + n * _LOG_2PI)
