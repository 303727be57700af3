"""Dense numerical kernels: Hankel matrices, rank, pseudo-inverse and a
fixed-step RK4 integrator with a zero-order-held input.

Matrices are plain 2-D ``numpy`` arrays. Signals are arrays of shape
``(length,)`` for scalar samples or ``(length, n)`` for vector samples.
"""

from __future__ import annotations

import math
from typing import Callable, Sequence

import numpy as np

from .errors import IntegrationDiverged, InvalidArgument

DEFAULT_RANK_TOL = 1e-10

VectorField = Callable[[Sequence[float], float, float], Sequence[float]]


def _as_signal(signal) -> np.ndarray:
    s = np.asarray(signal, dtype=float)
    if s.ndim == 1:
        s = s[:, None]
    if s.ndim != 2:
        raise InvalidArgument(f"signal must be 1-D or 2-D, got shape {s.shape}")
    if not np.all(np.isfinite(s)):
        raise InvalidArgument("signal contains non-finite samples")
    return s


def build_hankel(signal, depth: int) -> np.ndarray:
    """Block Hankel matrix of ``signal`` with ``depth`` block rows.

    Column ``j`` stacks samples ``j, ..., j + depth - 1``; the result has
    ``n * depth`` rows and ``len(signal) - depth + 1`` columns.

    >>> build_hankel([1, 2, 3, 4], 2)
    array([[1., 2., 3.],
           [2., 3., 4.]])
    """
    s = _as_signal(signal)
    length, n = s.shape
    if depth < 1:
        raise InvalidArgument(f"depth must be >= 1, got {depth}")
    if length < depth:
        raise InvalidArgument(f"signal of length {length} is shorter than depth {depth}")
    cols = length - depth + 1
    H = np.empty((n * depth, cols))
    for i in range(depth):
        H[i * n:(i + 1) * n, :] = s[i:i + cols, :].T
    return H


def numeric_rank(m, tol: float = DEFAULT_RANK_TOL) -> int:
    """Number of singular values above ``tol * sigma_max``."""
    a = np.asarray(m, dtype=float)
    if a.ndim != 2 or a.size == 0:
        raise InvalidArgument("numeric_rank needs a non-empty 2-D matrix")
    if tol <= 0:
        raise InvalidArgument(f"tol must be positive, got {tol}")
    sv = np.linalg.svd(a, compute_uv=False)
    if sv[0] == 0.0:
        return 0
    return int(np.count_nonzero(sv > tol * sv[0]))


def check_pe(signal, order: int, tol: float = DEFAULT_RANK_TOL) -> bool:
    """True if ``signal`` is persistently exciting of the given order.

    The depth-``order`` Hankel matrix must have full row rank ``n * order``.
    Signals shorter than ``(n + 1) * order - 1`` cannot satisfy the condition
    and are rejected with :class:`InvalidArgument` rather than ``False``.
    """
    s = _as_signal(signal)
    length, n = s.shape
    needed = (n + 1) * order - 1
    if length < needed:
        raise InvalidArgument(
            f"PE of order {order} needs at least {needed} samples, got {length}")
    return numeric_rank(build_hankel(s, order), tol) == n * order


def pinv(m, rcond: float = 1e-13) -> np.ndarray:
    """Moore-Penrose pseudo-inverse via the SVD.

    Singular values below ``rcond * sigma_max`` are treated as zero so a
    nearly rank-deficient input never yields non-finite entries.
    """
    a = np.asarray(m, dtype=float)
    if a.ndim != 2:
        raise InvalidArgument(f"pinv needs a 2-D matrix, got shape {a.shape}")
    if not np.all(np.isfinite(a)):
        raise InvalidArgument("pinv input contains non-finite entries")
    if a.size == 0:
        return np.zeros((a.shape[1], a.shape[0]))
    U, s, Vt = np.linalg.svd(a, full_matrices=False)
    cutoff = rcond * (s[0] if s.size else 0.0)
    s_inv = np.zeros_like(s)
    keep = s > cutoff
    s_inv[keep] = 1.0 / s[keep]
    return (Vt.T * s_inv) @ U.T


def default_substeps(dt: float, max_step: float = 1e-4) -> int:
    # the small epsilon keeps 0.02 / 1e-4 from rounding up to 201
    return max(1, math.ceil(dt / max_step - 1e-9))


def rk4_hold_step(deriv: VectorField, state, u: float, dt: float,
                  substeps: int = 1, t0: float = 0.0) -> np.ndarray:
    """Advance ``state`` by ``dt`` with classical RK4, holding ``u`` constant.

    ``deriv(x, u, t)`` must accept a sequence of floats and return one of
    the same length. The interval is split into ``substeps`` equal steps.
    Works on plain Python floats internally; the state dimension is tiny and
    per-call numpy overhead would dominate.
    """
    if not dt > 0:
        raise InvalidArgument(f"dt must be positive, got {dt}")
    if substeps < 1:
        raise InvalidArgument(f"substeps must be >= 1, got {substeps}")
    x = [float(v) for v in state]
    h = dt / substeps
    hh = 0.5 * h
    h6 = h / 6.0
    isfinite = math.isfinite
    for i in range(substeps):
        t = t0 + i * h
        try:
            k1 = deriv(x, u, t)
            k2 = deriv([a + hh * b for a, b in zip(x, k1)], u, t + hh)
            k3 = deriv([a + hh * b for a, b in zip(x, k2)], u, t + hh)
            k4 = deriv([a + h * b for a, b in zip(x, k3)], u, t + h)
            x_new = [a + h6 * (b + 2.0 * (c + d) + e)
                     for a, b, c, d, e in zip(x, k1, k2, k3, k4)]
        except (OverflowError, ValueError, ZeroDivisionError) as exc:
            raise IntegrationDiverged(
                f"integration failed at t={t:.6g}: {exc}", time=t,
                state=np.array(x)) from exc
        if not all(isfinite(v) for v in x_new):
            raise IntegrationDiverged(
                f"non-finite state at t={t:.6g}", time=t, state=np.array(x))
        x = x_new
    return np.array(x)
