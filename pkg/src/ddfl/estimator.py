"""Two-part data-driven estimator.

1. ``estimate_beta``: one-shot estimate of the constant input gain from a
   persistently exciting batch, via the data representation ``Z1 @ pinv(Z0)``.
2. ``reconstruct``: per-step reconstruction of the extended state
   ``(xi_1, ..., xi_rho, alpha)`` from the last ``m`` outputs and ``m - 1``
   inputs, inverting the extended sampled model backwards in time.

Time indexing: the excitation batch occupies ``k = 0 .. l + rho`` and the
control phase starts at ``k = l + rho + 1``.
"""

from __future__ import annotations

import dataclasses
import math
from dataclasses import dataclass

import numpy as np

from .errors import InvalidArgument, NotReady, PEViolation
from .numerics import build_hankel, check_pe, numeric_rank, pinv
from .plant import ExtendedDiscreteModel

# The output block of Z0 loses conditioning like T**(rho+2): at T = 2.5 ms the
# smallest relative singular value is ~1e-11, still far above roundoff.
Z0_RANK_TOL = 1e-13


@dataclass(frozen=True)
class BetaEstimate:
    beta_hat: float
    A_cal: np.ndarray
    rank_z0: int


@dataclass(frozen=True)
class ExtendedStateEstimate:
    xi_hat: np.ndarray
    alpha_hat: float
    k: int

    @property
    def extended(self) -> np.ndarray:
        return np.append(self.xi_hat, self.alpha_hat)


def batch_length(rho: int, l: int) -> int:
    """Samples of each stream needed to build ``Z0`` and ``Z1``."""
    return l + rho + 1


def build_z_matrices(y, u, rho: int, l: int) -> tuple[np.ndarray, np.ndarray]:
    """Stacked output/input Hankel matrices ``Z0`` and their one-step shift ``Z1``.

    Each is ``(2 rho + 2) x l``: depth ``rho + 1`` Hankel of ``y`` on top of the
    same for ``u``. Only the first ``l + rho + 1`` samples are used.
    """
    y = np.asarray(y, dtype=float).ravel()
    u = np.asarray(u, dtype=float).ravel()
    if rho < 1:
        raise InvalidArgument(f"rho must be >= 1, got {rho}")
    if l < 2 * rho + 2:
        raise InvalidArgument(f"l must be >= 2*rho+2 = {2 * rho + 2}, got {l}")
    need = batch_length(rho, l)
    if len(y) < need or len(u) < need:
        raise InvalidArgument(
            f"need {need} samples of y and u, got {len(y)} and {len(u)}")
    y = y[:need]
    u = u[:need]
    depth = rho + 1
    Z0 = np.vstack([build_hankel(y[:-1], depth), build_hankel(u[:-1], depth)])
    Z1 = np.vstack([build_hankel(y[1:], depth), build_hankel(u[1:], depth)])
    return Z0, Z1


def estimate_beta(z0, z1, rho: int, T: float,
                  rank_tol: float = Z0_RANK_TOL) -> BetaEstimate:
    """Input gain from the entry of ``Z1 pinv(Z0)`` that maps the newest input
    to the next output, rescaled by ``rho! / T**rho``.

    Raises :class:`PEViolation` if ``Z0`` is not of full row rank ``2 rho + 2``.
    """
    z0 = np.asarray(z0, dtype=float)
    z1 = np.asarray(z1, dtype=float)
    if not T > 0:
        raise InvalidArgument(f"sampling time must be positive, got {T}")
    need = 2 * rho + 2
    if z0.shape[0] != need or z1.shape != z0.shape:
        raise InvalidArgument(
            f"Z0/Z1 must both be {need} x l, got {z0.shape} and {z1.shape}")
    rank = numeric_rank(z0, rank_tol)
    if rank != need:
        raise PEViolation(
            f"rank(Z0) = {rank}, need {need}: excitation is not persistently exciting",
            rank=rank, required=need)
    A_cal = z1 @ pinv(z0)
    # last output row (rho) crossed with last input column (2 rho + 1), 0-based
    beta_hat = float(A_cal[rho, 2 * rho + 1] * math.factorial(rho) / T ** rho)
    if not math.isfinite(beta_hat) or beta_hat == 0.0:
        raise PEViolation(f"degenerate beta estimate {beta_hat}", rank=rank, required=need)
    return BetaEstimate(beta_hat=beta_hat, A_cal=A_cal, rank_z0=rank)


def estimate_beta_from_data(y, u, rho: int, l: int, T: float,
                            rank_tol: float = Z0_RANK_TOL) -> BetaEstimate:
    """Gate the batch on persistency of excitation, then :func:`estimate_beta`.

    The input must be persistently exciting of order ``2 rho + 2`` whenever the
    batch is long enough for that test to be defined; the rank of ``Z0`` is
    checked in every case.
    """
    order = 2 * rho + 2
    u_batch = np.asarray(u, dtype=float).ravel()[:batch_length(rho, l)]
    if len(u_batch) >= 2 * order - 1 and not check_pe(u_batch, order):
        raise PEViolation(f"excitation input is not persistently exciting of order {order}",
                          required=order)
    z0, z1 = build_z_matrices(y, u, rho, l)
    return estimate_beta(z0, z1, rho, T, rank_tol)


def build_reconstruction_matrices(model: ExtendedDiscreteModel,
                                  m: int) -> tuple[np.ndarray, np.ndarray]:
    """Observability matrix ``O`` and input-effect matrix ``M`` for a window of ``m``.

    Row ``i`` of ``O`` is ``C Abar^-i``. ``M[i, j] = C Abar^-(i-j+1) Bbar`` for
    ``1 <= j <= i`` (0-based); first row and first column are zero, so
    ``Y(k) = O xi_bar(k) - beta M U(k-1)``.

    Any ``m >= 1`` is accepted here; ``O`` only has full column rank for
    ``m >= rho + 1``, which :func:`init_estimator` enforces.
    """
    if m < 1:
        raise InvalidArgument(f"window m must be >= 1, got {m}")
    A_inv = np.linalg.inv(model.Abar)
    rows = [model.Cbar.copy()]
    for _ in range(1, m):
        rows.append(rows[-1] @ A_inv)
    O = np.array(rows)
    # markov[d] = C Abar^-d Bbar
    markov = np.array([r @ model.Bbar for r in rows])
    M = np.zeros((m, m))
    for i in range(1, m):
        for j in range(1, i + 1):
            M[i, j] = markov[i - j + 1]
    return O, M


@dataclass(frozen=True)
class EstimatorState:
    """Rolling windows plus the frozen beta estimate.

    ``window_y`` holds ``y(k), y(k-1), ...`` and ``window_u`` holds
    ``u(k-1), u(k-2), ...``; both newest first.
    """
    model: ExtendedDiscreteModel
    beta: BetaEstimate
    O_mat: np.ndarray
    M_mat: np.ndarray
    m: int
    O_pinv: np.ndarray
    window_y: tuple[float, ...] = ()
    window_u: tuple[float, ...] = ()
    k: int = -1

    @property
    def ready(self) -> bool:
        return len(self.window_y) == self.m and len(self.window_u) == self.m - 1


def init_estimator(model: ExtendedDiscreteModel, beta: BetaEstimate, m: int) -> EstimatorState:
    if m < model.dim:
        raise InvalidArgument(f"window m must be >= rho+1 = {model.dim}, got {m}")
    O, M = build_reconstruction_matrices(model, m)
    if numeric_rank(O) != model.dim:
        raise InvalidArgument("observability matrix is rank deficient")
    return EstimatorState(model=model, beta=beta, O_mat=O, M_mat=M, m=m, O_pinv=pinv(O))


def push_sample(state: EstimatorState, y: float, u_prev: float | None = None) -> EstimatorState:
    """Append the newest output ``y(k)`` and the input ``u(k-1)`` applied before it.

    Pass ``u_prev=None`` only for the very first sample of a stream.
    """
    wy = (float(y),) + state.window_y[:state.m - 1]
    wu = state.window_u
    if u_prev is not None:
        wu = (float(u_prev),) + wu[:state.m - 2] if state.m > 1 else ()
    return dataclasses.replace(state, window_y=wy, window_u=wu, k=state.k + 1)


def reconstruct(state: EstimatorState, k: int | None = None) -> ExtendedStateEstimate:
    """Least-squares extended state ``pinv(O) (Y(k) + beta_hat M U(k-1))``."""
    if not state.ready:
        raise NotReady(
            f"window holds {len(state.window_y)}/{state.m} outputs and "
            f"{len(state.window_u)}/{state.m - 1} inputs")
    Y = np.array(state.window_y)
    U = np.array((0.0,) + state.window_u)
    xb = state.O_pinv @ (Y + state.beta.beta_hat * (state.M_mat @ U))
    rho = state.model.rho
    return ExtendedStateEstimate(xi_hat=xb[:rho], alpha_hat=float(xb[rho]),
                                 k=state.k if k is None else k)
