"""Feedback-linearizing control law, gain design and the excitation input."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import InvalidArgument


def chain_matrices(rho: int) -> tuple[np.ndarray, np.ndarray]:
    """Continuous integrator chain ``(A1, B1)``: superdiagonal shift and last unit vector."""
    A1 = np.eye(rho, k=1)
    B1 = np.zeros((rho, 1))
    B1[-1, 0] = 1.0
    return A1, B1


def design_gain(rho: int, poles) -> np.ndarray:
    """Gain ``K`` placing the eigenvalues of ``A1 + B1 K`` at ``poles``.

    For the chain the closed-loop polynomial is
    ``s**rho - K[rho-1] s**(rho-1) - ... - K[0]``, so ``K`` follows from
    matching coefficients with ``prod(s - p)``.

    >>> design_gain(3, [-1, -2, -3])
    array([ -6., -11.,  -6.])
    """
    p = np.atleast_1d(np.asarray(poles, dtype=complex))
    if rho < 1 or len(p) != rho:
        raise InvalidArgument(f"need exactly rho={rho} poles, got {len(p)}")
    if not np.all(p.real < 0):
        raise InvalidArgument(f"requested poles are not all in the open left half-plane: {p}")
    if not np.allclose(np.sort_complex(p), np.sort_complex(p.conj())):
        raise InvalidArgument("complex poles must come in conjugate pairs")
    coeffs = np.poly(p)
    if np.max(np.abs(coeffs.imag)) > 1e-9 * np.max(np.abs(coeffs)):
        raise InvalidArgument("pole set does not give a real polynomial")
    return -coeffs.real[1:][::-1].copy()


def closed_loop_poles(K) -> np.ndarray:
    K = np.asarray(K, dtype=float).ravel()
    A1, B1 = chain_matrices(len(K))
    return np.linalg.eigvals(A1 + B1 @ K[None, :])


def is_hurwitz(K) -> bool:
    return bool(np.all(closed_loop_poles(K).real < 0))


def control(xi_hat, alpha_hat: float, beta_hat: float, K) -> float:
    """``u = (-alpha_hat + K . xi_hat) / beta_hat``."""
    if beta_hat == 0:
        raise InvalidArgument("beta_hat must be nonzero")
    return float((-alpha_hat + np.dot(K, xi_hat)) / beta_hat)


@dataclass(frozen=True)
class ExcitationConfig:
    length_l: int = 8
    amplitude: float = 1.0
    seed: int = 0

    def __post_init__(self):
        if self.length_l < 1:
            raise InvalidArgument("length_l must be positive")
        # zero amplitude is allowed so the PE gate can reject it downstream
        if not self.amplitude >= 0:
            raise InvalidArgument(f"amplitude must be >= 0, got {self.amplitude}")

    def batch_length(self, rho: int) -> int:
        return self.length_l + rho + 1

    def make_rng(self) -> np.random.Generator:
        return np.random.default_rng(self.seed)


def excitation_input(cfg: ExcitationConfig, k: int, rng: np.random.Generator,
                     rho: int | None = None) -> float:
    """Scaled standard-normal draw for step ``k`` of the excitation batch.

    The value depends only on the generator's state, so drawing steps in
    order from a generator seeded with ``cfg.seed`` is reproducible.
    """
    if k < 0 or (rho is not None and k >= cfg.batch_length(rho)):
        raise InvalidArgument(f"step {k} is outside the excitation phase")
    return float(cfg.amplitude * rng.standard_normal())
