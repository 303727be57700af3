"""Normal-form SISO plants and the discrete matrices of their sampled model.

A plant is given directly in normal form::

    eta'    = f0(eta, xi)
    xi_i'   = xi_{i+1},                       i < rho
    xi_rho' = alpha(xi, eta) + (beta0 + delta_beta(xi, eta)) * u
    y       = xi_1

The full state vector is laid out as ``eta`` followed by ``xi``.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Callable, Sequence

import numpy as np

from .errors import InvalidArgument, ModelEvaluationError

Vec = Sequence[float]


def _zero_delta_beta(xi: Vec, eta: Vec) -> float:
    return 0.0


@dataclass(frozen=True)
class PlantModel:
    rho: int
    eta_dim: int
    f0: Callable[[Vec, Vec], Vec]
    alpha: Callable[[Vec, Vec], float]
    beta0: float
    delta_beta: Callable[[Vec, Vec], float] = _zero_delta_beta
    coupling: int = 0
    name: str = "custom"

    def __post_init__(self):
        if self.rho < 1:
            raise InvalidArgument(f"relative degree must be >= 1, got {self.rho}")
        if self.eta_dim < 0:
            raise InvalidArgument("eta_dim must be non-negative")
        if self.beta0 == 0 or not math.isfinite(self.beta0):
            raise InvalidArgument("beta0 must be finite and nonzero")

    @property
    def state_dim(self) -> int:
        return self.eta_dim + self.rho

    def split(self, x: Vec) -> tuple[Vec, Vec]:
        """Split a flat state into ``(eta, xi)``."""
        return x[:self.eta_dim], x[self.eta_dim:]

    def rhs(self, x: Vec, u: float, t: float = 0.0) -> list[float]:
        """Vector field on the flat state; the form the integrator consumes.

        No finiteness check here, the integrator does that once per substep.
        """
        ne = self.eta_dim
        eta = x[:ne]
        xi = x[ne:]
        d = list(self.f0(eta, xi))
        d.extend(xi[1:])
        d.append(self.alpha(xi, eta) + (self.beta0 + self.delta_beta(xi, eta)) * u)
        return d


@dataclass(frozen=True)
class FullState:
    eta: np.ndarray
    xi: np.ndarray
    t: float = 0.0

    @classmethod
    def from_flat(cls, p: PlantModel, x: Vec, t: float = 0.0) -> "FullState":
        x = np.asarray(x, dtype=float)
        return cls(eta=x[:p.eta_dim].copy(), xi=x[p.eta_dim:].copy(), t=t)

    def flat(self) -> np.ndarray:
        return np.concatenate([np.asarray(self.eta, float), np.asarray(self.xi, float)])


def _check_dims(p: PlantModel, s: FullState) -> None:
    if len(s.eta) != p.eta_dim or len(s.xi) != p.rho:
        raise InvalidArgument(
            f"state dims (eta={len(s.eta)}, xi={len(s.xi)}) do not match plant "
            f"(eta={p.eta_dim}, xi={p.rho})")


def derivative(p: PlantModel, s: FullState, u: float) -> np.ndarray:
    """Time derivative ``eta' ++ xi'`` of the plant at ``s`` under input ``u``."""
    _check_dims(p, s)
    d = np.array(p.rhs(list(s.flat()), float(u), s.t), dtype=float)
    if not np.all(np.isfinite(d)):
        raise ModelEvaluationError(f"non-finite derivative at t={s.t}: {d}")
    return d


def true_alpha(p: PlantModel, s: FullState) -> float:
    """Oracle value of alpha(xi, eta). Only for error metrics, never for control."""
    _check_dims(p, s)
    return float(p.alpha(list(s.xi), list(s.eta)))


def true_beta(p: PlantModel, s: FullState) -> float:
    """Oracle value of beta0 + delta_beta(xi, eta)."""
    _check_dims(p, s)
    return float(p.beta0 + p.delta_beta(list(s.xi), list(s.eta)))


def make_vdp_demo(delta: int = 1, perturbation_gain: float = 0.0) -> PlantModel:
    """Relative-degree-2 demo plant whose zero dynamics is a Van der Pol oscillator.

    ``delta`` switches the ``eta_1**2`` coupling into alpha on or off and
    ``perturbation_gain`` scales ``delta_beta = gain * sin(xi_1)``.
    """
    if delta not in (0, 1):
        raise InvalidArgument(f"delta must be 0 or 1, got {delta}")
    d = float(delta)
    g = float(perturbation_gain)
    sin = math.sin

    def f0(eta, xi):
        e1, e2 = eta[0], eta[1]
        return (e2, -e1 + 0.5 * (1.0 - e1 * e1) * e2 + xi[0])

    def alpha(xi, eta):
        return -sin(xi[0]) + 2.0 * xi[1] + d * eta[0] * eta[0]

    if g == 0.0:
        delta_beta = _zero_delta_beta
    else:
        def delta_beta(xi, eta):
            return g * sin(xi[0])

    return PlantModel(rho=2, eta_dim=2, f0=f0, alpha=alpha, beta0=2.0,
                      delta_beta=delta_beta, coupling=int(delta),
                      name=f"vdp(delta={delta}, gain={g:g})")


@dataclass(frozen=True)
class ExtendedDiscreteModel:
    """Sampled integrator chain augmented with alpha as a constant state.

    ``Abar`` is ``(rho+1) x (rho+1)``; ``Bbar`` is a length ``rho+1`` vector;
    ``Cbar`` selects the first component. ``A``/``B`` are the ``rho``-sized
    blocks used by the plain (non-extended) sampled chain.
    """
    Abar: np.ndarray
    Bbar: np.ndarray
    Cbar: np.ndarray
    T: float
    rho: int

    @property
    def A(self) -> np.ndarray:
        return self.Abar[:self.rho, :self.rho]

    @property
    def B(self) -> np.ndarray:
        return self.Bbar[:self.rho]

    @property
    def dim(self) -> int:
        return self.rho + 1


def _chain_matrices(rho: int, T: float) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
    # no sign check: Abar(-T) is the exact inverse of Abar(T)
    n = rho + 1
    Abar = np.zeros((n, n))
    for i in range(n):
        for j in range(i, n):
            Abar[i, j] = T ** (j - i) / math.factorial(j - i)
    Bbar = np.zeros(n)
    for i in range(rho):
        Bbar[i] = T ** (rho - i) / math.factorial(rho - i)
    Cbar = np.zeros(n)
    Cbar[0] = 1.0
    return Abar, Bbar, Cbar


def build_extended_model(rho: int, T: float) -> ExtendedDiscreteModel:
    """Taylor-series matrices of the extended sampled chain.

    ``Abar[i, j] = T**(j-i) / (j-i)!`` for ``j >= i`` and
    ``Bbar[i] = T**(rho-i) / (rho-i)!`` for ``i < rho`` (0-based), last entry 0.
    """
    if rho < 1:
        raise InvalidArgument(f"rho must be >= 1, got {rho}")
    if not (T > 0 and math.isfinite(T)):
        raise InvalidArgument(f"sampling time must be positive, got {T}")
    Abar, Bbar, Cbar = _chain_matrices(rho, float(T))
    return ExtendedDiscreteModel(Abar=Abar, Bbar=Bbar, Cbar=Cbar, T=float(T), rho=rho)
