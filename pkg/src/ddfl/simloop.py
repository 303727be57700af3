"""Sampled-data closed loop: plant -> sampler -> estimator -> controller -> ZOH.

A run has two phases. During the excitation phase (``k < l + rho + 1``) the
input is seeded Gaussian noise and no estimates are produced. At
``k = l + rho + 1`` the input gain is estimated once from the batch; from
then on each step reconstructs the extended state from a rolling window and
applies the feedback-linearizing law.
"""

from __future__ import annotations

import dataclasses
import logging
import math
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass
from typing import Any, Sequence

import numpy as np

from .controller import ExcitationConfig, control, design_gain, excitation_input, is_hurwitz
from .errors import ConfigError, DDFLError, IntegrationDiverged, InvalidArgument
from .estimator import (Z0_RANK_TOL, batch_length, estimate_beta_from_data, init_estimator,
                        push_sample, reconstruct)
from .numerics import default_substeps, rk4_hold_step
from .plant import PlantModel, build_extended_model, make_vdp_demo

log = logging.getLogger(__name__)

MODES = ("closed_loop", "zero_dynamics")
NOISE_KINDS = ("uniform", "gaussian")


@dataclass(frozen=True)
class ExperimentConfig:
    """Every parameter of one run. JSON config files use these field names."""

    plant: str = "vdp"
    delta: int = 1
    perturbation_gain: float = 0.3
    T: float = 0.02
    horizon: float = 15.0
    eta0: tuple[float, ...] = (1.0, 0.0)
    xi0: tuple[float, ...] = (2.5, 0.0)
    l: int = 8
    m: int = 3
    K: tuple[float, ...] | None = (-20.0, -10.0)
    poles: tuple[complex, ...] | None = None
    amplitude: float = 1.0
    seed: int = 0
    substeps: int | None = None
    noise: float = 0.0
    noise_kind: str = "uniform"
    mode: str = "closed_loop"
    stop_after_beta: bool = False
    rank_tol: float = Z0_RANK_TOL
    transient_cut: float = 0.4
    tail_fraction: float = 0.2

    # -- construction helpers -------------------------------------------
    @classmethod
    def from_dict(cls, d: dict[str, Any]) -> "ExperimentConfig":
        names = {f.name for f in dataclasses.fields(cls)}
        unknown = set(d) - names
        if unknown:
            raise ConfigError(f"unknown config keys: {sorted(unknown)}")
        kw = dict(d)
        for key in ("eta0", "xi0", "K", "poles"):
            if kw.get(key) is not None:
                kw[key] = tuple(kw[key])
        if kw.get("poles") is not None:
            kw["poles"] = tuple(_parse_pole(p) for p in kw["poles"])
        return cls(**kw)

    def to_dict(self) -> dict[str, Any]:
        d = dataclasses.asdict(self)
        for key in ("eta0", "xi0", "K"):
            if d[key] is not None:
                d[key] = [float(v) for v in d[key]]
        if d["poles"] is not None:
            d["poles"] = [_format_pole(p) for p in d["poles"]]
        return d

    def resolved(self) -> "ExperimentConfig":
        """Copy with every default materialized (gain and substep count)."""
        self.validate()
        return dataclasses.replace(self, K=tuple(float(k) for k in self.gain()),
                                   substeps=self.n_substeps)

    # -- derived quantities ----------------------------------------------
    @property
    def rho(self) -> int:
        return 2

    @property
    def n_substeps(self) -> int:
        return self.substeps if self.substeps is not None else default_substeps(self.T)

    @property
    def excitation(self) -> ExcitationConfig:
        return ExcitationConfig(length_l=self.l, amplitude=self.amplitude, seed=self.seed)

    @property
    def n_excite(self) -> int:
        return batch_length(self.rho, self.l)

    @property
    def n_steps(self) -> int:
        if self.stop_after_beta:
            return self.n_excite
        return int(round(self.horizon / self.T))

    def gain(self) -> np.ndarray:
        if self.poles is not None:
            return design_gain(self.rho, self.poles)
        return np.asarray(self.K, dtype=float)

    def build_plant(self) -> PlantModel:
        return make_vdp_demo(self.delta, self.perturbation_gain)

    def validate(self) -> None:
        def bad(msg):
            raise ConfigError(msg)

        if self.plant != "vdp":
            bad(f"unknown plant {self.plant!r}; only 'vdp' is built in")
        if self.delta not in (0, 1):
            bad(f"delta must be 0 or 1, got {self.delta}")
        if not (isinstance(self.T, (int, float)) and math.isfinite(self.T) and self.T > 0):
            bad(f"T must be a positive number, got {self.T}")
        if not math.isfinite(self.perturbation_gain):
            bad("perturbation_gain must be finite")
        if len(self.eta0) != 2 or len(self.xi0) != self.rho:
            bad("eta0 and xi0 must both have length 2")
        if not all(math.isfinite(v) for v in (*self.eta0, *self.xi0)):
            bad("initial state must be finite")
        if self.l < 2 * self.rho + 2:
            bad(f"l must be >= 2*rho+2 = {2 * self.rho + 2}, got {self.l}")
        if self.m < self.rho + 1:
            bad(f"m must be >= rho+1 = {self.rho + 1}, got {self.m}")
        if self.m > self.n_excite:
            bad(f"m={self.m} exceeds the excitation batch of {self.n_excite} samples")
        if self.mode not in MODES:
            bad(f"mode must be one of {MODES}, got {self.mode!r}")
        if not (math.isfinite(self.horizon) and self.horizon > 0):
            bad(f"horizon must be positive, got {self.horizon}")
        if (self.mode == "closed_loop" and not self.stop_after_beta
                and self.n_steps < self.n_excite):
            bad(f"horizon {self.horizon} s is shorter than the excitation batch "
                f"({self.n_excite} steps of {self.T} s)")
        if self.K is None and self.poles is None:
            bad("either K or poles must be given")
        if self.poles is None:
            if len(self.K) != self.rho:
                bad(f"K must have {self.rho} entries")
            if not is_hurwitz(self.K):
                bad(f"K={list(self.K)} does not give a Hurwitz closed loop")
        else:
            try:
                design_gain(self.rho, self.poles)
            except InvalidArgument as exc:
                raise ConfigError(str(exc)) from exc
        if not (math.isfinite(self.amplitude) and self.amplitude >= 0):
            bad(f"amplitude must be >= 0, got {self.amplitude}")
        if self.substeps is not None and self.substeps < 1:
            bad("substeps must be >= 1")
        if not (math.isfinite(self.noise) and self.noise >= 0):
            bad(f"noise must be >= 0, got {self.noise}")
        if self.noise_kind not in NOISE_KINDS:
            bad(f"noise_kind must be one of {NOISE_KINDS}")
        if not self.rank_tol > 0:
            bad("rank_tol must be positive")
        for name in ("transient_cut", "tail_fraction"):
            v = getattr(self, name)
            if not 0 < v < 1:
                bad(f"{name} must lie in (0, 1), got {v}")


def _parse_pole(p) -> complex:
    if isinstance(p, (list, tuple)) and len(p) == 2:
        return complex(p[0], p[1])
    if isinstance(p, str):
        return complex(p.replace(" ", ""))
    return complex(p)


def _format_pole(p: complex):
    p = complex(p)
    return p.real if p.imag == 0 else [p.real, p.imag]


@dataclass
class IoLog:
    """Per-step record of one run. Row ``k`` is the sample at ``t = k T``.

    ``u[k]`` is the input held over ``[kT, (k+1)T)``. Estimates are NaN in the
    excitation phase.
    """
    k: np.ndarray
    t: np.ndarray
    phase: list[str]
    u: np.ndarray
    y: np.ndarray
    eta: np.ndarray
    xi: np.ndarray
    xi_hat: np.ndarray
    alpha_hat: np.ndarray
    beta_hat: float | None = None
    e_beta: float | None = None
    seed: int = 0

    def __len__(self) -> int:
        return len(self.k)

    @property
    def xi_norm(self) -> np.ndarray:
        return np.linalg.norm(self.xi, axis=1)

    @property
    def eta_norm(self) -> np.ndarray:
        return np.linalg.norm(self.eta, axis=1)


@dataclass(frozen=True)
class RunMetrics:
    beta_hat: float | None
    e_beta: float | None
    sup_exi: float | None
    xi_tail_norm: float
    xi_max: float
    c1_est: float
    c2_est: float
    seed: int
    transient_cut: float = 0.4
    tail_fraction: float = 0.2

    def to_dict(self) -> dict[str, Any]:
        return dataclasses.asdict(self)


def measure_eta_bounds(log: IoLog, transient_cut: float = 0.4) -> tuple[float, float]:
    """``(min, max)`` of ``||eta||`` after discarding the first ``transient_cut``
    fraction of the logged time span."""
    if len(log) == 0:
        raise InvalidArgument("empty log")
    t_end = log.t[-1]
    keep = log.t >= transient_cut * t_end
    if not np.any(keep):
        raise InvalidArgument(f"nothing left after cutting {transient_cut:.0%} of the log")
    n = log.eta_norm[keep]
    return float(n.min()), float(n.max())


def tail_mask(log: IoLog, tail_fraction: float = 0.2) -> np.ndarray:
    return log.t >= (1.0 - tail_fraction) * log.t[-1]


def _zero_dynamics_field(plant: PlantModel):
    ne = plant.eta_dim
    zeros = [0.0] * plant.rho

    def rhs(x, u, t):
        d = list(plant.f0(x[:ne], x[ne:]))
        d.extend(zeros)
        return d
    return rhs


def run_experiment(cfg: ExperimentConfig) -> tuple[IoLog, RunMetrics]:
    """Simulate one closed-loop run and compute its metrics.

    Deterministic for a fixed config: identical inputs give bitwise-identical
    logs. Raises :class:`PEViolation` if the excitation batch is not rich
    enough and :class:`IntegrationDiverged` if the plant state blows up.
    """
    cfg.validate()
    plant = cfg.build_plant()
    rho, ne = plant.rho, plant.eta_dim
    T = float(cfg.T)
    N = cfg.n_steps
    nb = cfg.n_excite
    sub = cfg.n_substeps
    K = cfg.gain()
    closed = cfg.mode == "closed_loop"
    rhs = plant.rhs if closed else _zero_dynamics_field(plant)

    exc = cfg.excitation
    exc_rng = exc.make_rng()
    noise_rng = np.random.default_rng([cfg.seed, 1])

    n = N + 1
    t = np.arange(n) * T
    u_log = np.zeros(n)
    y_log = np.zeros(n)
    states = np.zeros((n, plant.state_dim))
    xi_hat = np.full((n, rho), np.nan)
    alpha_hat = np.full(n, np.nan)
    phase: list[str] = []

    x = np.array([*cfg.eta0, *cfg.xi0], dtype=float)
    est = None
    beta = None
    sup_exi = 0.0 if closed else None

    for k in range(n):
        states[k] = x
        y = x[ne]
        if cfg.noise > 0:
            if cfg.noise_kind == "uniform":
                y += cfg.noise * noise_rng.uniform(-1.0, 1.0)
            else:
                y += cfg.noise * noise_rng.standard_normal()
        y_log[k] = y

        if not closed:
            u = 0.0
            phase.append("free")
        elif k < nb:
            u = excitation_input(exc, k, exc_rng, rho)
            phase.append("excite")
        else:
            if est is None:
                beta, est = _start_estimator(cfg, y_log, u_log, k)
            else:
                est = push_sample(est, y, u_log[k - 1])
            e = reconstruct(est, k)
            xi_hat[k] = e.xi_hat
            alpha_hat[k] = e.alpha_hat
            xi = x[ne:]
            true_ext = np.append(xi, plant.alpha(list(xi), list(x[:ne])))
            sup_exi = max(sup_exi, float(np.linalg.norm(true_ext - e.extended)))
            u = control(e.xi_hat, e.alpha_hat, beta.beta_hat, K)
            phase.append("control")
        u_log[k] = u

        if k < N:
            try:
                x = rk4_hold_step(rhs, x, u, T, sub, t0=k * T)
            except IntegrationDiverged as exc_:
                raise IntegrationDiverged(
                    f"plant diverged at t={exc_.time:.6g} s (step {k}, u={u:.4g}); "
                    f"last state {np.array2string(exc_.state, precision=4)}",
                    time=exc_.time, state=exc_.state) from exc_
            if closed and not math.isfinite(u):
                raise IntegrationDiverged(f"non-finite control at step {k}",
                                          time=k * T, state=x)

    beta_hat = beta.beta_hat if beta is not None else None
    e_beta = abs(plant.beta0 - beta_hat) if beta_hat is not None else None
    iolog = IoLog(k=np.arange(n), t=t, phase=phase, u=u_log, y=y_log,
                  eta=states[:, :ne], xi=states[:, ne:], xi_hat=xi_hat,
                  alpha_hat=alpha_hat, beta_hat=beta_hat, e_beta=e_beta, seed=cfg.seed)
    c1, c2 = measure_eta_bounds(iolog, cfg.transient_cut)
    xin = iolog.xi_norm
    metrics = RunMetrics(
        beta_hat=beta_hat, e_beta=e_beta,
        sup_exi=sup_exi if beta is not None else None,
        xi_tail_norm=float(xin[tail_mask(iolog, cfg.tail_fraction)].max()),
        xi_max=float(xin.max()), c1_est=c1, c2_est=c2, seed=cfg.seed,
        transient_cut=cfg.transient_cut, tail_fraction=cfg.tail_fraction)
    return iolog, metrics


def _start_estimator(cfg: ExperimentConfig, y_log: np.ndarray, u_log: np.ndarray, k: int):
    """Estimate beta from the batch ``0 .. k-1`` and fill the window up to ``k``."""
    rho = cfg.rho
    beta = estimate_beta_from_data(y_log[:k], u_log[:k], rho, cfg.l, cfg.T, cfg.rank_tol)
    log.debug("beta_hat=%.6g rank(Z0)=%d", beta.beta_hat, beta.rank_z0)
    est = init_estimator(build_extended_model(rho, cfg.T), beta, cfg.m)
    first = k - cfg.m + 1
    est = push_sample(est, y_log[first])
    for j in range(first + 1, k + 1):
        est = push_sample(est, y_log[j], u_log[j - 1])
    return beta, est


@dataclass(frozen=True)
class SweepRow:
    T: float
    e_beta: float
    sup_exi: float
    seed: int


def _sweep_one(cfg: ExperimentConfig) -> SweepRow:
    try:
        _, m = run_experiment(cfg)
    except DDFLError as exc:
        exc.sampling_time = cfg.T
        raise
    return SweepRow(T=cfg.T, e_beta=m.e_beta, sup_exi=m.sup_exi, seed=cfg.seed)


def sweep(cfg_base: ExperimentConfig, T_grid: Sequence[float], fresh_seeds: bool = False,
          workers: int = 1) -> list[SweepRow]:
    """One run per sampling time, sorted by ``T``.

    By default every run reuses ``cfg_base.seed`` so the error curve depends
    on ``T`` alone; ``fresh_seeds`` gives run ``i`` the seed ``seed + i``.
    Errors are re-raised with ``sampling_time`` set to the failing ``T``.
    """
    grid = sorted(float(T) for T in T_grid)
    if not grid:
        raise InvalidArgument("empty T grid")
    cfgs = []
    for i, T in enumerate(grid):
        c = dataclasses.replace(cfg_base, T=T,
                                seed=cfg_base.seed + i if fresh_seeds else cfg_base.seed)
        c.validate()
        cfgs.append(c)
    if workers > 1:
        with ProcessPoolExecutor(max_workers=workers) as pool:
            return list(pool.map(_sweep_one, cfgs))
    return [_sweep_one(c) for c in cfgs]


def loglog_slope(x: Sequence[float], y: Sequence[float]) -> float:
    """Least-squares slope of ``log y`` against ``log x``."""
    lx = np.log(np.asarray(x, dtype=float))
    ly = np.log(np.asarray(y, dtype=float))
    if len(lx) < 2:
        return float("nan")
    return float(np.polyfit(lx, ly, 1)[0])
