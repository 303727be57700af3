"""Independent reference computations used by the tests.

Nothing here imports the code paths under test for the quantity it checks.
"""

from __future__ import annotations

from fractions import Fraction

import numpy as np
from scipy.integrate import solve_ivp
from scipy.linalg import expm


def exact_rank(rows) -> int:
    """Rank by Gaussian elimination in exact rational arithmetic."""
    m = [[Fraction(v) for v in r] for r in rows]
    rank, col = 0, 0
    n_rows, n_cols = len(m), len(m[0]) if m else 0
    while rank < n_rows and col < n_cols:
        piv = next((i for i in range(rank, n_rows) if m[i][col] != 0), None)
        if piv is None:
            col += 1
            continue
        m[rank], m[piv] = m[piv], m[rank]
        for i in range(rank + 1, n_rows):
            f = m[i][col] / m[rank][col]
            m[i] = [a - f * b for a, b in zip(m[i], m[rank])]
        rank += 1
        col += 1
    return rank


def extended_lti_discretization(rho: int, T: float, beta: float):
    """Zero-order-hold discretization of the continuous extended chain via expm.

    State ``(xi_1..xi_rho, xi_{rho+1})`` with ``xi_rho' = xi_{rho+1} + beta u``
    and ``xi_{rho+1}' = 0``. Returns ``(Ad, bd)`` with ``bd`` including beta.
    """
    n = rho + 1
    F = np.zeros((n + 1, n + 1))
    for i in range(n - 1):
        F[i, i + 1] = 1.0
    F[rho - 1, n] = beta  # input enters xi_rho
    E = expm(F * T)
    return E[:n, :n], E[:n, n]


def simulate_extended_lti(rho: int, T: float, beta: float, xbar0, u):
    """States ``xbar(0..N)`` and outputs ``y(0..N)`` of the exact extended LTI."""
    Ad, bd = extended_lti_discretization(rho, T, beta)
    x = np.asarray(xbar0, dtype=float)
    xs = [x]
    for uk in u:
        x = Ad @ x + bd * uk
        xs.append(x)
    xs = np.array(xs)
    return xs, xs[:, 0].copy()


def vdp_orbit_bounds(mu: float = 0.5, t_end: float = 80.0, t_cut: float = 40.0):
    """Min/max of ||eta|| on the Van der Pol limit cycle (xi clamped at 0)."""
    def f(t, z):
        return [z[1], -z[0] + mu * (1 - z[0] ** 2) * z[1]]
    sol = solve_ivp(f, (0, t_end), [1.0, 0.0], rtol=1e-11, atol=1e-12, max_step=1e-3,
                    dense_output=True)
    t = np.linspace(t_cut, t_end, 200001)
    r = np.linalg.norm(sol.sol(t), axis=0)
    return r.min(), r.max()
