"""Deterministic large-population limit of the mass-action model.

The jump process, started from large counts, concentrates around the
solution of

    ds/dt = lambda0 - mu0 s - lambda1 s i
    di/dt = lambda1 s i - (mu1 + lambda2) i - lambda3 i r
    dr/dt = lambda2 i + lambda3 i r - c r

where s and i are the susceptible and infectious population sizes and r
is the tracing-pressure variable.  The limit is stated for the
mass-action contact-tracing form only.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from scipy.integrate import solve_ivp

from .model import MASS_ACTION, Parameters


class OdeSolverError(RuntimeError):
    """Raised when the ODE integrator fails to produce a solution."""


@dataclass(frozen=True, eq=False)
class DeterministicTrajectory:
    """Solution of the limiting ODE system on a time grid."""

    times: np.ndarray
    s: np.ndarray
    i: np.ndarray
    r: np.ndarray


def fluid_rhs(t: float, y, params: Parameters):
    """Right-hand side of the limiting ODE system."""
    s, i, r = y
    ds = params.lambda0 - params.mu0 * s - params.lambda1 * s * i
    di = params.lambda1 * s * i - (params.mu1 + params.lambda2) * i - params.lambda3 * i * r
    dr = params.lambda2 * i + params.lambda3 * i * r - params.c * r
    return (ds, di, dr)


def solve_ode(params: Parameters, s0: float, i0: float, r0: float = 0.0,
              horizon: float = 1.0, t_eval=None,
              rtol: float = 1e-8, atol: float = 1e-10) -> DeterministicTrajectory:
    """Integrate the limiting system from (s0, i0, r0) up to ``horizon``.

    ``t_eval`` selects output times (defaults to a dense uniform grid).
    Raises OdeSolverError if the integrator reports failure.
    """
    if params.variant != MASS_ACTION:
        raise ValueError("the deterministic limit is defined for the mass-action variant")
    if s0 < 0 or i0 < 0 or r0 < 0:
        raise ValueError("initial sizes must be nonnegative")
    if not np.isfinite(horizon) or horizon <= 0:
        raise ValueError("horizon must be positive and finite")
    if t_eval is None:
        t_eval = np.linspace(0.0, horizon, 201)
    t_eval = np.asarray(t_eval, dtype=float)

    sol = solve_ivp(fluid_rhs, (0.0, float(horizon)), (float(s0), float(i0), float(r0)),
                    t_eval=t_eval, args=(params,), method="RK45", rtol=rtol, atol=atol)
    if not sol.success:
        raise OdeSolverError(f"ODE integration failed: {sol.message}")
    return DeterministicTrajectory(times=sol.t, s=sol.y[0], i=sol.y[1], r=sol.y[2])
