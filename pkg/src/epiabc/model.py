"""Model primitives: parameters, population states and event rates.

The process tracks susceptibles S, undetected infectious I, and two
detected classes: R1 (found by routine screening) and R2 (found by
contact tracing).  Detected individuals stop transmitting but keep
exerting tracing pressure on the undetected pool for a while; each
detection at time ``T_i`` contributes ``exp(-c (t - T_i))`` to the
pressure ``r(t)``.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field, replace

import numpy as np
from numba import njit

MASS_ACTION = "mass_action"
FREQUENCY_DEPENDENT = "frequency_dependent"
VARIANTS = (MASS_ACTION, FREQUENCY_DEPENDENT)

# Event kind codes, shared by the kernel, event logs and file formats.
# The order doubles as the selection priority inside the sampler.
INFECT = 0
DEATH_S = 1
DEATH_I = 2
DETECT_SCREEN = 3
DETECT_CT = 4
IMMIGRATE = 5

EVENT_NAMES = ("infect", "death_s", "death_i", "detect_screen", "detect_ct", "immigrate")

# Names of the inferred coordinates, in canonical order.
THETA_NAMES = ("mu1", "lambda1", "lambda2", "lambda3", "c")


def variant_code(variant: str) -> int:
    """Integer code for a contact-tracing variant name (0 mass action, 1 frequency dependent)."""
    if variant == MASS_ACTION:
        return 0
    if variant == FREQUENCY_DEPENDENT:
        return 1
    raise ValueError(f"unknown variant {variant!r}; expected one of {VARIANTS}")


@njit(cache=True)
def _ct_rate(vcode: int, lam3: float, n_inf: float, pressure: float) -> float:
    # Contact-tracing detection rate.  The frequency-dependent form is
    # defined as 0 when both the infectious pool and the pressure vanish.
    if vcode == 0:
        return lam3 * n_inf * pressure
    denom = n_inf + pressure
    if denom <= 0.0:
        return 0.0
    return lam3 * n_inf * pressure / denom


def ct_rate(variant: str, lambda3: float, n_infectious: float, pressure: float) -> float:
    """Contact-tracing detection rate for either model variant."""
    if lambda3 < 0 or n_infectious < 0 or pressure < 0:
        raise ValueError("lambda3, n_infectious and pressure must be nonnegative")
    return float(_ct_rate(variant_code(variant), lambda3, n_infectious, pressure))


def ct_pressure(detection_times, c: float, t: float) -> float:
    """Tracing pressure r(t) = sum_i exp(-c (t - T_i)) over past detections.

    ``detection_times`` may be empty.  Every detection must predate ``t``
    (weakly); ``c`` must be positive.
    """
    if c <= 0:
        raise ValueError("c must be positive")
    times = np.asarray(detection_times, dtype=float)
    if times.size == 0:
        return 0.0
    if np.any(times > t):
        raise ValueError("detection times must not exceed the evaluation time")
    return float(np.sum(np.exp(-c * (t - times))))


@dataclass(frozen=True)
class Parameters:
    """Rate parameters of the epidemic.

    Attributes
    ----------
    mu1, lambda1, lambda2, lambda3, c : float
        Death rate of infectious individuals, infection contact rate,
        screening detection rate, contact-tracing rate, and decay rate of
        tracing pressure.
    lambda0, mu0 : float
        Immigration rate into S and death rate of susceptibles.  Both
        default to 0, i.e. a closed susceptible pool.
    variant : str
        Contact-tracing form, ``"mass_action"`` or ``"frequency_dependent"``.
    """

    mu1: float
    lambda1: float
    lambda2: float
    lambda3: float
    c: float
    lambda0: float = 0.0
    mu0: float = 0.0
    variant: str = MASS_ACTION

    def __post_init__(self):
        for name in ("mu1", "lambda1", "lambda2", "lambda3", "c",
                     "lambda0", "mu0"):
            object.__setattr__(self, name, float(getattr(self, name)))
        for name in ("mu1", "lambda1", "lambda2", "lambda3", "lambda0", "mu0"):
            v = getattr(self, name)
            if not math.isfinite(v) or v < 0:
                raise ValueError(f"{name} must be finite and nonnegative, got {v}")
        if not math.isfinite(self.c) or self.c <= 0:
            raise ValueError(f"c must be finite and positive, got {self.c}")
        variant_code(self.variant)

    def theta(self) -> np.ndarray:
        """Inferred coordinates (mu1, lambda1, lambda2, lambda3, c) as an array."""
        return np.array([self.mu1, self.lambda1, self.lambda2, self.lambda3, self.c])

    def with_theta(self, theta) -> "Parameters":
        """Copy of these parameters with the inferred coordinates replaced."""
        mu1, lam1, lam2, lam3, c = (float(x) for x in theta)
        return replace(self, mu1=mu1, lambda1=lam1, lambda2=lam2, lambda3=lam3, c=c)


@dataclass(frozen=True, eq=False)
class PopulationState:
    """Snapshot of the population at time ``t``.

    ``detection_times`` holds one entry per past detection (both kinds),
    so R1 + R2 == len(detection_times).
    """

    t: float
    S: int
    I: int
    R1: int = 0
    R2: int = 0
    detection_times: np.ndarray = field(default_factory=lambda: np.empty(0))

    def __post_init__(self):
        object.__setattr__(self, "detection_times",
                           np.sort(np.asarray(self.detection_times, dtype=float)))
        object.__setattr__(self, "t", float(self.t))
        for name in ("S", "I", "R1", "R2"):
            v = getattr(self, name)
            if v < 0 or v != int(v):
                raise ValueError(f"{name} must be a nonnegative integer, got {v}")
            object.__setattr__(self, name, int(v))
        if len(self.detection_times) != self.R1 + self.R2:
            raise ValueError("need one detection time per detected individual")
        if self.detection_times.size and self.detection_times[-1] > self.t:
            raise ValueError("detection times must not exceed the state time")

    def pressure(self, c: float) -> float:
        """Tracing pressure at the snapshot time."""
        return ct_pressure(self.detection_times, c, self.t)


def initial_state(S0: int, I0: int, t: float = 0.0) -> PopulationState:
    """Fresh epidemic state with no prior detections."""
    return PopulationState(t=t, S=S0, I=I0)


@dataclass(frozen=True)
class Rates:
    """Instantaneous event rates at a given state."""

    infect: float
    death_s: float
    death_i: float
    screen: float
    ct: float
    immigrate: float

    @property
    def total(self) -> float:
        return self.infect + self.death_s + self.death_i + self.screen + self.ct + self.immigrate

    def as_array(self) -> np.ndarray:
        """Rates ordered by event kind code."""
        return np.array([self.infect, self.death_s, self.death_i,
                         self.screen, self.ct, self.immigrate])


def event_rates(state: PopulationState, params: Parameters) -> Rates:
    """Event rates of the jump process at ``state``."""
    r = state.pressure(params.c)
    return Rates(
        infect=params.lambda1 * state.S * state.I,
        death_s=params.mu0 * state.S,
        death_i=params.mu1 * state.I,
        screen=params.lambda2 * state.I,
        ct=ct_rate(params.variant, params.lambda3, state.I, r),
        immigrate=params.lambda0,
    )
