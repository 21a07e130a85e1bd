"""Prior families for the epidemic rates and their working-scale maps.

Each prior knows how to sample on the natural scale, its analytic mean,
and a monotone map to an unconstrained working scale (used by regression
adjustment and density estimation) chosen so that mapped-back values
always lie in the prior support.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from .transforms import Transform, log_transform, logit_transform

LN2 = math.log(2.0)
LN10 = math.log(10.0)


def _nudge_inside(x: np.ndarray, lo: float, hi: float) -> np.ndarray:
    """Move values within a few ulps of lo or hi one ulp into (lo, hi).

    Floating-point rounding can park otherwise-valid draws on (or one ulp
    past) a support bound, which the strict logit map rejects; values
    further out are left untouched so genuine domain errors still surface.
    """
    tol = 4.0 * np.spacing(max(abs(lo), abs(hi), 1.0))
    x = np.where(np.abs(x - lo) <= tol, np.nextafter(lo, hi), x)
    x = np.where(np.abs(x - hi) <= tol, np.nextafter(hi, lo), x)
    return x


@dataclass(frozen=True)
class Log10Uniform:
    """Parameter whose base-10 logarithm is uniform on (lo, hi) decades."""

    lo: float
    hi: float
    transform: Transform = field(init=False)

    def __post_init__(self):
        if not self.lo < self.hi:
            raise ValueError("need lo < hi")
        object.__setattr__(self, "transform", logit_transform(self.lo, self.hi))

    def sample(self, rng: np.random.Generator, n: int) -> np.ndarray:
        return 10.0 ** rng.uniform(self.lo, self.hi, n)

    def mean(self) -> float:
        return (10.0 ** self.hi - 10.0 ** self.lo) / ((self.hi - self.lo) * LN10)

    def support(self) -> tuple[float, float]:
        return (10.0 ** self.lo, 10.0 ** self.hi)

    def range_log10(self) -> float:
        return self.hi - self.lo

    def to_working(self, theta):
        # The logit acts on the log10 coordinate, where the prior is flat.
        # Draws can round onto the support boundary (rng.uniform includes
        # its lower endpoint, and log10(10**u) loses a ulp), so boundary
        # values are nudged one ulp inside; anything clearly outside still
        # fails the transform's own validation.
        lg = np.log10(np.asarray(theta, dtype=float))
        lg = _nudge_inside(lg, self.lo, self.hi)
        return self.transform.forward(lg)

    def from_working(self, y):
        return 10.0 ** self.transform.inverse(y)


@dataclass(frozen=True)
class HalfLifeUniform:
    """Decay rate c = ln2 / H with the half-life H uniform on (h_lo, h_hi)."""

    h_lo: float
    h_hi: float
    transform: Transform = field(init=False)

    def __post_init__(self):
        if not 0 < self.h_lo < self.h_hi:
            raise ValueError("need 0 < h_lo < h_hi")
        object.__setattr__(self, "transform",
                           logit_transform(LN2 / self.h_hi, LN2 / self.h_lo))

    def sample(self, rng: np.random.Generator, n: int) -> np.ndarray:
        return LN2 / rng.uniform(self.h_lo, self.h_hi, n)

    def mean(self) -> float:
        return LN2 * math.log(self.h_hi / self.h_lo) / (self.h_hi - self.h_lo)

    def support(self) -> tuple[float, float]:
        return (LN2 / self.h_hi, LN2 / self.h_lo)

    def range_log10(self) -> float:
        return math.log10(self.h_hi / self.h_lo)

    def to_working(self, theta):
        # A half-life drawn exactly at h_lo (rng.uniform includes its lower
        # endpoint) puts c exactly on the upper support bound; nudge one
        # ulp inside before the logit.
        theta = _nudge_inside(np.asarray(theta, dtype=float),
                              LN2 / self.h_hi, LN2 / self.h_lo)
        return self.transform.forward(theta)

    def from_working(self, y):
        return self.transform.inverse(y)


@dataclass(frozen=True)
class GammaPrior:
    """Gamma prior with the usual shape/rate parameterization."""

    shape: float
    rate: float
    transform: Transform = field(init=False)

    def __post_init__(self):
        if self.shape <= 0 or self.rate <= 0:
            raise ValueError("shape and rate must be positive")
        object.__setattr__(self, "transform", log_transform())

    def sample(self, rng: np.random.Generator, n: int) -> np.ndarray:
        return rng.gamma(self.shape, 1.0 / self.rate, n)

    def mean(self) -> float:
        return self.shape / self.rate

    def variance(self) -> float:
        return self.shape / self.rate**2

    def support(self) -> tuple[float, float]:
        return (0.0, math.inf)

    def to_working(self, theta):
        # guard against gamma draws underflowing to exactly 0 at tiny shapes
        theta = np.maximum(np.asarray(theta, dtype=float), 5e-324)
        return self.transform.forward(theta)

    def from_working(self, y):
        return self.transform.inverse(y)


def hiv_priors() -> dict:
    """Default priors for the five contact-tracing model rates."""
    return {
        "mu1": Log10Uniform(-6.0, -4.0),
        "lambda1": Log10Uniform(-9.0, -6.0),
        "lambda2": Log10Uniform(-4.0, 3.0),
        "lambda3": Log10Uniform(-8.0, 2.0),
        "c": HalfLifeUniform(1.0 / 12.0, 5.0),
    }


def sir_gamma_priors(shape: float = 0.1, rate1: float = 1.0, rate2: float = 0.1) -> dict:
    """Conjugate priors for the two rates of the standard SIR model."""
    return {
        "lambda1": GammaPrior(shape, rate1),
        "lambda2": GammaPrior(shape, rate2),
    }


def sample_theta(priors: dict, rng: np.random.Generator, n: int) -> np.ndarray:
    """Draw n parameter vectors; columns follow the dict order of ``priors``."""
    return np.column_stack([p.sample(rng, n) for p in priors.values()])


def to_working(priors: dict, thetas: np.ndarray) -> np.ndarray:
    """Map a natural-scale parameter matrix to the working scale, columnwise."""
    thetas = np.atleast_2d(np.asarray(thetas, dtype=float))
    return np.column_stack([p.to_working(thetas[:, j])
                            for j, p in enumerate(priors.values())])


def from_working(priors: dict, ys: np.ndarray) -> np.ndarray:
    """Inverse of :func:`to_working`."""
    ys = np.atleast_2d(np.asarray(ys, dtype=float))
    return np.column_stack([p.from_working(ys[:, j])
                            for j, p in enumerate(priors.values())])


def priors_from_spec(spec: str) -> dict:
    """Prior set named by a compact string, for config files and the CLI.

    ``"hiv"`` gives the five-parameter contact-tracing set;
    ``"sir"`` or ``"sir:shape,rate1,rate2"`` gives the two-rate Gamma set.
    """
    if spec == "hiv":
        return hiv_priors()
    if spec == "sir":
        return sir_gamma_priors()
    if spec.startswith("sir:"):
        parts = spec[len("sir:"):].split(",")
        if len(parts) != 3:
            raise ValueError(f"bad sir prior spec {spec!r}; "
                             "expected sir:shape,rate1,rate2")
        shape, rate1, rate2 = (float(p) for p in parts)
        return sir_gamma_priors(shape=shape, rate1=rate1, rate2=rate2)
    raise ValueError(f"unknown prior spec {spec!r}; use 'hiv', 'sir' "
                     "or 'sir:shape,rate1,rate2'")


def spec_of_priors(priors: dict) -> str:
    """Inverse of :func:`priors_from_spec` for the two named sets."""
    names = tuple(priors)
    if priors == hiv_priors():
        return "hiv"
    if names == ("lambda1", "lambda2"):
        g1, g2 = priors["lambda1"], priors["lambda2"]
        if g1.shape == g2.shape:
            return f"sir:{g1.shape},{g1.rate},{g2.rate}"
    raise ValueError("prior set has no compact spec string")


def make_rng(seed) -> np.random.Generator:
    """Deterministic generator for prior draws and resampling.

    Accepts an integer seed or a prepared ``numpy.random.SeedSequence``.
    """
    if not isinstance(seed, np.random.SeedSequence):
        seed = np.random.SeedSequence(int(seed))
    return np.random.default_rng(seed)
