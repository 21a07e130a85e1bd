"""Invertible reparameterizations used by regression adjustment.

Adjusted draws must stay inside the prior support, so adjustment is done
on an unconstrained scale: log for positive parameters, a logit rescaled
to (lo, hi) for interval-supported parameters, identity otherwise.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np
from scipy.special import expit

IDENTITY = "identity"
LOG = "log"
LOGIT = "logit"


@dataclass(frozen=True)
class Transform:
    """Monotone map from a parameter's support onto an unconstrained scale."""

    kind: str
    lo: float = math.nan
    hi: float = math.nan

    def __post_init__(self):
        if self.kind not in (IDENTITY, LOG, LOGIT):
            raise ValueError(f"unknown transform kind {self.kind!r}")
        if self.kind == LOGIT:
            if not (math.isfinite(self.lo) and math.isfinite(self.hi) and self.lo < self.hi):
                raise ValueError("logit transform needs finite bounds lo < hi")

    def forward(self, x):
        """Map support values to the unconstrained scale."""
        x = np.asarray(x, dtype=float)
        if self.kind == IDENTITY:
            out = x.copy()
        elif self.kind == LOG:
            if np.any(x <= 0):
                raise ValueError("log transform needs positive input")
            out = np.log(x)
        else:
            if np.any(x <= self.lo) or np.any(x >= self.hi):
                raise ValueError(f"logit transform needs input strictly inside "
                                 f"({self.lo}, {self.hi})")
            u = (x - self.lo) / (self.hi - self.lo)
            # x is strictly inside, but the rescaling can still round u
            # onto 0 or 1; keep it in the open unit interval
            u = np.clip(u, np.nextafter(0.0, 1.0), np.nextafter(1.0, 0.0))
            out = np.log(u) - np.log1p(-u)
        return out if out.ndim else float(out)

    def inverse(self, y):
        """Map unconstrained values back to the support.

        The logit image is mathematically the open interval, but expit
        saturates in floating point for |y| beyond ~37; saturated values
        are nudged one ulp inside so the result always round-trips
        through :meth:`forward`.
        """
        y = np.asarray(y, dtype=float)
        if self.kind == IDENTITY:
            out = y.copy()
        elif self.kind == LOG:
            out = np.exp(y)
        else:
            out = self.lo + (self.hi - self.lo) * expit(y)
            out = np.clip(out, np.nextafter(self.lo, self.hi),
                          np.nextafter(self.hi, self.lo))
        return out if out.ndim else float(out)


def identity_transform() -> Transform:
    return Transform(IDENTITY)


def log_transform() -> Transform:
    return Transform(LOG)


def logit_transform(lo: float, hi: float) -> Transform:
    return Transform(LOGIT, lo=lo, hi=hi)


def apply_transform(t: Transform, value):
    """Functional alias for ``t.forward``."""
    return t.forward(value)


def invert_transform(t: Transform, value):
    """Functional alias for ``t.inverse``."""
    return t.inverse(value)
