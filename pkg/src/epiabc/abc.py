"""Smooth-rejection ABC: kernel weights, tolerance selection, estimators.

Simulated draws are weighted by an Epanechnikov kernel of their distance
to the observed data.  The tolerance is set from a target acceptance
rate: the k-th smallest distance (k = ceil(rate * N)) is placed just
inside the kernel support, so exactly k draws get positive weight absent
ties.  Posterior quantities are weighted-sample estimators.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from .summaries import scaled_distances


class AllWeightsZeroError(RuntimeError):
    """Every simulation got weight zero; enlarge N or the tolerance rate."""


def epanechnikov(u):
    """Base kernel (3/4)(1 - u^2) on |u| <= 1, zero outside."""
    u = np.asarray(u, dtype=float)
    out = np.where(np.abs(u) < 1.0, 0.75 * (1.0 - u * u), 0.0)
    return out if out.ndim else float(out)


def kernel_weights(distances, delta: float):
    """Normalized kernel K_delta(d) = epanechnikov(d / delta) / delta.

    The normalization cancels in every weighted estimator; it is kept for
    interpretability.  A distance exactly equal to delta gets weight 0.
    """
    if not delta > 0:
        raise ValueError("delta must be positive")
    return epanechnikov(np.asarray(distances, dtype=float) / delta) / delta


def tolerance_from_rate(distances, rate: float) -> float:
    """Tolerance delta giving ceil(rate * N) positive-weight draws.

    The k-th smallest distance is multiplied by (1 + 1e-9) so that it
    falls strictly inside the kernel support.  When that order statistic
    is 0 (the accepted head consists of exact matches), delta is the
    smallest positive distance — every zero-distance tie then gets the
    same positive weight and everything else gets weight 0, which keeps
    the product kernel finite — or 1.0 when all distances are zero.
    """
    distances = np.asarray(distances, dtype=float)
    n = distances.size
    if n == 0:
        raise ValueError("need at least one distance")
    if not 0.0 < rate <= 1.0:
        raise ValueError("rate must be in (0, 1]")
    if np.any(distances < 0) or not np.all(np.isfinite(distances)):
        raise ValueError("distances must be finite and nonnegative")
    k = int(np.ceil(rate * n))
    kth = np.partition(distances, k - 1)[k - 1]
    delta = kth * (1.0 + 1e-9)
    if delta <= 0.0:
        positive = distances[distances > 0.0]
        delta = float(np.min(positive)) if positive.size else 1.0
    return float(delta)


def path_weights(d1, d2, rate: float):
    """Product-kernel weights from the two detection-path distances.

    Each component gets its own tolerance at the same acceptance rate.
    Returns (weights, delta1, delta2).
    """
    d1 = np.asarray(d1, dtype=float)
    d2 = np.asarray(d2, dtype=float)
    if d1.shape != d2.shape:
        raise ValueError("distance arrays must have the same length")
    delta1 = tolerance_from_rate(d1, rate)
    delta2 = tolerance_from_rate(d2, rate)
    return kernel_weights(d1, delta1) * kernel_weights(d2, delta2), delta1, delta2


def vector_weights(summaries, obs, scale, rate: float):
    """Spherical-kernel weights of scaled summary vectors.

    Distances are Euclidean after entrywise division by ``scale``.
    Returns (weights, delta).
    """
    d = scaled_distances(summaries, obs, scale)
    delta = tolerance_from_rate(d, rate)
    return kernel_weights(d, delta), delta


def _check_sample(values, weights):
    values = np.asarray(values, dtype=float)
    weights = np.asarray(weights, dtype=float)
    if values.shape != weights.shape or values.ndim != 1:
        raise ValueError("values and weights must be 1-d arrays of equal length")
    if np.any(weights < 0):
        raise ValueError("weights must be nonnegative")
    if not np.any(weights > 0):
        raise AllWeightsZeroError(
            "all simulations got weight zero; increase N or the tolerance rate")
    return values, weights


def posterior_mean(values, weights) -> float:
    """Weighted mean of the draws."""
    values, weights = _check_sample(values, weights)
    return float(np.sum(values * weights) / np.sum(weights))


def posterior_quantile(values, weights, q):
    """Smallest draw whose cumulative normalized weight reaches q.

    ``q`` may be a scalar or an array in (0, 1).
    """
    values, weights = _check_sample(values, weights)
    q = np.asarray(q, dtype=float)
    if np.any(q <= 0) or np.any(q >= 1):
        raise ValueError("quantile levels must be in (0, 1)")
    order = np.argsort(values, kind="stable")
    v = values[order]
    cw = np.cumsum(weights[order])
    cw /= cw[-1]
    idx = np.searchsorted(cw, q, side="left")
    out = v[np.minimum(idx, v.size - 1)]
    return out if out.ndim else float(out)


def _working_sample(values, weights, prior):
    """Positive-weight draws, both natural and working scale."""
    values, weights = _check_sample(values, weights)
    pos = weights > 0
    vals = values[pos]
    w = weights[pos]
    y = prior.to_working(vals) if prior is not None else np.asarray(vals, float)
    return vals, y, w


def kde_bandwidth(values, weights, prior=None) -> float:
    """Weighted Silverman bandwidth on the working scale.

    0.9 min(sd, iqr/1.34) n_eff^(-1/5) with the effective sample size
    (sum w)^2 / sum w^2; returns 0 for a (numerical) point mass.
    """
    _, y, w = _working_sample(values, weights, prior)
    if np.all(y == y[0]):
        return 0.0
    wn = w / np.sum(w)
    n_eff = 1.0 / np.sum(wn * wn)
    mean = np.sum(wn * y)
    sd = float(np.sqrt(np.sum(wn * (y - mean) ** 2)))
    q25, q75 = posterior_quantile(y, w, np.array([0.25, 0.75]))
    a = min(sd, float(q75 - q25) / 1.34)
    if a <= 0:
        a = sd
    if a <= 0:
        return 0.0
    return 0.9 * a * n_eff ** (-0.2)


@dataclass(frozen=True, eq=False)
class DensityGrid:
    """Weighted KDE evaluated on a grid, for plotting and mode finding.

    ``working`` is the grid on the estimation scale, ``natural`` the same
    points mapped back to parameter values; ``density`` is per unit of
    the working coordinate and integrates to ~1 over the grid.
    """

    natural: np.ndarray
    working: np.ndarray
    density: np.ndarray
    bandwidth: float

    @property
    def mode(self) -> float:
        return float(self.natural[int(np.argmax(self.density))])


def posterior_density(values, weights, prior=None, gridsize: int = 512) -> DensityGrid:
    """Weighted Gaussian KDE of the draws on the prior's working scale.

    The grid spans the positive-weight range of the sample.  Degenerate
    (point-mass) samples are rejected; use :func:`posterior_mode`, which
    handles them.
    """
    _, y, w = _working_sample(values, weights, prior)
    bw = kde_bandwidth(values, weights, prior)
    if bw <= 0:
        raise ValueError("point-mass sample has no density estimate")
    grid = np.linspace(float(np.min(y)), float(np.max(y)), int(gridsize))
    density = np.empty(grid.size)
    # evaluate in blocks to bound memory for large weighted samples
    step = 64
    for start in range(0, grid.size, step):
        g = grid[start:start + step, None]
        z = (g - y[None, :]) / bw
        density[start:start + step] = np.exp(-0.5 * z * z) @ w
    density /= np.sum(w) * math.sqrt(2.0 * math.pi) * bw
    natural = prior.from_working(grid) if prior is not None else grid
    return DensityGrid(natural=np.asarray(natural, float), working=grid,
                       density=density, bandwidth=bw)


def posterior_mode(values, weights, prior=None) -> float:
    """Argmax of a weighted kernel density estimate of the draws.

    The KDE lives on the prior's working scale (log/logit; identity when
    no prior is given) with a weighted Silverman bandwidth, evaluated on
    a 512-point grid over the positive-weight range.  A single-atom
    posterior returns that atom.
    """
    vals, y, w = _working_sample(values, weights, prior)
    if np.all(vals == vals[0]):
        return float(vals[0])
    if kde_bandwidth(values, weights, prior) <= 0:
        # numerically a point mass on the working scale
        mode_y = float(np.median(y))
        return float(prior.from_working(mode_y)) if prior is not None else mode_y
    return posterior_density(values, weights, prior).mode


@dataclass(frozen=True, eq=False)
class WeightedPosterior:
    """Weighted parameter sample produced by an ABC fit.

    ``thetas`` holds natural-scale draws, one column per name; ``priors``
    (optional, keyed like ``names``) supplies working-scale maps for the
    mode estimator.
    """

    thetas: np.ndarray
    weights: np.ndarray
    names: tuple
    priors: dict | None = None

    def __post_init__(self):
        thetas = np.atleast_2d(np.asarray(self.thetas, dtype=float))
        weights = np.asarray(self.weights, dtype=float)
        object.__setattr__(self, "thetas", thetas)
        object.__setattr__(self, "weights", weights)
        object.__setattr__(self, "names", tuple(self.names))
        if thetas.shape != (weights.size, len(self.names)):
            raise ValueError("thetas must be (n draws) x (len(names))")
        if np.any(weights < 0):
            raise ValueError("weights must be nonnegative")

    def column(self, name: str) -> np.ndarray:
        return self.thetas[:, self.names.index(name)]

    @property
    def positive_count(self) -> int:
        return int(np.sum(self.weights > 0))

    @property
    def n_effective(self) -> float:
        s = np.sum(self.weights)
        if s == 0:
            return 0.0
        return float(s * s / np.sum(self.weights ** 2))

    def _prior(self, name: str):
        return self.priors.get(name) if self.priors else None

    def mean(self, name: str) -> float:
        return posterior_mean(self.column(name), self.weights)

    def quantile(self, name: str, q):
        return posterior_quantile(self.column(name), self.weights, q)

    def mode(self, name: str) -> float:
        return posterior_mode(self.column(name), self.weights, self._prior(name))

    def summary(self) -> dict:
        """Per-coordinate mean, mode, median and central 95% interval."""
        out = {}
        for name in self.names:
            q025, q50, q975 = self.quantile(name, np.array([0.025, 0.5, 0.975]))
            out[name] = {
                "mean": self.mean(name),
                "mode": self.mode(name),
                "q025": float(q025),
                "median": float(q50),
                "q975": float(q975),
            }
        return out
