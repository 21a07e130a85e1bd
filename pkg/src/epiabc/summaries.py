"""Summary statistics: detection counting paths and binned summary vectors.

Two representations of a dataset are supported.  The path summary keeps
the full counting processes of the two detection kinds and compares them
with the L1 distance on [t0, T].  The vector summary bins detections per
year and appends the final counts, yearly net changes of the infectious
pool over a window, and the mean time from infection to detection.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from numba import njit

from .model import DETECT_CT, DETECT_SCREEN
from .simulate import EpidemicPath


@dataclass(frozen=True, eq=False)
class StepPath:
    """Right-continuous step function on [t0, t_end].

    ``values[k]`` is the value on [times[k], times[k+1]); the function
    equals ``v0`` before the first jump.
    """

    t0: float
    t_end: float
    v0: float
    times: np.ndarray
    values: np.ndarray

    def __post_init__(self):
        times = np.asarray(self.times, dtype=float)
        values = np.asarray(self.values, dtype=float)
        object.__setattr__(self, "times", times)
        object.__setattr__(self, "values", values)
        if self.t_end < self.t0:
            raise ValueError("need t_end >= t0")
        if times.shape != values.shape or times.ndim != 1:
            raise ValueError("times and values must be 1-d arrays of equal length")
        if times.size:
            if np.any(np.diff(times) < 0):
                raise ValueError("jump times must be nondecreasing")
            if times[0] < self.t0 or times[-1] > self.t_end:
                raise ValueError("jump times must lie within [t0, t_end]")

    def evaluate(self, t):
        """Value of the step function at the given times."""
        t = np.asarray(t, dtype=float)
        idx = np.searchsorted(self.times, t, side="right")
        padded = np.concatenate(([self.v0], self.values))
        out = padded[idx]
        return out if out.ndim else float(out)

    @property
    def final(self) -> float:
        return float(self.values[-1]) if self.values.size else self.v0


def counting_path(event_times, t0: float, t_end: float, v0: float = 0.0) -> StepPath:
    """Unit-jump counting process of the given event times on [t0, t_end]."""
    times = np.sort(np.asarray(event_times, dtype=float))
    uniq, counts = np.unique(times, return_counts=True)
    return StepPath(t0=float(t0), t_end=float(t_end), v0=float(v0),
                    times=uniq, values=v0 + np.cumsum(counts))


def detection_paths(path: EpidemicPath) -> tuple[StepPath, StepPath]:
    """Counting paths of screening and contact-tracing detections.

    Both are defined on [init.t, horizon]; a truncated simulation is
    extended as constant after its last event (it accrues no further
    detections), which only affects paths that are extremely far from
    any moderate dataset anyway.
    """
    t0, t_end = path.init.t, path.horizon
    screen = path.times[path.kinds == DETECT_SCREEN]
    traced = path.times[path.kinds == DETECT_CT]
    return (counting_path(screen, t0, t_end, v0=path.init.R1),
            counting_path(traced, t0, t_end, v0=path.init.R2))


@njit(cache=True)
def _l1_merge(a_times, a_vals, a0, b_times, b_vals, b0, t0, t_end):
    # single merge pass over both jump sequences; exact for step functions
    na = a_times.size
    nb = b_times.size
    ia = 0
    ib = 0
    fa = a0
    fb = b0
    t = t0
    acc = 0.0
    while ia < na or ib < nb:
        ta = a_times[ia] if ia < na else np.inf
        tb = b_times[ib] if ib < nb else np.inf
        tn = min(ta, tb)
        if tn >= t_end:
            break
        acc += abs(fa - fb) * (tn - t)
        if ta == tn:
            fa = a_vals[ia]
            ia += 1
        if tb == tn:
            fb = b_vals[ib]
            ib += 1
        t = tn
    acc += abs(fa - fb) * (t_end - t)
    return acc


def l1_distance(f: StepPath, g: StepPath) -> float:
    """Exact integral of |f - g| over the common definition interval."""
    if f.t0 != g.t0 or f.t_end != g.t_end:
        raise ValueError("paths must share the same interval")
    return float(_l1_merge(f.times, f.values, f.v0,
                           g.times, g.values, g.v0, f.t0, f.t_end))


@dataclass(frozen=True, eq=False)
class VectorSummary:
    """Fixed-length summary of a dataset.

    Layout: final screening and tracing counts, yearly screening
    increments (years entries), yearly tracing increments (years
    entries), yearly net changes of I over the first ``window`` years,
    and the mean infection-to-detection time over individuals both
    infected and detected within the window.  ``sojourn_valid`` is False
    when no individual qualifies; the entry is then 0 by convention.
    """

    values: np.ndarray
    years: int
    window: int
    sojourn_valid: bool

    def __post_init__(self):
        object.__setattr__(self, "values", np.asarray(self.values, dtype=float))
        if self.values.shape != (vector_length(self.years, self.window),):
            raise ValueError("summary length does not match the declared layout")

    @property
    def dim(self) -> int:
        return self.values.size


def vector_length(years: int, window: int) -> int:
    return 2 + 2 * years + window + 1


def vector_layout(years: int, window: int) -> list[str]:
    """Column names for the vector summary."""
    names = ["r1_final", "r2_final"]
    names += [f"r1_year_{k}" for k in range(1, years + 1)]
    names += [f"r2_year_{k}" for k in range(1, years + 1)]
    names += [f"i_change_year_{k}" for k in range(1, window + 1)]
    names.append("mean_sojourn")
    return names


def vector_summary(path: EpidemicPath, years: int, window: int | None = None) -> VectorSummary:
    """Summary vector of a simulated path (observation period = ``years``)."""
    if window is None:
        window = years
    if years < 1 or window < 1 or window > years:
        raise ValueError("need 1 <= window <= years")
    t0 = path.init.t
    if path.horizon < t0 + years:
        raise ValueError("path horizon is shorter than the requested years")
    grid = t0 + np.arange(years + 1.0)
    _, I, R1, R2 = path.counts_at(grid)
    sojourn, valid = mean_sojourn(path, window)
    values = np.concatenate((
        [R1[years], R2[years]],
        np.diff(R1),
        np.diff(R2),
        np.diff(I[:window + 1]),
        [sojourn],
    ))
    return VectorSummary(values=values, years=years, window=int(window), sojourn_valid=valid)


def mean_sojourn(path: EpidemicPath, window: float) -> tuple[float, bool]:
    """Mean infection-to-detection time within the observation window.

    Averages detection_time - infection_time over individuals infected
    and detected within [init.t, init.t + window].  Returns (0.0, False)
    when no individual qualifies.
    """
    t_max = path.init.t + window
    mask = (path.detection_kinds >= 0) \
        & (path.infection_times <= t_max) & (path.detection_times <= t_max)
    if not np.any(mask):
        return 0.0, False
    delays = path.detection_times[mask] - path.infection_times[mask]
    return float(np.mean(delays)), True


def scale_for(summaries: np.ndarray) -> np.ndarray:
    """Per-entry spread used to scale vector summaries before distances.

    Unbiased standard deviation of each column; exact-zero spreads are
    replaced by 1 so constant entries do not blow up the distance.
    """
    summaries = np.asarray(summaries, dtype=float)
    if summaries.ndim != 2 or summaries.shape[0] < 2:
        raise ValueError("need a matrix with at least two rows")
    sd = np.std(summaries, axis=0, ddof=1)
    sd[sd == 0.0] = 1.0
    return sd


def scaled_distances(summaries: np.ndarray, obs: np.ndarray, scale: np.ndarray) -> np.ndarray:
    """Euclidean distance of each scaled summary row to the scaled observation."""
    summaries = np.asarray(summaries, dtype=float)
    obs = np.asarray(obs, dtype=float)
    scale = np.asarray(scale, dtype=float)
    if np.any(scale <= 0):
        raise ValueError("scale entries must be positive")
    if summaries.shape[1:] != obs.shape or obs.shape != scale.shape:
        raise ValueError("summary layout mismatch")
    z = (summaries - obs) / scale
    return np.sqrt(np.sum(z * z, axis=1))
