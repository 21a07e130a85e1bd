"""Data-augmentation MCMC for the standard SIR model (no contact tracing).

The model is the closed SIR with infection rate lambda1*S*I and detection
(removal) rate lambda2*I, observed through detection times only.  The
infection times are latent and sampled by Metropolis-Hastings moves
(move one time / insert / delete), while (lambda1, lambda2) follow their
gamma full conditionals given the completed data.

Two observation modes are supported.  With ``horizon=None`` the epidemic
is taken as completed: the observation window ends at the last detection,
everyone infected was detected, and the number of latent infections is
fixed.  With a finite horizon the epidemic may be ongoing at the end of
the window and insert/delete moves change the number of infections that
have not yet led to a detection.

Index-case infections happen at time 0 by convention and contribute no
likelihood factor.
"""

from __future__ import annotations

import warnings
from dataclasses import dataclass, field

import numpy as np

from .priors import GammaPrior, sir_gamma_priors

STALL_WINDOW = 500


@dataclass(frozen=True, eq=False)
class AugmentedState:
    """Complete-data configuration: rates plus latent infection times.

    ``infection_times`` includes the index cases as leading zeros and is
    kept sorted; ``detection_times`` is the observed data.
    """

    lambda1: float
    lambda2: float
    infection_times: np.ndarray
    detection_times: np.ndarray

    def __post_init__(self):
        object.__setattr__(self, "infection_times",
                           np.sort(np.asarray(self.infection_times, dtype=float)))
        object.__setattr__(self, "detection_times",
                           np.sort(np.asarray(self.detection_times, dtype=float)))


@dataclass(frozen=True)
class SuffStats:
    """Sufficient statistics of the complete data for the two rates."""

    valid: bool
    n_inf: int
    n_det: int
    int_si: float
    int_i: float
    log_si: float
    log_i: float


def sufficient_stats(infection_times, detection_times, s0: int, i0: int,
                     horizon: float) -> SuffStats:
    """Walk the completed epidemic and accumulate likelihood ingredients.

    ``infection_times`` must carry the i0 index cases as zeros; remaining
    entries are proper infection events.  Returns valid=False for any
    configuration that is impossible under the model (so its likelihood
    is zero): infections without an infectious or susceptible individual,
    detections without an infectious individual, times outside (0, T],
    or (in the completed case) leftovers at T.
    """
    inf = np.sort(np.asarray(infection_times, dtype=float))
    det = np.sort(np.asarray(detection_times, dtype=float))
    bad = SuffStats(False, 0, 0, 0.0, 0.0, 0.0, 0.0)
    n_zero = int(np.searchsorted(inf, 0.0, side="right"))
    if n_zero != i0 or np.any(inf < 0.0):
        return bad
    inf = inf[i0:]
    T = float(horizon)
    if inf.size and (inf[0] <= 0.0 or inf[-1] >= T):
        return bad
    if det.size and (det[0] <= 0.0 or det[-1] > T):
        return bad
    if det.size + 0 > inf.size + i0:
        return bad

    times = np.concatenate((inf, det))
    codes = np.concatenate((np.zeros(inf.size, np.int8), np.ones(det.size, np.int8)))
    order = np.lexsort((codes, times))  # infection first on exact ties
    times = times[order]
    codes = codes[order]

    is_inf = codes == 0
    inf_before = np.concatenate(([0], np.cumsum(is_inf)))[:-1]
    det_before = np.concatenate(([0], np.cumsum(~is_inf)))[:-1]
    s_before = s0 - inf_before
    i_before = i0 + inf_before - det_before
    if np.any(i_before < 1) or np.any(s_before[is_inf] < 1):
        return bad

    edges = np.concatenate(([0.0], times, [T]))
    widths = np.diff(edges)
    s_seg = np.concatenate(([s0], s_before + np.where(is_inf, -1, 0)))
    i_seg = np.concatenate(([i0], i_before + np.where(is_inf, 1, -1)))
    return SuffStats(
        valid=True,
        n_inf=int(inf.size),
        n_det=int(det.size),
        int_si=float(np.sum(s_seg * i_seg * widths)),
        int_i=float(np.sum(i_seg * widths)),
        log_si=float(np.sum(np.log(s_before[is_inf] * i_before[is_inf]))),
        log_i=float(np.sum(np.log(i_before[~is_inf]))),
    )


def _loglik_from_stats(stats: SuffStats, lambda1: float, lambda2: float) -> float:
    if not stats.valid or lambda1 <= 0 or lambda2 <= 0:
        return -np.inf
    return (stats.n_inf * np.log(lambda1) + stats.log_si - lambda1 * stats.int_si
            + stats.n_det * np.log(lambda2) + stats.log_i - lambda2 * stats.int_i)


def complete_loglik(state: AugmentedState, s0: int, i0: int,
                    horizon: float | None = None) -> float:
    """Complete-data log likelihood; -inf for impossible configurations."""
    if horizon is None:
        if state.detection_times.size == 0:
            return -np.inf
        horizon = float(state.detection_times[-1])
    stats = sufficient_stats(state.infection_times, state.detection_times,
                             s0, i0, horizon)
    return _loglik_from_stats(stats, state.lambda1, state.lambda2)


def gibbs_rates(rng: np.random.Generator, priors: dict, stats: SuffStats):
    """Draw (lambda1, lambda2) from their gamma full conditionals."""
    p1: GammaPrior = priors["lambda1"]
    p2: GammaPrior = priors["lambda2"]
    lam1 = rng.gamma(p1.shape + stats.n_inf, 1.0 / (p1.rate + stats.int_si))
    lam2 = rng.gamma(p2.shape + stats.n_det, 1.0 / (p2.rate + stats.int_i))
    return float(lam1), float(lam2)


@dataclass(frozen=True, eq=False)
class Chain:
    """Post-burn-in MCMC output with acceptance diagnostics."""

    lambda1: np.ndarray
    lambda2: np.ndarray
    loglik: np.ndarray
    n_latent: np.ndarray
    acceptance: dict
    diagnostics: dict
    iters: int
    burn_in: int
    seed: int

    def __len__(self) -> int:
        return self.lambda1.size


@dataclass(frozen=True)
class MoveProbs:
    """Mixture over latent-update proposals (ongoing mode only)."""

    move: float = 0.8
    insert: float = 0.1
    delete: float = 0.1

    def __post_init__(self):
        probs = (self.move, self.insert, self.delete)
        if any(p < 0 for p in probs) or abs(sum(probs) - 1.0) > 1e-12:
            raise ValueError("move probabilities must be nonnegative and sum to 1")


def run_mcmc(detections, s0: int, i0: int = 1, priors: dict | None = None,
             horizon: float | None = None, iters: int = 10_000,
             burn_in: int = 5_000, seed: int = 0,
             move_probs: MoveProbs = MoveProbs()) -> Chain:
    """Sample the posterior of (lambda1, lambda2) given detection times.

    ``horizon=None`` treats the data as a completed epidemic (window ends
    at the last detection, latent dimension fixed); a finite horizon
    treats it as ongoing and enables insert/delete moves.  Deterministic
    per seed.  A window of ``STALL_WINDOW`` latent proposals with no
    acceptance is counted in diagnostics and reported as a warning.
    """
    det = np.sort(np.asarray(detections, dtype=float))
    if det.size == 0:
        raise ValueError("need at least one detection")
    if det[0] <= 0:
        raise ValueError("detection times must be positive")
    if not 0 <= burn_in < iters:
        raise ValueError("need 0 <= burn_in < iters")
    if priors is None:
        priors = sir_gamma_priors()
    completed = horizon is None
    T = float(det[-1]) if completed else float(horizon)
    if det[-1] > T:
        raise ValueError("detections exceed the horizon")

    n_det = det.size
    if completed:
        if n_det < i0:
            raise ValueError("completed epidemic needs at least i0 detections")
        m = n_det - i0
    else:
        m = max(0, n_det - i0)
    if s0 < m:
        raise ValueError("not enough susceptibles for the required infections")

    # initial latents: all infections packed before the first detection
    first = det[0]
    latent = first * np.arange(1, m + 1) / (m + 1.0)
    index_zeros = np.zeros(i0)

    rng = np.random.default_rng(np.random.SeedSequence(int(seed)))
    stats = sufficient_stats(np.concatenate((index_zeros, latent)), det, s0, i0, T)
    if not stats.valid:
        raise ValueError("could not build a feasible initial configuration")
    lam1, lam2 = gibbs_rates(rng, priors, stats)

    keep = iters - burn_in
    out_l1 = np.empty(keep)
    out_l2 = np.empty(keep)
    out_ll = np.empty(keep)
    out_m = np.empty(keep, np.int64)
    proposed = {"move": 0, "insert": 0, "delete": 0}
    accepted = {"move": 0, "insert": 0, "delete": 0}
    window_props = 0
    window_accs = 0
    stalled = 0

    thresholds = (move_probs.move, move_probs.move + move_probs.insert)
    for it in range(iters):
        if completed:
            kind = "move"
        else:
            u = rng.random()
            kind = "move" if u < thresholds[0] else \
                "insert" if u < thresholds[1] else "delete"

        cur_ll = _loglik_from_stats(stats, lam1, lam2)
        cand = None
        log_extra = 0.0
        k = latent.size
        if kind == "move" and k > 0:
            j = int(rng.integers(k))
            cand = latent.copy()
            cand[j] = rng.uniform(0.0, T)
        elif kind == "insert":
            cand = np.append(latent, rng.uniform(0.0, T))
            log_extra = np.log(T) - np.log(k + 1.0)
        elif kind == "delete" and k > 0:
            j = int(rng.integers(k))
            cand = np.delete(latent, j)
            log_extra = np.log(float(k)) - np.log(T)

        if cand is not None:
            proposed[kind] += 1
            window_props += 1
            cand_stats = sufficient_stats(np.concatenate((index_zeros, cand)),
                                          det, s0, i0, T)
            cand_ll = _loglik_from_stats(cand_stats, lam1, lam2)
            if np.log(rng.random()) < cand_ll - cur_ll + log_extra:
                latent = np.sort(cand)
                stats = cand_stats
                accepted[kind] += 1
                window_accs += 1
            if window_props == STALL_WINDOW:
                if window_accs == 0:
                    stalled += 1
                window_props = 0
                window_accs = 0

        lam1, lam2 = gibbs_rates(rng, priors, stats)
        if it >= burn_in:
            pos = it - burn_in
            out_l1[pos] = lam1
            out_l2[pos] = lam2
            out_ll[pos] = _loglik_from_stats(stats, lam1, lam2)
            out_m[pos] = latent.size

    if stalled:
        warnings.warn(f"{stalled} windows of {STALL_WINDOW} latent proposals "
                      "had zero acceptances", RuntimeWarning)
    rates = {kind: (accepted[kind] / proposed[kind] if proposed[kind] else float("nan"))
             for kind in proposed}
    return Chain(lambda1=out_l1, lambda2=out_l2, loglik=out_ll, n_latent=out_m,
                 acceptance={"proposed": proposed, "accepted": accepted, "rate": rates},
                 diagnostics={"stalled_windows": stalled, "completed_mode": completed,
                              "horizon": T},
                 iters=iters, burn_in=burn_in, seed=int(seed))
