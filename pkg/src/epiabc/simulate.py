"""Exact simulation of the contact-tracing SIR jump process.

The sampler is a thinning scheme.  Between events every rate is constant
except the contact-tracing rate, which only decays (the pressure r(t)
decreases between detections in both model variants), so the total rate
evaluated at the last event time is a valid upper bound.  Candidate times
are drawn from that bound; rejected candidates are phantom points that
merely re-anchor the bound at the current time.

Pressure is maintained incrementally (multiplied by exp(-c dt) between
events, +1 at each detection) and resummed exactly from the detection
times every ``resum_every`` events to stop floating-point drift.

Randomness comes from a self-contained xoshiro256++ generator seeded via
splitmix64, so paths are reproducible bit for bit from a 64-bit seed
across runs and platforms.  Seeds for batches of simulations should be
derived with :func:`spawn_seeds`.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from numba import njit

from .model import (
    DEATH_I,
    DEATH_S,
    DETECT_CT,
    DETECT_SCREEN,
    IMMIGRATE,
    INFECT,
    Parameters,
    PopulationState,
    _ct_rate,
    variant_code,
)

DEFAULT_EVENT_CAP = 10_000_000
DEFAULT_RESUM_EVERY = 10_000

_SM_GAMMA = np.uint64(0x9E3779B97F4A7C15)
_SM_M1 = np.uint64(0xBF58476D1CE4E5B9)
_SM_M2 = np.uint64(0x94D049BB133111EB)
_R11 = np.uint64(11)
_R17 = np.uint64(17)
_R23 = np.uint64(23)
_R27 = np.uint64(27)
_R30 = np.uint64(30)
_R31 = np.uint64(31)
_R41 = np.uint64(41)
_R45 = np.uint64(45)
_R64 = np.uint64(64)
_INV53 = 1.0 / 9007199254740992.0


@njit(cache=True)
def _rng_init(seed):
    s = np.empty(4, np.uint64)
    x = np.uint64(seed)
    for i in range(4):
        x = x + _SM_GAMMA
        z = x
        z = (z ^ (z >> _R30)) * _SM_M1
        z = (z ^ (z >> _R27)) * _SM_M2
        s[i] = z ^ (z >> _R31)
    return s


@njit(cache=True)
def _next_u64(s):
    x = s[0] + s[3]
    out = ((x << _R23) | (x >> _R41)) + s[0]
    t = s[1] << _R17
    s[2] ^= s[0]
    s[3] ^= s[1]
    s[1] ^= s[2]
    s[0] ^= s[3]
    s[2] ^= t
    x = s[3]
    s[3] = (x << _R45) | (x >> (_R64 - _R45))
    return out


@njit(cache=True)
def _unif01(s):
    # uniform on [0, 1)
    return np.float64(_next_u64(s) >> _R11) * _INV53


@njit(cache=True)
def _exponential(s):
    # -log of a uniform on (0, 1]
    return -np.log((np.float64(_next_u64(s) >> _R11) + 1.0) * _INV53)


@njit(cache=True)
def _sim_kernel(seed, vcode, lam0, mu0, mu1, lam1, lam2, lam3, c,
                S0, I0, R10, R20, t0, horizon, init_det, event_cap, resum_every):
    rng = _rng_init(seed)
    S = S0
    I = I0
    R1 = R10
    R2 = R20
    t = t0

    nd = init_det.size
    cap = 16
    while cap < nd + 16:
        cap *= 2
    det_times = np.empty(cap, np.float64)
    det_times[:nd] = init_det

    r = 0.0
    for i in range(nd):
        r += np.exp(-c * (t0 - init_det[i]))

    cap = 16
    while cap < I0 + 16:
        cap *= 2
    inf_t = np.empty(cap, np.float64)
    det_t = np.empty(cap, np.float64)
    det_k = np.empty(cap, np.int8)
    act = np.empty(cap, np.int32)
    for i in range(I0):
        inf_t[i] = t0
        det_t[i] = np.nan
        det_k[i] = -1
        act[i] = i
    n_ind = I0
    n_act = I0

    ev_t = np.empty(1024, np.float64)
    ev_kind = np.empty(1024, np.uint8)
    ev_id = np.empty(1024, np.int32)
    n_ev = 0

    since_resum = 0
    truncated = False

    while True:
        rate_inf = lam1 * S * I
        rate_ds = mu0 * S
        rate_di = mu1 * I
        rate_sc = lam2 * I
        bound = rate_inf + rate_ds + rate_di + rate_sc + _ct_rate(vcode, lam3, I, r) + lam0
        if bound <= 0.0:
            break
        t_new = t + _exponential(rng) / bound
        if t_new >= horizon:
            break
        if t_new <= t:
            # waiting time underflowed; nudge strictly forward
            t_new = t + max(abs(t), 1.0) * 4.4e-16
            if t_new >= horizon:
                break
        r *= np.exp(-c * (t_new - t))
        t = t_new
        total_now = rate_inf + rate_ds + rate_di + rate_sc + _ct_rate(vcode, lam3, I, r) + lam0
        u = _unif01(rng) * bound
        if u >= total_now:
            continue  # phantom point

        # realized event; selection order matches the event kind codes
        ind = -1
        if u < rate_inf:
            kind = INFECT
            if n_ind == inf_t.size:
                big = 2 * n_ind
                new_inf = np.empty(big, np.float64)
                new_det = np.empty(big, np.float64)
                new_k = np.empty(big, np.int8)
                new_inf[:n_ind] = inf_t
                new_det[:n_ind] = det_t
                new_k[:n_ind] = det_k
                inf_t = new_inf
                det_t = new_det
                det_k = new_k
            ind = n_ind
            inf_t[ind] = t
            det_t[ind] = np.nan
            det_k[ind] = -1
            n_ind += 1
            if n_act == act.size:
                new_act = np.empty(2 * n_act, np.int32)
                new_act[:n_act] = act
                act = new_act
            act[n_act] = ind
            n_act += 1
            S -= 1
            I += 1
        elif u < rate_inf + rate_ds:
            kind = DEATH_S
            S -= 1
        elif u < rate_inf + rate_ds + rate_di + rate_sc + _ct_rate(vcode, lam3, I, r):
            # one of the three exits from the infectious pool
            j = np.int64(_unif01(rng) * n_act)
            if j >= n_act:
                j = n_act - 1
            ind = act[j]
            act[j] = act[n_act - 1]
            n_act -= 1
            I -= 1
            if u < rate_inf + rate_ds + rate_di:
                kind = DEATH_I
            else:
                if u < rate_inf + rate_ds + rate_di + rate_sc:
                    kind = DETECT_SCREEN
                    R1 += 1
                    det_k[ind] = 0
                else:
                    kind = DETECT_CT
                    R2 += 1
                    det_k[ind] = 1
                det_t[ind] = t
                if nd == det_times.size:
                    new_dt = np.empty(2 * nd, np.float64)
                    new_dt[:nd] = det_times
                    det_times = new_dt
                det_times[nd] = t
                nd += 1
                r += 1.0
        else:
            kind = IMMIGRATE
            S += 1

        if n_ev == ev_t.size:
            big = 2 * n_ev
            new_t = np.empty(big, np.float64)
            new_kind = np.empty(big, np.uint8)
            new_id = np.empty(big, np.int32)
            new_t[:n_ev] = ev_t
            new_kind[:n_ev] = ev_kind
            new_id[:n_ev] = ev_id
            ev_t = new_t
            ev_kind = new_kind
            ev_id = new_id
        ev_t[n_ev] = t
        ev_kind[n_ev] = kind
        ev_id[n_ev] = ind
        n_ev += 1
        if n_ev >= event_cap:
            truncated = True
            break

        since_resum += 1
        # amortized exact resummation of the pressure; the second guard
        # keeps total resummation work linear when detections are many
        if since_resum >= resum_every and since_resum >= nd:
            rr = 0.0
            for i in range(nd):
                rr += np.exp(-c * (t - det_times[i]))
            r = rr
            since_resum = 0

    if not truncated:
        r *= np.exp(-c * (horizon - t))
        t = horizon

    return (ev_t[:n_ev].copy(), ev_kind[:n_ev].copy(), ev_id[:n_ev].copy(),
            inf_t[:n_ind].copy(), det_t[:n_ind].copy(), det_k[:n_ind].copy(),
            det_times[:nd].copy(), t, S, I, R1, R2, r, truncated)


@dataclass(frozen=True, eq=False)
class EpidemicPath:
    """One realization of the epidemic up to the horizon.

    ``times``, ``kinds`` and ``ids`` describe the event log; ``ids`` refer
    to infectious individuals (-1 for susceptible-only events).  The
    per-individual arrays are indexed by id: individuals present at the
    start get ids ``0 .. I0-1`` with infection time equal to the start
    time, later infections are numbered in event order.
    ``detection_kinds`` is -1 while undetected, 0 for screening, 1 for
    contact tracing, and ``detection_times`` is NaN while undetected.

    ``truncated`` marks paths stopped early by the event cap; their
    ``final.t`` is the time of the last event rather than the horizon.
    """

    params: Parameters
    init: PopulationState
    horizon: float
    seed: int
    times: np.ndarray
    kinds: np.ndarray
    ids: np.ndarray
    infection_times: np.ndarray
    detection_times: np.ndarray
    detection_kinds: np.ndarray
    final: PopulationState
    truncated: bool

    @property
    def n_events(self) -> int:
        return len(self.times)

    @property
    def n_individuals(self) -> int:
        return len(self.infection_times)

    def counts_at(self, times) -> tuple[np.ndarray, np.ndarray, np.ndarray, np.ndarray]:
        """(S, I, R1, R2) of the right-continuous path at the given times."""
        q = np.atleast_1d(np.asarray(times, dtype=float))
        # per-kind event counts up to each query time (event times are sorted)
        upto = {kind: np.searchsorted(self.times[self.kinds == kind], q, side="right")
                for kind in (INFECT, DEATH_S, DEATH_I, DETECT_SCREEN, DETECT_CT,
                             IMMIGRATE)}
        S = self.init.S - upto[INFECT] - upto[DEATH_S] + upto[IMMIGRATE]
        I = self.init.I + upto[INFECT] - upto[DEATH_I] \
            - upto[DETECT_SCREEN] - upto[DETECT_CT]
        R1 = self.init.R1 + upto[DETECT_SCREEN]
        R2 = self.init.R2 + upto[DETECT_CT]
        return S, I, R1, R2


def simulate(params: Parameters, init: PopulationState, horizon: float, seed: int,
             event_cap: int = DEFAULT_EVENT_CAP,
             resum_every: int = DEFAULT_RESUM_EVERY) -> EpidemicPath:
    """Simulate the epidemic from ``init`` until ``horizon``.

    ``seed`` must fit in 64 bits.  ``event_cap`` bounds the number of
    events; a path that hits it is returned with ``truncated=True``.
    """
    if not np.isfinite(horizon) or horizon < init.t:
        raise ValueError(f"horizon must be finite and >= init.t, got {horizon}")
    seed = int(seed)
    if not 0 <= seed < 2**64:
        raise ValueError("seed must fit in an unsigned 64-bit integer")
    if event_cap < 1 or resum_every < 1:
        raise ValueError("event_cap and resum_every must be positive")

    out = _sim_kernel(
        np.uint64(seed), variant_code(params.variant),
        params.lambda0, params.mu0, params.mu1,
        params.lambda1, params.lambda2, params.lambda3, params.c,
        int(init.S), int(init.I), int(init.R1), int(init.R2),
        float(init.t), float(horizon),
        np.ascontiguousarray(init.detection_times, dtype=np.float64),
        int(event_cap), int(resum_every))
    (ev_t, ev_kind, ev_id, inf_t, det_t, det_k,
     all_det, t_end, S, I, R1, R2, _r_end, truncated) = out

    final = PopulationState(t=t_end, S=int(S), I=int(I), R1=int(R1), R2=int(R2),
                            detection_times=all_det)
    return EpidemicPath(params=params, init=init, horizon=float(horizon), seed=seed,
                        times=ev_t, kinds=ev_kind, ids=ev_id,
                        infection_times=inf_t, detection_times=det_t,
                        detection_kinds=det_k, final=final, truncated=bool(truncated))


def spawn_seeds(root_seed: int, n: int) -> np.ndarray:
    """Derive ``n`` independent 64-bit simulation seeds from a root seed.

    All drivers use this (via numpy's SeedSequence) so that any job's
    seed is reproducible from the root seed and the job index alone.
    """
    return np.random.SeedSequence(int(root_seed)).generate_state(int(n), np.uint64)


def warm_up() -> None:
    """Force compilation of the simulation kernel (first call is slow)."""
    p = Parameters(mu1=0.1, lambda1=0.5, lambda2=1.0, lambda3=0.2, c=1.0)
    simulate(p, PopulationState(t=0.0, S=5, I=1), horizon=1.0, seed=1)
