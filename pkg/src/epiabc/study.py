"""Experiment drivers: ABC fits, the synthetic study, predictive checks.

All randomness descends from one root seed through numpy SeedSequence
spawning, with a fixed derivation order per job (documented on each
driver), so results are reproducible and independent of the worker count.
"""

from __future__ import annotations

import math
import warnings
from dataclasses import dataclass, field, replace

import numpy as np

from .abc import (
    AllWeightsZeroError,
    WeightedPosterior,
    path_weights,
    tolerance_from_rate,
    vector_weights,
)
from .adjust import NCHConfig, locl_adjust, nch_adjust, nch_fit
from .io import DetectionDataset, config_hash, read_table, write_table
from .model import (
    DETECT_SCREEN,
    MASS_ACTION,
    THETA_NAMES,
    Parameters,
    PopulationState,
)
from .priors import hiv_priors, make_rng, sample_theta
from .simulate import DEFAULT_EVENT_CAP, DEFAULT_RESUM_EVERY, EpidemicPath, simulate
from .summaries import (
    StepPath,
    detection_paths,
    l1_distance,
    mean_sojourn,
    scale_for,
    vector_length,
    vector_summary,
)
from .util import job_map

LN10 = math.log(10.0)

# tolerance-rate grids used by the synthetic study
PATH_RATES = (0.007, 0.02, 0.06, 0.13, 0.27, 0.37, 0.45, 0.53, 0.66, 0.80, 1.0)
VECTOR_RATES = (0.01, 0.05, 0.10, 0.25, 0.50, 0.50, 0.75, 1.0)

PATH_REJECTION = "path-rejection"
VECTOR_REJECTION = "vector-rejection"
VECTOR_LOCL = "vector-locl"
VECTOR_NCH = "vector-nch"
METHODS = (PATH_REJECTION, VECTOR_REJECTION, VECTOR_LOCL, VECTOR_NCH)


@dataclass(frozen=True)
class SimTemplate:
    """Fixed simulation setup; inferred rates are filled in per draw."""

    base: Parameters
    init: PopulationState
    horizon: float
    theta_names: tuple = THETA_NAMES
    event_cap: int = DEFAULT_EVENT_CAP
    resum_every: int = DEFAULT_RESUM_EVERY

    def params_for(self, theta) -> Parameters:
        values = {name: float(v) for name, v in zip(self.theta_names, theta)}
        return replace(self.base, **values)

    def simulate(self, theta, seed) -> EpidemicPath:
        return simulate(self.params_for(theta), self.init, self.horizon, seed,
                        event_cap=self.event_cap, resum_every=self.resum_every)


@dataclass(frozen=True, eq=False)
class SimResults:
    """Outcome of one batch of prior-predictive simulations.

    ``d1``/``d2`` are L1 distances of the two detection paths to the
    observed ones (NaN when no observation was supplied); ``summaries``
    is the vector-summary matrix (None when not collected).
    """

    thetas: np.ndarray
    seeds: np.ndarray
    names: tuple
    d1: np.ndarray
    d2: np.ndarray
    summaries: np.ndarray | None
    truncated: np.ndarray
    sojourn_valid: np.ndarray | None
    years: int | None = None
    window: int | None = None

    @property
    def n(self) -> int:
        return len(self.thetas)


def _simulate_chunk(args):
    (thetas, seeds, template, obs_r1, obs_r2, years, window) = args
    n = len(thetas)
    d1 = np.full(n, np.nan)
    d2 = np.full(n, np.nan)
    summaries = None
    sojourn_valid = None
    if years is not None:
        summaries = np.empty((n, vector_length(years, window)))
        sojourn_valid = np.empty(n, bool)
    truncated = np.empty(n, bool)
    for i in range(n):
        path = template.simulate(thetas[i], seeds[i])
        truncated[i] = path.truncated
        if obs_r1 is not None:
            sim_r1, sim_r2 = detection_paths(path)
            d1[i] = l1_distance(sim_r1, obs_r1)
            d2[i] = l1_distance(sim_r2, obs_r2)
        if years is not None:
            vec = vector_summary(path, years, window)
            summaries[i] = vec.values
            sojourn_valid[i] = vec.sojourn_valid
    return d1, d2, summaries, truncated, sojourn_valid


def run_prior_simulations(priors: dict, template: SimTemplate, n: int,
                          sim_seeds: np.ndarray, prior_seed,
                          obs_paths: tuple[StepPath, StepPath] | None = None,
                          years: int | None = None,
                          window: int | None = None) -> SimResults:
    """Draw n parameter vectors from the priors and simulate each once.

    ``sim_seeds`` must have length n (one 64-bit seed per simulation);
    ``prior_seed`` seeds the parameter draws.  Distances to ``obs_paths``
    and/or vector summaries are computed per simulation and the paths are
    discarded, keeping memory flat.
    """
    names = tuple(priors)
    if names != template.theta_names:
        raise ValueError("prior names must match the template's theta names")
    if years is not None and window is None:
        window = years
    thetas = sample_theta(priors, make_rng(prior_seed), n)
    sim_seeds = np.asarray(sim_seeds, dtype=np.uint64)
    if sim_seeds.shape != (n,):
        raise ValueError("need one simulation seed per draw")

    obs_r1, obs_r2 = obs_paths if obs_paths is not None else (None, None)
    n_chunks = max(1, min(64, n // 64))
    bounds = np.linspace(0, n, n_chunks + 1).astype(int)
    jobs = [(thetas[a:b], sim_seeds[a:b], template, obs_r1, obs_r2, years, window)
            for a, b in zip(bounds[:-1], bounds[1:]) if b > a]
    parts = job_map(_simulate_chunk, jobs)

    d1 = np.concatenate([p[0] for p in parts])
    d2 = np.concatenate([p[1] for p in parts])
    summaries = np.concatenate([p[2] for p in parts]) if years is not None else None
    truncated = np.concatenate([p[3] for p in parts])
    sojourn_valid = (np.concatenate([p[4] for p in parts])
                     if years is not None else None)
    return SimResults(thetas=thetas, seeds=sim_seeds, names=names, d1=d1, d2=d2,
                      summaries=summaries, truncated=truncated,
                      sojourn_valid=sojourn_valid, years=years, window=window)


def path_posterior(sim: SimResults, priors: dict, rate: float):
    """Smooth-rejection posterior from the two path distances.

    Returns (posterior, delta1, delta2).
    """
    weights, delta1, delta2 = path_weights(sim.d1, sim.d2, rate)
    wp = WeightedPosterior(thetas=sim.thetas, weights=weights,
                           names=sim.names, priors=priors)
    return wp, delta1, delta2


def vector_posterior(sim: SimResults, obs_values: np.ndarray, priors: dict,
                     rate: float, scale: np.ndarray | None = None):
    """Smooth-rejection posterior from scaled vector summaries.

    Returns (posterior, delta, scale).
    """
    if sim.summaries is None:
        raise ValueError("simulations were run without vector summaries")
    if scale is None:
        scale = scale_for(sim.summaries)
    weights, delta = vector_weights(sim.summaries, obs_values, scale, rate)
    wp = WeightedPosterior(thetas=sim.thetas, weights=weights,
                           names=sim.names, priors=priors)
    return wp, delta, scale


def adjusted_posterior(sim: SimResults, obs_values: np.ndarray, priors: dict,
                       rate: float, method: str, scale: np.ndarray | None = None,
                       nch_config: NCHConfig = NCHConfig(), fit_seed: int = 0):
    """Regression-adjusted posterior (LOCL or NCH) at one tolerance rate.

    Draws are adjusted coordinatewise on their working scale using the
    rejection weights at ``rate``, then mapped back to the natural scale
    (so they stay inside the prior support).  Returns (posterior, info)
    where info records deltas and fit flags.
    """
    if method not in (VECTOR_LOCL, VECTOR_NCH):
        raise ValueError(f"unknown adjustment method {method!r}")
    if scale is None:
        scale = scale_for(sim.summaries)
    weights, delta = vector_weights(sim.summaries, obs_values, scale, rate)
    xs = sim.summaries / scale
    xo = np.asarray(obs_values, dtype=float) / scale

    adjusted = np.empty_like(sim.thetas)
    info = {"delta": delta, "ridge_used": [], "method": method}
    for j, name in enumerate(sim.names):
        prior = priors[name]
        y = prior.to_working(sim.thetas[:, j])
        if method == VECTOR_LOCL:
            res = locl_adjust(y, xs, xo, weights)
            info["ridge_used"].append(res.ridge_used)
            y_adj = res.adjusted
        else:
            cfg = replace(nch_config, seed=int(fit_seed) + j)
            model = nch_fit(y, xs, weights, cfg)
            y_adj = nch_adjust(model, y, xs, xo)
        adjusted[:, j] = prior.from_working(y_adj)
    wp = WeightedPosterior(thetas=adjusted, weights=weights,
                           names=sim.names, priors=priors)
    return wp, info


def observed_paths_from(obs) -> tuple[StepPath, StepPath]:
    """Detection counting paths of an EpidemicPath or DetectionDataset."""
    if isinstance(obs, EpidemicPath):
        return detection_paths(obs)
    if isinstance(obs, DetectionDataset):
        return obs.counting_paths()
    raise TypeError(f"cannot extract detection paths from {type(obs).__name__}")


def abc_rejection(obs, priors: dict, template: SimTemplate, n: int, rate: float,
                  seed: int, mode: str = "path",
                  years: int | None = None, window: int | None = None):
    """One-stop smooth-rejection fit against observed data.

    Seed derivation: SeedSequence(seed).spawn(2) -> (prior draws,
    simulation seeds).  ``obs`` is an EpidemicPath or DetectionDataset in
    path mode; vector mode needs an EpidemicPath (or a precomputed
    summary via the lower-level drivers).  Returns (posterior, sim
    results, info dict).
    """
    prior_ss, sim_ss = np.random.SeedSequence(int(seed)).spawn(2)
    sim_seeds = sim_ss.generate_state(n, np.uint64)
    if mode == "path":
        obs_paths = observed_paths_from(obs)
        sim = run_prior_simulations(priors, template, n, sim_seeds, prior_ss,
                                    obs_paths=obs_paths)
        wp, d1, d2 = path_posterior(sim, priors, rate)
        return wp, sim, {"delta1": d1, "delta2": d2, "mode": mode}
    if mode == "vector":
        if years is None:
            raise ValueError("vector mode needs the number of observation years")
        if not isinstance(obs, EpidemicPath):
            raise TypeError("vector mode needs a simulated path as observation")
        obs_vec = vector_summary(obs, years, window)
        # path distances are recorded too, so the archive serves both modes
        sim = run_prior_simulations(priors, template, n, sim_seeds, prior_ss,
                                    obs_paths=detection_paths(obs),
                                    years=years, window=window)
        wp, delta, scale = vector_posterior(sim, obs_vec.values, priors, rate)
        return wp, sim, {"delta": delta, "scale": scale, "mode": mode,
                         "obs_values": obs_vec.values}
    raise ValueError(f"unknown mode {mode!r}")


def rmse(estimates, truth: float, prior_range_log10: float) -> float:
    """Mean squared log-error rescaled by the squared prior range.

    Natural logs; the prior range (given in decades) is converted with
    the same base, so the value is convention-free.
    """
    estimates = np.asarray(estimates, dtype=float)
    if estimates.size < 1:
        raise ValueError("need at least one estimate")
    if truth <= 0 or np.any(estimates <= 0):
        raise ValueError("estimates and truth must be positive")
    range_e = prior_range_log10 * LN10
    return float(np.mean((np.log(estimates) - math.log(truth)) ** 2 / range_e ** 2))


def rmci(ci_lengths, prior_range: float) -> float:
    """Mean credible-interval length rescaled by the prior range.

    Lengths and range must share a scale; the study measures both in
    decades (log10 of the interval endpoints' ratio).
    """
    ci_lengths = np.asarray(ci_lengths, dtype=float)
    if np.any(ci_lengths < 0):
        raise ValueError("interval lengths must be nonnegative")
    if prior_range <= 0:
        raise ValueError("prior range must be positive")
    return float(np.mean(ci_lengths) / prior_range)


@dataclass(frozen=True)
class StudyConfig:
    """Configuration of the synthetic recovery study.

    Defaults give a desk-scale version (m=20 replicates, n=5000 sims)
    of the full benchmark; all knobs are YAML-overridable.  ``truth``
    follows THETA_NAMES order.  The duplicated 0.50 entry of the vector
    grid is kept as configured; duplicate rates are computed once and
    reported once per distinct value.
    """

    m: int = 20
    n: int = 5000
    s0: int = 6_000_000
    i0: int = 232
    horizon: float = 6.0
    years: int = 6
    window: int = 6
    truth: tuple = (2e-6, 1.14e-7, 3.75e-1, 6.55e-5, 1.0)
    variant: str = MASS_ACTION
    lambda0: float = 0.0
    mu0: float = 0.0
    event_cap: int = 1_000_000
    path_rates: tuple = PATH_RATES
    vector_rates: tuple = VECTOR_RATES
    nch_epochs: int = 150
    nch_hidden: int = 8
    nch_members: int = 10
    nch_learning_rate: float = 0.05

    def template(self) -> SimTemplate:
        base = Parameters(**dict(zip(THETA_NAMES, self.truth)),
                          lambda0=self.lambda0, mu0=self.mu0, variant=self.variant)
        init = PopulationState(t=0.0, S=self.s0, I=self.i0)
        return SimTemplate(base=base, init=init, horizon=self.horizon,
                           event_cap=self.event_cap)

    def nch_config(self) -> NCHConfig:
        return NCHConfig(hidden=self.nch_hidden, members=self.nch_members,
                         epochs=self.nch_epochs,
                         learning_rate=self.nch_learning_rate)

    def meta(self) -> dict:
        return {name: getattr(self, name) for name in (
            "m", "n", "s0", "i0", "horizon", "years", "window", "truth",
            "variant", "lambda0", "mu0", "event_cap", "path_rates",
            "vector_rates", "nch_epochs", "nch_hidden", "nch_members",
            "nch_learning_rate")}

    @classmethod
    def from_mapping(cls, mapping: dict) -> "StudyConfig":
        known = {f for f in cls.__dataclass_fields__}
        bad = set(mapping) - known
        if bad:
            raise ValueError(f"unknown study config keys: {sorted(bad)}")
        clean = {k: (tuple(v) if isinstance(v, list) else v)
                 for k, v in mapping.items()}
        return cls(**clean)


@dataclass(frozen=True, eq=False)
class StudyReport:
    """Estimates and aggregate metrics of a synthetic study run."""

    config: StudyConfig
    seed: int
    estimates: dict       # column name -> array, one row per (rep, method, rate, param)
    metrics: dict         # column name -> array, one row per (method, rate, param)
    failures: list
    ridge_count: int

    def metric(self, method: str, rate: float, param: str, name: str) -> float:
        sel = ((self.metrics["method"] == method)
               & (np.isclose(self.metrics["rate"].astype(float), rate))
               & (self.metrics["param"] == param))
        values = self.metrics[name][sel]
        if values.size != 1:
            raise KeyError(f"no unique metric row for {(method, rate, param)}")
        return float(values[0])

    def estimate_rows(self, method: str, param: str, rate: float | None = None):
        sel = (self.estimates["method"] == method) & (self.estimates["param"] == param)
        if rate is not None:
            sel &= np.isclose(self.estimates["rate"].astype(float), rate)
        return {k: v[sel] for k, v in self.estimates.items()}

    def save(self, out_dir) -> None:
        """Write estimates.tsv, metrics.tsv and a readable summary.txt."""
        import os

        os.makedirs(out_dir, exist_ok=True)
        meta = {k: repr(v) for k, v in self.config.meta().items()}
        meta["seed"] = repr(self.seed)
        meta["config_hash"] = config_hash(meta)
        meta["failures"] = repr(len(self.failures))
        meta["ridge_count"] = repr(self.ridge_count)
        write_table(os.path.join(out_dir, "estimates.tsv"), meta, self.estimates)
        write_table(os.path.join(out_dir, "metrics.tsv"), meta, self.metrics)
        lines = [f"synthetic study: m={self.config.m} n={self.config.n} "
                 f"seed={self.seed}"]
        if self.failures:
            lines.append(f"failures (rep, stage, rate, error): {self.failures!r}")
        lines.append("method rate param rmse_mode rmse_median rmci")
        for row in range(len(self.metrics["method"])):
            lines.append(" ".join(str(self.metrics[k][row]) for k in
                                  ("method", "rate", "param",
                                   "rmse_mode", "rmse_median", "rmci")))
        with open(os.path.join(out_dir, "summary.txt"), "w") as fh:
            fh.write("\n".join(lines) + "\n")


SIMS_KIND = "epiabc-sims"


def template_meta(template: SimTemplate) -> dict:
    """String metadata from which :func:`template_from_meta` rebuilds."""
    base, init = template.base, template.init
    meta = {f"model_{n}": repr(getattr(base, n)) for n in THETA_NAMES}
    meta.update(model_lambda0=repr(base.lambda0), model_mu0=repr(base.mu0),
                variant=base.variant, init_t=repr(init.t), init_s=repr(init.S),
                init_i=repr(init.I), init_r1=repr(init.R1),
                init_r2=repr(init.R2),
                init_detections=",".join(repr(float(t))
                                         for t in init.detection_times),
                horizon=repr(template.horizon),
                theta_names=",".join(template.theta_names),
                event_cap=repr(template.event_cap),
                resum_every=repr(template.resum_every))
    return meta


def template_from_meta(meta: dict) -> SimTemplate:
    base = Parameters(**{n: float(meta[f"model_{n}"]) for n in THETA_NAMES},
                      lambda0=float(meta["model_lambda0"]),
                      mu0=float(meta["model_mu0"]), variant=meta["variant"])
    det = meta.get("init_detections", "")
    det_times = np.array([float(t) for t in det.split(",")] if det else [])
    init = PopulationState(t=float(meta["init_t"]), S=int(meta["init_s"]),
                           I=int(meta["init_i"]), R1=int(meta["init_r1"]),
                           R2=int(meta["init_r2"]), detection_times=det_times)
    return SimTemplate(base=base, init=init, horizon=float(meta["horizon"]),
                       theta_names=tuple(meta["theta_names"].split(",")),
                       event_cap=int(meta["event_cap"]),
                       resum_every=int(meta["resum_every"]))


def save_sims(file, sim: SimResults, template: SimTemplate, priors_spec: str,
              obs_values=None, extra_meta: dict | None = None) -> None:
    """Archive a simulation batch with everything needed to reuse it.

    The metadata carries the template, the prior spec string, the
    summary layout and (when given) the observed summary vector, so a
    fit can be re-run or adjusted from the file alone.
    """
    meta = {"kind": SIMS_KIND, "priors": priors_spec,
            "years": repr(sim.years), "window": repr(sim.window)}
    meta.update(template_meta(template))
    if obs_values is not None:
        meta["obs_values"] = ",".join(repr(float(v)) for v in obs_values)
    if extra_meta:
        meta.update(extra_meta)
    columns = {"seed": sim.seeds}
    for j, name in enumerate(sim.names):
        columns[f"theta_{name}"] = sim.thetas[:, j]
    columns["truncated"] = sim.truncated
    columns["d1"] = sim.d1
    columns["d2"] = sim.d2
    if sim.summaries is not None:
        columns["sojourn_valid"] = sim.sojourn_valid
        for k in range(sim.summaries.shape[1]):
            columns[f"s{k}"] = sim.summaries[:, k]
    write_table(file, meta, columns)


def load_sims(file):
    """Read a :func:`save_sims` archive.

    Returns (sim, template, priors_spec, obs_values, meta); obs_values is
    None when the archive holds no observed summary.
    """
    meta, cols = read_table(file)
    if meta.get("kind") != SIMS_KIND:
        raise ValueError(f"{file}: not a simulation archive")
    template = template_from_meta(meta)
    names = template.theta_names
    years = None if meta["years"] == "None" else int(meta["years"])
    window = None if meta["window"] == "None" else int(meta["window"])
    thetas = np.column_stack([cols[f"theta_{name}"] for name in names])
    summaries = None
    sojourn_valid = None
    if years is not None:
        d = vector_length(years, window)
        summaries = np.column_stack([cols[f"s{k}"] for k in range(d)])
        sojourn_valid = cols["sojourn_valid"].astype(bool)
    obs_values = None
    if "obs_values" in meta:
        obs_values = np.array([float(v) for v in meta["obs_values"].split(",")])
    sim = SimResults(thetas=thetas, seeds=cols["seed"], names=names,
                     d1=cols["d1"], d2=cols["d2"], summaries=summaries,
                     truncated=cols["truncated"].astype(bool),
                     sojourn_valid=sojourn_valid, years=years, window=window)
    return sim, template, meta["priors"], obs_values, meta


POSTERIOR_KIND = "epiabc-posterior"


def save_posterior(file, wp: WeightedPosterior, template: SimTemplate,
                   priors_spec: str, extra_meta: dict | None = None) -> None:
    """Write a weighted posterior with enough metadata to simulate from it."""
    meta = {"kind": POSTERIOR_KIND, "priors": priors_spec}
    meta.update(template_meta(template))
    if extra_meta:
        meta.update(extra_meta)
    columns = {f"theta_{name}": wp.thetas[:, j]
               for j, name in enumerate(wp.names)}
    columns["weight"] = wp.weights
    write_table(file, meta, columns)


def load_posterior(file):
    """Read a :func:`save_posterior` file.

    Returns (posterior, template, priors_spec, meta).
    """
    from .priors import priors_from_spec

    meta, cols = read_table(file)
    if meta.get("kind") != POSTERIOR_KIND:
        raise ValueError(f"{file}: not a posterior file")
    template = template_from_meta(meta)
    names = template.theta_names
    thetas = np.column_stack([cols[f"theta_{name}"] for name in names])
    priors = priors_from_spec(meta["priors"])
    wp = WeightedPosterior(thetas=thetas, weights=cols["weight"],
                           names=names, priors=priors)
    return wp, template, meta["priors"], meta


def _archive_file(archive_dir, rep: int) -> str:
    import os

    return os.path.join(archive_dir, f"sims_rep{rep:03d}.tsv")


def run_synthetic_study(config: StudyConfig, seed: int, archive_dir=None,
                        progress=None) -> StudyReport:
    """Parameter-recovery study over config.m synthetic datasets.

    Per replicate k: SeedSequence(seed).spawn(m)[k] spawns (observation,
    prior draws, simulation seeds, fit seeds) in that order; the observed
    dataset is simulated at config.truth, n prior-predictive simulations
    are fitted by all four methods over the tolerance grids, and modes,
    medians and central 95% intervals are recorded per parameter.

    With ``archive_dir`` set, per-replicate simulation results are
    written there and reused on rerun when the configuration hash
    matches, making studies resumable; archived reruns give identical
    reports.  Failures are recorded, not silently dropped: a fit whose
    weights all vanish (possible for the product kernel at very small
    rates, when the two accepted sets are disjoint) loses that
    (replicate, method, rate) cell only, and a failure during the
    simulation stage loses the replicate.
    """
    import os

    template = config.template()
    priors = hiv_priors()
    names = tuple(priors)
    truth = dict(zip(THETA_NAMES, config.truth))
    cfg_hash = config_hash({k: repr(v) for k, v in {**config.meta(),
                                                    "seed": seed}.items()})
    if archive_dir:
        os.makedirs(archive_dir, exist_ok=True)

    est_rows = {k: [] for k in ("rep", "method", "rate", "param",
                                "mode", "median", "q025", "q975")}

    def record(rep, method, rate, wp):
        # compute every value before touching est_rows so an exception
        # cannot leave the table with ragged columns
        rows = []
        for name in names:
            q025, q50, q975 = wp.quantile(name, np.array([0.025, 0.5, 0.975]))
            rows.append((name, wp.mode(name), float(q50), float(q025), float(q975)))
        for name, mode, q50, q025, q975 in rows:
            est_rows["rep"].append(rep)
            est_rows["method"].append(method)
            est_rows["rate"].append(rate)
            est_rows["param"].append(name)
            est_rows["mode"].append(mode)
            est_rows["median"].append(q50)
            est_rows["q025"].append(q025)
            est_rows["q975"].append(q975)

    failures = []
    ridge_count = 0

    def one_fit(rep, method, rate, fit):
        nonlocal ridge_count
        try:
            wp, ridge = fit()
            ridge_count += ridge
            record(rep, method, rate, wp)
        except AllWeightsZeroError as exc:
            failures.append((rep, method, rate, repr(exc)))

    rep_seqs = np.random.SeedSequence(int(seed)).spawn(config.m)
    for rep, rep_ss in enumerate(rep_seqs):
        obs_ss, prior_ss, sim_ss, fit_ss = rep_ss.spawn(4)
        try:
            archive = _archive_file(archive_dir, rep) if archive_dir else None
            if archive and os.path.exists(archive):
                sim, _, _, obs_values, ameta = load_sims(archive)
                if ameta.get("config_hash") != cfg_hash:
                    raise ValueError(f"{archive}: simulation archive was made "
                                     "under a different study configuration")
            else:
                obs_seed = obs_ss.generate_state(1, np.uint64)[0]
                obs_path = template.simulate(config.truth, obs_seed)
                obs_vec = vector_summary(obs_path, config.years, config.window)
                obs_values = obs_vec.values
                sim_seeds = sim_ss.generate_state(config.n, np.uint64)
                sim = run_prior_simulations(
                    priors, template, config.n, sim_seeds, prior_ss,
                    obs_paths=detection_paths(obs_path),
                    years=config.years, window=config.window)
                if archive:
                    save_sims(archive, sim, template, "hiv", obs_values,
                              extra_meta={"config_hash": cfg_hash,
                                          "rep": repr(rep)})

            for rate in sorted(set(config.path_rates)):
                one_fit(rep, PATH_REJECTION, rate, lambda:
                        (path_posterior(sim, priors, rate)[0], 0))

            scale = scale_for(sim.summaries)
            fit_seeds = fit_ss.generate_state(len(set(config.vector_rates)) * 2,
                                              np.uint64)
            for ridx, rate in enumerate(sorted(set(config.vector_rates))):
                one_fit(rep, VECTOR_REJECTION, rate, lambda:
                        (vector_posterior(sim, obs_values, priors, rate,
                                          scale)[0], 0))

                def locl_fit():
                    wp, info = adjusted_posterior(sim, obs_values, priors,
                                                  rate, VECTOR_LOCL, scale)
                    return wp, int(np.sum(info["ridge_used"]))

                one_fit(rep, VECTOR_LOCL, rate, locl_fit)
                one_fit(rep, VECTOR_NCH, rate, lambda:
                        (adjusted_posterior(sim, obs_values, priors, rate,
                                            VECTOR_NCH, scale,
                                            nch_config=config.nch_config(),
                                            fit_seed=int(fit_seeds[ridx]))[0], 0))
            if progress is not None:
                progress(f"replicate {rep + 1}/{config.m} done")
        except Exception as exc:  # noqa: BLE001 - reported, never dropped
            failures.append((rep, "replicate", None, repr(exc)))
            if progress is not None:
                progress(f"replicate {rep} failed: {exc!r}")

    estimates = {
        "rep": np.array(est_rows["rep"], np.int64),
        "method": np.array(est_rows["method"], str),
        "rate": np.array(est_rows["rate"], float),
        "param": np.array(est_rows["param"], str),
        "mode": np.array(est_rows["mode"], float),
        "median": np.array(est_rows["median"], float),
        "q025": np.array(est_rows["q025"], float),
        "q975": np.array(est_rows["q975"], float),
    }

    met_rows = {k: [] for k in ("method", "rate", "param",
                                "rmse_mode", "rmse_median", "rmci")}
    method_rates = [(PATH_REJECTION, r) for r in sorted(set(config.path_rates))]
    for m in (VECTOR_REJECTION, VECTOR_LOCL, VECTOR_NCH):
        method_rates += [(m, r) for r in sorted(set(config.vector_rates))]
    for method, rate in method_rates:
        for name in names:
            sel = ((estimates["method"] == method)
                   & np.isclose(estimates["rate"], rate)
                   & (estimates["param"] == name))
            if not np.any(sel):
                continue
            rng_decades = priors[name].range_log10()
            met_rows["method"].append(method)
            met_rows["rate"].append(rate)
            met_rows["param"].append(name)
            met_rows["rmse_mode"].append(
                rmse(estimates["mode"][sel], truth[name], rng_decades))
            met_rows["rmse_median"].append(
                rmse(estimates["median"][sel], truth[name], rng_decades))
            lengths = (np.log10(estimates["q975"][sel])
                       - np.log10(estimates["q025"][sel]))
            met_rows["rmci"].append(rmci(lengths, rng_decades))
    metrics = {
        "method": np.array(met_rows["method"], str),
        "rate": np.array(met_rows["rate"], float),
        "param": np.array(met_rows["param"], str),
        "rmse_mode": np.array(met_rows["rmse_mode"], float),
        "rmse_median": np.array(met_rows["rmse_median"], float),
        "rmci": np.array(met_rows["rmci"], float),
    }
    return StudyReport(config=config, seed=int(seed), estimates=estimates,
                       metrics=metrics, failures=failures, ridge_count=ridge_count)


def resample_thetas(posterior: WeightedPosterior, n: int,
                    rng: np.random.Generator) -> np.ndarray:
    """Weighted bootstrap of posterior draws (n rows)."""
    w = posterior.weights
    total = np.sum(w)
    if total <= 0:
        raise AllWeightsZeroError("posterior has no positive weights")
    idx = rng.choice(len(w), size=n, p=w / total)
    return posterior.thetas[idx]


@dataclass(frozen=True)
class PredictionErrorResult:
    """Monte Carlo forward-prediction error and extinction diagnostics."""

    value: float
    n_extinct: int
    n_forward: int
    r1_obs: int
    r2_obs: int


def _observed_counts(obs: DetectionDataset, at: float) -> tuple[int, int]:
    upto = obs.times <= at
    r1 = int(np.sum(upto & (obs.modes == 0)))
    r2 = int(np.sum(upto & (obs.modes == 1)))
    return r1, r2


def prediction_error(posterior: WeightedPosterior, template: SimTemplate,
                     obs: DetectionDataset, eval_horizon: float,
                     n_forward: int, seed: int,
                     train_horizon: float | None = None) -> PredictionErrorResult:
    """Mean relative error of detection counts predicted at eval_horizon.

    The posterior is assumed fitted on data up to ``train_horizon``
    (default: the template horizon); paths are re-simulated from the
    template's initial state out to ``eval_horizon`` with parameters
    resampled from the posterior, integrating over posterior and
    simulation noise, and the error averages
    |R1 - R1_obs|/R1_obs + |R2 - R2_obs|/R2_obs at the evaluation time.
    Forward extinctions (no detections at all) are counted and flagged
    when universal.
    """
    train = template.horizon if train_horizon is None else float(train_horizon)
    if not eval_horizon > train:
        raise ValueError("evaluation horizon must exceed the training horizon")
    r1_obs, r2_obs = _observed_counts(obs, eval_horizon)
    if r1_obs <= 0 or r2_obs <= 0:
        raise ValueError("both observed detection counts must be positive "
                         "at the evaluation horizon")
    forward = replace(template, horizon=float(eval_horizon))
    ss = np.random.SeedSequence(int(seed))
    rng = make_rng(ss.spawn(1)[0])
    thetas = resample_thetas(posterior, n_forward, rng)
    seeds = ss.generate_state(n_forward, np.uint64)
    err = 0.0
    extinct = 0
    for theta, s in zip(thetas, seeds):
        path = forward.simulate(theta, s)
        r1, r2 = path.final.R1, path.final.R2
        if r1 + r2 == 0:
            extinct += 1
        err += abs(r1 - r1_obs) / r1_obs + abs(r2 - r2_obs) / r2_obs
    if extinct == n_forward:
        warnings.warn("all forward simulations went extinct with no detections",
                      RuntimeWarning)
    return PredictionErrorResult(value=err / n_forward, n_extinct=extinct,
                                 n_forward=n_forward, r1_obs=r1_obs,
                                 r2_obs=r2_obs)


def tune_tolerance(sim: SimResults, priors: dict, rates, template: SimTemplate,
                   obs: DetectionDataset, eval_horizon: float, n_forward: int,
                   seed: int, mode: str = "path", obs_values=None) -> dict:
    """Prediction error of the rejection posterior at each tolerance rate.

    ``sim`` holds prior simulations fitted against data up to the
    template horizon; each rate's posterior is scored by
    :func:`prediction_error` against ``obs`` at ``eval_horizon``.  The
    same forward seeds are reused across rates (paired comparison).
    Returns a table dict with the grid, the per-rate errors and the
    argmin under key ``best_rate``.
    """
    rows = {"rate": [], "error": [], "n_extinct": []}
    scale = scale_for(sim.summaries) if mode == "vector" else None
    for rate in rates:
        if mode == "path":
            wp, _, _ = path_posterior(sim, priors, rate)
        else:
            wp, _, _ = vector_posterior(sim, obs_values, priors, rate, scale)
        res = prediction_error(wp, template, obs, eval_horizon, n_forward, seed)
        rows["rate"].append(float(rate))
        rows["error"].append(res.value)
        rows["n_extinct"].append(res.n_extinct)
    best = int(np.argmin(rows["error"]))
    return {"rate": np.array(rows["rate"]), "error": np.array(rows["error"]),
            "n_extinct": np.array(rows["n_extinct"], np.int64),
            "best_rate": rows["rate"][best]}


def _coverage(i, r1, r2):
    detected = r1 + r2
    total = i + detected
    if total == 0:
        return 0.0
    return detected / total


PPD_STATISTICS = {
    "r1_final": lambda path: float(path.final.R1),
    "r2_final": lambda path: float(path.final.R2),
    "i_final": lambda path: float(path.final.I),
    "detections_total": lambda path: float(path.final.R1 + path.final.R2),
    "mean_sojourn": lambda path: mean_sojourn(
        path, path.horizon - path.init.t)[0],
    "coverage_final": lambda path: _coverage(
        path.final.I, path.final.R1, path.final.R2),
}


def posterior_predictive(posterior: WeightedPosterior, template: SimTemplate,
                         statistic: str, n_draws: int, seed: int) -> np.ndarray:
    """Sample a statistic under the posterior predictive distribution.

    Parameters are resampled from the weighted posterior, one simulation
    per draw; the named statistic (see PPD_STATISTICS) is extracted from
    each path.
    """
    if statistic not in PPD_STATISTICS:
        raise ValueError(f"unknown statistic {statistic!r}; "
                         f"options: {sorted(PPD_STATISTICS)}")
    fn = PPD_STATISTICS[statistic]
    ss = np.random.SeedSequence(int(seed))
    rng = make_rng(ss.spawn(1)[0])
    thetas = resample_thetas(posterior, n_draws, rng)
    seeds = ss.generate_state(n_draws, np.uint64)
    return np.array([fn(template.simulate(theta, s))
                     for theta, s in zip(thetas, seeds)])


def ppd_contains(sample, observed: float, level: float = 0.95) -> bool:
    """Is the observed value inside the central ``level`` band of the sample?"""
    sample = np.asarray(sample, dtype=float)
    alpha = (1.0 - level) / 2.0
    lo, hi = np.quantile(sample, [alpha, 1.0 - alpha])
    return bool(lo <= observed <= hi)


def coverage_curve(posterior: WeightedPosterior, template: SimTemplate,
                   times, n_draws: int, seed: int) -> dict:
    """Median and central 95% band of detection coverage over time.

    Coverage is (R1 + R2) / (I + R1 + R2) with 0/0 read as 0 (nothing to
    detect and nothing detected).  Simulations are drawn like
    :func:`posterior_predictive`.
    """
    times = np.asarray(times, dtype=float)
    ss = np.random.SeedSequence(int(seed))
    rng = make_rng(ss.spawn(1)[0])
    thetas = resample_thetas(posterior, n_draws, rng)
    seeds = ss.generate_state(n_draws, np.uint64)
    cov = np.empty((n_draws, times.size))
    for row, (theta, s) in enumerate(zip(thetas, seeds)):
        path = template.simulate(theta, s)
        _, i_t, r1_t, r2_t = path.counts_at(times)
        det = r1_t + r2_t
        tot = i_t + det
        cov[row] = np.where(tot > 0, det / np.maximum(tot, 1), 0.0)
    q025, q50, q975 = np.quantile(cov, [0.025, 0.5, 0.975], axis=0)
    return {"time": times, "q025": q025, "median": q50, "q975": q975}


def standard_sir_dataset(lambda1: float, lambda2: float, s0: int, i0: int = 1,
                         seed: int = 0, horizon: float | None = None) -> DetectionDataset:
    """Detection times of a simulated standard SIR epidemic (no tracing).

    With ``horizon=None`` the epidemic runs to extinction and the dataset
    horizon is the last detection time (completed-epidemic convention);
    otherwise detections up to the horizon are returned.
    """
    params = Parameters(mu1=0.0, lambda1=lambda1, lambda2=lambda2,
                        lambda3=0.0, c=1.0)
    init = PopulationState(t=0.0, S=s0, I=i0)
    sim_horizon = horizon if horizon is not None else 1e9
    path = simulate(params, init, sim_horizon, seed)
    det = np.sort(path.times[path.kinds == DETECT_SCREEN])
    if det.size == 0:
        raise ValueError("the simulated epidemic produced no detections")
    ds_horizon = float(det[-1]) if horizon is None else float(horizon)
    return DetectionDataset(times=det, modes=np.zeros(det.size, np.int8),
                            horizon=ds_horizon)
