"""Command-line interface.

Subcommands: simulate, abc, adjust, mcmc, study, ppd, tune-tolerance.
All output files are deterministic given the flags (floats via repr, no
timestamps); progress chatter goes to stderr.  Exit codes: 0 success,
2 validation error, 3 degenerate posterior (every weight zero).  The
EPIABC_WORKERS environment variable bounds the worker pool.
"""

from __future__ import annotations

import argparse
import sys

import numpy as np

from .abc import AllWeightsZeroError, posterior_density
from .adjust import NCHConfig
from .io import (
    detections_from_path,
    ingest_detections,
    read_path,
    write_detections,
    write_path,
    write_table,
)
from .model import (
    FREQUENCY_DEPENDENT,
    MASS_ACTION,
    Parameters,
    PopulationState,
)
from .priors import priors_from_spec
from .simulate import DEFAULT_EVENT_CAP, simulate
from .study import (
    PATH_RATES,
    SimTemplate,
    StudyConfig,
    VECTOR_LOCL,
    VECTOR_NCH,
    abc_rejection,
    adjusted_posterior,
    coverage_curve,
    load_posterior,
    load_sims,
    posterior_predictive,
    ppd_contains,
    run_synthetic_study,
    save_posterior,
    save_sims,
    tune_tolerance,
)


def _add_model_flags(p: argparse.ArgumentParser, inference: bool) -> None:
    """Rate flags; for inference commands they fix the non-inferred rates."""
    hint = " (fixed unless inferred)" if inference else ""
    p.add_argument("--mu1", type=float, default=0.0,
                   help=f"death rate of infectives{hint}")
    p.add_argument("--lambda1", type=float, default=0.0,
                   help=f"infection rate{hint}")
    p.add_argument("--lambda2", type=float, default=0.0,
                   help=f"screening detection rate{hint}")
    p.add_argument("--lambda3", type=float, default=0.0,
                   help=f"contact-tracing rate{hint}")
    p.add_argument("--c", type=float, default=1.0,
                   help=f"tracing decay rate{hint}")
    p.add_argument("--lambda0", type=float, default=0.0,
                   help="immigration rate of susceptibles")
    p.add_argument("--mu0", type=float, default=0.0,
                   help="death rate of susceptibles")
    p.add_argument("--variant", choices=[MASS_ACTION, FREQUENCY_DEPENDENT],
                   default=MASS_ACTION, help="contact-tracing rate form")


def _add_init_flags(p: argparse.ArgumentParser) -> None:
    p.add_argument("--s0", type=int, required=True, help="initial susceptibles")
    p.add_argument("--i0", type=int, required=True, help="initial infectives")
    p.add_argument("--t0", type=float, default=0.0, help="start time")


def _params_from(args) -> Parameters:
    return Parameters(mu1=args.mu1, lambda1=args.lambda1, lambda2=args.lambda2,
                      lambda3=args.lambda3, c=args.c, lambda0=args.lambda0,
                      mu0=args.mu0, variant=args.variant)


def _init_from(args) -> PopulationState:
    return PopulationState(t=args.t0, S=args.s0, I=args.i0)


def _template_from(args, priors: dict, horizon: float) -> SimTemplate:
    return SimTemplate(base=_params_from(args), init=_init_from(args),
                       horizon=horizon, theta_names=tuple(priors),
                       event_cap=args.event_cap)


def _print_posterior(wp, file=None) -> None:
    file = file if file is not None else sys.stdout   # late-bound for redirection
    print("param mean mode q025 median q975", file=file)
    for name, row in wp.summary().items():
        print(name, repr(row["mean"]), repr(row["mode"]), repr(row["q025"]),
              repr(row["median"]), repr(row["q975"]), file=file)


def _write_densities(file, wp) -> None:
    """Stacked per-parameter KDE grids, ready for external plotting."""
    cols = {"param": [], "natural": [], "working": [], "density": []}
    for j, name in enumerate(wp.names):
        grid = posterior_density(wp.thetas[:, j], wp.weights,
                                 wp.priors[name] if wp.priors else None)
        cols["param"].extend([name] * grid.natural.size)
        cols["natural"].extend(grid.natural)
        cols["working"].extend(grid.working)
        cols["density"].extend(grid.density)
    write_table(file, {"kind": "epiabc-density"},
                {"param": np.array(cols["param"], str),
                 "natural": np.array(cols["natural"], float),
                 "working": np.array(cols["working"], float),
                 "density": np.array(cols["density"], float)})


def _cmd_simulate(args) -> int:
    path = simulate(_params_from(args), _init_from(args), args.horizon,
                    args.seed, event_cap=args.event_cap)
    final = path.final
    print(f"events {path.n_events} truncated {path.truncated} "
          f"S {final.S} I {final.I} R1 {final.R1} R2 {final.R2}")
    if args.out:
        write_path(path, args.out)
    if args.detections_out:
        write_detections(detections_from_path(path), args.detections_out)
    return 0


def _cmd_abc(args) -> int:
    priors = priors_from_spec(args.priors)
    if args.mode == "path":
        if not args.detections:
            raise ValueError("path mode needs --detections")
        if args.t0 != 0.0:
            raise ValueError("detections files measure time from 0; "
                             "path mode needs --t0 0")
        obs = ingest_detections(args.detections, args.horizon)
        horizon = obs.horizon
    else:
        if not args.observed:
            raise ValueError("vector mode needs --observed (a simulated "
                             "event-log file); see the abc subcommand help")
        obs = read_path(args.observed)
        horizon = args.horizon if args.horizon is not None else obs.horizon
    template = _template_from(args, priors, horizon)
    wp, sim, info = abc_rejection(obs, priors, template, args.n, args.rate,
                                  args.seed, mode=args.mode, years=args.years,
                                  window=args.window)
    _print_posterior(wp)
    extra = {"rate": repr(args.rate), "seed": repr(args.seed),
             "mode": args.mode}
    if args.out:
        save_posterior(args.out, wp, template, args.priors, extra_meta=extra)
    if args.sims_out:
        save_sims(args.sims_out, sim, template, args.priors,
                  obs_values=info.get("obs_values"), extra_meta=extra)
    if args.density_out:
        _write_densities(args.density_out, wp)
    return 0


def _cmd_adjust(args) -> int:
    sim, template, priors_spec, obs_values, _ = load_sims(args.sims)
    if sim.summaries is None or obs_values is None:
        raise ValueError("adjustment needs a vector-mode simulation archive "
                         "(run `abc --mode vector --sims-out ...` first)")
    priors = priors_from_spec(priors_spec)
    method = VECTOR_LOCL if args.method == "locl" else VECTOR_NCH
    cfg = NCHConfig(hidden=args.nch_hidden, members=args.nch_members,
                    epochs=args.nch_epochs, learning_rate=args.nch_lr,
                    optimizer=args.nch_optimizer)
    wp, info = adjusted_posterior(sim, obs_values, priors, args.rate, method,
                                  nch_config=cfg, fit_seed=args.seed)
    if info.get("ridge_used") and any(info["ridge_used"]):
        print("note: ridge fallback used in the local-linear fit",
              file=sys.stderr)
    _print_posterior(wp)
    if args.out:
        save_posterior(args.out, wp, template, priors_spec,
                       extra_meta={"rate": repr(args.rate),
                                   "method": args.method,
                                   "seed": repr(args.seed)})
    if args.density_out:
        _write_densities(args.density_out, wp)
    return 0


def _cmd_mcmc(args) -> int:
    from .mcmc import run_mcmc
    from .priors import sir_gamma_priors

    obs = ingest_detections(args.detections, args.horizon)
    detections = obs.times
    priors = sir_gamma_priors(shape=args.prior_shape, rate1=args.prior_rate1,
                              rate2=args.prior_rate2)
    chain = run_mcmc(detections, s0=args.s0, i0=args.i0, priors=priors,
                     horizon=args.horizon, iters=args.iters,
                     burn_in=args.burn_in, seed=args.seed)
    acc = chain.acceptance
    accepted = sum(acc["accepted"].values())
    proposed = sum(acc["proposed"].values())
    print(f"kept {chain.lambda1.size} samples; latent-move acceptance "
          f"{accepted}/{proposed}")
    print("param mean q025 median q975")
    for name, draws in (("lambda1", chain.lambda1), ("lambda2", chain.lambda2)):
        q = np.quantile(draws, [0.025, 0.5, 0.975])
        print(name, repr(float(np.mean(draws))), repr(float(q[0])),
              repr(float(q[1])), repr(float(q[2])))
    if args.out:
        meta = {"kind": "epiabc-chain", "s0": repr(args.s0),
                "i0": repr(args.i0), "horizon": repr(args.horizon),
                "iters": repr(args.iters), "burn_in": repr(args.burn_in),
                "seed": repr(args.seed)}
        write_table(args.out, meta, {"lambda1": chain.lambda1,
                                     "lambda2": chain.lambda2,
                                     "loglik": chain.loglik,
                                     "n_latent": chain.n_latent})
    return 0


def _cmd_study(args) -> int:
    config = StudyConfig()
    if args.config:
        import yaml

        with open(args.config) as fh:
            loaded = yaml.safe_load(fh) or {}
        config = StudyConfig.from_mapping(loaded)
    report = run_synthetic_study(config, args.seed, archive_dir=args.archive,
                                 progress=lambda msg: print(msg, file=sys.stderr))
    report.save(args.out)
    print(f"study written to {args.out} "
          f"({len(report.failures)} failed replicates)")
    return 0


def _cmd_ppd(args) -> int:
    wp, template, _, _ = load_posterior(args.posterior)
    if args.horizon is not None:
        from dataclasses import replace

        template = replace(template, horizon=args.horizon)
    sample = posterior_predictive(wp, template, args.statistic, args.n_draws,
                                  args.seed)
    q = np.quantile(sample, [0.025, 0.5, 0.975])
    print(f"{args.statistic} q025 {float(q[0])!r} median {float(q[1])!r} "
          f"q975 {float(q[2])!r}")
    if args.observed is not None:
        inside = ppd_contains(sample, args.observed, args.level)
        print(f"observed {args.observed!r} inside central "
              f"{args.level!r} band: {inside}")
    if args.out:
        write_table(args.out, {"kind": "epiabc-ppd",
                               "statistic": args.statistic,
                               "seed": repr(args.seed)},
                    {"value": sample})
    if args.coverage_out:
        times = [float(t) for t in args.coverage_times.split(",")]
        curve = coverage_curve(wp, template, times, args.n_draws, args.seed)
        write_table(args.coverage_out, {"kind": "epiabc-coverage",
                                        "seed": repr(args.seed)},
                    {"time": curve["time"], "q025": curve["q025"],
                     "median": curve["median"], "q975": curve["q975"]})
    return 0


def _cmd_tune(args) -> int:
    sim, template, priors_spec, obs_values, _ = load_sims(args.sims)
    if args.mode == "vector" and (sim.summaries is None or obs_values is None):
        raise ValueError("vector mode needs a vector-mode simulation archive")
    priors = priors_from_spec(priors_spec)
    obs = ingest_detections(args.detections, args.eval_horizon)
    rates = [float(r) for r in args.rates.split(",")]
    table = tune_tolerance(sim, priors, rates, template, obs,
                           args.eval_horizon, args.n_forward, args.seed,
                           mode=args.mode, obs_values=obs_values)
    print("rate error n_extinct")
    for r, e, x in zip(table["rate"], table["error"], table["n_extinct"]):
        print(repr(float(r)), repr(float(e)), int(x))
    print(f"best rate {table['best_rate']!r}")
    if args.out:
        write_table(args.out, {"kind": "epiabc-tuning",
                               "eval_horizon": repr(args.eval_horizon),
                               "seed": repr(args.seed),
                               "best_rate": repr(table["best_rate"])},
                    {"rate": table["rate"], "error": table["error"],
                     "n_extinct": table["n_extinct"]})
    return 0


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="epiabc",
        description="stochastic epidemic simulation and likelihood-free "
                    "inference with contact tracing")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("simulate", help="simulate one epidemic path")
    _add_model_flags(p, inference=False)
    _add_init_flags(p)
    p.add_argument("--horizon", type=float, required=True)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--event-cap", type=int, default=DEFAULT_EVENT_CAP)
    p.add_argument("--out", help="write the event log here")
    p.add_argument("--detections-out", help="write a detections file here")
    p.set_defaults(handler=_cmd_simulate)

    p = sub.add_parser("abc", help="smooth-rejection fit to observed data")
    _add_model_flags(p, inference=True)
    _add_init_flags(p)
    p.add_argument("--detections", help="observed detections file (path mode)")
    p.add_argument("--observed", help="observed event-log file (vector mode)")
    p.add_argument("--mode", choices=["path", "vector"], default="path")
    p.add_argument("--priors", default="hiv",
                   help="prior spec: hiv, sir or sir:shape,rate1,rate2")
    p.add_argument("--n", type=int, required=True, help="number of simulations")
    p.add_argument("--rate", type=float, required=True,
                   help="tolerance rate (accepted fraction)")
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--horizon", type=float, default=None,
                   help="override the observation horizon")
    p.add_argument("--years", type=int, default=None,
                   help="observation years (vector mode)")
    p.add_argument("--window", type=int, default=None,
                   help="yearly-change window (vector mode)")
    p.add_argument("--event-cap", type=int, default=DEFAULT_EVENT_CAP)
    p.add_argument("--out", help="write the weighted posterior here")
    p.add_argument("--sims-out", help="archive the simulations here")
    p.add_argument("--density-out", help="write posterior density grids here")
    p.set_defaults(handler=_cmd_abc)

    p = sub.add_parser("adjust",
                       help="regression-adjust an archived vector-mode fit")
    p.add_argument("--sims", required=True, help="simulation archive from abc")
    p.add_argument("--method", choices=["locl", "nch"], required=True)
    p.add_argument("--rate", type=float, required=True)
    p.add_argument("--seed", type=int, default=0, help="nch training seed")
    p.add_argument("--nch-hidden", type=int, default=8)
    p.add_argument("--nch-members", type=int, default=10)
    p.add_argument("--nch-epochs", type=int, default=2000)
    p.add_argument("--nch-lr", type=float, default=0.05)
    p.add_argument("--nch-optimizer", choices=["adam", "gd"], default="adam")
    p.add_argument("--out", help="write the adjusted posterior here")
    p.add_argument("--density-out", help="write posterior density grids here")
    p.set_defaults(handler=_cmd_adjust)

    p = sub.add_parser("mcmc",
                       help="data-augmentation baseline for the closed "
                            "epidemic without tracing")
    p.add_argument("--detections", required=True)
    p.add_argument("--s0", type=int, required=True)
    p.add_argument("--i0", type=int, default=1)
    p.add_argument("--horizon", type=float, default=None,
                   help="observation horizon; omit for a completed epidemic")
    p.add_argument("--iters", type=int, default=10000)
    p.add_argument("--burn-in", type=int, default=5000)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--prior-shape", type=float, default=0.1)
    p.add_argument("--prior-rate1", type=float, default=1.0)
    p.add_argument("--prior-rate2", type=float, default=0.1)
    p.add_argument("--out", help="write the posterior sample here")
    p.set_defaults(handler=_cmd_mcmc)

    p = sub.add_parser("study", help="synthetic parameter-recovery study")
    p.add_argument("--seed", type=int, required=True)
    p.add_argument("--config", help="YAML file overriding study defaults")
    p.add_argument("--out", default="study_out", help="report directory")
    p.add_argument("--archive", help="simulation archive directory (resumable)")
    p.set_defaults(handler=_cmd_study)

    p = sub.add_parser("ppd", help="posterior predictive checks")
    p.add_argument("--posterior", required=True, help="file from abc/adjust")
    p.add_argument("--statistic", default="r1_final")
    p.add_argument("--n-draws", type=int, default=1000)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--observed", type=float, default=None,
                   help="observed value to test for containment")
    p.add_argument("--level", type=float, default=0.95)
    p.add_argument("--horizon", type=float, default=None,
                   help="simulate forward to this horizon instead")
    p.add_argument("--out", help="write the sampled statistic here")
    p.add_argument("--coverage-out",
                   help="write a detection-coverage band table here")
    p.add_argument("--coverage-times", default="1,2,3,4,5,6",
                   help="comma-separated times for the coverage band")
    p.set_defaults(handler=_cmd_ppd)

    p = sub.add_parser("tune-tolerance",
                       help="choose the tolerance rate by prediction error")
    p.add_argument("--sims", required=True, help="simulation archive from abc")
    p.add_argument("--detections", required=True,
                   help="observed detections, extending past the fit horizon")
    p.add_argument("--eval-horizon", type=float, required=True)
    p.add_argument("--rates", required=True,
                   help="comma-separated tolerance rates; default grid: "
                        + ",".join(str(r) for r in PATH_RATES))
    p.add_argument("--n-forward", type=int, default=200)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--mode", choices=["path", "vector"], default="path")
    p.add_argument("--out", help="write the tuning table here")
    p.set_defaults(handler=_cmd_tune)
    return parser


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        return args.handler(args)
    except AllWeightsZeroError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 3
    except (ValueError, TypeError, OSError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2


if __name__ == "__main__":
    sys.exit(main())
