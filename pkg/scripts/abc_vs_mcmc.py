#!/usr/bin/env python3
"""Cross-validate the ABC fit against the data-augmentation sampler.

Both are run on the same small completed SIR epidemic (no tracing, no
deaths of infectives), where the MCMC targets the exact posterior; the
script prints both posteriors' modes and the ABC KDE bandwidths.
"""

import argparse

import numpy as np

from epiabc import (
    Parameters,
    PopulationState,
    SimTemplate,
    abc_rejection,
    kde_bandwidth,
    posterior_mode,
    run_mcmc,
    sir_gamma_priors,
    standard_sir_dataset,
)


def main() -> None:
    parser = argparse.ArgumentParser(description=__doc__)
    parser.add_argument("--dataset-seed", type=int, default=9)
    parser.add_argument("--horizon", type=float, default=4.0)
    parser.add_argument("--n", type=int, default=100_000)
    parser.add_argument("--rate", type=float, default=0.001)
    parser.add_argument("--iters", type=int, default=10_000)
    parser.add_argument("--burn-in", type=int, default=5_000)
    parser.add_argument("--seed", type=int, default=0)
    args = parser.parse_args()

    # both fits condition on the detections observed over [0, horizon]
    obs = standard_sir_dataset(lambda1=0.12, lambda2=1.0, s0=9, i0=1,
                               seed=args.dataset_seed, horizon=args.horizon)
    print(f"dataset: {obs.times.size} detections, last at "
          f"{obs.times[-1]:.3f}, observed to {obs.horizon}")

    priors = sir_gamma_priors()
    base = Parameters(mu1=0.0, lambda1=0.12, lambda2=1.0, lambda3=0.0, c=1.0)
    template = SimTemplate(base=base, init=PopulationState(t=0.0, S=9, I=1),
                           horizon=obs.horizon, theta_names=tuple(priors))
    wp, _, _ = abc_rejection(obs, priors, template, args.n, args.rate,
                             args.seed)
    chain = run_mcmc(obs.times, s0=9, i0=1, priors=priors,
                     horizon=obs.horizon, iters=args.iters,
                     burn_in=args.burn_in, seed=args.seed)

    ones = np.ones(chain.lambda1.size)
    print("param abc_mode mcmc_mode abc_bandwidth")
    for name, draws in (("lambda1", chain.lambda1), ("lambda2", chain.lambda2)):
        abc_mode = wp.mode(name)
        mcmc_mode = posterior_mode(draws, ones, priors[name])
        bw = kde_bandwidth(wp.column(name), wp.weights, priors[name])
        print(f"{name} {abc_mode:.5g} {mcmc_mode:.5g} {bw:.4f}")


if __name__ == "__main__":
    main()
