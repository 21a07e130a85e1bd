#!/usr/bin/env python3
"""Compare Monte Carlo means of the jump process against the ODE limit.

Simulates a mass-action epidemic with a large susceptible pool many times
and prints the relative error of the mean infective count against the
deterministic solution at yearly checkpoints.
"""

import argparse

import numpy as np

from epiabc import Parameters, PopulationState, simulate, solve_ode, spawn_seeds


def main() -> None:
    parser = argparse.ArgumentParser(description=__doc__)
    parser.add_argument("--paths", type=int, default=200)
    parser.add_argument("--s0", type=int, default=100_000)
    parser.add_argument("--i0", type=int, default=1000)
    parser.add_argument("--seed", type=int, default=0)
    args = parser.parse_args()

    # rates scaled so lambda1 * s0 matches the benchmark epidemic
    params = Parameters(mu1=2e-6, lambda1=6.84e-6, lambda2=0.375,
                        lambda3=3.93e-3, c=1.0)
    init = PopulationState(t=0.0, S=args.s0, I=args.i0)
    horizon = 6.0
    checkpoints = np.arange(1.0, 7.0)

    ode = solve_ode(params, s0=args.s0, i0=args.i0, horizon=horizon,
                    t_eval=checkpoints)
    mean_i = np.zeros(checkpoints.size)
    for seed in spawn_seeds(args.seed, args.paths):
        path = simulate(params, init, horizon, seed)
        _, i_t, _, _ = path.counts_at(checkpoints)
        mean_i += i_t
    mean_i /= args.paths

    print("t ode_i mc_mean_i rel_err")
    for t, ode_i, mc_i in zip(checkpoints, ode.i, mean_i):
        rel = abs(mc_i - ode_i) / ode_i
        print(f"{t:.0f} {ode_i:.2f} {mc_i:.2f} {rel:.4f}")


if __name__ == "__main__":
    main()
