"""Data-augmentation MCMC tests: hand-walked likelihoods and conjugacy."""

import math

import numpy as np
import pytest

import epiabc.mcmc as mcmc_mod
from epiabc.mcmc import (
    AugmentedState,
    MoveProbs,
    complete_loglik,
    gibbs_rates,
    run_mcmc,
    sufficient_stats,
)
from epiabc.priors import sir_gamma_priors


def test_sufficient_stats_hand_walk():
    # s0=5, i0=2, one proper infection at 0.5, detections at 1 and 2, T=3:
    #   [0,.5) SI=10, [.5,1) SI=12, [1,2) SI=8, [2,3) SI=4  -> int_si=23
    #   I on the same segments: 2, 3, 2, 1                  -> int_i=5.5
    stats = sufficient_stats([0.0, 0.0, 0.5], [1.0, 2.0], s0=5, i0=2, horizon=3.0)
    assert stats.valid
    assert stats.n_inf == 1 and stats.n_det == 2
    assert stats.int_si == pytest.approx(23.0, abs=1e-12)
    assert stats.int_i == pytest.approx(5.5, abs=1e-12)
    assert stats.log_si == pytest.approx(math.log(10.0), abs=1e-12)
    assert stats.log_i == pytest.approx(math.log(3.0) + math.log(2.0), abs=1e-12)


def test_complete_loglik_hand_value():
    state = AugmentedState(lambda1=0.01, lambda2=0.5,
                           infection_times=[0.0, 0.0, 0.5],
                           detection_times=[1.0, 2.0])
    ll = complete_loglik(state, s0=5, i0=2, horizon=3.0)
    expected = (1 * math.log(0.01) + math.log(10.0) - 0.01 * 23.0
                + 2 * math.log(0.5) + math.log(6.0) - 0.5 * 5.5)
    assert ll == pytest.approx(expected, abs=1e-12)


def test_impossible_configurations_have_zero_likelihood():
    # a detection with nobody infectious left
    s = sufficient_stats([0.0], [0.5, 0.6], s0=5, i0=1, horizon=1.0)
    assert not s.valid
    # an infection with no susceptible left
    s = sufficient_stats([0.0, 0.2, 0.4], [], s0=1, i0=1, horizon=1.0)
    assert not s.valid
    # times outside the window
    assert not sufficient_stats([0.0, 1.5], [], s0=5, i0=1, horizon=1.0).valid
    assert not sufficient_stats([0.0], [1.5], s0=5, i0=1, horizon=1.0).valid
    assert not sufficient_stats([0.0, -0.2], [], s0=5, i0=1, horizon=1.0).valid
    # missing index-case zeros
    assert not sufficient_stats([0.5], [0.7], s0=5, i0=1, horizon=1.0).valid
    # nonpositive rates
    state = AugmentedState(0.0, 1.0, [0.0], [0.5])
    assert complete_loglik(state, s0=5, i0=1, horizon=1.0) == -np.inf


def test_loglik_of_valid_state_is_finite():
    state = AugmentedState(0.1, 0.7, [0.0, 0.3], [0.6, 0.9])
    assert np.isfinite(complete_loglik(state, s0=8, i0=1, horizon=1.0))
    # completed mode uses the last detection as the window end
    assert np.isfinite(complete_loglik(state, s0=8, i0=1))


def test_gibbs_conjugate_moment_match():
    # with i0=2 and two detections the completed epidemic has no latent
    # infections, so the chain draws i.i.d. from the exact conditionals
    #   lambda1 ~ Gamma(0.1 + 0, 1 + 15),  lambda2 ~ Gamma(0.1 + 2, 0.1 + 3)
    stats = sufficient_stats([0.0, 0.0], [1.0, 2.0], s0=5, i0=2, horizon=2.0)
    assert stats.valid
    assert stats.int_si == pytest.approx(15.0, abs=1e-12)
    assert stats.int_i == pytest.approx(3.0, abs=1e-12)

    chain = run_mcmc([1.0, 2.0], s0=5, i0=2, iters=6000, burn_in=1000, seed=42)
    assert len(chain) == 5000
    assert np.all(chain.n_latent == 0)
    assert chain.acceptance["proposed"]["move"] == 0
    assert chain.diagnostics["completed_mode"]

    n = len(chain)
    for draws, shape, rate in ((chain.lambda1, 0.1, 16.0),
                               (chain.lambda2, 2.1, 3.1)):
        mean, var = shape / rate, shape / rate**2
        se_mean = math.sqrt(var / n)
        assert abs(float(np.mean(draws)) - mean) < 3 * se_mean
        se_var = var * math.sqrt((6.0 / shape + 2.0) / n)
        assert abs(float(np.var(draws)) - var) < 3 * se_var


def test_gibbs_rates_use_prior_and_stats():
    rng = np.random.default_rng(0)
    stats = sufficient_stats([0.0, 0.0], [1.0, 2.0], s0=5, i0=2, horizon=2.0)
    draws = np.array([gibbs_rates(rng, sir_gamma_priors(), stats)
                      for _ in range(4000)])
    assert float(np.mean(draws[:, 0])) == pytest.approx(0.1 / 16.0, rel=0.15)
    assert float(np.mean(draws[:, 1])) == pytest.approx(2.1 / 3.1, rel=0.05)


def test_mcmc_deterministic_per_seed(many_detections):
    det = many_detections.times
    a = run_mcmc(det, s0=30, horizon=5.0, iters=400, burn_in=100, seed=3)
    b = run_mcmc(det, s0=30, horizon=5.0, iters=400, burn_in=100, seed=3)
    assert np.array_equal(a.lambda1, b.lambda1)
    assert np.array_equal(a.lambda2, b.lambda2)
    assert np.array_equal(a.n_latent, b.n_latent)
    c = run_mcmc(det, s0=30, horizon=5.0, iters=400, burn_in=100, seed=4)
    assert not np.array_equal(a.lambda1, c.lambda1)


def test_ongoing_chain_recovers_rate_scales(many_detections):
    # data simulated at lambda1=0.12, lambda2=1.0 with s0=30: wide sanity
    # bands on the posterior means, plus live insert/delete bookkeeping
    det = many_detections.times
    chain = run_mcmc(det, s0=30, horizon=5.0, iters=3000, burn_in=1000, seed=1)
    assert not chain.diagnostics["completed_mode"]
    assert 0.01 < float(np.mean(chain.lambda1)) < 0.6
    assert 0.3 < float(np.mean(chain.lambda2)) < 3.0
    assert np.all(chain.n_latent >= 0)
    prop = chain.acceptance["proposed"]
    assert prop["insert"] > 0 and prop["delete"] > 0 and prop["move"] > 0
    assert np.all(np.isfinite(chain.loglik))


def test_stall_warning_and_prior_recovery(monkeypatch):
    # with s0=0 every insert is impossible, so latent windows never accept
    # and lambda1 keeps its prior (int_si stays 0)
    monkeypatch.setattr(mcmc_mod, "STALL_WINDOW", 10)
    with pytest.warns(RuntimeWarning, match="zero acceptances"):
        chain = run_mcmc([1.0], s0=0, i0=1, horizon=2.0,
                         iters=3000, burn_in=0, seed=5)
    assert chain.diagnostics["stalled_windows"] > 0
    assert np.all(chain.n_latent == 0)
    n = len(chain)
    se_mean = math.sqrt(0.1) * 1.0 / math.sqrt(n)
    # iid Gamma(0.1, 1) prior draws
    assert abs(float(np.mean(chain.lambda1)) - 0.1) < 3 * se_mean


def test_run_mcmc_validation():
    with pytest.raises(ValueError, match="at least one detection"):
        run_mcmc([], s0=5)
    with pytest.raises(ValueError, match="positive"):
        run_mcmc([0.0, 1.0], s0=5)
    with pytest.raises(ValueError, match="burn_in"):
        run_mcmc([1.0], s0=5, iters=100, burn_in=100)
    with pytest.raises(ValueError, match="exceed the horizon"):
        run_mcmc([2.0], s0=5, horizon=1.0)
    with pytest.raises(ValueError, match="at least i0 detections"):
        run_mcmc([1.0], s0=5, i0=2)
    with pytest.raises(ValueError, match="not enough susceptibles"):
        run_mcmc([1.0, 2.0, 3.0], s0=1, i0=1)


def test_move_probs_validation():
    with pytest.raises(ValueError, match="sum to 1"):
        MoveProbs(0.8, 0.3, 0.1)
    with pytest.raises(ValueError, match="nonnegative"):
        MoveProbs(1.2, -0.1, -0.1)
    probs = MoveProbs(0.5, 0.25, 0.25)
    assert probs.move == 0.5


def test_augmented_state_sorts_times():
    state = AugmentedState(0.1, 0.2, [0.5, 0.0, 0.3], [2.0, 1.0])
    assert np.array_equal(state.infection_times, [0.0, 0.3, 0.5])
    assert np.array_equal(state.detection_times, [1.0, 2.0])
