"""Priors and working-scale transforms."""

from __future__ import annotations

import math

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from epiabc.priors import (
    GammaPrior,
    HalfLifeUniform,
    Log10Uniform,
    from_working,
    hiv_priors,
    make_rng,
    priors_from_spec,
    sample_theta,
    sir_gamma_priors,
    spec_of_priors,
    to_working,
)
from epiabc.transforms import (
    Transform,
    identity_transform,
    log_transform,
    logit_transform,
)

LN2 = math.log(2.0)


# ------------------------------------------------------------ transforms


def test_transform_kinds_are_closed():
    with pytest.raises(ValueError, match="unknown transform"):
        Transform("sqrt")
    with pytest.raises(ValueError, match="bounds"):
        logit_transform(2.0, 1.0)


def test_identity_passthrough():
    t = identity_transform()
    assert t.forward(3.5) == 3.5
    assert t.inverse(-2.0) == -2.0


def test_log_transform_domain():
    t = log_transform()
    assert t.forward(math.e) == pytest.approx(1.0)
    with pytest.raises(ValueError, match="positive"):
        t.forward(0.0)


def test_rescaled_logit_hand_value():
    # midpoint of the interval maps to exactly zero
    t = logit_transform(-9.0, -6.0)
    assert t.forward(-7.5) == 0.0
    assert t.inverse(0.0) == pytest.approx(-7.5, rel=1e-15)
    with pytest.raises(ValueError, match="strictly inside"):
        t.forward(-9.0)


@settings(max_examples=200)
@given(st.floats(-8.999, -6.001))
def test_logit_round_trip(x):
    t = logit_transform(-9.0, -6.0)
    assert t.inverse(t.forward(x)) == pytest.approx(x, rel=1e-12, abs=1e-12)


@settings(max_examples=200)
@given(st.floats(1e-8, 1e8))
def test_log_round_trip(x):
    t = log_transform()
    assert t.inverse(t.forward(x)) == pytest.approx(x, rel=1e-12)


# --------------------------------------------------------------- priors


def test_log10_uniform_support_and_samples():
    p = Log10Uniform(-9.0, -6.0)
    assert p.support() == (1e-9, 1e-6)
    draws = p.sample(make_rng(0), 10_000)
    assert np.all((draws >= 1e-9) & (draws <= 1e-6))
    # the log10 of the draws is uniform: mean -7.5 within MC error
    lg = np.log10(draws)
    se = lg.std(ddof=1) / math.sqrt(lg.size)
    assert abs(lg.mean() - (-7.5)) < 3 * se


def test_log10_uniform_analytic_mean():
    p = Log10Uniform(-4.0, 3.0)
    draws = p.sample(make_rng(1), 200_000)
    se = draws.std(ddof=1) / math.sqrt(draws.size)
    assert abs(draws.mean() - p.mean()) < 3 * se
    assert p.range_log10() == 7.0


def test_half_life_uniform_support_and_median():
    p = HalfLifeUniform(1.0 / 12.0, 5.0)
    lo, hi = p.support()
    assert lo == pytest.approx(LN2 / 5.0)
    assert hi == pytest.approx(12.0 * LN2)
    draws = p.sample(make_rng(2), 100_000)
    assert np.all((draws > lo) & (draws < hi))
    # half-life ln2/c is uniform: its median is the interval midpoint
    half_lives = LN2 / draws
    mid = (1.0 / 12.0 + 5.0) / 2.0
    se = 1.2533 * half_lives.std(ddof=1) / math.sqrt(half_lives.size)
    assert abs(np.median(half_lives) - mid) < 3 * se
    # analytic mean of c itself
    se_c = draws.std(ddof=1) / math.sqrt(draws.size)
    assert abs(draws.mean() - p.mean()) < 3 * se_c


def test_gamma_prior_moments():
    p = GammaPrior(0.1, 0.1)
    draws = p.sample(make_rng(3), 200_000)
    assert p.mean() == pytest.approx(1.0)
    assert p.variance() == pytest.approx(10.0)
    se = draws.std(ddof=1) / math.sqrt(draws.size)
    assert abs(draws.mean() - 1.0) < 3 * se
    with pytest.raises(ValueError):
        GammaPrior(0.0, 1.0)


@pytest.mark.parametrize("prior,values", [
    (Log10Uniform(-9.0, -6.0), [1.1e-9, 3.16e-8, 9.9e-7]),
    (HalfLifeUniform(1.0 / 12.0, 5.0), [0.15, 1.0, 8.0]),
    (GammaPrior(0.1, 1.0), [1e-6, 0.5, 40.0]),
])
def test_working_scale_round_trips(prior, values):
    v = np.asarray(values)
    back = prior.from_working(prior.to_working(v))
    assert np.allclose(back, v, rtol=1e-12)


def test_from_working_stays_in_support():
    # arbitrarily extreme working values map back strictly inside the
    # support even where expit saturates, so the result is re-mappable
    for prior in hiv_priors().values():
        lo, hi = prior.support()
        back = prior.from_working(np.array([-40.0, 0.0, 40.0, -800.0, 800.0]))
        assert np.all(back > lo) and np.all(back < hi)
        again = prior.to_working(back)
        assert np.all(np.isfinite(again))


def test_boundary_draws_survive_working_map():
    # rng.uniform includes its lower endpoint and log10(10**u) can round
    # onto a bound, so exact-boundary values must map without error
    log10u = Log10Uniform(-9.0, -6.0)
    ys = log10u.to_working(np.array([1e-9, 1e-6, 3e-8]))
    assert np.all(np.isfinite(ys))
    back = log10u.from_working(ys)
    assert np.all(back > 0)

    half = HalfLifeUniform(1.0 / 12.0, 5.0)
    c_lo, c_hi = half.support()
    ys = half.to_working(np.array([c_lo, c_hi]))
    assert np.all(np.isfinite(ys))

    # clearly out-of-support input still fails
    with pytest.raises(ValueError, match="strictly inside"):
        log10u.to_working(5e-6)
    with pytest.raises(ValueError, match="strictly inside"):
        half.to_working(c_hi * 1.5)


def test_hiv_prior_set_layout():
    priors = hiv_priors()
    assert tuple(priors) == ("mu1", "lambda1", "lambda2", "lambda3", "c")
    assert priors["lambda2"].support() == (1e-4, 1e3)
    assert isinstance(priors["c"], HalfLifeUniform)


def test_sample_theta_columns_follow_dict_order():
    priors = sir_gamma_priors()
    thetas = sample_theta(priors, make_rng(4), 500)
    assert thetas.shape == (500, 2)
    assert np.all(thetas > 0)


def test_to_from_working_matrices():
    priors = hiv_priors()
    thetas = sample_theta(priors, make_rng(5), 200)
    ys = to_working(priors, thetas)
    assert ys.shape == thetas.shape
    assert np.allclose(from_working(priors, ys), thetas, rtol=1e-10)


def test_prior_spec_round_trips():
    assert spec_of_priors(hiv_priors()) == "hiv"
    assert spec_of_priors(sir_gamma_priors()) == "sir:0.1,1.0,0.1"
    again = priors_from_spec("sir:0.1,1.0,0.1")
    assert again == sir_gamma_priors()
    assert priors_from_spec("hiv") == hiv_priors()
    with pytest.raises(ValueError, match="unknown prior spec"):
        priors_from_spec("cauchy")
    with pytest.raises(ValueError, match="bad sir prior"):
        priors_from_spec("sir:1,2")


def test_make_rng_accepts_seed_sequence():
    ss = np.random.SeedSequence(7)
    a = make_rng(ss).uniform(size=4)
    b = make_rng(np.random.SeedSequence(7)).uniform(size=4)
    assert np.array_equal(a, b)
    c = make_rng(7).uniform(size=4)
    assert np.array_equal(b, c)
