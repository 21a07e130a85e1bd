"""Regression-adjustment tests: normal-equation oracles and synthetic fits."""

import numpy as np
import pytest

from epiabc.adjust import (
    NCHConfig,
    NCHModel,
    RIDGE_SCALE,
    LoclResult,
    load_nch,
    locl_adjust,
    nch_adjust,
    nch_fit,
    save_nch,
)

from _reference import weighted_lstsq_beta


def _toy_regression(seed=0, n=400, d=3):
    rng = np.random.default_rng(seed)
    summaries = rng.normal(0.0, 1.0, (n, d))
    beta_true = np.array([1.5, -2.0, 0.5][:d])
    draws = 0.7 + summaries @ beta_true + rng.normal(0.0, 0.3, n)
    obs = rng.normal(0.0, 1.0, d)
    weights = rng.uniform(0.1, 1.0, n)
    return draws, summaries, obs, weights


def test_locl_matches_normal_equations():
    draws, summaries, obs, weights = _toy_regression()
    res = locl_adjust(draws, summaries, obs, weights)
    alpha_ref, beta_ref = weighted_lstsq_beta(draws, summaries, obs, weights)
    assert res.alpha == pytest.approx(alpha_ref, abs=1e-10)
    assert res.beta == pytest.approx(beta_ref, abs=1e-10)
    assert not res.ridge_used
    expected = draws - (summaries - obs) @ beta_ref
    assert res.adjusted == pytest.approx(expected, abs=1e-9)


def test_locl_zero_weight_rows_are_ignored_for_the_fit():
    draws, summaries, obs, weights = _toy_regression(seed=1)
    spiked = draws.copy()
    spiked[0] += 1e6           # a wild draw that carries zero weight
    w0 = weights.copy()
    w0[0] = 0.0
    res = locl_adjust(spiked, summaries, obs, w0)
    ref = locl_adjust(draws[1:], summaries[1:], obs, weights[1:])
    assert res.beta == pytest.approx(ref.beta, abs=1e-9)
    # but every draw, including zero-weight ones, is adjusted
    assert res.adjusted.shape == spiked.shape


def test_locl_recentering_is_exact_for_linear_data():
    # noiseless linear draws collapse onto the intercept after adjustment
    rng = np.random.default_rng(4)
    summaries = rng.normal(0.0, 2.0, (50, 2))
    beta = np.array([2.0, -1.0])
    obs = np.array([0.5, 0.25])
    draws = 3.0 + (summaries - obs) @ beta
    res = locl_adjust(draws, summaries, obs, np.ones(50))
    assert np.allclose(res.adjusted, 3.0, atol=1e-9)
    assert res.alpha == pytest.approx(3.0, abs=1e-9)


def test_locl_constant_summaries_use_ridge():
    # a constant column makes the design rank deficient
    draws = np.array([1.0, 2.0, 3.0, 4.0])
    summaries = np.column_stack((np.ones(4), [0.1, 0.4, 0.2, 0.9]))
    obs = np.array([1.0, 0.3])
    res = locl_adjust(draws, summaries, obs, np.ones(4))
    assert res.ridge_used
    assert np.all(np.isfinite(res.adjusted))
    assert RIDGE_SCALE == 1e-8


def test_locl_validation():
    with pytest.raises(ValueError, match="inconsistent shapes"):
        locl_adjust(np.ones(3), np.ones((4, 2)), np.ones(2), np.ones(3))
    with pytest.raises(ValueError, match="nonnegative"):
        locl_adjust(np.ones(3), np.ones((3, 2)), np.ones(2), np.zeros(3))


class _AnalyticModel:
    """Duck-typed stand-in with known m(s) = s and sigma(s) = 1 + s."""

    def predict_mean(self, summaries):
        return np.asarray(summaries, dtype=float)[:, 0]

    def predict_sigma(self, summaries):
        return 1.0 + np.asarray(summaries, dtype=float)[:, 0]


def test_nch_adjust_hand_formula():
    model = _AnalyticModel()
    # theta = 5 at s = 1: residual 4, scaled by sigma(0)/sigma(1) = 1/2,
    # recentered at m(0) = 0  ->  adjusted draw 2
    out = nch_adjust(model, np.array([5.0]), np.array([[1.0]]),
                     np.array([0.0]))
    assert out == pytest.approx([2.0], abs=1e-12)
    # a draw equal to its conditional mean moves exactly to m(s_obs)
    out = nch_adjust(model, np.array([3.0]), np.array([[3.0]]),
                     np.array([0.5]))
    assert out == pytest.approx([0.5], abs=1e-12)


def test_nch_adjust_clamps_tiny_sigma():
    class TinySigma(_AnalyticModel):
        def predict_sigma(self, summaries):
            return np.full(np.atleast_2d(summaries).shape[0], 1e-12)

    with pytest.warns(RuntimeWarning, match="clamped"):
        out = nch_adjust(TinySigma(), np.array([5.0]), np.array([[1.0]]),
                         np.array([0.0]))
    # both sigmas hit the floor, so the ratio is one
    assert out == pytest.approx([4.0], abs=1e-9)


def _desk_config(**kw):
    base = dict(hidden=8, members=4, epochs=400, learning_rate=0.05, seed=0)
    base.update(kw)
    return NCHConfig(**base)


def test_nch_mean_tracks_sine_benchmark():
    # draws theta = sin(s) + 0.1 eps on s in [0, 3]: the fitted mean must
    # stay within 0.1 rms of the sine on a held-out grid
    rng = np.random.default_rng(12)
    s = rng.uniform(0.0, 3.0, 3000)
    draws = np.sin(s) + 0.1 * rng.standard_normal(s.size)
    model = nch_fit(draws, s[:, None], np.ones(s.size),
                    _desk_config(epochs=2000))
    probe = np.linspace(0.1, 2.9, 101)
    m_hat = model.predict_mean(probe[:, None])
    assert float(np.sqrt(np.mean((m_hat - np.sin(probe)) ** 2))) <= 0.1


def test_nch_homoscedastic_sigma_is_flat():
    # constant conditional variance: sigma-hat may carry a constant
    # factor, but its variation over the support must stay small so the
    # adjustment barely rescales
    rng = np.random.default_rng(3)
    s = rng.uniform(-1.0, 1.0, 2000)
    draws = 2.0 * s + rng.normal(0.0, 0.5, s.size)
    model = nch_fit(draws, s[:, None], np.ones(s.size),
                    _desk_config(epochs=1200))
    probe = np.linspace(-0.8, 0.8, 33)[:, None]
    sig = model.predict_sigma(probe)
    assert float(np.max(sig) / np.min(sig)) < 1.5


def test_nch_sigma_ratios_track_heteroscedasticity():
    # absolute sigma levels are biased by a constant factor, but ratios
    # between summary values are what the adjustment uses and must track
    # the true heteroscedastic profile
    rng = np.random.default_rng(12)
    s = rng.uniform(-2.0, 2.0, 4000)
    sig_true = 0.2 + 0.1 * (s + 2.0)
    draws = 0.5 * s + sig_true * rng.standard_normal(s.size)
    model = nch_fit(draws, s[:, None], np.ones(s.size),
                    _desk_config(epochs=2000))
    lo, hi = np.array([[-1.5]]), np.array([[1.5]])
    ratio = float(model.predict_sigma(hi)[0] / model.predict_sigma(lo)[0])
    true_ratio = (0.2 + 0.1 * 3.5) / (0.2 + 0.1 * 0.5)   # = 2.2
    assert 1.4 < ratio < 3.5
    assert ratio == pytest.approx(true_ratio, rel=0.45)


def test_nch_fit_is_deterministic_in_the_seed():
    draws, summaries, _, weights = _toy_regression(seed=9, n=200, d=2)
    cfg = _desk_config(epochs=50)
    m1 = nch_fit(draws, summaries, weights, cfg)
    m2 = nch_fit(draws, summaries, weights, cfg)
    probe = summaries[:7]
    assert np.array_equal(m1.predict_mean(probe), m2.predict_mean(probe))
    assert np.array_equal(m1.predict_log_var(probe), m2.predict_log_var(probe))
    m3 = nch_fit(draws, summaries, weights, _desk_config(epochs=50, seed=1))
    assert not np.array_equal(m1.predict_mean(probe), m3.predict_mean(probe))


def test_nch_fit_validation():
    with pytest.raises(ValueError, match="inconsistent shapes"):
        nch_fit(np.ones(3), np.ones((4, 2)), np.ones(3), _desk_config(epochs=1))
    with pytest.raises(ValueError, match="two positive-weight"):
        nch_fit(np.ones(3), np.ones((3, 2)), np.array([1.0, 0.0, 0.0]),
                _desk_config(epochs=1))
    with pytest.raises(ValueError, match="optimizer"):
        NCHConfig(optimizer="sgd")
    with pytest.raises(ValueError, match="positive"):
        NCHConfig(epochs=0)


def test_nch_gd_optimizer_also_trains():
    rng = np.random.default_rng(8)
    s = rng.uniform(-1.0, 1.0, 800)
    draws = 1.0 + 2.0 * s + rng.normal(0.0, 0.1, s.size)
    cfg = NCHConfig(hidden=8, members=3, epochs=4000, learning_rate=0.05,
                    optimizer="gd", seed=0)
    model = nch_fit(draws, s[:, None], np.ones(s.size), cfg)
    probe = np.linspace(-0.8, 0.8, 21)
    m_hat = model.predict_mean(probe[:, None])
    assert float(np.sqrt(np.mean((m_hat - (1.0 + 2.0 * probe)) ** 2))) <= 0.1


def test_nch_save_load_round_trip(tmp_path):
    draws, summaries, _, weights = _toy_regression(seed=5, n=150, d=2)
    model = nch_fit(draws, summaries, weights, _desk_config(epochs=40))
    path = tmp_path / "model.nch"
    save_nch(model, path)
    again = load_nch(path)
    assert isinstance(again, NCHModel)
    assert again.config == model.config
    probe = summaries[:9]
    assert np.array_equal(again.predict_mean(probe), model.predict_mean(probe))
    assert np.array_equal(again.predict_sigma(probe), model.predict_sigma(probe))
    bad = tmp_path / "bad.nch"
    bad.write_text("not a model\n")
    with pytest.raises(ValueError, match="version header"):
        load_nch(bad)
