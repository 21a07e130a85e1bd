"""Regression adjustment of weighted ABC samples: LOCL and NCH.

Both corrections regress parameter draws (on their unconstrained working
scale) onto summary statistics and move each draw toward what it would
have looked like at the observed summary.

LOCL fits a weighted linear model theta ~ alpha + (s - s_obs)' beta and
subtracts the linear trend.  NCH fits a conditional mean m(s) and a
conditional variance sigma^2(s) with small feed-forward network
ensembles and rescales residuals:

    theta* = m(s_obs) + (theta - m(s)) * sigma(s_obs) / sigma(s)

Networks are one-hidden-layer tanh regressors trained full-batch with
per-sample weights and weight decay; ensemble members differ only by
initialization.  Mean predictions average the members; variance
predictions average in log-variance space.
"""

from __future__ import annotations

import warnings
from dataclasses import dataclass, replace

import numpy as np

RIDGE_SCALE = 1e-8


@dataclass(frozen=True, eq=False)
class LoclResult:
    """Local-linear adjustment output."""

    adjusted: np.ndarray
    alpha: float
    beta: np.ndarray
    ridge_used: bool


def locl_adjust(draws, summaries, obs, weights) -> LoclResult:
    """Local-linear regression adjustment of working-scale draws.

    Fits the weighted least-squares plane through (summaries, draws) and
    returns draws minus the fitted trend, so every draw is re-centered at
    the observed summary.  A rank-deficient design falls back to a ridge
    solve with penalty RIDGE_SCALE times the normalized trace, and the
    result is flagged.
    """
    draws = np.asarray(draws, dtype=float)
    summaries = np.atleast_2d(np.asarray(summaries, dtype=float))
    obs = np.asarray(obs, dtype=float)
    weights = np.asarray(weights, dtype=float)
    n, d = summaries.shape
    if draws.shape != (n,) or weights.shape != (n,) or obs.shape != (d,):
        raise ValueError("inconsistent shapes")
    if np.any(weights < 0) or not np.any(weights > 0):
        raise ValueError("need nonnegative weights with at least one positive")

    pos = weights > 0
    x = summaries[pos] - obs
    # standardize columns for conditioning only; beta is folded back below
    col_scale = np.std(x, axis=0)
    col_scale[col_scale == 0.0] = 1.0
    xs = x / col_scale
    sw = np.sqrt(weights[pos])
    design = np.column_stack((np.ones(xs.shape[0]), xs)) * sw[:, None]
    target = draws[pos] * sw

    coef, _, rank, _ = np.linalg.lstsq(design, target, rcond=None)
    ridge_used = rank < d + 1
    if ridge_used:
        gram = design.T @ design
        lam = RIDGE_SCALE * np.trace(gram) / (d + 1)
        coef = np.linalg.solve(gram + lam * np.eye(d + 1), design.T @ target)

    alpha = float(coef[0])
    beta = coef[1:] / col_scale
    adjusted = draws - (summaries - obs) @ beta
    return LoclResult(adjusted=adjusted, alpha=alpha, beta=beta, ridge_used=ridge_used)


@dataclass(frozen=True)
class NCHConfig:
    """Training configuration for the NCH network ensembles."""

    hidden: int = 8
    members: int = 10
    epochs: int = 2000
    learning_rate: float = 0.05
    weight_decay: float = 1e-3
    eps_floor: float = 1e-12
    sigma_floor: float = 1e-8
    optimizer: str = "adam"
    seed: int = 0

    def __post_init__(self):
        if self.hidden < 1 or self.members < 1 or self.epochs < 1:
            raise ValueError("hidden, members and epochs must be positive")
        if self.optimizer not in ("adam", "gd"):
            raise ValueError("optimizer must be 'adam' or 'gd'")


class _Ensemble:
    """Ensemble of L one-hidden-layer tanh regressors, trained jointly.

    The members share no parameters; their first layers are folded into
    one (d, L*h) matrix so the forward/backward passes are single GEMMs.
    """

    def __init__(self, dim, hidden, members, rng):
        self.dim = dim
        self.hidden = hidden
        self.members = members
        self.w1 = rng.standard_normal((dim, members * hidden)) / np.sqrt(dim)
        self.b1 = np.zeros(members * hidden)
        self.w2 = rng.standard_normal((members, hidden)) / np.sqrt(hidden)
        self.b2 = np.zeros(members)

    def _hidden_act(self, x):
        return np.tanh(x @ self.w1 + self.b1)

    def member_outputs(self, x):
        """(n, L) matrix of member predictions."""
        h = self._hidden_act(x).reshape(len(x), self.members, self.hidden)
        return np.einsum("nlh,lh->nl", h, self.w2) + self.b2

    def predict(self, x):
        return self.member_outputs(x).mean(axis=1)

    def parameters(self):
        return [self.w1, self.b1, self.w2, self.b2]

    def gradients(self, x, y, w):
        """Gradients of the summed per-member weighted MSE plus weight decay."""
        n = len(x)
        h_flat = self._hidden_act(x)
        h = h_flat.reshape(n, self.members, self.hidden)
        out = np.einsum("nlh,lh->nl", h, self.w2) + self.b2
        # each member minimizes sum_i w_i (y_i - f_l(x_i))^2 / sum_i w_i
        d_out = (2.0 / np.sum(w)) * w[:, None] * (out - y[:, None])
        g_w2 = np.einsum("nl,nlh->lh", d_out, h)
        g_b2 = d_out.sum(axis=0)
        d_h = d_out[:, :, None] * self.w2[None, :, :]
        d_a = (d_h * (1.0 - h * h)).reshape(n, self.members * self.hidden)
        g_w1 = x.T @ d_a
        g_b1 = d_a.sum(axis=0)
        return [g_w1, g_b1, g_w2, g_b2]

    def decay_grads(self, wd):
        return [2.0 * wd * self.w1, np.zeros_like(self.b1),
                2.0 * wd * self.w2, np.zeros_like(self.b2)]


def _train(net: _Ensemble, x, y, w, cfg: NCHConfig):
    params = net.parameters()
    if cfg.optimizer == "adam":
        m = [np.zeros_like(p) for p in params]
        v = [np.zeros_like(p) for p in params]
        b1, b2, eps = 0.9, 0.999, 1e-8
        for step in range(1, cfg.epochs + 1):
            grads = net.gradients(x, y, w)
            decays = net.decay_grads(cfg.weight_decay)
            for k, (g, dg) in enumerate(zip(grads, decays)):
                g = g + dg
                m[k] = b1 * m[k] + (1 - b1) * g
                v[k] = b2 * v[k] + (1 - b2) * g * g
                mhat = m[k] / (1 - b1 ** step)
                vhat = v[k] / (1 - b2 ** step)
                params[k] -= cfg.learning_rate * mhat / (np.sqrt(vhat) + eps)
    else:
        for _ in range(cfg.epochs):
            grads = net.gradients(x, y, w)
            decays = net.decay_grads(cfg.weight_decay)
            for k, (g, dg) in enumerate(zip(grads, decays)):
                params[k] -= cfg.learning_rate * (g + dg)


def _weighted_moments(x, w):
    wn = w / np.sum(w)
    mean = wn @ x
    var = wn @ (x - mean) ** 2
    return mean, np.sqrt(var)


@dataclass(frozen=True, eq=False)
class NCHModel:
    """Fitted conditional mean / conditional variance model.

    Inputs and targets are standardized internally (weighted moments of
    the training sample); the standardization is part of the fitted
    model, so predictions are on the original scales.
    """

    config: NCHConfig
    x_mean: np.ndarray
    x_scale: np.ndarray
    y_mean: float
    y_scale: float
    z_mean: float
    z_scale: float
    mean_net: _Ensemble
    var_net: _Ensemble

    def _standardize(self, summaries):
        x = np.atleast_2d(np.asarray(summaries, dtype=float))
        return (x - self.x_mean) / self.x_scale

    def predict_mean(self, summaries):
        """Ensemble-average conditional mean m(s)."""
        out = self.mean_net.predict(self._standardize(summaries))
        return self.y_mean + self.y_scale * out

    def predict_log_var(self, summaries):
        """Ensemble-average (in log space) conditional log variance."""
        out = self.var_net.predict(self._standardize(summaries))
        return self.z_mean + self.z_scale * out

    def predict_sigma(self, summaries):
        """Conditional standard deviation sigma(s), always positive.

        Training on log squared residuals estimates the log variance up
        to a constant additive bias (the mean log of a chi-square_1),
        i.e. sigma(s) up to a constant factor.  The factor cancels in the
        adjustment ratio sigma(s_obs) / sigma(s_i), which is the only way
        the model is consumed; absolute levels should not be relied on.
        """
        return np.exp(0.5 * self.predict_log_var(summaries))


def nch_fit(draws, summaries, weights, config: NCHConfig = NCHConfig()) -> NCHModel:
    """Fit the NCH mean and variance ensembles to a weighted sample.

    Only positive-weight rows train the networks (zero-weight rows have
    no gradient).  Deterministic given ``config.seed``.
    """
    draws = np.asarray(draws, dtype=float)
    summaries = np.atleast_2d(np.asarray(summaries, dtype=float))
    weights = np.asarray(weights, dtype=float)
    n, d = summaries.shape
    if draws.shape != (n,) or weights.shape != (n,):
        raise ValueError("inconsistent shapes")
    pos = weights > 0
    if np.sum(pos) < 2:
        raise ValueError("need at least two positive-weight draws")
    x_raw = summaries[pos]
    y_raw = draws[pos]
    w = weights[pos]

    x_mean, x_scale = _weighted_moments(x_raw, w)
    x_scale = np.where(x_scale == 0.0, 1.0, x_scale)
    y_mean, y_scale = _weighted_moments(y_raw, w)
    if y_scale == 0.0:
        y_scale = 1.0
    x = (x_raw - x_mean) / x_scale
    y = (y_raw - y_mean) / y_scale

    rng = np.random.default_rng(np.random.SeedSequence(config.seed))
    mean_net = _Ensemble(d, config.hidden, config.members, rng)
    _train(mean_net, x, y, w, config)

    resid = y_raw - (y_mean + y_scale * mean_net.predict(x))
    z_raw = np.log(resid * resid + config.eps_floor)
    z_mean, z_scale = _weighted_moments(z_raw, w)
    if z_scale == 0.0:
        z_scale = 1.0
    z = (z_raw - z_mean) / z_scale
    var_net = _Ensemble(d, config.hidden, config.members, rng)
    _train(var_net, x, z, w, config)

    return NCHModel(config=config, x_mean=x_mean, x_scale=x_scale,
                    y_mean=float(y_mean), y_scale=float(y_scale),
                    z_mean=float(z_mean), z_scale=float(z_scale),
                    mean_net=mean_net, var_net=var_net)


def nch_adjust(model, draws, summaries, obs) -> np.ndarray:
    """Heteroscedastic adjustment of working-scale draws toward ``obs``.

    ``model`` may be any object with predict_mean and predict_sigma.
    Conditional standard deviations below the configured floor (1e-8 by
    default) are clamped with a warning.
    """
    draws = np.asarray(draws, dtype=float)
    summaries = np.atleast_2d(np.asarray(summaries, dtype=float))
    obs = np.asarray(obs, dtype=float)
    floor = getattr(model, "config", NCHConfig()).sigma_floor

    m_obs = float(np.asarray(model.predict_mean(obs[None, :])).ravel()[0])
    s_obs = float(np.asarray(model.predict_sigma(obs[None, :])).ravel()[0])
    m_i = np.asarray(model.predict_mean(summaries), dtype=float)
    s_i = np.asarray(model.predict_sigma(summaries), dtype=float)

    clipped = np.concatenate((s_i, [s_obs])) < floor
    if np.any(clipped):
        warnings.warn(f"{int(np.sum(clipped))} conditional sd values below "
                      f"{floor}; clamped", RuntimeWarning)
        s_i = np.maximum(s_i, floor)
        s_obs = max(s_obs, floor)

    return m_obs + (draws - m_i) * (s_obs / s_i)


def save_nch(model: NCHModel, path) -> None:
    """Serialize a fitted NCH model to a versioned text file."""
    cfg = model.config
    with open(path, "w") as fh:
        fh.write("# epiabc-nch v1\n")
        for name in ("hidden", "members", "epochs", "learning_rate",
                     "weight_decay", "eps_floor", "sigma_floor", "optimizer", "seed"):
            fh.write(f"# {name} = {getattr(cfg, name)!r}\n")
        fh.write(f"# dim = {model.mean_net.dim}\n")
        scalars = [model.y_mean, model.y_scale, model.z_mean, model.z_scale]
        fh.write(" ".join(repr(v) for v in scalars) + "\n")
        for arr in (model.x_mean, model.x_scale):
            fh.write(" ".join(repr(float(v)) for v in arr) + "\n")
        for net in (model.mean_net, model.var_net):
            for p in net.parameters():
                fh.write(" ".join(repr(float(v)) for v in p.ravel()) + "\n")


def load_nch(path) -> NCHModel:
    """Load a model written by :func:`save_nch`."""
    with open(path) as fh:
        lines = [ln.rstrip("\n") for ln in fh]
    if not lines or lines[0] != "# epiabc-nch v1":
        raise ValueError("not an NCH model file (missing version header)")
    meta = {}
    body = []
    for ln in lines[1:]:
        if ln.startswith("# "):
            key, _, val = ln[2:].partition(" = ")
            meta[key.strip()] = val.strip()
        elif ln:
            body.append(np.array([float(tok) for tok in ln.split()]))
    cfg = NCHConfig(hidden=int(meta["hidden"]), members=int(meta["members"]),
                    epochs=int(meta["epochs"]),
                    learning_rate=float(meta["learning_rate"]),
                    weight_decay=float(meta["weight_decay"]),
                    eps_floor=float(meta["eps_floor"]),
                    sigma_floor=float(meta["sigma_floor"]),
                    optimizer=meta["optimizer"].strip("'\""), seed=int(meta["seed"]))
    dim = int(meta["dim"])
    y_mean, y_scale, z_mean, z_scale = body[0]
    x_mean, x_scale = body[1], body[2]
    rng = np.random.default_rng(0)
    nets = []
    row = 3
    for _ in range(2):
        net = _Ensemble(dim, cfg.hidden, cfg.members, rng)
        shapes = [p.shape for p in net.parameters()]
        values = [body[row + k].reshape(shape) for k, shape in enumerate(shapes)]
        net.w1, net.b1, net.w2, net.b2 = values
        nets.append(net)
        row += 4
    return NCHModel(config=cfg, x_mean=x_mean, x_scale=x_scale,
                    y_mean=float(y_mean), y_scale=float(y_scale),
                    z_mean=float(z_mean), z_scale=float(z_scale),
                    mean_net=nets[0], var_net=nets[1])
