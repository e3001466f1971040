"""Probabilistic autoregressive forecaster.

A one-hidden-layer tanh network maps the flattened last ``context_len`` rows
of the panel to a Gaussian over the next row: N means and N standard
deviations (softplus + floor). It is trained on one-step-ahead pairs by
minimising the Gaussian negative log-likelihood with Adam; multi-step
forecasts feed predicted means back into the context.
"""

from __future__ import annotations

import json
import math
from dataclasses import asdict, dataclass, field
from typing import Sequence

import numpy as np

from .data import ResidualSample, TimeSeriesPanel, Window
from .errors import DataError, NumericError

HALF_LOG_2PI = 0.5 * math.log(2 * math.pi)
RESIDUAL_EPS = 1e-8
PARAM_NAMES = ("W1", "b1", "W2", "b2")


@dataclass(frozen=True)
class ForecasterConfig:
    context_len: int = 5
    hidden_width: int = 32
    horizon: int = 2
    learning_rate: float = 3e-3
    epochs: int = 60
    batch_size: int = 64
    sigma_floor: float = 1e-3
    weight_decay: float = 3e-3
    seed: int = 0

    def __post_init__(self):
        for name in ("context_len", "hidden_width", "horizon", "epochs", "batch_size"):
            if getattr(self, name) < 1:
                raise DataError(f"forecaster {name} must be >= 1, got {getattr(self, name)}")
        if not self.learning_rate > 0:
            raise DataError(f"learning_rate must be > 0, got {self.learning_rate}")
        if self.sigma_floor < 1e-4:
            raise DataError(f"sigma_floor must be >= 1e-4, got {self.sigma_floor}")
        if self.weight_decay < 0:
            raise DataError(f"weight_decay must be >= 0, got {self.weight_decay}")


@dataclass(frozen=True, eq=False)
class ModelParams:
    config: ForecasterConfig
    n_vars: int
    arrays: dict = field(repr=False)
    history: tuple[float, ...] = ()

    def __post_init__(self):
        arrays = {}
        for k in PARAM_NAMES:
            a = np.array(self.arrays[k], dtype=float, copy=True)
            if not np.all(np.isfinite(a)):
                raise NumericError(f"parameter {k} has non-finite entries")
            a.setflags(write=False)
            arrays[k] = a
        p, n, h = self.config.context_len, self.n_vars, self.config.hidden_width
        expected = {"W1": (p * n, h), "b1": (h,), "W2": (h, 2 * n), "b2": (2 * n,)}
        for k, shape in expected.items():
            if arrays[k].shape != shape:
                raise DataError(f"parameter {k} has shape {arrays[k].shape}, expected {shape}")
        object.__setattr__(self, "arrays", arrays)
        object.__setattr__(self, "history", tuple(float(v) for v in self.history))

    def flat(self) -> np.ndarray:
        return np.concatenate([self.arrays[k].ravel() for k in PARAM_NAMES])

    def with_flat(self, theta) -> "ModelParams":
        return ModelParams(self.config, self.n_vars, unflatten(theta, self.arrays), self.history)

    def with_config(self, **changes) -> "ModelParams":
        cfg = ForecasterConfig(**{**asdict(self.config), **changes})
        return ModelParams(cfg, self.n_vars, self.arrays, self.history)

    def to_json(self) -> dict:
        return {
            "config": asdict(self.config),
            "n_vars": self.n_vars,
            "params": {k: {"shape": list(v.shape), "data": v.ravel().tolist()} for k, v in self.arrays.items()},
            "history": list(self.history),
        }

    @classmethod
    def from_json(cls, obj: dict) -> "ModelParams":
        arrays = {k: np.array(v["data"], dtype=float).reshape(v["shape"]) for k, v in obj["params"].items()}
        return cls(ForecasterConfig(**obj["config"]), int(obj["n_vars"]), arrays, tuple(obj.get("history", ())))

    def save(self, path) -> None:
        with open(path, "w", encoding="utf-8") as fh:
            json.dump(self.to_json(), fh)

    @classmethod
    def load(cls, path) -> "ModelParams":
        with open(path, encoding="utf-8") as fh:
            return cls.from_json(json.load(fh))


@dataclass(frozen=True, eq=False)
class GaussianForecast:
    mu: np.ndarray
    sigma: np.ndarray


def unflatten(theta, like: dict) -> dict:
    theta = np.asarray(theta, dtype=float)
    out, pos = {}, 0
    for k in PARAM_NAMES:
        size = like[k].size
        out[k] = theta[pos:pos + size].reshape(like[k].shape)
        pos += size
    if pos != theta.size:
        raise DataError(f"flat parameter vector has {theta.size} entries, expected {pos}")
    return out


def _softplus(x):
    return np.logaddexp(0.0, x)


def _sigmoid(x):
    return 0.5 * (1.0 + np.tanh(0.5 * x))


def init_params(config: ForecasterConfig, n_vars: int) -> ModelParams:
    """Glorot-uniform hidden layer, small output layer, sigma starting near 1."""
    rng = np.random.default_rng(config.seed)
    d_in, h, d_out = config.context_len * n_vars, config.hidden_width, 2 * n_vars
    lim1 = math.sqrt(6.0 / (d_in + h))
    lim2 = 0.1 * math.sqrt(6.0 / (h + d_out))
    b2 = np.zeros(d_out)
    b2[n_vars:] = math.log(math.expm1(max(1.0 - config.sigma_floor, 1e-3)))
    arrays = {
        "W1": rng.uniform(-lim1, lim1, size=(d_in, h)),
        "b1": np.zeros(h),
        "W2": rng.uniform(-lim2, lim2, size=(h, d_out)),
        "b2": b2,
    }
    return ModelParams(config, n_vars, arrays)


def _forward(arrays: dict, x: np.ndarray, n: int, floor: float):
    hid = np.tanh(x @ arrays["W1"] + arrays["b1"])
    out = hid @ arrays["W2"] + arrays["b2"]
    raw = out[:, n:]
    return hid, out[:, :n], _softplus(raw) + floor, raw


def nll_and_grad(arrays: dict, x: np.ndarray, y: np.ndarray, sigma_floor: float,
                 weight_decay: float = 0.0) -> tuple[float, dict]:
    """Mean Gaussian NLL per scalar target and its gradient.

    ``x`` is (B, p*N) flattened contexts, ``y`` is (B, N) next rows.
    """
    b, n = y.shape
    hid, mu, sigma, raw = _forward(arrays, x, n, sigma_floor)
    r = y - mu
    inv_var = 1.0 / (sigma * sigma)
    loss = HALF_LOG_2PI + np.mean(np.log(sigma) + 0.5 * r * r * inv_var)
    scale = 1.0 / (b * n)
    d_mu = -r * inv_var * scale
    d_sigma = (1.0 / sigma - r * r * inv_var / sigma) * scale
    d_out = np.concatenate([d_mu, d_sigma * _sigmoid(raw)], axis=1)
    grads = {
        "W2": hid.T @ d_out,
        "b2": d_out.sum(axis=0),
    }
    d_hid = (d_out @ arrays["W2"].T) * (1.0 - hid * hid)
    grads["W1"] = x.T @ d_hid
    grads["b1"] = d_hid.sum(axis=0)
    if weight_decay:
        for k in ("W1", "W2"):
            loss += 0.5 * weight_decay * float(np.sum(arrays[k] ** 2))
            grads[k] = grads[k] + weight_decay * arrays[k]
    return float(loss), grads


def one_step_pairs(values: np.ndarray, context_len: int) -> tuple[np.ndarray, np.ndarray]:
    """All (flattened context, next row) pairs of a T x N array."""
    t, n = values.shape
    if t <= context_len:
        raise DataError(f"need more than context_len={context_len} steps to train, got {t}")
    view = np.lib.stride_tricks.sliding_window_view(values, (context_len, n))[:, 0]
    x = view[: t - context_len].reshape(t - context_len, context_len * n)
    return np.ascontiguousarray(x), values[context_len:]


class Adam:
    def __init__(self, lr, beta1=0.9, beta2=0.999, eps=1e-8):
        self.lr, self.beta1, self.beta2, self.eps = lr, beta1, beta2, eps
        self.m, self.v, self.t = {}, {}, 0

    def step(self, params: dict, grads: dict) -> None:
        self.t += 1
        bc1 = 1.0 - self.beta1 ** self.t
        bc2 = 1.0 - self.beta2 ** self.t
        for k, g in grads.items():
            if k not in self.m:
                self.m[k] = np.zeros_like(g)
                self.v[k] = np.zeros_like(g)
            self.m[k] = self.beta1 * self.m[k] + (1.0 - self.beta1) * g
            self.v[k] = self.beta2 * self.v[k] + (1.0 - self.beta2) * (g * g)
            params[k] = params[k] - self.lr * (self.m[k] / bc1) / (np.sqrt(self.v[k] / bc2) + self.eps)


def full_nll(model: ModelParams, panel: TimeSeriesPanel) -> float:
    x, y = one_step_pairs(panel.values, model.config.context_len)
    return nll_and_grad(model.arrays, x, y, model.config.sigma_floor)[0]


def train(panel: TimeSeriesPanel, config: ForecasterConfig) -> ModelParams:
    """Fit by mini-batch Adam; ``history`` holds full-data NLL before training and after each epoch."""
    if panel.n_steps < config.context_len + config.horizon:
        raise DataError(
            f"panel has {panel.n_steps} steps; training needs at least {config.context_len + config.horizon}"
        )
    n = panel.n_vars
    x, y = one_step_pairs(panel.values, config.context_len)
    model = init_params(config, n)
    params = {k: v.copy() for k, v in model.arrays.items()}
    rng = np.random.default_rng([config.seed, 1])
    opt = Adam(config.learning_rate)
    floor, wd = config.sigma_floor, config.weight_decay

    history = [nll_and_grad(params, x, y, floor)[0]]
    m = x.shape[0]
    for epoch in range(config.epochs):
        order = rng.permutation(m)
        for bi, start in enumerate(range(0, m, config.batch_size)):
            idx = order[start:start + config.batch_size]
            loss, grads = nll_and_grad(params, x[idx], y[idx], floor, wd)
            if not math.isfinite(loss):
                raise NumericError(f"non-finite training loss at epoch {epoch}, batch {bi}")
            opt.step(params, grads)
        history.append(nll_and_grad(params, x, y, floor)[0])
        if not math.isfinite(history[-1]):
            raise NumericError(f"non-finite full-data loss after epoch {epoch}")
    return ModelParams(config, n, params, tuple(history))


def _rollout(model: ModelParams, contexts: np.ndarray, horizon: int):
    """Recursive mean-feedback forecast for a batch of (L, p, N) contexts."""
    cfg = model.config
    n = model.n_vars
    ctx = np.array(contexts, dtype=float, copy=True)
    batch = ctx.shape[0]
    mus = np.empty((batch, horizon, n))
    sigmas = np.empty((batch, horizon, n))
    for h in range(horizon):
        _, mu, sigma, _ = _forward(model.arrays, ctx.reshape(batch, -1), n, cfg.sigma_floor)
        mus[:, h], sigmas[:, h] = mu, sigma
        if h + 1 < horizon:
            ctx = np.concatenate([ctx[:, 1:], mu[:, None, :]], axis=1)
    return mus, sigmas


def forecast(model: ModelParams, context, horizon: int | None = None) -> GaussianForecast:
    context = np.asarray(context, dtype=float)
    p, n = model.config.context_len, model.n_vars
    if context.shape != (p, n):
        raise DataError(f"context must have shape ({p}, {n}), got {context.shape}")
    horizon = model.config.horizon if horizon is None else horizon
    mu, sigma = _rollout(model, context[None], horizon)
    return GaussianForecast(mu[0], sigma[0])


def residuals(
    model: ModelParams,
    panel: TimeSeriesPanel,
    windows: Sequence[Window],
    substitute: tuple[Sequence[int], np.ndarray] | None = None,
) -> list[ResidualSample]:
    """Windowed mean relative absolute forecast error per variable.

    With ``substitute=(indices, columns)``, the listed variables are replaced
    by ``columns`` (T x len(indices)) in every observed context row; the
    rollout still feeds back predicted means and targets stay the original
    observations, so substituting a variable with itself changes nothing.
    """
    if len(windows) == 0:
        raise DataError("residuals need at least one window")
    p, n = model.config.context_len, model.n_vars
    if panel.n_vars != n:
        raise DataError(f"model expects {n} variables, panel has {panel.n_vars}")
    horizon = windows[0].target.shape[0]
    for w in windows:
        if w.context.shape[0] != p or w.target.shape[0] != horizon:
            raise DataError(f"window at offset {w.offset} does not match context_len={p}, horizon={horizon}")
    values = panel.values
    inputs = values
    if substitute is not None:
        idx = np.asarray(list(substitute[0]), dtype=int)
        cols = np.asarray(substitute[1], dtype=float)
        if cols.ndim == 1:
            cols = cols[:, None]
        if cols.shape != (values.shape[0], idx.size):
            raise DataError(
                f"replacement columns must have shape ({values.shape[0]}, {idx.size}), got {cols.shape}"
            )
        inputs = values.copy()
        inputs[:, idx] = cols

    offsets = np.array([w.offset for w in windows])
    ctx_idx = offsets[:, None] + np.arange(p)
    tgt_idx = offsets[:, None] + p + np.arange(horizon)
    mu, _ = _rollout(model, inputs[ctx_idx], horizon)
    z = values[tgt_idx]
    err = np.mean(np.abs(z - mu) / np.maximum(np.abs(z), RESIDUAL_EPS), axis=1)
    return [ResidualSample(i, err[:, i]) for i in range(n)]
