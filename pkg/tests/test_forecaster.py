import math

import numpy as np
import pytest

from gcausal.data import TimeSeriesPanel, make_windows
from gcausal.errors import DataError
from gcausal.forecaster import (ForecasterConfig, ModelParams, _forward, forecast, init_params, nll_and_grad,
                                one_step_pairs, residuals, train, unflatten)


def finite_difference_check(model, x, y, weight_decay, probes, seed, eps=1e-5):
    theta = model.flat()
    _, grads = nll_and_grad(model.arrays, x, y, model.config.sigma_floor, weight_decay)
    analytic = np.concatenate([grads[k].ravel() for k in ("W1", "b1", "W2", "b2")])
    rng = np.random.default_rng(seed)
    worst = 0.0
    for i in rng.choice(theta.size, size=probes, replace=False):
        up, down = theta.copy(), theta.copy()
        up[i] += eps
        down[i] -= eps
        f_up = nll_and_grad(unflatten(up, model.arrays), x, y, model.config.sigma_floor, weight_decay)[0]
        f_dn = nll_and_grad(unflatten(down, model.arrays), x, y, model.config.sigma_floor, weight_decay)[0]
        numeric = (f_up - f_dn) / (2 * eps)
        rel = abs(numeric - analytic[i]) / max(abs(numeric), abs(analytic[i]), 1e-6)
        worst = max(worst, rel)
    return worst


def random_model(p, n, h, seed=0):
    cfg = ForecasterConfig(context_len=p, hidden_width=h, seed=seed)
    model = init_params(cfg, n)
    rng = np.random.default_rng(seed + 1)
    # move away from the symmetric initialisation so every term is exercised
    return model.with_flat(model.flat() + rng.normal(0, 0.3, model.flat().size))


@pytest.mark.parametrize("wd", [0.0, 0.01])
def test_gradient_matches_finite_differences(wd):
    model = random_model(2, 3, 8)
    rng = np.random.default_rng(4)
    x, y = rng.normal(size=(40, 6)), rng.normal(size=(40, 3))
    assert finite_difference_check(model, x, y, wd, probes=60, seed=1) < 1e-4


def test_nll_value_by_hand():
    model = random_model(1, 1, 2)
    x, y = np.array([[0.3]]), np.array([[-0.2]])
    _, mu, sigma, _ = _forward(model.arrays, x, 1, model.config.sigma_floor)
    expected = 0.5 * math.log(2 * math.pi) + math.log(sigma[0, 0]) + 0.5 * ((y[0, 0] - mu[0, 0]) / sigma[0, 0]) ** 2
    assert nll_and_grad(model.arrays, x, y, model.config.sigma_floor)[0] == pytest.approx(expected)


def test_sigma_respects_floor():
    model = random_model(2, 2, 4)
    arrays = dict(model.arrays)
    arrays["b2"] = np.array([0.0, 0.0, -50.0, -50.0])
    _, _, sigma, _ = _forward(arrays, np.zeros((1, 4)), 2, 1e-3)
    assert np.all(sigma >= 1e-3)


def test_one_step_pairs_layout():
    v = np.arange(12, dtype=float).reshape(6, 2)
    x, y = one_step_pairs(v, 2)
    assert x.shape == (4, 4)
    np.testing.assert_array_equal(x[1], [2, 3, 4, 5])
    np.testing.assert_array_equal(y[1], [6, 7])


def test_training_reduces_loss_and_is_deterministic(rng):
    z = np.zeros((400, 2))
    for t in range(1, 400):
        z[t] = 0.8 * z[t - 1] + rng.normal(size=2)
    panel = TimeSeriesPanel(z)
    cfg = ForecasterConfig(context_len=2, hidden_width=8, epochs=15, seed=3)
    m1 = train(panel, cfg)
    m2 = train(panel, cfg)
    assert m1.history[-1] < m1.history[0] - 0.2
    np.testing.assert_array_equal(m1.flat(), m2.flat())


def test_training_on_noise_approaches_entropy(rng):
    panel = TimeSeriesPanel(rng.normal(size=(1000, 2)))
    model = train(panel, ForecasterConfig(context_len=3, hidden_width=8, epochs=20, weight_decay=0.0))
    entropy = 0.5 * math.log(2 * math.pi * math.e)
    assert abs(model.history[-1] - entropy) < 0.2


def test_training_needs_enough_steps():
    with pytest.raises(DataError):
        train(TimeSeriesPanel(np.zeros((4, 1)) + np.arange(4)[:, None]), ForecasterConfig(context_len=3, horizon=2))


def test_params_json_roundtrip(tmp_path):
    model = random_model(2, 3, 5)
    model.save(tmp_path / "m.json")
    back = ModelParams.load(tmp_path / "m.json")
    np.testing.assert_array_equal(back.flat(), model.flat())
    assert back.config == model.config


def test_forecast_shapes_and_feedback():
    model = random_model(3, 2, 4)
    ctx = np.random.default_rng(0).normal(size=(3, 2))
    fc = forecast(model, ctx, horizon=3)
    assert fc.mu.shape == (3, 2) and np.all(fc.sigma > 0)
    # second step equals a one-step forecast from the context with the first mean appended
    step2 = forecast(model, np.vstack([ctx[1:], fc.mu[0]]), horizon=1)
    np.testing.assert_allclose(step2.mu[0], fc.mu[1])
    with pytest.raises(DataError):
        forecast(model, np.zeros((2, 2)))


def test_residuals_match_loop(small_panel):
    model = random_model(3, 4, 6).with_config(horizon=2)
    windows = make_windows(small_panel, 3, 2, 2)
    res = residuals(model, small_panel, windows)
    assert len(res) == 4 and len(res[0]) == len(windows)
    w = windows[5]
    fc = forecast(model, w.context, 2)
    expected = np.mean(np.abs(w.target - fc.mu) / np.maximum(np.abs(w.target), 1e-8), axis=0)
    np.testing.assert_allclose([r.errors[5] for r in res], expected)


def test_substitution_with_original_values_is_noop(small_panel):
    model = random_model(3, 4, 6).with_config(horizon=2)
    windows = make_windows(small_panel, 3, 2, 2)
    base = residuals(model, small_panel, windows)
    same = residuals(model, small_panel, windows, substitute=((1, 2), small_panel.values[:, [1, 2]]))
    for a, b in zip(base, same):
        np.testing.assert_array_equal(a.errors, b.errors)


def test_substitution_only_touches_context(small_panel):
    model = random_model(2, 4, 6).with_config(horizon=3)
    windows = make_windows(small_panel, 2, 3, 3)
    repl = np.zeros((small_panel.n_steps, 1))
    res = residuals(model, small_panel, windows, substitute=((0,), repl))
    w = windows[2]
    ctx = w.context.copy()
    ctx[:, 0] = 0.0
    fc = forecast(model, ctx, 3)
    expected = np.mean(np.abs(w.target - fc.mu) / np.maximum(np.abs(w.target), 1e-8), axis=0)
    np.testing.assert_allclose([r.errors[2] for r in res], expected)
