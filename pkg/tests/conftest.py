import numpy as np
import pytest

from kooba import FlightKoobaModel, ModelConfig, predict
from kooba.hippo import project
from kooba.model import build_basis


def realizable_series(config, b_star, n_windows, seed, ctrl_scale=5.0):
    """Series whose target blocks are exact forecasts under weights b_star.

    Windows tile disjointly (stride == seq_len + horizon): each history block
    is fresh smooth data, each target block is the model's own rollout with
    b_star, so the least-squares optimum over all windows is exactly b_star
    with zero residual. Used as the optimizer oracle fixture.
    """
    rng = np.random.default_rng(seed)
    L, h, m = config.seq_len, config.horizon, config.controls
    assert config.eff_stride == L + h
    total = n_windows * (L + h)
    t = np.arange(total, dtype=float)
    phases = rng.uniform(0, 2 * np.pi, size=m)
    periods = rng.uniform(9, 23, size=m)
    controls = np.column_stack(
        [ctrl_scale * np.sin(2 * np.pi * t / periods[j] + phases[j]) for j in range(m)])
    basis = build_basis(config)
    oracle = FlightKoobaModel(config=config, b=np.asarray([b_star], dtype=float))
    x = np.zeros(total)
    for i in range(n_windows):
        start = i * (L + h)
        amp = rng.uniform(0.8, 1.6)
        period = rng.uniform(7, 19)
        phase = rng.uniform(0, 2 * np.pi)
        x[start:start + L] = 1.5 + amp * np.sin(2 * np.pi * np.arange(L) / period + phase)
        state = project(basis, x[start:start + L])
        x[start + L:start + L + h] = predict(oracle, state, controls[start + L:start + L + h])
    return x[:, None], controls


@pytest.fixture
def realizable_fixture():
    b_star = np.array([0.7, -0.3])
    config = ModelConfig(order=4, seq_len=8, horizon=4, stride=12, controls=2,
                         epochs=50, learning_rate=1e-3, batch_size=1, seed=3)
    states, controls = realizable_series(config, b_star, n_windows=40, seed=11)
    return config, states, controls, b_star
