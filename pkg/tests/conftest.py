"""
Shared test fixtures.
"""
import numpy as np
import pandas as pd
import pytest

from proteus.artifacts import write_model
from proteus.econometrics import ArmaParams, GarchParams, RegimeModel, simulate
from proteus.transition_map import StreamConfig


@pytest.fixture
def garch_model():
    """AR(1)-GARCH(1,1) model at 5-minute-bar scale."""
    return RegimeModel(
        state_id=1,
        arma=ArmaParams(mu=0.0, phi=(0.2,)),
        garch=GarchParams(omega=1e-6, alpha=(0.10,), beta=(0.85,)),
    )


@pytest.fixture
def four_models():
    """Four distinct regime models, state ids 1..4."""
    return [
        RegimeModel(1, ArmaParams(2e-5, (0.1,)), GarchParams(5e-7, (0.05,), (0.90,))),
        RegimeModel(2, ArmaParams(-1e-5, (), (0.2,)), GarchParams(2e-6, (0.10,), (0.80,))),
        RegimeModel(3, ArmaParams(0.0, (0.3, -0.1)), GarchParams(1e-6, (0.15,), (0.70,))),
        RegimeModel(4, ArmaParams(1e-5), GarchParams(4e-6, (0.08,), (0.88,))),
    ]


@pytest.fixture
def model_dir(tmp_path, four_models):
    """Directory of model JSON files."""
    directory = tmp_path / "models"
    for model in four_models:
        write_model(model, directory / f"state_{model.state_id}.json")
    return directory


@pytest.fixture
def desk_config():
    """Desk-scale stream settings."""
    return StreamConfig(length=30_000, interval=5_000, seed=7)


def make_bar_frame(returns, start_price=100.0, start="2024-01-02T09:30:00Z"):
    """OHLC bars whose closes follow the given log-returns."""
    closes = start_price * np.exp(np.cumsum(np.concatenate(([0.0], returns))))
    opens = np.concatenate(([start_price], closes[:-1]))
    highs = np.maximum(opens, closes) * 1.0005
    lows = np.minimum(opens, closes) * 0.9995
    timestamps = pd.date_range(start=start, periods=closes.size, freq="5min")
    return pd.DataFrame(
        {
            "timestamp": timestamps.strftime("%Y-%m-%dT%H:%M:%SZ"),
            "open": opens,
            "high": highs,
            "low": lows,
            "close": closes,
            "volume": np.arange(closes.size) % 97 + 10,
        }
    )


@pytest.fixture
def bar_file_factory(tmp_path):
    """Write bar CSV files into tmp_path."""

    def factory(returns, name="bars.csv", **kwargs):
        path = tmp_path / name
        make_bar_frame(np.asarray(returns), **kwargs).to_csv(path, index=False)
        return path

    return factory


@pytest.fixture
def sample_bars(bar_file_factory, garch_model):
    """5,000 bars of a simulated GARCH series."""
    returns = simulate(garch_model, 4_999, seed=11)
    return bar_file_factory(returns)
