"""Tests for price reconstruction and the feature table."""
import numpy as np
import pytest

from proteus.econometrics import simulate
from proteus.errors import ConfigError, DegenerateInputError
from proteus.features import (
    FEATURE_COLUMNS,
    FEATURE_FILE_COLUMNS,
    IndicatorConfig,
    compute_indicators,
    feature_rows,
    featurize,
    reconstruct_prices,
    to_ohlc,
)
from proteus.indicators import sma
from proteus.stream_simulation import simulate_stream
from proteus.transition_map import StreamConfig, generate_map


@pytest.fixture
def stream_returns(garch_model):
    """1,000 simulated returns."""
    return simulate(garch_model, 1_000, seed=13)


def test_reconstruct_prices():
    """Test compounding of log-returns."""
    closes = reconstruct_prices([0.0, np.log(2.0), np.log(0.5)], initial_price=10.0)
    assert closes == pytest.approx([10.0, 20.0, 10.0])


def test_reconstruct_prices_rejects_bad_input():
    """Test non-finite returns, overflow and bad initial prices."""
    with pytest.raises(DegenerateInputError, match="index 1"):
        reconstruct_prices([0.0, np.nan])
    with pytest.raises(DegenerateInputError):
        reconstruct_prices([800.0, 800.0])
    with pytest.raises(ConfigError):
        reconstruct_prices([0.0], initial_price=0.0)


def test_to_ohlc():
    """Test that open is the previous close and high = low = close."""
    bars = to_ohlc(np.array([101.0, 102.0, 100.0]), initial_price=100.0)
    assert bars.open.tolist() == [100.0, 101.0, 102.0]
    assert bars.high.tolist() == bars.low.tolist() == bars.close.tolist()
    assert len(bars) == 3


def test_default_warmup():
    """Test that the slowest default indicator is MACD."""
    config = IndicatorConfig()
    assert config.warmup == 35
    assert config.warmup_by_column()["macd"] == 35
    assert set(config.warmup_by_column()) == set(FEATURE_COLUMNS)


def test_warmup_matches_first_defined_value(stream_returns):
    """Test every column's warm-up against the computed indicators."""
    config = IndicatorConfig()
    closes = reconstruct_prices(stream_returns)
    columns = compute_indicators(to_ohlc(closes), config)
    for name, first in config.warmup_by_column().items():
        values = columns[name]
        assert np.isnan(values[:first]).all(), name
        assert np.isfinite(values[first:]).all(), name


def test_indicator_config_validation():
    """Test that periods must be positive and MACD ordered."""
    with pytest.raises(ConfigError):
        IndicatorConfig(rsi_period=0)
    with pytest.raises(ConfigError):
        IndicatorConfig(macd_fast=30)
    with pytest.raises(ConfigError):
        IndicatorConfig(bollinger_width=-1.0)
    assert IndicatorConfig(macd_slow=40).warmup == 49


def test_featurize_shape(stream_returns):
    """Test that 1,000 returns give 965 rows in the documented column order."""
    frame = featurize(stream_returns)
    assert tuple(frame.columns) == FEATURE_FILE_COLUMNS
    assert len(frame) == 965
    assert frame["index"].iloc[0] == 35
    assert frame["index"].iloc[-1] == 999
    assert np.isfinite(frame.loc[:, list(FEATURE_COLUMNS)].to_numpy()).all()


def test_featurize_labels(stream_returns):
    """Test that label is 1 exactly when the close rose."""
    frame = featurize(stream_returns, initial_price=100.0)
    closes = reconstruct_prices(stream_returns, 100.0)
    previous = np.concatenate(([100.0], closes[:-1]))
    expected = (closes > previous).astype(int)[35:]
    assert frame["label"].tolist() == expected.tolist()


def test_featurize_values(stream_returns):
    """Test that feature columns equal the indicators on the rebuilt closes."""
    frame = featurize(stream_returns)
    closes = reconstruct_prices(stream_returns)
    assert np.array_equal(frame["sma10"].to_numpy(), sma(closes, 10)[35:])


def test_featurize_keeps_stream_index(stream_returns):
    """Test that a custom index is carried through."""
    frame = featurize(stream_returns, index=np.arange(1_000) + 5_000)
    assert frame["index"].iloc[0] == 5_035


def test_featurize_rejects_short_stream(stream_returns):
    """Test that a stream no longer than the warm-up is rejected."""
    with pytest.raises(ConfigError):
        featurize(stream_returns[:35])
    with pytest.raises(ConfigError):
        featurize(stream_returns, index=np.arange(10))


def test_feature_rows(stream_returns):
    """Test iteration as typed rows."""
    frame = featurize(stream_returns)
    rows = list(feature_rows(frame))
    assert len(rows) == 965
    first = rows[0]
    assert first.index == 35
    assert first.rsi10 == frame["rsi10"].iloc[0]
    assert first.label in (0, 1)


@pytest.mark.slow
@pytest.mark.timeout(120)
def test_label_balance_with_neutral_means(four_models):
    """Test that a mean-neutral stream has roughly balanced labels."""
    config = StreamConfig(length=100_000, seed=8, neutralize_mean=True)
    stream = simulate_stream(four_models, generate_map(config, 4), config)
    frame = featurize(stream.returns)
    assert 0.45 <= (frame["label"] == 0).mean() <= 0.55


@pytest.mark.slow
@pytest.mark.timeout(120)
def test_feature_envelopes_on_long_stream(four_models):
    """Test the value ranges of bounded features with the default periods."""
    config = StreamConfig(length=100_000, seed=21)
    stream = simulate_stream(four_models, generate_map(config, 4), config)
    frame = featurize(stream.returns)
    assert len(frame) == 100_000 - 35
    bounds = {
        "rsi10": (0.0, 100.0),
        "sk": (0.0, 100.0),
        "sd": (0.0, 100.0),
        "adx10": (0.0, 100.0),
        "aroon_down": (0.0, 100.0),
        "aroon_up": (0.0, 100.0),
        "willr10": (-100.0, 0.0),
        "cci10": (-333.34, 333.34),
    }
    for name, (low, high) in bounds.items():
        assert frame[name].min() >= low, name
        assert frame[name].max() <= high, name
    assert (frame["boll_upper"] >= frame["boll_lower"]).all()

    sk = frame["sk"].to_numpy()
    windows = np.lib.stride_tricks.sliding_window_view(sk, 10)
    assert np.abs(frame["sd"].to_numpy()[9:] - windows.mean(axis=1)).max() <= 1e-9
