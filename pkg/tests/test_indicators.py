"""Tests for the technical indicator library."""
import numpy as np
import pytest

from proteus.econometrics import simulate
from proteus.errors import ConfigError
from proteus.features import FEATURE_COLUMNS, IndicatorConfig, compute_indicators, to_ohlc
from proteus.indicators import (
    Momentum,
    MovingAverage,
    adx,
    aroon,
    bollinger,
    cci,
    ema,
    label_direction,
    macd,
    momentum,
    moving_average,
    rsi,
    sma,
    stochastic,
    trima,
    williams_r,
    wma,
)

from tests.test_utils import (
    assert_close,
    ref_adx,
    ref_aroon,
    ref_bollinger,
    ref_cci,
    ref_ema,
    ref_macd,
    ref_mom,
    ref_roc,
    ref_rsi,
    ref_sma,
    ref_stochastic,
    ref_trima,
    ref_williams_r,
    ref_wma,
)

SERIES_SEEDS = list(range(30))


def random_closes(seed, length=60):
    """Random-walk close prices around 100."""
    rng = np.random.default_rng(seed)
    return 100.0 * np.exp(np.cumsum(rng.normal(0.0, 0.01, size=length)))


@pytest.fixture(params=SERIES_SEEDS)
def closes(request):
    """One of thirty seeded 60-point price series."""
    return random_closes(request.param)


def test_moving_averages_match_reference(closes):
    """Test SMA, WMA, EMA and TRIMA against loop implementations."""
    x = closes.tolist()
    assert_close(sma(closes, 10), ref_sma(x, 10))
    assert_close(wma(closes, 10), ref_wma(x, 10))
    assert_close(ema(closes, 10), ref_ema(x, 10))
    assert_close(trima(closes, 10), ref_trima(x, 10))


def test_momentum_matches_reference(closes):
    """Test MOM and ROC against loop implementations."""
    x = closes.tolist()
    assert_close(momentum(Momentum.MOM, closes, 10), ref_mom(x, 10))
    assert_close(momentum(Momentum.ROC, closes, 10), ref_roc(x, 10))


def test_oscillators_match_reference(closes):
    """Test RSI, stochastics and Williams %R against loop implementations."""
    x = closes.tolist()
    assert_close(rsi(closes, 10), ref_rsi(x, 10))
    k, d = stochastic(closes, 10, 3)
    ref_k, ref_d = ref_stochastic(x, 10, 3)
    assert_close(k, ref_k)
    assert_close(d, ref_d)
    assert_close(williams_r(closes, 14), ref_williams_r(x, 14))


def test_macd_matches_reference(closes):
    """Test MACD against a loop implementation."""
    assert_close(macd(closes, 12, 26, 9), ref_macd(closes.tolist(), 12, 26, 9))


def test_cci_matches_reference(closes):
    """Test CCI of close-only bars against a loop implementation."""
    assert_close(cci(closes, closes, closes, 20), ref_cci(closes.tolist(), 20))


def test_adx_matches_reference(closes):
    """Test ADX of close-only bars against a loop implementation."""
    assert_close(adx(closes, closes, closes, 14), ref_adx(closes.tolist(), 14))


def test_bands_and_aroon_match_reference(closes):
    """Test Bollinger bands and Aroon against loop implementations."""
    x = closes.tolist()
    upper, lower = bollinger(closes, 20, 2.0)
    ref_upper, ref_lower = ref_bollinger(x, 20, 2.0)
    assert_close(upper, ref_upper)
    assert_close(lower, ref_lower)
    down, up = aroon(closes, 25)
    ref_down, ref_up = ref_aroon(x, 25)
    assert_close(down, ref_down)
    assert_close(up, ref_up)


def test_default_feature_columns_match_reference(closes):
    """Test every feature column at its default period against the loop implementations."""
    columns = compute_indicators(to_ohlc(closes), IndicatorConfig())
    x = closes.tolist()
    sk, sd = ref_stochastic(x, 10, 10)
    upper, lower = ref_bollinger(x, 20, 2.0)
    down, up = ref_aroon(x, 10)
    expected = {
        "rsi10": ref_rsi(x, 10),
        "willr10": ref_williams_r(x, 10),
        "macd": ref_macd(x, 12, 26, 9),
        "cci10": ref_cci(x, 10),
        "mom10": ref_mom(x, 10),
        "sk": sk,
        "sd": sd,
        "sma5": ref_sma(x, 5),
        "sma10": ref_sma(x, 10),
        "wma10": ref_wma(x, 10),
        "ema10": ref_ema(x, 10),
        "trima10": ref_trima(x, 10),
        "adx10": ref_adx(x, 10),
        "boll_upper": upper,
        "boll_lower": lower,
        "roc10": ref_roc(x, 10),
        "aroon_down": down,
        "aroon_up": up,
    }
    assert set(expected) == set(FEATURE_COLUMNS)
    for name, values in expected.items():
        assert_close(columns[name], values)


def test_moving_average_dispatch():
    """Test that the dispatcher accepts enum members and their values."""
    x = random_closes(99)
    assert np.array_equal(moving_average(MovingAverage.WMA, x, 5), wma(x, 5), equal_nan=True)
    assert np.array_equal(moving_average("ema", x, 5), ema(x, 5), equal_nan=True)


def test_warmup_lengths():
    """Test the number of leading NaNs of each indicator."""
    x = random_closes(1, 100)
    assert np.isnan(sma(x, 10)[:9]).all() and not np.isnan(sma(x, 10)[9])
    assert np.isnan(ema(x, 10)[:10]).all() and not np.isnan(ema(x, 10)[10])
    assert np.isnan(rsi(x, 14)[:14]).all() and not np.isnan(rsi(x, 14)[14])
    assert np.isnan(macd(x)[:35]).all() and not np.isnan(macd(x)[35])
    assert np.isnan(adx(x, x, x, 14)[:27]).all() and not np.isnan(adx(x, x, x, 14)[27])
    assert np.isnan(aroon(x, 25).up[:25]).all() and not np.isnan(aroon(x, 25).up[25])


def test_short_input_is_all_nan():
    """Test that inputs shorter than a window give NaN throughout."""
    x = random_closes(2, 5)
    for values in (wma(x, 10), ema(x, 10), rsi(x, 10), cci(x, x, x, 10), adx(x, x, x, 3)):
        assert values.shape == (5,)
        assert np.isnan(values).all()


def test_constant_prices():
    """Test the documented values on flat windows."""
    x = np.full(80, 250.0)
    assert (rsi(x, 10)[10:] == 50.0).all()
    k, d = stochastic(x, 14, 3)
    assert (k[13:] == 50.0).all()
    assert (d[15:] == 50.0).all()
    assert (williams_r(x, 14)[13:] == -50.0).all()
    assert (cci(x, x, x, 20)[19:] == 0.0).all()
    assert (momentum(Momentum.MOM, x, 10)[10:] == 0.0).all()
    assert (momentum(Momentum.ROC, x, 10)[10:] == 0.0).all()
    assert (adx(x, x, x, 14)[27:] == 0.0).all()
    upper, lower = bollinger(x, 20)
    assert upper[19:] == pytest.approx(np.full(61, 250.0))
    assert lower[19:] == pytest.approx(np.full(61, 250.0))
    down, up = aroon(x, 25)
    assert (up[25:] == 100.0).all() and (down[25:] == 100.0).all()


def test_rsi_without_losses_is_100():
    """Test that a strictly rising window reads 100."""
    x = np.linspace(100.0, 120.0, 30)
    assert (rsi(x, 10)[10:] == 100.0).all()


def test_stochastic_d_is_sma_of_k():
    """Test that %D is exactly the simple average of %K."""
    x = random_closes(5, 500)
    k, d = stochastic(x, 14, 3)
    assert np.array_equal(d, sma(k, 3), equal_nan=True)


def test_indicator_ranges(garch_model):
    """Test that bounded indicators stay in range over a long series."""
    returns = simulate(garch_model, 20_000, seed=31)
    x = 250.0 * np.exp(np.cumsum(returns))
    bounded = {
        "rsi": (rsi(x, 14), 0.0, 100.0),
        "stoch_k": (stochastic(x, 14, 3).k, 0.0, 100.0),
        "williams": (williams_r(x, 14), -100.0, 0.0),
        "adx": (adx(x, x, x, 14), 0.0, 100.0),
        "aroon_up": (aroon(x, 25).up, 0.0, 100.0),
        "aroon_down": (aroon(x, 25).down, 0.0, 100.0),
    }
    for name, (values, low, high) in bounded.items():
        finite = values[~np.isnan(values)]
        assert finite.size > 19_000, name
        assert finite.min() >= low, name
        assert finite.max() <= high, name
    upper, lower = bollinger(x, 20)
    valid = ~np.isnan(upper)
    assert (upper[valid] >= lower[valid]).all()


def test_invalid_periods():
    """Test that non-positive periods are rejected."""
    x = random_closes(3)
    with pytest.raises(ConfigError):
        sma(x, 0)
    with pytest.raises(ConfigError):
        rsi(x, -3)
    with pytest.raises(ConfigError):
        macd(x, 26, 12, 9)
    with pytest.raises(ConfigError):
        bollinger(x, 20, 0.0)


def test_label_direction():
    """Test the up/down label of consecutive closes."""
    labels = label_direction([1.0, 2.0, 2.0, 1.5, 3.0])
    assert labels.tolist() == [1, 0, 0, 1]
