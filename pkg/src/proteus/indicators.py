"""
Technical indicators over a close-price (and OHLC) series.

Every indicator returns an array as long as its input, with NaN over the
warm-up instances where the indicator is not yet defined. Windows ending at t
include the bar at t.
"""
import logging
import math
from enum import Enum
from typing import NamedTuple, Sequence

import numpy as np
import pandas as pd
from numpy.lib.stride_tricks import sliding_window_view
from scipy.signal import lfilter, lfiltic

from .errors import ConfigError

logger = logging.getLogger(__name__)

# Relative spread below which a window counts as flat
FLAT_TOLERANCE = 1e-12
CCI_SCALE = 0.015


class MovingAverage(Enum):
    """Moving-average kinds."""
    SMA = "sma"
    WMA = "wma"
    EMA = "ema"
    TRIMA = "trima"


class Momentum(Enum):
    """Momentum kinds."""
    MOM = "mom"
    ROC = "roc"


class Stochastics(NamedTuple):
    """Stochastic %K and its moving average %D."""
    k: np.ndarray
    d: np.ndarray


class BollingerBands(NamedTuple):
    """Upper and lower Bollinger bands."""
    upper: np.ndarray
    lower: np.ndarray


class Aroon(NamedTuple):
    """Aroon down and up oscillators."""
    down: np.ndarray
    up: np.ndarray


def _check_period(n: int, name: str = "period") -> None:
    if isinstance(n, bool) or int(n) != n or n < 1:
        raise ConfigError(f"Indicator {name} must be a positive integer: {n}")


def _series(values: Sequence[float]) -> np.ndarray:
    array = np.asarray(values, dtype=float)
    if array.ndim != 1:
        raise ValueError("Indicator input must be one-dimensional")
    return array


def _place(length: int, start: int, values: np.ndarray) -> np.ndarray:
    """Full-length output with NaN before ``start``."""
    out = np.full(length, np.nan)
    if start < length:
        out[start:] = values[: length - start]
    return out


def _is_flat(spread: np.ndarray, level: np.ndarray) -> np.ndarray:
    return spread <= FLAT_TOLERANCE * np.maximum(np.abs(level), 1.0)


def sma(values: Sequence[float], n: int) -> np.ndarray:
    """Simple moving average over the last n values."""
    _check_period(n)
    return pd.Series(_series(values)).rolling(n).mean().to_numpy()


def wma(values: Sequence[float], n: int) -> np.ndarray:
    """Linearly weighted moving average, weight n on the newest value."""
    _check_period(n)
    x = _series(values)
    if x.size < n:
        return np.full(x.size, np.nan)
    kernel = np.arange(n, 0, -1, dtype=float)
    weighted = np.convolve(x, kernel, mode="valid") / (n * (n + 1) / 2.0)
    return _place(x.size, n - 1, weighted)


def ema(values: Sequence[float], n: int) -> np.ndarray:
    """
    Exponential moving average with smoothing 2 / (n + 1).

    Leading NaNs are skipped. The recursion is seeded with the simple average
    of the first n valid values and first emitted one step later.

    Args:
        values: Input series, optionally with a NaN warm-up prefix
        n: Period

    Returns:
        EMA with NaN before first_valid + n
    """
    _check_period(n)
    x = _series(values)
    valid = np.flatnonzero(~np.isnan(x))
    out = np.full(x.size, np.nan)
    if valid.size == 0:
        return out
    first = int(valid[0])
    if x.size <= first + n:
        return out
    alpha = 2.0 / (n + 1)
    seed = float(np.mean(x[first:first + n]))
    b, a = [alpha], [1.0, alpha - 1.0]
    smoothed, _ = lfilter(b, a, x[first + n:], zi=lfiltic(b, a, [seed]))
    out[first + n:] = smoothed
    return out


def trima(values: Sequence[float], n: int) -> np.ndarray:
    """Triangular moving average: an SMA of an SMA of half the period."""
    _check_period(n)
    half = math.ceil((n + 1) / 2)
    return sma(sma(values, half), half)


def moving_average(kind: MovingAverage, values: Sequence[float], n: int) -> np.ndarray:
    """Dispatch to one of the moving-average kinds."""
    functions = {
        MovingAverage.SMA: sma,
        MovingAverage.WMA: wma,
        MovingAverage.EMA: ema,
        MovingAverage.TRIMA: trima,
    }
    return functions[MovingAverage(kind)](values, n)


def momentum(kind: Momentum, closes: Sequence[float], n: int) -> np.ndarray:
    """
    Change over n bars.

    MOM is the difference C_t - C_(t-n); ROC is the percentage change.
    """
    _check_period(n)
    c = _series(closes)
    if c.size <= n:
        return np.full(c.size, np.nan)
    change = c[n:] - c[:-n]
    if Momentum(kind) is Momentum.ROC:
        change = 100.0 * change / c[:-n]
    return _place(c.size, n, change)


def rsi(closes: Sequence[float], n: int) -> np.ndarray:
    """
    Relative Strength Index over the last n price changes.

    Flat windows read 50; windows with no down moves read 100.
    """
    _check_period(n)
    c = _series(closes)
    if c.size <= n:
        return np.full(c.size, np.nan)
    changes = np.diff(c)
    gains = sliding_window_view(np.maximum(changes, 0.0), n).sum(axis=1)
    losses = sliding_window_view(np.maximum(-changes, 0.0), n).sum(axis=1)
    with np.errstate(divide="ignore", invalid="ignore"):
        strength = (gains / n) / (losses / n)
        values = 100.0 - 100.0 / (1.0 + strength)
    values = np.where(losses == 0.0, 100.0, values)
    values = np.where((gains == 0.0) & (losses == 0.0), 50.0, values)
    return _place(c.size, n, values)


def _highest_lowest(closes: np.ndarray, n: int) -> tuple[np.ndarray, np.ndarray]:
    rolling = pd.Series(closes).rolling(n)
    return rolling.max().to_numpy(), rolling.min().to_numpy()


def stochastic(closes: Sequence[float], n: int, d_period: int) -> Stochastics:
    """
    Stochastic %K over n bars and %D, its d_period simple average.

    Flat windows read 50.
    """
    _check_period(n)
    _check_period(d_period, "smoothing period")
    c = _series(closes)
    highest, lowest = _highest_lowest(c, n)
    spread = highest - lowest
    with np.errstate(divide="ignore", invalid="ignore"):
        k = np.where(spread > 0.0, 100.0 * (c - lowest) / spread, 50.0)
    k[np.isnan(spread)] = np.nan
    return Stochastics(k, sma(k, d_period))


def williams_r(closes: Sequence[float], n: int) -> np.ndarray:
    """Williams %R over n bars, in [-100, 0]; flat windows read -50."""
    _check_period(n)
    c = _series(closes)
    highest, lowest = _highest_lowest(c, n)
    spread = highest - lowest
    with np.errstate(divide="ignore", invalid="ignore"):
        r = np.where(spread > 0.0, 100.0 * (c - highest) / spread, -50.0)
    r[np.isnan(spread)] = np.nan
    return r


def macd(
    closes: Sequence[float], fast: int = 12, slow: int = 26, signal: int = 9
) -> np.ndarray:
    """EMA of the difference between the fast and slow EMAs."""
    _check_period(fast, "fast period")
    _check_period(slow, "slow period")
    _check_period(signal, "signal period")
    if fast >= slow:
        raise ConfigError(f"MACD fast period {fast} must be below slow period {slow}")
    c = _series(closes)
    return ema(ema(c, fast) - ema(c, slow), signal)


def cci(
    highs: Sequence[float],
    lows: Sequence[float],
    closes: Sequence[float],
    n: int,
) -> np.ndarray:
    """
    Commodity Channel Index over n bars of typical price.

    Windows with zero mean absolute deviation read 0.
    """
    _check_period(n)
    typical = (_series(highs) + _series(lows) + _series(closes)) / 3.0
    if typical.size < n:
        return np.full(typical.size, np.nan)
    windows = sliding_window_view(typical, n)
    means = windows.mean(axis=1)
    deviation = np.abs(windows - means[:, None]).mean(axis=1)
    current = typical[n - 1:]
    flat = _is_flat(deviation, means)
    with np.errstate(divide="ignore", invalid="ignore"):
        values = np.where(flat, 0.0, (current - means) / (CCI_SCALE * deviation))
    return _place(typical.size, n - 1, values)


def _wilder_sum(values: np.ndarray, n: int) -> np.ndarray:
    """Wilder running sum, first value is the plain sum of n inputs."""
    out = np.full(values.size, np.nan)
    if values.size < n:
        return out
    decay = 1.0 - 1.0 / n
    a = [1.0, -decay]
    first = float(np.sum(values[:n]))
    out[n - 1] = first
    if values.size > n:
        out[n:], _ = lfilter([1.0], a, values[n:], zi=lfiltic([1.0], a, [first]))
    return out


def adx(
    highs: Sequence[float],
    lows: Sequence[float],
    closes: Sequence[float],
    n: int,
) -> np.ndarray:
    """
    Average Directional Index with Wilder smoothing.

    Directional movement and true range start at bar 1. DX is defined from
    bar n and ADX, seeded with the mean of the first n DX values, from bar
    2n - 1.
    """
    _check_period(n)
    h, l, c = _series(highs), _series(lows), _series(closes)
    length = c.size
    if length < 2 * n:
        return np.full(length, np.nan)
    true_range = np.maximum.reduce(
        [h[1:] - l[1:], np.abs(h[1:] - c[:-1]), np.abs(l[1:] - c[:-1])]
    )
    up = h[1:] - h[:-1]
    down = l[:-1] - l[1:]
    plus_dm = np.where((up > down) & (up > 0.0), up, 0.0)
    minus_dm = np.where((down > up) & (down > 0.0), down, 0.0)

    smoothed_range = _wilder_sum(true_range, n)
    with np.errstate(divide="ignore", invalid="ignore"):
        plus_di = np.where(
            smoothed_range > 0.0, 100.0 * _wilder_sum(plus_dm, n) / smoothed_range, 0.0
        )
        minus_di = np.where(
            smoothed_range > 0.0, 100.0 * _wilder_sum(minus_dm, n) / smoothed_range, 0.0
        )
        total = plus_di + minus_di
        dx = np.where(total > 0.0, 100.0 * np.abs(plus_di - minus_di) / total, 0.0)
    # dx[j] belongs to bar j + 1 and is defined from j = n - 1
    dx = dx[n - 1:]

    out = np.full(length, np.nan)
    seed = float(np.mean(dx[:n]))
    out[2 * n - 1] = seed
    if dx.size > n:
        b, a = [1.0 / n], [1.0, -(1.0 - 1.0 / n)]
        out[2 * n:], _ = lfilter(b, a, dx[n:], zi=lfiltic(b, a, [seed]))
    return out


def bollinger(closes: Sequence[float], n: int, k: float = 2.0) -> BollingerBands:
    """SMA plus and minus k population standard deviations over n bars."""
    _check_period(n)
    if not k > 0:
        raise ConfigError(f"Bollinger width must be positive: {k}")
    rolling = pd.Series(_series(closes)).rolling(n)
    middle = rolling.mean().to_numpy()
    spread = k * rolling.std(ddof=0).to_numpy()
    return BollingerBands(middle + spread, middle - spread)


def aroon(closes: Sequence[float], n: int) -> Aroon:
    """
    Aroon oscillators over the last n + 1 bars.

    Values are 100 (n - k) / n where k counts bars since the most recent
    lowest (down) or highest (up) close.
    """
    _check_period(n)
    c = _series(closes)
    if c.size <= n:
        empty = np.full(c.size, np.nan)
        return Aroon(empty, empty.copy())
    newest_first = sliding_window_view(c, n + 1)[:, ::-1]
    since_high = np.argmax(newest_first, axis=1)
    since_low = np.argmin(newest_first, axis=1)
    up = 100.0 * (n - since_high) / n
    down = 100.0 * (n - since_low) / n
    return Aroon(_place(c.size, n, down), _place(c.size, n, up))


def label_direction(closes: Sequence[float]) -> np.ndarray:
    """1 where the close rose from the previous bar, else 0; one shorter than input."""
    c = _series(closes)
    return (c[1:] > c[:-1]).astype(np.int8)
