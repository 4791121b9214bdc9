"""
Price reconstruction and the per-instance indicator feature table.
"""
import logging
import math
from dataclasses import dataclass, fields
from typing import Callable, Dict, Iterator, NamedTuple, Optional, Sequence

import numpy as np
import pandas as pd

from . import indicators
from .errors import ConfigError, DegenerateInputError, IndicatorError

logger = logging.getLogger(__name__)

DEFAULT_INITIAL_PRICE = 250.0

FEATURE_COLUMNS = (
    "rsi10",
    "willr10",
    "macd",
    "cci10",
    "mom10",
    "sk",
    "sd",
    "sma5",
    "sma10",
    "wma10",
    "ema10",
    "trima10",
    "adx10",
    "boll_upper",
    "boll_lower",
    "roc10",
    "aroon_down",
    "aroon_up",
)
FEATURE_FILE_COLUMNS = ("index", *FEATURE_COLUMNS, "label")


class FeatureRow(NamedTuple):
    """One row of the feature table."""
    index: int
    rsi10: float
    willr10: float
    macd: float
    cci10: float
    mom10: float
    sk: float
    sd: float
    sma5: float
    sma10: float
    wma10: float
    ema10: float
    trima10: float
    adx10: float
    boll_upper: float
    boll_lower: float
    roc10: float
    aroon_down: float
    aroon_up: float
    label: int


@dataclass(frozen=True)
class IndicatorConfig:
    """
    Indicator periods.

    Column names stay fixed when periods are overridden.
    """
    rsi_period: int = 10
    williams_period: int = 10
    macd_fast: int = 12
    macd_slow: int = 26
    macd_signal: int = 9
    cci_period: int = 10
    momentum_period: int = 10
    roc_period: int = 10
    stochastic_period: int = 10
    stochastic_smoothing: int = 10
    sma_short_period: int = 5
    sma_period: int = 10
    wma_period: int = 10
    ema_period: int = 10
    trima_period: int = 10
    adx_period: int = 10
    bollinger_period: int = 20
    bollinger_width: float = 2.0
    aroon_period: int = 10

    def __post_init__(self) -> None:
        for item in fields(self):
            value = getattr(self, item.name)
            if item.name == "bollinger_width":
                if not (math.isfinite(value) and value > 0):
                    raise ConfigError(f"bollinger_width must be positive: {value}")
            elif isinstance(value, bool) or int(value) != value or value < 1:
                raise ConfigError(f"{item.name} must be a positive integer: {value}")
        if self.macd_fast >= self.macd_slow:
            raise ConfigError(
                f"macd_fast ({self.macd_fast}) must be below macd_slow ({self.macd_slow})"
            )

    def warmup_by_column(self) -> Dict[str, int]:
        """First defined instance of each feature column."""
        trima_half = math.ceil((self.trima_period + 1) / 2)
        return {
            "rsi10": self.rsi_period,
            "willr10": self.williams_period - 1,
            "macd": self.macd_slow + self.macd_signal,
            "cci10": self.cci_period - 1,
            "mom10": self.momentum_period,
            "sk": self.stochastic_period - 1,
            "sd": self.stochastic_period + self.stochastic_smoothing - 2,
            "sma5": self.sma_short_period - 1,
            "sma10": self.sma_period - 1,
            "wma10": self.wma_period - 1,
            "ema10": self.ema_period,
            "trima10": 2 * (trima_half - 1),
            "adx10": 2 * self.adx_period - 1,
            "boll_upper": self.bollinger_period - 1,
            "boll_lower": self.bollinger_period - 1,
            "roc10": self.roc_period,
            "aroon_down": self.aroon_period,
            "aroon_up": self.aroon_period,
        }

    @property
    def warmup(self) -> int:
        """Rows dropped from the head of the feature table."""
        return max(max(self.warmup_by_column().values()), 1)


@dataclass(frozen=True, eq=False)
class OhlcBars:
    """Bars rebuilt from a close series: open is the previous close."""
    open: np.ndarray
    high: np.ndarray
    low: np.ndarray
    close: np.ndarray

    def __len__(self) -> int:
        return int(self.close.shape[0])


def reconstruct_prices(
    returns: Sequence[float], initial_price: float = DEFAULT_INITIAL_PRICE
) -> np.ndarray:
    """
    Compound log-returns into closes, C_t = P0 * exp(r_0 + ... + r_t).

    Args:
        returns: Log-returns
        initial_price: Price before the first return

    Returns:
        Close prices, one per return

    Raises:
        ConfigError: If the initial price is not positive
        DegenerateInputError: If a return is not finite or a price overflows
    """
    if not (math.isfinite(initial_price) and initial_price > 0):
        raise ConfigError(f"Initial price must be positive: {initial_price}")
    r = np.asarray(returns, dtype=float)
    bad = np.flatnonzero(~np.isfinite(r))
    if bad.size:
        raise DegenerateInputError(f"Non-finite return at index {int(bad[0])}")
    with np.errstate(over="ignore"):
        closes = initial_price * np.exp(np.cumsum(r))
    bad = np.flatnonzero(~np.isfinite(closes) | (closes <= 0.0))
    if bad.size:
        raise DegenerateInputError(f"Price out of range at index {int(bad[0])}")
    return closes


def to_ohlc(closes: np.ndarray, initial_price: float = DEFAULT_INITIAL_PRICE) -> OhlcBars:
    """Bars with high = low = close and open = previous close."""
    close = np.asarray(closes, dtype=float)
    opens = np.concatenate(([initial_price], close[:-1]))
    return OhlcBars(opens, close.copy(), close.copy(), close)


def compute_indicators(
    bars: OhlcBars, config: IndicatorConfig = IndicatorConfig()
) -> Dict[str, np.ndarray]:
    """
    Every feature column over the full bar series, NaN over warm-up.

    Raises:
        IndicatorError: Naming the column that failed
    """
    c, h, l = bars.close, bars.high, bars.low
    cache: Dict[str, object] = {}

    def shared(key: str, build: Callable[[], object]) -> object:
        if key not in cache:
            cache[key] = build()
        return cache[key]

    def stoch() -> indicators.Stochastics:
        return shared(  # type: ignore[return-value]
            "stoch",
            lambda: indicators.stochastic(
                c, config.stochastic_period, config.stochastic_smoothing
            ),
        )

    def bands() -> indicators.BollingerBands:
        return shared(  # type: ignore[return-value]
            "bands",
            lambda: indicators.bollinger(
                c, config.bollinger_period, config.bollinger_width
            ),
        )

    def oscillators() -> indicators.Aroon:
        return shared(  # type: ignore[return-value]
            "aroon", lambda: indicators.aroon(c, config.aroon_period)
        )

    builders: Dict[str, Callable[[], np.ndarray]] = {
        "rsi10": lambda: indicators.rsi(c, config.rsi_period),
        "willr10": lambda: indicators.williams_r(c, config.williams_period),
        "macd": lambda: indicators.macd(
            c, config.macd_fast, config.macd_slow, config.macd_signal
        ),
        "cci10": lambda: indicators.cci(h, l, c, config.cci_period),
        "mom10": lambda: indicators.momentum(
            indicators.Momentum.MOM, c, config.momentum_period
        ),
        "sk": lambda: stoch().k,
        "sd": lambda: stoch().d,
        "sma5": lambda: indicators.sma(c, config.sma_short_period),
        "sma10": lambda: indicators.sma(c, config.sma_period),
        "wma10": lambda: indicators.wma(c, config.wma_period),
        "ema10": lambda: indicators.ema(c, config.ema_period),
        "trima10": lambda: indicators.trima(c, config.trima_period),
        "adx10": lambda: indicators.adx(h, l, c, config.adx_period),
        "boll_upper": lambda: bands().upper,
        "boll_lower": lambda: bands().lower,
        "roc10": lambda: indicators.momentum(
            indicators.Momentum.ROC, c, config.roc_period
        ),
        "aroon_down": lambda: oscillators().down,
        "aroon_up": lambda: oscillators().up,
    }
    columns: Dict[str, np.ndarray] = {}
    for name in FEATURE_COLUMNS:
        try:
            columns[name] = builders[name]()
        except (ValueError, FloatingPointError) as e:
            raise IndicatorError(name, str(e)) from e
    return columns


def featurize(
    returns: Sequence[float],
    initial_price: float = DEFAULT_INITIAL_PRICE,
    config: IndicatorConfig = IndicatorConfig(),
    index: Optional[Sequence[int]] = None,
) -> pd.DataFrame:
    """
    Build the feature table of a return stream.

    Rows before the longest indicator warm-up are dropped, so an input of n
    returns yields n - warmup rows.

    Args:
        returns: Simulated log-returns
        initial_price: Price before the first return
        config: Indicator periods
        index: Stream instance of each return, defaults to 0..n-1

    Returns:
        DataFrame with columns index, the feature columns and label

    Raises:
        ConfigError: If the stream is not longer than the warm-up
        IndicatorError: If a retained row holds an undefined value
    """
    closes = reconstruct_prices(returns, initial_price)
    n = closes.size
    warmup = config.warmup
    if n <= warmup:
        raise ConfigError(f"Stream of {n} returns is not longer than the warm-up {warmup}")
    positions = np.arange(n, dtype=np.int64) if index is None else np.asarray(index)
    if positions.shape != (n,):
        raise ConfigError("Index must have one entry per return")

    bars = to_ohlc(closes, initial_price)
    columns = compute_indicators(bars, config)
    labels = (bars.close > bars.open).astype(np.int8)

    frame = pd.DataFrame({"index": positions.astype(np.int64), **columns, "label": labels})
    frame = frame.iloc[warmup:].reset_index(drop=True)
    for name in FEATURE_COLUMNS:
        undefined = np.flatnonzero(~np.isfinite(frame[name].to_numpy()))
        if undefined.size:
            raise IndicatorError(
                name, f"undefined at instance {int(frame['index'].iloc[undefined[0]])}"
            )
    logger.debug("Featurized %d returns into %d rows", n, len(frame))
    return frame


def feature_rows(frame: pd.DataFrame) -> Iterator[FeatureRow]:
    """Iterate a feature table as typed rows."""
    for values in frame.loc[:, list(FEATURE_FILE_COLUMNS)].itertuples(index=False):
        yield FeatureRow(int(values[0]), *map(float, values[1:-1]), int(values[-1]))
