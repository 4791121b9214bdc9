"""
Loading and validation of market bar files.
"""
import logging
from dataclasses import dataclass
from pathlib import Path
from typing import Optional

import numpy as np
import pandas as pd

from .errors import BarFileError, ConfigError

logger = logging.getLogger(__name__)

PRICE_COLUMNS = ("open", "high", "low", "close")
BAR_COLUMNS = ("timestamp", *PRICE_COLUMNS)
MISSING_VOLUME = ("", "na", "nan", "null")


@dataclass(frozen=True, eq=False)
class BarFile:
    """Validated bars from one file, oldest first."""
    source: Path
    frame: pd.DataFrame

    def __len__(self) -> int:
        return len(self.frame)

    @property
    def closes(self) -> np.ndarray:
        """Close prices."""
        return self.frame["close"].to_numpy(dtype=float)

    @property
    def log_returns(self) -> np.ndarray:
        """ln(C_t / C_(t-1)), one shorter than the bars."""
        closes = self.closes
        return np.log(closes[1:] / closes[:-1])


def _first_row(mask: np.ndarray) -> Optional[int]:
    """1-based data row of the first True entry."""
    hits = np.flatnonzero(mask)
    return int(hits[0]) + 1 if hits.size else None


def load_bars(path: Path | str, take: Optional[int] = None) -> BarFile:
    """
    Load bars with a header of timestamp, open, high, low, close[, volume].

    Rows are numbered from 1 after the header.

    Args:
        path: CSV file
        take: Keep only the first ``take`` bars

    Returns:
        BarFile of the validated bars

    Raises:
        ConfigError: If take is less than 1
        BarFileError: If the file is missing or a row is malformed, out of
            order or inconsistent
    """
    path = Path(path)
    if take is not None and take < 1:
        raise ConfigError(f"take must be >= 1: {take}")
    if not path.exists():
        raise BarFileError(f"File not found: {path}")
    if not path.is_file():
        raise BarFileError(f"Not a file: {path}")

    try:
        raw = pd.read_csv(path, dtype=str, keep_default_na=False, skipinitialspace=True)
    except (ValueError, pd.errors.ParserError, UnicodeDecodeError) as e:
        raise BarFileError(f"Failed to parse {path}: {e}") from e
    raw.columns = [str(column).strip().lower() for column in raw.columns]
    missing = [column for column in BAR_COLUMNS if column not in raw.columns]
    if missing:
        raise BarFileError(f"Missing column(s) {missing} in {path}")
    if take is not None:
        raw = raw.iloc[:take]

    timestamps = pd.to_datetime(raw["timestamp"], format="ISO8601", utc=True, errors="coerce")
    row = _first_row(timestamps.isna().to_numpy())
    if row is not None:
        raise BarFileError(f"Malformed timestamp '{raw['timestamp'].iloc[row - 1]}'", row)

    prices = raw.loc[:, list(PRICE_COLUMNS)].apply(pd.to_numeric, errors="coerce")
    row = _first_row(~np.isfinite(prices.to_numpy(dtype=float)).all(axis=1))
    if row is not None:
        raise BarFileError("Malformed price", row)
    row = _first_row((prices.to_numpy() <= 0.0).any(axis=1))
    if row is not None:
        raise BarFileError("Prices must be positive", row)

    o, h, l, c = (prices[column].to_numpy() for column in PRICE_COLUMNS)
    inconsistent = (l > np.minimum(o, c)) | (np.maximum(o, c) > h)
    row = _first_row(inconsistent)
    if row is not None:
        raise BarFileError("Inconsistent bar: need low <= open, close <= high", row)

    row = _first_row((timestamps.diff() <= pd.Timedelta(0)).to_numpy())
    if row is not None:
        raise BarFileError("Timestamps must be strictly increasing", row)

    frame = pd.DataFrame({"timestamp": timestamps, **{k: prices[k] for k in PRICE_COLUMNS}})
    if "volume" in raw.columns:
        cells = raw["volume"].str.strip()
        absent = cells.str.lower().isin(MISSING_VOLUME)
        volume = pd.to_numeric(cells.mask(absent), errors="coerce")
        row = _first_row((volume.isna() & ~absent).to_numpy())
        if row is not None:
            raise BarFileError("Malformed volume", row)
        row = _first_row((volume < 0).to_numpy())
        if row is not None:
            raise BarFileError("Volume must be non-negative", row)
        frame["volume"] = volume
    frame = frame.reset_index(drop=True)
    logger.info("Loaded %d bars from %s", len(frame), path)
    return BarFile(path, frame)
