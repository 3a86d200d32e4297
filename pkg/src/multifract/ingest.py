"""Price data loading and return-series derivation."""

import csv
import logging
import math
from dataclasses import dataclass
from datetime import date, datetime

import numpy as np

from .errors import (
    DegenerateSeries,
    MalformedRow,
    NonMonotoneDates,
    NonPositivePrice,
    SeriesTooShort,
)

log = logging.getLogger(__name__)

_DATE_FORMATS = ("%Y-%m-%d", "%d/%m/%Y")


@dataclass(frozen=True)
class PriceSeries:
    """Daily index prices with strictly increasing dates."""

    dates: tuple
    values: np.ndarray
    label: str = ""

    def __post_init__(self):
        values = np.asarray(self.values, dtype=float)
        object.__setattr__(self, "values", values)
        if len(values) < 2:
            raise SeriesTooShort("need at least 2 prices")
        if len(self.dates) != len(values):
            raise ValueError("dates and values must have equal length")
        if not np.all(values > 0):
            raise ValueError("prices must be strictly positive")
        for a, b in zip(self.dates, self.dates[1:]):
            if b <= a:
                raise ValueError("dates must be strictly increasing")

    def __len__(self):
        return len(self.values)


@dataclass(frozen=True)
class ReturnSeries:
    """Log returns derived from a PriceSeries."""

    values: np.ndarray
    label: str = ""
    source_length: int = 0

    def __post_init__(self):
        values = np.asarray(self.values, dtype=float)
        object.__setattr__(self, "values", values)
        if self.source_length and len(values) != self.source_length - 1:
            raise ValueError("length must equal source_length - 1")
        if not np.all(np.isfinite(values)):
            raise ValueError("returns must be finite")

    def __len__(self):
        return len(self.values)


def _parse_date(text):
    for fmt in _DATE_FORMATS:
        try:
            return datetime.strptime(text, fmt).date()
        except ValueError:
            continue
    return None


def _parse_price(text):
    cleaned = text.strip().replace(",", "").replace(" ", "")
    try:
        value = float(cleaned)
    except ValueError:
        return None
    return value if math.isfinite(value) else None


def _detect_delimiter(sample):
    try:
        return csv.Sniffer().sniff(sample, delimiters=",;\t").delimiter
    except csv.Error:
        return ","


def load_price_csv(path, date_col, value_col, label=None):
    """Load a delimiter-separated price file into a PriceSeries.

    Blank rows and rows with empty cells are skipped with a warning
    (holiday gaps in real exports). Unparseable or non-positive prices
    and out-of-order dates raise with the offending 1-based line number.
    """
    with open(path, newline="", encoding="utf-8-sig") as fh:
        sample = fh.read(4096)
        fh.seek(0)
        reader = csv.DictReader(fh, delimiter=_detect_delimiter(sample))
        if reader.fieldnames is None:
            raise MalformedRow(1, "missing header row")
        for col in (date_col, value_col):
            if col not in reader.fieldnames:
                raise MalformedRow(1, f"missing column {col!r}")

        dates, values = [], []
        for row in reader:
            lineno = reader.line_num
            raw_date = (row.get(date_col) or "").strip()
            raw_value = (row.get(value_col) or "").strip()
            if not raw_date and not raw_value:
                log.warning("%s: skipping blank row at line %d", path, lineno)
                continue
            if not raw_date or not raw_value:
                log.warning("%s: skipping incomplete row at line %d", path, lineno)
                continue
            parsed_date = _parse_date(raw_date)
            if parsed_date is None:
                raise MalformedRow(lineno, f"bad date {raw_date!r}")
            price = _parse_price(raw_value)
            if price is None:
                raise MalformedRow(lineno, f"bad price {raw_value!r}")
            if price <= 0:
                raise NonPositivePrice(lineno)
            if dates and parsed_date <= dates[-1]:
                raise NonMonotoneDates(lineno)
            dates.append(parsed_date)
            values.append(price)

    if len(values) < 2:
        raise SeriesTooShort(f"{path}: only {len(values)} usable rows")
    return PriceSeries(tuple(dates), np.array(values), label or str(path))


def log_returns(prices):
    """r[t] = ln P[t+1] - ln P[t]."""
    if len(prices) < 2:
        raise SeriesTooShort("need at least 2 prices for returns")
    values = np.diff(np.log(prices.values))
    return ReturnSeries(values, prices.label, source_length=len(prices))


def display_transform(returns):
    """Rescale returns onto [10, 90] for plotting: 40*r/max|r| + 50."""
    values = np.asarray(returns.values, dtype=float)
    if len(values) == 0:
        raise SeriesTooShort("empty return series")
    peak = np.max(np.abs(values))
    if peak == 0:
        raise DegenerateSeries("all returns are zero")
    return 40.0 * values / peak + 50.0
