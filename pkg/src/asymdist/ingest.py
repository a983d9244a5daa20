"""Quote-file ingestion and log-return series construction.

Input files are CSV with header ``date,adj_close`` and ISO dates.  The
output series has one slot per calendar day between the first and last
quote; a slot holds ln(next close / close) when both days are quoted
and is missing otherwise, so weekend and holiday gaps appear as missing
steps rather than being skipped.
"""

from __future__ import annotations

import csv
import datetime as dt
import math
from dataclasses import dataclass
from typing import List, Optional, Tuple

import numpy as np

from .hmm import ObservationSeries


class QuoteParseError(ValueError):
    """Malformed quote file; message carries the offending line number."""


@dataclass(frozen=True)
class QuoteSeries:
    """Date-ordered daily closes, strictly increasing dates, prices > 0."""

    entries: Tuple[Tuple[dt.date, float], ...]

    def __post_init__(self) -> None:
        for date, price in self.entries:
            if price <= 0.0 or not math.isfinite(price):
                raise ValueError(f"non-positive price {price!r} on {date}")
        dates = [d for d, _ in self.entries]
        if any(b <= a for a, b in zip(dates, dates[1:])):
            raise ValueError("dates must be strictly increasing")

    def __len__(self) -> int:
        return len(self.entries)


def load_quotes_csv(path: str) -> QuoteSeries:
    rows: List[Tuple[dt.date, float]] = []
    with open(path, newline="") as fh:
        reader = csv.reader(fh)
        header = next(reader, None)
        if header is None or [h.strip() for h in header] != ["date", "adj_close"]:
            raise QuoteParseError(f"{path}: expected header 'date,adj_close'")
        for lineno, row in enumerate(reader, start=2):
            if not row or (len(row) == 1 and not row[0].strip()):
                continue
            if len(row) != 2:
                raise QuoteParseError(f"{path}:{lineno}: expected two fields, got {len(row)}")
            try:
                date = dt.date.fromisoformat(row[0].strip())
            except ValueError as exc:
                raise QuoteParseError(f"{path}:{lineno}: bad date {row[0]!r}") from exc
            try:
                price = float(row[1])
            except ValueError as exc:
                raise QuoteParseError(f"{path}:{lineno}: bad price {row[1]!r}") from exc
            if price <= 0.0:
                raise ValueError(f"{path}:{lineno}: price must be positive, got {price!r}")
            rows.append((date, price))
    rows.sort(key=lambda item: item[0])
    for (a, _), (b, _) in zip(rows, rows[1:]):
        if a == b:
            raise ValueError(f"{path}: duplicate date {a}")
    return QuoteSeries(entries=tuple(rows))


def log_roi_series(quotes: QuoteSeries) -> ObservationSeries:
    """One slot per calendar day from first to last quote date.

    Slot i covers the day pair (first+i, first+i+1) and holds the log
    return when both days are quoted.
    """
    if len(quotes) < 2:
        raise ValueError("need at least two quotes")
    by_date = dict(quotes.entries)
    first = quotes.entries[0][0]
    last = quotes.entries[-1][0]
    n_slots = (last - first).days
    values = np.full(n_slots, math.nan)
    for i in range(n_slots):
        day = first + dt.timedelta(days=i)
        nxt = day + dt.timedelta(days=1)
        if day in by_date and nxt in by_date:
            values[i] = math.log(by_date[nxt] / by_date[day])
    return ObservationSeries(values=values)


def roi_dates(quotes: QuoteSeries) -> List[dt.date]:
    """Calendar day for each slot produced by :func:`log_roi_series`."""
    first = quotes.entries[0][0]
    last = quotes.entries[-1][0]
    return [first + dt.timedelta(days=i) for i in range((last - first).days)]


def write_observation_csv(path: str, quotes: QuoteSeries, obs: ObservationSeries) -> None:
    """Emit ``date,log_roi`` rows with an empty field for missing slots."""
    with open(path, "w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(["date", "log_roi"])
        for date, value in zip(roi_dates(quotes), obs.values):
            writer.writerow([date.isoformat(), "" if math.isnan(value) else repr(value)])


def synthetic_quotes(
    start: dt.date,
    n_days: int,
    rng: np.random.Generator,
    start_price: float = 100.0,
    drift: float = 2e-4,
    volatility: float = 0.01,
) -> QuoteSeries:
    """Geometric random-walk quotes on weekdays only, for tests and demos."""
    entries = []
    price = start_price
    for i in range(n_days):
        day = start + dt.timedelta(days=i)
        if day.weekday() >= 5:
            continue
        price *= math.exp(drift + volatility * rng.standard_normal())
        entries.append((day, price))
    return QuoteSeries(entries=tuple(entries))


def write_quotes_csv(path: str, quotes: QuoteSeries) -> None:
    with open(path, "w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(["date", "adj_close"])
        for date, price in quotes.entries:
            writer.writerow([date.isoformat(), repr(price)])
