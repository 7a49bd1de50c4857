"""Real-time vintage matrices and the inflation information sets built from them.

Input layout: one CSV per economy, observation dates down the first column,
one column per vintage, empty or ``NA`` cells for observations a vintage does
not contain.  Dates may be written as ``2019-Q1``, ``2019Q1``, ``2019:Q1``,
``2019-01`` or ``2019-01-15``; vintage headers additionally accept
ALFRED-style names such as ``CPIAUCSL_20190426``.  Monthly observation rows
are averaged to quarters, and several vintages released in the same quarter
collapse to the last of them.
"""
from __future__ import annotations

import csv
import re
import warnings
from dataclasses import dataclass

import numpy as np
import pandas as pd

from .errors import CoverageError, DomainError, InputError, ParseError

MISSING = {"", "NA", "N/A", "NAN", "#N/A", "."}

_QUARTER = re.compile(r"^(\d{4})\s*[-:]?\s*Q([1-4])$", re.IGNORECASE)
_MONTH = re.compile(r"^(\d{4})[-/](\d{1,2})(?:[-/](\d{1,2}))?$")
_COMPACT = re.compile(r"(\d{4})(\d{2})(\d{2})$")


def _parse_date(text: str, allow_compact: bool = False):
    """Return ("Q", Period) or ("M", Period); None if the text is not a date."""
    s = text.strip()
    m = _QUARTER.match(s)
    if m:
        return "Q", pd.Period(year=int(m.group(1)), quarter=int(m.group(2)), freq="Q")
    m = _MONTH.match(s)
    if m:
        year, month = int(m.group(1)), int(m.group(2))
        if 1 <= month <= 12:
            return "M", pd.Period(year=year, month=month, freq="M")
        return None
    if allow_compact:
        m = _COMPACT.search(s)
        if m and 1 <= int(m.group(2)) <= 12:
            return "M", pd.Period(year=int(m.group(1)), month=int(m.group(2)), freq="M")
    return None


@dataclass(frozen=True)
class VintageSet:
    """Vintage matrix: ``values[i, j]`` is observation ``i`` as published in vintage ``j``.

    Attributes
    ----------
    observations : pandas.PeriodIndex
        Quarterly observation dates, strictly increasing.
    vintages : pandas.PeriodIndex
        Quarterly vintage dates, strictly increasing.
    values : ndarray
        (n_obs, n_vintages) with NaN where a vintage has no value.
    """

    observations: pd.PeriodIndex
    vintages: pd.PeriodIndex
    values: np.ndarray

    def __post_init__(self):
        vals = np.asarray(self.values, dtype=float)
        vals.setflags(write=False)
        object.__setattr__(self, "values", vals)
        if vals.shape != (len(self.observations), len(self.vintages)):
            raise InputError("value matrix does not match the date axes")
        if not self.observations.is_monotonic_increasing or not self.observations.is_unique:
            raise InputError("observation dates must be strictly increasing")
        if not self.vintages.is_monotonic_increasing or not self.vintages.is_unique:
            raise InputError("vintage dates must be strictly increasing")
        _check_structure(vals)

    @property
    def shape(self):
        return self.values.shape

    def coverage(self) -> pd.DataFrame:
        """First and last observation date per vintage."""
        rows = []
        for j, v in enumerate(self.vintages):
            idx = np.flatnonzero(~np.isnan(self.values[:, j]))
            rows.append({"vintage": str(v),
                         "first": str(self.observations[idx[0]]) if idx.size else None,
                         "last": str(self.observations[idx[-1]]) if idx.size else None,
                         "n_obs": int(idx.size)})
        return pd.DataFrame(rows)

    def vintage_series(self, j: int) -> pd.Series:
        col = self.values[:, j]
        keep = ~np.isnan(col)
        return pd.Series(col[keep], index=self.observations[keep], name=str(self.vintages[j]))


def _check_structure(values, lines=None):
    # contiguous non-missing block per vintage, nested coverage across vintages
    prev = None
    for j in range(values.shape[1]):
        idx = np.flatnonzero(~np.isnan(values[:, j]))
        if idx.size == 0:
            raise ParseError(f"vintage column {j + 1} is empty", row=None, col=j + 2)
        if idx[-1] - idx[0] + 1 != idx.size:
            gap = int(idx[np.flatnonzero(np.diff(idx) > 1)[0]] + 1)
            row = int(lines[gap]) if lines is not None else None
            raise ParseError("interior missing value in a vintage", row=row, col=j + 2)
        if prev is not None and (idx[0] > prev[0] or idx[-1] < prev[1]):
            raise ParseError("vintage drops observations contained in an earlier vintage",
                             row=None, col=j + 2)
        prev = (idx[0], idx[-1])


def monthly_to_quarterly(series: pd.Series) -> pd.Series:
    """Average complete quarters of a monthly series; partial quarters are dropped with a warning."""
    if not isinstance(series.index, pd.PeriodIndex):
        raise InputError("monthly series needs a PeriodIndex")
    s = series.dropna()
    if s.empty:
        return pd.Series(dtype=float, index=pd.PeriodIndex([], freq="Q"), name=series.name)
    months = s.index.asfreq("M")
    quarters = months.asfreq("Q")
    grouped = pd.Series(s.to_numpy(dtype=float), index=months).groupby(quarters)
    counts = grouped.count()
    means = grouped.mean()
    partial = counts.index[counts < 3]
    if len(partial):
        warnings.warn(f"dropping incomplete quarter(s): {', '.join(map(str, partial))}", stacklevel=2)
    out = means[counts == 3]
    out.index = pd.PeriodIndex(out.index, freq="Q")
    out.name = series.name
    return out


def to_inflation(prices) -> pd.Series:
    """pi_t = 400 log(p_t / p_{t-1}); the first date is lost."""
    p = prices if isinstance(prices, pd.Series) else pd.Series(np.asarray(prices, dtype=float))
    arr = p.to_numpy(dtype=float)
    if arr.size < 2:
        raise InputError("need at least two prices")
    if not np.all(np.isfinite(arr)):
        raise InputError("prices contain missing or non-finite values")
    if np.any(arr <= 0):
        raise DomainError("prices must be strictly positive")
    pi = 400.0 * np.diff(np.log(arr))
    return pd.Series(pi, index=p.index[1:], name="inflation")


def _read_rows(path):
    with open(path, newline="", encoding="utf-8-sig") as fh:
        rows = [(n, r) for n, r in enumerate(csv.reader(fh), start=1) if any(c.strip() for c in r)]
    if len(rows) < 2:
        raise ParseError("file needs a header row and at least one observation row", row=1, col=None)
    return rows


def parse_vintage_csv(path) -> VintageSet:
    """Read a wide vintage matrix; see the module docstring for the layout.

    Raises
    ------
    ParseError
        Ragged rows, unreadable dates or numbers, non-increasing dates, or a
        violation of the nested-coverage structure.  Row and column numbers
        are 1-based file positions.
    """
    rows = _read_rows(path)
    header_line, header = rows[0]
    width = len(header)
    if width < 2:
        raise ParseError("no vintage columns in header", row=header_line, col=None)

    vint = []
    for c, cell in enumerate(header[1:], start=2):
        parsed = _parse_date(cell, allow_compact=True)
        if parsed is None:
            raise ParseError(f"unreadable vintage date {cell!r}", row=header_line, col=c)
        vint.append(parsed[1].asfreq("Q"))
    for c in range(1, len(vint)):
        if vint[c] < vint[c - 1]:
            raise ParseError("vintage dates are not increasing", row=header_line, col=c + 2)

    kinds, obs, data, lines = set(), [], [], []
    for r, row in rows[1:]:
        if len(row) != width:
            raise ParseError(f"row has {len(row)} fields, header has {width}", row=r, col=min(len(row), width) + 1)
        parsed = _parse_date(row[0])
        if parsed is None:
            raise ParseError(f"unreadable observation date {row[0]!r}", row=r, col=1)
        kinds.add(parsed[0])
        if len(kinds) > 1:
            raise ParseError("mixed monthly and quarterly observation dates", row=r, col=1)
        if obs and parsed[1] <= obs[-1]:
            raise ParseError("observation dates are not strictly increasing", row=r, col=1)
        obs.append(parsed[1])
        lines.append(r)
        vals = []
        for c, cell in enumerate(row[1:], start=2):
            text = cell.strip()
            if text.upper() in MISSING:
                vals.append(np.nan)
                continue
            try:
                vals.append(float(text))
            except ValueError:
                raise ParseError(f"unreadable number {cell!r}", row=r, col=c) from None
        data.append(vals)

    values = np.array(data, dtype=float)
    obs_index = pd.PeriodIndex(obs)
    if kinds == {"M"}:
        with warnings.catch_warnings(record=True) as caught:
            warnings.simplefilter("always")
            cols = [monthly_to_quarterly(pd.Series(values[:, j], index=obs_index)) for j in range(values.shape[1])]
        if caught:
            warnings.warn(f"{len(caught)} vintage(s) end in an incomplete quarter; it was dropped", stacklevel=2)
        frame = pd.concat(cols, axis=1)
        obs_index = pd.PeriodIndex(frame.index, freq="Q")
        values = frame.to_numpy(dtype=float)
    else:
        _check_structure(values, lines=lines)

    # several releases within one quarter: keep the last
    vint_index = pd.PeriodIndex(vint, freq="Q")
    last = ~vint_index.duplicated(keep="last")
    if not last.all():
        warnings.warn("several vintages share a quarter; keeping the last of each", stacklevel=2)
    return VintageSet(observations=obs_index, vintages=vint_index[last], values=values[:, last])


def as_quarter(date) -> pd.Period:
    if isinstance(date, pd.Period):
        return date.asfreq("Q")
    parsed = _parse_date(str(date), allow_compact=True)
    if parsed is None:
        raise InputError(f"unreadable date {date!r}")
    return parsed[1].asfreq("Q")


def information_set(vs: VintageSet, origin, start=None) -> pd.Series:
    """Inflation from the latest vintage dated at or before ``origin``.

    ``start`` optionally drops observations before a sample start date.
    """
    q = as_quarter(origin)
    pos = int(np.searchsorted(vs.vintages.asi8, q.ordinal, side="right")) - 1
    if pos < 0:
        raise CoverageError(f"no vintage available at or before {q}")
    prices = vs.vintage_series(pos)
    if start is not None:
        prices = prices[prices.index >= as_quarter(start)]
    return to_inflation(prices)


def realized_value(vs: VintageSet, target) -> float:
    """Inflation at ``target`` as recorded in the final vintage."""
    q = as_quarter(target)
    prices = vs.vintage_series(len(vs.vintages) - 1)
    if q not in prices.index or (q - 1) not in prices.index:
        raise CoverageError(f"final vintage does not cover {q}")
    return float(400.0 * np.log(prices[q] / prices[q - 1]))


def write_vintage_csv(vs: VintageSet, path) -> None:
    """Write ``vs`` in the layout read by :func:`parse_vintage_csv`."""
    frame = pd.DataFrame(vs.values, index=[str(o).replace("Q", "-Q") for o in vs.observations],
                         columns=[str(v).replace("Q", "-Q") for v in vs.vintages])
    frame.index.name = "date"
    frame.to_csv(path, na_rep="")
