import warnings

import numpy as np
import pandas as pd
import pytest

from tvpsvm.errors import CoverageError, DomainError, InputError, ParseError
from tvpsvm.simulate import synthetic_vintages
from tvpsvm.vintages import (
    VintageSet,
    information_set,
    monthly_to_quarterly,
    parse_vintage_csv,
    realized_value,
    to_inflation,
    write_vintage_csv,
)


def _write(tmp_path, text, name="v.csv"):
    p = tmp_path / name
    p.write_text(text, encoding="utf-8")
    return p


TRIANGLE = """date,2000-Q2,2000-Q3,2000-Q4
2000-Q1,100,100,100
2000-Q2,,101,101.5
2000-Q3,,,102
"""


def test_two_by_one(tmp_path):
    vs = parse_vintage_csv(_write(tmp_path, "date,2000-Q3\n2000-Q1,100\n2000-Q2,101\n"))
    assert vs.shape == (2, 1)
    assert str(vs.observations[0]) == "2000Q1"


def test_revision_kept_per_vintage(tmp_path):
    vs = parse_vintage_csv(_write(tmp_path, """date,2000-Q3,2000-Q4,2001-Q1
2000-Q1,100,100,100
2000-Q2,101,101.5,101.5
2000-Q3,,102,102
2000-Q4,,,103
"""))
    assert vs.values[1, 0] == 101.0
    assert vs.values[1, 1] == 101.5


def test_alternative_date_spellings(tmp_path):
    vs = parse_vintage_csv(_write(tmp_path, "date,CPI_20000815,CPI_20001115\n2000Q1,1,1\n2000:Q2,2,2\n"))
    assert [str(v) for v in vs.vintages] == ["2000Q3", "2000Q4"]


@pytest.mark.parametrize("text,row,col", [
    ("date,2000-Q3\n2000-Q2,100\n2000-Q1,101\n", 3, 1),
    ("date,2000-Q3\n2000-Q1,100\n2000-Q2,101,7\n", 3, 3),
    ("date,2000-Q3\n2000-Q1,abc\n", 2, 2),
    ("date,2000-Q3\nspring,100\n", 2, 1),
    ("date,soon\n2000-Q1,100\n", 1, 2),
    ("date,2000-Q3\n2000-Q1,100\n2000-Q2,\n2000-Q3,102\n", 3, 2),
])
def test_parse_errors_locate_cell(tmp_path, text, row, col):
    with pytest.raises(ParseError) as info:
        parse_vintage_csv(_write(tmp_path, text))
    assert (info.value.row, info.value.col) == (row, col)


def test_monthly_examples():
    idx = pd.period_range("2000-01", periods=6, freq="M")
    out = monthly_to_quarterly(pd.Series([100, 101, 102, 103, 104, 105], index=idx))
    assert out.tolist() == [101.0, 104.0]
    assert monthly_to_quarterly(pd.Series([1.0, 2, 3], index=idx[:3])).tolist() == [2.0]
    with pytest.warns(UserWarning):
        out = monthly_to_quarterly(pd.Series([1.0, 2, 3, 4], index=pd.period_range("2000-01", periods=4, freq="M")))
    assert out.tolist() == [2.0]


def test_monthly_file_aggregates(tmp_path):
    lines = ["date,2000-05-10,2000-08-10"]
    for m in range(1, 8):
        a = f"{100 + m}" if m <= 4 else ""
        lines.append(f"2000-{m:02d},{a},{100 + m}")
    with warnings.catch_warnings(record=True):
        warnings.simplefilter("always")
        vs = parse_vintage_csv(_write(tmp_path, "\n".join(lines) + "\n"))
    assert [str(o) for o in vs.observations] == ["2000Q1", "2000Q2"]
    assert vs.values[0, 0] == pytest.approx(102.0)
    assert np.isnan(vs.values[1, 0]) and vs.values[1, 1] == pytest.approx(105.0)


def test_to_inflation_examples():
    assert to_inflation([100.0, 101.0]).iloc[0] == pytest.approx(3.98013, abs=5e-6)
    # 400 log(0.99) = -4.0201343..., i.e. -4.02013 to five decimals
    assert to_inflation([100.0, 99.0]).iloc[0] == pytest.approx(-4.0201343, abs=1e-7)
    assert np.all(to_inflation([5.0] * 6).to_numpy() == 0)
    with pytest.raises(DomainError):
        to_inflation([100.0, 0.0, 1.0])
    with pytest.raises(InputError):
        to_inflation([1.0])


def test_inflation_round_trip():
    p = 100 * np.exp(np.cumsum(np.random.default_rng(3).normal(0, 0.01, 200)))
    pi = to_inflation(p).to_numpy()
    rebuilt = p[0] * np.exp(np.concatenate([[0.0], np.cumsum(pi / 400)]))
    assert np.max(np.abs(rebuilt / p - 1)) < 1e-10


def test_information_set_rules(tmp_path):
    vs = parse_vintage_csv(_write(tmp_path, TRIANGLE))
    # the first vintage holds a single price, too short for an inflation rate
    with pytest.raises(InputError):
        information_set(vs, "2000-Q2")
    assert information_set(vs, "2000-Q3").tolist() == pytest.approx([400 * np.log(1.01)])
    # between vintages: monthly origin inside a quarter picks that quarter's vintage
    assert information_set(vs, "2000-11").tolist() == pytest.approx([400 * np.log(1.015), 400 * np.log(102 / 101.5)])
    with pytest.raises(CoverageError):
        information_set(vs, "2000-Q1")


def test_no_look_ahead():
    rng = np.random.default_rng(0)
    vs = synthetic_vintages(rng.normal(2, 1, 80), first_vintage=40, revision_sd=0.1, rng=rng)
    origin = vs.vintages[10]
    before = information_set(vs, origin)
    vals = np.array(vs.values)
    vals[:, 11:] *= 1.5
    mutated = VintageSet(vs.observations, vs.vintages, vals)
    pd.testing.assert_series_equal(before, information_set(mutated, origin))


def test_realized_value(tmp_path):
    vs = parse_vintage_csv(_write(tmp_path, TRIANGLE))
    assert realized_value(vs, "2000-Q2") == pytest.approx(400 * np.log(1.015))
    with pytest.raises(CoverageError):
        realized_value(vs, "2000-Q4")
    single = parse_vintage_csv(_write(tmp_path, "date,2000-Q3\n2000-Q1,100\n2000-Q2,101\n", "s.csv"))
    assert realized_value(single, "2000-Q2") == pytest.approx(3.98013, abs=5e-6)


def test_write_round_trip(tmp_path):
    rng = np.random.default_rng(1)
    vs = synthetic_vintages(rng.normal(2, 1, 60), first_vintage=30, revision_sd=0.05, rng=rng)
    path = tmp_path / "rt.csv"
    write_vintage_csv(vs, path)
    back = parse_vintage_csv(path)
    assert back.observations.equals(vs.observations) and back.vintages.equals(vs.vintages)
    np.testing.assert_array_equal(back.values, vs.values)


def test_vintage_set_is_read_only(tmp_path):
    vs = parse_vintage_csv(_write(tmp_path, TRIANGLE))
    with pytest.raises(ValueError):
        vs.values[0, 0] = 1.0
