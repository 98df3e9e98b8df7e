import warnings

import numpy as np
import pandas as pd
import pytest
from hypothesis import given, settings, strategies as st

from heatmilp.ingest import (HOURS_IN_YEAR, HourlyData, SeriesBundle, SynthShape, aggregate,
                             constant_bundle, load_hourly_csv, synthesize_dataset, synthesize_hourly)
from heatmilp.timegrid import build_time_grid, paper_grid, toy_grid


def _write(path, stamps, values):
    pd.DataFrame({"timestamp": stamps, "value": values}).to_csv(path, index=False)


def test_full_year_csv(tmp_path):
    stamps = pd.date_range("2022-01-01", periods=HOURS_IN_YEAR, freq="h")
    _write(tmp_path / "a.csv", stamps.strftime("%Y-%m-%d %H:%M:%S"), np.arange(HOURS_IN_YEAR))
    s = load_hourly_csv(tmp_path / "a.csv")
    assert len(s.values) == HOURS_IN_YEAR
    assert s.filled == []


def test_gap_filled_by_interpolation(tmp_path):
    stamps = pd.date_range("2022-01-01", periods=8, freq="h")
    keep = [0, 1, 5, 6, 7]  # three missing hours
    vals = np.array([0.0, 1.0, 5.0, 6.0, 7.0])
    _write(tmp_path / "g.csv", stamps[keep].strftime("%Y-%m-%dT%H:%M"), vals)
    with pytest.warns(UserWarning, match="3 missing"):
        s = load_hourly_csv(tmp_path / "g.csv", max_gap_fraction=0.5)
    np.testing.assert_allclose(s.values, np.arange(8.0))
    assert len(s.filled) == 3


def test_too_many_gaps(tmp_path):
    stamps = pd.date_range("2022-01-01", periods=100, freq="h")
    _write(tmp_path / "g.csv", stamps[::2].strftime("%Y-%m-%dT%H:%M"), np.ones(50))
    with pytest.raises(ValueError, match="missing"):
        load_hourly_csv(tmp_path / "g.csv")


def test_shuffled_timestamps_rejected(tmp_path):
    stamps = pd.date_range("2022-01-01", periods=5, freq="h")[[0, 2, 1, 3, 4]]
    _write(tmp_path / "s.csv", stamps.strftime("%Y-%m-%dT%H:%M"), np.ones(5))
    with pytest.raises(ValueError, match="increasing"):
        load_hourly_csv(tmp_path / "s.csv")


def test_bad_columns_and_values(tmp_path):
    pd.DataFrame({"t": ["2022-01-01"], "v": [1]}).to_csv(tmp_path / "c.csv", index=False)
    with pytest.raises(ValueError, match="missing column"):
        load_hourly_csv(tmp_path / "c.csv")
    _write(tmp_path / "n.csv", ["2022-01-01T00:00", "2022-01-01T01:00"], ["1", "x"])
    with pytest.raises(ValueError, match="non-numeric"):
        load_hourly_csv(tmp_path / "n.csv")


def test_missing_file_named(tmp_path):
    paths = {n: tmp_path / f"{n}.csv" for n in ("heat_load", "t_ext", "gi", "elec_price", "elec_co2")}
    stamps = pd.date_range("2022-01-01", periods=HOURS_IN_YEAR, freq="h").strftime("%Y-%m-%dT%H:%M")
    for n, p in paths.items():
        if n != "elec_price":
            _write(p, stamps, np.ones(HOURS_IN_YEAR))
    with pytest.raises(FileNotFoundError, match="elec_price"):
        HourlyData.from_csv_files(paths)


def _const_year(v=5.0):
    one = np.full(HOURS_IN_YEAR, v)
    return HourlyData(one, one, one, one, one)


@pytest.mark.parametrize("method", ["medoid", "mean"])
def test_constant_load_preserved(method):
    g = paper_grid()
    b = aggregate(_const_year(5.0), g, method)
    assert np.all(b.heat_load == 5.0)
    assert b.annual_heat() == pytest.approx(5.0 * HOURS_IN_YEAR)


def test_mean_of_two_days():
    # a 1-period grid with 1 representative day: the mean day of the whole year
    g = build_time_grid(1, 1, 24, "single")
    load = np.where(np.arange(HOURS_IN_YEAR) // 24 % 2 == 0, 4.0, 6.0)
    raw = HourlyData(load, load, load, load, load)
    b = aggregate(raw, g, "mean")
    assert b.heat_load[0] == pytest.approx(load.mean())
    # two real days [4, 6] flat average to 5
    assert (4.0 + 6.0) / 2 == 5.0


def test_sinusoidal_medoid_energy_within_5pct():
    raw = synthesize_hourly(3)
    b = aggregate(raw, paper_grid(), "medoid")
    assert abs(b.annual_heat() / raw.annual_heat() - 1) < 0.05


@settings(max_examples=10, deadline=None)
@given(st.integers(0, 10_000))
def test_mean_method_conserves_energy(seed):
    rng = np.random.default_rng(seed)
    load = rng.uniform(0, 10, HOURS_IN_YEAR)
    raw = HourlyData(load, load, load, load, load)
    b = aggregate(raw, build_time_grid(12, 3, 4, "month"), "mean")
    assert abs(b.annual_heat() / raw.annual_heat() - 1) < 0.05


def test_synthesis_deterministic_and_shaped():
    g = toy_grid()
    a, b = synthesize_dataset(42, g), synthesize_dataset(42, g)
    for name in ("heat_load", "t_ext", "gi", "elec_price", "elec_co2"):
        np.testing.assert_array_equal(getattr(a, name), getattr(b, name))
    raw = synthesize_hourly(42)
    summer = np.zeros(HOURS_IN_YEAR, bool)
    summer[120 * 24:273 * 24] = True
    assert raw.gi[summer].max() > 700
    winter = ~summer
    assert (raw.gi[winter] < 300).mean() >= 0.5


def test_zero_amplitude_is_constant():
    raw = synthesize_hourly(1, SynthShape(amplitude=0.0))
    for v in (raw.heat_load, raw.t_ext, raw.gi, raw.elec_price, raw.elec_co2):
        assert np.ptp(v) < 1e-9


def test_bundle_csv_round_trip(tmp_path):
    g = toy_grid()
    b = synthesize_dataset(5, g)
    b.to_csv(tmp_path / "s.csv")
    c = SeriesBundle.from_csv(tmp_path / "s.csv", g)
    np.testing.assert_allclose(c.heat_load, b.heat_load, rtol=1e-9)
    np.testing.assert_allclose(c.gi, b.gi, rtol=1e-9)


def test_bundle_validation():
    g = toy_grid()
    with pytest.raises(ValueError):
        constant_bundle(g, heat_load=-1)
    b = constant_bundle(g, heat_load=2.0)
    with pytest.raises(ValueError):
        b.with_series(gi=np.zeros(3))
    with warnings.catch_warnings():
        warnings.simplefilter("error")
        assert b.at("heat_load", 1, 2) == 2.0
