"""Hourly input series, representative-day aggregation and synthetic data."""

from __future__ import annotations

import logging
import warnings
from dataclasses import dataclass, field, fields
from pathlib import Path

import numpy as np
import pandas as pd

from .timegrid import DAYS_IN_YEAR, TimeGrid

log = logging.getLogger(__name__)

HOURS_IN_YEAR = DAYS_IN_YEAR * 24
SERIES_NAMES = ("heat_load", "t_ext", "gi", "elec_price", "elec_co2")
CSV_COLUMNS = {"heat_load": "HL", "t_ext": "Text", "gi": "GI",
               "elec_price": "price", "elec_co2": "co2"}
REF_ELEC_CO2_MEAN = 37.94  # kg/MWh, yearly mean of the low-carbon electricity mix


@dataclass(frozen=True, eq=False)
class SeriesBundle:
    """Per-step inputs on a TimeGrid, flattened period-major."""

    grid: TimeGrid
    heat_load: np.ndarray  # MW
    t_ext: np.ndarray  # degC
    gi: np.ndarray  # W/m2
    elec_price: np.ndarray  # EUR/MWh
    elec_co2: np.ndarray  # kg/MWh, reference (low-carbon) profile

    def __post_init__(self):
        n = self.grid.n_steps
        for name in SERIES_NAMES:
            arr = np.asarray(getattr(self, name), dtype=float)
            if arr.shape != (n,):
                raise ValueError(f"{name}: expected {n} values, got {arr.shape}")
            arr.setflags(write=False)
            object.__setattr__(self, name, arr)
        if (self.heat_load < 0).any():
            raise ValueError("heat load must be non-negative")
        if (self.gi < 0).any():
            raise ValueError("irradiation must be non-negative")

    def at(self, name, p, t):
        return float(getattr(self, name)[self.grid.index(p, t)])

    def annual_heat(self) -> float:
        """Delivered heat per year in MWh."""
        return float(self.grid.step_weights() @ self.heat_load)

    def with_series(self, **arrays) -> "SeriesBundle":
        kw = {name: getattr(self, name) for name in SERIES_NAMES}
        kw.update(arrays)
        return SeriesBundle(self.grid, **kw)

    def to_frame(self) -> pd.DataFrame:
        n = self.grid.steps_per_period
        df = pd.DataFrame({
            "period": np.repeat(np.arange(self.grid.n_periods), n),
            "step": np.tile(np.arange(n), self.grid.n_periods),
        })
        for name in SERIES_NAMES:
            df[CSV_COLUMNS[name]] = getattr(self, name)
        return df

    def to_csv(self, path):
        self.to_frame().to_csv(path, index=False, float_format="%.10g")

    @classmethod
    def from_csv(cls, path, grid) -> "SeriesBundle":
        df = pd.read_csv(path)
        missing = [c for c in ("period", "step", *CSV_COLUMNS.values()) if c not in df.columns]
        if missing:
            raise ValueError(f"{path}: missing column(s) {missing}")
        df = df.sort_values(["period", "step"])
        return cls(grid, **{name: df[col].to_numpy(float) for name, col in CSV_COLUMNS.items()})


def constant_bundle(grid, heat_load=0.0, t_ext=5.0, gi=0.0, elec_price=60.0,
                    elec_co2=REF_ELEC_CO2_MEAN) -> SeriesBundle:
    n = grid.n_steps
    return SeriesBundle(grid, *(np.full(n, float(v)) for v in
                                (heat_load, t_ext, gi, elec_price, elec_co2)))


@dataclass
class HourlySeries:
    values: np.ndarray
    start: pd.Timestamp
    filled: list = field(default_factory=list)  # timestamps that were interpolated


def load_hourly_csv(path, column_spec=("timestamp", "value"), max_gap_fraction=0.02) -> HourlySeries:
    """Read a ``timestamp,value`` CSV into a gap-free hourly vector.

    Missing hours are filled by linear interpolation (with a warning) as long
    as they make up at most ``max_gap_fraction`` of the covered span. Leap days
    are dropped.
    """
    path = Path(path)
    ts_col, val_col = column_spec
    df = pd.read_csv(path)
    for col in column_spec:
        if col not in df.columns:
            raise ValueError(f"{path}: missing column {col!r}")
    try:
        stamps = pd.to_datetime(df[ts_col], format="ISO8601")
    except (ValueError, TypeError) as exc:
        raise ValueError(f"{path}: unparseable timestamp ({exc})") from None
    values = pd.to_numeric(df[val_col], errors="coerce")
    bad = values.isna().to_numpy().nonzero()[0]
    if bad.size:
        raise ValueError(f"{path}: non-numeric value on line {bad[0] + 2}")
    diffs = stamps.diff().dt.total_seconds().to_numpy()[1:]
    back = np.flatnonzero(diffs <= 0)
    if back.size:
        raise ValueError(f"{path}: timestamps not strictly increasing at line {back[0] + 3}")

    series = pd.Series(values.to_numpy(float), index=pd.DatetimeIndex(stamps).floor("h"))
    series = series[~((series.index.month == 2) & (series.index.day == 29))]
    full = pd.date_range(series.index[0], series.index[-1], freq="h")
    full = full[~((full.month == 2) & (full.day == 29))]
    series = series[~series.index.duplicated()].reindex(full)
    missing = series.index[series.isna()]
    if len(missing) > max_gap_fraction * len(full):
        raise ValueError(
            f"{path}: {len(missing)} of {len(full)} hours missing, above the "
            f"{max_gap_fraction:.0%} limit")
    if len(missing):
        warnings.warn(f"{path}: interpolated {len(missing)} missing hour(s)", stacklevel=2)
        series = series.interpolate(method="linear", limit_direction="both")
    return HourlySeries(series.to_numpy(float), full[0], list(missing))


@dataclass(frozen=True, eq=False)
class HourlyData:
    """Five aligned year-long hourly vectors (8760 values, no leap day)."""

    heat_load: np.ndarray
    t_ext: np.ndarray
    gi: np.ndarray
    elec_price: np.ndarray
    elec_co2: np.ndarray

    def __post_init__(self):
        for f in fields(self):
            arr = np.asarray(getattr(self, f.name), dtype=float)
            if arr.shape != (HOURS_IN_YEAR,):
                raise ValueError(f"{f.name}: expected {HOURS_IN_YEAR} hourly values, got {arr.shape}")
            object.__setattr__(self, f.name, arr)

    @classmethod
    def from_csv_files(cls, paths, **kw) -> "HourlyData":
        missing = [name for name in SERIES_NAMES if name not in paths]
        if missing:
            raise ValueError(f"no input file given for {missing}")
        out = {}
        for name in SERIES_NAMES:
            p = Path(paths[name])
            if not p.exists():
                raise FileNotFoundError(f"{name} file not found: {p}")
            out[name] = load_hourly_csv(p, **kw).values
        return cls(**out)

    def annual_heat(self) -> float:
        return float(self.heat_load.sum())


def _select_medoid_days(feats, k):
    d = np.sqrt(((feats[:, None, :] - feats[None, :, :]) ** 2).sum(-1))
    total = d.sum(axis=1)
    # stable sort so ties resolve to the earliest day
    return np.sort(np.argsort(total, kind="stable")[:k])


def aggregate(raw: HourlyData, grid: TimeGrid, method="medoid") -> SeriesBundle:
    """Reduce a year of hourly data to the representative days of ``grid``.

    ``medoid`` keeps, per period, the ``days_per_period`` real days with the
    smallest summed distance to all days of that period (load and irradiation
    profiles, z-scored). ``mean`` replaces every representative day by the
    period's mean day, which conserves the weighted annual energy exactly.
    """
    if method not in ("medoid", "mean"):
        raise ValueError(f"unknown aggregation method {method!r}")
    if len(grid.calendar) != DAYS_IN_YEAR:
        raise ValueError("grid has no calendar map; build it with build_time_grid")
    cal = np.asarray(grid.calendar)
    dpp = grid.days_per_period
    per_step = int(round(grid.step_hours))
    daily = {name: getattr(raw, name).reshape(DAYS_IN_YEAR, 24) for name in SERIES_NAMES}

    def zscore(a):
        s = a.std()
        return (a - a.mean()) / s if s > 0 else np.zeros_like(a)

    feats = np.hstack([zscore(daily["heat_load"]), zscore(daily["gi"])])
    out = {name: [] for name in SERIES_NAMES}
    for g in range(grid.n_periods):
        days = np.flatnonzero(cal == g)
        if len(days) < dpp:
            raise ValueError(f"period {g} has {len(days)} days, fewer than {dpp} representatives")
        if method == "medoid":
            chosen = days[_select_medoid_days(feats[days], dpp)]
            profiles = {n: daily[n][chosen].reshape(-1) for n in SERIES_NAMES}
        else:
            profiles = {n: np.tile(daily[n][days].mean(axis=0), dpp) for n in SERIES_NAMES}
        for n in SERIES_NAMES:
            out[n].append(profiles[n].reshape(-1, per_step).mean(axis=1))
    return SeriesBundle(grid, **{n: np.concatenate(v) for n, v in out.items()})


@dataclass(frozen=True)
class SynthShape:
    """Knobs for the synthetic year. ``amplitude`` scales every deviation from the
    annual mean, so ``amplitude=0`` yields constant series."""

    amplitude: float = 1.0
    t_mean: float = 12.5
    t_annual_amp: float = 10.0
    t_daily_amp: float = 4.0
    t_noise: float = 2.0
    load_base: float = 0.8  # MW, hot water share
    load_per_kelvin: float = 0.33  # MW/K below the heating limit
    heating_limit: float = 17.0
    gi_peak_summer: float = 1100.0  # W/m2 on the tilted collector plane
    gi_peak_winter: float = 400.0
    cloudiness_summer: float = 0.2
    cloudiness_winter: float = 0.6
    price_winter: float = 60.0
    price_summer: float = 45.0
    price_autumn: float = 230.0
    co2_winter: float = 44.0
    co2_summer: float = 22.0
    co2_autumn: float = 61.0


def synthesize_hourly(seed=0, shape: SynthShape | None = None) -> HourlyData:
    """Deterministic stand-in year: winter-peaking load, summer-peaking irradiation,
    and an expensive, carbon-heavy electricity episode from October to December."""
    shape = shape or SynthShape()
    rng = np.random.default_rng(seed)
    hours = np.arange(HOURS_IN_YEAR)
    doy = hours // 24
    hod = hours % 24 + 0.5
    season = np.cos(2 * np.pi * (doy - 15) / DAYS_IN_YEAR)  # +1 mid-January, -1 mid-July

    # AR(1) daily weather noise
    day_noise = np.zeros(DAYS_IN_YEAR)
    eps = rng.normal(size=DAYS_IN_YEAR)
    for d in range(1, DAYS_IN_YEAR):
        day_noise[d] = 0.7 * day_noise[d - 1] + eps[d] * np.sqrt(1 - 0.49)
    t_ext = (shape.t_mean - shape.t_annual_amp * season
             - shape.t_daily_amp * np.cos(2 * np.pi * (hod - 15) / 24)
             + shape.t_noise * day_noise[doy])

    heat = shape.load_base * (1 + 0.15 * np.sin(2 * np.pi * (hod - 5) / 24))
    heat = heat + shape.load_per_kelvin * np.clip(shape.heating_limit - t_ext, 0, None)

    summer_w = (1 - season) / 2  # 0 in January, 1 in July
    peak = shape.gi_peak_winter + (shape.gi_peak_summer - shape.gi_peak_winter) * summer_w
    half_day = 4.5 + 3.5 * summer_w  # hours from solar noon to sunset
    ang = (hod - 13.0) / half_day
    clear = np.clip(np.cos(np.clip(ang, -1, 1) * np.pi / 2), 0, None) ** 1.3
    cloud_level = shape.cloudiness_winter + (shape.cloudiness_summer - shape.cloudiness_winter) * summer_w
    cloud = 1 - cloud_level * rng.beta(1.2, 1.6, size=DAYS_IN_YEAR)[doy] / 0.43
    gi = peak * clear * np.clip(cloud, 0.05, 1.0)

    month = np.repeat(np.arange(12), [31, 28, 31, 30, 31, 30, 31, 31, 30, 31, 30, 31]) [doy]
    autumn = month >= 9
    summer = (month >= 4) & (month <= 8)
    base_price = np.where(autumn, shape.price_autumn,
                          np.where(summer, shape.price_summer, shape.price_winter))
    daily_shape = 1 + 0.25 * np.sin(2 * np.pi * (hod - 12) / 24) - 0.2 * np.exp(-((hod - 14) / 3) ** 2) * summer
    price = base_price * daily_shape * np.exp(0.15 * rng.normal(size=DAYS_IN_YEAR))[doy]
    base_co2 = np.where(autumn, shape.co2_autumn, np.where(summer, shape.co2_summer, shape.co2_winter))
    co2 = base_co2 * (1 + 0.15 * np.sin(2 * np.pi * (hod - 12) / 24))
    co2 = co2 * REF_ELEC_CO2_MEAN / co2.mean()

    series = {"heat_load": heat, "t_ext": t_ext, "gi": gi, "elec_price": price, "elec_co2": co2}
    a = shape.amplitude
    series = {k: v.mean() + a * (v - v.mean()) for k, v in series.items()}
    return HourlyData(**series)


def synthesize_dataset(seed, grid, shape_params: SynthShape | None = None, method="medoid") -> SeriesBundle:
    return aggregate(synthesize_hourly(seed, shape_params), grid, method)
