"""Representative-period time structure."""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Sequence, Tuple

import numpy as np

DAYS_IN_YEAR = 365
# 0-based day-of-year of May 1st and September 30th in a non-leap year
SUMMER_FIRST_DAY = 120
SUMMER_LAST_DAY = 272
_MONTH_LENGTHS = (31, 28, 31, 30, 31, 30, 31, 31, 30, 31, 30, 31)


@dataclass(frozen=True)
class TimeGrid:
    """Representative periods of ``days_per_period`` days split into equal steps.

    ``period_weights[g]`` is the number of ``days_per_period``-day blocks of the
    real year that group ``g`` stands for (fractional: days / days_per_period).
    ``period_sequence`` is the calendar chain of blocks, each entry being the
    representative group ``g(i)`` of absolute block ``i``; it drives the
    inter-period storage linking.
    """

    n_periods: int
    days_per_period: int
    step_hours: float
    period_weights: Tuple[float, ...]
    period_sequence: Tuple[int, ...]
    summer_periods: frozenset
    calendar: Tuple[int, ...] = ()

    def __post_init__(self):
        n = self.steps_per_period
        if abs(n * self.step_hours - self.days_per_period * 24) > 1e-9:
            raise ValueError("steps_per_period * step_hours must equal days_per_period * 24")
        if len(self.period_weights) != self.n_periods:
            raise ValueError("one weight per period required")
        if any(w <= 0 for w in self.period_weights):
            raise ValueError("period weights must be positive")
        if not all(0 <= p < self.n_periods for p in self.summer_periods):
            raise ValueError("summer period index out of range")
        if not all(0 <= g < self.n_periods for g in self.period_sequence):
            raise ValueError("period sequence refers to unknown group")

    @property
    def steps_per_period(self) -> int:
        return int(round(self.days_per_period * 24 / self.step_hours))

    @property
    def n_steps(self) -> int:
        return self.n_periods * self.steps_per_period

    @property
    def modeled_days(self) -> float:
        return float(sum(self.period_weights)) * self.days_per_period

    def steps(self):
        n = self.steps_per_period
        for p in range(self.n_periods):
            for t in range(n):
                yield p, t

    def index(self, p, t) -> int:
        return p * self.steps_per_period + t

    def is_summer(self, p) -> bool:
        return p in self.summer_periods

    def step_weights(self) -> np.ndarray:
        """Real-year hours represented by each flattened step."""
        w = np.repeat(np.asarray(self.period_weights, dtype=float), self.steps_per_period)
        return w * self.step_hours

    def summer_mask(self) -> np.ndarray:
        return np.repeat(
            [p in self.summer_periods for p in range(self.n_periods)], self.steps_per_period)


def month_of_day() -> np.ndarray:
    return np.repeat(np.arange(12), _MONTH_LENGTHS)


def calendar_map(kind, n_periods) -> np.ndarray:
    """Day -> period assignment for the named calendar layouts."""
    if kind == "month":
        if n_periods != 12:
            raise ValueError("month calendar needs 12 periods")
        return month_of_day()
    if kind == "single":
        if n_periods != 1:
            raise ValueError("single calendar needs 1 period")
        return np.zeros(DAYS_IN_YEAR, dtype=int)
    if kind == "season":
        if n_periods != 2:
            raise ValueError("season calendar needs 2 periods (heating, summer)")
        days = np.arange(DAYS_IN_YEAR)
        return ((days >= SUMMER_FIRST_DAY) & (days <= SUMMER_LAST_DAY)).astype(int)
    if kind == "equal":
        return np.minimum(np.arange(DAYS_IN_YEAR) * n_periods // DAYS_IN_YEAR, n_periods - 1)
    raise ValueError(f"unknown calendar map {kind!r}")


def build_time_grid(n_periods, days_per_period, step_hours, calendar_map_="month") -> TimeGrid:
    if n_periods < 1 or days_per_period < 1:
        raise ValueError("n_periods and days_per_period must be >= 1")
    if step_hours <= 0 or abs(24 / step_hours - round(24 / step_hours)) > 1e-9:
        raise ValueError(f"step of {step_hours} h does not divide a day")
    if isinstance(calendar_map_, str):
        cal = calendar_map(calendar_map_, n_periods)
    else:
        cal = np.asarray(calendar_map_, dtype=int)
        if cal.shape != (DAYS_IN_YEAR,):
            raise ValueError(f"calendar map must assign all {DAYS_IN_YEAR} days")
        if cal.min() < 0 or cal.max() >= n_periods:
            raise ValueError("calendar map refers to unknown period")
    counts = np.bincount(cal, minlength=n_periods)
    empty = np.flatnonzero(counts == 0)
    if empty.size:
        raise ValueError(f"period(s) {empty.tolist()} have no calendar days")

    weights = tuple(float(c) / days_per_period for c in counts)
    n_blocks = math.ceil(DAYS_IN_YEAR / days_per_period)
    sequence = tuple(int(cal[i * days_per_period]) for i in range(n_blocks))
    in_summer = (np.arange(DAYS_IN_YEAR) >= SUMMER_FIRST_DAY) & (np.arange(DAYS_IN_YEAR) <= SUMMER_LAST_DAY)
    summer = frozenset(
        p for p in range(n_periods) if in_summer[cal == p].mean() > 0.5)
    return TimeGrid(
        n_periods=n_periods,
        days_per_period=days_per_period,
        step_hours=float(step_hours),
        period_weights=weights,
        period_sequence=sequence,
        summer_periods=summer,
        calendar=tuple(int(c) for c in cal),
    )


def toy_grid() -> TimeGrid:
    """Two seasons of three days at 6 h resolution; small enough for desk-scale solves."""
    return build_time_grid(2, 3, 6, "season")


def paper_grid() -> TimeGrid:
    return build_time_grid(12, 3, 3, "month")


def custom_grid(weights: Sequence[float], days_per_period, step_hours, summer=(),
                sequence=None) -> TimeGrid:
    """Grid with explicit weights, for hand-built test instances."""
    n = len(weights)
    if sequence is None:
        sequence = tuple(range(n))
    return TimeGrid(
        n_periods=n,
        days_per_period=days_per_period,
        step_hours=float(step_hours),
        period_weights=tuple(float(w) for w in weights),
        period_sequence=tuple(sequence),
        summer_periods=frozenset(summer),
    )
