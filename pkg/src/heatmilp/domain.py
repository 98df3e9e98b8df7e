"""Shared domain records: hydraulics, technology catalog and economic inputs.

Units used throughout the package:

* thermal/electric power in MW, energy in MWh
* mass flow in kg/s, stored water mass in tonnes
* temperatures in degC, temperature differences in K
* solar field area in m2, storage volume in m3
* money in EUR
"""

from __future__ import annotations

import enum
import math
from dataclasses import dataclass, replace
from typing import Dict, Optional, Tuple, Union


class TechKind(str, enum.Enum):
    GB = "GB"
    WB = "WB"
    HP = "HP"
    SOL = "Sol"
    TES = "TES"
    STES = "STES"


PRODUCERS = (TechKind.GB, TechKind.WB, TechKind.HP, TechKind.SOL)
STORAGES = (TechKind.TES, TechKind.STES)
BOILERS = (TechKind.GB, TechKind.WB)

# Unit in which each technology is sized
SIZING_UNIT = {
    TechKind.GB: "MW",
    TechKind.WB: "MW",
    TechKind.HP: "MW",
    TechKind.SOL: "m2",
    TechKind.TES: "m3",
    TechKind.STES: "m3",
}


@dataclass(frozen=True)
class HydraulicParams:
    t_hb: float = 90.0
    t_cb: float = 60.0
    cp: float = 4.186  # kJ/(kg K)

    def __post_init__(self):
        if not self.t_hb > self.t_cb:
            raise ValueError("hot branch temperature must exceed cold branch temperature")
        if not self.cp > 0:
            raise ValueError("cp must be positive")

    @property
    def dt_max(self) -> float:
        return self.t_hb - self.t_cb

    def power_mw(self, mdot, dt):
        """Heat carried by ``mdot`` kg/s heated by ``dt`` K, in MW."""
        return mdot * self.cp * dt / 1000.0


@dataclass(frozen=True)
class BoilerPerf:
    """Affine consumption model ``P_cons = a * P_prod + b * y * P_max``."""

    a: float
    b: float = 0.0
    min_part_load_frac: float = 0.0

    def __post_init__(self):
        if self.a < 1:
            raise ValueError("boiler slope a must be >= 1")
        if self.b < 0:
            raise ValueError("boiler standby coefficient b must be >= 0")
        if not 0 <= self.min_part_load_frac < 1:
            raise ValueError("min_part_load_frac must lie in [0, 1)")


@dataclass(frozen=True)
class WoodBoilerCommit:
    min_uptime_steps: int
    min_downtime_steps: int
    summer_forced_off: bool = True

    def __post_init__(self):
        if self.min_uptime_steps < 1 or self.min_downtime_steps < 1:
            raise ValueError("uptime and downtime must be at least one step")

    @classmethod
    def from_hours(cls, step_hours, uptime_hours=72.0, downtime_hours=12.0,
                   summer_forced_off=True):
        return cls(
            min_uptime_steps=max(1, math.ceil(uptime_hours / step_hours - 1e-9)),
            min_downtime_steps=max(1, math.ceil(downtime_hours / step_hours - 1e-9)),
            summer_forced_off=summer_forced_off,
        )


@dataclass(frozen=True)
class HeatPumpPerf:
    """Affine COP in the lift ``T_HP - T_ext``: ``COP = cop_intercept + cop_slope * lift``."""

    # least-squares fit of the air-source curve 6.08 - 0.09 dT + 0.0005 dT^2 over dT in [50, 90] K
    cop_intercept: float = 3.7
    cop_slope: float = -0.02
    max_supply_t: float = 90.0

    def __post_init__(self):
        if self.cop_slope > 0:
            raise ValueError("cop_slope must be <= 0 (COP cannot rise with the lift)")

    def cop(self, lift):
        return self.cop_intercept + self.cop_slope * lift

    def check_range(self, lift_min, lift_max):
        """Raise unless COP > 1 over the whole admissible lift range."""
        worst = min(self.cop(lift_min), self.cop(lift_max))
        if worst <= 1.0:
            raise ValueError(
                f"COP drops to {worst:.3f} <= 1 over lift range [{lift_min:.1f}, {lift_max:.1f}] K")


@dataclass(frozen=True)
class SolarPerf:
    eta0: float = 0.80
    a_sol: float = 3.5  # W/(m2 K)
    flow_low_min: float = 0.002  # kg/(s m2)
    flow_high_margin: float = 0.002  # kg/(s m2)
    flow_max: float = 0.02  # kg/(s m2), upper bound on either design flow
    gi_off_threshold: float = 300.0
    gi_high_threshold: float = 700.0
    dt_relax_max: float = 10.0

    def __post_init__(self):
        if not 0 < self.eta0 <= 1:
            raise ValueError("eta0 must lie in (0, 1]")
        if not self.a_sol > 0:
            raise ValueError("a_sol must be positive")
        if not self.gi_off_threshold < self.gi_high_threshold:
            raise ValueError("gi_off_threshold must be below gi_high_threshold")
        if self.flow_low_min < 0 or self.flow_high_margin < 0:
            raise ValueError("solar flow bounds must be non-negative")
        if self.flow_max < self.flow_low_min + self.flow_high_margin:
            raise ValueError("flow_max leaves no room for the high-flow design")
        if self.dt_relax_max < 0:
            raise ValueError("dt_relax_max must be >= 0")

    def band(self, gi):
        """0 = collector off, 1 = low design flow, 2 = high design flow."""
        if gi <= self.gi_off_threshold:
            return 0
        if gi < self.gi_high_threshold:
            return 1
        return 2


class ChargeWindow(str, enum.Enum):
    ALWAYS = "always"
    SUMMER_ONLY = "summer_only"


@dataclass(frozen=True)
class StoragePerf:
    loss_per_hour: float = 0.001
    eta_ch: float = 0.95
    eta_dch: float = 0.95
    density: float = 1000.0  # kg/m3
    charge_window: ChargeWindow = ChargeWindow.ALWAYS

    def __post_init__(self):
        if not 0 <= self.loss_per_hour < 1:
            raise ValueError("loss_per_hour must lie in [0, 1)")
        if not (0 < self.eta_ch <= 1 and 0 < self.eta_dch <= 1):
            raise ValueError("efficiencies must lie in (0, 1]")

    def phi(self, step_hours):
        """Per-step loss fraction for a step of ``step_hours``."""
        return 1.0 - (1.0 - self.loss_per_hour) ** step_hours

    def can_charge(self, summer):
        return self.charge_window is ChargeWindow.ALWAYS or summer

    def can_discharge(self, summer):
        return self.charge_window is ChargeWindow.ALWAYS or not summer


Perf = Union[BoilerPerf, HeatPumpPerf, SolarPerf, StoragePerf]


@dataclass(frozen=True)
class TechnologySpec:
    kind: TechKind
    inv_cost: float  # EUR per sizing unit
    fixed_om: float  # EUR per sizing unit and year
    var_om: float  # EUR/MWh of heat produced
    lifetime: float  # years
    capacity_bounds: Tuple[float, float]
    perf: Perf
    rep_cost: Optional[float] = None  # defaults to inv_cost

    def __post_init__(self):
        if min(self.inv_cost, self.fixed_om, self.var_om) < 0:
            raise ValueError(f"{self.kind.value}: costs must be >= 0")
        if self.rep_cost is not None and self.rep_cost < 0:
            raise ValueError(f"{self.kind.value}: rep_cost must be >= 0")
        if not self.lifetime > 0:
            raise ValueError(f"{self.kind.value}: lifetime must be > 0")
        lo, hi = self.capacity_bounds
        if not 0 <= lo <= hi:
            raise ValueError(f"{self.kind.value}: capacity bounds must satisfy 0 <= min <= max")

    @property
    def replacement_cost(self):
        return self.inv_cost if self.rep_cost is None else self.rep_cost

    @property
    def cap_max(self):
        return self.capacity_bounds[1]

    @property
    def cap_min(self):
        return self.capacity_bounds[0]


@dataclass(frozen=True)
class PlantCatalog:
    techs: Dict[TechKind, TechnologySpec]
    wood_commit_hours: Tuple[float, float] = (72.0, 12.0)

    def __contains__(self, kind):
        return kind in self.techs

    def __getitem__(self, kind) -> TechnologySpec:
        return self.techs[kind]

    @property
    def kinds(self):
        return [k for k in TechKind if k in self.techs]

    def without(self, *kinds):
        return replace(self, techs={k: v for k, v in self.techs.items() if k not in kinds})

    def only(self, *kinds):
        return replace(self, techs={k: v for k, v in self.techs.items() if k in kinds})

    def with_perf(self, kind, **changes):
        spec = self.techs[kind]
        techs = dict(self.techs)
        techs[kind] = replace(spec, perf=replace(spec.perf, **changes))
        return replace(self, techs=techs)

    def with_spec(self, kind, **changes):
        techs = dict(self.techs)
        techs[kind] = replace(self.techs[kind], **changes)
        return replace(self, techs=techs)

    def wood_commit(self, step_hours, summer_forced_off=True):
        up, down = self.wood_commit_hours
        return WoodBoilerCommit.from_hours(step_hours, up, down, summer_forced_off)


def default_catalog() -> PlantCatalog:
    """Technology table with the published cost data; performance values are defaults."""
    techs = {
        TechKind.GB: TechnologySpec(
            TechKind.GB, inv_cost=60e3, fixed_om=2073.58, var_om=1.17, lifetime=20,
            capacity_bounds=(0.0, 12.0), perf=BoilerPerf(a=1.04, b=0.03)),
        TechKind.WB: TechnologySpec(
            TechKind.WB, inv_cost=520e3, fixed_om=44661.0, var_om=2.87, lifetime=20,
            capacity_bounds=(0.0, 8.0),
            perf=BoilerPerf(a=1.18, b=0.04, min_part_load_frac=0.0416)),
        TechKind.SOL: TechnologySpec(
            TechKind.SOL, inv_cost=198.0, fixed_om=40.0, var_om=0.22, lifetime=20,
            capacity_bounds=(0.0, 15000.0), perf=SolarPerf()),
        TechKind.HP: TechnologySpec(
            TechKind.HP, inv_cost=1010e3, fixed_om=2212.6, var_om=2.33, lifetime=20,
            capacity_bounds=(0.0, 10.0), perf=HeatPumpPerf()),
        TechKind.TES: TechnologySpec(
            TechKind.TES, inv_cost=250.0, fixed_om=0.47, var_om=0.0, lifetime=40,
            capacity_bounds=(0.0, 8000.0), perf=StoragePerf(loss_per_hour=1e-3)),
        TechKind.STES: TechnologySpec(
            TechKind.STES, inv_cost=120.0, fixed_om=0.282, var_om=0.0, lifetime=40,
            capacity_bounds=(0.0, 60000.0),
            perf=StoragePerf(loss_per_hour=5e-5, charge_window=ChargeWindow.SUMMER_ONLY)),
    }
    return PlantCatalog(techs)


@dataclass(frozen=True)
class EconomicParams:
    discount_rate: float = 0.04
    loan_rate: float = 0.03
    loan_duration: int = 20
    project_life: int = 40
    gas_price: float = 40.0  # EUR/MWh
    wood_price: float = 25.0  # EUR/MWh
    wood_co2: float = 0.0  # kg/MWh, biogenic
    carbon_tax: float = 74.0  # EUR/t
    gas_co2: float = 227.0  # kg/MWh
    elec_co2_factor: float = 1.0  # multiplier on the electricity CO2 series
    include_fixed_om: bool = False

    def __post_init__(self):
        if not 0 <= self.discount_rate < 1:
            raise ValueError("discount_rate must lie in [0, 1)")
        if self.loan_rate < 0:
            raise ValueError("loan_rate must be >= 0")
        if not 0 < self.loan_duration <= self.project_life:
            raise ValueError("need 0 < loan_duration <= project_life")
        if self.carbon_tax < 0:
            raise ValueError("carbon_tax must be >= 0")

    def for_scenario(self, scenario) -> "EconomicParams":
        return replace(
            self,
            carbon_tax=scenario.carbon_tax,
            gas_co2=scenario.gas_co2,
            elec_co2_factor=scenario.elec_co2_factor,
        )
