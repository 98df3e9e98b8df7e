"""Annuity factors and the cost model, evaluated on decoded solutions."""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Dict

import numpy as np

from .domain import EconomicParams, PlantCatalog, TechKind


def crf(dr, lcp) -> float:
    """Capital recovery factor ``dr (1+dr)^L / ((1+dr)^L - 1)``; ``1/L`` at ``dr = 0``."""
    if dr < 0:
        raise ValueError("discount rate must be >= 0")
    if lcp < 1:
        raise ValueError("project life must be >= 1 year")
    if dr == 0:
        return 1.0 / lcp
    g = (1.0 + dr) ** lcp
    return dr * g / (g - 1.0)


def lf(ir, ld) -> float:
    """Loan annuity factor, same closed form as :func:`crf` over the loan duration."""
    if ir < 0:
        raise ValueError("loan rate must be >= 0")
    if ld < 1:
        raise ValueError("loan duration must be >= 1 year")
    if ir == 0:
        return 1.0 / ld
    g = (1.0 + ir) ** ld
    return ir * g / (g - 1.0)


def discount_sum(dr, first, last) -> float:
    """``sum_{k=first}^{last} (1+dr)^-k`` (zero for an empty range)."""
    return float(sum((1.0 + dr) ** -k for k in range(int(first), int(last) + 1)))


def replacement_factor(dr, lifetime, project_life) -> float:
    """Present-value weight of the replacements of one unit: one purchase at every
    multiple of ``lifetime`` that falls strictly inside the project life."""
    out = 0.0
    m = 1
    while m * lifetime < project_life - 1e-9:
        out += (1.0 + dr) ** -(m * lifetime)
        m += 1
    return out


def lcoh(tac_by_year, heat_by_year, dr) -> float:
    """Discounted cost over discounted heat, years numbered from 1."""
    tac = np.asarray(tac_by_year, dtype=float)
    heat = np.asarray(heat_by_year, dtype=float)
    disc = (1.0 + dr) ** -np.arange(1, len(tac) + 1)
    denom = float(heat @ disc)
    if denom <= 0:
        raise ValueError("no heat delivered")
    return float(tac @ disc) / denom


@dataclass(frozen=True)
class CostFactors:
    """Multipliers that turn the annual cost streams into the annualized total."""

    crf: float
    lf: float
    inv: float  # CRF * sum over loan years
    rep: float  # CRF * sum over post-loan years
    op: float  # CRF * sum over project life (1 up to rounding)

    @classmethod
    def from_params(cls, econ: EconomicParams) -> "CostFactors":
        c = crf(econ.discount_rate, econ.project_life)
        dr, ld, lcp = econ.discount_rate, econ.loan_duration, econ.project_life
        return cls(
            crf=c,
            lf=lf(econ.loan_rate, ld),
            inv=c * discount_sum(dr, 1, ld),
            rep=c * discount_sum(dr, ld + 1, lcp),
            op=c * discount_sum(dr, 1, lcp),
        )


@dataclass
class CostBreakdown:
    inv: float  # EUR/yr, loan annuity on the initial investment
    opex: float  # EUR/yr
    co2: float  # EUR/yr
    replacement: float  # EUR/yr, annuity on discounted replacements
    tac: float  # EUR/yr
    lcoh: float  # EUR/MWh, nan when no heat is delivered
    annual_heat: float  # MWh/yr
    per_tech: Dict[str, Dict[str, float]] = field(default_factory=dict)
    flags: list = field(default_factory=list)

    def as_row(self) -> dict:
        return {"inv": self.inv, "opex": self.opex, "co2": self.co2,
                "replacement": self.replacement, "tac": self.tac, "lcoh": self.lcoh,
                "annual_heat": self.annual_heat}

    def summary(self) -> str:
        lines = [
            f"  investment annuity   {self.inv:14,.0f} EUR/yr",
            f"  replacement annuity  {self.replacement:14,.0f} EUR/yr",
            f"  operation            {self.opex:14,.0f} EUR/yr",
            f"  CO2                  {self.co2:14,.0f} EUR/yr",
            f"  TAC                  {self.tac:14,.0f} EUR/yr",
            f"  annual heat          {self.annual_heat:14,.0f} MWh/yr (assumed identical every year)",
            f"  LCOH                 {self.lcoh:14.3f} EUR/MWh",
        ]
        lines += [f"  ! {f}" for f in self.flags]
        return "\n".join(lines)


def _carrier_series(kind, econ: EconomicParams, bundle):
    """Fuel price (EUR/MWh) and CO2 content (kg/MWh) per step for a consuming tech."""
    n = bundle.grid.n_steps
    if kind is TechKind.GB:
        return np.full(n, econ.gas_price), np.full(n, econ.gas_co2)
    if kind is TechKind.WB:
        return np.full(n, econ.wood_price), np.full(n, econ.wood_co2)
    if kind is TechKind.HP:
        return np.asarray(bundle.elec_price), np.asarray(bundle.elec_co2) * econ.elec_co2_factor
    return np.zeros(n), np.zeros(n)


def evaluate(solution, econ: EconomicParams, catalog: PlantCatalog, bundle, scenario=None) -> CostBreakdown:
    """Recompute every cost stream from the physical quantities of ``solution``."""
    if scenario is not None:
        econ = econ.for_scenario(scenario)
    if bundle is None or bundle.elec_price is None:
        raise ValueError("price series missing")
    f = CostFactors.from_params(econ)
    hours = bundle.grid.step_weights()
    heat = float(hours @ np.asarray(bundle.heat_load))

    per_tech = {}
    inv = rep = opex = co2 = 0.0
    for kind in catalog.kinds:
        spec = catalog[kind]
        cap = float(solution.capacity.get(kind, 0.0))
        t_inv = f.lf * spec.inv_cost * cap
        t_rep = f.lf * spec.replacement_cost * cap * replacement_factor(
            econ.discount_rate, spec.lifetime, econ.project_life)
        t_op = t_co2 = 0.0
        if kind in solution.p_prod:
            price, content = _carrier_series(kind, econ, bundle)
            cons = np.asarray(solution.p_cons.get(kind, np.zeros(len(hours))))
            prod = np.asarray(solution.p_prod[kind])
            t_op = float(hours @ (price * cons + spec.var_om * prod))
            t_co2 = float(hours @ (econ.carbon_tax * content / 1000.0 * cons))
        if econ.include_fixed_om:
            t_op += spec.fixed_om * cap
        per_tech[kind.value] = {"capacity": cap, "inv": t_inv, "replacement": t_rep,
                                "opex": t_op, "co2": t_co2}
        inv += t_inv
        rep += t_rep
        opex += t_op
        co2 += t_co2

    tac = f.inv * inv + f.rep * rep + f.op * (opex + co2)
    flags = []
    if heat > 0:
        value = tac / heat
    else:
        value = math.nan
        flags.append("no heat delivered: LCOH undefined")
    return CostBreakdown(inv=inv, opex=opex, co2=co2, replacement=rep, tac=tac,
                         lcoh=value, annual_heat=heat, per_tech=per_tech, flags=flags)
