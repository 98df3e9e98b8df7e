"""Independent audit of decoded designs.

Nothing here reuses the builder's coefficient assembly: balances, physics and
schedule rules are recomputed from the decoded quantities and the raw inputs,
so sign or indexing slips in the model show up as residuals.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Dict, List, Optional

import numpy as np
import pandas as pd

from .domain import HydraulicParams, PlantCatalog, TechKind
from .solution import DesignSolution

BALANCE_TOL = 1e-6  # MW (or kg/s, tonnes) absolute


@dataclass
class ResidualReport:
    residuals: pd.DataFrame  # one row per step, one column per balance
    max_abs: Dict[str, float]

    @property
    def worst(self) -> float:
        return max(self.max_abs.values(), default=0.0)

    def ok(self, tol=BALANCE_TOL) -> bool:
        return self.worst <= tol

    def flagged(self, column, tol=BALANCE_TOL):
        col = self.residuals[column]
        return [(int(r.period), int(r.step), float(col[i]))
                for i, r in self.residuals.iterrows() if abs(col[i]) > tol]


def _per_step(sol: DesignSolution, d, key):
    return np.asarray(d.get(key, np.zeros(sol.grid.n_steps)), dtype=float)


def audit_balances(sol: DesignSolution, bundle, hyd: HydraulicParams = HydraulicParams(),
                   catalog: Optional[PlantCatalog] = None) -> ResidualReport:
    """Energy balance, node mass balances and storage mass dynamics per step."""
    g = sol.grid
    hl = np.asarray(bundle.heat_load, dtype=float)
    span = hyd.t_hb - hyd.t_cb
    to_mw = hyd.cp * span / 1000.0

    supply = np.zeros(g.n_steps)
    for arr in sol.p_prod.values():
        supply += arr
    net_dch = np.zeros(g.n_steps)
    for k in sol.charge:
        net_dch += sol.discharge[k] - sol.charge[k]
    energy = supply + to_mw * net_dch - hl

    cols = {"energy": energy}
    f = sol.flows
    if f:
        main = _per_step(sol, f, "main")
        cols["delivery_node"] = main + net_dch - hl / to_mw
        cols["boiler_node"] = _per_step(sol, f, "GB") + _per_step(sol, f, "WB") + _per_step(sol, f, "bp2") - main
        if "bp1" in f:
            cols["preheat_node"] = (_per_step(sol, f, "HP") + _per_step(sol, f, "Sol")
                                    + _per_step(sol, f, "bp1") - main)

    if catalog is not None:
        n = g.steps_per_period
        for k in sol.charge:
            perf = catalog[k].perf
            keep = (1.0 - perf.loss_per_hour) ** g.step_hours
            scale = 3600.0 * g.step_hours / 1000.0  # kg/s over a step -> tonnes
            res = np.zeros(g.n_steps)
            m = sol.m_intra[k]
            for p in range(g.n_periods):
                for t in range(n):
                    i = g.index(p, t)
                    expected = (keep * m[p, t] + scale * perf.eta_ch * sol.charge[k][i]
                                - scale * sol.discharge[k][i] / perf.eta_dch)
                    res[i] = m[p, t + 1] - expected
            cols[f"storage_{k.value}"] = res

    idx = list(g.steps())
    df = pd.DataFrame({"period": [p for p, _ in idx], "step": [t for _, t in idx], **cols})
    return ResidualReport(df, {c: float(np.max(np.abs(v))) if len(v) else 0.0 for c, v in cols.items()})


def absolute_storage_mass(sol: DesignSolution, kind, catalog: PlantCatalog) -> np.ndarray:
    """Stored mass along the block sequence, shape ``(B, N+1)`` (tonnes)."""
    g = sol.grid
    keep = (1.0 - catalog[kind].perf.loss_per_hour) ** g.step_hours
    n = g.steps_per_period
    decay = keep ** np.arange(n + 1)
    m_intra, m_inter = sol.m_intra[kind], sol.m_inter[kind]
    out = np.empty((len(g.period_sequence), n + 1))
    for i, grp in enumerate(g.period_sequence):
        out[i] = m_inter[i] * decay + m_intra[grp] - m_intra[grp, 0] * decay
    return out


def audit_inter_period(sol: DesignSolution, catalog: PlantCatalog, tol=BALANCE_TOL) -> Dict[str, float]:
    """Worst violation of the inter-period chain, its cycle closure and the
    absolute level bounds ``0 <= m <= rho V``."""
    g = sol.grid
    out = {}
    n = g.steps_per_period
    for k in sol.m_inter:
        perf = catalog[k].perf
        keep_n = ((1.0 - perf.loss_per_hour) ** g.step_hours) ** n
        mi, mx = sol.m_inter[k], sol.m_intra[k]
        chain = [mi[i + 1] - ((mi[i] - mx[grp, 0]) * keep_n + mx[grp, n])
                 for i, grp in enumerate(g.period_sequence)]
        absm = absolute_storage_mass(sol, k, catalog)
        cap = perf.density / 1000.0 * sol.capacity[k]
        out[k.value] = max(
            max((abs(c) for c in chain), default=0.0),
            abs(mi[-1] - mi[0]),
            float(max(0.0, -absm.min())),
            float(max(0.0, absm.max() - cap)),
        )
    return out


# -- nonlinear physics ---------------------------------------------------------
@dataclass
class NonlinearReport:
    deviations: pd.DataFrame  # per step: MILP-asserted minus recomputed (MW or K)
    bounds: pd.DataFrame  # per step: propagated half-kelvin rounding bound
    max_abs: Dict[str, float]

    def within_bounds(self, slack=1e-6) -> bool:
        for c in self.deviations.columns:
            if c in ("period", "step"):
                continue
            if (self.deviations[c].abs() > self.bounds[c] + slack).any():
                return False
        return True


def rounding_bounds(sol: DesignSolution, catalog: PlantCatalog, hyd: HydraulicParams, half_step=0.5):
    """Largest deviation a ``half_step`` K temperature error can cause per step."""
    g = sol.grid
    out = {}
    if TechKind.HP in sol.p_prod:
        b = catalog[TechKind.HP].perf.cop_slope
        out["hp_cop"] = abs(b) * half_step * sol.p_cons[TechKind.HP]
        out["hp_heat"] = hyd.cp * half_step * sol.flows.get("HP", np.zeros(g.n_steps)) / 1000.0
    if TechKind.SOL in sol.p_prod:
        perf = catalog[TechKind.SOL].perf
        area_on = sol.on[TechKind.SOL] * sol.capacity[TechKind.SOL]
        out["sol_gain"] = perf.a_sol * half_step * area_on * 1e-6
        out["sol_heat"] = hyd.cp * half_step * sol.flows.get("Sol", np.zeros(g.n_steps)) / 1000.0
    if "ph" in sol.theta:
        out["mix"] = np.full(g.n_steps, half_step)
    for k in (TechKind.GB, TechKind.WB):
        if k in sol.p_prod:
            out[f"{k.value}_heat"] = hyd.cp * half_step * sol.flows.get(k.value, np.zeros(g.n_steps)) / 1000.0
    return out


def audit_nonlinear(sol: DesignSolution, catalog: PlantCatalog, bundle,
                    hyd: HydraulicParams = HydraulicParams(), theta: Optional[Dict[str, np.ndarray]] = None,
                    half_step=0.5) -> NonlinearReport:
    """Compare the schedule with the original nonlinear relations evaluated at the
    temperatures in ``theta`` (defaults to the decoded bit values).

    Passing continuous temperatures measures the error the 1 K grid introduces.
    """
    g = sol.grid
    th = dict(sol.theta if theta is None else theta)
    t_ext = np.asarray(bundle.t_ext, dtype=float)
    gi = np.asarray(bundle.gi, dtype=float)
    zeros = np.zeros(g.n_steps)
    dev = {}
    if TechKind.HP in sol.p_prod:
        perf = catalog[TechKind.HP].perf
        lift = th.get("HP", zeros) + hyd.t_cb - t_ext
        cons = sol.p_cons[TechKind.HP]
        dev["hp_cop"] = sol.p_prod[TechKind.HP] - (perf.cop_intercept + perf.cop_slope * lift) * cons
        dev["hp_heat"] = sol.p_prod[TechKind.HP] - sol.flows.get("HP", zeros) * hyd.cp * th.get("HP", zeros) / 1000.0
    if TechKind.SOL in sol.p_prod:
        perf = catalog[TechKind.SOL].perf
        area_on = sol.on[TechKind.SOL] * sol.capacity[TechKind.SOL]
        t_sol = hyd.t_cb + th.get("Sol", zeros)
        gross = (perf.eta0 * gi - perf.a_sol * (t_sol - t_ext)) * area_on * 1e-6
        dev["sol_gain"] = sol.p_prod[TechKind.SOL] + sol.p_relax - gross
        dev["sol_heat"] = sol.p_prod[TechKind.SOL] - sol.flows.get("Sol", zeros) * hyd.cp * th.get("Sol", zeros) / 1000.0
    if "ph" in th:
        hp_f, sol_f = sol.flows.get("HP", zeros), sol.flows.get("Sol", zeros)
        total = hp_f + sol_f + sol.flows.get("bp1", zeros)
        mixed = np.divide(hp_f * th.get("HP", zeros) + sol_f * th.get("Sol", zeros), total,
                          out=np.zeros(g.n_steps), where=total > 1e-9)
        dev["mix"] = th["ph"] - mixed
    span = hyd.t_hb - hyd.t_cb
    for k in (TechKind.GB, TechKind.WB):
        if k in sol.p_prod:
            rise = span - th.get("ph", zeros)
            dev[f"{k.value}_heat"] = sol.p_prod[k] - sol.flows.get(k.value, zeros) * hyd.cp * rise / 1000.0
    idx = list(g.steps())
    base = {"period": [p for p, _ in idx], "step": [t for _, t in idx]}
    bounds = rounding_bounds(sol, catalog, hyd, half_step)
    return NonlinearReport(
        pd.DataFrame({**base, **dev}),
        pd.DataFrame({**base, **{c: bounds.get(c, zeros) for c in dev}}),
        {c: float(np.max(np.abs(v))) for c, v in dev.items()},
    )


# -- schedule rules --------------------------------------------------------------
@dataclass(frozen=True)
class Violation:
    rule: str
    period: int
    step: int
    detail: str = ""


def _runs(values):
    """``(value, start, end)`` for maximal runs of equal values."""
    out = []
    start = 0
    for t in range(1, len(values) + 1):
        if t == len(values) or values[t] != values[start]:
            out.append((values[start], start, t - 1))
            start = t
    return out


def audit_schedules(sol: DesignSolution, catalog: PlantCatalog, bundle, min_uptime_steps=None,
                    min_downtime_steps=None, dt_relax_max=None, hyd: HydraulicParams = HydraulicParams(),
                    tol=1e-6) -> List[Violation]:
    """Scan on/off sequences and per-step operating rules; empty list when legal.

    Commitment windows are judged inside each representative period: a run that
    starts at a period's first step or reaches its last step is not penalized.
    """
    g = sol.grid
    n = g.steps_per_period
    out: List[Violation] = []
    gi = np.asarray(bundle.gi, dtype=float)

    wb = TechKind.WB
    if wb in sol.p_prod:
        commit = catalog.wood_commit(g.step_hours)
        n_on = commit.min_uptime_steps if min_uptime_steps is None else min_uptime_steps
        n_off = commit.min_downtime_steps if min_downtime_steps is None else min_downtime_steps
        perf = catalog[wb].perf
        cap = sol.capacity[wb]
        for p in range(g.n_periods):
            y = [int(round(sol.on[wb][g.index(p, t)])) for t in range(n)]
            for val, s, e in _runs(y):
                if s == 0 or e == n - 1:
                    continue
                length = e - s + 1
                if val == 1 and length < n_on:
                    out.append(Violation("min_uptime", p, e + 1, f"on for {length} steps, need {n_on}"))
                if val == 0 and length < n_off:
                    out.append(Violation("min_downtime", p, e + 1, f"off for {length} steps, need {n_off}"))
            for t in range(n):
                i = g.index(p, t)
                prod = sol.p_prod[wb][i]
                if g.is_summer(p) and (y[t] or prod > tol):
                    out.append(Violation("summer_shutdown", p, t, f"P={prod:.4g} MW"))
                if y[t] and prod < perf.min_part_load_frac * cap - tol:
                    out.append(Violation("min_part_load", p, t,
                                         f"P={prod:.4g} < {perf.min_part_load_frac:.4g} x {cap:.4g}"))
                if not y[t] and prod > tol:
                    out.append(Violation("off_but_producing", p, t, f"P={prod:.4g} MW"))

    for k in sol.p_prod:
        cap = sol.capacity[k]
        if k is TechKind.SOL:
            continue
        for i in np.flatnonzero(sol.p_prod[k] > cap + tol):
            p, t = divmod(int(i), n)
            out.append(Violation("capacity", p, t, f"{k.value} P={sol.p_prod[k][i]:.4g} > {cap:.4g}"))

    sol_k = TechKind.SOL
    if sol_k in sol.p_prod:
        perf = catalog[sol_k].perf
        flow = sol.flows.get("Sol", np.zeros(g.n_steps))
        low, high = sol.sol_flow.get("low", 0.0), sol.sol_flow.get("high", 0.0)
        relax_max = perf.dt_relax_max if dt_relax_max is None else dt_relax_max
        for i in range(g.n_steps):
            p, t = divmod(i, n)
            band = perf.band(gi[i])
            allowed = {0: (0.0,), 1: (0.0, low), 2: (0.0, high)}[band]
            if min(abs(flow[i] - a) for a in allowed) > tol * max(1.0, high):
                out.append(Violation("solar_band", p, t, f"GI={gi[i]:.0f} flow={flow[i]:.4g}"))
            if band == 0 and sol.p_prod[sol_k][i] > tol:
                out.append(Violation("solar_band", p, t, f"GI={gi[i]:.0f} production {sol.p_prod[sol_k][i]:.4g}"))
            r = sol.p_relax[i]
            if r < -tol or r > hyd.cp * relax_max * flow[i] / 1000.0 + tol:
                out.append(Violation("relax_bound", p, t, f"P_relax={r:.4g}"))

    for k in sol.charge:
        perf = catalog[k].perf
        for i in range(g.n_steps):
            p, t = divmod(i, n)
            summer = g.is_summer(p)
            if sol.charge[k][i] > tol and not perf.can_charge(summer):
                out.append(Violation("storage_window", p, t, f"{k.value} charging"))
            if sol.discharge[k][i] > tol and not perf.can_discharge(summer):
                out.append(Violation("storage_window", p, t, f"{k.value} discharging"))
    return out


# -- KPIs ------------------------------------------------------------------------
def storage_loss_fraction(sol: DesignSolution, kind, catalog: PlantCatalog) -> float:
    """Mass lost to standing losses over mass charged, across the block sequence.

    Both numerator and denominator run over the same calendar blocks.
    """
    g = sol.grid
    perf = catalog[kind].perf
    phi = 1.0 - (1.0 - perf.loss_per_hour) ** g.step_hours
    n = g.steps_per_period
    absm = absolute_storage_mass(sol, kind, catalog)
    scale = 3600.0 * g.step_hours / 1000.0
    lost = phi * float(absm[:, :n].sum())
    charged = 0.0
    for grp in g.period_sequence:
        charged += scale * perf.eta_ch * float(sol.charge[kind][grp * n:(grp + 1) * n].sum())
    return lost / charged if charged > 1e-12 else 0.0


def kpi_report(sol: DesignSolution, breakdown, bundle, catalog: PlantCatalog) -> dict:
    g = sol.grid
    hours = g.step_weights()
    delivered = float(hours @ np.asarray(bundle.heat_load, dtype=float))
    prod = {k: float(hours @ v) for k, v in sol.p_prod.items()}
    total = sum(prod.values())
    kpi = {"scenario": sol.scenario, "status": sol.status, "final_gap": sol.final_gap,
           "lcoh": breakdown.lcoh if breakdown is not None else math.nan,
           "tac": breakdown.tac if breakdown is not None else math.nan,
           "annual_heat": delivered}
    for k in (TechKind.GB, TechKind.WB, TechKind.HP, TechKind.SOL, TechKind.TES, TechKind.STES):
        kpi[f"cap_{k.value}"] = sol.capacity.get(k, 0.0)
    for k in (TechKind.GB, TechKind.WB, TechKind.HP, TechKind.SOL):
        kpi[f"share_{k.value}"] = prod.get(k, 0.0) / total if total > 0 else 0.0

    renewable = prod.get(TechKind.WB, 0.0) + prod.get(TechKind.SOL, 0.0)
    if TechKind.HP in prod:
        renewable += prod[TechKind.HP] - float(hours @ sol.p_cons[TechKind.HP])
    kpi["renewable_share"] = renewable / delivered if delivered > 0 else 0.0

    for k in (TechKind.TES, TechKind.STES):
        kpi[f"loss_{k.value}"] = storage_loss_fraction(sol, k, catalog) if k in sol.charge else 0.0

    relaxed = float(hours @ sol.p_relax)
    solar = prod.get(TechKind.SOL, 0.0)
    kpi["solar_relaxed_MWh"] = relaxed
    kpi["dissipated_solar_fraction"] = relaxed / (solar + relaxed) if solar + relaxed > 1e-12 else 0.0

    summer = g.summer_mask()
    th = sol.theta.get("ph")
    main = sol.flows.get("main", np.zeros(g.n_steps))
    for label, mask in (("summer", summer), ("heating", ~summer)):
        sel = mask & (main > 1e-6)
        kpi[f"mean_dT_ph_{label}"] = float(th[sel].mean()) if th is not None and sel.any() else 0.0
    kpi["storage_loss_definition"] = "mass lost to standing losses / mass charged"
    return kpi
