"""Compile a scenario, plant catalog and input series into a MilpModel.

Hydraulic layout (one main loop per step)::

    cold branch --+-- HP ------+                +-- GB ----+
      (T_cb)      +-- solar ---+-- preheat  ----+-- WB ----+-- hot line (T_hb) --> network
                  +-- bypass1 -+   node (T_ph)  +-- bypass2+        |
                                                              TES / STES taps

Temperatures are carried as rises above ``T_cb`` in power-of-two bits:
``theta_HP``, ``theta_Sol`` and ``theta_ph`` (preheat mix). The lift seen by the
heat pump and the collector losses is ``theta + T_cb - T_ext``.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Dict, List, Optional


from ..domain import (BOILERS, BoilerPerf, EconomicParams, HeatPumpPerf, HydraulicParams,
                      PlantCatalog, SolarPerf, StoragePerf, TechKind, WoodBoilerCommit)
from ..economics import CostFactors, replacement_factor
from ..linearize import BitDiscretization, bits_expr, linearize_bilinear, linearize_product, make_discretization
from ..scenarios import ScenarioConfig
from ..timegrid import TimeGrid
from .model import LinExpr, MilpModel, Var, quicksum, vname

MASS_PER_FLOW_HOUR = 3.6  # tonnes per (kg/s) per hour


class InfeasibleDesign(ValueError):
    """Raised when a pre-check shows no design can meet the load."""


@dataclass
class BuildOptions:
    dt_relax_max: Optional[float] = None  # overrides SolarPerf.dt_relax_max
    pin_flow_eps: float = 1e-3  # kg/s, smallest main-loop flow treated as "flowing"
    storage_superposition_bounds: bool = True


@dataclass
class VariableLayout:
    """Handles to every model variable, keyed by technology/step."""

    z: Dict[TechKind, Var] = field(default_factory=dict)
    cap: Dict[TechKind, Var] = field(default_factory=dict)
    y: Dict[tuple, Var] = field(default_factory=dict)  # (kind, p, t)
    ycap: Dict[tuple, Var] = field(default_factory=dict)  # y * capacity, (kind, p, t)
    p_prod: Dict[tuple, Var] = field(default_factory=dict)
    p_cons: Dict[tuple, Var] = field(default_factory=dict)
    mdot: Dict[tuple, Var] = field(default_factory=dict)  # (branch, p, t)
    mdot_ch: Dict[tuple, Var] = field(default_factory=dict)  # (storage, p, t)
    mdot_dch: Dict[tuple, Var] = field(default_factory=dict)
    bits: Dict[tuple, List[Var]] = field(default_factory=dict)  # (node, p, t)
    pre_on: Dict[tuple, Var] = field(default_factory=dict)
    p_relax: Dict[tuple, Var] = field(default_factory=dict)
    sol_flow: Dict[str, Var] = field(default_factory=dict)  # "low" / "high"
    m_intra: Dict[tuple, Var] = field(default_factory=dict)  # (storage, p, t), t = 0..N
    m_inter: Dict[tuple, Var] = field(default_factory=dict)  # (storage, i)
    # bit-expanded products, (node, p, t) -> expression equal to theta * factor
    theta_flow: Dict[tuple, LinExpr] = field(default_factory=dict)


@dataclass(frozen=True)
class ModelInputs:
    scenario: ScenarioConfig
    catalog: PlantCatalog
    grid: TimeGrid
    bundle: object  # SeriesBundle
    hydraulics: HydraulicParams = HydraulicParams()
    econ: EconomicParams = EconomicParams()


def expected_binary_count(catalog: PlantCatalog, grid: TimeGrid, hydraulics: HydraulicParams,
                          wood_enabled=True) -> int:
    """Closed-form number of declared binaries (fixed ones included)."""
    kinds = [k for k in catalog.kinds if k is not TechKind.WB or wood_enabled]
    n_bits = make_discretization(hydraulics.dt_max).n_bits
    units = [k for k in kinds if k in (TechKind.GB, TechKind.WB, TechKind.HP, TechKind.SOL)]
    nodes = int(TechKind.HP in kinds) + int(TechKind.SOL in kinds)
    preheat = nodes > 0
    per_step = len(units) + n_bits * (nodes + int(preheat)) + int(preheat)
    return per_step * grid.n_steps + len(kinds)


class ModelBuilder:
    def __init__(self, inputs: ModelInputs, options: BuildOptions | None = None):
        self.inp = inputs
        self.opt = options or BuildOptions()
        self.sc = inputs.scenario
        self.grid = inputs.grid
        self.data = inputs.bundle
        self.hyd = inputs.hydraulics
        self.econ = inputs.econ.for_scenario(inputs.scenario)
        cat = inputs.catalog
        if not self.sc.wood_boiler_enabled:
            cat = cat.without(TechKind.WB)
        self.cat = cat
        self.kinds = cat.kinds
        self.m = MilpModel(name=self.sc.name)
        self.L = VariableLayout()
        self.disc: BitDiscretization = make_discretization(self.hyd.dt_max)
        if self.disc.max_representable < self.hyd.dt_max:
            raise ValueError(
                f"temperature range {self.hyd.dt_max} K not representable with NT={self.disc.nt}")
        self.has_pre = TechKind.HP in self.kinds or TechKind.SOL in self.kinds
        self.dt = self.grid.step_hours
        if self.data.grid.n_steps != self.grid.n_steps:
            raise ValueError("series bundle does not match the grid")

    # -- helpers ------------------------------------------------------------
    def steps(self):
        return self.grid.steps()

    def series(self, name, p, t):
        return self.data.at(name, p, t)

    def kw_to_mw(self, expr):
        return expr * (self.hyd.cp / 1000.0)

    def demand_flow(self, p, t):
        return 1000.0 * self.series("heat_load", p, t) / (self.hyd.cp * self.hyd.dt_max)

    def solar_gross_max(self, p, t):
        if TechKind.SOL not in self.kinds:
            return 0.0
        perf: SolarPerf = self.cat[TechKind.SOL].perf
        return perf.eta0 * self.series("gi", p, t) * self.cat[TechKind.SOL].cap_max * 1e-6

    def flow_bound(self, p, t):
        """Largest possible main-loop flow: all producers at full output."""
        disp = sum(self.cat[k].cap_max for k in self.kinds if k in (TechKind.GB, TechKind.WB, TechKind.HP))
        total = disp + self.solar_gross_max(p, t)
        return max(1000.0 * total / (self.hyd.cp * self.hyd.dt_max), self.demand_flow(p, t), 1e-3)

    def solar_band(self, p, t):
        if TechKind.SOL not in self.kinds:
            return 0
        return self.cat[TechKind.SOL].perf.band(self.series("gi", p, t))

    # -- pre-checks ---------------------------------------------------------
    def capacity_precheck(self):
        has_storage = any(k in self.kinds for k in (TechKind.TES, TechKind.STES))
        disp = sum(self.cat[k].cap_max for k in self.kinds if k in (TechKind.GB, TechKind.WB, TechKind.HP))
        short = []
        for p, t in self.steps():
            avail = disp + self.solar_gross_max(p, t)
            if TechKind.WB in self.kinds and self.grid.is_summer(p):
                avail -= self.cat[TechKind.WB].cap_max
            if self.series("heat_load", p, t) > avail + 1e-9:
                short.append((p, t))
        if short and not has_storage:
            p, t = short[0]
            raise InfeasibleDesign(
                f"{self.sc.name}: load {self.series('heat_load', p, t):.3f} MW at period {p} step {t} "
                f"exceeds the largest capacity the enabled technologies can install")
        if not any(k in self.kinds for k in (TechKind.GB, TechKind.WB, TechKind.HP, TechKind.SOL)):
            if self.data.annual_heat() > 0:
                raise InfeasibleDesign(f"{self.sc.name}: no heat producer enabled")

    # -- design -------------------------------------------------------------
    def build_design(self):
        m, L = self.m, self.L
        for k in self.kinds:
            spec = self.cat[k]
            L.z[k] = m.binary(vname("z", k.value))
            L.cap[k] = m.add_var(vname("cap", k.value), ub=spec.cap_max)
            m.add_constr(L.cap[k] - spec.cap_max * L.z[k], "<=", 0, vname("cap_install", k.value))
            if spec.cap_min > 0:
                m.add_constr(L.cap[k] - spec.cap_min * L.z[k], ">=", 0, vname("cap_min", k.value))

    def _unit_commit(self, k, p, t, fix_off=False):
        """On/off binary dominated by the install binary, and its product with capacity."""
        m, L = self.m, self.L
        y = m.binary(vname("y", k.value, p, t), fix=0 if fix_off else None)
        L.y[k, p, t] = y
        m.add_constr(y - L.z[k], "<=", 0, vname("on_if_built", k.value, p, t))
        if fix_off:
            w = m.add_var(vname("ycap", k.value, p, t), ub=0.0)
        else:
            w = linearize_product(m, y, L.cap[k], name=vname("ycap", k.value, p, t)).w
        L.ycap[k, p, t] = w
        return y, w

    def _bits(self, node, p, t, fix_zero=False):
        bits = [self.m.binary(vname("bit", node, p, t, i), fix=0 if fix_zero else None)
                for i in range(self.disc.n_bits)]
        self.L.bits[node, p, t] = bits
        return bits

    # -- technologies -------------------------------------------------------
    def build_boiler(self, k: TechKind, p, t, fix_off=False):
        m, L, hyd = self.m, self.L, self.hyd
        perf: BoilerPerf = self.cat[k].perf
        cap_max = self.cat[k].cap_max
        y, ycap = self._unit_commit(k, p, t, fix_off)
        prod = m.add_var(vname("P_prod", k.value, p, t), ub=0.0 if fix_off else cap_max)
        cons = m.add_var(vname("P_cons", k.value, p, t), ub=0.0 if fix_off else (perf.a + perf.b) * cap_max)
        flow = m.add_var(vname("mdot", k.value, p, t), ub=self.flow_bound(p, t))
        L.p_prod[k, p, t], L.p_cons[k, p, t], L.mdot[k.value, p, t] = prod, cons, flow
        m.add_constr(cons - perf.a * prod - perf.b * ycap, "=", 0, vname("boiler_cons", k.value, p, t))
        m.add_constr(prod - ycap, "<=", 0, vname("prod_max", k.value, p, t))
        if perf.min_part_load_frac > 0:
            m.add_constr(prod - perf.min_part_load_frac * ycap, ">=", 0, vname("part_load", k.value, p, t))
        # P = mdot Cp (dT_max - theta_ph)
        heat = LinExpr.of(flow) * hyd.dt_max
        if self.has_pre:
            prod_expr, _ = linearize_bilinear(m, L.bits["ph", p, t], flow, name=vname(f"w{k.value}flow", p, t))
            heat = heat - prod_expr
        m.add_constr(prod - self.kw_to_mw(heat), "=", 0, vname("boiler_heat", k.value, p, t))

    def build_wood_commitment(self, commit: WoodBoilerCommit):
        """Minimum up/down time within each representative period (windows clipped
        at the period end; no transition is imposed at a period's first step)."""
        m, L = self.m, self.L
        n = self.grid.steps_per_period
        if commit.min_uptime_steps > n:
            raise ValueError(
                f"wood boiler uptime of {commit.min_uptime_steps} steps exceeds the "
                f"{n}-step representative period")
        k = TechKind.WB
        for p in range(self.grid.n_periods):
            for t in range(1, n):
                y_t, y_prev = L.y[k, p, t], L.y[k, p, t - 1]
                span = min(commit.min_uptime_steps - 1, n - 1 - t)
                if span >= 1:
                    after = quicksum(L.y[k, p, t + j] for j in range(1, span + 1))
                    m.add_constr(after - span * y_t + span * y_prev, ">=", 0, vname("min_up", p, t))
                span = min(commit.min_downtime_steps - 1, n - 1 - t)
                if span >= 1:
                    after = quicksum(L.y[k, p, t + j] for j in range(1, span + 1))
                    m.add_constr(after - span * y_t + span * y_prev, "<=", span, vname("min_down", p, t))

    def build_heat_pump(self, p, t):
        m, L, hyd = self.m, self.L, self.hyd
        k = TechKind.HP
        perf: HeatPumpPerf = self.cat[k].perf
        cap_max = self.cat[k].cap_max
        t_ext = self.series("t_ext", p, t)
        theta_cap = min(perf.max_supply_t, hyd.t_hb) - hyd.t_cb
        if theta_cap < 0:
            raise ValueError("heat pump supply limit below the cold branch temperature")
        if theta_cap > self.disc.max_representable:
            raise ValueError(f"heat pump range {theta_cap} K not representable with NT={self.disc.nt}")
        perf.check_range(hyd.t_cb - t_ext, hyd.t_cb + theta_cap - t_ext)

        y, ycap = self._unit_commit(k, p, t)
        bits = self._bits("HP", p, t)
        prod = m.add_var(vname("P_prod", k.value, p, t), ub=cap_max)
        cons = m.add_var(vname("P_cons", k.value, p, t), ub=cap_max)
        flow = m.add_var(vname("mdot", k.value, p, t), ub=self.flow_bound(p, t))
        L.p_prod[k, p, t], L.p_cons[k, p, t], L.mdot[k.value, p, t] = prod, cons, flow

        m.add_constr(prod - ycap, "<=", 0, vname("prod_max", k.value, p, t))
        # COP(lift) * P_cons with lift = theta + T_cb - T_ext
        theta_cons, _ = linearize_bilinear(m, bits, cons, name=vname("wHPcons", p, t))
        base = perf.cop_intercept + perf.cop_slope * (hyd.t_cb - t_ext)
        m.add_constr(prod - base * cons - perf.cop_slope * theta_cons, "=", 0, vname("hp_cop", p, t))
        theta_flow, _ = linearize_bilinear(m, bits, flow, name=vname("wHPflow", p, t))
        L.theta_flow["HP", p, t] = theta_flow
        m.add_constr(prod - self.kw_to_mw(theta_flow), "=", 0, vname("hp_heat", p, t))
        if theta_cap < self.disc.max_representable:
            m.add_constr(bits_expr(bits), "<=", theta_cap, vname("hp_tmax", p, t))

    def build_solar_design(self):
        m, L = self.m, self.L
        perf: SolarPerf = self.cat[TechKind.SOL].perf
        area = L.cap[TechKind.SOL]
        fmax = perf.flow_max * self.cat[TechKind.SOL].cap_max
        low = m.add_var(vname("sol_flow", "low"), ub=fmax)
        high = m.add_var(vname("sol_flow", "high"), ub=fmax)
        L.sol_flow["low"], L.sol_flow["high"] = low, high
        m.add_constr(low - perf.flow_low_min * area, ">=", 0, "sol_flow_low_min")
        m.add_constr(high - low - perf.flow_high_margin * area, ">=", 0, "sol_flow_high_min")
        m.add_constr(high - perf.flow_max * area, "<=", 0, "sol_flow_max")

    def build_solar(self, p, t, dt_relax):
        m, L, hyd = self.m, self.L, self.hyd
        k = TechKind.SOL
        perf: SolarPerf = self.cat[k].perf
        area_max = self.cat[k].cap_max
        gi = self.series("gi", p, t)
        if gi < 0:
            raise ValueError(f"negative irradiation at period {p} step {t}")
        t_ext = self.series("t_ext", p, t)
        band = perf.band(gi)
        off = band == 0

        y, a_on = self._unit_commit(k, p, t, fix_off=off)
        bits = self._bits("Sol", p, t, fix_zero=off)
        gross_max = perf.eta0 * gi * area_max * 1e-6
        prod = m.add_var(vname("P_prod", k.value, p, t), ub=0.0 if off else gross_max)
        relax = m.add_var(vname("P_relax", p, t), ub=0.0 if off or dt_relax == 0 else gross_max)
        L.p_prod[k, p, t], L.p_relax[p, t] = prod, relax
        if off:
            flow = m.add_var(vname("mdot", k.value, p, t), ub=0.0)
            L.mdot[k.value, p, t] = flow
            L.theta_flow["Sol", p, t] = LinExpr()
            return
        design = L.sol_flow["low" if band == 1 else "high"]
        flow = linearize_product(m, y, design, name=vname("mdot", k.value, p, t)).w
        L.mdot[k.value, p, t] = flow

        # collector output, W -> MW
        theta_area, _ = linearize_bilinear(m, bits, a_on, name=vname("wSolA", p, t))
        unit_gain = perf.eta0 * gi - perf.a_sol * (hyd.t_cb - t_ext)
        gross = (LinExpr.of(a_on) * unit_gain - theta_area * perf.a_sol) * 1e-6
        m.add_constr(prod + relax - gross, "=", 0, vname("sol_gain", p, t))
        theta_flow, _ = linearize_bilinear(m, bits, flow, name=vname("wSolflow", p, t))
        L.theta_flow["Sol", p, t] = theta_flow
        m.add_constr(prod - self.kw_to_mw(theta_flow), "=", 0, vname("sol_heat", p, t))
        m.add_constr(relax - self.kw_to_mw(LinExpr.of(flow) * dt_relax), "<=", 0, vname("sol_relax", p, t))
        if hyd.dt_max < self.disc.max_representable:
            m.add_constr(bits_expr(bits), "<=", hyd.dt_max, vname("sol_tmax", p, t))

    def build_main_loop(self, p, t):
        """Main-loop flow, bypasses and the preheat-flow indicator."""
        m, L = self.m, self.L
        fb = self.flow_bound(p, t)
        main = m.add_var(vname("mdot", "main", p, t), ub=fb)
        L.mdot["main", p, t] = main
        L.mdot["bp2", p, t] = m.add_var(vname("mdot", "bp2", p, t), ub=fb)
        if self.has_pre:
            L.mdot["bp1", p, t] = m.add_var(vname("mdot", "bp1", p, t), ub=fb)
            on = m.binary(vname("pre_on", p, t))
            L.pre_on[p, t] = on
            bits = self._bits("ph", p, t)
            m.add_constr(main - fb * on, "<=", 0, vname("pre_on_ub", p, t))
            m.add_constr(main - self.opt.pin_flow_eps * on, ">=", 0, vname("pre_on_lb", p, t))
            for i, b in enumerate(bits):
                m.add_constr(b - on, "<=", 0, vname("ph_pin", p, t, i))

    def build_mixing(self, p, t):
        """(mdot_sol + mdot_HP + mdot_bp1) theta_ph = mdot_sol theta_sol + mdot_HP theta_HP."""
        m, L, hyd = self.m, self.L, self.hyd
        bits = L.bits["ph", p, t]
        main = L.mdot["main", p, t]
        lhs, _ = linearize_bilinear(m, bits, main, name=vname("wmix", p, t))
        rhs = LinExpr()
        for node in ("HP", "Sol"):
            if (node, p, t) in L.theta_flow:
                rhs.add(L.theta_flow[node, p, t])
        m.add_constr(lhs - rhs, "=", 0, vname("mix", p, t))
        if hyd.dt_max < self.disc.max_representable:
            m.add_constr(bits_expr(bits), "<=", hyd.dt_max, vname("ph_tmax", p, t))

    def build_storage(self, k: TechKind):
        m, L, grid = self.m, self.L, self.grid
        spec = self.cat[k]
        perf: StoragePerf = spec.perf
        n = grid.steps_per_period
        phi = perf.phi(self.dt)
        rho = perf.density / 1000.0  # t/m3
        mass_max = rho * spec.cap_max
        vol = L.cap[k]
        per_step = MASS_PER_FLOW_HOUR * self.dt
        flow_max = mass_max / per_step if mass_max > 0 else 0.0
        for p in range(grid.n_periods):
            summer = grid.is_summer(p)
            for t in range(n + 1):
                mv = m.add_var(vname("m_intra", k.value, p, t), ub=mass_max)
                L.m_intra[k, p, t] = mv
                m.add_constr(mv - rho * vol, "<=", 0, vname("mass_cap", k.value, p, t))
            for t in range(n):
                ch = m.add_var(vname("mdot_ch", k.value, p, t),
                               ub=min(flow_max, self.flow_bound(p, t)) if perf.can_charge(summer) else 0.0)
                dch = m.add_var(vname("mdot_dch", k.value, p, t),
                                ub=flow_max if perf.can_discharge(summer) else 0.0)
                L.mdot_ch[k, p, t], L.mdot_dch[k, p, t] = ch, dch
                m.add_constr(
                    L.m_intra[k, p, t + 1] - (1 - phi) * L.m_intra[k, p, t]
                    - per_step * perf.eta_ch * ch + (per_step / perf.eta_dch) * dch,
                    "=", 0, vname("intra", k.value, p, t))

        decay = (1 - phi) ** n
        seq = grid.period_sequence
        for i in range(len(seq) + 1):
            mv = m.add_var(vname("m_inter", k.value, i), ub=mass_max)
            L.m_inter[k, i] = mv
            if i < len(seq):
                m.add_constr(mv - rho * vol, "<=", 0, vname("inter_cap", k.value, i))
        for i, g in enumerate(seq):
            m.add_constr(
                L.m_inter[k, i + 1] - decay * L.m_inter[k, i] + decay * L.m_intra[k, g, 0]
                - L.m_intra[k, g, n], "=", 0, vname("inter", k.value, i))
        m.add_constr(L.m_inter[k, len(seq)] - L.m_inter[k, 0], "=", 0, vname("inter_cyclic", k.value))

        if self.opt.storage_superposition_bounds:
            # absolute level inside block i is m_inter[i](1-phi)^t + d_t with
            # d_t = m_intra[t] - m_intra[0](1-phi)^t; bound it by per-period extremes
            for p in range(grid.n_periods):
                lo = m.add_var(vname("dev_min", k.value, p), lb=-mass_max, ub=0.0)
                hi = m.add_var(vname("dev_max", k.value, p), ub=mass_max)
                for t in range(1, n + 1):
                    dev = L.m_intra[k, p, t] - L.m_intra[k, p, 0] * (1 - phi) ** t
                    m.add_constr(dev - lo, ">=", 0, vname("dev_lo", k.value, p, t))
                    m.add_constr(dev - hi, "<=", 0, vname("dev_hi", k.value, p, t))
            for i, g in enumerate(seq):
                lo, hi = m.var(vname("dev_min", k.value, g)), m.var(vname("dev_max", k.value, g))
                m.add_constr(decay * L.m_inter[k, i] + lo, ">=", 0, vname("abs_lo", k.value, i))
                m.add_constr(L.m_inter[k, i] + hi - rho * vol, "<=", 0, vname("abs_hi", k.value, i))

    # -- balances -----------------------------------------------------------
    def storage_power(self, p, t):
        """Net discharge power of all storages in MW (Cp dT_max per unit flow)."""
        out = LinExpr()
        for k in (TechKind.TES, TechKind.STES):
            if k in self.kinds:
                out.add(self.L.mdot_dch[k, p, t])
                out.add(self.L.mdot_ch[k, p, t], -1.0)
        return out * (self.hyd.cp * self.hyd.dt_max / 1000.0)

    def build_balances(self):
        m, L = self.m, self.L
        producers = [k for k in self.kinds if k in (TechKind.GB, TechKind.WB, TechKind.HP, TechKind.SOL)]
        for p, t in self.steps():
            hl = self.series("heat_load", p, t)
            prod = quicksum(L.p_prod[k, p, t] for k in producers)
            m.add_constr(prod + self.storage_power(p, t), "=", hl, vname("energy", p, t))
            net_ch = LinExpr()
            for k in (TechKind.TES, TechKind.STES):
                if k in self.kinds:
                    net_ch.add(L.mdot_ch[k, p, t])
                    net_ch.add(L.mdot_dch[k, p, t], -1.0)
            main = L.mdot["main", p, t]
            m.add_constr(main - net_ch, "=", self.demand_flow(p, t), vname("delivery", p, t))
            boilers = quicksum(L.mdot[k.value, p, t] for k in BOILERS if k in self.kinds)
            m.add_constr(boilers + L.mdot["bp2", p, t] - main, "=", 0, vname("boiler_node", p, t))
            if self.has_pre:
                pre = quicksum(L.mdot[n, p, t] for n in ("HP", "Sol", "bp1") if (n, p, t) in L.mdot)
                m.add_constr(pre - main, "=", 0, vname("preheat_node", p, t))

        share = self.sc.renewable_share_min
        if share > 0:
            hours = self.grid.step_weights()
            ren = LinExpr()
            for p, t in self.steps():
                h = hours[self.grid.index(p, t)]
                for k in (TechKind.WB, TechKind.SOL, TechKind.HP):
                    if k in self.kinds:
                        ren.add(L.p_prod[k, p, t], h)
                if TechKind.HP in self.kinds:
                    ren.add(L.p_cons[TechKind.HP, p, t], -h)
            m.add_constr(ren, ">=", share * self.data.annual_heat(), "renewable_share")

    # -- objective ----------------------------------------------------------
    def build_objective(self):
        L, econ = self.L, self.econ
        f = CostFactors.from_params(econ)
        hours = self.grid.step_weights()
        heat = self.data.annual_heat()
        if heat <= 0:
            raise ValueError("annual heat demand must be positive")
        obj = LinExpr()
        for k in self.kinds:
            spec = self.cat[k]
            if spec.lifetime <= 0:
                raise ValueError(f"{k.value}: lifetime must be positive")
            rep = replacement_factor(econ.discount_rate, spec.lifetime, econ.project_life)
            coef = f.inv * f.lf * spec.inv_cost + f.rep * f.lf * spec.replacement_cost * rep
            if econ.include_fixed_om:
                coef += f.op * spec.fixed_om
            obj.add(L.cap[k], coef)
        for p, t in self.steps():
            idx = self.grid.index(p, t)
            h = hours[idx] * f.op
            for k in self.kinds:
                if (k, p, t) not in L.p_prod:
                    continue
                obj.add(L.p_prod[k, p, t], h * self.cat[k].var_om)
                if (k, p, t) in L.p_cons:
                    if k is TechKind.GB:
                        price, co2 = econ.gas_price, econ.gas_co2
                    elif k is TechKind.WB:
                        price, co2 = econ.wood_price, econ.wood_co2
                    else:
                        price = self.data.elec_price[idx]
                        co2 = self.data.elec_co2[idx] * econ.elec_co2_factor
                    obj.add(L.p_cons[k, p, t], h * (price + econ.carbon_tax * co2 / 1000.0))
        self.m.set_objective(obj)
        self.m.meta.update({"annual_heat": heat, "lcoh_scale": 1.0 / heat})

    # -- orchestration ------------------------------------------------------
    def build(self) -> MilpModel:
        self.capacity_precheck()
        perf_sol = self.cat[TechKind.SOL].perf if TechKind.SOL in self.kinds else None
        dt_relax = self.opt.dt_relax_max
        if dt_relax is None:
            dt_relax = perf_sol.dt_relax_max if perf_sol else 0.0
        if dt_relax < 0:
            raise ValueError("dt_relax_max must be >= 0")
        self.build_design()
        if TechKind.SOL in self.kinds:
            self.build_solar_design()
        commit = self.cat.wood_commit(self.dt) if TechKind.WB in self.kinds else None
        for p, t in self.steps():
            self.build_main_loop(p, t)
            if TechKind.HP in self.kinds:
                self.build_heat_pump(p, t)
            if TechKind.SOL in self.kinds:
                self.build_solar(p, t, dt_relax)
            if self.has_pre:
                self.build_mixing(p, t)
            for k in BOILERS:
                if k in self.kinds:
                    off = (k is TechKind.WB and commit.summer_forced_off and self.grid.is_summer(p))
                    self.build_boiler(k, p, t, fix_off=off)
        if commit is not None:
            self.build_wood_commitment(commit)
        for k in (TechKind.TES, TechKind.STES):
            if k in self.kinds:
                self.build_storage(k)
        self.build_balances()
        self.build_objective()
        self.m.meta.update({
            "scenario": self.sc.name,
            "dt_relax_max": dt_relax,
            "n_bits": self.disc.n_bits,
            "kinds": [k.value for k in self.kinds],
            "expected_binaries": expected_binary_count(self.cat, self.grid, self.hyd),
        })
        self.m.validate()
        return self.m


def build_model(scenario, catalog, grid, bundle, hydraulics=None, econ=None, options=None):
    inputs = ModelInputs(scenario, catalog, grid, bundle,
                         hydraulics or HydraulicParams(), econ or EconomicParams())
    builder = ModelBuilder(inputs, options)
    model = builder.build()
    return model, builder.L
