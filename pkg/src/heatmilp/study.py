"""End-to-end runs: dataset preparation, one scenario, the matrix sweep and the
relaxation study. Every run writes its artifacts into its own directory."""

from __future__ import annotations

import json
import logging
import math
import warnings
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field, replace
from pathlib import Path
from typing import Dict, List, Optional

import pandas as pd

from .config import Settings, settings_from_tree
from .domain import PlantCatalog, TechKind
from .economics import CostBreakdown, evaluate
from .ingest import HourlyData, SeriesBundle, aggregate, synthesize_hourly
from .milp.build import InfeasibleDesign, build_model
from .scenarios import ScenarioConfig, scenario_matrix
from .solution import DesignSolution, decode_solution, write_assignment
from .solver import SolveControls, SolveResult, solve_model
from .timegrid import TimeGrid, build_time_grid
from .validator import (BALANCE_TOL, audit_balances, audit_inter_period, audit_nonlinear,
                        audit_schedules, kpi_report)

log = logging.getLogger(__name__)

KPI_COLUMNS = (
    "scenario", "status", "final_gap", "objective", "lcoh", "tac", "annual_heat",
    "cap_GB", "cap_WB", "cap_HP", "cap_Sol", "cap_TES", "cap_STES",
    "share_GB", "share_WB", "share_HP", "share_Sol", "renewable_share",
    "loss_TES", "loss_STES", "dissipated_solar_fraction", "solar_relaxed_MWh",
    "mean_dT_ph_summer", "mean_dT_ph_heating", "max_energy_residual", "violations", "wall_seconds",
)


# -- dataset -------------------------------------------------------------------
def grid_from_settings(settings: Settings) -> TimeGrid:
    g = settings.grid_spec
    return build_time_grid(int(g["n_periods"]), int(g["days_per_period"]), float(g["step_hours"]),
                           g.get("calendar", "month"))


def grid_to_dict(grid: TimeGrid) -> dict:
    return {"n_periods": grid.n_periods, "days_per_period": grid.days_per_period,
            "step_hours": grid.step_hours, "period_weights": list(grid.period_weights),
            "period_sequence": list(grid.period_sequence),
            "summer_periods": sorted(grid.summer_periods), "calendar": list(grid.calendar)}


def grid_from_dict(d: dict) -> TimeGrid:
    return TimeGrid(int(d["n_periods"]), int(d["days_per_period"]), float(d["step_hours"]),
                    tuple(d["period_weights"]), tuple(d["period_sequence"]),
                    frozenset(d["summer_periods"]), tuple(d.get("calendar", ())))


@dataclass
class PreparedData:
    grid: TimeGrid
    bundle: SeriesBundle
    raw_annual_heat: float

    @property
    def energy_error(self) -> float:
        """Relative gap between aggregated and raw annual heat."""
        return self.bundle.annual_heat() / self.raw_annual_heat - 1.0 if self.raw_annual_heat else 0.0

    def diagnostics(self) -> str:
        return (f"raw annual heat {self.raw_annual_heat:,.1f} MWh, aggregated "
                f"{self.bundle.annual_heat():,.1f} MWh ({self.energy_error:+.2%}); "
                f"{self.grid.n_periods} periods x {self.grid.steps_per_period} steps of "
                f"{self.grid.step_hours:g} h")


def prepare_dataset(settings: Settings, seed: Optional[int] = None) -> PreparedData:
    data = settings.data
    grid = grid_from_settings(settings)
    if seed is None:
        seed = data.get("synthesize")
    if seed is not None:
        raw = synthesize_hourly(int(seed), settings.synth_shape())
    else:
        files = data.get("files") or {}
        raw = HourlyData.from_csv_files(files, max_gap_fraction=float(data["max_gap_fraction"]))
    bundle = aggregate(raw, grid, method=data.get("aggregation", "medoid"))
    return PreparedData(grid, bundle, raw.annual_heat())


def save_dataset(prep: PreparedData, directory) -> Path:
    d = Path(directory)
    d.mkdir(parents=True, exist_ok=True)
    prep.bundle.to_csv(d / "series.csv")
    (d / "grid.json").write_text(json.dumps(
        {"grid": grid_to_dict(prep.grid), "raw_annual_heat": prep.raw_annual_heat}, indent=1))
    return d


def load_dataset(directory) -> PreparedData:
    d = Path(directory)
    for name in ("grid.json", "series.csv"):
        if not (d / name).exists():
            raise FileNotFoundError(f"prepared dataset incomplete: {d / name} missing (run 'prepare')")
    meta = json.loads((d / "grid.json").read_text())
    grid = grid_from_dict(meta["grid"])
    return PreparedData(grid, SeriesBundle.from_csv(d / "series.csv", grid), meta["raw_annual_heat"])


# -- one scenario ----------------------------------------------------------------
def scenario_catalog(catalog: PlantCatalog, scenario: ScenarioConfig, exclude=()) -> PlantCatalog:
    cat = catalog if scenario.wood_boiler_enabled else catalog.without(TechKind.WB)
    if exclude:
        cat = cat.without(*[TechKind(k) for k in exclude])
    return cat


@dataclass
class ScenarioOutcome:
    scenario: str
    status: str  # solver status, or "infeasible"/"error"
    message: str = ""
    result: Optional[SolveResult] = None
    solution: Optional[DesignSolution] = None
    breakdown: Optional[CostBreakdown] = None
    kpi: Dict[str, object] = field(default_factory=dict)
    violations: list = field(default_factory=list)
    max_residual: float = math.nan
    nonlinear_ok: bool = True
    census: dict = field(default_factory=dict)
    objective_lcoh: float = math.nan
    residual_report: object = None
    nonlinear_report: object = None

    @property
    def solved(self):
        return self.solution is not None

    @property
    def audit_clean(self):
        return self.solved and not self.violations and self.max_residual <= BALANCE_TOL and self.nonlinear_ok

    def row(self) -> dict:
        row = {c: math.nan for c in KPI_COLUMNS}
        row.update({"scenario": self.scenario, "status": self.status})
        row.update({k: v for k, v in self.kpi.items() if k in row})
        if self.result is not None:
            row["objective"] = self.result.objective
            row["final_gap"] = self.result.final_gap
            row["wall_seconds"] = self.result.wall_seconds
        row["max_energy_residual"] = self.max_residual
        row["violations"] = len(self.violations) if self.solved else math.nan
        return row


def run_scenario(settings: Settings, scenario: ScenarioConfig, prep: PreparedData, work_dir,
                 dt_relax=None, exclude=(), controls: Optional[SolveControls] = None) -> ScenarioOutcome:
    work = Path(work_dir)
    work.mkdir(parents=True, exist_ok=True)
    catalog = scenario_catalog(settings.catalog, scenario, exclude)
    options = settings.build if dt_relax is None else replace(settings.build, dt_relax_max=float(dt_relax))
    controls = replace(controls or settings.controls, work_dir=str(work))
    name = scenario.name
    try:
        model, _ = build_model(scenario, catalog, prep.grid, prep.bundle, settings.hydraulics,
                               settings.econ, options)
    except InfeasibleDesign as exc:
        return ScenarioOutcome(name, "infeasible", f"capacity pre-check: {exc}")
    census = model.census()
    res = solve_model(model, controls, fmt=settings.fmt, stem="model")
    out = ScenarioOutcome(name, res.status, res.message, result=res, census=census)
    if res.status == "infeasible":
        out.message = ("solver proved the model infeasible; check the renewable share floor and "
                       "whether the enabled technologies can cover the peak load")
        return out
    if not res.has_solution:
        return out
    write_assignment(work / "assignment.json", res.assignment,
                     {"scenario": name, "status": res.status, "objective": res.objective,
                      "final_gap": res.final_gap, "dt_relax_max": options.dt_relax_max,
                      "exclude": list(exclude)})
    sol = decode_solution(res, model, prep.grid)
    return audit_outcome(out, sol, settings, scenario, catalog, prep, model.meta["annual_heat"],
                         model.meta.get("dt_relax_max"))


def audit_outcome(out: ScenarioOutcome, sol: DesignSolution, settings: Settings, scenario, catalog,
                  prep: PreparedData, annual_heat, dt_relax) -> ScenarioOutcome:
    out.solution = sol
    out.breakdown = evaluate(sol, settings.econ, catalog, prep.bundle, scenario)
    bal = audit_balances(sol, prep.bundle, settings.hydraulics, catalog)
    inter = audit_inter_period(sol, catalog)
    out.max_residual = max([bal.max_abs["energy"]] + list(inter.values()))
    out.residual_report = bal
    nl = audit_nonlinear(sol, catalog, prep.bundle, settings.hydraulics)
    out.nonlinear_ok = nl.within_bounds()
    out.nonlinear_report = nl
    out.violations = audit_schedules(sol, catalog, prep.bundle, dt_relax_max=dt_relax,
                                     hyd=settings.hydraulics)
    out.kpi = kpi_report(sol, out.breakdown, prep.bundle, catalog)
    if math.isfinite(sol.objective):
        out.objective_lcoh = sol.objective / annual_heat
    return out


def write_outcome(out: ScenarioOutcome, directory) -> Path:
    d = Path(directory)
    d.mkdir(parents=True, exist_ok=True)
    summary = {"scenario": out.scenario, "status": out.status, "message": out.message,
               "census": {k: v for k, v in out.census.items() if not isinstance(v, dict)}}
    if out.solved:
        sol = out.solution
        summary["design"] = sol.design_dict()
        summary["lcoh_from_objective"] = out.objective_lcoh
        summary["cost"] = out.breakdown.as_row()
        summary["audit"] = {"max_balance_residual": out.max_residual,
                            "nonlinear_within_bounds": out.nonlinear_ok,
                            "violations": [v.__dict__ for v in out.violations]}
        sched = sol.schedule_frame()
        sched.to_csv(d / "schedule.csv", index=False)
        pd.DataFrame([out.kpi]).to_csv(d / "kpi.csv", index=False)
        pd.DataFrame([{**out.breakdown.as_row(), **{f"{k}_{c}": v for k, row in out.breakdown.per_tech.items()
                                                     for c, v in row.items()}}]).to_csv(d / "costs.csv", index=False)
        (d / "costs.txt").write_text(out.breakdown.summary() + "\n")
        out.residual_report.residuals.to_csv(d / "residuals.csv", index=False)
        # plot-ready series: production per technology and the preheat temperature
        cols = ["period", "step"] + [c for c in sched.columns if c.startswith("P_prod_")]
        sched[cols].to_csv(d / "plot_production.csv", index=False)
        pre = sched[["period", "step"]].copy()
        pre["T_preheat"] = sched.get("dT_ph", 0.0) + 0.0
        pre["summer"] = sol.grid.summer_mask()
        pre.to_csv(d / "plot_preheat.csv", index=False)
    (d / "summary.json").write_text(json.dumps(summary, indent=1, default=float))
    return d


# -- sweep -----------------------------------------------------------------------
def select_scenarios(names, template: ScenarioConfig) -> List[ScenarioConfig]:
    """Resolve a filter (list of names or "all") against the 16-cell matrix."""
    matrix = scenario_matrix(template)
    if names in (None, "all", ["all"]):
        return matrix
    valid = {s.name: s for s in matrix}
    seen, out = set(), []
    for n in names:
        if n not in valid:
            raise KeyError(f"unknown scenario {n!r}; valid names: {', '.join(sorted(valid))}")
        if n in seen:
            warnings.warn(f"scenario {n} listed twice; running it once", stacklevel=2)
            continue
        seen.add(n)
        out.append(valid[n])
    return out


def _sweep_worker(args):
    tree, name, dataset_dir, work_dir = args
    settings = settings_from_tree(tree)
    prep = load_dataset(dataset_dir)
    sc = ScenarioConfig.from_name(name, settings.template)
    try:
        out = run_scenario(settings, sc, prep, work_dir)
        write_outcome(out, work_dir)
        return out.row()
    except Exception as exc:  # isolate the failure, keep the sweep going
        row = {c: math.nan for c in KPI_COLUMNS}
        row.update({"scenario": name, "status": "error"})
        log.error("%s failed: %s", name, exc)
        Path(work_dir).mkdir(parents=True, exist_ok=True)
        (Path(work_dir) / "error.txt").write_text(repr(exc))
        return row


def wood_tax_check(frame: pd.DataFrame, tol=1e-9) -> List[dict]:
    """Compare wood production shares between CT200 and CT74 at equal grid/gas
    settings. Each record carries both gaps so a reversal can be judged."""
    out = []
    rows = {r.scenario: r for r in frame.itertuples(index=False)}
    for name, r in rows.items():
        if not name.startswith("WWB-CT200"):
            continue
        low = rows.get(name.replace("CT200", "CT74"))
        if low is None:
            continue
        ok = r.share_WB >= low.share_WB - tol
        out.append({"high": name, "low": low.scenario, "share_WB_high": r.share_WB,
                    "share_WB_low": low.share_WB, "gap_high": r.final_gap, "gap_low": low.final_gap,
                    "holds": bool(ok)})
    return out


def run_sweep(settings: Settings, prep_dir, out_dir, names="all", jobs=1) -> tuple:
    scenarios = select_scenarios(names, settings.template)
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    tasks = [(settings.tree, s.name, str(prep_dir), str(out / s.name)) for s in scenarios]
    if jobs > 1 and len(tasks) > 1:
        with ProcessPoolExecutor(max_workers=jobs) as ex:
            rows = list(ex.map(_sweep_worker, tasks))
    else:
        rows = [_sweep_worker(t) for t in tasks]
    frame = pd.DataFrame(rows, columns=list(KPI_COLUMNS))
    frame.to_csv(out / "matrix.csv", index=False)
    checks = wood_tax_check(frame)
    lines = ["scenario matrix", "", frame[["scenario", "status", "final_gap", "lcoh", "cap_Sol", "share_WB",
                                            "share_HP", "renewable_share", "loss_TES"]].to_string(index=False), ""]
    lines.append("wood share, CT200 vs CT74 (same electricity and gas settings):")
    for c in checks:
        verdict = "holds" if c["holds"] else "REVERSED"
        lines.append(f"  {c['high']}: {c['share_WB_high']:.3f} (gap {c['gap_high']:.3f}) vs "
                     f"{c['low']}: {c['share_WB_low']:.3f} (gap {c['gap_low']:.3f}) -> {verdict}")
        if not c["holds"]:
            lines.append("    reversal within solver gaps; both incumbents are only certified to the gaps shown")
    (out / "report.txt").write_text("\n".join(lines) + "\n")
    (out / "checks.json").write_text(json.dumps(checks, indent=1))
    return frame, checks


# -- relaxation study -------------------------------------------------------------
def run_relax_study(settings: Settings, prep: PreparedData, out_dir, values=None,
                    controls: Optional[SolveControls] = None) -> pd.DataFrame:
    spec = settings.tree["relax_study"]
    values = settings.relax_values if values is None else [float(v) for v in values]
    if any(v < 0 for v in values):
        raise ValueError("relaxation temperatures must be >= 0")
    if controls is None:
        controls = replace(settings.controls, target_gap=float(spec["target_gap"]),
                           time_limit=float(spec["time_limit"]))
    sc = replace(ScenarioConfig.from_name(spec["scenario"], settings.template),
                 renewable_share_min=float(spec["renewable_share_min"]))
    rows = []
    out = Path(out_dir)
    for v in values:
        o = run_scenario(settings, sc, prep, out / f"relax_{v:g}", dt_relax=v,
                         exclude=spec.get("exclude", ()), controls=controls)
        write_outcome(o, out / f"relax_{v:g}")
        rows.append({"dt_relax_max": v, "status": o.status,
                     "objective": o.result.objective if o.result else math.nan,
                     "lcoh": o.kpi.get("lcoh", math.nan),
                     "final_gap": o.result.final_gap if o.result else math.nan,
                     "wall_seconds": o.result.wall_seconds if o.result else math.nan,
                     "cap_Sol": o.kpi.get("cap_Sol", math.nan),
                     "dissipated_solar_fraction": o.kpi.get("dissipated_solar_fraction", math.nan),
                     "violations": len(o.violations) if o.solved else math.nan})
    frame = pd.DataFrame(rows)
    out.mkdir(parents=True, exist_ok=True)
    frame.to_csv(out / "relax_study.csv", index=False)
    return frame


def objectives_non_increasing(objectives, gaps) -> bool:
    """True when each objective is no larger than its predecessor, allowing the
    later incumbent to sit anywhere within its own certified gap."""
    for prev, cur, g in zip(objectives, objectives[1:], gaps[1:]):
        if cur * (1.0 - g) > prev + 1e-6 * max(1.0, abs(prev)):
            return False
    return True
