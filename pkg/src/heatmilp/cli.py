"""``heatmilp`` command line: prepare, solve, sweep, relax-study, validate."""

from __future__ import annotations

import argparse
import json
import logging
import math
import sys
import warnings
from dataclasses import replace
from pathlib import Path

from .config import ConfigError, dump_defaults, load_settings
from .milp.build import build_model
from .scenarios import ScenarioConfig, scenario_matrix
from .solution import decode_assignment, read_assignment
from .study import (ScenarioOutcome, audit_outcome, load_dataset, objectives_non_increasing,
                    prepare_dataset, run_relax_study, run_scenario, run_sweep, save_dataset,
                    scenario_catalog, write_outcome)

EXIT_OK = 0
EXIT_CONFIG = 2
EXIT_INFEASIBLE = 3
EXIT_AUDIT = 4
EXIT_SOLVER = 5

log = logging.getLogger("heatmilp")


def _settings(args):
    overrides = {}
    controls = {}
    if getattr(args, "gap", None) is not None:
        controls["target_gap"] = args.gap
    if getattr(args, "time_limit", None) is not None:
        controls["time_limit"] = args.time_limit
    if getattr(args, "solver_cmd", None):
        controls["solver_command"] = args.solver_cmd
    if getattr(args, "backend", None):
        controls["backend"] = args.backend
    if controls:
        overrides["controls"] = controls
    return load_settings(args.config, overrides)


def _dataset(args, settings):
    """Prepared dataset from ``--data-dir``, or prepared on the fly."""
    data_dir = Path(args.data_dir) if args.data_dir else Path(args.out_dir) / "dataset"
    if args.synthesize is not None or not (data_dir / "grid.json").exists():
        prep = prepare_dataset(settings, args.synthesize)
        save_dataset(prep, data_dir)
        log.info("dataset: %s", prep.diagnostics())
    return load_dataset(data_dir), data_dir


def _scenario(name, settings):
    valid = {s.name: s for s in scenario_matrix(settings.template)}
    if name not in valid:
        raise ConfigError(f"unknown scenario {name!r}; valid names: {', '.join(sorted(valid))}")
    return valid[name]


def _exit_for(out: ScenarioOutcome) -> int:
    if out.status == "infeasible":
        return EXIT_INFEASIBLE
    if not out.solved:
        return EXIT_SOLVER
    if not out.audit_clean:
        return EXIT_AUDIT
    return EXIT_OK


def _report(out: ScenarioOutcome):
    print(f"[{out.scenario}] status={out.status} {out.message}".rstrip())
    if not out.solved:
        return
    r = out.result
    print(f"  objective {r.objective:,.2f} EUR/yr, bound {r.best_bound:,.2f}, gap {r.final_gap:.4f}, "
          f"{r.wall_seconds:.1f} s")
    caps = ", ".join(f"{k.value}={v:,.3f}" for k, v in out.solution.capacity.items())
    print(f"  capacities: {caps}")
    print(out.breakdown.summary())
    print(f"  LCOH from objective {out.objective_lcoh:.4f} EUR/MWh")
    print(f"  audit: max balance residual {out.max_residual:.2e}, nonlinear within bounds "
          f"{out.nonlinear_ok}, {len(out.violations)} schedule violation(s)")
    for v in out.violations[:20]:
        print(f"    {v.rule} period {v.period} step {v.step}: {v.detail}")


def cmd_prepare(args) -> int:
    settings = _settings(args)
    prep = prepare_dataset(settings, args.synthesize)
    d = save_dataset(prep, args.data_dir or Path(args.out_dir) / "dataset")
    print(f"wrote {d / 'series.csv'} and {d / 'grid.json'}")
    print(prep.diagnostics())
    if abs(prep.energy_error) > 0.05:
        print("note: aggregated annual heat deviates from the raw series by more than 5%")
    return EXIT_OK


def cmd_solve(args) -> int:
    settings = _settings(args)
    sc = _scenario(args.scenario, settings)
    prep, _ = _dataset(args, settings)
    out_dir = Path(args.out_dir) / sc.name
    out = run_scenario(settings, sc, prep, out_dir)
    write_outcome(out, out_dir)
    _report(out)
    print(f"artifacts in {out_dir}")
    return _exit_for(out)


def cmd_sweep(args) -> int:
    settings = _settings(args)
    _, data_dir = _dataset(args, settings)
    names = args.scenario or settings.tree["sweep"]["scenarios"]
    with warnings.catch_warnings(record=True) as caught:
        warnings.simplefilter("always")
        frame, checks = run_sweep(settings, data_dir, Path(args.out_dir) / "sweep", names, args.jobs)
    for w in caught:
        print(f"warning: {w.message}")
    print((Path(args.out_dir) / "sweep" / "report.txt").read_text())
    failed = frame[~frame.status.isin(["optimal", "gap_reached", "time_limit"])]
    if len(failed):
        print(f"{len(failed)} scenario(s) without a solution: {', '.join(failed.scenario)}")
        return EXIT_SOLVER
    if (frame.violations > 0).any() or (frame.max_energy_residual > 1e-6).any():
        return EXIT_AUDIT
    return EXIT_OK


def cmd_relax_study(args) -> int:
    settings = _settings(args)
    values = args.values if args.values is not None else settings.relax_values
    if any(v < 0 for v in values):
        raise ConfigError("relaxation temperatures must be >= 0")
    prep, _ = _dataset(args, settings)
    # explicit solver flags win over the study's own gap and time limit
    explicit = args.gap is not None or args.time_limit is not None
    frame = run_relax_study(settings, prep, Path(args.out_dir) / "relax", values,
                            controls=settings.controls if explicit else None)
    print(frame.to_string(index=False))
    solved = frame[frame.objective.notna()]
    mono = objectives_non_increasing(list(solved.objective), list(solved.final_gap))
    print(f"objective non-increasing in dT_relax_max (within solver gaps): {mono}")
    if frame.objective.isna().any():
        return EXIT_INFEASIBLE if (frame.status == "infeasible").any() else EXIT_SOLVER
    return EXIT_OK


def cmd_validate(args) -> int:
    settings = _settings(args)
    run_dir = Path(args.run_dir)
    values, meta = read_assignment(run_dir / "assignment.json")
    sc = ScenarioConfig.from_name(meta["scenario"], settings.template)
    prep, _ = _dataset(args, settings)
    exclude = meta.get("exclude", ())
    options = replace(settings.build, dt_relax_max=meta.get("dt_relax_max"))
    catalog = scenario_catalog(settings.catalog, sc, exclude)
    model, _ = build_model(sc, catalog, prep.grid, prep.bundle, settings.hydraulics, settings.econ, options)
    sol = decode_assignment(values, model, prep.grid, status=meta.get("status", ""),
                            objective=meta.get("objective", math.nan),
                            final_gap=meta.get("final_gap", math.nan))
    out = audit_outcome(ScenarioOutcome(sc.name, sol.status), sol, settings, sc, catalog, prep,
                        model.meta["annual_heat"], model.meta["dt_relax_max"])
    bal = out.residual_report
    bal.residuals.to_csv(run_dir / "residuals_revalidated.csv", index=False)
    print(f"[{sc.name}] max balance residual {out.max_residual:.2e}; nonlinear within bounds "
          f"{out.nonlinear_ok}; {len(out.violations)} schedule violation(s)")
    for v in out.violations:
        print(f"  {v.rule} period {v.period} step {v.step}: {v.detail}")
    print(json.dumps({k: v for k, v in out.kpi.items() if isinstance(v, (int, float))}, indent=1, default=float))
    return EXIT_OK if out.audit_clean else EXIT_AUDIT


def build_parser() -> argparse.ArgumentParser:
    ap = argparse.ArgumentParser(prog="heatmilp", description="District-heating design MILP")
    ap.add_argument("--print-defaults", action="store_true", help="dump the default config tree and exit")
    ap.add_argument("-v", "--verbose", action="store_true")
    sub = ap.add_subparsers(dest="verb")

    def common(p, solve=True):
        p.add_argument("--config", help="YAML config file (missing keys use defaults)")
        p.add_argument("--out-dir", default="runs")
        p.add_argument("--data-dir", help="prepared dataset directory (default OUT_DIR/dataset)")
        p.add_argument("--synthesize", type=int, metavar="SEED", help="generate the synthetic year")
        if solve:
            p.add_argument("--gap", type=float, help="target relative MIP gap")
            p.add_argument("--time-limit", type=float, help="seconds per solve")
            p.add_argument("--solver-cmd", help="command template with {model} {solution} {gap} {time_limit} {threads}")
            p.add_argument("--backend", choices=("highs", "cbc"))

    p = sub.add_parser("prepare", help="aggregate input series into a representative-period dataset")
    common(p, solve=False)
    p.set_defaults(func=cmd_prepare)
    p = sub.add_parser("solve", help="solve one scenario")
    common(p)
    p.add_argument("--scenario", default="NWB-CT74-RE-NG")
    p.set_defaults(func=cmd_solve)
    p = sub.add_parser("sweep", help="solve the scenario matrix")
    common(p)
    p.add_argument("--scenario", action="append", help="restrict to these scenarios (repeatable)")
    p.add_argument("--jobs", type=int, default=1)
    p.set_defaults(func=cmd_sweep)
    p = sub.add_parser("relax-study", help="solve one setup across relaxation temperatures")
    common(p)
    p.add_argument("--values", type=float, nargs="+", help="dT_relax_max values in K")
    p.set_defaults(func=cmd_relax_study)
    p = sub.add_parser("validate", help="re-audit a solved run directory")
    common(p, solve=False)
    p.add_argument("run_dir")
    p.set_defaults(func=cmd_validate)
    return ap


def main(argv=None) -> int:
    ap = build_parser()
    args = ap.parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING, format="%(message)s")
    if args.print_defaults:
        sys.stdout.write(dump_defaults())
        return EXIT_OK
    if not args.verb:
        ap.print_help()
        return EXIT_CONFIG
    try:
        return args.func(args)
    except (ConfigError, FileNotFoundError, KeyError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except ValueError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_CONFIG


if __name__ == "__main__":
    sys.exit(main())
