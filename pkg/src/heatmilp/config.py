"""Single YAML tree holding every run setting.

User files only need the keys they change; everything else falls back to
:func:`default_tree`, which ``--print-defaults`` dumps in full.
"""

from __future__ import annotations

import copy
import dataclasses
from dataclasses import dataclass, field
from pathlib import Path
from typing import List, Optional

import yaml

from .domain import (BoilerPerf, ChargeWindow, EconomicParams, HeatPumpPerf, HydraulicParams,
                     PlantCatalog, SolarPerf, StoragePerf, TechKind, TechnologySpec, default_catalog)
from .ingest import SynthShape
from .milp.build import BuildOptions
from .scenarios import ScenarioConfig
from .solver import SolveControls

PERF_TYPES = {
    TechKind.GB: BoilerPerf, TechKind.WB: BoilerPerf, TechKind.HP: HeatPumpPerf,
    TechKind.SOL: SolarPerf, TechKind.TES: StoragePerf, TechKind.STES: StoragePerf,
}


class ConfigError(ValueError):
    pass


def _plain(obj):
    """Dataclass/enum/tuple tree -> YAML-friendly builtins."""
    if dataclasses.is_dataclass(obj):
        return {f.name: _plain(getattr(obj, f.name)) for f in dataclasses.fields(obj)}
    if isinstance(obj, (ChargeWindow, TechKind)):
        return obj.value
    if isinstance(obj, (list, tuple)):
        return [_plain(x) for x in obj]
    if isinstance(obj, dict):
        return {(k.value if isinstance(k, TechKind) else k): _plain(v) for k, v in obj.items()}
    return obj


def default_tree() -> dict:
    cat = default_catalog()
    techs = {}
    for k in cat.kinds:
        spec = _plain(cat[k])
        spec.pop("kind")
        techs[k.value] = spec
    controls = _plain(SolveControls())
    controls.pop("log_patterns")
    controls["format"] = "lp"
    return {
        "hydraulics": _plain(HydraulicParams()),
        "grid": {"n_periods": 2, "days_per_period": 3, "step_hours": 4, "calendar": "season"},
        "data": {
            "synthesize": 42,  # seed; set to null and fill ``files`` to use measured series
            "aggregation": "medoid",
            "max_gap_fraction": 0.02,
            "files": {"heat_load": None, "t_ext": None, "gi": None, "elec_price": None, "elec_co2": None},
            "shape": _plain(SynthShape()),
        },
        "catalog": {"technologies": techs, "wood_commit_hours": list(cat.wood_commit_hours)},
        "economics": _plain(EconomicParams()),
        "scenario": _plain(ScenarioConfig()),
        "build": _plain(BuildOptions()),
        "controls": controls,
        "relax_study": {
            "values": [0.0, 5.0, 10.0],
            "scenario": "NWB-CT200-RE-NG",
            # the study isolates the solar loop: heat pump left out, no share floor
            "exclude": ["HP"],
            "renewable_share_min": 0.0,
            # a loose incumbent need not use the dissipation slack; solve these tighter
            "target_gap": 0.01,
            "time_limit": 300.0,
        },
        "sweep": {"scenarios": "all"},
    }


def merge(base: dict, override: dict, path="") -> dict:
    out = copy.deepcopy(base)
    for key, val in (override or {}).items():
        where = f"{path}.{key}" if path else str(key)
        if key not in out:
            raise ConfigError(f"unknown config key {where!r}")
        if isinstance(out[key], dict) and out[key] and isinstance(val, dict):
            out[key] = merge(out[key], val, where)
        else:
            out[key] = val
    return out


@dataclass
class Settings:
    tree: dict
    hydraulics: HydraulicParams
    catalog: PlantCatalog
    econ: EconomicParams
    template: ScenarioConfig
    build: BuildOptions
    controls: SolveControls
    fmt: str = "lp"
    relax_values: List[float] = field(default_factory=list)

    @property
    def grid_spec(self) -> dict:
        return self.tree["grid"]

    @property
    def data(self) -> dict:
        return self.tree["data"]

    def synth_shape(self) -> SynthShape:
        return SynthShape(**self.data["shape"])


def _catalog(tree) -> PlantCatalog:
    techs = {}
    for name, spec in tree["technologies"].items():
        try:
            kind = TechKind(name)
        except ValueError as exc:
            raise ConfigError(f"unknown technology {name!r}") from exc
        if spec is None:  # explicitly removed
            continue
        spec = dict(spec)
        perf = dict(spec.pop("perf") or {})
        if "charge_window" in perf:
            perf["charge_window"] = ChargeWindow(perf["charge_window"])
        spec["capacity_bounds"] = tuple(spec["capacity_bounds"])
        techs[kind] = TechnologySpec(kind=kind, perf=PERF_TYPES[kind](**perf), **spec)
    return PlantCatalog(techs, wood_commit_hours=tuple(tree["wood_commit_hours"]))


def settings_from_tree(tree: dict) -> Settings:
    try:
        controls = dict(tree["controls"])
        fmt = controls.pop("format")
        controls["gap_milestones"] = tuple(controls["gap_milestones"])
        relax = [float(v) for v in tree["relax_study"]["values"]]
        if any(v < 0 for v in relax):
            raise ConfigError("relax_study.values must be >= 0")
        if fmt not in ("lp", "mps"):
            raise ConfigError("controls.format must be 'lp' or 'mps'")
        return Settings(
            tree=tree,
            hydraulics=HydraulicParams(**tree["hydraulics"]),
            catalog=_catalog(tree["catalog"]),
            econ=EconomicParams(**tree["economics"]),
            template=ScenarioConfig(**tree["scenario"]),
            build=BuildOptions(**tree["build"]),
            controls=SolveControls(**controls),
            fmt=fmt,
            relax_values=relax,
        )
    except ConfigError:
        raise
    except (TypeError, ValueError, KeyError) as exc:
        raise ConfigError(f"invalid configuration: {exc}") from exc


def load_settings(path=None, overrides: Optional[dict] = None) -> Settings:
    tree = default_tree()
    if path is not None:
        p = Path(path)
        if not p.exists():
            raise ConfigError(f"config file not found: {p}")
        try:
            user = yaml.safe_load(p.read_text()) or {}
        except yaml.YAMLError as exc:
            raise ConfigError(f"{p}: {exc}") from exc
        if not isinstance(user, dict):
            raise ConfigError(f"{p}: top level must be a mapping")
        tree = merge(tree, user)
    if overrides:
        tree = merge(tree, overrides)
    return settings_from_tree(tree)


def dump_defaults() -> str:
    return yaml.safe_dump(default_tree(), sort_keys=False)
