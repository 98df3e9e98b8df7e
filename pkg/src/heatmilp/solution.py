"""Decoded design: capacities, schedules, temperatures and storage states."""

from __future__ import annotations

import json
import math
from dataclasses import dataclass, field
from pathlib import Path
from typing import Dict

import numpy as np
import pandas as pd

from .domain import PRODUCERS, STORAGES, TechKind
from .milp.model import MilpModel, parse_name
from .timegrid import TimeGrid

FLOW_BRANCHES = ("GB", "WB", "HP", "Sol", "bp1", "bp2", "main")
TEMP_NODES = ("HP", "Sol", "ph")


class DecodeError(ValueError):
    pass


@dataclass
class DesignSolution:
    grid: TimeGrid
    scenario: str = ""
    installed: Dict[TechKind, bool] = field(default_factory=dict)
    capacity: Dict[TechKind, float] = field(default_factory=dict)
    on: Dict[TechKind, np.ndarray] = field(default_factory=dict)
    p_prod: Dict[TechKind, np.ndarray] = field(default_factory=dict)
    p_cons: Dict[TechKind, np.ndarray] = field(default_factory=dict)
    flows: Dict[str, np.ndarray] = field(default_factory=dict)  # kg/s per branch
    charge: Dict[TechKind, np.ndarray] = field(default_factory=dict)  # kg/s
    discharge: Dict[TechKind, np.ndarray] = field(default_factory=dict)
    m_intra: Dict[TechKind, np.ndarray] = field(default_factory=dict)  # t, (P, N+1)
    m_inter: Dict[TechKind, np.ndarray] = field(default_factory=dict)  # t, (B+1,)
    theta: Dict[str, np.ndarray] = field(default_factory=dict)  # K above T_cb, decoded bits
    p_relax: np.ndarray = None
    sol_flow: Dict[str, float] = field(default_factory=dict)
    objective: float = math.nan
    status: str = ""
    final_gap: float = math.nan

    def __post_init__(self):
        if self.p_relax is None:
            self.p_relax = np.zeros(self.grid.n_steps)

    @property
    def kinds(self):
        return tuple(self.capacity)

    def energy(self, series) -> float:
        """Annual MWh of a per-step MW series."""
        return float(self.grid.step_weights() @ np.asarray(series))

    def production_shares(self) -> Dict[str, float]:
        prod = {k.value: self.energy(v) for k, v in self.p_prod.items()}
        total = sum(prod.values())
        if total <= 0:
            return {k: 0.0 for k in prod}
        return {k: v / total for k, v in prod.items()}

    def schedule_frame(self) -> pd.DataFrame:
        g = self.grid
        idx = list(g.steps())
        df = pd.DataFrame({"period": [p for p, _ in idx], "step": [t for _, t in idx]})
        for k, v in self.p_prod.items():
            df[f"P_prod_{k.value}"] = v
        for k, v in self.p_cons.items():
            df[f"P_cons_{k.value}"] = v
        for k, v in self.on.items():
            df[f"on_{k.value}"] = v
        for b, v in self.flows.items():
            df[f"mdot_{b}"] = v
        for k in self.charge:
            df[f"mdot_ch_{k.value}"] = self.charge[k]
            df[f"mdot_dch_{k.value}"] = self.discharge[k]
        for n, v in self.theta.items():
            df[f"dT_{n}"] = v
        df["P_relax"] = self.p_relax
        return df

    def design_dict(self) -> dict:
        return {
            "scenario": self.scenario,
            "status": self.status,
            "objective": self.objective,
            "final_gap": self.final_gap,
            "capacity": {k.value: self.capacity[k] for k in self.capacity},
            "installed": {k.value: bool(self.installed.get(k, False)) for k in self.capacity},
            "solar_design_flow": dict(self.sol_flow),
        }


def _array(grid, values, key, shape=None):
    return values.get(key, np.zeros(shape or grid.n_steps))


def decode_assignment(assignment: Dict[str, float], model: MilpModel, grid: TimeGrid,
                      status="", objective=math.nan, final_gap=math.nan, tol=1e-6) -> DesignSolution:
    """Turn a ``name -> value`` map into a :class:`DesignSolution` using the
    variable names of ``model``."""
    kinds = [TechKind(k) for k in model.meta.get("kinds", ())]
    missing = [v.name for v in model.vars if v.name not in assignment]
    if missing:
        raise DecodeError(f"assignment misses {len(missing)} variables, e.g. {missing[0]}")
    n, P = grid.steps_per_period, grid.n_periods
    sol = DesignSolution(grid=grid, scenario=model.meta.get("scenario", model.name),
                         status=status, objective=objective, final_gap=final_gap)
    zeros = lambda: np.zeros(grid.n_steps)  # noqa: E731
    for k in kinds:
        sol.capacity[k] = 0.0
        if k in PRODUCERS:
            sol.on[k], sol.p_prod[k] = zeros(), zeros()
            if k is not TechKind.SOL:
                sol.p_cons[k] = zeros()
        if k in STORAGES:
            sol.charge[k], sol.discharge[k] = zeros(), zeros()
            sol.m_intra[k] = np.zeros((P, n + 1))
            sol.m_inter[k] = np.zeros(len(grid.period_sequence) + 1)
    bits: Dict[str, np.ndarray] = {}
    n_bits = int(model.meta.get("n_bits", 0))

    for v in model.vars:
        fam, keys = parse_name(v.name)
        x = float(assignment[v.name])
        if abs(x) < 1e-12:
            x = 0.0
        try:
            if fam == "z":
                sol.installed[TechKind(keys[0])] = x > 0.5
            elif fam == "cap":
                sol.capacity[TechKind(keys[0])] = x
            elif fam in ("y", "P_prod", "P_cons"):
                k, p, t = TechKind(keys[0]), keys[1], keys[2]
                target = {"y": sol.on, "P_prod": sol.p_prod, "P_cons": sol.p_cons}[fam]
                target.setdefault(k, zeros())[grid.index(p, t)] = round(x) if fam == "y" else x
            elif fam == "mdot" and keys[0] in FLOW_BRANCHES:
                sol.flows.setdefault(keys[0], zeros())[grid.index(keys[1], keys[2])] = x
            elif fam in ("mdot_ch", "mdot_dch"):
                k = TechKind(keys[0])
                target = sol.charge if fam == "mdot_ch" else sol.discharge
                target[k][grid.index(keys[1], keys[2])] = x
            elif fam == "bit":
                node, p, t, i = keys
                arr = bits.setdefault(node, np.zeros((grid.n_steps, n_bits)))
                arr[grid.index(p, t), i] = round(x)
            elif fam == "P_relax":
                sol.p_relax[grid.index(keys[0], keys[1])] = x
            elif fam == "sol_flow":
                sol.sol_flow[keys[0]] = x
            elif fam == "m_intra":
                sol.m_intra[TechKind(keys[0])][keys[1], keys[2]] = x
            elif fam == "m_inter":
                sol.m_inter[TechKind(keys[0])][keys[1]] = x
        except (KeyError, IndexError, ValueError) as exc:
            raise DecodeError(f"variable {v.name} does not fit the grid/catalog: {exc}") from exc

    weights = 2.0 ** np.arange(n_bits)
    for node in TEMP_NODES:
        if node in bits:
            sol.theta[node] = bits[node] @ weights
    for k in kinds:
        sol.installed.setdefault(k, sol.capacity[k] > tol)
    return sol


def decode_solution(result, model: MilpModel, grid: TimeGrid) -> DesignSolution:
    """Decode a :class:`~heatmilp.solver.SolveResult`."""
    if not result.has_solution:
        raise DecodeError(f"no solution to decode (status {result.status})")
    return decode_assignment(result.assignment, model, grid, status=result.status,
                             objective=result.objective, final_gap=result.final_gap)


def write_assignment(path, assignment: Dict[str, float], meta=None):
    Path(path).write_text(json.dumps({"meta": meta or {}, "values": assignment}, indent=1, sort_keys=True))


def read_assignment(path):
    d = json.loads(Path(path).read_text())
    return d["values"], d.get("meta", {})
