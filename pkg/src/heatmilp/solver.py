"""External MILP solver bridge (file exchange) with gap/time controls.

Two built-in backends run as separate processes: HiGHS (through
:mod:`heatmilp.highs_runner`, the default) and CBC. Any other solver can be
plugged in through a command template whose placeholders are ``{model}``,
``{solution}``, ``{gap}``, ``{time_limit}`` and ``{threads}``. Solutions are read
either in CBC's native format or as plain ``name value`` lines.
"""

from __future__ import annotations

import math
import re
import shlex
import shutil
import subprocess
import sys
import tempfile
import time
from dataclasses import dataclass, field
from pathlib import Path
from typing import Dict, List, Optional, Sequence

from .milp.model import MilpModel
from .milp.writers import NameMap, emit_model

CBC_TEMPLATE = "{cbc} {model} ratioGap {gap} sec {time_limit} threads {threads} solve solu {solution}"
HIGHS_TEMPLATE = ("{python} -m heatmilp.highs_runner {model} {solution} "
                  "--gap {gap} --time-limit {time_limit} --threads {threads}")
BACKENDS = ("highs", "cbc")

# log lines carrying (objective, bound, seconds): HiGHS B&B table, then CBC
DEFAULT_PATTERNS = (
    r"^\s*[A-Za-z]?\s+\d+\s+\d+\s+\d+\s+[0-9.]+%\s+(?P<bound>[-+0-9.eE]+|-?inf)\s+"
    r"(?P<obj>[-+0-9.eE]+|inf)\s+\S+.*?(?P<secs>[0-9.]+)s\s*$",
    r"Cbc0010I After \d+ nodes, \d+ on tree, (?P<obj>[-+0-9.eE]+) best solution, "
    r"best possible (?P<bound>[-+0-9.eE]+) \((?P<secs>[0-9.]+) seconds\)",
    r"Cbc0012I Integer solution of (?P<obj>[-+0-9.eE]+) found .*\((?P<secs>[0-9.]+) seconds\)",
    r"Cbc0004I Integer solution of (?P<obj>[-+0-9.eE]+) found after .*\((?P<secs>[0-9.]+) seconds\)",
)

STATUSES = ("optimal", "gap_reached", "time_limit", "infeasible", "error")


class SolverError(RuntimeError):
    pass


def find_cbc() -> Optional[str]:
    """CBC on PATH, else the binary bundled with PuLP."""
    path = shutil.which("cbc")
    if path:
        return path
    try:
        import pulp

        cmd = pulp.apis.PULP_CBC_CMD()
        if cmd.available():
            return cmd.path
    except Exception:  # pragma: no cover - pulp missing or broken
        return None
    return None


@dataclass(frozen=True)
class SolveControls:
    target_gap: float = 0.10
    time_limit: float = 600.0
    gap_milestones: Sequence[float] = (0.30, 0.25, 0.13, 0.105)
    solver_command: Optional[str] = None  # template; overrides backend
    backend: str = "highs"
    work_dir: Optional[str] = None
    threads: int = 1
    log_patterns: Sequence[str] = DEFAULT_PATTERNS
    keep_files: bool = True

    def __post_init__(self):
        if self.backend not in BACKENDS:
            raise ValueError(f"unknown backend {self.backend!r}; choose from {BACKENDS}")
        if not 0 < self.target_gap < 1:
            raise ValueError("target_gap must lie in (0, 1)")
        if not self.time_limit > 0:
            raise ValueError("time_limit must be positive")
        ms = list(self.gap_milestones)
        if any(b >= a for a, b in zip(ms, ms[1:])):
            raise ValueError("gap milestones must be strictly descending")


@dataclass
class Milestone:
    gap: float  # milestone threshold crossed
    seconds: float
    objective: float
    bound: float


@dataclass
class SolveResult:
    status: str
    objective: float = math.nan
    best_bound: float = math.nan
    final_gap: float = math.nan
    assignment: Dict[str, float] = field(default_factory=dict)
    milestone_snapshots: List[Milestone] = field(default_factory=list)
    trajectory: List[tuple] = field(default_factory=list)  # (seconds, objective, bound)
    wall_seconds: float = 0.0
    log: str = ""
    message: str = ""

    @property
    def has_solution(self):
        return self.status in ("optimal", "gap_reached", "time_limit") and bool(self.assignment)


def relative_gap(obj, bound) -> float:
    if not (math.isfinite(obj) and math.isfinite(bound)):
        return math.inf
    if obj == bound:
        return 0.0
    return abs(obj - bound) / max(abs(obj), 1e-10)


def read_solution(path, names: NameMap):
    """Parse a solution file; returns ``(header_status, objective, values)``.

    Accepts CBC's ``index name value reduced_cost`` rows and plain ``name value``
    rows. Variables missing from the file are zero.
    """
    back = names.to_original()
    text = Path(path).read_text()
    lines = text.splitlines()
    if not lines:
        raise SolverError(f"empty solution file {path}")
    header = lines[0].strip()
    status, obj = "unknown", math.nan
    body = lines
    low = header.lower()
    if "objective value" in low or low.startswith(("optimal", "infeasible", "integer infeasible", "stopped", "unbounded")):
        body = lines[1:]
        m = re.search(r"objective value\s+([-+0-9.eE]+)", header)
        if m:
            obj = float(m.group(1))
        if low.startswith("optimal"):
            status = "optimal"
        elif "infeasible" in low:
            status = "infeasible"
        elif low.startswith("stopped"):
            status = "stopped"
        elif low.startswith("unbounded"):
            status = "unbounded"
    values = {}
    for ln in body:
        parts = ln.replace("**", " ").split()
        if not parts:
            continue
        if len(parts) >= 3 and parts[0].isdigit():
            name, val = parts[1], parts[2]
        elif len(parts) == 2:
            name, val = parts
        else:
            raise SolverError(f"unparseable solution line: {ln!r}")
        if name not in back:
            raise SolverError(f"solution names unknown variable {name!r}")
        try:
            values[back[name]] = float(val)
        except ValueError as exc:
            raise SolverError(f"bad value in solution line: {ln!r}") from exc
    return status, obj, values


def parse_log(log: str, patterns=DEFAULT_PATTERNS):
    """Best-effort trajectory ``[(seconds, objective, bound)]`` plus final bound."""
    traj = []
    regs = [re.compile(p) for p in patterns]
    last_bound = math.nan
    for ln in log.splitlines():
        for r in regs:
            m = r.search(ln)
            if not m:
                continue
            d = m.groupdict()
            obj = float(d["obj"]) if d.get("obj") else math.nan
            if d.get("bound"):
                last_bound = float(d["bound"])
            secs = float(d.get("secs") or "nan")
            traj.append((secs, obj, last_bound))
            break
    final_bound = math.nan
    m = re.search(r"Lower bound:\s+([-+0-9.eE]+)", log)
    if m:
        final_bound = float(m.group(1))
    return traj, final_bound


def milestones_from(traj, thresholds) -> List[Milestone]:
    out = []
    pending = list(thresholds)
    for secs, obj, bound in traj:
        g = relative_gap(obj, bound)
        while pending and g <= pending[0]:
            out.append(Milestone(pending.pop(0), secs, obj, bound))
    return out


def _command(controls: SolveControls, model_path, sol_path):
    template = controls.solver_command
    if template is None and controls.backend == "cbc":
        cbc = find_cbc()
        if cbc is None:
            raise SolverError("no CBC binary found; pass --solver-cmd")
        template = CBC_TEMPLATE.replace("{cbc}", shlex.quote(cbc))
    elif template is None:
        template = HIGHS_TEMPLATE.replace("{python}", shlex.quote(sys.executable))
    cmd = template.format(model=shlex.quote(str(model_path)), solution=shlex.quote(str(sol_path)),
                          gap=controls.target_gap, time_limit=controls.time_limit,
                          threads=controls.threads)
    return shlex.split(cmd)


def solve(model_path, names: NameMap, controls: SolveControls, expected_vars=None) -> SolveResult:
    """Run the external solver on an already emitted model file."""
    model_path = Path(model_path)
    sol_path = model_path.with_suffix(".sol")
    if sol_path.exists():
        sol_path.unlink()
    cmd = _command(controls, model_path, sol_path)
    t0 = time.monotonic()
    try:
        proc = subprocess.run(cmd, capture_output=True, text=True,
                              timeout=controls.time_limit * 2 + 60)
    except FileNotFoundError as exc:
        return SolveResult("error", message=f"solver command not found: {exc}")
    except subprocess.TimeoutExpired:
        return SolveResult("error", message="solver did not return after the time limit")
    wall = time.monotonic() - t0
    log = proc.stdout + proc.stderr
    (model_path.parent / (model_path.stem + ".log")).write_text(log)
    if proc.returncode != 0 and not sol_path.exists():
        return SolveResult("error", log=log, wall_seconds=wall,
                           message=f"solver exited with code {proc.returncode}")
    if not sol_path.exists():
        return SolveResult("error", log=log, wall_seconds=wall, message="solver wrote no solution file")

    try:
        header, obj, values = read_solution(sol_path, names)
    except SolverError as exc:
        return SolveResult("error", log=log, wall_seconds=wall, message=str(exc))
    traj, bound = parse_log(log, controls.log_patterns)

    if header == "infeasible":
        return SolveResult("infeasible", log=log, wall_seconds=wall, trajectory=traj,
                           message="solver proved the model infeasible")
    if header == "unbounded":
        return SolveResult("error", log=log, wall_seconds=wall, message="model unbounded")
    if header == "stopped" and not math.isfinite(obj):
        return SolveResult("time_limit", log=log, wall_seconds=wall, trajectory=traj,
                           message="time limit reached without an incumbent")
    if header == "unknown" and not values:
        return SolveResult("error", log=log, wall_seconds=wall, message="solution file carries no status")

    if expected_vars is not None:
        values = {n: values.get(n, 0.0) for n in expected_vars}
    if math.isfinite(obj):
        obj += names.objective_constant
    if math.isfinite(bound):
        bound += names.objective_constant
    elif header == "optimal":
        bound = obj  # pure LP or proven optimum without a reported bound
    gap = relative_gap(obj, bound)
    if header == "optimal":
        status = "optimal" if gap <= 1e-9 else "gap_reached"
    else:
        status = "gap_reached" if gap <= controls.target_gap else "time_limit"
    if not controls.keep_files:
        for p in (model_path, sol_path):
            p.unlink(missing_ok=True)
    return SolveResult(status, objective=obj, best_bound=bound, final_gap=gap, assignment=values,
                       milestone_snapshots=milestones_from(traj, controls.gap_milestones),
                       trajectory=traj, wall_seconds=wall, log=log)


def solve_model(model: MilpModel, controls: SolveControls, fmt="lp", stem="model") -> SolveResult:
    """Emit ``model`` into the work dir and solve it."""
    work = Path(controls.work_dir or tempfile.mkdtemp(prefix="heatmilp-"))
    work.mkdir(parents=True, exist_ok=True)
    path = work / f"{stem}.{fmt}"
    names = emit_model(model, fmt, path)
    res = solve(path, names, controls, expected_vars=[v.name for v in model.vars])
    if res.has_solution:
        # a solver may report one objective and write another point (seen with CBC
        # when postprocessing fails); never hand such a point downstream
        recomputed = model.objective_value(model.vector(res.assignment, default=0.0))
        if abs(recomputed - res.objective) > 1e-6 * max(1.0, abs(res.objective)):
            res.status = "error"
            res.message = (f"solution file inconsistent with reported objective "
                           f"({recomputed:.6g} vs {res.objective:.6g})")
            res.assignment = {}
    return res
