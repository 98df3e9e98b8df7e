"""LP and fixed-format MPS emission.

Names are mangled into a conservative alphabet (``[A-Za-z0-9_]``, leading letter)
and the original names are kept in a JSON sidecar so solution files can be
mapped back. Output is deterministic: same model, same bytes.
"""

from __future__ import annotations

import hashlib
import json
import re
from pathlib import Path

from .model import MilpModel

LP_NAME_MAX = 255
LP_LINE_MAX = 510
MPS_NAME_MAX = 8
_BAD = re.compile(r"[^A-Za-z0-9_]")


def _digest(name, n=10):
    return hashlib.sha1(name.encode()).hexdigest()[:n]


def mangle_names(names, max_len=LP_NAME_MAX, prefix="x"):
    """Map original names to unique, format-safe names (order-preserving)."""
    out = {}
    used = set()
    for name in names:
        s = _BAD.sub("_", name)
        if not s or not s[0].isalpha():
            s = prefix + s
        if len(s) > max_len:
            s = s[: max_len - 11] + "_" + _digest(name)
        if s in used:
            s = s[: max_len - 11] + "_" + _digest(name)
            k = 0
            while s in used:
                k += 1
                s = f"{s[: max_len - 16]}_{_digest(name + str(k), 4)}"
        used.add(s)
        out[name] = s
    return out


def _short_codes(n, letter):
    width = max(1, len(str(max(n - 1, 0))))
    if width + 1 > MPS_NAME_MAX:
        raise ValueError("too many rows/columns for fixed MPS names")
    return [f"{letter}{i:0{width}d}" for i in range(n)]


def _num(x) -> str:
    return format(float(x), ".17g")


class NameMap:
    def __init__(self, variables: dict, constraints: dict, objective_constant=0.0):
        self.variables = variables  # original -> file
        self.constraints = constraints
        self.objective_constant = objective_constant

    def to_original(self):
        return {v: k for k, v in self.variables.items()}

    def dump(self, path):
        Path(path).write_text(json.dumps(
            {"variables": self.variables, "constraints": self.constraints,
             "objective_constant": self.objective_constant}, indent=1, sort_keys=True))

    @classmethod
    def load(cls, path):
        d = json.loads(Path(path).read_text())
        return cls(d["variables"], d["constraints"], d.get("objective_constant", 0.0))


def _wrap_terms(head, parts, tail):
    lines, cur = [], head
    for part in parts:
        if len(cur) + len(part) + 1 > LP_LINE_MAX:
            lines.append(cur)
            cur = "   "
        cur += " " + part
    if len(cur) + len(tail) + 1 > LP_LINE_MAX:
        lines.append(cur)
        cur = "   "
    lines.append(cur + (" " + tail if tail else ""))
    return lines


def _lp_terms(terms, names):
    parts = []
    for v, c in sorted(terms.items(), key=lambda kv: kv[0].id):
        sign = "-" if c < 0 else "+"
        parts.append(f"{sign} {_num(abs(c))} {names[v.name]}")
    return parts


def write_lp(model: MilpModel, path) -> NameMap:
    model.validate()
    vnames = mangle_names([v.name for v in model.vars], prefix="x")
    cnames = mangle_names([c.name for c in model.constrs], prefix="c")
    const = model.objective.const
    lines = [f"\\ {model.name}", "Minimize"]
    parts = _lp_terms(model.objective.terms, vnames)
    if not parts and model.vars:
        parts = [f"0 {vnames[model.vars[0].name]}"]
    lines += _wrap_terms(" obj:", parts, "")
    lines.append("Subject To")
    for c in model.constrs:
        parts = _lp_terms(c.terms, vnames)
        if not parts:
            # constant row: keep it visible so an infeasible constant is not lost
            if model.vars:
                parts = [f"0 {vnames[model.vars[0].name]}"]
        sense = {"<=": "<=", ">=": ">=", "=": "="}[c.sense]
        lines += _wrap_terms(f" {cnames[c.name]}:", parts, f"{sense} {_num(c.rhs)}")
    lines.append("Bounds")
    for v in model.vars:
        n = vnames[v.name]
        if v.id in model.free_vars and v.lb == float("-inf") and v.ub == float("inf"):
            lines.append(f" {n} free")
        elif v.lb == v.ub:
            lines.append(f" {n} = {_num(v.lb)}")
        else:
            lo = "-inf" if v.lb == float("-inf") else _num(v.lb)
            hi = "+inf" if v.ub == float("inf") else _num(v.ub)
            lines.append(f" {lo} <= {n} <= {hi}")
    bins = [vnames[v.name] for v in model.vars if v.is_binary]
    if bins:
        lines.append("General")
        cur = ""
        for b in bins:
            if len(cur) + len(b) + 1 > LP_LINE_MAX:
                lines.append(cur)
                cur = ""
            cur += " " + b
        lines.append(cur)
    lines.append("End")
    Path(path).write_text("\n".join(lines) + "\n")
    return NameMap(vnames, cnames, const)


def write_mps(model: MilpModel, path) -> NameMap:
    """Fixed-format MPS (fields at columns 2, 5, 15, 25, 40, 50)."""
    model.validate()
    vcodes = dict(zip([v.name for v in model.vars], _short_codes(len(model.vars), "C")))
    ccodes = dict(zip([c.name for c in model.constrs], _short_codes(len(model.constrs), "R")))
    obj = "OBJ"

    def num(x):
        s = format(float(x), ".12g")
        if len(s) > 12:
            s = format(float(x), ".6e")
        return s

    def entry(col, row, val):
        return f"    {col:<8}  {row:<8}  {num(val):>12}"

    lines = [f"NAME          {model.name[:8]}", "ROWS", f" N  {obj}"]
    for c in model.constrs:
        lines.append(f" {dict({'<=': 'L', '>=': 'G', '=': 'E'})[c.sense]}  {ccodes[c.name]}")
    lines.append("COLUMNS")
    by_var = {v.id: [] for v in model.vars}
    for c in model.constrs:
        for v, k in c.terms.items():
            by_var[v.id].append((ccodes[c.name], k))
    in_int = False
    for v in model.vars:
        if v.is_binary and not in_int:
            lines.append("    MARKER                 'MARKER'                 'INTORG'")
            in_int = True
        elif not v.is_binary and in_int:
            lines.append("    MARKER                 'MARKER'                 'INTEND'")
            in_int = False
        code = vcodes[v.name]
        k = model.objective.terms.get(v, 0.0)
        if k != 0.0:
            lines.append(entry(code, obj, k))
        for row, coef in by_var[v.id]:
            lines.append(entry(code, row, coef))
        if k == 0.0 and not by_var[v.id]:
            lines.append(entry(code, obj, 0.0))
    if in_int:
        lines.append("    MARKER                 'MARKER'                 'INTEND'")
    lines.append("RHS")
    for c in model.constrs:
        if c.rhs != 0.0:
            lines.append(entry("RHS", ccodes[c.name], c.rhs))
    lines.append("BOUNDS")
    for v in model.vars:
        code = vcodes[v.name]
        if v.lb == v.ub:
            lines.append(f" FX BND       {code:<8}  {num(v.lb):>12}")
            continue
        if v.lb == float("-inf"):
            lines.append(f" MI BND       {code:<8}")
        elif v.lb != 0.0:
            lines.append(f" LO BND       {code:<8}  {num(v.lb):>12}")
        if v.ub != float("inf"):
            lines.append(f" UP BND       {code:<8}  {num(v.ub):>12}")
        elif v.lb == float("-inf"):
            lines.append(f" PL BND       {code:<8}")
    lines.append("ENDATA")
    Path(path).write_text("\n".join(lines) + "\n")
    return NameMap(vcodes, ccodes, model.objective.const)


def emit_model(model: MilpModel, fmt, path) -> NameMap:
    """Write ``model`` as ``fmt`` ("lp" or "mps") plus a ``<path>.names.json`` sidecar."""
    fmt = str(fmt).lower()
    writers = {"lp": write_lp, "mps": write_mps}
    if fmt not in writers:
        raise ValueError(f"unknown model format {fmt!r}; use 'lp' or 'mps'")
    names = writers[fmt](model, path)
    names.dump(str(path) + ".names.json")
    return names
