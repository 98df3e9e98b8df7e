"""Solver-agnostic MILP container with a small linear-expression algebra."""

from __future__ import annotations

import math
import re
from collections import Counter
from dataclasses import dataclass, field
from typing import Dict, List, Optional

import numpy as np

BINARY = "B"
CONTINUOUS = "C"
SENSES = ("<=", "=", ">=")

_NAME_RE = re.compile(r"^([^\[]+)(?:\[(.*)\])?$")


def vname(family, *keys) -> str:
    if not keys:
        return family
    return f"{family}[{','.join(str(k) for k in keys)}]"


def parse_name(name):
    """Split ``fam[a,1,2]`` into ``("fam", ("a", 1, 2))``; integer keys come back as int."""
    m = _NAME_RE.match(name)
    if m is None:
        return name, ()
    family, inner = m.group(1), m.group(2)
    if not inner:
        return family, ()
    keys = []
    for k in inner.split(","):
        keys.append(int(k) if re.fullmatch(r"-?\d+", k) else k)
    return family, tuple(keys)


class LinExpr:
    __slots__ = ("terms", "const")

    def __init__(self, terms=None, const=0.0):
        self.terms: Dict["Var", float] = dict(terms) if terms else {}
        self.const = float(const)

    @staticmethod
    def of(x) -> "LinExpr":
        if isinstance(x, LinExpr):
            return x
        if isinstance(x, Var):
            return LinExpr({x: 1.0})
        return LinExpr(const=float(x))

    def copy(self):
        return LinExpr(self.terms, self.const)

    def add(self, other, scale=1.0) -> "LinExpr":
        """In-place ``self += scale * other``."""
        if isinstance(other, Var):
            self.terms[other] = self.terms.get(other, 0.0) + scale
        elif isinstance(other, LinExpr):
            for v, c in other.terms.items():
                self.terms[v] = self.terms.get(v, 0.0) + scale * c
            self.const += scale * other.const
        else:
            self.const += scale * float(other)
        return self

    def __add__(self, other):
        return self.copy().add(other)

    __radd__ = __add__

    def __sub__(self, other):
        return self.copy().add(other, -1.0)

    def __rsub__(self, other):
        return LinExpr.of(other).copy().add(self, -1.0)

    def __mul__(self, k):
        if not isinstance(k, (int, float, np.floating, np.integer)):
            return NotImplemented
        k = float(k)
        return LinExpr({v: c * k for v, c in self.terms.items()}, self.const * k)

    __rmul__ = __mul__

    def __truediv__(self, k):
        return self * (1.0 / float(k))

    def __neg__(self):
        return self * -1.0

    def value(self, values) -> float:
        """Evaluate with ``values`` indexed by variable id."""
        return self.const + sum(c * values[v.id] for v, c in self.terms.items())

    def __repr__(self):
        parts = [f"{c:+g}*{v.name}" for v, c in self.terms.items()]
        return " ".join(parts + [f"{self.const:+g}"])


def quicksum(items) -> LinExpr:
    out = LinExpr()
    for it in items:
        out.add(it)
    return out


@dataclass(eq=False)
class Var:
    id: int
    name: str
    kind: str = CONTINUOUS
    lb: float = 0.0
    ub: float = math.inf

    def __hash__(self):
        return self.id

    @property
    def is_binary(self):
        return self.kind == BINARY

    @property
    def fixed(self):
        return self.lb == self.ub

    def __add__(self, other):
        return LinExpr.of(self) + other

    __radd__ = __add__

    def __sub__(self, other):
        return LinExpr.of(self) - other

    def __rsub__(self, other):
        return LinExpr.of(other) - self

    def __mul__(self, k):
        return LinExpr.of(self) * k

    __rmul__ = __mul__

    def __neg__(self):
        return LinExpr.of(self) * -1.0

    def __truediv__(self, k):
        return LinExpr.of(self) / k


@dataclass
class Constraint:
    name: str
    terms: Dict[Var, float]
    sense: str
    rhs: float

    @property
    def family(self):
        """Name stem without indices; product rows keep their role suffix (``w:lb``)."""
        base, _, role = self.name.partition(":")
        fam = parse_name(base.split("#")[0])[0]
        return f"{fam}:{role}" if role else fam

    def activity(self, values):
        return sum(c * values[v.id] for v, c in self.terms.items())

    def violation(self, values):
        a = self.activity(values)
        if self.sense == "<=":
            return max(0.0, a - self.rhs)
        if self.sense == ">=":
            return max(0.0, self.rhs - a)
        return abs(a - self.rhs)


@dataclass
class MilpModel:
    name: str = "model"
    vars: List[Var] = field(default_factory=list)
    constrs: List[Constraint] = field(default_factory=list)
    objective: LinExpr = field(default_factory=LinExpr)
    meta: dict = field(default_factory=dict)
    free_vars: set = field(default_factory=set)
    _by_name: Dict[str, Var] = field(default_factory=dict, repr=False)
    _cnames: set = field(default_factory=set, repr=False)

    # -- construction -----------------------------------------------------
    def add_var(self, name, kind=CONTINUOUS, lb=0.0, ub=math.inf, free=False) -> Var:
        if name in self._by_name:
            raise ValueError(f"duplicate variable name {name!r}")
        if kind == BINARY:
            lb, ub = max(0.0, lb), min(1.0, ub)
        if lb > ub:
            raise ValueError(f"{name}: lower bound {lb} above upper bound {ub}")
        v = Var(len(self.vars), name, kind, float(lb), float(ub))
        self.vars.append(v)
        self._by_name[name] = v
        if free:
            self.free_vars.add(v.id)
        return v

    def binary(self, name, fix=None) -> Var:
        if fix is None:
            return self.add_var(name, BINARY, 0.0, 1.0)
        return self.add_var(name, BINARY, float(fix), float(fix))

    def add_constr(self, lhs, sense, rhs=0.0, name=None) -> Constraint:
        if sense not in SENSES:
            raise ValueError(f"unknown sense {sense!r}")
        expr = LinExpr.of(lhs) - rhs
        if name is None:
            name = f"c{len(self.constrs)}"
        if name in self._cnames:
            raise ValueError(f"duplicate constraint name {name!r}")
        terms = {v: c for v, c in expr.terms.items() if c != 0.0}
        con = Constraint(name, terms, sense, -expr.const)
        self.constrs.append(con)
        self._cnames.add(name)
        return con

    def set_objective(self, expr):
        self.objective = LinExpr.of(expr)

    # -- queries ----------------------------------------------------------
    def var(self, name) -> Var:
        return self._by_name[name]

    def get(self, name) -> Optional[Var]:
        return self._by_name.get(name)

    def __contains__(self, name):
        return name in self._by_name

    @property
    def n_binaries(self):
        return sum(v.is_binary for v in self.vars)

    @property
    def n_continuous(self):
        return sum(not v.is_binary for v in self.vars)

    def census(self) -> dict:
        fam_vars = Counter(parse_name(v.name)[0] for v in self.vars)
        fam_bins = Counter(parse_name(v.name)[0] for v in self.vars if v.is_binary)
        fam_cons = Counter(c.family for c in self.constrs)
        return {
            "variables": len(self.vars),
            "binaries": self.n_binaries,
            "free_binaries": sum(v.is_binary and not v.fixed for v in self.vars),
            "continuous": self.n_continuous,
            "constraints": len(self.constrs),
            "var_families": dict(fam_vars),
            "binary_families": dict(fam_bins),
            "constraint_families": dict(fam_cons),
        }

    def validate(self):
        """Check the container invariants; raise ValueError on the first breach."""
        declared = set(id(v) for v in self.vars)
        names = set()
        for v in self.vars:
            if v.name in names:
                raise ValueError(f"duplicate variable {v.name}")
            names.add(v.name)
            if v.id not in self.free_vars and not (math.isfinite(v.lb) and math.isfinite(v.ub)):
                raise ValueError(f"variable {v.name} has an infinite bound and is not tagged free")
        for c in self.constrs:
            for v in c.terms:
                if id(v) not in declared:
                    raise ValueError(f"constraint {c.name} uses undeclared variable {v.name}")
        for v in self.objective.terms:
            if id(v) not in declared:
                raise ValueError(f"objective uses undeclared variable {v.name}")

    # -- evaluation -------------------------------------------------------
    def vector(self, assignment, default=None) -> np.ndarray:
        """Dense value vector from a name -> value mapping."""
        x = np.empty(len(self.vars))
        for v in self.vars:
            if v.name in assignment:
                x[v.id] = assignment[v.name]
            elif default is not None:
                x[v.id] = default
            else:
                raise KeyError(f"no value for {v.name}")
        return x

    def objective_value(self, values) -> float:
        return self.objective.value(values)

    def violations(self, values, tol=1e-6):
        """List of ``(name, amount)`` for violated constraints, bounds and integrality."""
        out = []
        for v in self.vars:
            x = values[v.id]
            if x < v.lb - tol or x > v.ub + tol:
                out.append((f"bound:{v.name}", max(v.lb - x, x - v.ub)))
            if v.is_binary and min(abs(x), abs(x - 1)) > tol:
                out.append((f"integrality:{v.name}", min(abs(x), abs(x - 1))))
        for c in self.constrs:
            viol = c.violation(values)
            if viol > tol * max(1.0, abs(c.rhs)):
                out.append((c.name, viol))
        return out

    def matrices(self):
        """Sparse ``(c, A, senses, rhs, lb, ub, integrality)`` view of the model."""
        from scipy import sparse

        n = len(self.vars)
        c = np.zeros(n)
        for v, k in self.objective.terms.items():
            c[v.id] += k
        rows, cols, vals = [], [], []
        for i, con in enumerate(self.constrs):
            for v, k in con.terms.items():
                rows.append(i)
                cols.append(v.id)
                vals.append(k)
        A = sparse.csr_matrix((vals, (rows, cols)), shape=(len(self.constrs), n))
        senses = np.array([con.sense for con in self.constrs])
        rhs = np.array([con.rhs for con in self.constrs])
        lb = np.array([v.lb for v in self.vars])
        ub = np.array([v.ub for v in self.vars])
        integrality = np.array([v.is_binary for v in self.vars], dtype=int)
        return c, A, senses, rhs, lb, ub, integrality
