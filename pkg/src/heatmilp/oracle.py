"""Exhaustive ground truth for tiny models.

Every assignment of the free binaries is visited. Assignments that break a
constraint made only of binaries are discarded up front; every other leaf is
a plain LP in the continuous variables, solved exactly with scipy's HiGHS LP.
Meant for test instances only.
"""

from __future__ import annotations

import itertools
import math
from dataclasses import dataclass
from typing import Dict, Optional

import numpy as np
from scipy.optimize import linprog

from .milp.model import MilpModel


class OracleLimitError(ValueError):
    pass


@dataclass
class OracleResult:
    objective: Optional[float]  # None when no leaf is feasible
    assignment: Optional[Dict[str, float]]
    leaves: int
    lp_solved: int
    feasible_leaves: int

    @property
    def found(self):
        return self.objective is not None


def enumerate_oracle(model: MilpModel, max_binaries=20, max_continuous=None, tol=1e-9) -> OracleResult:
    """Exact optimum of ``model`` by enumerating its free binaries."""
    model.validate()
    c, A, senses, rhs, lb, ub, integ = model.matrices()
    A = A.tocsr()
    free_bins = [v.id for v in model.vars if v.is_binary and v.lb < v.ub]
    if len(free_bins) > max_binaries:
        raise OracleLimitError(f"{len(free_bins)} free binaries exceed the limit of {max_binaries}")
    n_cont = int((integ == 0).sum())
    if max_continuous is not None and n_cont > max_continuous:
        raise OracleLimitError(f"{n_cont} continuous variables exceed the limit of {max_continuous}")
    if not (np.isfinite(lb).all() and np.isfinite(ub).all()):
        raise OracleLimitError("oracle needs finite bounds on every variable")

    is_bin = integ.astype(bool)
    # rows touching only binaries can be checked without an LP
    cont_cols = ~is_bin
    touches_cont = np.asarray((abs(A[:, cont_cols]) > 0).sum(axis=1)).ravel() > 0
    bin_rows = np.flatnonzero(~touches_cont)
    fixed_bin = is_bin.copy()
    fixed_bin[free_bins] = False
    base_act = A[bin_rows][:, np.flatnonzero(fixed_bin)] @ lb[fixed_bin] if bin_rows.size else np.zeros(0)
    A_free = A[bin_rows][:, free_bins].toarray() if bin_rows.size else np.zeros((0, len(free_bins)))

    le, ge, eq = senses == "<=", senses == ">=", senses == "="
    rows_ub = np.flatnonzero(le | ge)
    sign = np.where(le[rows_ub], 1.0, -1.0)
    A_ub = A[rows_ub].multiply(sign[:, None]).tocsr() if rows_ub.size else None
    b_ub = rhs[rows_ub] * sign if rows_ub.size else None
    rows_eq = np.flatnonzero(eq)
    A_eq = A[rows_eq] if rows_eq.size else None
    b_eq = rhs[rows_eq] if rows_eq.size else None

    best_obj, best_x = math.inf, None
    leaves = solved = feasible = 0
    for combo in itertools.product((0.0, 1.0), repeat=len(free_bins)):
        leaves += 1
        vals = np.asarray(combo)
        if bin_rows.size:
            act = base_act + A_free @ vals
            r, s = rhs[bin_rows], senses[bin_rows]
            bad = ((s == "<=") & (act > r + 1e-9)) | ((s == ">=") & (act < r - 1e-9)) | \
                  ((s == "=") & (np.abs(act - r) > 1e-9))
            if bad.any():
                continue
        lo, hi = lb.copy(), ub.copy()
        lo[free_bins] = vals
        hi[free_bins] = vals
        solved += 1
        res = linprog(c, A_ub=A_ub, b_ub=b_ub, A_eq=A_eq, b_eq=b_eq,
                      bounds=np.column_stack([lo, hi]), method="highs")
        if res.status != 0:
            continue
        feasible += 1
        if res.fun < best_obj - tol:
            best_obj, best_x = float(res.fun), res.x
    if best_x is None:
        return OracleResult(None, None, leaves, solved, 0)
    obj = best_obj + model.objective.const
    return OracleResult(obj, {v.name: float(best_x[v.id]) for v in model.vars}, leaves, solved, feasible)
