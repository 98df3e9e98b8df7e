"""Linearization primitives: power-of-two temperature bits, binary x continuous
products, and affine fits of performance curves."""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import List, Sequence, Tuple

import numpy as np

from .milp.model import LinExpr, MilpModel, Var


@dataclass(frozen=True)
class BitDiscretization:
    nt: int
    range_max: float
    step: float = 1.0

    @property
    def weights(self) -> Tuple[int, ...]:
        return tuple(2 ** i for i in range(self.nt + 1))

    @property
    def n_bits(self) -> int:
        return self.nt + 1

    @property
    def max_representable(self) -> int:
        return 2 ** (self.nt + 1) - 1

    def decode(self, bits) -> float:
        return float(sum(w * round(b) for w, b in zip(self.weights, bits)))


def make_discretization(dt_max) -> BitDiscretization:
    """Smallest bit set ``{2^i, 0 <= i <= NT}`` with ``2^(NT+1) >= dt_max``, 1 K step."""
    if dt_max < 1:
        raise ValueError("temperature range must be at least 1 K")
    nt = max(0, math.ceil(math.log2(dt_max)) - 1)
    # guard against floating-point error in log2
    while 2 ** (nt + 1) < dt_max:
        nt += 1
    while nt > 0 and 2 ** nt >= dt_max:
        nt -= 1
    return BitDiscretization(nt=nt, range_max=float(dt_max))


def encode_value(d: BitDiscretization, dt) -> Tuple[int, ...]:
    """Bits of ``round(dt)``, least significant first."""
    if not 0 <= dt <= d.range_max:
        raise ValueError(f"{dt} K outside [0, {d.range_max}]")
    k = int(math.floor(dt + 0.5))
    if k > d.max_representable:
        raise ValueError(f"{dt} K needs more than {d.n_bits} bits")
    return tuple((k >> i) & 1 for i in range(d.n_bits))


@dataclass(frozen=True)
class ProductEncoding:
    w: Var
    y: Var
    x: Var
    x_ub: float
    constraints: Tuple[str, ...]


def linearize_product(model: MilpModel, y: Var, x: Var, name=None, x_ub=None) -> ProductEncoding:
    """Add ``w = y * x`` for binary ``y`` and ``x`` in ``[0, x_ub]``.

    The big-M is the declared upper bound of ``x`` unless a tighter ``x_ub`` is given.
    """
    if not y.is_binary:
        raise ValueError(f"{y.name} is not binary")
    ub = x.ub if x_ub is None else min(x_ub, x.ub)
    if not math.isfinite(ub):
        raise ValueError(f"{x.name} has no finite upper bound for the product")
    if ub <= 0:
        raise ValueError(f"{x.name}: product bound must be positive")
    if x.lb < 0:
        raise ValueError(f"{x.name}: product requires a non-negative factor")
    name = name or f"w[{y.name}*{x.name}]"
    w = model.add_var(name, lb=0.0, ub=ub)
    cons = (
        model.add_constr(w - ub * y, "<=", 0.0, f"{name}:ub_y"),
        model.add_constr(w - x, "<=", 0.0, f"{name}:ub_x"),
        model.add_constr(w - x - ub * y, ">=", -ub, f"{name}:lb"),
    )
    return ProductEncoding(w, y, x, ub, tuple(c.name for c in cons))


def linearize_bilinear(model: MilpModel, bits: Sequence[Var], x: Var, name=None, x_ub=None):
    """``dT * x`` as ``sum_i 2^i * (alpha_i * x)``; exact whenever the bits are 0/1."""
    name = name or f"{x.name}"
    expr = LinExpr()
    encs: List[ProductEncoding] = []
    for i, bit in enumerate(bits):
        enc = linearize_product(model, bit, x, name=f"{name}#{i}", x_ub=x_ub)
        encs.append(enc)
        expr.add(enc.w, float(2 ** i))
    return expr, encs


def bits_expr(bits: Sequence[Var]) -> LinExpr:
    expr = LinExpr()
    for i, b in enumerate(bits):
        expr.add(b, float(2 ** i))
    return expr


@dataclass(frozen=True)
class AffineFit:
    a: float
    b: float
    max_residual: float  # largest relative deviation over the input points


def fit_affine_performance(curve_points, kind="boiler") -> AffineFit:
    """Least-squares affine performance model.

    ``kind="boiler"``: points are ``(load_frac, efficiency)``; fits consumption
    per unit capacity ``load_frac / efficiency = a * load_frac + b``.

    ``kind="heat_pump"``: points are ``(lift_K, cop)``; fits ``cop = a + b * lift``.
    """
    pts = np.asarray(curve_points, dtype=float)
    if pts.ndim != 2 or pts.shape[1] != 2 or len(pts) < 2:
        raise ValueError("need at least two (x, y) points")
    x, y = pts[:, 0], pts[:, 1]
    if np.ptp(x) == 0:
        raise ValueError("degenerate curve: all x identical")
    if kind == "boiler":
        if ((x <= 0) | (x > 1)).any():
            raise ValueError("load fractions must lie in (0, 1]")
        if (y <= 0).any():
            raise ValueError("efficiencies must be positive")
        target = x / y
    elif kind == "heat_pump":
        target = y
    else:
        raise ValueError(f"unknown curve kind {kind!r}")
    design = np.column_stack([x, np.ones_like(x)])
    (slope, intercept), *_ = np.linalg.lstsq(design, target, rcond=None)
    fitted = slope * x + intercept
    resid = float(np.max(np.abs(fitted - target) / np.abs(target)))
    if kind == "boiler":
        return AffineFit(a=float(slope), b=float(intercept), max_residual=resid)
    return AffineFit(a=float(intercept), b=float(slope), max_residual=resid)


def load_curve_csv(path) -> np.ndarray:
    """``x,y`` pairs; a header row is skipped if present."""
    import pandas as pd

    df = pd.read_csv(path, header=None)
    try:
        float(df.iloc[0, 0])
    except ValueError:
        df = df.iloc[1:]
    return df.iloc[:, :2].to_numpy(dtype=float)
