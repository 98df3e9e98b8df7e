"""MILP container, builder and file writers."""

from .model import LinExpr, MilpModel, Var, quicksum, vname, parse_name

__all__ = ["LinExpr", "MilpModel", "Var", "quicksum", "vname", "parse_name"]
