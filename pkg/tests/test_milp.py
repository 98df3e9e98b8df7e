import math

import numpy as np
import pytest

from heatmilp.milp import MilpModel, parse_name, quicksum, vname
from heatmilp.milp.writers import NameMap, emit_model, mangle_names, write_lp, write_mps
from heatmilp.oracle import OracleLimitError, enumerate_oracle
from heatmilp.solver import (SolveControls, SolverError, find_cbc, milestones_from, parse_log,
                             read_solution, relative_gap, solve_model)


def small_mip():
    """min -x - 2y s.t. x + y <= 1.5, y binary, x in [0, 1]; optimum x=0.5, y=1."""
    m = MilpModel("small")
    x = m.add_var("x", ub=1.0)
    y = m.binary("y")
    m.add_constr(x + y, "<=", 1.5, "cap")
    m.set_objective(-1.0 * x - 2.0 * y + 3.0)
    return m


# -- container ------------------------------------------------------------------
def test_names_round_trip():
    n = vname("y", "HP", 1, 7)
    assert n == "y[HP,1,7]"
    assert parse_name(n) == ("y", ("HP", 1, 7))
    assert parse_name("z[GB]") == ("z", ("GB",))
    assert parse_name("plain") == ("plain", ())


def test_linexpr_algebra():
    m = MilpModel()
    a, b = m.add_var("a", ub=1), m.add_var("b", ub=1)
    e = 2 * a - b + 3
    vals = m.vector({"a": 1.0, "b": 0.5})
    assert e.value(vals) == pytest.approx(4.5)
    assert quicksum([a, b, 1.0]).value(vals) == pytest.approx(2.5)
    assert (-(e / 2)).value(vals) == pytest.approx(-2.25)


def test_duplicates_and_validation():
    m = MilpModel()
    m.add_var("a", ub=1)
    with pytest.raises(ValueError):
        m.add_var("a")
    with pytest.raises(ValueError):
        m.add_var("b", lb=2, ub=1)
    m.add_var("inf")
    with pytest.raises(ValueError, match="infinite bound"):
        m.validate()
    with pytest.raises(ValueError):
        m.add_constr(m.var("a"), "<>", 1)


def test_violations_report():
    m = small_mip()
    assert m.violations(m.vector({"x": 0.5, "y": 1})) == []
    names = [n for n, _ in m.violations(m.vector({"x": 1.0, "y": 0.9}))]
    assert "cap" in names and "integrality:y" in names


def test_census_counts_families():
    m = MilpModel()
    for t in range(3):
        y = m.binary(vname("y", "GB", 0, t))
        m.add_constr(y, "<=", 1, vname("limit", "GB", 0, t))
    c = m.census()
    assert c["binaries"] == 3 and c["constraint_families"] == {"limit": 3}


# -- writers --------------------------------------------------------------------
def test_lp_byte_stable(tmp_path):
    write_lp(small_mip(), tmp_path / "a.lp")
    write_lp(small_mip(), tmp_path / "b.lp")
    assert (tmp_path / "a.lp").read_bytes() == (tmp_path / "b.lp").read_bytes()
    text = (tmp_path / "a.lp").read_text()
    assert "Minimize" in text and "General" in text and "End" in text


def test_long_names_mangled_and_reversible(tmp_path):
    m = MilpModel()
    long_names = ["v" + "x" * 300 + str(i) for i in range(3)] + ["a b[1,2]"]
    vs = [m.add_var(n, ub=1) for n in long_names]
    m.add_constr(quicksum(vs), "<=", 2, "c" * 300)
    m.set_objective(quicksum(vs))
    names = emit_model(m, "lp", tmp_path / "m.lp")
    assert all(len(s) <= 255 for s in names.variables.values())
    assert len(set(names.variables.values())) == len(long_names)
    back = NameMap.load(str(tmp_path / "m.lp") + ".names.json").to_original()
    assert sorted(back.values()) == sorted(long_names)
    assert all(len(ln) <= 510 for ln in (tmp_path / "m.lp").read_text().splitlines())


def test_mangle_collisions():
    out = mangle_names(["a-b", "a_b", "a.b"])
    assert len(set(out.values())) == 3


def test_unknown_format(tmp_path):
    with pytest.raises(ValueError):
        emit_model(small_mip(), "xlsx", tmp_path / "m")


def test_mps_layout(tmp_path):
    names = write_mps(small_mip(), tmp_path / "m.mps")
    text = (tmp_path / "m.mps").read_text()
    for section in ("NAME", "ROWS", "COLUMNS", "RHS", "BOUNDS", "ENDATA", "'INTORG'"):
        assert section in text
    assert all(len(c) <= 8 for c in names.variables.values())


# -- solver bridge --------------------------------------------------------------
@pytest.mark.parametrize("fmt", ["lp", "mps"])
def test_solve_small_mip(tmp_path, fmt):
    res = solve_model(small_mip(), SolveControls(work_dir=str(tmp_path), time_limit=30), fmt=fmt)
    assert res.status == "optimal"
    assert res.objective == pytest.approx(0.5)
    assert res.assignment["y"] == pytest.approx(1.0)
    assert res.final_gap == pytest.approx(0.0, abs=1e-9)


def test_solve_pure_lp(tmp_path):
    m = MilpModel()
    a, b = m.add_var("a", ub=3), m.add_var("b", ub=3)
    m.add_constr(a + b, ">=", 2, "need")
    m.set_objective(a + 2 * b)
    res = solve_model(m, SolveControls(work_dir=str(tmp_path)))
    assert res.status == "optimal" and res.final_gap == 0
    assert res.objective == pytest.approx(2.0)


def test_contradictory_model_infeasible(tmp_path):
    m = MilpModel()
    a = m.add_var("a", ub=1)
    m.add_constr(a, ">=", 2, "impossible")
    m.set_objective(a)
    res = solve_model(m, SolveControls(work_dir=str(tmp_path)))
    assert res.status == "infeasible" and not res.has_solution


@pytest.mark.skipif(find_cbc() is None, reason="no CBC binary")
def test_cbc_backend(tmp_path):
    res = solve_model(small_mip(), SolveControls(work_dir=str(tmp_path), backend="cbc"))
    assert res.status == "optimal" and res.objective == pytest.approx(0.5)


def test_missing_solver_command(tmp_path):
    res = solve_model(small_mip(), SolveControls(work_dir=str(tmp_path),
                                                 solver_command="no-such-solver {model} {solution}"))
    assert res.status == "error" and "not found" in res.message


def test_controls_validation():
    with pytest.raises(ValueError):
        SolveControls(target_gap=-0.1)
    with pytest.raises(ValueError):
        SolveControls(time_limit=0)
    with pytest.raises(ValueError):
        SolveControls(backend="gurobi")


def test_read_solution_formats(tmp_path):
    names = NameMap({"x[1]": "x_1_", "y": "y"}, {})
    p = tmp_path / "s.sol"
    p.write_text("Optimal - objective value 4.5\n      0 x_1_  2.5  0\n      1 y 1 0\n")
    status, obj, vals = read_solution(p, names)
    assert status == "optimal" and obj == 4.5 and vals == {"x[1]": 2.5, "y": 1.0}
    p.write_text("x_1_ 3\n")
    assert read_solution(p, names)[2] == {"x[1]": 3.0}
    p.write_text("Infeasible - objective value 0\n")
    assert read_solution(p, names)[0] == "infeasible"
    p.write_text("mystery 1\n")
    with pytest.raises(SolverError):
        read_solution(p, names)


def test_log_trajectory_and_milestones():
    log = "\n".join([
        "Cbc0010I After 100 nodes, 5 on tree, 130 best solution, best possible 92 (1.50 seconds)",
        "Cbc0010I After 200 nodes, 5 on tree, 110 best solution, best possible 97 (3.00 seconds)",
        "Cbc0010I After 300 nodes, 5 on tree, 105 best solution, best possible 99 (4.00 seconds)",
    ])
    traj, _ = parse_log(log)
    assert [t[0] for t in traj] == [1.5, 3.0, 4.0]
    ms = milestones_from(traj, (0.3, 0.13, 0.105))
    assert [m.gap for m in ms] == [0.3, 0.13, 0.105]
    assert [m.seconds for m in ms] == [1.5, 3.0, 4.0]
    assert parse_log("nothing useful")[0] == []


def test_relative_gap():
    assert relative_gap(110, 100) == pytest.approx(10 / 110)
    assert relative_gap(5, 5) == 0
    assert math.isinf(relative_gap(5, math.nan))


# -- oracle ---------------------------------------------------------------------
def test_oracle_small_mip():
    res = enumerate_oracle(small_mip())
    assert res.objective == pytest.approx(0.5)
    assert res.leaves == 2


def test_oracle_infeasible():
    m = MilpModel()
    y = m.binary("y")
    x = m.add_var("x", ub=1)
    m.add_constr(x + y, ">=", 3, "no")
    res = enumerate_oracle(m)
    assert not res.found and res.objective is None


def test_oracle_limits():
    m = MilpModel()
    for i in range(5):
        m.binary(f"b{i}")
    with pytest.raises(OracleLimitError):
        enumerate_oracle(m, max_binaries=4)


def test_oracle_prefilters_binary_rows():
    m = MilpModel()
    bs = [m.binary(f"b{i}") for i in range(6)]
    m.add_constr(quicksum(bs), "=", 1, "one")
    x = m.add_var("x", ub=10)
    m.add_constr(x - quicksum((i + 1) * b for i, b in enumerate(bs)), ">=", 0, "link")
    m.set_objective(x)
    res = enumerate_oracle(m)
    assert res.lp_solved == 6 and res.leaves == 64
    assert res.objective == pytest.approx(1.0)
    assert np.isclose(res.assignment["b0"], 1.0)
