"""Stand-alone HiGHS process: reads an LP/MPS file, writes a solution file.

    python3 -m heatmilp.highs_runner MODEL SOLUTION [--gap G] [--time-limit S] [--threads N]

The solution file starts with a status header in the same style CBC uses
(``Optimal - objective value X``) followed by ``name value`` rows, so the
bridge reads both solvers with one parser. A short summary with ``Objective
value:``, ``Lower bound:`` and ``Gap:`` lines closes the log.
"""

from __future__ import annotations

import argparse
import sys


def main(argv=None) -> int:
    ap = argparse.ArgumentParser(prog="heatmilp.highs_runner")
    ap.add_argument("model")
    ap.add_argument("solution")
    ap.add_argument("--gap", type=float, default=1e-4)
    ap.add_argument("--time-limit", type=float, default=float("inf"))
    ap.add_argument("--threads", type=int, default=1)
    args = ap.parse_args(argv)

    import highspy

    h = highspy.Highs()
    h.setOptionValue("mip_rel_gap", args.gap)
    if args.time_limit != float("inf"):
        h.setOptionValue("time_limit", args.time_limit)
    h.setOptionValue("threads", args.threads)
    if h.readModel(args.model) == highspy.HighsStatus.kError:
        print(f"cannot read model {args.model}", file=sys.stderr)
        return 2
    h.run()
    status = h.getModelStatus()
    info = h.getInfo()
    ms = highspy.HighsModelStatus
    has_sol = info.primal_solution_status == 2  # kSolutionStatusFeasible
    obj = info.objective_function_value
    if status == ms.kOptimal:
        header = f"Optimal - objective value {obj!r}"
    elif status in (ms.kInfeasible, ms.kUnboundedOrInfeasible):
        header = "Infeasible - objective value 0"
        has_sol = False
    elif status == ms.kUnbounded:
        header = "Unbounded - objective value 0"
        has_sol = False
    elif has_sol:
        header = f"Stopped on time - objective value {obj!r}"
    else:
        header = "Stopped on time - no integer solution"

    rows = [header]
    if has_sol:
        names = h.getLp().col_names_
        for name, val in zip(names, h.getSolution().col_value):
            if val != 0.0:
                rows.append(f"{name} {val!r}")
    with open(args.solution, "w") as fh:
        fh.write("\n".join(rows) + "\n")

    print(f"Result - {h.modelStatusToString(status)}")
    if has_sol:
        integral = any(v != highspy.HighsVarType.kContinuous for v in h.getLp().integrality_)
        # a pure LP has no MIP bound; at optimality its objective is the bound
        bound = info.mip_dual_bound if integral else (obj if status == ms.kOptimal else float("nan"))
        gap = info.mip_gap if integral else (0.0 if status == ms.kOptimal else float("inf"))
        print(f"Objective value:                {obj!r}")
        print(f"Lower bound:                    {bound!r}")
        print(f"Gap:                            {gap!r}")
    elif "no integer solution" in header:
        print("No integer solution found")
    return 0


if __name__ == "__main__":
    sys.exit(main())
