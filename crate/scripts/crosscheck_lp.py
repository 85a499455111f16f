#!/usr/bin/env python3
"""Re-solve exported LP files with HiGHS and compare against freqsec's objectives.

Usage: python3 scripts/crosscheck_lp.py DIR [--tol 1e-6]

DIR must contain the *.lp files and the objectives.csv written by the
acceptance suite (criterion 10). Requires `pip install highspy`.
"""

import argparse
import csv
import pathlib
import sys

import highspy


def solve(path: pathlib.Path) -> float:
    h = highspy.Highs()
    h.setOptionValue("output_flag", False)
    h.setOptionValue("mip_rel_gap", 0.0)
    h.setOptionValue("mip_abs_gap", 0.0)
    if h.readModel(str(path)) != highspy.HighsStatus.kOk:
        raise RuntimeError(f"HiGHS could not read {path}")
    h.run()
    status = h.getModelStatus()
    if status != highspy.HighsModelStatus.kOptimal:
        raise RuntimeError(f"{path.name}: HiGHS status {h.modelStatusToString(status)}")
    return h.getInfo().objective_function_value


def main() -> int:
    parser = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    parser.add_argument("dir", type=pathlib.Path)
    parser.add_argument("--tol", type=float, default=1e-6)
    args = parser.parse_args()

    with open(args.dir / "objectives.csv", newline="") as f:
        expected = {row["instance"]: float(row["objective"]) for row in csv.DictReader(f)}

    failed = 0
    for name, ours in expected.items():
        theirs = solve(args.dir / f"{name}.lp")
        diff = abs(theirs - ours)
        ok = diff <= args.tol * max(1.0, abs(ours))
        failed += not ok
        print(f"{name:<16} freqsec {ours:.9g}  highs {theirs:.9g}  diff {diff:.2e}  {'PASS' if ok else 'FAIL'}")
    return 1 if failed else 0


if __name__ == "__main__":
    sys.exit(main())
