#!/usr/bin/env python3
"""Evaluate the rate function for a control given as a (t, x) expression.

Example:
    python3 scripts/run_rate_demo.py --control "sin(pi*x)*exp(-t)"
"""

import sys

from spdelab.cli import run

if __name__ == "__main__":
    args = sys.argv[1:]
    if "--control" not in args:
        args += ["--control", "sin(pi*x)"]
    if "--out" not in args:
        args += ["--out", "out/rate"]
    sys.exit(run(["rate", "--nx", "20", "--nt", "96", "--horizon", "0.2",
                  "--reg-ladder", "1e-2,1e-4,1e-6"] + args))
