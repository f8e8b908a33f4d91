#!/usr/bin/env python3
"""Fit the seven Dirichlet heat-kernel estimate constants and write audit.csv."""

import sys

from spdelab.cli import run

if __name__ == "__main__":
    args = sys.argv[1:]
    if "--out" not in args:
        args += ["--out", "out/kernel_audit"]
    sys.exit(run(["kernel-audit"] + args))
