#!/usr/bin/env python3
"""Moderate-deviation tail study: naive Monte Carlo or importance sampling.

Defaults mirror the acceptance configuration (nx=32, nt=1024, threshold
0.18, 512 paths).  Use --mode is for the Girsanov-tilted estimator.
"""

import sys

from spdelab.cli import run

DEFAULTS = ["--nx", "32", "--nt", "1024", "--horizon", "0.25",
            "--epsilon-ladder", "1e-2,3e-3,1e-3",
            "--paths-per-epsilon", "512", "--event-threshold", "0.18"]

if __name__ == "__main__":
    args = sys.argv[1:]
    if "--out" not in args:
        args += ["--out", "out/mdp"]
    sys.exit(run(["mdp-study"] + DEFAULTS + args))
