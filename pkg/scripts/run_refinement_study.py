#!/usr/bin/env python3
"""Grid refinement study: deterministic orders plus coupled-noise gaps."""

import sys

from spdelab.cli import run

if __name__ == "__main__":
    args = sys.argv[1:]
    if "--out" not in args:
        args += ["--out", "out/refine"]
    sys.exit(run(["refine-study", "--nx", "16", "--nt", "64",
                  "--horizon", "0.1", "--epsilon-ladder", "1e-2"] + args))
