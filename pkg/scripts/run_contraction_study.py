#!/usr/bin/env python3
"""Small-noise contraction study at acceptance scale.

Writes rows.csv, summary.csv and manifest.json under --out (default
out/contraction).  Extra flags are passed through to the CLI, e.g.
--threads 4 or --epsilon-ladder 1e-2,1e-3.
"""

import sys

from spdelab.cli import run

if __name__ == "__main__":
    args = sys.argv[1:]
    if "--out" not in args:
        args += ["--out", "out/contraction"]
    sys.exit(run(["contraction-study"] + args))
