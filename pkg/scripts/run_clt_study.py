#!/usr/bin/env python3
"""Fluctuation-field convergence study (coupled by default).

Pass --uncoupled to run the control experiment with independent noises;
the gap then stays order one instead of shrinking like sqrt(epsilon).
"""

import sys

from spdelab.cli import run

if __name__ == "__main__":
    args = sys.argv[1:]
    if "--out" not in args:
        args += ["--out", "out/clt"]
    sys.exit(run(["clt-study"] + args))
