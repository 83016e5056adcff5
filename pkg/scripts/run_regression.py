#!/usr/bin/env python3
"""Reproduce robust IHT convergence under the sign-flip attack (d=500).

Emits per-iteration parameter error CSV plus a log-scale convergence chart.
"""

import sys

from robustiht.cli import main

if __name__ == "__main__":
    sys.exit(main(["regress", *sys.argv[1:]]))
