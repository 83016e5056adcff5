#!/usr/bin/env python3
"""Reproduce the sparse mean estimation sweep (relative MSE vs k and d).

Full-scale by default; pass --scale 0.2 for a quick desk run.
"""

import sys

from robustiht.cli import main

if __name__ == "__main__":
    sys.exit(main(["mean", *sys.argv[1:]]))
