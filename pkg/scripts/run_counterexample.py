#!/usr/bin/env python3
"""Report the indefinite-input instance separating the relaxation value
from the sparse operator norm; exits 2 if the expected values fail."""

import sys

from robustiht.cli import main

if __name__ == "__main__":
    sys.exit(main(["counterexample", *sys.argv[1:]]))
