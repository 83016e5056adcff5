#!/usr/bin/env python3
"""Robust IHT with a sparse Toeplitz covariance unknown to the estimator."""

import sys

from robustiht.cli import main

if __name__ == "__main__":
    sys.exit(main(["unknown-cov", *sys.argv[1:]]))
