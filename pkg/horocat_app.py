#!/usr/bin/env python
"""
horocat command-line application

Runs one experiment on a lattice isometry group and prints or saves its report:
1. Classification, Dirichlet domains and limit-set samples
2. Cusp truncation by horoballs, truncated geodesics and CAT(0) checks
3. Tits alternative, finite subgroups, Burnside and distortion checks
4. Universal Coxeter group representations
"""

import sys
import os

# Ensure the horocat package is in the path
sys.path.insert(0, os.path.dirname(os.path.abspath(__file__)))

from horocat.cli.horocat_cli import main

if __name__ == "__main__":
    sys.exit(main())
