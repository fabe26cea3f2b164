# Core horocat logic module
"""
Exact lattice data, hyperbolic models and the group computations built on them
"""
