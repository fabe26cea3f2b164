# horocat package
"""
CAT(0) spaces from isometry groups of hyperbolic lattices: exact
classification, Dirichlet domains, horoball truncation and desk-scale
group-property checks.
"""

__version__ = "1.0.0"
