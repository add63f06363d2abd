"""Finite elements for mixed-dimensional linear Cosserat elasticity.

Volumes, shells and beams share Lagrange nodes on one conforming mesh, so
reinforcements couple to the bulk without interface multipliers.
"""

__version__ = "0.1.0"
