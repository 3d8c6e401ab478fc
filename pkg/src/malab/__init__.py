"""malab: a desk-scale laboratory for discrete Monge-Ampere problems.

Piecewise-linear convex functions with exact subdifferential cells, an
Oliker-Prussner Dirichlet solver, strong-maximum-principle experiments,
convex-body duality with Gauss image cells, a planar L_p dual Minkowski
solver, and a gallery of explicit degenerate examples.
"""

__version__ = "0.1.0"
