"""Verification lab for the quadratic curvature functionals on 3-manifolds.

Modules:

``jets``                  truncated multivariate Taylor arithmetic
``expr``                  expression language for metric components
``tensor_geometry``       curvature from metric jets
``functionals``           Euler-Lagrange operators and residual systems
``exact_solutions``       Schwarzschild, Kasner and the R2_s potential
``grid_torus``            spectral 3-torus: functionals, gradients, flow
``conformal_submersion``  conformal and S^1-quotient identities
``suites``                randomized identity battery
``cli``                   command-line front end
"""

__version__ = "0.1.0"
