"""Print 1/4 int |H|^2 + b |M| for geodesic spheres in R^3, S^3 and H^3.

Every value should equal 4 pi up to quadrature error.
"""
import math

from varigeom import surfaces as S
from varigeom.model_space import ModelSpace

for b, radii in ((0.0, (0.5, 1.0, 2.0)), (1.0, (0.3, 1.2, 2.8)), (-1.0, (0.3, 1.2, 3.0))):
    space = ModelSpace(3, b)
    for rho in radii:
        V = S.geodesic_sphere(space, rho).sample_varifold(64)
        val = V.willmore_energy() + b * V.area()
        print(f"b={b:+.0f} rho={rho:4.1f}  W + bA = {val:.15f}  error = {val - 4 * math.pi:+.1e}")
