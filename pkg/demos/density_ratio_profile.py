"""Write a plot-ready CSV of closed-ball density ratios about a catalog base point.

usage: python3 demos/density_ratio_profile.py [surface] [resolution] > profile.csv
"""
import csv
import math
import sys

import numpy as np

from varigeom.catalog import catalog_entry

name = sys.argv[1] if len(sys.argv) > 1 else "tangent_sphere_pair"
n = int(sys.argv[2]) if len(sys.argv) > 2 else 32
entry = catalog_entry(name)
V, p = entry.build(n), entry.point()
out = csv.writer(sys.stdout)
out.writerow(["r", "mass", "mass_error", "ratio"])
for r in np.geomspace(0.02, 1.5, 40):
    inner, _ = V.ball(p, r, closed=True)
    out.writerow([f"{r:.17g}", f"{inner.mass:.17g}", f"{inner.mass_error:.17g}",
                  f"{inner.mass / (math.pi * r ** V.m):.17g}"])
