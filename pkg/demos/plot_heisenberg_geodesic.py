"""
A shortest horizontal path to the vertical direction
====================================================

Reaching ``exp(Z)`` on the Heisenberg group from the identity means
sweeping out unit area with the horizontal projection. The best loop is a
circle, of length ``2 sqrt(pi)``; the transcribed optimal-control solver
should find it.
"""
import math
import os

import matplotlib

matplotlib.use("Agg")
import matplotlib.pyplot as plt
import numpy as np

from subliyau.geodesics import PathConfig, cc_distance
from subliyau.groups import HEISENBERG

OUT = os.path.join(os.path.dirname(os.path.abspath(__file__)), "output")
os.makedirs(OUT, exist_ok=True)

target = HEISENBERG.exp(np.array([0.0, 0.0, 1.0]))
fig, ax = plt.subplots(figsize=(4.5, 4.5))
for cells in (12, 24, 48):
    d, path = cc_distance(np.eye(3), target, HEISENBERG, PathConfig(cells=cells))
    print(f"K={cells:<3} length {d:.5f}  (circle: {2 * math.sqrt(math.pi):.5f})")
    xyz = HEISENBERG.coordinates(path.states())
    ax.plot(xyz[0], xyz[1], ".-", label=f"K={cells}")
ax.set_aspect("equal")
ax.set_xlabel("x")
ax.set_ylabel("y")
ax.legend()
fig.tight_layout()
fig.savefig(os.path.join(OUT, "heisenberg_geodesic.png"), dpi=120)
