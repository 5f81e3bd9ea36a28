"""Measure resonant zones and keep the Diophantine actions of the desk model."""

import numpy as np

from bmkam.diophantine import DioParams, diophantine_sample, zone_measure_bound, zone_measure_mc
from bmkam.kam import desk_model

d = desk_model()
form, h = d["form"], d["h"]
box = ((-1.0, -1.0), (1.0, 1.0))
print("   k        alpha   Monte Carlo          bound")
for k, alpha in (((1, 1), 0.02), ((2, -3), 0.01), ((0, 1), 0.05), ((3, 1), 0.005)):
    mc, sig = zone_measure_mc(box, k, alpha, 0.8, form, h.sing, N=100_000, seed=7)
    print(f"{str(k):9s} {alpha:6.3f}   {mc:.4f} +- {sig:.4f}   {zone_measure_bound(box, k, alpha, 0.8, form, h.sing):.4f}")

G = ((0.5, 0.2), (1.0, 0.8))
for gamma in (1e-3, 1e-2, 3e-2):
    s = diophantine_sample(G, form, h.sing, h, DioParams(tau=1.5, gamma=gamma, K=10), 20_000, seed=1)
    print(f"gamma={gamma:.0e}: kept {s.kept_fraction:.3f} of the shrunk box")
