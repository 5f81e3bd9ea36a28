"""Singular forms that come out of classical mechanics.

McGehee blow-up of a homogeneous potential r^-alpha produces a form whose
density behaves like r^((2 - 3 alpha)/(2 + alpha)).  Only some exponents give
a b^m-form; the bivector test decides the rest.
"""

import math

import numpy as np

from bmkam.mechanics import (
    classify_bm,
    integrate_pulled_back,
    kepler_levi_civita,
    mcgehee_double_collision,
    mcgehee_exponent,
    sphere_system,
    three_body_mcgehee,
    torus_system,
)

for alpha in (1, 2, 6):
    v = classify_bm(mcgehee_double_collision(alpha), [0.0, 0.3, 0.7, 0.4])
    verdict = "b^%d-symplectic" % v["m"] if v["stage2"] else f"rejected ({v['reason']})"
    print(f"alpha={alpha}: exponent {mcgehee_exponent(alpha):+.4f} measured {v['density_exponent']:+.4f} -> {verdict}")

pb, form, ham = three_body_mcgehee(0.1)
print(f"\nrestricted three-body problem: coefficient of dx ^ dP_r at x=0.5 is {pb.matrix([0.5, 0, 0, 0])[0, 1]:.3f}")
print("classification:", classify_bm(pb, [0.0, 0.2, 0.3, 0.5])["m"])
ts, ys, Es, halted = integrate_pulled_back(pb, ham, [1.0, 0.0, 0.3, 1.0], 10.0, 1e-3)
print(f"10 time units, energy spread {np.ptp(Es):.1e}, closest approach x = {ys[:, 0].min():.3f}")

kep = kepler_levi_civita()
y = np.array([0.6, 0.1, 0.6, -0.3])
print(f"\nLevi-Civita chart, Pfaffian at u1 = u2 = 0.6: {kep.pfaffian(y):.3f} (vanishes only at u = 0)")

rng = np.random.default_rng(1)
for m in (1, 2, 3):
    hs = [(rng.choice([-1, 1]) * 10 ** rng.uniform(-2, 0), rng.uniform(0, 6)) for _ in range(50)]
    ths = [(rng.uniform(0.1, 3.0) + rng.choice([0, math.pi]), rng.uniform(0, 6)) for _ in range(50)]
    print(f"m={m}: moment-map residual sphere {sphere_system(m).residual(hs):.1e}, torus {torus_system(m).residual(ths):.1e}")
