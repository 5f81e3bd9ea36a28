"""Desingularize simple systems and follow a trajectory through both charts.

For even m the form dI1/I1^m ^ dphi1 is replaced by a symplectic form, for
odd m by a folded one.  Outside |I1| < 2 eps nothing changes; inside, the
dynamics of the rescaled first integrals agrees with the original flow.
"""

import numpy as np

from bmkam.desing import (
    Component,
    build_profile,
    desingularize_system,
    dynamics_equality_residual,
    hamiltonian_of,
    simple_system,
    transport_trajectory,
)
from bmkam.fourier import FourierTaylor
from bmkam.singular import integrate_flow

rng = np.random.default_rng(0)
rest = FourierTaylor.trig(2, 4, 2, np.zeros(2), cos={(0, 1): 0.1}, const={(0, 2): 0.5})

for m in (2, 3):
    form, F = simple_system(m)
    comps = [F[0], Component(rest=rest)]
    for eps in (0.1, 0.01):
        prof = build_profile(m, eps)
        S = desingularize_system(comps, form, prof)
        pts = [(rng.uniform(0, 6.28, 2), np.r_[rng.choice([-1, 1]) * 10 ** rng.uniform(-4, 0), rng.normal()])
               for _ in range(300)]
        res = dynamics_equality_residual(S, form, prof, pts)
        kind = "symplectic" if S.dform.symplectic else "folded"
        print(f"m={m} eps={eps:<5} {kind:10s} field mismatch {res:.1e}", end="")
        if not S.dform.symplectic:
            print(f", kernel on Z has dim {S.dform.kernel_at_Z().shape[1]}, fold defect {S.folded_defect():.1e}", end="")
        p0 = (np.array([0.3, 0.2]), np.array([0.5 * eps, 0.4]))
        ts, ph, I = transport_trajectory(S, p0, 10.0, 0.01)
        tr = integrate_flow(hamiltonian_of(comps, 2), form, p0, 10.0, 0.01, drift_tol=1e-3)
        print(f", transported orbit off by {max(np.abs(ph - tr.phi_unwrapped).max(), np.abs(I - tr.I).max()):.1e}")
