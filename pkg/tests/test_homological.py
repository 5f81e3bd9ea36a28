import math

import numpy as np
import pytest

from bmkam.errors import SmallDivisor
from bmkam.fourier import DomainSpec, FourierTaylor, random_trig, weighted_norm
from bmkam.homological import (
    LieOperator,
    StepParams,
    gamma_m,
    homological_residual,
    kam_step,
    lie_transform,
    modes_up_to,
    solve_homological,
)
from bmkam.singular import AAForm, BmFunction, SingularPart, integrate_flow

I0 = np.array([0.8, 0.3])


def _system(K=6, deg=4):
    form = AAForm(2, 1, (1.0,))
    sing = SingularPart(1, 1.0)
    h = BmFunction(sing, FourierTaylor.polynomial(2, K, deg, I0, {(2, 0): 0.5, (0, 2): 0.5, (0, 1): 0.61}))
    return form.paired(sing), h


def test_modes_and_gamma():
    assert len(modes_up_to(2, 2)) == 12
    assert gamma_m(1, 0.0) == 1.0
    assert gamma_m(2, 0.5) == pytest.approx(sum(math.factorial(l) / math.factorial(l + 2) * 0.5 ** l for l in range(80)))
    assert gamma_m(1, 1.0) == math.inf


def test_solution_kills_low_modes():
    form, h = _system()
    R = random_trig(np.random.default_rng(0), 2, 3, 4, I0, K_cap=6)
    W = solve_homological(R, h, form, 3)
    res = homological_residual(W, h, R, form, 3)
    dom = DomainSpec((0.79, 0.29), (0.81, 0.31), 0.5, 0.01)
    assert weighted_norm(res, dom) < 1e-12 * weighted_norm(R, dom)
    assert W.mode((0, 0)) is None or np.all(W.mode((0, 0)) == 0)


def test_exact_resonance_raises():
    form = AAForm(2, 1, (1.0,))
    h = BmFunction(None, FourierTaylor.polynomial(2, 4, 2, I0, {(0, 0): 0.0}))
    R = FourierTaylor.trig(2, 4, 2, I0, cos={(0, 1): 1.0})
    with pytest.raises(SmallDivisor):
        solve_homological(R, h, form, 4)


def test_lie_series_matches_flow():
    form, _ = _system(K=8, deg=6)
    W = FourierTaylor.trig(2, 8, 6, I0, cos={(1, 0): 0.02, (0, 1): {(0, 0): 0.03, (1, 0): 0.01}})
    f = FourierTaylor.trig(2, 8, 6, I0, cos={(0, 1): 1.0}, const={(2, 0): 0.5, (1, 0): 0.2})
    g, _ = lie_transform(f, W, 1.0, 8, form)
    phi, I = np.array([0.4, 0.9]), I0 + np.array([0.01, -0.02])
    tr = integrate_flow(BmFunction(None, W), form, (phi, I), 1.0, 1e-3, drift_tol=1.0)
    assert abs(g(phi[None], I[None])[0] - f(tr.phi[-1][None], tr.I[-1][None])[0]) < 1e-9


def test_lie_operator_antisymmetry():
    form, h = _system()
    rng = np.random.default_rng(2)
    A = random_trig(rng, 2, 2, 4, I0, K_cap=6, poly_deg=2)
    B = random_trig(rng, 2, 2, 4, I0, K_cap=6, poly_deg=2)
    s = LieOperator(A, form)(B) + LieOperator(B, form)(A)
    assert s.is_zero() or np.max(np.abs(s.coef)) < 1e-13


def test_kam_step_quadratic():
    form, h = _system(K=12, deg=4)
    dom = DomainSpec(tuple(I0 - 3e-4), tuple(I0 + 3e-4), 1.0, 6e-4)
    h = BmFunction(h.sing, h.smooth.with_scale(dom.radius(I0)))
    R = FourierTaylor.trig(2, 12, 4, I0, cos={(1, 0): 1.0, (1, 1): 0.5}).with_scale(dom.radius(I0))
    R = R * (1e-5 / weighted_norm(R, dom))
    p = StepParams(K=4, alpha=0.1, delta=(dom.rho1 / 8, dom.rho2 / 8), c=1.0, M=2.0)
    d = kam_step(h, R, p, dom, form).diagnostics
    assert d["bound_ok"] and d["W_bound_ok"]
    assert d["eps_new"] < d["eps"] ** 1.5
