import numpy as np
import pytest

from bmkam.desing import (
    Component,
    build_profile,
    desingularize_form,
    desingularize_system,
    dynamics_equality_residual,
    simple_system,
)
from bmkam.errors import BadInnerSpec, NotSimple, OrderMismatch
from bmkam.fourier import FourierTaylor
from bmkam.singular import AAForm


@pytest.mark.parametrize("m", [1, 2, 3, 4])
def test_profile_shape(m):
    p = build_profile(m, 0.05)
    assert p.continuity_defect() < 1e-10
    xs = np.linspace(-3, 3, 601)
    xs = xs[xs != 0]
    if m % 2 == 0:
        assert p.min_slope() > 0
        assert np.all(p.f(xs, 1) > 0)
        assert np.allclose(p.f(xs), -p.f(-xs))
    else:
        fp = p.f(xs, 1)
        assert np.all(fp[xs > 0] > 0) and np.all(fp[xs < 0] < 0)
    # outside the unit scale f' is exactly x^-m
    far = np.array([2.5, -2.5, 4.0])
    assert np.allclose(p.f(far, 1), far ** (-float(m)))


def test_profile_scaling_agrees_outside():
    p = build_profile(2, 0.01)
    x = np.array([0.05, 0.5, -0.2])
    assert np.allclose(p.fp_eps(x), x ** -2.0, rtol=1e-12)


def test_bad_inner_spec():
    with pytest.raises(BadInnerSpec):
        build_profile(2, 0.1, {"c": -1.0})
    with pytest.raises(BadInnerSpec):
        build_profile(3, 0.1, {"C": 0.0})


def test_forms_even_and_odd():
    f2 = desingularize_form(AAForm(2, 2, (0.0, 1.0)), build_profile(2, 0.1))
    assert f2.symplectic and f2.kernel_at_Z().shape[1] == 0
    f3 = desingularize_form(AAForm(2, 3, (0.0, 0.0, 1.0)), build_profile(3, 0.1))
    assert not f3.symplectic and f3.kernel_at_Z().shape[1] == 2
    assert f2.agreement_defect(0.1, 3.0) < 1e-12
    with pytest.raises(OrderMismatch):
        desingularize_form(AAForm(2, 2, (0.0, 1.0)), build_profile(3, 0.1))


def test_non_simple_rejected():
    rest = FourierTaylor.trig(2, 4, 2, np.zeros(2), cos={(1, 0): 0.1})
    with pytest.raises(NotSimple):
        Component(rest=rest)


def test_extra_component_dynamics():
    form, F = simple_system(2)
    rest = FourierTaylor.trig(2, 4, 2, np.zeros(2), cos={(0, 1): 0.3}, const={(0, 2): 1.0})
    S = desingularize_system([F[0], Component(poly=(0.0, 0.2), rest=rest)], form, build_profile(2, 0.05))
    rng = np.random.default_rng(3)
    sample = [(rng.uniform(0, 6, 2), np.r_[rng.choice([-1, 1]) * 10 ** rng.uniform(-3, 0), rng.normal()]) for _ in range(200)]
    assert dynamics_equality_residual(S, form, build_profile(2, 0.05), sample) < 1e-9


def test_tilde_action_monotone():
    form, F = simple_system(3)
    S = desingularize_system(F, form, build_profile(3, 0.1))
    xs = np.linspace(0.001, 1.0, 50)
    It = np.array([S.I1_tilde(x) for x in xs])
    assert np.all(np.diff(It) > 0)
    back = S.invert_I1_tilde(It[10], 1)
    assert abs(back - xs[10]) < 1e-10
