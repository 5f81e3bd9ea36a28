import math

import numpy as np
import pytest

from bmkam.errors import InvalidParams
from bmkam.fourier import (
    DomainSpec,
    FourierTaylor,
    angular_average,
    derivative_norm,
    mode_bounds,
    random_trig,
    truncate_high,
    truncate_low,
    weighted_norm,
)

I0 = np.array([0.7, 0.2])


def _pair(seed=0):
    rng = np.random.default_rng(seed)
    f = random_trig(rng, 2, 3, 4, I0, K_cap=8, poly_deg=2)
    g = random_trig(rng, 2, 3, 4, I0, K_cap=8, poly_deg=2)
    return f, g


def _pts(seed=1, N=20):
    rng = np.random.default_rng(seed)
    return rng.uniform(0, 2 * math.pi, (N, 2)), I0 + rng.uniform(-0.2, 0.2, (N, 2))


def test_random_trig_is_real():
    f, _ = _pair()
    assert f.reality_defect() < 1e-14
    phi, I = _pts()
    assert np.max(np.abs(f.eval_complex(phi, I).imag)) < 1e-12


def test_product_matches_pointwise():
    f, g = _pair()
    fg = f * g
    assert fg.cap_loss == 0
    phi, I = _pts()
    assert np.allclose(fg(phi, I), f(phi, I) * g(phi, I), rtol=1e-12, atol=1e-12)


def test_product_truncation_is_accounted():
    f, g = _pair(3)
    small = FourierTaylor.from_json(dict(f.to_json(), K_cap=3))
    prod = small * small.with_cap(3)
    assert prod.cap_loss > 0


def test_derivatives_against_finite_differences():
    f, _ = _pair(2)
    phi, I = _pts(N=5)
    h = 1e-6
    e = np.array([1.0, 0.0])
    fd_phi = (f(phi + h * e, I) - f(phi - h * e, I)) / (2 * h)
    fd_I = (f(phi, I + h * e) - f(phi, I - h * e)) / (2 * h)
    assert np.allclose(f.d_phi(0)(phi, I), fd_phi, atol=1e-7)
    assert np.allclose(f.d_I(0)(phi, I), fd_I, atol=1e-7)


def test_json_roundtrip():
    f, _ = _pair(4)
    g = FourierTaylor.from_json(f.to_json())
    phi, I = _pts()
    assert np.array_equal(g(phi, I), f(phi, I))


def test_truncation_split():
    f, _ = _pair(5)
    lo, hi, avg = truncate_low(f, 2), truncate_high(f, 2), angular_average(f)
    phi, I = _pts()
    assert np.allclose(lo(phi, I) + hi(phi, I) + avg(phi, I), f(phi, I), atol=1e-13)
    assert np.all(np.abs(hi.modes).sum(1) > 2)


def test_weighted_norm_dominates_values():
    f, _ = _pair(6)
    dom = DomainSpec((0.6, 0.1), (0.8, 0.3), 0.5, 0.05)
    phi, I = np.random.default_rng(0).uniform(0, 6.3, (200, 2)), np.random.default_rng(1).uniform([0.6, 0.1], [0.8, 0.3], (200, 2))
    assert np.max(np.abs(f(phi, I))) <= weighted_norm(f, dom)
    assert np.all(mode_bounds(f, dom) >= 0)
    assert derivative_norm(f, dom, 2.0) >= derivative_norm(f, dom, 1.0)


def test_domain_must_avoid_critical_set():
    with pytest.raises(InvalidParams):
        DomainSpec((0.01, 0.0), (0.1, 1.0), 1.0, 0.05)
    with pytest.raises(InvalidParams):
        DomainSpec((0.5,), (0.4,), 1.0, 0.05)


def test_trig_constructor_matches_formula():
    f = FourierTaylor.trig(2, 4, 2, np.zeros(2), cos={(1, 0): 2.0}, sin={(0, 1): {(1, 0): 3.0}}, const={(0, 2): 0.5})
    phi, I = _pts()
    ref = 2 * np.cos(phi[:, 0]) + 3 * I[:, 0] * np.sin(phi[:, 1]) + 0.5 * I[:, 1] ** 2
    assert np.allclose(f(phi, I), ref, atol=1e-13)
