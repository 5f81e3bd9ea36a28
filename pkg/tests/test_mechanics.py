import math

import numpy as np
import pytest

from bmkam.errors import BranchCrossing
from bmkam.mechanics import (
    classify_bm,
    elliptic_inverse,
    integrate_pulled_back,
    mcgehee_exponent,
    pfaffian,
    three_body_mcgehee,
    torus_primitive,
    torus_primitive_between,
    torus_primitive_hypergeometric,
    two_fixed_centers,
)


def test_pfaffian_squares_to_determinant():
    rng = np.random.default_rng(0)
    for n in (2, 4, 6):
        A = rng.normal(size=(n, n))
        A = A - A.T
        assert pfaffian(A) ** 2 == pytest.approx(np.linalg.det(A), rel=1e-10)


def test_mcgehee_exponent_values():
    assert mcgehee_exponent(2) == -1.0
    assert mcgehee_exponent(6) == -2.0
    assert mcgehee_exponent(1) == pytest.approx(-1 / 3)


def test_two_centers_chart():
    pb = two_fixed_centers()
    rng = np.random.default_rng(1)
    pts = [rng.normal(size=4) for _ in range(20)]
    assert pb.coefficient_check(pts) < 1e-10
    assert pb.density_check(pts) < 1e-12
    lam, nu = elliptic_inverse(math.sinh(0.7) * math.cos(0.4), math.cosh(0.7) * math.sin(0.4))
    assert abs(lam - 0.7) < 1e-10 and abs(nu - 0.4) < 1e-10


def test_three_body_flow():
    pb, form, ham = three_body_mcgehee(0.1)
    assert form.c == (0.0, 0.0, 4.0)
    ts, ys, Es, halted = integrate_pulled_back(pb, ham, [1.0, 0.0, 0.3, 1.0], 1.0, 1e-3)
    assert not halted and np.ptp(Es) < 1e-8
    assert classify_bm(pb, [0.0, 0.2, 0.3, 0.5])["stage2"]


def test_torus_primitive_forms():
    for m in (1, 2, 3, 4):
        for th in (0.3, 1.2, 2.8, 3.5, 5.9):
            assert torus_primitive(th, m) == pytest.approx(torus_primitive_hypergeometric(th, m), abs=1e-11)
    assert torus_primitive(1.0, 2) == pytest.approx(1 / math.tan(1.0))
    with pytest.raises(BranchCrossing):
        torus_primitive_between(1.0, 4.0, 2)
