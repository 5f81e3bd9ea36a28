import numpy as np
import pytest

from bmkam.diophantine import (
    DioParams,
    ResonanceZone,
    critical_set_budget,
    diophantine_sample,
    divisor,
    is_nonresonant,
    series_partial_sums,
    zone_bound_sensitivity,
    zone_measure_bound,
    zone_measure_mc,
)
from bmkam.errors import EmptyShrunkDomain, InvalidParams
from bmkam.kam import desk_model
from bmkam.singular import AAForm, SingularPart

FORM = AAForm(2, 1, (1.0,)).paired(SingularPart(1, 2.0))
SING = SingularPart(1, 2.0)


def test_divisor_at_Z_uses_modular_period():
    J = np.array([0.3, 0.7])
    assert divisor((1, 0), J, "Z", FORM, SING) == pytest.approx(2.0)
    assert divisor((1, 2), J, 0, FORM, SING) == pytest.approx(2.0 + 1.4)
    assert is_nonresonant(J, "Z", FORM, SING, (1, 0), 1.0)
    with pytest.raises(InvalidParams):
        is_nonresonant(J, 0.5, FORM, SING, (0, 0), 1.0)


def test_bound_covers_mc():
    box = ((0.0, 0.0), (1.0, 1.0))
    for k in ((1, 1), (2, -3), (0, 1)):
        mc, sig = zone_measure_mc(box, k, 0.02, 0.5, FORM, SING, N=50_000, seed=1)
        assert mc <= zone_measure_bound(box, k, 0.02, 0.5, FORM, SING) + 3 * sig


def test_negative_modular_period():
    sing = SingularPart(1, -0.5)
    form = AAForm(2, 1, (1.0,)).paired(sing)
    assert critical_set_budget(1.0 / abs(form.K_mod), form.K_mod)
    assert zone_measure_bound(((0.0, 0.0), (1.0, 1.0)), (1, 0), 0.4, "Z", form, sing) == 0.0
    z = ResonanceZone((1, 0), 0.4, form, sing, at_Z=True)
    assert not z.contains(np.random.default_rng(0).uniform(-1, 1, (1000, 2))).any()


def test_sensitivity_brackets_midpoint():
    s = zone_bound_sensitivity(((0.0, 0.0), (1.0, 1.0)), (1, 1), 0.01, (0.2, 1.0), FORM, SING)
    assert s["min"] <= s["midpoint"] <= s["max"]


def test_sampling_reproducible_and_shrinks():
    dm = desk_model()
    G = ((0.79, 0.5), (0.81, 0.54))
    dio = DioParams(tau=1.5, gamma=1e-3, K=8)
    a = diophantine_sample(G, dm["form"], dm["h"].sing, dm["h"], dio, 2000, seed=5)
    b = diophantine_sample(G, dm["form"], dm["h"].sing, dm["h"], dio, 2000, seed=5)
    assert np.array_equal(a.kept, b.kept)
    assert np.all(a.points >= np.array(G[0]) + 2e-3 - 1e-15)
    assert 0 < a.kept_fraction <= 1
    with pytest.raises(EmptyShrunkDomain):
        diophantine_sample(G, dm["form"], dm["h"].sing, dm["h"], DioParams(1.5, 0.1, 8), 10, seed=0)
    with pytest.raises(InvalidParams):
        DioParams(tau=0.5, gamma=0.1).check(2)


def test_series_partial_sums_monotone():
    s = series_partial_sums(1.5, 2, [2, 4, 8, 16])
    assert all(x < y for x, y in zip(s, s[1:]))
