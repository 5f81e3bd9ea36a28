import warnings

import numpy as np
import pytest

from bmkam.errors import HypothesisViolated, InvalidParams, NotInSurvivingSet
from bmkam.kam import (
    absorb_singular,
    build_schedule,
    check_theorem_hypotheses,
    desk_model,
    run_kam,
    torus_frequency,
    torus_point,
)
from bmkam.singular import AAForm, BmFunction, SingularPart, frequency


@pytest.fixture(scope="module")
def short_run():
    d = desk_model()
    s = build_schedule(**d["schedule"], q_max=3)
    with warnings.catch_warnings():
        warnings.simplefilter("ignore")
        run = run_kam(d["h"], d["f"], d["form"], s, d["box"], early_stop=False)
    return d, run


def test_schedule_sequences():
    d = desk_model()
    s = build_schedule(**d["schedule"], q_max=5)
    assert list(s.Kq[1:5]) == [4, 8, 16, 32]
    assert np.all(np.diff(s.rho1q) < 0) and np.all(np.diff(s.rho2q) < 0)
    assert s.sandwich_ok()
    assert s.K_required > s.K and s.relaxed
    with pytest.raises(InvalidParams):
        build_schedule(**dict(d["schedule"], tau=0.5))


def test_hypotheses_report():
    d = desk_model()
    s = build_schedule(**d["schedule"], q_max=2)
    hyp = check_theorem_hypotheses(s, 1e-6, d["form"].K_mod)
    assert set(hyp) == {"kam1", "kam2", "kam3"}
    assert all(len(v) == 3 for v in hyp.values())


def test_strict_mode_stops(short_run):
    d, _ = short_run
    s = build_schedule(**d["schedule"], q_max=2)
    with pytest.raises(HypothesisViolated) as ei:
        run_kam(d["h"], d["f"], d["form"], s, d["box"], strict=True)
    assert "kam" in str(ei.value)


def test_errors_contract(short_run):
    _, run = short_run
    eps = [st.eps for st in run.states]
    assert len(eps) == 4
    assert all(b < a ** 1.5 for a, b in zip(eps[1:], eps[2:]))
    rec = run.final.record()
    assert rec["eps"] == run.final.eps and "step_eps" in rec


def test_torus_frequency_preserved(short_run):
    d, run = short_run
    tm = run.torus()
    u0 = frequency(d["h"], d["form"], d["I0"][None])[0]
    assert np.allclose(tm.omega, u0, atol=1e-12)
    assert np.allclose(torus_frequency(run, d["I0"]), u0, atol=1e-10)
    p = torus_point(tm, [0.0, 0.0])
    assert abs(p.I[0] - d["I0"][0]) < 1e-4
    with pytest.raises(NotInSurvivingSet):
        torus_point(tm, [0.0, 0.0], I0=d["I0"] + 1e-3)


def test_absorb_singular_updates_period():
    form = AAForm(2, 1, (2.0,))
    h = BmFunction(SingularPart(1, 1.0), n=2)
    f = BmFunction(SingularPart(1, 0.5), n=2)
    h2, smooth, form2 = absorb_singular(h, f, form)
    assert smooth is None and h2.sing.q0 == 1.5
    assert form2.K_mod == pytest.approx(2.0 / 1.5)
