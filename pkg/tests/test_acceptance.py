"""Acceptance checks, one test per criterion (C01..C11).

Each test asserts the stated tolerance directly; none of them is relaxed.
"""

from __future__ import annotations

import math
import time
import warnings

import numpy as np
import pytest

from bmkam.desing import (
    Component,
    build_profile,
    desingularize_system,
    dynamics_equality_residual,
    hamiltonian_of,
    simple_system,
    transport_trajectory,
)
from bmkam.diophantine import ResonanceZone, critical_set_budget, zone_measure_bound, zone_measure_mc
from bmkam.fourier import (
    DomainSpec,
    FourierTaylor,
    _action_norm,
    _phi_norm,
    derivative_norm,
    random_trig,
    truncate_high,
    weighted_norm,
)
from bmkam.homological import StepParams, divisor_minimum, homological_residual, kam_step, solve_homological
from bmkam.kam import birkhoff_rotation_number, build_schedule, desk_model, run_kam, torus_point
from bmkam.mechanics import (
    classify_bm,
    kepler_levi_civita,
    mcgehee_double_collision,
    sphere_system,
    three_body_mcgehee,
    torus_system,
)
from bmkam.singular import (
    AAForm,
    BmFunction,
    SingularPart,
    bracket_from_grads,
    bracket_gradient,
    frequency,
    integrate_flow,
    poisson_bracket,
    script_B,
)


def _random_form(rng, n, m):
    c = [rng.uniform(0.5, 1.5) for _ in range(m)]
    return AAForm(n, m, tuple(c))


def _random_sing(rng, m):
    qhat = [rng.normal() for _ in range(m)]
    qhat[-1] = rng.choice([-1, 1]) * rng.uniform(0.5, 2.0)
    return SingularPart.from_qhat(qhat)


# ---------------------------------------------------------------------------
# C01


def test_c01_bracket_axioms():
    t0 = time.perf_counter()
    rng = np.random.default_rng(101)
    worst = {"antisym": 0.0, "leibniz": 0.0, "jacobi": 0.0}
    for trial in range(100):
        n = (2, 3)[trial % 2]
        m = 1 + trial % 3
        form = _random_form(rng, n, m)
        I0 = np.r_[rng.uniform(0.3, 1.0), rng.uniform(-1, 1, n - 1)]
        mk = lambda: random_trig(rng, n, 2, 6, I0, K_cap=8, n_modes=3, poly_deg=2)  # noqa: E731
        f = BmFunction(_random_sing(rng, m), mk())
        g = BmFunction(_random_sing(rng, m), mk())
        h = BmFunction(None, mk())
        phi = rng.uniform(0, 2 * math.pi, n)
        I = I0 + rng.uniform(-0.1, 0.1, n)
        p = (phi, I)

        fg, gf = poisson_bracket(f, g, form, p), poisson_bracket(g, f, form, p)
        worst["antisym"] = max(worst["antisym"], abs(fg + gf) / max(abs(fg), 1e-300))

        # Leibniz against the series product of the two smooth factors
        g2 = BmFunction(None, mk())
        lhs = poisson_bracket(f, BmFunction(None, h.smooth * g2.smooth), form, p)
        hv, g2v = float(h.value(phi, I)), float(g2.value(phi, I))
        a, b = poisson_bracket(f, h, form, p) * g2v, hv * poisson_bracket(f, g2, form, p)
        worst["leibniz"] = max(worst["leibniz"], abs(lhs - a - b) / max(abs(lhs), abs(a) + abs(b)))

        B = script_B(form, I[0])
        terms = []
        for x, y, z in ((f, g, h), (g, h, f), (h, f, g)):
            dxy = bracket_gradient(x, y, form, phi, I)
            gz = np.r_[z.grad(phi, I)]
            terms.append(bracket_from_grads(dxy, gz.ravel(), B, n))
        worst["jacobi"] = max(worst["jacobi"], abs(sum(terms)) / sum(abs(t) for t in terms))
    elapsed = time.perf_counter() - t0
    assert worst["antisym"] <= 1e-12, worst
    assert worst["jacobi"] <= 1e-9, worst
    assert worst["leibniz"] <= 1e-9, worst
    assert elapsed < 10, elapsed


# ---------------------------------------------------------------------------
# C02


def _approach_case(m, rng):
    """Smooth H whose flow drives I1 monotonically towards Z."""
    n = 2
    c = [rng.uniform(-0.5, 0.5) for _ in range(m - 1)] + [rng.uniform(0.5, 2.0)]
    form = AAForm(n, m, tuple(c))
    a, I10, t_end = {1: (1.0, 0.5, 40.0), 2: (100.0, 0.05, 60.0), 3: (1e4, 0.01, 300.0)}[m]
    H = FourierTaylor.trig(n, 4, 2, np.zeros(n), cos={(1, 0): -a, (1, -1): 0.2}, const={(0, 2): 0.5})
    p0 = (np.array([math.pi / 2, rng.uniform(0, 2 * math.pi)]), np.array([I10, rng.uniform(0.2, 1.0)]))
    return form, BmFunction(None, H), p0, t_end


def test_c02_defining_function_preservation():
    t0 = time.perf_counter()
    rng = np.random.default_rng(202)
    for m in (1, 2, 3):
        for _ in range(3):
            form, H, p0, t_end = _approach_case(m, rng)
            dt = 0.01 if m < 3 else 0.05
            tr = integrate_flow(H, form, p0, t_end, dt, floor=1e-3)
            assert tr.halted and abs(tr.I[-1, 0]) < 1e-3, (m, tr.I[-1])
            gp, _ = H.grad(tr.phi_unwrapped, tr.I)
            x = tr.I[:, 0]
            ratio = np.abs(script_B(form, x) * gp[:, 0]) / np.abs(x) ** m
            bound = np.max(np.abs(gp[:, 0])) / abs(form.c[-1]) * 1.1
            assert np.max(ratio) <= bound, (m, np.max(ratio), bound)
    assert time.perf_counter() - t0 < 30


# ---------------------------------------------------------------------------
# C03


def test_c03_homological_residual():
    t0 = time.perf_counter()
    rng = np.random.default_rng(303)
    done = 0
    while done < 50:
        n = int(rng.choice([2, 3]))
        m = int(rng.integers(1, 4))
        K = int(rng.integers(2, 21))
        deg = 3
        form = _random_form(rng, n, m)
        sing = _random_sing(rng, m)
        I0 = np.r_[rng.uniform(0.3, 1.0), rng.uniform(-1, 1, n - 1)]
        poly = {tuple(int(i == j) * 2 for i in range(n)): rng.uniform(0.5, 1.5) for j in range(n)}
        for j in range(n):
            poly[tuple(int(i == j) for i in range(n))] = rng.normal()
        h = BmFunction(sing, FourierTaylor.polynomial(n, K, deg, I0, poly))
        R = random_trig(rng, n, min(K, 6), deg, I0, K_cap=K, n_modes=8)
        dmin, _ = divisor_minimum(h, form, R.modes[np.abs(R.modes).sum(1) > 0], I0[None])
        if dmin < 1e-2:
            continue
        W = solve_homological(R, h, form, K)
        dom = DomainSpec(tuple(I0 - 1e-3), tuple(I0 + 1e-3), 0.5, 1e-2)
        res = homological_residual(W, h, R, form, K)
        assert weighted_norm(res, dom) <= 1e-10 * weighted_norm(R, dom)
        done += 1
    assert time.perf_counter() - t0 < 20


# ---------------------------------------------------------------------------
# C04


def test_c04_step_contraction():
    t0 = time.perf_counter()
    ratios = []
    for eps in (1e-3, 1e-4, 1e-5):
        d = desk_model(eps)
        I0 = d["I0"]
        dom = DomainSpec(tuple(I0 - 3e-4), tuple(I0 + 3e-4), 1.0, 6e-4)
        r = dom.radius(I0)
        R = (d["f"] * (eps / weighted_norm(d["f"], dom))).with_scale(r)
        h = BmFunction(d["h"].sing, d["h"].smooth.with_scale(r))
        p = StepParams(K=4, alpha=0.1, delta=(dom.rho1 / 8, dom.rho2 / 8), c=1.0, M=2.0)
        # R carries no modes beyond K, so the linear tail term is absent
        assert truncate_high(R, p.K).is_zero()
        diag = kam_step(h, R, p, dom, d["form"]).diagnostics
        e, e_new = diag["eps"], diag["eps_new"]
        bound = math.exp(-p.K * p.delta[0]) * e + 14 * p.A / (p.alpha * p.delta_hat) * e * e
        assert e_new <= bound, (eps, e_new, bound)
        ratios.append(e_new / e**2)
    assert max(ratios) / min(ratios) <= 2.0, ratios
    assert time.perf_counter() - t0 < 60


# ---------------------------------------------------------------------------
# C05


def test_c05_full_kam_run():
    t0 = time.perf_counter()
    d = desk_model(1e-6)
    sched = build_schedule(**d["schedule"], q_max=6)
    with warnings.catch_warnings():
        warnings.simplefilter("ignore")
        run = run_kam(d["h"], d["f"], d["form"], sched, d["box"], early_stop=False)
    assert run.final.q == 6
    assert run.final.eps <= 1e-18, run.final.eps
    tm = run.torus()
    u0 = frequency(d["h"], d["form"], np.asarray(d["I0"])[None])[0]
    H = BmFunction(d["h"].sing, d["h"].smooth + d["f"])
    omega, tr = birkhoff_rotation_number(H, d["form"], torus_point(tm, [0.0, 0.0]), 200.0, 0.01)
    assert np.max(np.abs(tm.omega - u0)) <= 1e-8
    assert np.max(np.abs(omega - tm.omega)) <= 1e-8, omega - tm.omega
    phi, I = tm(np.outer(tr.times, tm.omega))
    dphi = np.angle(np.exp(1j * (phi - tr.phi_unwrapped)))
    assert max(np.abs(dphi).max(), np.abs(I - tr.I).max()) <= 1e-4
    assert time.perf_counter() - t0 < 120


# ---------------------------------------------------------------------------
# C06


def test_c06_frequency_lock_at_Z():
    rng = np.random.default_rng(606)
    for _ in range(20):
        n, m = int(rng.integers(2, 4)), int(rng.integers(1, 5))
        sing = _random_sing(rng, m)
        form = _random_form(rng, n, m).paired(sing)
        I0 = np.r_[0.3, rng.uniform(-1, 1, n - 1)]
        poly = {(0,) * n: rng.normal(), tuple(int(i == 0) for i in range(n)): rng.normal()}
        h = BmFunction(sing, FourierTaylor.polynomial(n, 2, 3, I0, poly))
        target = sing.qhat[-1] / form.c[-1]
        assert abs(target - 1.0 / form.K_mod) <= 1e-12 * abs(target)
        for x in (0.0, 1e-13, -1e-13):
            I = np.r_[x, rng.uniform(-1, 1, n - 1)]
            got = frequency(h, form, I[None])[0, 0]
            assert abs(got - target) <= 1e-12 * max(1.0, abs(target)), (x, got, target)


# ---------------------------------------------------------------------------
# C07


def test_c07_resonance_zone_measures():
    t0 = time.perf_counter()
    rng = np.random.default_rng(707)
    for trial in range(100):
        n = int(rng.choice([2, 3]))
        form = AAForm(n, 1, (rng.uniform(0.5, 2.0),))
        sing = SingularPart(1, rng.uniform(0.5, 2.0))
        lo = rng.uniform(-1, 1, n)
        box = (tuple(lo), tuple(lo + rng.uniform(0.5, 1.5, n)))
        k = np.zeros(n, dtype=int)
        while not np.any(k[1:]):
            k = rng.integers(-4, 5, n)
        alpha = 10 ** rng.uniform(-3, -1)
        I1 = rng.uniform(0.1, 2.0)
        mc, sig = zone_measure_mc(box, k, alpha, I1, form, sing, N=100_000, seed=trial)
        bound = zone_measure_bound(box, k, alpha, I1, form, sing)
        assert mc <= bound + 3 * sig, (trial, mc, bound, sig)

    # critical set: kbar = 0 modes never exclude anything once beta <= 1/K'
    for _ in range(20):
        n = int(rng.choice([2, 3]))
        sing = SingularPart(1, rng.choice([-1, 1]) * rng.uniform(0.5, 2.0))
        form = AAForm(n, 1, (rng.uniform(0.5, 2.0),)).paired(sing)
        Kp = abs(form.K_mod)
        beta = rng.uniform(0.1, 1.0) / Kp
        assert critical_set_budget(beta, Kp)
        box = (tuple(-np.ones(n)), tuple(np.ones(n)))
        for k1 in (1, -1, 2, 5):
            k = np.r_[k1, np.zeros(n - 1, dtype=int)]
            zone = ResonanceZone(tuple(k), beta, form, sing, at_Z=True)
            J = np.random.default_rng(k1 + 10).uniform(-1, 1, (100_000, n))
            assert not zone.contains(J).any()
            assert zone_measure_bound(box, k, beta, "Z", form, sing) == 0.0
    assert time.perf_counter() - t0 < 30


# ---------------------------------------------------------------------------
# C08


def test_c08_desingularized_dynamics():
    t0 = time.perf_counter()
    rng = np.random.default_rng(808)
    for m in (2, 3):
        form, F = simple_system(m)
        for eps in (0.1, 0.01):
            prof = build_profile(m, eps)
            S = desingularize_system(F, form, prof)
            sample = [
                (rng.uniform(0, 2 * math.pi, 2),
                 np.r_[rng.choice([-1, 1]) * 10 ** rng.uniform(-4, 0.5), rng.uniform(-1, 1)])
                for _ in range(1000)
            ]
            assert dynamics_equality_residual(S, form, prof, sample) <= 1e-9
            if m % 2:
                assert S.folded_defect() <= 1e-10
    assert time.perf_counter() - t0 < 20


# ---------------------------------------------------------------------------
# C09


def test_c09_transport_matches_original_flow():
    t0 = time.perf_counter()
    n = 2
    rest = FourierTaylor.trig(n, 4, 2, np.zeros(n), cos={(0, 1): 0.1}, const={(0, 2): 0.5})
    for m in (2, 3):
        form, F = simple_system(m)
        comps = [F[0], Component(rest=rest)]
        for eps in (0.1, 0.01):
            S = desingularize_system(comps, form, build_profile(m, eps))
            for I1 in (0.3 * eps, 3 * eps, -0.5 * eps):
                p0 = (np.array([0.3, 0.2]), np.array([I1, 0.4]))
                ts, ph, I = transport_trajectory(S, p0, 10.0, 0.01)
                tr = integrate_flow(hamiltonian_of(comps, n), form, p0, 10.0, 0.01, drift_tol=1e-3)
                assert np.allclose(ts, tr.times)
                err_phi = np.max(np.abs(ph - tr.phi_unwrapped) / np.maximum(1.0, np.abs(tr.phi_unwrapped)))
                err_I = np.max(np.abs(I - tr.I))
                assert max(err_phi, err_I) <= 1e-6, (m, eps, I1, err_phi, err_I)
    assert time.perf_counter() - t0 < 30


# ---------------------------------------------------------------------------
# C10


def _log_slope(f, rs, r_index=0, base=(0.0, 0.3, 0.7, 0.4)):
    vals = []
    for r in rs:
        y = np.array(base, dtype=float)
        y[r_index] = r
        vals.append(abs(f(y)))
    return np.polyfit(np.log(rs), np.log(vals), 1)[0]


def test_c10_mechanics_numbers():
    t0 = time.perf_counter()
    rng = np.random.default_rng(1010)
    rs = np.geomspace(1e-2, 1e-5, 6)
    verdicts = {}
    for alpha in (1, 2, 6):
        pb = mcgehee_double_collision(alpha)
        slope = _log_slope(pb.pfaffian, rs)
        assert abs(slope - (2 - 3 * alpha) / (2 + alpha)) <= 1e-8, (alpha, slope)
        verdicts[alpha] = classify_bm(pb, [0.0, 0.3, 0.7, 0.4])
    assert verdicts[2]["stage1"] and verdicts[2]["stage2"] and verdicts[2]["m"] == 1
    assert verdicts[6]["stage1"] and not verdicts[6]["stage2"] and verdicts[6]["m"] == 2
    assert not verdicts[1]["stage1"]

    pb, form, _ = three_body_mcgehee()
    pts = [np.r_[rng.uniform(0.3, 2), rng.normal(), rng.uniform(0, 6), rng.normal()] for _ in range(50)]
    assert pb.coefficient_check(pts) <= 1e-10
    for y in pts:
        assert abs(abs(pb.matrix(y)[0, 1]) - 4 / y[0] ** 3) <= 1e-10 * 4 / y[0] ** 3
    assert form.m == 3 and classify_bm(pb, [0.0, 0.2, 0.3, 0.5])["m"] == 3

    for m in (1, 2, 3):
        hs = [(rng.choice([-1, 1]) * 10 ** rng.uniform(-2, 0), rng.uniform(0, 6)) for _ in range(50)]
        ths = [(rng.uniform(0.1, 3.0) + rng.choice([0, math.pi]), rng.uniform(0, 6)) for _ in range(50)]
        assert sphere_system(m).residual(hs) <= 1e-10
        assert torus_system(m).residual(ths) <= 1e-10

    # Kepler in Levi-Civita variables: density u1^2 - u2^2, degenerate on u1 = +-u2
    kep = kepler_levi_civita()
    pts = [rng.normal(size=4) for _ in range(50)]
    assert kep.coefficient_check(pts) <= 1e-10
    dens_err = max(abs(kep.pfaffian(y) - (y[0] ** 2 - y[2] ** 2)) / max(1.0, abs(kep.pfaffian(y))) for y in pts)
    on_locus = max(abs(kep.pfaffian(np.array([u, 0.3, s * u, -0.2]))) for u in (0.5, 1.0, 2.0) for s in (1, -1))
    assert time.perf_counter() - t0 < 10
    assert dens_err <= 1e-10, f"Kepler Pfaffian differs from u1^2 - u2^2 by {dens_err:.3g}"
    assert on_locus <= 1e-12, f"Kepler Pfaffian on u1 = +-u2 is {on_locus:.3g}, not zero"


# ---------------------------------------------------------------------------
# C11


def test_c11_norm_machinery():
    t0 = time.perf_counter()
    rng = np.random.default_rng(1111)
    violations = 0
    for _ in range(200):
        n = int(rng.choice([2, 3]))
        I0 = np.r_[rng.uniform(0.5, 2.0), rng.uniform(-1, 1, n - 1)]
        f = random_trig(rng, n, int(rng.integers(2, 7)), 4, I0, n_modes=6)
        hw = rng.uniform(1e-3, 0.1)
        rho1, rho2 = rng.uniform(0.2, 1.5), rng.uniform(0.01, 0.2)
        dom = DomainSpec(tuple(I0 - hw), tuple(I0 + hw), rho1, rho2)
        d1, d2 = rng.uniform(0.05, 0.95) * rho1, rng.uniform(0.05, 0.95) * rho2
        full = weighted_norm(f, dom)
        slack = 1 + 1e-12
        violations += _phi_norm(f, dom.shrink(d1, 0.0)) > full / (math.e * d1) * slack
        violations += _action_norm(f, dom.shrink(0.0, d2)) > full / d2 * slack
        K = int(rng.integers(1, 5))
        c = rng.uniform(0.1, 2.0)
        tail = derivative_norm(truncate_high(f, K), dom.shrink(d1, 0.0), c)
        violations += tail > math.exp(-K * d1) * derivative_norm(f, dom, c) * slack
    assert violations == 0
    assert time.perf_counter() - t0 < 10
