"""Outer KAM iteration, parameter schedule and torus reconstruction."""

from __future__ import annotations

import math
import time
import warnings
from dataclasses import dataclass, field

import numpy as np

from .errors import (
    DivergenceDetected,
    HypothesisViolated,
    InvalidParams,
    NotInSurvivingSet,
)
from .fourier import (
    DomainSpec,
    FourierTaylor,
    action_gradient_norm,
    angular_average,
    derivative_norm,
    weighted_norm,
)
from .homological import StepParams, divisor_minimum, kam_step, modes_up_to
from .singular import (
    AAForm,
    BmFunction,
    PhasePoint,
    SingularPart,
    frequency,
    frequency_jets,
    integrate_flow,
    script_B,
)

__all__ = [
    "KamSchedule",
    "KamState",
    "KamRun",
    "TorusMapEval",
    "build_schedule",
    "check_theorem_hypotheses",
    "absorb_singular",
    "run_kam",
    "torus_frequency",
    "torus_point",
    "birkhoff_rotation_number",
    "desk_model",
]


# ---------------------------------------------------------------------------
# schedule


@dataclass(frozen=True)
class KamSchedule:
    """Per-step parameters of the iteration, indexed by q = 0..q_max (+1 where needed)."""

    M: float
    L: float
    mu: float
    rho1: float
    rho2: float
    tau: float
    gamma: float
    nu: float
    n: int
    K: int
    q_max: int
    rho_hat: float
    beta: float
    K_required: int
    relaxed: tuple
    Mq: np.ndarray
    Lq: np.ndarray
    muq: np.ndarray
    Kq: np.ndarray
    rho1q: np.ndarray
    rho2q: np.ndarray
    delta1q: np.ndarray
    delta2q: np.ndarray
    cq: np.ndarray
    betaq: np.ndarray
    betapq: np.ndarray

    def alpha(self, q: int) -> float:
        """Non-resonance level used in step q >= 1."""
        return float(self.betapq[q - 1] / self.Kq[q] ** self.tau)

    def A(self, q: int) -> float:
        return float(1 + 2 * self.Mq[q - 1] * self.cq[q] * self.Kq[q] ** self.tau / self.betapq[q - 1])

    def induction_bound(self, eps: float, q: int) -> float:
        """8 eps / (nu rho1 2^{(2 tau + 2) q})."""
        return 8 * eps / (self.nu * self.rho1 * 2 ** ((2 * self.tau + 2) * q))

    def sandwich_ok(self) -> bool:
        nu, r1, b, M, t = self.nu, self.rho1, self.beta, self.M, self.tau
        ok = True
        for q in range(1, self.q_max + 1):
            lo1 = nu * r1 / (8 * 2 ** (nu * (q - 1)))
            hi1 = nu * r1 / (4 * 2 ** (nu * (q - 1)))
            lo2 = nu * b / (64 * M * self.Kq[q] ** (t + 1))
            hi2 = nu * b / (32 * M * self.Kq[q] ** (t + 1))
            d1, d2 = self.delta1q[q], self.delta2q[q]
            ok &= lo1 * (1 - 1e-12) <= d1 <= hi1 * (1 + 1e-12)
            ok &= lo2 * (1 - 1e-12) <= d2 <= hi2 * (1 + 1e-12)
        ok &= bool(np.all(self.betapq >= nu * b / 4 * (1 - 1e-12)))
        return bool(ok)

    def to_json(self) -> dict:
        out = {}
        for k, v in self.__dict__.items():
            out[k] = v.tolist() if isinstance(v, np.ndarray) else (list(v) if isinstance(v, tuple) else v)
        return out


def build_schedule(M, L, mu, rho1, rho2, tau, gamma, nu, n, *, q_max: int = 8, K: int | None = None) -> KamSchedule:
    """Materialise the parameter sequences of the iteration.

    ``K`` overrides the base truncation order; the constraints it fails are
    listed in ``relaxed``.
    """
    for name, v in (("M", M), ("L", L), ("mu", mu), ("rho1", rho1), ("rho2", rho2), ("gamma", gamma)):
        if not v > 0:
            raise InvalidParams(f"{name} must be positive")
    if not 0 < nu <= 1:
        raise InvalidParams("nu must lie in (0, 1]")
    if n < 2 or tau <= n - 1:
        raise InvalidParams("need n >= 2 and tau > n - 1")
    if q_max < 1:
        raise InvalidParams("q_max must be at least 1")
    rho_hat = min(nu * rho1 / (12 * (tau + 2)), 1.0)
    beta = gamma / L
    K_req = max(math.ceil(1 / rho_hat - 1e-12), math.ceil((nu * beta / (mu * 2 ** (2 * tau + 12))) ** (1 / tau) - 1e-12), 1)
    relaxed = []
    if K is None:
        K = K_req
    else:
        if K < 1:
            raise InvalidParams("K must be positive")
        if K < 1 / rho_hat:
            relaxed.append("K>=1/rho_hat")
        if K < (nu * beta / (mu * 2 ** (2 * tau + 12))) ** (1 / tau):
            relaxed.append("K>=(nu beta/(mu 2^(2tau+12)))^(1/tau)")
    q = np.arange(q_max + 2)
    Mq = (2 - 2.0 ** -q) * M
    Lq = (2 - 2.0 ** -q) * L
    muq = (1 + 2.0 ** -q) * mu / 2
    Kq = np.where(q == 0, 0, K * 2.0 ** (q - 1)).astype(float)
    rho1q = (1 + 2.0 ** (-nu * q)) * rho1 / 4
    Kq_next = K * 2.0 ** q
    rho2q = nu * beta / (32 * M * Kq_next ** (tau + 1))
    delta1q = np.r_[np.nan, rho1q[:-1] - rho1q[1:]]
    delta2q = np.r_[np.nan, rho2q[:-1] - rho2q[1:]]
    cq = delta2q / delta1q
    betaq = (1 - 2.0 ** (-nu * q)) * beta
    betapq = np.r_[(betaq[:-1] + betaq[1:]) / 2, np.nan]
    sch = KamSchedule(
        float(M), float(L), float(mu), float(rho1), float(rho2), float(tau), float(gamma), float(nu), int(n),
        int(K), int(q_max), rho_hat, beta, int(K_req), tuple(relaxed),
        Mq, Lq, muq, Kq, rho1q, rho2q, delta1q, delta2q, cq, betaq, betapq[: q_max + 1],
    )
    return sch


def check_theorem_hypotheses(s: KamSchedule, eps: float, K_mod: float | None = None) -> dict:
    """Evaluate the three smallness conditions of the theorem.

    Returns ``{name: (holds, lhs, rhs)}``; ``K_mod`` enters the second
    condition when the singular part is of maximal degree.
    """
    nu, mu, rh, t, g, L, M = s.nu, s.mu, s.rho_hat, s.tau, s.gamma, s.L, s.M
    kam1_rhs = nu ** 2 * mu ** 2 * rh ** (2 * t + 2) * g ** 2 / (2 ** (4 * t + 32) * L ** 6 * M ** 3)
    kam2_rhs = 8 * L * M * s.rho2 / (nu * rh ** (t + 1))
    if K_mod:
        kam2_rhs = min(kam2_rhs, L / abs(K_mod))
    kam3_rhs = min(2 ** (t + 5) * L ** 2 * M, 2 ** 7 * s.rho1 * L ** 4 * s.K ** (t + 1),
                   s.beta * nu ** (t + 1) * 2 ** (2 * t + 1) * s.rho1 ** t)
    return {
        "kam1": (bool(eps <= kam1_rhs), float(eps), float(kam1_rhs)),
        "kam2": (bool(g <= kam2_rhs), float(g), float(kam2_rhs)),
        "kam3": (bool(mu <= kam3_rhs), float(mu), float(kam3_rhs)),
    }


# ---------------------------------------------------------------------------
# states


@dataclass
class KamState:
    q: int
    hhat: BmFunction
    R: FourierTaylor
    dom: DomainSpec
    eps: float
    eta: float
    xi: float
    u: np.ndarray
    W: FourierTaylor | None = None
    diagnostics: dict = field(default_factory=dict)
    transform_log: list = field(default_factory=list)

    def record(self) -> dict:
        """JSON-ready summary (no series)."""
        d = {"q": self.q, "eps": self.eps, "eta": self.eta, "xi": self.xi, "u_I0": self.u.tolist(),
             "rho": [self.dom.rho1, self.dom.rho2], "cap_loss": self.R.cap_loss, "modes": self.R.num_modes}
        for k, v in self.diagnostics.items():
            if isinstance(v, (int, float, str, bool, list)) or v is None:
                d[k if k not in d else f"step_{k}"] = v
        return d


def absorb_singular(h: BmFunction, f, form: AAForm):
    """Move the purely singular part of a perturbation into the integrable part.

    Returns ``(h_new, f_smooth, form_new)``; ``form_new.K_mod`` is the updated
    modular period c_m / (qhat'_m + rhat_m).
    """
    f = BmFunction.wrap(f) if f is not None else None
    if f is None or f.sing is None or f.sing.effective_order == 0:
        return h, (f.smooth if f is not None else None), form
    sing = f.sing if h.sing is None else h.sing + f.sing
    h_new = BmFunction(sing, h.smooth, n=h.n)
    form_new = form.paired(sing) if sing.padded(form.m).is_maximal else AAForm(form.n, form.m, form.c)
    return h_new, f.smooth, form_new


@dataclass
class KamRun:
    states: list
    form: AAForm
    schedule: KamSchedule
    I0: np.ndarray
    stopped: str = ""
    hypotheses: dict = field(default_factory=dict)

    @property
    def final(self) -> KamState:
        return self.states[-1]

    def generators(self) -> list:
        return [s.W for s in self.states[1:]]

    def torus(self, I0=None, *, check: bool = True) -> "TorusMapEval":
        return TorusMapEval.build(self, self.I0 if I0 is None else np.asarray(I0, float), check=check)


def _u_at(h: BmFunction, form: AAForm, I0) -> np.ndarray:
    return frequency(h, form, np.asarray(I0, float)[None, :])[0]


def run_kam(
    h: BmFunction,
    f,
    form: AAForm,
    schedule: KamSchedule,
    box: tuple,
    *,
    q_max: int | None = None,
    strict: bool = False,
    alpha_mode: str = "schedule",
    J: int = 6,
    early_stop: bool = True,
    measure_displacement: bool = False,
    prune_tol: float = 0.0,
    callback=None,
) -> KamRun:
    """Iterate the KAM step on ``H = h + f`` over the action box ``box = (lo, hi)``.

    ``alpha_mode`` is ``"schedule"`` (alpha_q = beta'_{q-1} / K_q^tau) or
    ``"measured"`` (the smallest sampled divisor).  In strict mode a failed
    hypothesis raises :class:`HypothesisViolated` whose ``partial`` attribute
    holds the run so far.
    """
    if alpha_mode not in ("schedule", "measured"):
        raise InvalidParams(f"unknown alpha_mode {alpha_mode!r}")
    q_max = schedule.q_max if q_max is None else int(q_max)
    if q_max > schedule.q_max:
        raise InvalidParams("q_max exceeds the materialised schedule")
    h, R, form = absorb_singular(h, f, form)
    if h.smooth is None:
        raise InvalidParams("the integrable part needs a smooth component")
    if R is None:
        R = FourierTaylor.zeros_like(h.smooth)
    lo, hi = box
    I0 = np.asarray(h.smooth.I0, dtype=float)
    dom_in = DomainSpec(lo, hi, schedule.rho1, schedule.rho2)
    scale = dom_in.radius(I0)
    R = R.with_scale(scale)
    h = BmFunction(h.sing, h.smooth.with_scale(scale))

    eps_input = weighted_norm(R, dom_in)
    hyp = check_theorem_hypotheses(schedule, eps_input, form.K_mod)
    run = KamRun([], form, schedule, I0, hypotheses={k: list(v) for k, v in hyp.items()})
    bad = [k for k, v in hyp.items() if not v[0]]
    if bad:
        if strict:
            err = HypothesisViolated(bad[0], f"lhs={hyp[bad[0]][1]:.3e} rhs={hyp[bad[0]][2]:.3e}")
            err.partial = run
            raise err
        warnings.warn(f"theorem hypotheses relaxed: {', '.join(bad)}", RuntimeWarning, stacklevel=2)

    dom = dom_in.with_rho(schedule.rho1q[0], schedule.rho2q[0])
    c1 = float(schedule.cq[1])
    R0 = angular_average(R)
    st = KamState(0, h, R, dom, derivative_norm(R, dom, c1), weighted_norm(R0, dom), action_gradient_norm(R0, dom),
                  _u_at(h, form, I0), diagnostics={"induction_bound": schedule.induction_bound(eps_input, 0),
                                                  "relaxed_K": list(schedule.relaxed)})
    run.states.append(st)
    if callback:
        callback(st)
    if R.is_zero():
        run.stopped = "zero perturbation"
        return run
    h_norm = weighted_norm(h.smooth, dom) if h.smooth is not None else 1.0
    rises = 0
    for q in range(1, q_max + 1):
        t0 = time.perf_counter()
        prev = run.states[-1]
        K = int(schedule.Kq[q])
        K_eff = min(K, prev.R.K_cap)
        c = float(schedule.cq[q])
        delta = (float(schedule.delta1q[q]), float(schedule.delta2q[q]))
        pts = np.vstack([dom.grid(3), I0[None, :]])
        dmin, kmin = divisor_minimum(prev.hhat, form, modes_up_to(form.n, K_eff), pts)
        if alpha_mode == "schedule":
            alpha = schedule.alpha(q)
        else:
            alpha = dmin
        M = float(schedule.Mq[q - 1])
        p = StepParams(K=K, alpha=alpha, delta=delta, c=c, M=M, J=J)
        try:
            res = kam_step(prev.hhat, prev.R, p, dom, form, strict=strict,
                           measure_displacement=measure_displacement, prune_tol=prune_tol)
        except HypothesisViolated as err:
            err.partial = run
            raise
        dom_new = dom.with_rho(schedule.rho1q[q], schedule.rho2q[q])
        c_next = float(schedule.cq[q + 1]) if q + 1 < len(schedule.cq) else c
        R_new = res.R_new
        R0n = angular_average(R_new)
        u_new = _u_at(res.h_new, form, I0)
        diag = dict(res.diagnostics)
        eps_q = derivative_norm(R_new, dom_new, c_next)
        diag.update({
            "K_eff": K_eff,
            "freq_shift": float(np.max(np.abs(u_new - prev.u))),
            "freq_shift_bound": prev.xi * max(1.0, float(abs(script_B(form, I0[0])))),
            "induction_bound": schedule.induction_bound(eps_input, q),
            "wall_time": time.perf_counter() - t0,
            "alpha_mode": alpha_mode,
            "divisor_min_sampled": dmin,
        })
        st = KamState(q, res.h_new, R_new, dom_new, eps_q, weighted_norm(R0n, dom_new),
                      action_gradient_norm(R0n, dom_new), u_new, res.W, diag, prev.transform_log + [res.diagnostics])
        run.states.append(st)
        if callback:
            callback(st)
        if eps_q > prev.eps:
            rises += 1
            if rises >= 2:
                err = DivergenceDetected(f"eps increased twice in a row (q={q}, eps={eps_q:.3e})")
                err.partial = run
                raise err
        else:
            rises = 0
        dom = dom_new
        if eps_q == 0:
            run.stopped = "perturbation eliminated"
            break
        if early_stop and eps_q < 1e-2 * np.finfo(float).eps * h_norm:
            run.stopped = "eps below rounding level"
            break
    return run


# ---------------------------------------------------------------------------
# torus reconstruction


def _vector_field(W: FourierTaylor, form: AAForm):
    ev = W.evaluator()
    den = form.den_poly
    m = form.m

    def field(phi, I):
        _, gp, gI = ev.value_grad(phi, I)
        x = I[:, 0]
        B = x ** m / np.polynomial.polynomial.polyval(x, den)
        dphi = np.array(gI, dtype=float)
        dphi[:, 0] *= B
        dI = -np.array(gp, dtype=float)
        dI[:, 0] *= B
        return dphi, dI

    return field


def _flow(W: FourierTaylor, form: AAForm, phi, I, steps: int = 4):
    """Time-1 flow of X_W by RK4, vectorised over points."""
    if W is None or W.is_zero():
        return phi, I
    field = _vector_field(W, form)
    h = 1.0 / steps
    for _ in range(steps):
        k1p, k1I = field(phi, I)
        k2p, k2I = field(phi + 0.5 * h * k1p, I + 0.5 * h * k1I)
        k3p, k3I = field(phi + 0.5 * h * k2p, I + 0.5 * h * k2I)
        k4p, k4I = field(phi + h * k3p, I + h * k3I)
        phi = phi + h / 6 * (k1p + 2 * k2p + 2 * k3p + k4p)
        I = I + h / 6 * (k1I + 2 * k2I + 2 * k3I + k4I)
    return phi, I


def _dio_check(u: np.ndarray, gamma: float, tau: float, K: int, form: AAForm) -> tuple[bool, float]:
    modes = modes_up_to(len(u), K)
    d = np.abs(modes @ u)
    l1 = np.abs(modes).sum(axis=1).astype(float)
    worst = float(np.min(d * l1 ** tau))
    return worst >= gamma, worst


def _invert_frequency(h: BmFunction, form: AAForm, target: np.ndarray, seed: np.ndarray,
                      tol: float = 1e-14, max_iter: int = 50) -> tuple[np.ndarray, int]:
    """Damped Newton for u'(I) = target, Jacobian from the frequency jets."""
    nu = frequency_jets(h, form).real
    bs = h.smooth.basis
    I0 = h.smooth.I0
    I = np.array(seed, dtype=float)
    for it in range(max_iter):
        r = _u_at(h, form, I) - target
        if np.max(np.abs(r)) < tol:
            return I, it
        x = I - I0
        Jm = np.empty((len(I), len(I)))
        for j in range(len(I)):
            src, dst, fac = bs.dmaps[j]
            d = np.zeros_like(nu)
            d[:, dst] = nu[:, src] * fac
            Jm[:, j] = d @ bs.monomials(x)
        step = np.linalg.solve(Jm, r)
        lam = 1.0
        r0 = np.max(np.abs(r))
        while lam > 1e-4:
            trial = I - lam * step
            if np.max(np.abs(_u_at(h, form, trial) - target)) < r0:
                break
            lam *= 0.5
        I = I - lam * step
    return I, max_iter


@dataclass
class TorusMapEval:
    """The composed transformation Phi^(1) o ... o Phi^(Q) at a fixed target action."""

    generators: list
    form: AAForm
    I0: np.ndarray
    I0_star: np.ndarray
    omega: np.ndarray
    dio_margin: float
    newton_iterations: int
    displacement: dict = field(default_factory=dict)

    @classmethod
    def build(cls, run: KamRun, I0, *, check: bool = True, flow_tol: float = 1e-20) -> "TorusMapEval":
        s = run.schedule
        h0, hQ = run.states[0].hhat, run.final.hhat
        omega = _u_at(h0, run.form, I0)
        K_chk = int(min(max(s.Kq[len(run.states) - 1], s.K), run.final.R.K_cap))
        ok, margin = _dio_check(omega, s.gamma, s.tau, K_chk, run.form)
        if check and not ok:
            raise NotInSurvivingSet(f"u(I0) fails the Diophantine test up to |k|={K_chk} (margin {margin:.3e} < gamma)")
        I_star, its = _invert_frequency(hQ, run.form, omega, I0)
        # modes below flow_tol move points by less than flow_tol; dropping
        # them keeps evaluation cheap once the generators are negligible
        gens = [W.prune(flow_tol) for W in run.generators()]
        tm = cls(gens, run.form, np.asarray(I0, float), I_star, omega, margin, its)
        tm.displacement = tm.measure_displacement()
        return tm

    def __call__(self, phi) -> tuple[np.ndarray, np.ndarray]:
        phi = np.atleast_2d(np.asarray(phi, dtype=float))
        I = np.broadcast_to(self.I0_star, phi.shape).copy()
        for W in reversed(self.generators):
            phi, I = _flow(W, self.form, phi, I)
        return phi, I

    def measure_displacement(self, n_samples: int = 64) -> dict:
        g = np.linspace(0, 2 * np.pi, int(round(n_samples ** (1 / len(self.I0)))) + 1)[:-1]
        mesh = np.stack([m.ravel() for m in np.meshgrid(*([g] * len(self.I0)), indexing="ij")], axis=-1)
        phi, I = self(mesh)
        return {"phi": float(np.max(np.abs(phi - mesh))), "I": float(np.max(np.abs(I - self.I0)))}


def torus_frequency(run_or_state, I0, *, check: bool = True) -> np.ndarray:
    """Frequency of the invariant torus attached to I0: u'_Q(I0*) = u'_0(I0)."""
    if isinstance(run_or_state, KamRun):
        tm = run_or_state.torus(I0, check=check)
        return _u_at(run_or_state.final.hhat, run_or_state.form, tm.I0_star)
    if isinstance(run_or_state, TorusMapEval):
        return run_or_state.omega.copy()
    raise InvalidParams("expected a KamRun or TorusMapEval")


def torus_point(torus: TorusMapEval, phi0, I0=None) -> PhasePoint:
    if I0 is not None and not np.allclose(I0, torus.I0):
        raise NotInSurvivingSet("torus map was built for a different I0")
    phi, I = torus(np.asarray(phi0, float)[None, :])
    return PhasePoint(tuple(phi[0]), tuple(I[0]))


def birkhoff_rotation_number(H, form: AAForm, p0, t_end: float = 200.0, dt: float = 0.01, **kw):
    """Weighted Birkhoff average of phi' along a trajectory.

    Returns ``(omega, trajectory)``.  The weight exp(-1/(s(1-s))) makes the
    average converge faster than any power of 1/t on quasi-periodic orbits.
    """
    tr = integrate_flow(H, form, p0, t_end, dt, **kw)
    ph = tr.phi_unwrapped
    rates = np.diff(ph, axis=0) / np.diff(tr.times)[:, None]
    s = 0.5 * (tr.times[1:] + tr.times[:-1]) / tr.times[-1]
    w = np.exp(-1.0 / (s * (1 - s)))
    return (w[:, None] * rates).sum(axis=0) / w.sum(), tr


# ---------------------------------------------------------------------------
# reference model


def desk_model(eps: float = 1e-6, *, K_cap: int = 12, deg: int = 4, half_width: float = 1e-5):
    """Two degrees of freedom, m = 1, c = (1,) with

        h = log I1 + (I1 - 1)^2 / 2 + I2^2 / 2,

    a golden-mean frequency at I0 and a trigonometric perturbation of
    weighted norm ``eps`` (measured with rho = (1, 1e-4)).

    Returns a dict with the form, h, f, I0, box and schedule arguments.
    """
    n = 2
    form = AAForm(n, 1, (1.0,))
    sing = SingularPart(1, 1.0)
    form = form.paired(sing)
    I0 = np.array([0.8, 0.84 * (math.sqrt(5) - 1) / 2])
    a, b = I0[0] - 1.0, I0[1]
    poly = {(0, 0): a * a / 2 + b * b / 2, (1, 0): a, (0, 1): b, (2, 0): 0.5, (0, 2): 0.5}
    h = BmFunction(sing, FourierTaylor.polynomial(n, K_cap, deg, I0, poly))
    f = FourierTaylor.trig(
        n, K_cap, deg, I0,
        cos={(1, 0): 1.0, (0, 1): 0.7, (1, 1): 0.5, (1, -1): 0.3, (2, 0): 0.2,
             (0, 2): {(0, 0): 0.1, (1, 0): 0.4}},
        sin={(0, 1): {(0, 1): 0.3}},
    )
    box = (tuple(I0 - half_width), tuple(I0 + half_width))
    sched = dict(M=1.0, L=1.0, mu=1.0, rho1=1.0, rho2=1e-4, tau=1.5, gamma=0.05, nu=1.0, n=n, K=4)
    dom = DomainSpec(box[0], box[1], sched["rho1"], sched["rho2"])
    f = f * (eps / weighted_norm(f, dom))
    return {"form": form, "h": h, "f": f, "I0": I0, "box": box, "schedule": sched}
