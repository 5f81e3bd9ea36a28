"""One KAM step: homological equation, Lie series and remainder assembly."""

from __future__ import annotations

import itertools
import math
from dataclasses import dataclass, field

import numpy as np

from .errors import (
    HypothesisViolated,
    InvalidParams,
    LieSeriesDiverges,
    NonResonanceViolated,
    SmallDivisor,
    CapExceeded,
)
from .fourier import (
    DomainSpec,
    FourierTaylor,
    action_gradient_norm,
    angular_average,
    derivative_norm,
    poly_div,
    truncate_high,
    truncate_low,
    weighted_norm,
)
from .singular import (
    A_jet,
    AAForm,
    B_jet,
    BmFunction,
    frequency,
    frequency_jets,
    integrate_flow,
)

__all__ = [
    "StepParams",
    "StepResult",
    "LieOperator",
    "gamma_m",
    "solve_homological",
    "homological_residual",
    "lie_transform",
    "kam_step",
    "divisor_minimum",
    "modes_up_to",
]


def gamma_m(m: int, x: float, tol: float = 1e-17) -> float:
    """gamma_m(x) = sum_{l>=0} l!/(l+m)! x^l for 0 <= x < 1."""
    if x < 0:
        raise InvalidParams("gamma_m needs x >= 0")
    if x >= 1:
        return math.inf
    term = 1.0 / math.factorial(m)
    total = term
    l = 0
    while term > tol * total:
        l += 1
        term *= x * l / (l + m)
        total += term
        if l > 100000:
            break
    return total


def modes_up_to(n: int, K: int) -> np.ndarray:
    """All integer vectors with 0 < |k|_1 <= K."""
    rng = range(-K, K + 1)
    ks = [k for k in itertools.product(rng, repeat=n) if 0 < sum(map(abs, k)) <= K]
    return np.array(ks, dtype=np.int64).reshape(-1, n)


@dataclass(frozen=True)
class StepParams:
    K: int
    alpha: float
    delta: tuple
    c: float
    M: float
    A: float | None = None
    J: int = 6

    def __post_init__(self):
        d1, d2 = (float(v) for v in self.delta)
        object.__setattr__(self, "delta", (d1, d2))
        if self.K < 1 or self.J < 1:
            raise InvalidParams("K and J must be positive")
        if min(self.alpha, d1, d2, self.c, self.M) <= 0:
            raise InvalidParams("alpha, delta, c and M must be positive")
        A = 1.0 + 2.0 * self.M * self.c / self.alpha
        if self.A is None:
            object.__setattr__(self, "A", A)
        elif not math.isclose(self.A, A, rel_tol=1e-9):
            raise InvalidParams(f"A = {self.A} inconsistent with 1 + 2Mc/alpha = {A}")

    @property
    def delta_hat(self) -> float:
        return min(self.c * self.delta[0], self.delta[1])


@dataclass
class StepResult:
    W: FourierTaylor
    h_new: BmFunction
    R_new: FourierTaylor
    phi_record: dict
    diagnostics: dict = field(default_factory=dict)


class LieOperator:
    """f -> {f, W} with the derivatives of W cached."""

    def __init__(self, W: FourierTaylor, form: AAForm):
        self.W = W
        self.form = form
        n = W.n
        self.n = n
        self.Bj = B_jet(form, W.I0[0], W.basis)
        self.Wphi = [W.d_phi(j) for j in range(n)]
        self.WI = [W.d_I(j) for j in range(n)]
        self.WbI1 = self.WI[0].poly_multiply(self.Bj)

    def __call__(self, f) -> FourierTaylor:
        W = self.W
        n = self.n
        if isinstance(f, BmFunction):
            s = f.smooth if f.smooth is not None else FourierTaylor.zeros_like(W)
            sing = f.sing
        else:
            s, sing = f, None
        fphi = [s.d_phi(j) for j in range(n)]
        fI = [s.d_I(j) for j in range(n)]
        fb = fI[0].poly_multiply(self.Bj)
        if sing is not None:
            jet = A_jet(self.form, sing, W.I0[0], W.basis)
            fb = fb + FourierTaylor(n, W.K_cap, W.deg, W.I0, np.zeros((1, n), dtype=np.int64), jet[None, :], 0.0, W.scale)
        out = fphi[0] * self.WbI1 - fb * self.Wphi[0]
        for i in range(1, n):
            out = out + fphi[i] * self.WI[i] - fI[i] * self.Wphi[i]
        return out


def divisor_minimum(h: BmFunction, form: AAForm, modes: np.ndarray, points: np.ndarray) -> tuple[float, np.ndarray]:
    """min over points and modes of |k . u'(I)|, with the minimising mode."""
    if len(modes) == 0:
        return math.inf, np.zeros(h.n, dtype=np.int64)
    freq = frequency(h, form, np.atleast_2d(points))  # (npts, n)
    d = np.abs(modes @ freq.T)  # (M, npts)
    idx = np.unravel_index(np.argmin(d), d.shape)
    return float(d[idx]), modes[idx[0]]


def _sample_points(dom: DomainSpec | None, I0: np.ndarray) -> np.ndarray:
    if dom is None:
        return I0[None, :]
    return np.vstack([dom.grid(3), I0[None, :]])


def solve_homological(
    R: FourierTaylor,
    h: BmFunction,
    form: AAForm,
    K: int,
    dom: DomainSpec | None = None,
    alpha: float | None = None,
) -> FourierTaylor:
    """Generating function W with W_0 = 0 and, for 0 < |k|_1 <= K,

        W_k(I) = R_k(I) / (i (k_1 (B u_1 + A) + kbar . ubar)).

    The quotient is an exact truncated power-series division in I - I0, so
    {h, W} + (R_{<=K} - R_0) vanishes up to rounding.  When ``alpha`` is
    given, the divisors of the modes present are checked on a sample grid of
    G and :class:`SmallDivisor` is raised if any falls below ``alpha``.
    """
    if h.smooth is None:
        raise InvalidParams("the integrable part needs a smooth Fourier-Taylor component (possibly zero)")
    if not h.smooth.compatible(R):
        raise InvalidParams("R and h live in different representations")
    low = truncate_low(R, K)
    if low.is_zero():
        return FourierTaylor.zeros_like(R)
    nu = frequency_jets(h, form)  # (n, P)
    den = (low.modes.astype(float) @ nu) * 1j  # (M, P)
    if alpha is not None:
        pts = _sample_points(dom, R.I0)
        dmin, kmin = divisor_minimum(h, form, low.modes, pts)
        if dmin < alpha:
            raise SmallDivisor(f"divisor {dmin:.3e} < alpha = {alpha:.3e} at mode {tuple(int(x) for x in kmin)}")
    if np.any(den[:, 0] == 0):
        bad = low.modes[np.flatnonzero(den[:, 0] == 0)[0]]
        raise SmallDivisor(f"exact resonance at mode {tuple(int(x) for x in bad)}")
    coef = poly_div(low.coef, den, R.basis)
    return FourierTaylor(R.n, R.K_cap, R.deg, R.I0, low.modes, coef, R.cap_loss, R.scale)


def homological_residual(W: FourierTaylor, h: BmFunction, R: FourierTaylor, form: AAForm, K: int) -> FourierTaylor:
    """{h, W}_{<=K} + (R_{<=K} - R_0), computed through the series bracket."""
    L = LieOperator(W, form)
    return truncate_low(L(h), K, include_zero=True) + truncate_low(R, K)


def lie_transform(f, W: FourierTaylor, t: float, J: int, form: AAForm, dom: DomainSpec | None = None,
                  delta: tuple | None = None, c: float | None = None, *, strict: bool = True,
                  cap_budget: float | None = None):
    """Truncated Lie series sum_{j<=J} t^j/j! L_W^j f with its tail bound.

    Returns ``(g, tail)``; ``g`` is a :class:`BmFunction` when ``f`` carries
    a singular part and a :class:`FourierTaylor` otherwise.  The tail bound
    needs ``dom``, ``delta`` and ``c``; without them it is reported as NaN.
    """
    fb = f if isinstance(f, BmFunction) else None
    base = f.smooth if fb is not None else f
    if W.is_zero() or t == 0:
        return f, 0.0
    L = LieOperator(W, form)
    term = f
    acc = FourierTaylor.zeros_like(W)
    for j in range(1, J + 1):
        term = L(term)
        acc = acc + term * (t ** j / math.factorial(j))
    if cap_budget is not None and acc.cap_loss > cap_budget:
        raise CapExceeded(f"capping lost {acc.cap_loss:.3e} > budget {cap_budget:.3e}")
    tail = math.nan
    if dom is not None and delta is not None and c is not None:
        dhat = min(c * delta[0], delta[1])
        dW = derivative_norm(W, dom, c)
        x = 2 * math.e * dW / dhat
        if x >= 1:
            if strict:
                raise LieSeriesDiverges(f"||DW|| = {dW:.3e} >= delta_hat/(2e) = {dhat / (2 * math.e):.3e}")
            tail = math.inf
        else:
            nxt = L(term)
            tail = gamma_m(J + 1, x) * t ** (J + 1) * weighted_norm(nxt, dom)
    if fb is not None:
        smooth = acc if base is None else base + acc
        return BmFunction(fb.sing, smooth), tail
    return base + acc, tail


def _flow_displacement(W: FourierTaylor, form: AAForm, points: np.ndarray, c: float, nsteps: int = 8) -> float:
    """sup over sample points of max(c |dphi|_inf, |dI|_1) for the time-1 flow of W."""
    if W.is_zero():
        return 0.0
    worst = 0.0
    Wf = BmFunction(None, W)
    for I in points:
        for phi in ([0.0] * W.n, [1.0] * W.n, [2.5, 4.0] + [0.5] * (W.n - 2)):
            tr = integrate_flow(Wf, form, (np.array(phi, float)[: W.n], I), 1.0, 1.0 / nsteps, drift_tol=np.inf)
            dphi = np.abs(tr.phi_unwrapped[-1] - tr.phi_unwrapped[0]).max()
            dI = np.abs(tr.I[-1] - tr.I[0]).sum()
            worst = max(worst, c * dphi, dI)
    return float(worst)


def kam_step(
    hhat: BmFunction,
    R: FourierTaylor,
    p: StepParams,
    dom: DomainSpec,
    form: AAForm,
    *,
    strict: bool = False,
    measure_displacement: bool = True,
    prune_tol: float = 0.0,
    J_max: int = 12,
) -> StepResult:
    """Apply one step of the KAM iteration.

    Returns h_new = hhat + R_0 and

        R_new = R_{>K} + r_2(hhat, W, 1) + r_1(R, W, 1) + homological residual,

    together with the measured norms and the bounds they are compared with.
    """
    d1, d2 = p.delta
    if d1 >= dom.rho1 or d2 >= dom.rho2:
        raise InvalidParams("delta must be smaller than rho componentwise")
    dhat = p.delta_hat
    eps = derivative_norm(R, dom, p.c)
    violations = []
    if eps > p.alpha * dhat / (74 * p.A):
        violations.append("kam_step:eps")
    if dom.rho2 > p.alpha / (2 * p.M * p.K):
        violations.append("kam_step:rho2")
    if strict and violations:
        raise HypothesisViolated(violations[0], f"eps={eps:.3e}, alpha={p.alpha:.3e}, rho2={dom.rho2:.3e}")

    pts = _sample_points(dom, R.I0)
    modes = modes_up_to(R.n, min(p.K, R.K_cap))
    dmin, kmin = divisor_minimum(hhat, form, modes, pts)
    if dmin < p.alpha and strict:
        raise NonResonanceViolated(f"divisor {dmin:.3e} < alpha at mode {tuple(int(x) for x in kmin)}")

    # carried truncation losses are propagated separately below, so the
    # algebra of this step starts from clean operands
    loss_R = R.cap_loss
    loss_h = hhat.smooth.cap_loss if hhat.smooth is not None else 0.0
    R = R.with_loss(0.0)
    if hhat.smooth is not None:
        hhat = BmFunction(hhat.sing, hhat.smooth.with_loss(0.0))

    W = solve_homological(R, hhat, form, p.K, dom, alpha=None)
    L = LieOperator(W, form)

    R0 = angular_average(R)
    Lh = L(hhat)
    resid = Lh + truncate_low(R, p.K)

    # r_2(hhat, W, 1) = sum_{j>=2} L^{j-1}(Lh)/j!,  r_1(R, W, 1) = sum_{j>=1} L^j R / j!
    # J grows (up to J_max) until the tail bound drops below 1e-2 eps_new.
    dW = derivative_norm(W, dom, p.c)
    x = 2 * math.e * dW / dhat
    r2 = FourierTaylor.zeros_like(R)
    r1 = FourierTaylor.zeros_like(R)
    th, tR = Lh, R
    J = 0
    while True:
        J += 1
        tR = L(tR)
        r1 = r1 + tR * (1.0 / math.factorial(J))
        if J >= 2:
            th = L(th)
            r2 = r2 + th * (1.0 / math.factorial(J))
        if J < p.J:
            continue
        if x >= 1:
            tail = math.inf
            break
        g = gamma_m(J + 1, x)
        tail = g * (weighted_norm(L(th), dom) + weighted_norm(L(tR), dom))
        if J >= J_max or tail <= 1e-2 * derivative_norm(r1 + r2 + resid, dom.shrink(d1, d2), p.c):
            break
    if x >= 1:
        if strict:
            raise LieSeriesDiverges(f"||DW|| = {dW:.3e} >= delta_hat/(2e) = {dhat / (2 * math.e):.3e}")
        violations.append("lie:convergence")

    R_new = truncate_high(R, p.K) + resid + r2 + r1
    if prune_tol > 0:
        R_new = R_new.prune(prune_tol)
    fresh = R_new.cap_loss
    carried = loss_R * (1 + x * gamma_m(1, min(x, 0.5))) + loss_h * x
    R_new = R_new.with_loss(fresh + carried)
    h_new = hhat.add_smooth(R0)
    h_new = BmFunction(h_new.sing, h_new.smooth.with_loss(loss_h + loss_R))

    dom_new = dom.shrink(d1, d2)
    eps_new = derivative_norm(R_new, dom_new, p.c)
    bound = math.exp(-p.K * d1) * eps + 14 * p.A / (p.alpha * dhat) * eps ** 2
    W_bound = 2 * p.A / p.alpha * eps
    disp = _flow_displacement(W, form, dom.grid(2), p.c) if measure_displacement else math.nan
    eta = weighted_norm(R0, dom)
    xi = action_gradient_norm(R0, dom)
    diag = {
        "eps": eps,
        "eps_new": eps_new,
        "eps_bound": bound,
        "bound_ok": bool(eps_new <= bound),
        "tail_term": math.exp(-p.K * d1) * eps,
        "quadratic_coeff": 14 * p.A / (p.alpha * dhat),
        "W_norm": dW,
        "W_bound": W_bound,
        "W_bound_ok": bool(dW <= W_bound),
        "displacement": disp,
        "displacement_bound": W_bound,
        "displacement_ok": bool(disp <= W_bound) if disp == disp else None,
        "lie_tail_bound": tail,
        "J": J,
        "homological_residual": weighted_norm(resid, dom),
        "eta": eta,
        "xi": xi,
        "divisor_min": dmin,
        "divisor_mode": [int(v) for v in kmin],
        "K": p.K,
        "alpha": p.alpha,
        "A": p.A,
        "c": p.c,
        "delta": [d1, d2],
        "delta_hat": dhat,
        "violations": violations,
        "cap_loss": R_new.cap_loss,
        "cap_loss_step": fresh,
        "modes_R_new": R_new.num_modes,
    }
    return StepResult(W, h_new, R_new, {"W": W, "t": 1.0, "J": J}, diag)
