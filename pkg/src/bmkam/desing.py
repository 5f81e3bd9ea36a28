"""Desingularization of b^m-forms and of b^m-integrable systems.

The form a(I1) dI1 ^ dphi1 + sum dIj ^ dphij with a = P_c(I1) / I1^m is
replaced by a_eps(I1) = f_eps'(I1) P_c(I1), where f_eps is a rescaled
profile whose derivative equals 1/x^m away from the eps-neighbourhood of Z.
For even m the result is symplectic; for odd m it is folded along I1 = 0.

Components of the moment map must be separable in I1 and free of phi1:
g = alpha(I1) + beta(I2..In, phi2..phin).  The I1 part is transported by
alpha_eps(x) = int_0^x alpha'(t) kappa(t) dt with kappa = f_eps' x^m, which
makes the Hamiltonian vector fields of g and g_eps coincide.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from functools import lru_cache

import numpy as np
from scipy.integrate import quad
from scipy.optimize import brentq

from .errors import BadInnerSpec, InvalidParams, NotSimple, OrderMismatch
from .fourier import FourierTaylor
from .singular import AAForm, BmFunction, PhasePoint, SingularPart

__all__ = [
    "DesingProfile",
    "DesingForm",
    "Component",
    "DesingSystem",
    "build_profile",
    "desingularize_form",
    "desingularize_system",
    "dynamics_equality_residual",
    "simple_system",
    "transport_trajectory",
    "hamiltonian_of",
]


def _quintic(x0, x1, v0, v1):
    """Coefficients (power basis in x) of the quintic matching (f, f', f'') at x0 and x1."""
    rows, rhs = [], []
    for x, v in ((x0, v0), (x1, v1)):
        rows.append([x ** p for p in range(6)])
        rows.append([p * x ** (p - 1) if p >= 1 else 0.0 for p in range(6)])
        rows.append([p * (p - 1) * x ** (p - 2) if p >= 2 else 0.0 for p in range(6)])
        rhs.extend(v)
    return np.linalg.solve(np.array(rows), np.array(rhs))


P = np.polynomial.polynomial


@dataclass(frozen=True)
class DesingProfile:
    """Profile f and its eps-rescaling f_eps.

    Even m = 2k: f odd, f = c x on [-x_c, x_c], a quintic blend on
    [x_c, 1] and f = -1/((2k-1) x^(2k-1)) + 2 sign(x) beyond 1.
    Odd m = 2k+1: f even, f = x^2 + 2 on [-1, 1], a quintic blend on
    [1, 2] and f = -1/(2k x^(2k)) + C (k > 0) or log|x| + C (k = 0) beyond 2.
    """

    m: int
    eps: float
    core: float          # slope c (even) or unused (odd)
    x_core: float        # end of the core
    x_outer: float       # start of the outer branch
    C: float             # outer additive constant
    blend: tuple         # quintic coefficients on [x_core, x_outer]

    @property
    def parity(self) -> str:
        return "even" if self.m % 2 == 0 else "odd"

    @property
    def k(self) -> int:
        return self.m // 2

    @property
    def scale_power(self) -> int:
        return 2 * self.k - 1 if self.parity == "even" else 2 * self.k

    # -- unscaled profile on x >= 0 ----------------------------------------

    def _outer(self, x, d=0):
        m, k = self.m, self.k
        if self.parity == "odd" and k == 0:
            return (np.log(x) + self.C, 1 / x, -1 / x ** 2)[d]
        e = m - 1
        return (-1 / (e * x ** e) + self.C, x ** (-m), -m * x ** (-m - 1))[d]

    def _core(self, x, d=0):
        if self.parity == "even":
            return (self.core * x, self.core * np.ones_like(x), np.zeros_like(x))[d]
        return (x * x + 2, 2 * x, 2 * np.ones_like(x))[d]

    def _pos(self, x, d):
        x = np.asarray(x, dtype=float)
        out = np.empty_like(x)
        a = x <= self.x_core
        b = (x > self.x_core) & (x < self.x_outer)
        c = x >= self.x_outer
        out[a] = self._core(x[a], d)
        if b.any():
            coef = np.asarray(self.blend)
            for _ in range(d):
                coef = P.polyder(coef)
            out[b] = P.polyval(x[b], coef)
        if c.any():
            out[c] = self._outer(x[c], d)
        return out

    def f(self, x, d: int = 0):
        """Unscaled profile (d = 0) or its d-th derivative (d <= 2)."""
        x = np.asarray(x, dtype=float)
        ax = np.abs(x)
        v = self._pos(ax, d)
        odd_fn = self.parity == "even"
        # even m: f odd, so f^(d) has parity (-1)^(d+1); odd m: f even, parity (-1)^d
        sign_flip = (d % 2 == 0) if odd_fn else (d % 2 == 1)
        if sign_flip:
            v = np.where(x < 0, -v, v)
        return v

    def f_eps(self, x, d: int = 0):
        e = self.eps
        return e ** (-self.scale_power - d) * self.f(np.asarray(x, dtype=float) / e, d)

    def fp_eps(self, x):
        return self.f_eps(x, 1)

    # -- derived quantities -------------------------------------------------

    def F(self, i: int, x):
        """F_eps^i(x) = f_eps'(x) x^(m - i)."""
        x = np.asarray(x, dtype=float)
        return self.fp_eps(x) * x ** (self.m - i)

    def kappa(self, x):
        """f_eps'(x) x^m, the ratio a_eps / a."""
        x = np.asarray(x, dtype=float)
        return self.fp_eps(x) * x ** self.m

    def breakpoints(self, a: float, b: float) -> list:
        e = self.eps
        pts = [s * v * e for v in (self.x_core, self.x_outer) for s in (-1, 1)]
        lo, hi = min(a, b), max(a, b)
        return sorted(p for p in pts if lo < p < hi)

    def integrate(self, g, x: float) -> float:
        """int_0^x g(t) dt with the gluing points as quadrature breakpoints."""
        x = float(x)
        if x == 0:
            return 0.0
        bp = self.breakpoints(0.0, x)
        val, _ = quad(lambda t: float(g(t)), 0.0, x, points=bp or None, epsabs=1e-13, epsrel=1e-12, limit=200)
        return val

    def G(self, i: int, x):
        """G_eps^i(x) = int_0^x F_eps^i."""
        return np.vectorize(lambda v: self.integrate(lambda t: self.F(i, t), v))(np.asarray(x, dtype=float))

    def continuity_defect(self) -> float:
        """Largest jump of f, f', f'' across the two gluing points."""
        blend = np.asarray(self.blend)
        worst = 0.0
        for d in range(3):
            bd = P.polyder(blend, d) if d else blend
            x0, x1 = np.array([self.x_core]), np.array([self.x_outer])
            worst = max(worst, abs(self._core(x0, d)[0] - P.polyval(self.x_core, bd)),
                        abs(self._outer(x1, d)[0] - P.polyval(self.x_outer, bd)))
        return worst

    def min_slope(self, n: int = 4001) -> float:
        """min of f' on the blend (odd m) or on (0, x_outer] (even m)."""
        x0 = self.x_core if self.parity == "odd" else 0.0
        x = np.linspace(x0, self.x_outer, n)[1:]
        return float(np.min(self._pos(x, 1)))

    def to_json(self) -> dict:
        return {"m": self.m, "eps": self.eps, "parity": self.parity, "core": self.core, "x_core": self.x_core,
                "x_outer": self.x_outer, "C": self.C, "blend": list(self.blend)}


def _even_profile(m, eps, c, x_c):
    k = m // 2
    e = 2 * k - 1
    v0 = (c * x_c, c, 0.0)
    v1 = (2 - 1 / e, 1.0, -float(m))
    blend = _quintic(x_c, 1.0, v0, v1)
    return DesingProfile(m, eps, float(c), float(x_c), 1.0, 2.0, tuple(blend))


def _odd_profile(m, eps, C):
    k = m // 2
    if k == 0:
        v1 = (math.log(2) + C, 0.5, -0.25)
    else:
        v1 = (-1 / (2 * k * 2 ** (2 * k)) + C, 2.0 ** (-m), -m * 2.0 ** (-m - 1))
    blend = _quintic(1.0, 2.0, (3.0, 2.0, 2.0), v1)
    return DesingProfile(m, eps, 0.0, 1.0, 2.0, float(C), tuple(blend))


def build_profile(m: int, eps: float, inner_spec: dict | None = None) -> DesingProfile:
    """Profile for order m at scale eps.

    ``inner_spec`` may give ``{"c": slope, "x_core": ...}`` (even m) or
    ``{"C": constant}`` (odd m); otherwise admissible values are searched.
    """
    if m < 1:
        raise InvalidParams("m must be positive")
    if not eps > 0:
        raise InvalidParams("eps must be positive")
    spec = dict(inner_spec or {})
    if m % 2 == 0:
        k = m // 2
        floor = 2 - 2.0 ** (1 - 2 * k)
        if "c" in spec:
            cands = [(float(spec["c"]), float(spec.get("x_core", 0.5)))]
        else:
            cs = [floor + d for d in (0.5, 0.25, 1.0, 0.1, 1.5)] + [1.0, 0.5]
            cands = [(c, x) for c in cs for x in (0.5, 0.3, 0.6, 0.2, 0.7, 0.1)]
        for c, x_c in cands:
            if not (c > 0 and 0 < x_c < 1):
                continue
            prof = _even_profile(m, eps, c, x_c)
            if prof.min_slope() > 0:
                return prof
        raise BadInnerSpec(f"no admissible profile for m={m} with inner spec {spec}")
    if "C" in spec:
        cands = [float(spec["C"])]
    else:
        cands = list(np.linspace(2.0, 8.0, 61))
    best = None
    for C in cands:
        prof = _odd_profile(m, eps, C)
        s = prof.min_slope()
        if s > 0 and (best is None or s > best[0]):
            best = (s, prof)
    if best is None:
        raise BadInnerSpec(f"no admissible profile for m={m} with inner spec {spec}")
    prof = best[1]
    if float(np.min(prof.f(np.linspace(-10, 10, 2001)))) <= 0:
        raise BadInnerSpec("profile is not positive")
    return prof


# ---------------------------------------------------------------------------
# forms


@dataclass(frozen=True)
class DesingForm:
    form: AAForm
    profile: DesingProfile

    def a(self, I1):
        """Original coefficient sum c_j / I1^j."""
        return self.form.coefficient(I1)

    def a_eps(self, I1):
        I1 = np.asarray(I1, dtype=float)
        return self.profile.fp_eps(I1) * self.form.P(I1)

    @property
    def symplectic(self) -> bool:
        return self.profile.parity == "even"

    def matrix(self, I1) -> np.ndarray:
        """Antisymmetric matrix of omega_eps in the order (I1, phi1, I2, phi2, ...)."""
        n = self.form.n
        Mx = np.zeros((2 * n, 2 * n))
        a = float(self.a_eps(I1))
        Mx[0, 1], Mx[1, 0] = a, -a
        for j in range(1, n):
            Mx[2 * j, 2 * j + 1], Mx[2 * j + 1, 2 * j] = 1.0, -1.0
        return Mx

    def kernel_at_Z(self, tol: float = 1e-12) -> np.ndarray:
        """Orthonormal basis (columns) of ker omega_eps at I1 = 0."""
        _, s, vt = np.linalg.svd(self.matrix(0.0))
        return vt[s <= tol * max(1.0, s.max())].T

    def agreement_defect(self, x_lo: float, x_hi: float, n: int = 401) -> float:
        """max relative |a_eps - a| over |I1| in [x_lo, x_hi], both signs."""
        x = np.linspace(x_lo, x_hi, n)
        x = np.r_[-x[::-1], x]
        a = self.a(x)
        return float(np.max(np.abs(self.a_eps(x) - a) / np.maximum(1.0, np.abs(a))))


def desingularize_form(form: AAForm, profile: DesingProfile) -> DesingForm:
    if profile.m != form.m:
        raise OrderMismatch(f"profile order {profile.m} differs from form order {form.m}")
    return DesingForm(form, profile)


# ---------------------------------------------------------------------------
# systems


@dataclass(frozen=True)
class Component:
    """g = sing(I1) + poly(I1) + rest(I2..In, phi2..phin).

    ``poly`` holds power-basis coefficients in I1; ``rest`` is a
    FourierTaylor that must not depend on I1 or phi1.
    """

    sing: SingularPart | None = None
    poly: tuple = ()
    rest: FourierTaylor | None = None

    def __post_init__(self):
        object.__setattr__(self, "poly", tuple(float(v) for v in self.poly))
        if self.rest is not None:
            r = self.rest
            if np.any(r.modes[:, 0] != 0):
                raise NotSimple("component depends on phi1")
            if np.any(r.coef[:, r.basis.exps[:, 0] > 0] != 0):
                raise NotSimple("component is not separable in I1")

    def alpha_prime(self, x):
        x = np.asarray(x, dtype=float)
        out = P.polyval(x, P.polyder(np.asarray(self.poly))) if len(self.poly) > 1 else np.zeros_like(x)
        if self.sing is not None:
            out = out + self.sing.deriv(x)
        return out

    def alpha(self, x):
        x = np.asarray(x, dtype=float)
        out = P.polyval(x, np.asarray(self.poly)) if self.poly else np.zeros_like(x)
        if self.sing is not None:
            out = out + self.sing.value(x)
        return out

    def rest_grad(self, phi, I):
        n = len(I)
        if self.rest is None:
            return np.zeros(n), np.zeros(n)
        _, gp, gI = self.rest.evaluator().value_grad(phi, I)
        return np.asarray(gp, float), np.asarray(gI, float)

    def value(self, phi, I):
        v = float(self.alpha(I[0]))
        if self.rest is not None:
            v += float(self.rest(np.asarray(phi), np.asarray(I)))
        return v


@dataclass
class DesingSystem:
    components: list
    dform: DesingForm
    _cache: dict = field(default_factory=dict, repr=False)

    @property
    def profile(self) -> DesingProfile:
        return self.dform.profile

    @property
    def n(self) -> int:
        return self.dform.form.n

    # tilde chart -----------------------------------------------------------

    def I1_tilde(self, I1) -> float:
        return self.profile.integrate(self.profile.kappa, I1)

    def phi1_tilde(self, I1, phi1) -> float:
        return float(self.profile.kappa(I1)) * phi1

    def invert_I1_tilde(self, It: float, side: int) -> float:
        key = (float(It), int(side))
        hit = self._cache.get(key)
        if hit is not None:
            return hit
        if It == 0:
            return 0.0
        hi = 1.0
        while abs(self.I1_tilde(side * hi)) < abs(It):
            hi *= 2
            if hi > 1e8:
                raise InvalidParams("tilde action out of range")
        root = brentq(lambda x: self.I1_tilde(x) - It, 0.0 if side > 0 else -hi, hi if side > 0 else 0.0,
                      xtol=1e-15, rtol=1e-15)
        self._cache[key] = root
        return root

    # desingularized components ------------------------------------------

    def alpha_eps(self, j: int, I1) -> float:
        return self.profile.integrate(lambda t: self.alpha_eps_prime(j, t), I1)

    def alpha_eps_prime(self, j: int, I1):
        """alpha'(I1) kappa(I1), written as f_eps' (poly' x^m + P_qhat) so it stays finite at Z."""
        c = self.components[j]
        x = np.asarray(I1, dtype=float)
        m = self.profile.m
        core = P.polyval(x, P.polyder(np.asarray(c.poly))) * x ** m if len(c.poly) > 1 else np.zeros_like(x)
        if c.sing is not None:
            qh = c.sing.padded(m).qhat
            core = core + sum(q * x ** (m - i) for i, q in enumerate(qh, start=1) if q != 0)
        return self.profile.fp_eps(x) * core

    def f_eps(self, j: int, phi, I) -> float:
        c = self.components[j]
        v = self.alpha_eps(j, I[0])
        if c.rest is not None:
            v += float(c.rest(np.asarray(phi), np.asarray(I)))
        return v

    def first_integral_G(self, I1) -> float:
        """sum_i qhat_i G_eps^i(I1) for the singular part of the first component."""
        sing = self.components[0].sing
        if sing is None:
            return 0.0
        qh = sing.padded(self.profile.m).qhat
        return float(sum(q * self.profile.G(i, I1) for i, q in enumerate(qh, start=1) if q != 0))

    # vector fields ----------------------------------------------------------

    def field_original(self, j: int, phi, I) -> np.ndarray:
        c = self.components[j]
        gp, gI = c.rest_grad(phi, I)
        a = float(self.dform.a(I[0]))
        d1 = float(c.alpha_prime(I[0]))
        return self._assemble(d1 / a, gp, gI)

    def field_desing(self, j: int, phi, I) -> np.ndarray:
        c = self.components[j]
        gp, gI = c.rest_grad(phi, I)
        a = float(self.dform.a_eps(I[0]))
        d1 = float(self.alpha_eps_prime(j, I[0]))
        return self._assemble(d1 / a, gp, gI)

    def _assemble(self, phi1_dot, gp, gI):
        n = self.n
        out = np.empty(2 * n)
        out[0] = phi1_dot
        out[1:n] = gI[1:]
        out[n] = 0.0  # no phi1 dependence
        out[n + 1:] = -gp[1:]
        return out

    def folded_defect(self, samples: np.ndarray | None = None) -> float:
        """max |dg_eps(v)| over kernel vectors v of omega_eps at Z (odd m)."""
        ker = self.dform.kernel_at_Z()
        if ker.size == 0:
            return 0.0
        n = self.n
        rng = np.random.default_rng(0)
        pts = samples if samples is not None else rng.uniform(0, 2 * np.pi, (16, 2 * n))
        worst = 0.0
        for s in pts:
            phi = s[:n]
            I = np.r_[0.0, s[n + 1:] if len(s) > n else np.zeros(n - 1)]
            for j, c in enumerate(self.components):
                gp, gI = c.rest_grad(phi, I)
                dg = np.zeros(2 * n)  # order (I1, phi1, I2, phi2, ...)
                dg[0] = float(self.alpha_eps_prime(j, 0.0))
                dg[1] = 0.0
                for i in range(1, n):
                    dg[2 * i], dg[2 * i + 1] = gI[i], gp[i]
                worst = max(worst, float(np.max(np.abs(dg @ ker))))
        return worst


def desingularize_system(F: list, form: AAForm, profile: DesingProfile) -> DesingSystem:
    """Desingularize a moment map given as a list of :class:`Component`."""
    if profile.m != form.m:
        raise OrderMismatch(f"profile order {profile.m} differs from form order {form.m}")
    comps = []
    for c in F:
        if isinstance(c, Component):
            comps.append(c)
        elif isinstance(c, SingularPart):
            comps.append(Component(sing=c))
        elif isinstance(c, FourierTaylor):
            comps.append(Component(rest=c))
        else:
            raise InvalidParams(f"cannot interpret component {c!r}")
    for c in comps:
        if c.sing is not None and c.sing.effective_order > form.m:
            raise OrderMismatch("singular degree exceeds the form order")
    return DesingSystem(comps, desingularize_form(form, profile))


def simple_system(m: int, n: int = 2, extra=None, *, K_cap: int = 4, deg: int = 2):
    """f1 = 1/I1^(m-1) (log I1 when m = 1) on omega = dI1/I1^m ^ dphi1 + ...,
    with f_j = I_j for j >= 2 unless ``extra`` supplies the remaining components."""
    form = AAForm(n, m, tuple([0.0] * (m - 1) + [1.0]))
    q = [0.0] * (m - 1)
    if m == 1:
        sing = SingularPart(1, 1.0)
    else:
        q[-1] = 1.0
        sing = SingularPart(m, 0.0, tuple(q))
    comps = [Component(sing=sing)]
    if extra is None:
        I0 = np.zeros(n)
        for j in range(1, n):
            e = [0] * n
            e[j] = 1
            comps.append(Component(rest=FourierTaylor.polynomial(n, K_cap, deg, I0, {tuple(e): 1.0})))
    else:
        comps.extend(extra)
    return form, comps


def dynamics_equality_residual(F, form: AAForm, profile: DesingProfile, sample) -> float:
    """max over samples and components of |X_g^omega - X_{g_eps}^{omega_eps}| (relative to max(1, |X|))."""
    sysd = F if isinstance(F, DesingSystem) else desingularize_system(F, form, profile)
    worst = 0.0
    for p in sample:
        phi, I = (np.asarray(p.phi, float), np.asarray(p.I, float)) if isinstance(p, PhasePoint) else \
            (np.asarray(p[0], float), np.asarray(p[1], float))
        if I[0] == 0:
            continue
        for j in range(len(sysd.components)):
            a = sysd.field_original(j, phi, I)
            b = sysd.field_desing(j, phi, I)
            worst = max(worst, float(np.max(np.abs(a - b) / np.maximum(1.0, np.abs(a)))))
    return worst


def transport_trajectory(sysd: DesingSystem, p0, t_end: float, dt: float, H: list | None = None):
    """RK4 flow of the desingularized Hamiltonian, integrated in the (I~, phi~) chart.

    ``H`` is a list of :class:`Component` whose sum is the Hamiltonian
    (default: the system's own components).  Returns (times, phi, I) pulled
    back to the original chart, with phi unwrapped.
    """
    hs = sysd if H is None else DesingSystem(list(H), sysd.dform)
    n = hs.n
    phi0, I0 = (np.asarray(p0.phi, float), np.asarray(p0.I, float)) if isinstance(p0, PhasePoint) else \
        (np.asarray(p0[0], float), np.asarray(p0[1], float))
    if I0[0] == 0:
        raise InvalidParams("initial point lies on the critical set")
    side = 1 if I0[0] > 0 else -1
    prof = hs.profile
    idx = range(len(hs.components))

    def to_orig(y):
        I1 = hs.invert_I1_tilde(y[n], side)
        k = float(prof.kappa(I1))
        phi, I = y[:n].copy(), y[n:].copy()
        phi[0] = y[0] / k
        I[0] = I1
        return phi, I, k

    def rhs(y):
        phi, I, k = to_orig(y)
        X = sum(hs.field_desing(j, phi, I) for j in idx)
        x = I[0]
        dk = float(prof.f_eps(x, 2) * x ** prof.m + prof.fp_eps(x) * prof.m * x ** (prof.m - 1))
        out = X.copy()
        out[0] = dk * X[n] * phi[0] + k * X[0]
        out[n] = k * X[n]
        return out

    y = np.r_[phi0, I0]
    y[0] = hs.phi1_tilde(I0[0], phi0[0])
    y[n] = hs.I1_tilde(I0[0])
    steps = int(round(t_end / dt))
    ts, phis, Is = [0.0], [phi0.copy()], [I0.copy()]
    for s in range(1, steps + 1):
        k1 = rhs(y)
        k2 = rhs(y + 0.5 * dt * k1)
        k3 = rhs(y + 0.5 * dt * k2)
        k4 = rhs(y + dt * k3)
        y = y + dt / 6 * (k1 + 2 * k2 + 2 * k3 + k4)
        phi, I, _ = to_orig(y)
        ts.append(s * dt)
        phis.append(phi)
        Is.append(I)
    return np.array(ts), np.array(phis), np.array(Is)


def hamiltonian_of(components: list, n: int):
    """Sum of components as a BmFunction for the original-chart integrator."""
    sing, smooth = None, None
    for c in components:
        if c.sing is not None:
            sing = c.sing if sing is None else sing + c.sing
        if len(c.poly) > 1 or (c.poly and c.poly[0] != 0):
            raise InvalidParams("polynomial I1 parts are not representable here; fold them into rest")
        if c.rest is not None:
            smooth = c.rest if smooth is None else smooth + c.rest
    return BmFunction(sing, smooth, n)
