"""Worked examples: b^m surfaces and celestial-mechanics pullbacks.

Forms on R^4 charts are stored as coefficient matrices Omega with
omega = sum_{i<j} Omega_ij dy_i ^ dy_j; the density is the Pfaffian, i.e. the
coefficient of omega^2 / 2 on dy_1 ^ dy_2 ^ dy_3 ^ dy_4.  Hamiltonian vector
fields follow iota_X omega = -dH, so X = Omega^{-1} grad H.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Callable

import numpy as np
from scipy.integrate import quad
from scipy.special import hyp2f1

from .errors import BranchCrossing, InvalidParams
from .singular import AAForm

__all__ = [
    "SurfaceSystem",
    "PulledBackForm",
    "pfaffian",
    "sphere_system",
    "torus_system",
    "torus_primitive",
    "torus_primitive_hypergeometric",
    "mcgehee_double_collision",
    "mcgehee_exponent",
    "kepler_levi_civita",
    "two_fixed_centers",
    "three_body_mcgehee",
    "classify_bm",
    "integrate_pulled_back",
]


def pfaffian(A: np.ndarray) -> float:
    """Pfaffian of an antisymmetric matrix by expansion along the first row."""
    A = np.asarray(A)
    n = A.shape[0]
    if n % 2:
        return 0.0
    if n == 0:
        return 1.0
    if n == 2:
        return A[0, 1]
    total = 0.0
    rest = list(range(1, n))
    for idx, j in enumerate(rest):
        if A[0, j] == 0:
            continue
        keep = [k for k in rest if k != j]
        total += (-1) ** idx * A[0, j] * pfaffian(A[np.ix_(keep, keep)])
    return total


def _fd(f, x, h):
    """Richardson-refined central difference."""
    d1 = (f(x + h) - f(x - h)) / (2 * h)
    d2 = (f(x + h / 2) - f(x - h / 2)) / h
    return (4 * d2 - d1) / 3


def ridders(f, x: float, h: float, ntab: int = 10) -> float:
    """Ridders' extrapolated central difference (step shrinks by 1.4 per level)."""
    con, con2 = 1.4, 1.96
    a = np.zeros((ntab, ntab))
    a[0, 0] = (f(x + h) - f(x - h)) / (2 * h)
    best, err = a[0, 0], np.inf
    for i in range(1, ntab):
        h /= con
        a[0, i] = (f(x + h) - f(x - h)) / (2 * h)
        fac = con2
        for j in range(1, i + 1):
            a[j, i] = (a[j - 1, i] * fac - a[j - 1, i - 1]) / (fac - 1)
            fac *= con2
            e = max(abs(a[j, i] - a[j - 1, i]), abs(a[j, i] - a[j - 1, i - 1]))
            if e <= err:
                err, best = e, a[j, i]
        if abs(a[i, i] - a[i - 1, i - 1]) >= 2 * err:
            break
    return float(best)


# ---------------------------------------------------------------------------
# surfaces


@dataclass(frozen=True)
class SurfaceSystem:
    """omega = a(x1) dx1 ^ dx2 on a surface chart with moment map mu and field X."""

    name: str
    m: int
    a: Callable
    mu: Callable
    X: tuple = (0.0, 1.0)

    def iota_X_omega(self, x1, x2) -> np.ndarray:
        a = float(self.a(x1))
        X1, X2 = self.X
        return np.array([-a * X2, a * X1])

    def dmu(self, x1, x2) -> np.ndarray:
        s = 0.1 * min(abs(x1), abs(self.dist_to_Z(x1)), 1.0)
        return np.array([ridders(lambda t: self.mu(t, x2), x1, s), ridders(lambda t: self.mu(x1, t), x2, 0.1)])

    def dist_to_Z(self, x1) -> float:
        if self.name.startswith("torus"):
            return abs(math.sin(x1))
        return abs(x1)

    def residual(self, samples) -> float:
        """max |iota_X omega + d mu| relative to |d mu|."""
        worst = 0.0
        for x1, x2 in samples:
            d = self.dmu(x1, x2)
            r = self.iota_X_omega(x1, x2) + d
            worst = max(worst, float(np.max(np.abs(r)) / max(1.0, np.max(np.abs(d)))))
        return worst


def sphere_system(m: int) -> SurfaceSystem:
    """omega = dh / h^m ^ dtheta near the equator Z = {h = 0}."""
    if m < 1:
        raise InvalidParams("m must be positive")
    if m == 1:
        mu = lambda h, th: math.log(abs(h))  # noqa: E731
    else:
        mu = lambda h, th: -1.0 / ((m - 1) * h ** (m - 1))  # noqa: E731
    return SurfaceSystem(f"sphere_b{m}", m, lambda h: 1.0 / h ** m, mu)


def _branch_anchor(theta: float) -> float:
    s = math.sin(theta)
    if abs(s) < 1e-14:
        raise BranchCrossing(f"theta1 = {theta} lies on the critical set")
    return math.pi / 2 if (theta % (2 * math.pi)) < math.pi else 3 * math.pi / 2


def torus_primitive(theta: float, m: int) -> float:
    """P with P' = -1/sin^m(theta), P = 0 at pi/2 (resp. 3pi/2) on each branch."""
    t = float(theta) % (2 * math.pi)
    a = _branch_anchor(t)
    val, _ = quad(lambda s: -1.0 / math.sin(s) ** m, a, t, epsabs=1e-14, epsrel=1e-13, limit=200)
    return val


def torus_primitive_between(a: float, b: float, m: int) -> float:
    if math.floor(a / math.pi) != math.floor(b / math.pi) or abs(math.sin(a)) < 1e-14 or abs(math.sin(b)) < 1e-14:
        raise BranchCrossing(f"[{a}, {b}] meets theta1 in pi Z")
    val, _ = quad(lambda s: -1.0 / math.sin(s) ** m, a, b, epsabs=1e-14, epsrel=1e-13, limit=200)
    return val


def torus_primitive_hypergeometric(theta: float, m: int) -> float:
    """cos(theta) 2F1(1/2, (m+1)/2; 3/2; cos^2 theta), same normalisation as :func:`torus_primitive`."""
    c = math.cos(theta)
    if abs(math.sin(theta)) < 1e-14:
        raise BranchCrossing("theta1 lies on the critical set")
    sgn = 1.0 if math.sin(theta) > 0 else (-1.0) ** (m + 1)
    return sgn * c * float(hyp2f1(0.5, (m + 1) / 2, 1.5, c * c))


def torus_system(m: int) -> SurfaceSystem:
    """omega = dtheta1 / sin^m theta1 ^ dtheta2, mu = -P(theta1)."""
    if m < 1:
        raise InvalidParams("m must be positive")
    return SurfaceSystem(f"torus_b{m}", m, lambda t: 1.0 / math.sin(t) ** m, lambda t1, t2: -torus_primitive(t1, m))


# ---------------------------------------------------------------------------
# pulled-back forms on R^4


@dataclass(frozen=True)
class PulledBackForm:
    """A 2-form on a 4-dimensional chart.

    ``coef`` maps a point to its antisymmetric coefficient matrix in the
    order of ``coords``; ``density`` is the closed-form Pfaffian;
    ``chart_map`` sends the chart to canonical (q1, q2, p1, p2), which
    allows an independent pullback through its Jacobian.
    """

    name: str
    coords: tuple
    coef: Callable
    density: Callable
    chart_map: Callable | None = None
    metadata: dict = field(default_factory=dict)

    def matrix(self, y) -> np.ndarray:
        return np.asarray(self.coef(np.asarray(y, dtype=float)), dtype=float)

    def pfaffian(self, y) -> float:
        return float(pfaffian(self.matrix(y)))

    def jacobian(self, y) -> np.ndarray:
        """Complex-step Jacobian of the chart map."""
        y = np.asarray(y, dtype=float)
        h = 1e-30
        cols = []
        for k in range(len(y)):
            z = y.astype(complex)
            z[k] += 1j * h
            cols.append(np.imag(np.asarray(self.chart_map(z))) / h)
        return np.array(cols).T

    def pullback_matrix(self, y) -> np.ndarray:
        """J^T Omega_0 J with Omega_0 = dq1 ^ dp1 + dq2 ^ dp2."""
        J = self.jacobian(y)
        O = np.zeros((4, 4))
        O[0, 2], O[1, 3] = 1.0, 1.0
        O = O - O.T
        return J.T @ O @ J

    def density_check(self, points) -> float:
        """max relative |density - Pfaffian(coefficients)|."""
        return max(abs(self.density(np.asarray(p, float)) - self.pfaffian(p)) / max(1.0, abs(self.pfaffian(p)))
                   for p in points)

    def coefficient_check(self, points) -> float:
        """max |declared coefficients - Jacobian pullback|."""
        if self.chart_map is None:
            return 0.0
        return max(float(np.max(np.abs(self.matrix(p) - self.pullback_matrix(p))
                                / np.maximum(1.0, np.abs(self.pullback_matrix(p))))) for p in points)

    def bivector(self, y) -> np.ndarray:
        return np.linalg.inv(self.matrix(y))

    def vector_field(self, y, grad_H) -> np.ndarray:
        return np.linalg.solve(self.matrix(y), np.asarray(grad_H, dtype=float))

    def to_json(self) -> dict:
        return {"name": self.name, "coords": list(self.coords), "metadata": self.metadata}


def _antisym(entries: dict) -> np.ndarray:
    A = np.zeros((4, 4))
    for (i, j), v in entries.items():
        A[i, j] += v
        A[j, i] -= v
    return A


def mcgehee_exponent(alpha: float) -> float:
    return (2 - 3 * alpha) / (2 + alpha)


def mcgehee_double_collision(alpha: float) -> PulledBackForm:
    """x = r^g e^{i theta}, y = r^{-b g} (v + i w) e^{i theta} with b = alpha/2, g = 1/(1 + b).

    Chart order (r, theta, v, w); omega = Re(dx ^ d ybar) becomes
    g r^e dr^dv - g (1 - b) w r^e dr^dtheta + r^(e+1) dtheta^dw, e = -alpha g.
    """
    if not alpha > 0:
        raise InvalidParams("alpha must be positive")
    b = alpha / 2
    g = 1 / (1 + b)
    e = -alpha * g

    def coef(y):
        r, th, v, w = y
        return _antisym({(0, 2): g * r ** e, (0, 1): -g * (1 - b) * w * r ** e, (1, 3): r ** (e + 1)})

    def density(y):
        return -g * y[0] ** mcgehee_exponent(alpha)

    def chart(y):
        r, th, v, w = y
        c, s = np.cos(th), np.sin(th)
        rg, rb = r ** g, r ** (-b * g)
        x1, x2 = rg * c, rg * s
        y1, y2 = rb * (v * c - w * s), rb * (v * s + w * c)
        return np.array([x1, x2, y1, y2])

    return PulledBackForm(f"mcgehee_alpha_{alpha:g}", ("r", "theta", "v", "w"), coef, density, chart,
                          {"alpha": alpha, "beta": b, "gamma": g, "density_exponent": mcgehee_exponent(alpha),
                           "r_index": 0})


def kepler_levi_civita() -> PulledBackForm:
    """q = u^2 / 2 (complex), p unchanged; chart order (u1, p1, u2, p2)."""

    def coef(y):
        u1, p1, u2, p2 = y
        # omega = (u1 du1 - u2 du2) ^ dp1 + (u2 du1 + u1 du2) ^ dp2
        return _antisym({(0, 1): u1, (2, 1): -u2, (0, 3): u2, (2, 3): u1})

    def density(y):
        return y[0] ** 2 + y[2] ** 2

    def chart(y):
        u1, p1, u2, p2 = y
        return np.array([(u1 * u1 - u2 * u2) / 2, u1 * u2, p1, p2])

    return PulledBackForm("kepler_levi_civita", ("u1", "p1", "u2", "p2"), coef, density, chart,
                          {"degeneracy_locus": "u1 = u2 = 0", "locus_codimension": 2,
                           "stated_locus": "u1 = +-u2", "stated_density": "u1^2 - u2^2"})


def two_fixed_centers() -> PulledBackForm:
    """q1 = sinh(l) cos(n), q2 = cosh(l) sin(n), p unchanged; chart order (l, p1, n, p2)."""

    def CS(y):
        lam, _, nu, _ = y
        return np.cosh(lam) * np.cos(nu), np.sinh(lam) * np.sin(nu)

    def coef(y):
        C, S = CS(y)
        # dq1 = C dl - S dn, dq2 = S dl + C dn
        return _antisym({(0, 1): C, (2, 3): C, (2, 1): -S, (0, 3): S})

    def density(y):
        C, S = CS(y)
        return C * C + S * S

    def chart(y):
        lam, p1, nu, p2 = y
        return np.array([np.sinh(lam) * np.cos(nu), np.cosh(lam) * np.sin(nu), p1, p2])

    return PulledBackForm("two_fixed_centers", ("lambda", "p1", "nu", "p2"), coef, density, chart,
                          {"degeneracy_locus": "lambda = 0 and cos(nu) = 0 (the two centers)",
                           "stated_locus": "cosh(lambda) cos(nu) = sinh(lambda) sin(lambda)",
                           "stated_density": "cosh^2(lambda) cos^2(nu) - sinh^2(lambda) sin^2(nu)"})


def elliptic_inverse(q1: float, q2: float, guess=(0.5, 0.5), tol: float = 1e-14) -> tuple:
    """Newton inversion of (lambda, nu) -> (sinh l cos n, cosh l sin n)."""
    lam, nu = guess
    for _ in range(100):
        F = np.array([math.sinh(lam) * math.cos(nu) - q1, math.cosh(lam) * math.sin(nu) - q2])
        if np.max(np.abs(F)) < tol:
            break
        J = np.array([[math.cosh(lam) * math.cos(nu), -math.sinh(lam) * math.sin(nu)],
                      [math.sinh(lam) * math.sin(nu), math.cosh(lam) * math.cos(nu)]])
        d = np.linalg.solve(J, F)
        lam, nu = lam - d[0], nu - d[1]
    return lam, nu


def three_body_mcgehee(mu: float = 0.1):
    """r = 2 / x^2 with P_r kept; chart order (x, P_r, alpha, P_alpha).

    Returns (PulledBackForm, AAForm, hamiltonian) where the AAForm reads
    I1 = x, phi1 = -P_r, I2 = alpha, phi2 = P_alpha, and ``hamiltonian``
    returns (H, grad H) in the chart for the planar problem with
    primaries 1 - mu at (-mu, 0) and mu at (1 - mu, 0).
    """

    def coef(y):
        x = y[0]
        return _antisym({(0, 1): -4 / x ** 3, (2, 3): 1.0})

    def density(y):
        return -4 / y[0] ** 3

    def chart(y):
        x, Pr, al, Pa = y
        r = 2 / x ** 2
        # canonical polar momenta to Cartesian
        c, s = np.cos(al), np.sin(al)
        return np.array([r * c, r * s, Pr * c - Pa * s / r, Pr * s + Pa * c / r])

    pb = PulledBackForm("three_body_mcgehee", ("x", "P_r", "alpha", "P_alpha"), coef, density, chart,
                        {"order": 3, "r_index": 0, "mu": mu})
    form = AAForm(2, 3, (0.0, 0.0, 4.0))

    q1, q2 = np.array([-mu, 0.0]), np.array([1 - mu, 0.0])

    def U(x, al):
        r = 2 / x ** 2
        q = np.array([r * math.cos(al), r * math.sin(al)])
        return -(1 - mu) / np.linalg.norm(q - q1) - mu / np.linalg.norm(q - q2)

    def hamiltonian(y):
        x, Pr, al, Pa = (float(v) for v in y)
        H = Pr * Pr / 2 + x ** 4 * Pa * Pa / 8 + U(x, al)
        h = 1e-6
        dUx = _fd(lambda t: U(t, al), x, h * max(1.0, abs(x)))
        dUa = _fd(lambda t: U(x, t), al, h)
        return H, np.array([x ** 3 * Pa * Pa / 2 + dUx, Pr, dUa, x ** 4 * Pa / 4])

    return pb, form, hamiltonian


def _slopes(fn, rs):
    vals = np.array([abs(fn(r)) for r in rs])
    if np.all(vals < 1e-300):
        return None
    with np.errstate(divide="ignore"):
        lv = np.log(vals)
    return np.diff(lv) / np.diff(np.log(rs))


def classify_bm(form: PulledBackForm, base, r_index: int = 0, rs=None, tol: float = 1e-6) -> dict:
    """Two-stage b^m test along the coordinate ``r_index`` -> 0.

    Stage 1: the density behaves like r^(-m) with integer m >= 1.
    Stage 2: every bivector entry is a monomial with a nonnegative integer
    exponent, entries in the r row vanish to order >= m, and the bivector
    with that row and column divided by r^m is nondegenerate.
    """
    rs = np.geomspace(1e-2, 1e-5, 5) if rs is None else np.asarray(rs, dtype=float)
    base = np.asarray(base, dtype=float)

    def at(r):
        y = base.copy()
        y[r_index] = r
        return y

    s = _slopes(lambda r: form.density(at(r)), rs)
    exponent = float(np.mean(s))
    m_est = -exponent
    out = {"density_exponent": exponent, "m": None, "stage1": False, "stage2": False, "reason": ""}
    if np.ptp(s) > tol:
        out["reason"] = "density is not a monomial in r"
        return out
    if abs(m_est - round(m_est)) > tol or round(m_est) < 1:
        out["reason"] = f"density exponent {exponent:.6g} is not a negative integer"
        return out
    m = int(round(m_est))
    out.update(m=m, stage1=True)
    exps = np.full((4, 4), np.nan)
    for i in range(4):
        for j in range(4):
            if i == j:
                continue
            sl = _slopes(lambda r: form.bivector(at(r))[i, j], rs)
            if sl is None:
                continue
            if np.ptp(sl) > 1e-4:
                out["reason"] = f"bivector entry ({i},{j}) is not a monomial"
                return out
            exps[i, j] = float(np.mean(sl))
    out["bivector_exponents"] = exps.tolist()
    finite = exps[np.isfinite(exps)]
    if np.any(np.abs(finite - np.round(finite)) > 1e-4) or np.any(finite < -1e-4):
        out["reason"] = "bivector is not a smooth section (fractional or negative exponents)"
        return out
    row = exps[r_index][np.isfinite(exps[r_index])]
    if np.any(row < m - 1e-4):
        out["reason"] = f"r-row of the bivector vanishes to order < {m}"
        return out
    r0 = rs[-1]
    P = form.bivector(at(r0))
    D = np.ones(4)
    D[r_index] = r0 ** (-m)
    Pt = D[:, None] * P * D[None, :]
    if abs(np.linalg.det(Pt)) < 1e-8:
        out["reason"] = "rescaled bivector degenerates on Z"
        return out
    out["stage2"] = True
    return out


def integrate_pulled_back(form: PulledBackForm, hamiltonian, y0, t_end: float, dt: float, *,
                          r_index: int = 0, floor: float = 1e-8):
    """RK4 for X = Omega^{-1} grad H; ``hamiltonian(y)`` returns (H, grad H).

    Halts with a partial result when |y[r_index]| drops below ``floor``.
    Returns (times, states, energies, halted).
    """
    y = np.asarray(y0, dtype=float).copy()
    side = np.sign(y[r_index])

    def rhs(z):
        return form.vector_field(z, hamiltonian(z)[1])

    n = int(round(t_end / dt))
    ts, ys, Es = [0.0], [y.copy()], [hamiltonian(y)[0]]
    halted = False
    for k in range(1, n + 1):
        k1 = rhs(y)
        k2 = rhs(y + 0.5 * dt * k1)
        k3 = rhs(y + 0.5 * dt * k2)
        k4 = rhs(y + dt * k3)
        y = y + dt / 6 * (k1 + 2 * k2 + 2 * k3 + k4)
        if np.sign(y[r_index]) != side or abs(y[r_index]) < floor:
            halted = True
            break
        ts.append(k * dt)
        ys.append(y.copy())
        Es.append(hamiltonian(y)[0])
    return np.array(ts), np.array(ys), np.array(Es), halted
