"""b^m-functions, the action-angle b^m-symplectic form and Hamiltonian flows.

Sign convention used throughout the package::

    {f, g} = B (df/dphi_1 dg/dI_1 - df/dI_1 dg/dphi_1)
             + sum_{i>=2} (df/dphi_i dg/dI_i - df/dI_i dg/dphi_i)

with ``B(I1) = 1 / sum_j c_j / I1^j``.  Hamilton's equations are
``phi' = {phi, H}`` and ``I' = {I, H}``, i.e. ``phi_1' = B dH/dI_1`` and
``I_1' = -B dH/dphi_1``.  The derivative of a function g along the
Hamiltonian field of f is therefore ``{g, f}``.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Sequence

import numpy as np

from .errors import (
    CrossedCriticalSet,
    DenominatorZero,
    InvalidParams,
    OrderMismatch,
    StepTooLarge,
)
from .fourier import Basis, FourierTaylor, angular_average, poly_mul, rational_jet

TWO_PI = 2.0 * math.pi

__all__ = [
    "SingularPart",
    "AAForm",
    "PhasePoint",
    "TrajectorySample",
    "BmFunction",
    "script_B",
    "script_A",
    "script_B_prime",
    "B_jet",
    "A_jet",
    "hamiltonian_vector_field",
    "poisson_bracket",
    "bracket_series",
    "integrate_flow",
    "check_defining_function_preservation",
    "frequency",
]


@dataclass(frozen=True)
class SingularPart:
    """zeta(x) = q0 log x + sum_{i=1}^{m-1} q_i x^{-i}."""

    m: int
    q0: float = 0.0
    q: tuple = ()

    def __post_init__(self):
        if self.m < 1:
            raise InvalidParams("singular order m must be positive")
        q = tuple(float(v) for v in self.q)
        if len(q) != self.m - 1:
            raise InvalidParams(f"expected {self.m - 1} coefficients q_1..q_(m-1), got {len(q)}")
        object.__setattr__(self, "q", q)
        object.__setattr__(self, "q0", float(self.q0))

    @property
    def qhat(self) -> np.ndarray:
        """Gradient coefficients: zeta'(x) = sum_j qhat_j / x^j."""
        out = np.zeros(self.m)
        out[0] = self.q0
        for i in range(2, self.m + 1):
            out[i - 1] = -(i - 1) * self.q[i - 2]
        return out

    @property
    def is_maximal(self) -> bool:
        return self.qhat[-1] != 0

    @property
    def effective_order(self) -> int:
        nz = np.flatnonzero(self.qhat)
        return int(nz[-1]) + 1 if len(nz) else 0

    def padded(self, m: int) -> "SingularPart":
        if m < self.effective_order:
            raise OrderMismatch(f"singular degree {self.effective_order} exceeds form order {m}")
        q = list(self.q[: m - 1]) + [0.0] * max(0, m - 1 - len(self.q))
        return SingularPart(m, self.q0, tuple(q))

    def __add__(self, other: "SingularPart") -> "SingularPart":
        m = max(self.m, other.m)
        a, b = self.padded(m), other.padded(m)
        return SingularPart(m, a.q0 + b.q0, tuple(x + y for x, y in zip(a.q, b.q)))

    def value(self, x):
        x = np.asarray(x, dtype=float)
        out = self.q0 * np.log(np.abs(x)) if self.q0 != 0 else np.zeros_like(x)
        for i, qi in enumerate(self.q, start=1):
            if qi != 0:
                out = out + qi * x ** (-i)
        return out

    def deriv(self, x):
        x = np.asarray(x, dtype=float)
        out = np.zeros_like(x)
        for j, qh in enumerate(self.qhat, start=1):
            if qh != 0:
                out = out + qh * x ** (-j)
        return out

    def deriv2(self, x):
        x = np.asarray(x, dtype=float)
        out = np.zeros_like(x)
        for j, qh in enumerate(self.qhat, start=1):
            if qh != 0:
                out = out - j * qh * x ** (-j - 1)
        return out

    @classmethod
    def from_qhat(cls, qhat: Sequence[float]) -> "SingularPart":
        qhat = list(qhat)
        m = len(qhat)
        q = [-qhat[i - 1] / (i - 1) for i in range(2, m + 1)]
        return cls(m, qhat[0], tuple(q))


@dataclass(frozen=True)
class AAForm:
    """omega = (sum_j c_j / I1^j) dI1 ^ dphi1 + sum_{i>=2} dIi ^ dphii."""

    n: int
    m: int
    c: tuple
    K_mod: float | None = None

    def __post_init__(self):
        c = tuple(float(v) for v in self.c)
        if self.n < 1 or self.m < 1:
            raise InvalidParams("n and m must be positive")
        if len(c) != self.m:
            raise InvalidParams(f"expected {self.m} coefficients c_1..c_m, got {len(c)}")
        if c[-1] == 0:
            raise InvalidParams("c_m must be nonzero")
        object.__setattr__(self, "c", c)

    @property
    def den_poly(self) -> np.ndarray:
        """Power-basis coefficients of P_c(x) = sum_j c_j x^(m-j)."""
        return np.array([self.c[self.m - 1 - p] for p in range(self.m)])

    def P(self, x):
        return np.polynomial.polynomial.polyval(np.asarray(x, dtype=float), self.den_poly)

    def modular_period(self, sing: SingularPart) -> float:
        qh = sing.padded(self.m).qhat[-1]
        if qh == 0:
            raise InvalidParams("qhat_m = 0: the singular part is not of maximal degree")
        return self.c[-1] / qh

    def paired(self, sing: SingularPart) -> "AAForm":
        return AAForm(self.n, self.m, self.c, self.modular_period(sing))

    def coefficient(self, I1):
        """sum_j c_j / I1^j."""
        I1 = np.asarray(I1, dtype=float)
        return self.P(I1) / I1 ** self.m


@dataclass(frozen=True)
class PhasePoint:
    phi: tuple
    I: tuple

    def __post_init__(self):
        phi = tuple(float(v) % TWO_PI for v in self.phi)
        I = tuple(float(v) for v in self.I)
        if len(phi) != len(I):
            raise InvalidParams("phi and I must have equal length")
        object.__setattr__(self, "phi", phi)
        object.__setattr__(self, "I", I)

    @property
    def side(self) -> int:
        return int(np.sign(self.I[0]))

    @property
    def n(self) -> int:
        return len(self.I)


@dataclass
class TrajectorySample:
    times: np.ndarray
    phi: np.ndarray
    I: np.ndarray
    energy: np.ndarray
    phi_unwrapped: np.ndarray
    halted: bool = False
    reason: str = ""

    @property
    def states(self) -> list:
        return [PhasePoint(tuple(p), tuple(a)) for p, a in zip(self.phi, self.I)]

    def __len__(self) -> int:
        return len(self.times)


# ---------------------------------------------------------------------------
# script B and script A


def _check_den(form: AAForm, I1: np.ndarray) -> np.ndarray:
    P = form.P(I1)
    scale = np.polynomial.polynomial.polyval(np.abs(I1), np.abs(form.den_poly))
    bad = (np.abs(P) <= 1e-14 * scale) & (I1 != 0)
    if np.any(bad):
        raise DenominatorZero(f"sum c_j/I1^j vanishes near I1 = {np.asarray(I1)[bad].ravel()[0]!r}")
    return P


def script_B(form: AAForm, I1):
    """B(I1) = 1/(sum_j c_j/I1^j); I1 = 0 returns the limit 0."""
    x = np.asarray(I1, dtype=float)
    P = _check_den(form, x)
    with np.errstate(divide="ignore", invalid="ignore"):
        out = np.where(x == 0, 0.0, x ** form.m / np.where(P == 0, 1.0, P))
    return out if out.ndim else float(out)


def script_B_prime(form: AAForm, I1):
    x = np.asarray(I1, dtype=float)
    P = _check_den(form, x)
    dP = np.polynomial.polynomial.polyval(x, np.polynomial.polynomial.polyder(form.den_poly))
    m = form.m
    out = (m * x ** (m - 1) * P - x ** m * dP) / P ** 2
    return out if out.ndim else float(out)


def script_A(form: AAForm, sing: SingularPart | None, I1):
    """A(I1) = (sum qhat_j/I1^j)/(sum c_j/I1^j); I1 = 0 returns qhat_m/c_m."""
    x = np.asarray(I1, dtype=float)
    if sing is None:
        out = np.zeros_like(x)
        return out if out.ndim else 0.0
    qh = sing.padded(form.m).qhat
    num = np.polynomial.polynomial.polyval(x, np.array([qh[form.m - 1 - p] for p in range(form.m)]))
    P = _check_den(form, x)
    with np.errstate(divide="ignore", invalid="ignore"):
        out = np.where(x == 0, qh[-1] / form.c[-1], num / np.where(P == 0, 1.0, P))
    return out if out.ndim else float(out)


def B_jet(form: AAForm, I0_1: float, bs: Basis) -> np.ndarray:
    """Taylor jet of B about I1 = I0_1 in the basis (variable 0)."""
    num = np.zeros(form.m + 1)
    num[-1] = 1.0
    _check_den(form, np.asarray(I0_1))
    return rational_jet(num, form.den_poly, I0_1, 0, bs)


def A_jet(form: AAForm, sing: SingularPart | None, I0_1: float, bs: Basis) -> np.ndarray:
    if sing is None:
        return np.zeros(bs.size)
    qh = sing.padded(form.m).qhat
    num = np.array([qh[form.m - 1 - p] for p in range(form.m)])
    _check_den(form, np.asarray(I0_1))
    return rational_jet(num, form.den_poly, I0_1, 0, bs)


# ---------------------------------------------------------------------------
# b^m-functions


class BmFunction:
    """Singular part in I1 plus a smooth Fourier-Taylor part.

    Either component may be ``None``.  ``n`` is taken from the smooth part
    when present, otherwise it must be given.
    """

    def __init__(self, sing: SingularPart | None = None, smooth: FourierTaylor | None = None, n: int | None = None):
        if smooth is None and n is None:
            raise InvalidParams("dimension unknown: pass a smooth part or n")
        self.sing = sing
        self.smooth = smooth
        self.n = smooth.n if smooth is not None else int(n)
        self._ev = None
        self._hess = None

    @classmethod
    def wrap(cls, f) -> "BmFunction":
        if isinstance(f, BmFunction):
            return f
        if isinstance(f, FourierTaylor):
            return cls(None, f)
        raise InvalidParams(f"cannot interpret {type(f).__name__} as a b^m-function")

    def add_smooth(self, g: FourierTaylor) -> "BmFunction":
        s = g if self.smooth is None else self.smooth + g
        return BmFunction(self.sing, s)

    def _evaluator(self):
        if self._ev is None and self.smooth is not None:
            self._ev = self.smooth.evaluator()
        return self._ev

    def value(self, phi, I):
        phi = np.asarray(phi, dtype=float)
        I = np.asarray(I, dtype=float)
        out = np.zeros(np.broadcast_shapes(phi.shape[:-1], I.shape[:-1]))
        if self.smooth is not None:
            out = out + self.smooth(phi, I)
        if self.sing is not None:
            out = out + self.sing.value(I[..., 0])
        return out

    def grad(self, phi, I):
        """Total gradient (dphi, dI) including the singular I1-derivative."""
        phi = np.asarray(phi, dtype=float)
        I = np.asarray(I, dtype=float)
        shp = np.broadcast_shapes(phi.shape[:-1], I.shape[:-1])
        if self.smooth is not None:
            _, gp, gI = self._evaluator().value_grad(phi, I)
            gp = np.broadcast_to(gp, shp + (self.n,)).copy()
            gI = np.broadcast_to(gI, shp + (self.n,)).copy()
        else:
            gp = np.zeros(shp + (self.n,))
            gI = np.zeros(shp + (self.n,))
        if self.sing is not None:
            gI[..., 0] += self.sing.deriv(I[..., 0])
        return gp, gI

    def value_grad(self, phi, I):
        phi = np.asarray(phi, dtype=float)
        I = np.asarray(I, dtype=float)
        shp = np.broadcast_shapes(phi.shape[:-1], I.shape[:-1])
        if self.smooth is not None:
            v, gp, gI = self._evaluator().value_grad(phi, I)
            v = np.broadcast_to(v, shp).copy()
            gp = np.broadcast_to(gp, shp + (self.n,)).copy()
            gI = np.broadcast_to(gI, shp + (self.n,)).copy()
        else:
            v = np.zeros(shp)
            gp = np.zeros(shp + (self.n,))
            gI = np.zeros(shp + (self.n,))
        if self.sing is not None:
            v = v + self.sing.value(I[..., 0])
            gI[..., 0] += self.sing.deriv(I[..., 0])
        return v, gp, gI

    def hessian(self, phi, I) -> np.ndarray:
        """Second derivatives at one point, variables ordered (phi, I)."""
        n = self.n
        H = np.zeros((2 * n, 2 * n))
        if self.smooth is not None:
            if self._hess is None:
                firsts = [self.smooth.d_phi(j) for j in range(n)] + [self.smooth.d_I(j) for j in range(n)]
                self._hess = [
                    [(f.d_phi(b) if b < n else f.d_I(b - n)) for b in range(2 * n)] for f in firsts
                ]
            for a in range(2 * n):
                for b in range(2 * n):
                    H[a, b] = float(self._hess[a][b](np.asarray(phi, float), np.asarray(I, float)))
        if self.sing is not None:
            H[n, n] += float(self.sing.deriv2(I[0]))
        return H

    def B_weighted_dI1(self, form: AAForm, phi, I):
        """B(I1) dF/dI1 including the singular part; finite at I1 = 0."""
        I = np.asarray(I, dtype=float)
        x = I[..., 0]
        B = script_B(form, x)
        smooth = np.zeros_like(x)
        if self.smooth is not None:
            _, _, gI = self._evaluator().value_grad(phi, I)
            smooth = gI[..., 0]
        return B * smooth + script_A(form, self.sing, x)

    def to_json(self, form: AAForm) -> dict:
        sing = self.sing.padded(form.m) if self.sing is not None else SingularPart(form.m, 0.0, (0.0,) * (form.m - 1))
        return {
            "n": self.n,
            "m": form.m,
            "c": list(form.c),
            "q0": sing.q0,
            "q": list(sing.q),
            "smooth_part": self.smooth.to_json() if self.smooth is not None else None,
        }


def system_from_json(doc: dict) -> tuple[AAForm, BmFunction]:
    """Parse ``{n, m, c, q0, q, smooth_part}`` into (form, Hamiltonian)."""
    try:
        n, m = int(doc["n"]), int(doc["m"])
        form = AAForm(n, m, tuple(doc["c"]))
        sing = SingularPart(m, float(doc.get("q0", 0.0)), tuple(doc.get("q", [0.0] * (m - 1))))
        sp = doc.get("smooth_part")
    except (KeyError, TypeError, ValueError) as exc:
        raise InvalidParams(f"malformed system document: {exc}") from exc
    smooth = FourierTaylor.from_json(sp) if sp else None
    if sing.effective_order == 0:
        sing = None
    else:
        form = form.paired(sing) if sing.is_maximal else form
    return form, BmFunction(sing, smooth, n=n)


# ---------------------------------------------------------------------------
# point evaluations


def _order_check(f: BmFunction, form: AAForm):
    if f.sing is not None and f.sing.effective_order > form.m:
        raise OrderMismatch(f"singular degree {f.sing.effective_order} exceeds form order {form.m}")


def _as_arrays(p):
    if isinstance(p, PhasePoint):
        return np.array(p.phi), np.array(p.I)
    phi, I = p
    return np.asarray(phi, dtype=float), np.asarray(I, dtype=float)


def hamiltonian_vector_field(f, form: AAForm, p) -> np.ndarray:
    """X_f at p as the 2n components (phi_dot, I_dot)."""
    f = BmFunction.wrap(f)
    _order_check(f, form)
    phi, I = _as_arrays(p)
    gp, gI = f.grad(phi, I)
    out = np.empty(2 * f.n)
    n = f.n
    out[0] = float(f.B_weighted_dI1(form, phi, I))
    out[1:n] = gI[1:]
    B = script_B(form, I[0])
    out[n] = -B * gp[0]
    out[n + 1 :] = -gp[1:]
    return out


def bracket_from_grads(gf, gg, B: float, n: int) -> float:
    """{f, g} from total gradients ordered (phi, I)."""
    gf = np.asarray(gf)
    gg = np.asarray(gg)
    s = B * (gf[0] * gg[n] - gf[n] * gg[0])
    s += np.sum(gf[1:n] * gg[n + 1 :] - gf[n + 1 :] * gg[1:n])
    return float(s)


def poisson_bracket(f, g, form: AAForm, p) -> float:
    """{f, g} at p under the package convention (see module docstring)."""
    f = BmFunction.wrap(f)
    g = BmFunction.wrap(g)
    _order_check(f, form)
    _order_check(g, form)
    phi, I = _as_arrays(p)
    fp, fI = f.grad(phi, I)
    gp, gI = g.grad(phi, I)
    n = f.n
    if I[0] == 0:
        bf = float(f.B_weighted_dI1(form, phi, I))
        bg = float(g.B_weighted_dI1(form, phi, I))
        s = fp[0] * bg - bf * gp[0]
        return float(s + np.sum(fp[1:] * gI[1:] - fI[1:] * gp[1:]))
    B = script_B(form, I[0])
    return bracket_from_grads(np.r_[fp, fI], np.r_[gp, gI], B, n)


def bracket_gradient(f: BmFunction, g: BmFunction, form: AAForm, phi, I) -> np.ndarray:
    """Exact gradient of the point function {f, g}, ordered (phi, I)."""
    n = f.n
    fp, fI = f.grad(phi, I)
    gp, gI = g.grad(phi, I)
    Df = np.r_[fp, fI]
    Dg = np.r_[gp, gI]
    Hf = f.hessian(phi, I)
    Hg = g.hessian(phi, I)
    B = script_B(form, I[0])
    dB = np.zeros(2 * n)
    dB[n] = script_B_prime(form, I[0])
    cross = Df[0] * Dg[n] - Df[n] * Dg[0]
    out = dB * cross + B * (Hf[0] * Dg[n] + Df[0] * Hg[n] - Hf[n] * Dg[0] - Df[n] * Hg[0])
    for i in range(1, n):
        out += Hf[i] * Dg[n + i] + Df[i] * Hg[n + i] - Hf[n + i] * Dg[i] - Df[n + i] * Hg[i]
    return out


# ---------------------------------------------------------------------------
# algebraic bracket on series


def frequency_jets(h: BmFunction, form: AAForm) -> np.ndarray:
    """Jets of (B u_1 + A, u_2, ..., u_n) about the base point of h.smooth."""
    s = h.smooth
    bs = s.basis
    avg = angular_average(s)
    zero = np.zeros(s.n, dtype=np.int64)
    nu = np.array([avg.d_I(j).mode(zero) for j in range(s.n)], dtype=complex)
    nu[0] = poly_mul(B_jet(form, s.I0[0], bs), nu[0], bs) + A_jet(form, h.sing, s.I0[0], bs)
    return nu


def bracket_series(f, g, form: AAForm) -> FourierTaylor:
    """{f, g} as a Fourier-Taylor series (jets of B and A about I0).

    ``f`` and ``g`` may be :class:`BmFunction` or :class:`FourierTaylor`; at
    least one must carry a smooth part to fix the representation.
    """
    f = BmFunction.wrap(f)
    g = BmFunction.wrap(g)
    ref = f.smooth if f.smooth is not None else g.smooth
    if ref is None:
        return None  # both purely singular in I1: bracket vanishes
    bs = ref.basis
    n = ref.n
    zero = FourierTaylor.zeros_like(ref)
    Bj = B_jet(form, ref.I0[0], bs)

    def parts(F: BmFunction):
        s = F.smooth if F.smooth is not None else zero
        dphi = [s.d_phi(j) for j in range(n)]
        dI = [s.d_I(j) for j in range(n)]
        b1 = dI[0].poly_multiply(Bj)
        if F.sing is not None:
            b1 = b1 + FourierTaylor.from_callable_jet(n, ref.K_cap, ref.deg, ref.I0, A_jet(form, F.sing, ref.I0[0], bs))
        return dphi, dI, b1

    fphi, fI, fb = parts(f)
    gphi, gI, gb = parts(g)
    out = fphi[0] * gb - fb * gphi[0]
    for i in range(1, n):
        out = out + fphi[i] * gI[i] - fI[i] * gphi[i]
    return out


# ---------------------------------------------------------------------------
# integration


def _field_fn(H: BmFunction, form: AAForm):
    n = H.n
    has_sing = H.sing is not None
    ev = H._evaluator()
    m = form.m
    den = form.den_poly

    def field(phi, I):
        if ev is not None:
            _, gp, gI = ev.value_grad(phi, I)
        else:
            gp = np.zeros(n)
            gI = np.zeros(n)
        x = I[0]
        P = np.polynomial.polynomial.polyval(x, den)
        if P == 0:
            raise DenominatorZero(f"sum c_j/I1^j vanishes at I1 = {x!r}")
        B = x ** m / P
        d1 = gI[0]
        if has_sing:
            d1 = d1 + float(H.sing.deriv(x))
        dphi = np.array(gI, dtype=float)
        dphi[0] = B * d1
        dI = -np.array(gp, dtype=float)
        dI[0] = -B * gp[0]
        return dphi, dI

    return field


def integrate_flow(
    H,
    form: AAForm,
    p0,
    t_end: float,
    dt: float,
    *,
    floor: float = 1e-8,
    drift_tol: float = 1e-6,
    record_every: int = 1,
) -> TrajectorySample:
    """Fixed-step RK4 integration of Hamilton's equations.

    Parameters
    ----------
    H : BmFunction or FourierTaylor
        The Hamiltonian.
    p0 : PhasePoint or (phi, I)
    floor : float
        Integration halts (partial result, ``halted=True``) once |I1| < floor.
    drift_tol : float
        Largest admissible energy change per step, relative to max(1, |H|).
    """
    H = BmFunction.wrap(H)
    _order_check(H, form)
    if dt <= 0:
        raise InvalidParams("dt must be positive")
    phi, I = _as_arrays(p0)
    phi = phi.copy()
    I = I.copy()
    if I[0] == 0:
        raise InvalidParams("initial point lies on the critical set")
    field = _field_fn(H, form)
    nsteps = int(round(t_end / dt))
    side = np.sign(I[0])

    def energy(ph, ac):
        return float(H.value(ph, ac))

    times, phis, Is, Es = [0.0], [phi.copy()], [I.copy()], [energy(phi, I)]
    halted, reason = False, ""
    E_prev = Es[0]
    for step in range(1, nsteps + 1):
        k1p, k1I = field(phi, I)
        k2p, k2I = field(phi + 0.5 * dt * k1p, I + 0.5 * dt * k1I)
        k3p, k3I = field(phi + 0.5 * dt * k2p, I + 0.5 * dt * k2I)
        k4p, k4I = field(phi + dt * k3p, I + dt * k3I)
        phi_new = phi + dt / 6.0 * (k1p + 2 * k2p + 2 * k3p + k4p)
        I_new = I + dt / 6.0 * (k1I + 2 * k2I + 2 * k3I + k4I)
        if not (np.all(np.isfinite(I_new)) and np.all(np.isfinite(phi_new))):
            raise StepTooLarge(f"non-finite state in step {step}")
        if np.sign(I_new[0]) != side:
            raise CrossedCriticalSet(f"step {step} would move I1 from {I[0]!r} to {I_new[0]!r}")
        E_new = energy(phi_new, I_new)
        if abs(E_new - E_prev) > drift_tol * max(1.0, abs(E_prev)):
            raise StepTooLarge(f"energy drift {abs(E_new - E_prev):.3e} in step {step}")
        phi, I, E_prev = phi_new, I_new, E_new
        if step % record_every == 0 or step == nsteps:
            times.append(step * dt)
            phis.append(phi.copy())
            Is.append(I.copy())
            Es.append(E_new)
        if abs(I[0]) < floor:
            halted, reason = True, f"|I1| fell below floor {floor:g}"
            if times[-1] != step * dt:
                times.append(step * dt)
                phis.append(phi.copy())
                Is.append(I.copy())
                Es.append(E_new)
            break
    unwrapped = np.array(phis)
    return TrajectorySample(
        np.array(times), np.mod(unwrapped, TWO_PI), np.array(Is), np.array(Es), unwrapped, halted, reason
    )


def check_defining_function_preservation(H, form: AAForm, p0, t_end: float, dt: float, **kw) -> float:
    """max over the trajectory of |I1'| / |I1|^m."""
    H = BmFunction.wrap(H)
    traj = integrate_flow(H, form, p0, t_end, dt, **kw)
    gp, _ = H.grad(traj.phi_unwrapped, traj.I)
    B = script_B(form, traj.I[:, 0])
    I1dot = -B * gp[:, 0]
    return float(np.max(np.abs(I1dot) / np.abs(traj.I[:, 0]) ** form.m))


def frequency(h: BmFunction, form: AAForm, I) -> np.ndarray:
    """u'(I) = (B u_1 + A, u_2, ..., u_n) for an angle-independent h.

    ``I[0] = 0`` evaluates the at-Z limit, whose first component is
    qhat_m / c_m.
    """
    I = np.asarray(I, dtype=float)
    n = h.n
    if h.smooth is not None:
        _, _, gI = h._evaluator().value_grad(np.zeros(I.shape[:-1] + (n,)), I)
    else:
        gI = np.zeros(I.shape)
    out = np.array(gI, dtype=float)
    x = I[..., 0]
    out[..., 0] = script_B(form, x) * gI[..., 0] + script_A(form, h.sing, x)
    return out

