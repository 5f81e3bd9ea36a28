"""Truncated Fourier-Taylor series and weighted analytic norms.

A :class:`FourierTaylor` object represents a real function

    f(phi, I) = sum_k f_k(I) exp(i k.phi)

where every mode coefficient f_k is a complex polynomial of total degree at
most ``deg`` in the shifted actions ``x = I - I0``.  Modes are stored
sparsely as an integer array ``modes`` of shape (M, n) together with a
complex coefficient array ``coef`` of shape (M, P), P being the number of
monomials.  Products are computed by direct convolution over the stored
modes and are capped at ``|k|_1 <= K_cap`` and total degree ``deg``; the
mass of everything discarded by a cap is accumulated in ``cap_loss``.
"""

from __future__ import annotations

import itertools
import math
from dataclasses import dataclass
from functools import lru_cache
from typing import Mapping

import numpy as np

from .errors import InvalidParams

__all__ = [
    "Basis",
    "basis",
    "DomainSpec",
    "FourierTaylor",
    "angular_average",
    "truncate_low",
    "truncate_high",
    "differentiate",
    "weighted_norm",
    "derivative_norm",
    "mode_bounds",
]


# ---------------------------------------------------------------------------
# monomial bookkeeping


@dataclass(frozen=True, eq=False)
class Basis:
    """Monomials of total degree <= deg in n variables, graded order."""

    n: int
    deg: int
    exps: np.ndarray
    index: dict
    degrees: np.ndarray
    mul_groups: tuple
    overflow: tuple
    dmaps: tuple
    triples: tuple

    @property
    def size(self) -> int:
        return len(self.exps)

    def monomials(self, x: np.ndarray) -> np.ndarray:
        """Evaluate all monomials at points ``x`` of shape (..., n)."""
        x = np.asarray(x)
        out = np.ones(x.shape[:-1] + (self.size,), dtype=np.result_type(x, float))
        for j in range(self.n):
            pw = x[..., j, None] ** self.exps[:, j]
            out = out * pw
        return out


@lru_cache(maxsize=None)
def basis(n: int, deg: int) -> Basis:
    exps = []
    for d in range(deg + 1):
        layer = [e for e in itertools.product(range(d + 1), repeat=n) if sum(e) == d]
        layer.sort(reverse=True)
        exps.extend(layer)
    index = {e: i for i, e in enumerate(exps)}
    arr = np.array(exps, dtype=np.int64).reshape(len(exps), n)
    degrees = arr.sum(axis=1)

    groups = [([], []) for _ in exps]
    over_a, over_b = [], []
    for ia, ea in enumerate(exps):
        for ib, eb in enumerate(exps):
            s = tuple(a + b for a, b in zip(ea, eb))
            ic = index.get(s)
            if ic is None:
                over_a.append(ia)
                over_b.append(ib)
            else:
                groups[ic][0].append(ia)
                groups[ic][1].append(ib)
    mul_groups = tuple((np.array(a, dtype=np.int64), np.array(b, dtype=np.int64)) for a, b in groups)
    overflow = (np.array(over_a, dtype=np.int64), np.array(over_b, dtype=np.int64))

    dmaps = []
    for j in range(n):
        src, dst, fac = [], [], []
        for i, e in enumerate(exps):
            if e[j] > 0:
                t = list(e)
                t[j] -= 1
                src.append(i)
                dst.append(index[tuple(t)])
                fac.append(float(e[j]))
        dmaps.append((np.array(src, dtype=np.int64), np.array(dst, dtype=np.int64), np.array(fac)))
    triples = tuple((int(a), int(b), c) for c, (la, lb) in enumerate(mul_groups) for a, b in zip(la, lb))
    return Basis(n, deg, arr, index, degrees, mul_groups, overflow, tuple(dmaps), triples)


def poly_mul(a: np.ndarray, b: np.ndarray, bs: Basis) -> np.ndarray:
    """Truncated product of polynomial coefficient arrays (..., P)."""
    a, b = np.broadcast_arrays(a, b)
    out = np.zeros(a.shape, dtype=np.result_type(a, b))
    for c, (la, lb) in enumerate(bs.mul_groups):
        out[..., c] = np.sum(a[..., la] * b[..., lb], axis=-1)
    return out


def poly_div(num: np.ndarray, den: np.ndarray, bs: Basis) -> np.ndarray:
    """Truncated series quotient num/den; den[..., 0] must be nonzero."""
    num, den = np.broadcast_arrays(num, den)
    out = np.zeros(num.shape, dtype=np.result_type(num, den, complex))
    d0 = den[..., 0]
    for c, (la, lb) in enumerate(bs.mul_groups):
        # out_c * d_0 + sum_{b != 0} out_a d_b = num_c
        mask = lb != 0
        acc = num[..., c].astype(out.dtype)
        if mask.any():
            acc = acc - np.sum(out[..., la[mask]] * den[..., lb[mask]], axis=-1)
        out[..., c] = acc / d0
    return out


def univariate_to_basis(coeffs: np.ndarray, var: int, bs: Basis) -> np.ndarray:
    """Embed a univariate series sum_j a_j x_var^j into the basis."""
    out = np.zeros(bs.size, dtype=np.result_type(coeffs, float))
    for j, a in enumerate(coeffs[: bs.deg + 1]):
        e = [0] * bs.n
        e[var] = j
        out[bs.index[tuple(e)]] = a
    return out


def rational_jet(num: np.ndarray, den: np.ndarray, a: float, var: int, bs: Basis) -> np.ndarray:
    """Jet at x_var = 0 of p(a + x)/q(a + x) for power-basis polynomials p, q."""
    def shifted(c):
        c = np.atleast_1d(np.asarray(c, dtype=float))
        # coefficients of c(a + x) in powers of x
        out = np.zeros(len(c))
        for j, cj in enumerate(c):
            for i in range(j + 1):
                out[i] += cj * math.comb(j, i) * a ** (j - i)
        return out

    p = shifted(num)
    q = shifted(den)
    L = bs.deg + 1
    p = np.pad(p, (0, max(0, L - len(p))))[:L]
    q = np.pad(q, (0, max(0, L - len(q))))[:L]
    r = np.zeros(L)
    for i in range(L):
        r[i] = (p[i] - np.dot(r[:i], q[i:0:-1])) / q[0]
    return univariate_to_basis(r, var, bs)


# ---------------------------------------------------------------------------
# domains


@dataclass(frozen=True)
class DomainSpec:
    """Action box G = [lo, hi] with analyticity widths (rho1, rho2)."""

    lo: tuple
    hi: tuple
    rho1: float
    rho2: float

    def __post_init__(self):
        lo = tuple(float(v) for v in self.lo)
        hi = tuple(float(v) for v in self.hi)
        object.__setattr__(self, "lo", lo)
        object.__setattr__(self, "hi", hi)
        if len(lo) != len(hi) or any(a > b for a, b in zip(lo, hi)):
            raise InvalidParams("box bounds must satisfy lo <= hi componentwise")
        if not (self.rho1 > 0 and self.rho2 > 0):
            raise InvalidParams("rho1 and rho2 must be positive")
        if lo[0] - self.rho2 <= 0.0 <= hi[0] + self.rho2:
            raise InvalidParams("the widened box must stay on one side of I1 = 0")

    @property
    def n(self) -> int:
        return len(self.lo)

    @property
    def center(self) -> np.ndarray:
        return 0.5 * (np.array(self.lo) + np.array(self.hi))

    @property
    def volume(self) -> float:
        return float(np.prod(np.array(self.hi) - np.array(self.lo)))

    def radius(self, I0) -> np.ndarray:
        """Per-coordinate bound on |I - I0| over the complex widening of G."""
        I0 = np.asarray(I0, dtype=float)
        lo, hi = np.array(self.lo), np.array(self.hi)
        return np.maximum(np.abs(hi - I0), np.abs(lo - I0)) + self.rho2

    def shrink(self, d1: float, d2: float) -> "DomainSpec":
        return DomainSpec(self.lo, self.hi, self.rho1 - d1, self.rho2 - d2)

    def with_rho(self, rho1: float, rho2: float) -> "DomainSpec":
        return DomainSpec(self.lo, self.hi, rho1, rho2)

    def grid(self, per_axis: int = 3) -> np.ndarray:
        axes = [np.linspace(a, b, per_axis) if b > a else np.array([a]) for a, b in zip(self.lo, self.hi)]
        mesh = np.meshgrid(*axes, indexing="ij")
        return np.stack([m.ravel() for m in mesh], axis=-1)


# ---------------------------------------------------------------------------
# the series type


def _weights(scale: np.ndarray, bs: Basis) -> np.ndarray:
    return np.prod(scale[None, :] ** bs.exps, axis=1)


def _as_modes(modes, n):
    arr = np.asarray(modes, dtype=np.int64)
    return arr.reshape(-1, n)


def _canonical(modes: np.ndarray, coef: np.ndarray, K_cap: int, weights: np.ndarray):
    """Merge duplicate modes, drop zero rows and modes beyond the cap."""
    n = modes.shape[1]
    if len(modes) == 0:
        return modes.reshape(0, n), coef.reshape(0, coef.shape[-1] if coef.ndim == 2 else 0), 0.0
    l1 = np.abs(modes).sum(axis=1)
    over = l1 > K_cap
    lost = float((np.abs(coef[over]) @ weights).sum()) if over.any() else 0.0
    modes, coef = modes[~over], coef[~over]
    if len(modes) == 0:
        return modes, coef, lost
    base = 2 * int(np.abs(modes).max()) + 1
    key = np.zeros(len(modes), dtype=np.int64)
    for j in range(n):
        key = key * base + (modes[:, j] + base // 2)
    order = np.argsort(key, kind="stable")
    key_s = key[order]
    starts = np.flatnonzero(np.r_[True, key_s[1:] != key_s[:-1]])
    summed = np.add.reduceat(coef[order], starts, axis=0)
    umodes = modes[order][starts]
    keep = np.any(summed != 0, axis=1)
    return umodes[keep], summed[keep], lost


class FourierTaylor:
    """Real function on T^n x (action box) as a truncated Fourier-Taylor series.

    Parameters
    ----------
    n : int
        Number of degrees of freedom.
    K_cap : int
        Largest stored ``|k|_1``.
    deg : int
        Largest total polynomial degree in ``I - I0``.
    I0 : array_like
        Base point of the polynomial expansions.
    modes, coef : array_like, optional
        Integer modes (M, n) and complex monomial coefficients (M, P).
    scale : array_like, optional
        Radii |I - I0| <= scale used to weigh discarded terms in
        ``cap_loss``; defaults to ones.
    """

    __slots__ = ("n", "K_cap", "deg", "I0", "modes", "coef", "cap_loss", "scale", "_basis", "_w")

    def __init__(self, n, K_cap, deg, I0, modes=None, coef=None, cap_loss=0.0, scale=None):
        self.n = int(n)
        self.K_cap = int(K_cap)
        self.deg = int(deg)
        self.I0 = np.array(I0, dtype=float).reshape(self.n)
        self._basis = basis(self.n, self.deg)
        self.scale = np.ones(self.n) if scale is None else np.array(scale, dtype=float).reshape(self.n)
        self._w = _weights(self.scale, self._basis)
        P = self._basis.size
        if modes is None:
            m = np.zeros((0, self.n), dtype=np.int64)
            c = np.zeros((0, P), dtype=complex)
            lost = 0.0
        else:
            m = _as_modes(modes, self.n)
            c = np.asarray(coef, dtype=complex).reshape(len(m), P)
            m, c, lost = _canonical(m, c, self.K_cap, self._w)
        self.modes = m
        self.coef = c
        self.cap_loss = float(cap_loss) + lost
        self.modes.setflags(write=False)
        self.coef.setflags(write=False)

    # -- constructors -----------------------------------------------------

    @classmethod
    def zeros_like(cls, other: "FourierTaylor") -> "FourierTaylor":
        return cls(other.n, other.K_cap, other.deg, other.I0, scale=other.scale)

    def _new(self, modes, coef, cap_loss=None) -> "FourierTaylor":
        return FourierTaylor(
            self.n, self.K_cap, self.deg, self.I0, modes, coef,
            self.cap_loss if cap_loss is None else cap_loss, self.scale,
        )

    def with_scale(self, scale) -> "FourierTaylor":
        """Same series, with discarded terms weighed on |I - I0| <= scale."""
        return FourierTaylor(self.n, self.K_cap, self.deg, self.I0, self.modes, self.coef, self.cap_loss, scale)

    @classmethod
    def from_terms(cls, n, K_cap, deg, I0, terms: Mapping) -> "FourierTaylor":
        """Build from ``{k: {exponent_tuple: complex}}`` (no symmetrisation)."""
        bs = basis(int(n), int(deg))
        modes, rows = [], []
        for k, poly in terms.items():
            row = np.zeros(bs.size, dtype=complex)
            for e, v in poly.items():
                e = tuple(int(x) for x in e)
                if e not in bs.index:
                    raise InvalidParams(f"monomial {e} exceeds degree {deg}")
                row[bs.index[e]] += v
            modes.append(tuple(int(x) for x in k))
            rows.append(row)
        return cls(n, K_cap, deg, I0, np.array(modes, dtype=np.int64).reshape(-1, n),
                   np.array(rows).reshape(-1, bs.size))

    @classmethod
    def trig(cls, n, K_cap, deg, I0, cos=None, sin=None, const=None) -> "FourierTaylor":
        """Real trigonometric polynomial.

        ``cos`` and ``sin`` map a mode ``k`` to a polynomial ``{exp: coeff}``
        (or a plain number for a constant coefficient); ``const`` is the
        k = 0 polynomial.
        """
        terms: dict = {}

        def _poly(p):
            if isinstance(p, Mapping):
                return dict(p)
            return {(0,) * n: p}

        def _add(k, poly, scale):
            d = terms.setdefault(tuple(k), {})
            for e, v in poly.items():
                d[tuple(e)] = d.get(tuple(e), 0) + scale * v

        for k, p in (cos or {}).items():
            p = _poly(p)
            _add(k, p, 0.5)
            _add(tuple(-x for x in k), p, 0.5)
        for k, p in (sin or {}).items():
            p = _poly(p)
            _add(k, p, -0.5j)
            _add(tuple(-x for x in k), p, 0.5j)
        if const is not None:
            _add((0,) * n, _poly(const), 1.0)
        return cls.from_terms(n, K_cap, deg, I0, terms)

    @classmethod
    def polynomial(cls, n, K_cap, deg, I0, poly: Mapping) -> "FourierTaylor":
        """Angle-independent function from ``{exp: coeff}`` in ``I - I0``."""
        return cls.from_terms(n, K_cap, deg, I0, {(0,) * n: poly})

    @classmethod
    def from_callable_jet(cls, n, K_cap, deg, I0, coeffs: np.ndarray) -> "FourierTaylor":
        """Angle-independent function from a basis coefficient vector."""
        return cls(n, K_cap, deg, I0, np.zeros((1, n), dtype=np.int64), np.asarray(coeffs).reshape(1, -1))

    # -- basic properties -------------------------------------------------

    @property
    def basis(self) -> Basis:
        return self._basis

    @property
    def num_modes(self) -> int:
        return len(self.modes)

    def is_zero(self) -> bool:
        return len(self.modes) == 0

    def mode(self, k) -> np.ndarray:
        """Coefficient polynomial of mode ``k`` (zeros if absent)."""
        k = np.asarray(k, dtype=np.int64)
        hit = np.flatnonzero(np.all(self.modes == k, axis=1))
        if len(hit) == 0:
            return np.zeros(self._basis.size, dtype=complex)
        return self.coef[hit[0]].copy()

    def compatible(self, other: "FourierTaylor") -> bool:
        return (
            self.n == other.n and self.K_cap == other.K_cap and self.deg == other.deg
            and np.array_equal(self.I0, other.I0)
        )

    def _check(self, other):
        if not self.compatible(other):
            raise InvalidParams("incompatible FourierTaylor operands (n, K_cap, deg or I0 differ)")

    def reality_defect(self) -> float:
        """Largest |f_{-k} - conj(f_k)|."""
        neg = self._new(-self.modes, np.conj(self.coef))
        return float(np.abs((self - neg).coef).max(initial=0.0))

    def realify(self) -> "FourierTaylor":
        neg = self._new(-self.modes, np.conj(self.coef))
        return (self + neg) * 0.5

    def prune(self, tol: float) -> "FourierTaylor":
        """Drop modes whose coefficient mass is at most ``tol`` (accounted)."""
        mass = np.abs(self.coef) @ self._w
        drop = mass <= tol
        return self._new(self.modes[~drop], self.coef[~drop], self.cap_loss + float(mass[drop].sum()))

    def with_loss(self, cap_loss: float) -> "FourierTaylor":
        return self._new(self.modes, self.coef, cap_loss)

    def with_cap(self, K_cap: int) -> "FourierTaylor":
        return FourierTaylor(self.n, K_cap, self.deg, self.I0, self.modes, self.coef, self.cap_loss, self.scale)

    # -- arithmetic --------------------------------------------------------

    def __add__(self, other):
        if isinstance(other, FourierTaylor):
            self._check(other)
            return self._new(
                np.vstack([self.modes, other.modes]),
                np.vstack([self.coef, other.coef]),
                self.cap_loss + other.cap_loss,
            )
        other = complex(other)
        if other == 0:
            return self
        c = np.zeros((1, self._basis.size), dtype=complex)
        c[0, 0] = other
        return self + self._new(np.zeros((1, self.n), dtype=np.int64), c, 0.0)

    __radd__ = __add__

    def __neg__(self):
        return self._new(self.modes, -self.coef)

    def __sub__(self, other):
        return self + (-other)

    def __rsub__(self, other):
        return (-self) + other

    def __mul__(self, other):
        if isinstance(other, FourierTaylor):
            return self.multiply(other)
        s = complex(other)
        if s == 0:
            return FourierTaylor.zeros_like(self)
        if s.imag == 0:
            s = s.real
        return self._new(self.modes, self.coef * s, self.cap_loss * abs(s))

    __rmul__ = __mul__

    def __truediv__(self, s):
        return self * (1.0 / s)

    def multiply(self, other: "FourierTaylor") -> "FourierTaylor":
        """Product truncated to (K_cap, deg); discarded mass goes to cap_loss."""
        self._check(other)
        bs = self._basis
        if self.is_zero() or other.is_zero():
            return FourierTaylor.zeros_like(self)
        kA, kB = self.modes, other.modes
        sums = kA[:, None, :] + kB[None, :, :]
        keep = np.abs(sums).sum(axis=-1) <= self.K_cap
        w = self._w
        massA = np.abs(self.coef) @ w
        massB = np.abs(other.coef) @ w
        lost_modes = float(massA @ (~keep).astype(float) @ massB)
        ia, ib = np.nonzero(keep)
        A = np.ascontiguousarray(self.coef[ia].T)
        B = np.ascontiguousarray(other.coef[ib].T)
        out = np.zeros((bs.size, len(ia)), dtype=complex)
        for a, b, c in bs.triples:
            out[c] += A[a] * B[b]
        out = out.T
        oa, ob = bs.overflow
        lost_deg = 0.0
        if len(oa):
            colA = np.abs(self.coef).sum(axis=0) * w
            colB = np.abs(other.coef).sum(axis=0) * w
            lost_deg = float(np.sum(colA[oa] * colB[ob]))
        loss = (
            lost_modes + lost_deg
            + self.cap_loss * float(massB.sum()) + other.cap_loss * float(massA.sum())
            + self.cap_loss * other.cap_loss
        )
        return FourierTaylor(self.n, self.K_cap, self.deg, self.I0, sums[ia, ib], out, loss, self.scale)

    def poly_multiply(self, jet: np.ndarray) -> "FourierTaylor":
        """Multiply every mode by an angle-independent jet (basis vector)."""
        if self.is_zero():
            return self
        jet = np.asarray(jet)
        out = poly_mul(self.coef, jet[None, :], self._basis)
        oa, ob = self._basis.overflow
        lost = 0.0
        if len(oa):
            w = self._w
            col = np.abs(self.coef).sum(axis=0) * w
            lost = float(np.sum(col[oa] * np.abs(jet[ob]) * w[ob]))
        mass = float(np.abs(jet) @ self._w)
        return self._new(self.modes, out, self.cap_loss * mass + lost)

    def __pow__(self, p: int):
        if p < 0 or int(p) != p:
            raise InvalidParams("only non-negative integer powers")
        out = FourierTaylor.zeros_like(self) + 1.0
        for _ in range(int(p)):
            out = out * self
        return out

    # -- calculus ----------------------------------------------------------

    def d_phi(self, j: int) -> "FourierTaylor":
        fac = 1j * self.modes[:, j]
        return self._new(self.modes, self.coef * fac[:, None])

    def d_I(self, j: int) -> "FourierTaylor":
        src, dst, fac = self._basis.dmaps[j]
        out = np.zeros_like(self.coef)
        if len(src):
            out[:, dst] = self.coef[:, src] * fac
        return self._new(self.modes, out)

    # -- evaluation -------------------------------------------------------

    def _phases(self, phi):
        return np.exp(1j * (np.asarray(phi, dtype=float) @ self.modes.T))

    def eval_complex(self, phi, I) -> np.ndarray:
        phi = np.asarray(phi, dtype=float)
        I = np.asarray(I, dtype=float)
        mono = self._basis.monomials(I - self.I0)
        if self.is_zero():
            return np.zeros(np.broadcast_shapes(phi.shape[:-1], I.shape[:-1]), dtype=complex)
        vals = mono @ self.coef.T  # (..., M)
        return np.sum(vals * self._phases(phi), axis=-1)

    def __call__(self, phi, I) -> np.ndarray:
        return self.eval_complex(phi, I).real

    def evaluator(self) -> "Evaluator":
        return Evaluator(self)

    # -- views -------------------------------------------------------------

    def select(self, mask: np.ndarray) -> "FourierTaylor":
        return self._new(self.modes[mask], self.coef[mask])

    def __repr__(self) -> str:
        return f"FourierTaylor(n={self.n}, K_cap={self.K_cap}, deg={self.deg}, modes={self.num_modes})"

    # -- serialisation -----------------------------------------------------

    def to_json(self) -> dict:
        exps = self._basis.exps
        modes = []
        for k, row in zip(self.modes, self.coef):
            re, im = {}, {}
            for e, v in zip(exps, row):
                key = ",".join(str(int(x)) for x in e)
                if v.real != 0:
                    re[key] = float(v.real)
                if v.imag != 0:
                    im[key] = float(v.imag)
            modes.append({"k": [int(x) for x in k], "re_poly": re, "im_poly": im})
        return {"n": self.n, "K_cap": self.K_cap, "deg": self.deg, "I0": [float(x) for x in self.I0], "modes": modes}

    @classmethod
    def from_json(cls, doc: Mapping) -> "FourierTaylor":
        try:
            n, K_cap, deg = int(doc["n"]), int(doc["K_cap"]), int(doc["deg"])
            I0 = [float(x) for x in doc["I0"]]
            terms: dict = {}
            for entry in doc.get("modes", []):
                k = tuple(int(x) for x in entry["k"])
                poly = terms.setdefault(k, {})
                for part, scale in (("re_poly", 1.0), ("im_poly", 1j)):
                    for key, v in entry.get(part, {}).items():
                        e = tuple(int(x) for x in str(key).split(",")) if str(key) else (0,) * n
                        poly[e] = poly.get(e, 0) + scale * float(v)
        except (KeyError, TypeError, ValueError) as exc:
            raise InvalidParams(f"malformed FourierTaylor document: {exc}") from exc
        return cls.from_terms(n, K_cap, deg, I0, terms)


class Evaluator:
    """Fast repeated evaluation of value and gradient at single points."""

    def __init__(self, f: FourierTaylor):
        self.f = f
        n = f.n
        stack = [f.coef]
        stack += [f.coef * (1j * f.modes[:, j])[:, None] for j in range(n)]
        for j in range(n):
            src, dst, fac = f.basis.dmaps[j]
            d = np.zeros_like(f.coef)
            if len(src):
                d[:, dst] = f.coef[:, src] * fac
            stack.append(d)
        self.stack = np.array(stack)  # (1+2n, M, P)
        self.modes = f.modes.astype(float)
        self.basis = f.basis
        self.I0 = f.I0

    def value_grad(self, phi, I):
        """Return (value, dphi, dI) at one point or a batch of points."""
        n = self.f.n
        phi = np.asarray(phi, dtype=float)
        I = np.asarray(I, dtype=float)
        if self.f.is_zero():
            shp = np.broadcast_shapes(phi.shape[:-1], I.shape[:-1])
            z = np.zeros(shp)
            return z, np.zeros(shp + (n,)), np.zeros(shp + (n,))
        mono = self.basis.monomials(I - self.I0)  # (..., P)
        ph = np.exp(1j * (phi @ self.modes.T))  # (..., M)
        # (..., 1+2n)
        vals = np.einsum("smp,...p,...m->...s", self.stack, mono, ph).real
        return vals[..., 0], vals[..., 1 : 1 + n], vals[..., 1 + n :]


# ---------------------------------------------------------------------------
# module-level operations


def angular_average(f: FourierTaylor) -> FourierTaylor:
    """The k = 0 part of f."""
    return f.select(np.all(f.modes == 0, axis=1))


def truncate_low(f: FourierTaylor, K: int, include_zero: bool = False) -> FourierTaylor:
    """Modes with 0 < |k|_1 <= K (and k = 0 if requested)."""
    if K < 0:
        raise InvalidParams("K must be non-negative")
    l1 = np.abs(f.modes).sum(axis=1)
    mask = (l1 <= K) & ((l1 > 0) | include_zero)
    return f.select(mask)


def truncate_high(f: FourierTaylor, K: int) -> FourierTaylor:
    """Modes with |k|_1 > K."""
    if K < 0:
        raise InvalidParams("K must be non-negative")
    return f.select(np.abs(f.modes).sum(axis=1) > K)


def differentiate(f: FourierTaylor, kind: str, j: int) -> FourierTaylor:
    """Exact termwise derivative with respect to ``phi_j`` or ``I_j`` (0-based)."""
    if kind == "phi":
        return f.d_phi(j)
    if kind == "I":
        return f.d_I(j)
    raise InvalidParams(f"unknown derivative kind {kind!r}")


def _poly_bound(coef: np.ndarray, radius: np.ndarray, bs: Basis) -> np.ndarray:
    weights = np.prod(radius[None, :] ** bs.exps, axis=1)
    return np.abs(coef) @ weights


def mode_bounds(f: FourierTaylor, dom: DomainSpec) -> np.ndarray:
    """Certified bounds of |f_k| over the complex widening of G, per mode."""
    return _poly_bound(f.coef, dom.radius(f.I0), f.basis)


def weighted_norm(f: FourierTaylor, dom: DomainSpec) -> float:
    """sum_k |f_k|_{G, rho2} exp(|k|_1 rho1)."""
    if f.is_zero():
        return 0.0
    l1 = np.abs(f.modes).sum(axis=1)
    return float(np.sum(mode_bounds(f, dom) * np.exp(l1 * dom.rho1)))


def _phi_norm(f: FourierTaylor, dom: DomainSpec) -> float:
    if f.is_zero():
        return 0.0
    l1 = np.abs(f.modes).sum(axis=1)
    return float(np.sum(l1 * mode_bounds(f, dom) * np.exp(l1 * dom.rho1)))


def _action_norm(f: FourierTaylor, dom: DomainSpec) -> float:
    if f.is_zero():
        return 0.0
    r = dom.radius(f.I0)
    bs = f.basis
    per = np.zeros((f.num_modes, f.n))
    for j in range(f.n):
        src, dst, fac = bs.dmaps[j]
        d = np.zeros_like(f.coef)
        if len(src):
            d[:, dst] = f.coef[:, src] * fac
        per[:, j] = _poly_bound(d, r, bs)
    l1 = np.abs(f.modes).sum(axis=1)
    return float(np.sum(per.max(axis=1) * np.exp(l1 * dom.rho1)))


def derivative_norm(f: FourierTaylor, dom: DomainSpec, c: float) -> float:
    """max(||df/dphi||_{G,rho,1}, c ||df/dI||_{G,rho,inf})."""
    if c <= 0:
        raise InvalidParams("c must be positive")
    return max(_phi_norm(f, dom), c * _action_norm(f, dom))


def phi_gradient_norm(f: FourierTaylor, dom: DomainSpec) -> float:
    return _phi_norm(f, dom)


def action_gradient_norm(f: FourierTaylor, dom: DomainSpec) -> float:
    return _action_norm(f, dom)


def random_trig(rng: np.random.Generator, n: int, K: int, deg: int, I0, K_cap: int | None = None,
                n_modes: int = 6, poly_deg: int | None = None, scale: float = 1.0) -> FourierTaylor:
    """Random real trigonometric polynomial with polynomial coefficients."""
    K_cap = K if K_cap is None else K_cap
    poly_deg = deg if poly_deg is None else poly_deg
    bs = basis(n, deg)
    terms: dict = {}
    cand = [k for k in itertools.product(range(-K, K + 1), repeat=n) if 0 < sum(map(abs, k)) <= K]
    picks = rng.choice(len(cand), size=min(n_modes, len(cand)), replace=False)
    for idx in picks:
        k = cand[idx]
        poly = {}
        for e in bs.exps:
            if e.sum() <= poly_deg:
                poly[tuple(int(x) for x in e)] = scale * complex(rng.normal(), rng.normal()) / (1 + e.sum()) ** 2
        terms[k] = poly
        terms[tuple(-x for x in k)] = {e: np.conj(v) for e, v in poly.items()}
    const = {tuple(int(x) for x in e): scale * rng.normal() / (1 + e.sum()) ** 2 for e in bs.exps if e.sum() <= poly_deg}
    terms[(0,) * n] = const
    return FourierTaylor.from_terms(n, K_cap, deg, I0, terms)
