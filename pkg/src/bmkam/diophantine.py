"""Non-resonance predicates, resonant zones and Diophantine sampling.

A frequency J (the gradient of the smooth part of h) is paired with the
b^m data through

    divisor(k, J, I1) = k1 (B(I1) J1 + A(I1)) + kbar . Jbar,

which at the critical set (I1 = 0) reduces to kbar . Jbar + k1 / K_mod.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from .errors import DegenerateMode, EmptyShrunkDomain, InvalidParams
from .homological import modes_up_to
from .singular import AAForm, BmFunction, SingularPart, script_A, script_B

__all__ = [
    "ResonanceZone",
    "DioParams",
    "DioSample",
    "divisor",
    "is_nonresonant",
    "zone_measure_bound",
    "zone_bound_sensitivity",
    "zone_measure_mc",
    "diophantine_sample",
    "critical_set_budget",
    "series_partial_sums",
]

AT_Z = "Z"


def _is_at_z(I1) -> bool:
    return isinstance(I1, str) and I1.upper() == AT_Z or (not isinstance(I1, str) and I1 is not None and I1 == 0)


def _BA(form: AAForm, sing: SingularPart | None, I1):
    if _is_at_z(I1):
        return 0.0, float(script_A(form, sing, 0.0))
    return float(script_B(form, I1)), float(script_A(form, sing, I1))


def divisor(k, J, I1, form: AAForm, sing: SingularPart | None):
    """k1 (B J1 + A) + kbar . Jbar; ``J`` may be a batch (..., n)."""
    k = np.asarray(k, dtype=float)
    J = np.asarray(J, dtype=float)
    B, A = _BA(form, sing, I1)
    return k[0] * (B * J[..., 0] + A) + J[..., 1:] @ k[1:]


def is_nonresonant(u_val, I1, form: AAForm, sing: SingularPart | None, k, alpha: float) -> bool:
    """|k Bbar(I1) u + k Abar(I1)| >= alpha; ``I1 = "Z"`` (or 0) uses the at-Z limits."""
    k = np.asarray(k)
    if not np.any(k):
        raise InvalidParams("k must be nonzero")
    return bool(abs(divisor(k, u_val, I1, form, sing)) >= alpha)


@dataclass(frozen=True)
class ResonanceZone:
    k: tuple
    alpha: float
    form: AAForm
    sing: SingularPart | None
    I1: object = None
    at_Z: bool = False

    def __post_init__(self):
        k = tuple(int(v) for v in self.k)
        if not any(k):
            raise InvalidParams("k must be nonzero")
        if not self.alpha > 0:
            raise InvalidParams("alpha must be positive")
        object.__setattr__(self, "k", k)
        if self.at_Z:
            object.__setattr__(self, "I1", AT_Z)

    def contains(self, J) -> np.ndarray:
        return np.abs(divisor(self.k, J, self.I1, self.form, self.sing)) < self.alpha


def _diam(box) -> float:
    lo, hi = (np.asarray(b, dtype=float) for b in box)
    return float(np.linalg.norm(hi - lo))


def zone_measure_bound(F_box, k, alpha: float, I1ctx, form: AAForm, sing: SingularPart | None = None) -> float:
    """(diam F)^{n-1} 2 alpha / |k|_{2,omega},  |k|_{2,omega} = sqrt(B^2 k1^2 + |kbar|^2).

    ``I1ctx`` is a value of I1, ``"Z"`` for the critical set, or an
    interval ``(a, b)`` whose midpoint fixes B.
    """
    k = np.asarray(k, dtype=float)
    if not np.any(k):
        raise InvalidParams("k must be nonzero")
    if alpha <= 0:
        return 0.0
    lo, hi = (np.asarray(b, dtype=float) for b in F_box)
    n = len(lo)
    d = _diam(F_box)
    if isinstance(I1ctx, (tuple, list)):
        I1ctx = 0.5 * (I1ctx[0] + I1ctx[1])
    if _is_at_z(I1ctx) and not np.any(k[1:]):
        return 0.0 if alpha <= abs(k[0] / form.modular_period(sing)) else d ** n
    B = 0.0 if _is_at_z(I1ctx) else float(script_B(form, I1ctx))
    norm = math.sqrt(B * B * k[0] ** 2 + float(k[1:] @ k[1:]))
    if norm == 0:
        raise DegenerateMode(f"|k|_(2,omega) vanishes for k = {tuple(int(v) for v in k)}")
    return d ** (n - 1) * 2 * alpha / norm


def zone_bound_sensitivity(F_box, k, alpha, I1_range, form, sing=None, samples: int = 11) -> dict:
    """Spread of the bound when B is taken anywhere in the I1 range."""
    xs = np.linspace(I1_range[0], I1_range[1], samples)
    vals = [zone_measure_bound(F_box, k, alpha, float(x), form, sing) for x in xs]
    mid = zone_measure_bound(F_box, k, alpha, tuple(I1_range), form, sing)
    return {"midpoint": mid, "min": float(min(vals)), "max": float(max(vals))}


def _rng(seed: int) -> np.random.Generator:
    return np.random.Generator(np.random.Philox(int(seed)))


def zone_measure_mc(F_box, k, alpha, I1, form, sing=None, N: int = 100_000, seed: int = 0) -> tuple[float, float]:
    """Monte-Carlo measure of F n zone with its standard error."""
    lo, hi = (np.asarray(b, dtype=float) for b in F_box)
    vol = float(np.prod(hi - lo))
    J = lo + (hi - lo) * _rng(seed).random((int(N), len(lo)))
    hit = np.abs(divisor(k, J, I1, form, sing)) < alpha
    p = hit.mean()
    return vol * p, vol * math.sqrt(max(p * (1 - p), 0.0) / N)


@dataclass(frozen=True)
class DioParams:
    tau: float
    gamma: float
    K: int = 50

    def __post_init__(self):
        if self.gamma < 0:
            raise InvalidParams("gamma must be non-negative")
        if self.K < 1:
            raise InvalidParams("K must be a positive integer")

    def check(self, n: int):
        if self.tau <= n - 1:
            raise InvalidParams(f"tau must exceed n - 1 = {n - 1}")


@dataclass
class DioSample:
    points: np.ndarray
    kept: np.ndarray
    worst_divisor: np.ndarray
    worst_k: np.ndarray
    seed: int
    shrunk_box: tuple
    extra: dict = field(default_factory=dict)

    @property
    def kept_fraction(self) -> float:
        return float(self.kept.mean()) if len(self.kept) else 0.0

    @property
    def kept_points(self) -> np.ndarray:
        return self.points[self.kept]

    def sigma(self) -> float:
        p = self.kept_fraction
        return math.sqrt(p * (1 - p) / max(len(self.kept), 1))


def diophantine_sample(G, form: AAForm, sing: SingularPart | None, u, dio: DioParams, N: int, seed: int,
                       *, mu: float = 1.0, chunk: int = 20_000) -> DioSample:
    """Sample G - 2 gamma / mu uniformly and keep the Diophantine points.

    ``u`` maps an (N, n) array of actions to the smooth frequencies (N, n);
    a :class:`BmFunction` is accepted and its smooth gradient used.  A point
    is kept iff |divisor(k)| >= gamma / |k|_1^tau for every 0 < |k|_1 <= K.
    """
    if N < 1:
        raise InvalidParams("N must be at least 1")
    lo, hi = (np.asarray(b, dtype=float) for b in G)
    n = len(lo)
    dio.check(n)
    shrink = 2 * dio.gamma / mu
    slo, shi = lo + shrink, hi - shrink
    if np.any(slo > shi):
        raise EmptyShrunkDomain(f"G shrunk by 2 gamma/mu = {shrink:.3g} is empty")
    if isinstance(u, BmFunction):
        ev = u._evaluator()
        freq = lambda I: ev.value_grad(np.zeros_like(I), I)[2]  # noqa: E731
    else:
        freq = u
    pts = slo + (shi - slo) * _rng(seed).random((int(N), n))
    modes = modes_up_to(n, dio.K).astype(float)
    l1 = np.abs(modes).sum(axis=1)
    thresh = dio.gamma / l1 ** dio.tau
    chunk = max(1, min(chunk, 4_000_000 // len(modes)))
    kept = np.empty(len(pts), dtype=bool)
    worst = np.empty(len(pts))
    worst_k = np.empty((len(pts), n), dtype=np.int64)
    for s in range(0, len(pts), chunk):
        P = pts[s:s + chunk]
        J = np.asarray(freq(P), dtype=float)
        x = P[:, 0]
        B = script_B(form, x)
        A = script_A(form, sing, x)
        eff = J.copy()
        eff[:, 0] = B * J[:, 0] + A
        d = np.abs(eff @ modes.T)  # (chunk, M)
        with np.errstate(divide="ignore", invalid="ignore"):
            ratio = np.where(thresh > 0, d / np.where(thresh > 0, thresh, 1.0), np.where(d > 0, np.inf, 1.0))
        idx = np.argmin(ratio, axis=1)
        kept[s:s + chunk] = ratio[np.arange(len(P)), idx] >= 1
        worst[s:s + chunk] = d[np.arange(len(P)), idx]
        worst_k[s:s + chunk] = modes[idx].astype(np.int64)
    K_big = 4 * dio.K
    while K_big > dio.K + 1 and (2 * K_big + 1) ** n > 4_000_000:
        K_big = (K_big + dio.K) // 2
    tail = series_partial_sums(dio.tau, n, [dio.K, K_big])
    return DioSample(pts, kept, worst, worst_k, int(seed), (tuple(slo), tuple(shi)),
                     {"series_tail_estimate": tail[1] - tail[0], "K_scan": dio.K})


def critical_set_budget(beta: float, K_mod: float) -> bool:
    """beta <= 1 / |K_mod| (non-strict)."""
    return bool(beta <= 1.0 / abs(K_mod))


def series_partial_sums(tau: float, n: int, K_list) -> list:
    """Partial sums of sum_{kbar != 0, |k|_1 <= K} 1 / (|k|_1^tau |kbar|_1)."""
    K_max = int(max(K_list))
    modes = modes_up_to(n, K_max)
    kb = np.abs(modes[:, 1:]).sum(axis=1)
    sel = kb > 0
    l1 = np.abs(modes[sel]).sum(axis=1)
    terms = 1.0 / (l1.astype(float) ** tau * kb[sel])
    order = np.argsort(l1, kind="stable")
    cum = np.cumsum(terms[order])
    l1s = l1[order]
    out = []
    for K in K_list:
        j = np.searchsorted(l1s, K, side="right")
        out.append(float(cum[j - 1]) if j else 0.0)
    return out
