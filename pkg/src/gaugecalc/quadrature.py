"""L^r mean-deviation integrals.

The integrand is always ``[F(y) - c - alpha * (y - x)]_part ** r`` on a window
``[lo, hi]``, where ``c`` defaults to ``F(x)``.  Routes, in order:

* polynomial models with integer ``r``: exact, via the antiderivative between
  the real roots of the integrand;
* models with their own closed forms (the Cantor-like counterexample);
* everything else: pieces on which the model is exactly affine go to the
  closed-form kernel, the rest to 15-point Gauss-Legendre with the error
  estimated against the two halves, refining the worst piece first
  (registered breakpoints always split a piece).
"""

from __future__ import annotations

import heapq
import math
from dataclasses import dataclass

import numpy as np
from numpy.polynomial import Polynomial
from numpy.polynomial.legendre import leggauss

from .errors import ArgumentError, DomainError
from .kernels import PARTS, _bracket, affine_power_integral
from .funcmodel import FunctionModel, Interval

GL_ORDER = 15
_GL_X, _GL_W = leggauss(GL_ORDER)
# two half-interval rules stacked: nodes on [-1, 0] then [0, 1]
_GL2_X = np.concatenate([(_GL_X - 1) / 2, (_GL_X + 1) / 2])
_GL2_W = np.concatenate([_GL_W, _GL_W]) / 2

DEFAULT_TOL = 1e-10
DEFAULT_BUDGET = 2000
DEFAULT_RESOLUTION = 2.0**-8

SIDES = ("two-sided", "right", "left")


@dataclass(frozen=True)
class LrParams:
    r: float = 1.0
    side: str = "two-sided"
    part: str = "abs"

    def __post_init__(self):
        if not (math.isfinite(self.r) and self.r >= 1):
            raise ArgumentError(f"r must be a finite number >= 1, got {self.r}")
        if self.side not in SIDES:
            raise ArgumentError(f"side must be one of {SIDES}")
        if self.part not in PARTS:
            raise ArgumentError(f"part must be one of {PARTS}")


@dataclass(frozen=True)
class QuadOptions:
    """Quadrature settings shared by the estimators and checkers."""

    tol: float = DEFAULT_TOL
    rel_tol: float = DEFAULT_TOL
    budget: int = DEFAULT_BUDGET


@dataclass(frozen=True)
class QuadratureResult:
    value: float
    error_estimate: float
    subdivisions: int

    def __post_init__(self):
        if self.value < 0 or self.error_estimate < 0:
            raise ValueError("quadrature result must be non-negative")


def _horner(cf, y):
    """Evaluate ascending coefficients ``cf`` at ``y`` (scalar or array)."""
    val = cf[-1]
    for c in cf[-2::-1]:
        val = val * y + c
    return val


def _taylor_shift(cf: list[float], m: float) -> list[float]:
    """Coefficients of ``t -> p(m + t)``, ascending."""
    b = list(cf)
    n = len(b) - 1
    for i in range(n):
        for j in range(n - 1, i - 1, -1):
            b[j] += m * b[j + 1]
    return b


def _real_roots_in(cf: list[float], lo: float, hi: float) -> list[float]:
    """Real roots of the polynomial ``cf`` strictly inside ``(lo, hi)``.

    A Taylor expansion about the window center either certifies that there is
    no root, or that the polynomial is monotone (at most one root, found by
    bisection); otherwise fall back to the companion-matrix eigenvalues.
    """
    while len(cf) > 1 and cf[-1] == 0.0:
        cf = cf[:-1]
    deg = len(cf) - 1
    if deg < 1:
        return []
    if deg == 1:
        z = -cf[0] / cf[1]
        return [z] if lo < z < hi else []
    m, w = 0.5 * (lo + hi), 0.5 * (hi - lo)
    b = _taylor_shift(cf, m)
    tail = sum(abs(bk) * w**k for k, bk in enumerate(b) if k >= 1)
    if abs(b[0]) > tail:
        return []
    slope_tail = sum(k * abs(bk) * w ** (k - 1) for k, bk in enumerate(b) if k >= 2)
    if abs(b[1]) > slope_tail:
        f_lo, f_hi = _horner(cf, lo), _horner(cf, hi)
        if f_lo == 0.0 or f_hi == 0.0 or (f_lo > 0) == (f_hi > 0):
            return []
        a, c = lo, hi
        for _ in range(200):
            mid = 0.5 * (a + c)
            if not a < mid < c:
                break
            f_mid = _horner(cf, mid)
            if f_mid == 0.0:
                return [mid]
            if (f_mid > 0) == (f_lo > 0):
                a, f_lo = mid, f_mid
            else:
                c = mid
        return [0.5 * (a + c)]
    out = []
    for z in np.roots(cf[::-1]):
        if abs(z.imag) <= 1e-12 * (1 + abs(z.real)) and lo < z.real < hi:
            out.append(float(z.real))
    return out


def _polynomial_integral(pcoef: list[float], x: float, base: float | None, alpha: float,
                         lo: float, hi: float, r: float, part: str) -> float | None:
    """Exact ``integral [p(y) - base - alpha (y - x)]_part^r dy`` for integer ``r``.

    The polynomial is re-expanded about ``x`` so that, when ``base`` is
    ``p(x)``, the constant term vanishes exactly and the known root ``t = 0``
    can be divided out.  Between consecutive real roots the integrand is
    ``+-g^r``, a polynomial, integrated exactly through its antiderivative.  Returns None for
    non-integer ``r`` or very high degree.
    """
    b = _taylor_shift(pcoef + [0.0] * max(0, 2 - len(pcoef)), x)
    b[1] -= alpha
    if base is None:
        b[0] = 0.0
    else:
        b[0] -= base
    deg = len(b) - 1
    while deg > 0 and b[deg] == 0.0:
        deg -= 1
    b = b[: deg + 1]
    if not float(r).is_integer() or deg * r > 64:
        return None
    t0, t1 = lo - x, hi - x
    if deg == 0:
        return float(_bracket(np.float64(b[0]), part)) ** r * (t1 - t0)
    if b[0] == 0.0:
        cuts = set(_real_roots_in(b[1:], t0, t1))
        if t0 < 0.0 < t1:
            cuts.add(0.0)
    else:
        cuts = set(_real_roots_in(b, t0, t1))
    power = b
    for _ in range(int(r) - 1):
        power = _convolve(power, b)
    anti = [0.0] + [ck / (k + 1) for k, ck in enumerate(power)]
    edges = [t0] + sorted(cuts) + [t1]
    total = 0.0
    for s0, s1 in zip(edges, edges[1:]):
        g_mid = _horner(b, 0.5 * (s0 + s1))
        if (part == "pos" and g_mid <= 0) or (part == "neg" and g_mid >= 0) or g_mid == 0:
            continue
        piece = _horner(anti, s1) - _horner(anti, s0)
        # [g]^r = g^r where g > 0 and (-g)^r = (-1)^r g^r where g < 0
        total += abs(piece)
    return total


def _convolve(p: list[float], q: list[float]) -> list[float]:
    out = [0.0] * (len(p) + len(q) - 1)
    for i, pi in enumerate(p):
        for j, qj in enumerate(q):
            out[i + j] += pi * qj
    return out


class _Integrand:
    def __init__(self, F: FunctionModel, x: float, c: float, alpha: float, r: float, part: str):
        self.F, self.x, self.c, self.alpha, self.r, self.part = F, x, c, alpha, r, part

    def values(self, ys: np.ndarray) -> np.ndarray:
        g = self.F.eval_many(ys) - self.c - self.alpha * (ys - self.x)
        return _bracket(g, self.part) ** self.r

    def affine(self, lo: float, hi: float):
        aff = self.F.affine_on(lo, hi)
        if aff is None:
            return None
        a0 = aff.f0 + aff.slope * (lo - aff.y0) - self.c - self.alpha * (lo - self.x)
        return a0, aff.slope - self.alpha

    def polynomial(self) -> Polynomial | None:
        p = self.F.as_polynomial()
        if p is None:
            return None
        coef = [float(v) for v in p.coef] + [0.0] * max(0, 2 - len(p.coef))
        coef[0] = (coef[0] - self.c) + self.alpha * self.x
        coef[1] -= self.alpha
        return Polynomial(coef)


def _gl(fn, a: float, b: float) -> float:
    half = 0.5 * (b - a)
    return half * float(np.dot(_GL_W, fn(0.5 * (a + b) + half * _GL_X)))


def _gl_halves(fn, a: float, b: float) -> tuple[float, float]:
    half = 0.5 * (b - a)
    vals = fn(0.5 * (a + b) + half * _GL2_X) * (half * _GL2_W)
    return float(vals[:GL_ORDER].sum()), float(vals[GL_ORDER:].sum())


def adaptive_lr_integral(F: FunctionModel, window, x: float, alpha: float, r: float = 1.0,
                         part: str = "abs", *, base: float | None = None, tol: float = DEFAULT_TOL,
                         rel_tol: float = DEFAULT_TOL, budget: int = DEFAULT_BUDGET,
                         resolution: float = DEFAULT_RESOLUTION, kernels: bool = True
                         ) -> QuadratureResult:
    """``integral over window of [F(y) - base - alpha (y - x)]_part ** r dy``.

    ``base`` defaults to ``F(x)``.  Refinement stops once the summed error
    estimate is below ``max(tol, rel_tol * value)`` or ``budget`` pieces have
    been refined; in the latter case ``error_estimate`` may exceed the target
    and the caller decides.  ``kernels=False`` disables the model's own closed
    forms (used as an independent route in checks).
    """
    lo, hi = (window.lo, window.hi) if isinstance(window, Interval) else window
    lo, hi = float(lo), float(hi)
    if not (r >= 1 and math.isfinite(r)):
        raise ArgumentError(f"r must be a finite number >= 1, got {r}")
    if part not in PARTS:
        raise ArgumentError(f"part must be one of {PARTS}")
    if not lo < hi:
        raise ArgumentError(f"empty window [{lo}, {hi}]")
    if tol <= 0:
        raise ArgumentError("tol must be positive")
    dom = F.domain
    if lo < dom.lo or hi > dom.hi:
        raise DomainError(f"window [{lo}, {hi}] escapes domain [{dom.lo}, {dom.hi}]")
    p = F.as_polynomial()
    if p is not None:
        exact = _polynomial_integral([float(v) for v in p.coef], float(x), base, alpha, lo, hi, r,
                                     part)
        if exact is not None:
            return QuadratureResult(max(exact, 0.0), 0.0, 0)
    c = F.eval(x) if base is None else float(base)
    if kernels and c == 0 and alpha == 0:
        closed = F.power_integral(lo, hi, r, part)
        if closed is not None:
            return QuadratureResult(closed, 0.0, 0)
    if kernels:
        routed = F.line_power_integral(lo, hi, float(x), c, float(alpha), r, part, tol, rel_tol,
                                       budget)
        if routed is not None:
            value, err, opened = routed
            return QuadratureResult(max(value, 0.0), err, opened)
    integrand = _Integrand(F, x, c, alpha, r, part)
    gpoly = integrand.polynomial()
    fn = integrand.values
    cuts = set(F.breakpoints(lo, hi, resolution))
    if lo < x < hi:
        cuts.add(float(x))  # the integrand vanishes at y = x
    if gpoly is not None and gpoly.degree() >= 1:
        cuts.update(_real_roots_in(list(gpoly.coef), lo, hi))
    points = [lo] + sorted(cuts) + [hi]

    pieces: dict[int, list] = {}
    heap: list = []
    counter = 0

    def add_piece(a: float, b: float, whole: float | None):
        nonlocal counter
        counter += 1
        aff = integrand.affine(a, b)
        if aff is not None:
            pieces[counter] = [a, b, affine_power_integral(aff[0], aff[1], r, 0.0, b - a, part), 0.0]
            return
        if whole is None:
            whole = _gl(fn, a, b)
        left, right = _gl_halves(fn, a, b)
        err = abs(whole - (left + right))
        pieces[counter] = [a, b, left + right, err, left, right]
        if err > 0:
            heapq.heappush(heap, (-err, counter))

    for a, b in zip(points, points[1:]):
        if a < b:
            add_piece(a, b, None)

    refined = 0
    total_err = math.fsum(p[3] for p in pieces.values())
    total_val = math.fsum(p[2] for p in pieces.values())
    while heap and refined < budget and total_err > max(tol, rel_tol * total_val):
        _, key = heapq.heappop(heap)
        a, b, old_val, err, left, right = pieces.pop(key)
        before = set(pieces)
        refined += 1
        inner = F.breakpoints(a, b, resolution)
        if inner:
            edges = [a] + inner + [b]
            for s0, s1 in zip(edges, edges[1:]):
                add_piece(s0, s1, None)
        else:
            m = 0.5 * (a + b)
            if not a < m < b:
                counter += 1
                pieces[counter] = [a, b, old_val, 0.0]  # cannot split further
            else:
                add_piece(a, m, left)
                add_piece(m, b, right)
        new = [pieces[k] for k in set(pieces) - before]
        total_err += math.fsum(p[3] for p in new) - err
        total_val += math.fsum(p[2] for p in new) - old_val
    total_err = math.fsum(p[3] for p in pieces.values())

    ordered = sorted(pieces.values(), key=lambda p: p[0])
    value = math.fsum(p[2] for p in ordered)
    return QuadratureResult(max(value, 0.0), total_err, refined)


def window_for(x: float, h: float, side: str) -> tuple[float, float]:
    if side == "right":
        return x, x + h
    if side == "left":
        return x - h, x
    return x - h, x + h


def lr_mean_deviation(F: FunctionModel, x: float, alpha: float, h: float, params: LrParams, *,
                      tol: float = DEFAULT_TOL, rel_tol: float = DEFAULT_TOL,
                      budget: int = DEFAULT_BUDGET, kernels: bool = True) -> QuadratureResult:
    """``((1/h) integral [F(x+t) - F(x) - alpha t]_part^r dt)^(1/r)`` over the side's window.

    Right: ``t in (0, h]``; left: ``t in [-h, 0)``; two-sided: ``[-h, h]``,
    still normalized by ``1/h``.  With ``y = x + t`` all three share the
    integrand ``F(y) - F(x) - alpha (y - x)``.  ``tol`` is measured in units of
    the mean deviation divided by ``h``.
    """
    if not h > 0:
        raise ArgumentError(f"h must be positive, got {h}")
    lo, hi = window_for(x, h, params.side)
    if lo < F.domain.lo or hi > F.domain.hi:
        raise DomainError(f"window [{lo}, {hi}] escapes domain [{F.domain.lo}, {F.domain.hi}]")
    r = params.r
    res = adaptive_lr_integral(F, (lo, hi), x, alpha, r, params.part,
                               tol=tol * h ** (r + 1), rel_tol=rel_tol, budget=budget,
                               kernels=kernels)
    value = (res.value / h) ** (1 / r)
    upper = ((res.value + res.error_estimate) / h) ** (1 / r)
    return QuadratureResult(value, upper - value, res.subdivisions)
