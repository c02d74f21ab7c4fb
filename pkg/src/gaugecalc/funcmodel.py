"""Real functions on a closed interval, and the Cantor-like counterexample.

Every model answers point evaluation plus three structural queries used by
:mod:`gaugecalc.quadrature`: registered breakpoints inside a window, an exact
affine form on a piece (when one exists), and, for the counterexample, a closed
form for windowed integrals of ``|F|**r``.

The counterexample geometry is kept in exact rationals.  Point classification
scales every level boundary by a common integer denominator so a descent is a
sequence of integer comparisons; the answer is exact for any float or Fraction.
"""

from __future__ import annotations

import heapq
import math
from dataclasses import dataclass
from fractions import Fraction
from functools import lru_cache
from typing import Callable, NamedTuple, Union

import numpy as np
from numpy.polynomial import Polynomial

from .errors import ArgumentError, DomainError, ResourceError
from .kernels import _bracket, affine_power_integral, power_antiderivative

Real = Union[int, float, Fraction]

DEFAULT_DEPTH_CAP = 60
MAX_ENUMERATED_INTERVALS = 2**20


def parse_real(value) -> Fraction:
    """Exact value of an int, float, Fraction or a ``"p/q"`` string."""
    if isinstance(value, Fraction):
        return value
    if isinstance(value, bool):
        raise ArgumentError(f"not a number: {value!r}")
    if isinstance(value, (int, float)):
        if isinstance(value, float) and not math.isfinite(value):
            raise ArgumentError(f"non-finite number: {value!r}")
        return Fraction(value)
    if isinstance(value, str):
        try:
            return Fraction(value.strip())
        except (ValueError, ZeroDivisionError) as exc:
            raise ArgumentError(f"cannot parse number {value!r}") from exc
    raise ArgumentError(f"not a number: {value!r}")


def format_real(value: Real) -> str | float:
    """Serialize: rationals as ``"p/q"`` strings, floats unchanged."""
    if isinstance(value, Fraction):
        return str(value) if value.denominator != 1 else str(value.numerator)
    return value


@dataclass(frozen=True)
class Interval:
    """Non-degenerate closed interval ``[lo, hi]``."""

    lo: Real
    hi: Real

    def __post_init__(self):
        if not self.lo < self.hi:
            raise ArgumentError(f"degenerate interval [{self.lo}, {self.hi}]")

    @property
    def length(self):
        return self.hi - self.lo

    @property
    def mid(self):
        return (self.lo + self.hi) / 2

    def contains(self, x) -> bool:
        return self.lo <= x <= self.hi

    def contains_interval(self, other: Interval) -> bool:
        return self.lo <= other.lo and other.hi <= self.hi

    def to_json(self):
        return [format_real(self.lo), format_real(self.hi)]


class Affine(NamedTuple):
    """``y -> f0 + slope * (y - y0)``; local form keeps steep pieces accurate."""

    y0: float
    f0: float
    slope: float

    def __call__(self, y):
        return self.f0 + self.slope * (y - self.y0)


class FunctionModel:
    """Base class: an evaluatable real function on ``domain``."""

    domain: Interval

    def eval(self, x) -> float:
        self._check(x)
        return self._eval(x)

    __call__ = eval

    def eval_many(self, xs) -> np.ndarray:
        xs = np.asarray(xs, dtype=float)
        if xs.size:
            self._check(float(xs.min()))
            self._check(float(xs.max()))
        return np.array([self._eval(float(x)) for x in xs.ravel()]).reshape(xs.shape)

    def breakpoints(self, lo: float, hi: float, resolution: float = 0.0) -> list[float]:
        """Registered points strictly inside ``(lo, hi)`` where smoothness may fail.

        ``resolution`` lets models with unbounded structure skip features smaller
        than ``resolution * (hi - lo)``.
        """
        return []

    def affine_on(self, lo: float, hi: float) -> Affine | None:
        """Exact affine form of the model on ``[lo, hi]``, or None."""
        return None

    def as_polynomial(self) -> Polynomial | None:
        return None

    def power_integral(self, lo: float, hi: float, r: float, part: str) -> float | None:
        """Closed form for ``integral_lo^hi [F(y)]_part^r dy`` if the model has one."""
        return None

    def line_power_integral(self, lo: float, hi: float, x: float, c: float, alpha: float, r: float,
                            part: str, tol: float, rel_tol: float,
                            budget: int) -> tuple[float, float, int] | None:
        """``integral_lo^hi [F(y) - c - alpha (y - x)]_part^r dy`` by a model-specific route.

        Returns ``(value, error_bound, refinements)`` or None when the model has
        no such route.
        """
        return None

    def to_spec(self) -> dict:
        raise NotImplementedError

    def _eval(self, x) -> float:
        raise NotImplementedError

    def _check(self, x):
        if not (self.domain.lo <= x <= self.domain.hi):
            raise DomainError(f"x={x} outside domain [{self.domain.lo}, {self.domain.hi}]")


class PiecewiseLinear(FunctionModel):
    def __init__(self, xs, ys):
        xs = np.asarray([float(parse_real(x)) for x in xs])
        ys = np.asarray([float(parse_real(y)) for y in ys])
        if xs.ndim != 1 or xs.shape != ys.shape or xs.size < 2:
            raise ArgumentError("piecewise-linear model needs >= 2 matching (x, y) pairs")
        if not np.all(np.diff(xs) > 0):
            raise ArgumentError("piecewise-linear breakpoints must be strictly increasing")
        if not np.all(np.isfinite(ys)):
            raise ArgumentError("piecewise-linear values must be finite")
        self.xs = xs
        self.ys = ys
        self.slopes = np.diff(ys) / np.diff(xs)
        self.domain = Interval(float(xs[0]), float(xs[-1]))

    @classmethod
    def from_points(cls, points):
        xs, ys = zip(*points)
        return cls(xs, ys)

    def _eval(self, x):
        return float(np.interp(x, self.xs, self.ys))

    def eval_many(self, xs):
        xs = np.asarray(xs, dtype=float)
        if xs.size:
            self._check(float(xs.min()))
            self._check(float(xs.max()))
        return np.interp(xs, self.xs, self.ys)

    def breakpoints(self, lo, hi, resolution=0.0):
        inner = self.xs[1:-1]
        return [float(b) for b in inner[(inner > lo) & (inner < hi)]]

    def affine_on(self, lo, hi):
        i = int(np.searchsorted(self.xs, lo, side="right")) - 1
        i = min(max(i, 0), len(self.xs) - 2)
        if self.xs[i] <= lo and hi <= self.xs[i + 1]:
            return Affine(float(self.xs[i]), float(self.ys[i]), float(self.slopes[i]))
        return None

    def to_spec(self):
        return {"kind": "pwl", "points": [[float(x), float(y)] for x, y in zip(self.xs, self.ys)]}


class PolynomialModel(FunctionModel):
    """Polynomial with ascending coefficients ``c0 + c1 x + ...``."""

    def __init__(self, coeffs, domain: Interval):
        coeffs = [float(parse_real(c)) for c in coeffs]
        if not coeffs or not all(math.isfinite(c) for c in coeffs):
            raise ArgumentError("polynomial needs finite coefficients")
        self.poly = Polynomial(coeffs)
        self.domain = domain

    def _eval(self, x):
        return float(self.poly(float(x)))

    def eval_many(self, xs):
        xs = np.asarray(xs, dtype=float)
        if xs.size:
            self._check(float(xs.min()))
            self._check(float(xs.max()))
        return self.poly(xs)

    def affine_on(self, lo, hi):
        if self.poly.degree() <= 1:
            c = self.poly.coef
            return Affine(lo, float(self.poly(lo)), float(c[1]) if len(c) > 1 else 0.0)
        return None

    def as_polynomial(self):
        return self.poly

    def to_spec(self):
        return {"kind": "poly", "coeffs": [float(c) for c in self.poly.coef],
                "domain": [float(self.domain.lo), float(self.domain.hi)]}


class ScaledPower(FunctionModel):
    """``c * |x - x0|**p``, or ``c * sign(x - x0) * |x - x0|**p`` when odd."""

    def __init__(self, c, x0, p, domain: Interval, parity: str = "even"):
        if parity not in ("even", "odd"):
            raise ArgumentError(f"parity must be 'even' or 'odd', got {parity!r}")
        self.c, self.x0, self.p = float(c), float(x0), float(p)
        if not self.p > 0:
            raise ArgumentError("power must be positive")
        self.parity = parity
        self.domain = domain

    def _value(self, t):
        v = self.c * np.abs(t) ** self.p
        return v * np.sign(t) if self.parity == "odd" else v

    def _eval(self, x):
        return float(self._value(float(x) - self.x0))

    def eval_many(self, xs):
        xs = np.asarray(xs, dtype=float)
        if xs.size:
            self._check(float(xs.min()))
            self._check(float(xs.max()))
        return self._value(xs - self.x0)

    def breakpoints(self, lo, hi, resolution=0.0):
        return [self.x0] if lo < self.x0 < hi else []

    def affine_on(self, lo, hi):
        if self.p != 1.0:
            return None
        if lo >= self.x0:
            return Affine(lo, self._eval(lo), self.c)
        if hi <= self.x0:
            return Affine(lo, self._eval(lo), self.c if self.parity == "odd" else -self.c)
        return None

    def to_spec(self):
        return {"kind": "power", "c": self.c, "x0": self.x0, "p": self.p, "parity": self.parity,
                "domain": [float(self.domain.lo), float(self.domain.hi)]}


_SWAP_PART = {"abs": "abs", "pos": "neg", "neg": "pos"}


class Negation(FunctionModel):
    def __init__(self, inner: FunctionModel):
        self.inner = inner
        self.domain = inner.domain

    def _eval(self, x):
        return -self.inner._eval(x)

    def eval_many(self, xs):
        return -self.inner.eval_many(xs)

    def breakpoints(self, lo, hi, resolution=0.0):
        return self.inner.breakpoints(lo, hi, resolution)

    def affine_on(self, lo, hi):
        a = self.inner.affine_on(lo, hi)
        return None if a is None else Affine(a.y0, -a.f0, -a.slope)

    def as_polynomial(self):
        p = self.inner.as_polynomial()
        return None if p is None else -p

    def power_integral(self, lo, hi, r, part):
        return self.inner.power_integral(lo, hi, r, _SWAP_PART[part])

    def line_power_integral(self, lo, hi, x, c, alpha, r, part, tol, rel_tol, budget):
        # [-F - line]_part = [F + line]_swapped
        return self.inner.line_power_integral(lo, hi, x, -c, -alpha, r, _SWAP_PART[part], tol,
                                              rel_tol, budget)

    def to_spec(self):
        return {"kind": "neg", "inner": self.inner.to_spec()}


class Reflection(FunctionModel):
    """``x -> inner(-x)`` on ``[-b, -a]`` when ``inner`` lives on ``[a, b]``."""

    def __init__(self, inner: FunctionModel):
        self.inner = inner
        self.domain = Interval(-inner.domain.hi, -inner.domain.lo)

    def _eval(self, x):
        return self.inner._eval(-x)

    def eval_many(self, xs):
        return self.inner.eval_many(-np.asarray(xs, dtype=float))

    def breakpoints(self, lo, hi, resolution=0.0):
        return sorted(-b for b in self.inner.breakpoints(-hi, -lo, resolution))

    def affine_on(self, lo, hi):
        a = self.inner.affine_on(-hi, -lo)
        return None if a is None else Affine(-a.y0, a.f0, -a.slope)

    def as_polynomial(self):
        p = self.inner.as_polynomial()
        if p is None:
            return None
        coef = p.coef.copy()
        coef[1::2] = -coef[1::2]
        return Polynomial(coef)

    def power_integral(self, lo, hi, r, part):
        return self.inner.power_integral(-hi, -lo, r, part)

    def line_power_integral(self, lo, hi, x, c, alpha, r, part, tol, rel_tol, budget):
        # c + alpha (y - x) at y = -z is c - alpha (z - (-x))
        return self.inner.line_power_integral(-hi, -lo, -x, c, -alpha, r, part, tol, rel_tol,
                                              budget)

    def to_spec(self):
        return {"kind": "reflect", "inner": self.inner.to_spec()}


# ---------------------------------------------------------------------------
# Cantor-like scheme


def _standard_level_length(n: int) -> Fraction:
    return Fraction(n + 4, 2 ** (n + 1) * (n + 2))


def _standard_gap_length(n: int) -> Fraction:
    return Fraction(1, 2**n * (n + 2) * (n + 3))


def _standard_plateau_length(n: int) -> Fraction:
    return _standard_gap_length(n) / 2


@dataclass(frozen=True)
class CantorScheme:
    """Symmetric perfect-set construction on [0, 1] given by three length sequences.

    At level ``n`` there are ``2**n`` closed intervals of length ``r(n)``; the
    concentric open gap of length ``u(n)`` is removed from each, and the plateau
    of length ``v(n)`` sits concentric inside that gap.
    """

    level_length: Callable[[int], Fraction] = _standard_level_length
    gap_length: Callable[[int], Fraction] = _standard_gap_length
    plateau_length: Callable[[int], Fraction] = _standard_plateau_length

    def r(self, n: int) -> Fraction:
        return self.level_length(n)

    def u(self, n: int) -> Fraction:
        return self.gap_length(n)

    def v(self, n: int) -> Fraction:
        return self.plateau_length(n)


STANDARD_SCHEME = CantorScheme()


class GapAddress(NamedTuple):
    """Gap removed from the ``k``-th (1-based) level-``n`` interval."""

    n: int
    k: int


@dataclass(frozen=True)
class InPerfectSet:
    """No gap of level ``< depth`` contains the point."""

    depth: int


@dataclass(frozen=True)
class OnPlateau:
    address: GapAddress


@dataclass(frozen=True)
class OnRamp:
    address: GapAddress
    side: str  # "left" or "right"


PointClassification = Union[InPerfectSet, OnPlateau, OnRamp]


class _Geometry:
    """Level boundaries of a scheme scaled by a common integer denominator."""

    def __init__(self, scheme: CantorScheme, cap: int):
        if cap < 0:
            raise ArgumentError("depth cap must be >= 0")
        if scheme.r(0) != 1:
            raise ArgumentError("scheme must start from [0, 1]")
        fr = {}
        for n in range(cap):
            r, u, v = scheme.r(n), scheme.u(n), scheme.v(n)
            if not (0 < v < u < r) or scheme.r(n + 1) != (r - u) / 2:
                raise ArgumentError(f"inconsistent scheme lengths at level {n}")
            fr[n] = (r / 2, u / 2, v / 2, scheme.r(n + 1) + u)
        denominators = [q.denominator for vals in fr.values() for q in vals]
        denominators.append(scheme.r(cap).denominator)
        D = math.lcm(*denominators) if denominators else 1
        self.cap = cap
        self.D = D
        self.half_r = [int(fr[n][0] * D) for n in range(cap)]
        self.half_u = [int(fr[n][1] * D) for n in range(cap)]
        self.half_v = [int(fr[n][2] * D) for n in range(cap)]
        self.right_offset = [int(fr[n][3] * D) for n in range(cap)]
        self.length = [int(scheme.r(n) * D) for n in range(cap + 1)]

    def scaled(self, x) -> tuple[int, bool]:
        """``(floor(x * D), x * D is an integer)``."""
        if isinstance(x, Fraction):
            p, q = x.numerator, x.denominator
        else:
            p, q = float(x).as_integer_ratio() if not isinstance(x, int) else (x, 1)
        X, rem = divmod(p * self.D, q)
        return X, rem == 0

    def locate(self, x, depth: int):
        """Descend to the first gap containing ``x``.

        Returns ``(n, idx, lo, region)`` with region in {"plateau", "left",
        "right"}, or ``(depth, idx, lo, None)`` when no gap of level < depth
        contains ``x``; ``lo`` is the scaled left end of the enclosing interval.
        """
        X, exact = self.scaled(x)
        lo = 0
        idx = 0
        half_r, half_u, half_v, off = self.half_r, self.half_u, self.half_v, self.right_offset
        for n in range(depth):
            c = lo + half_r[n]
            a = c - half_u[n]
            if X < a or (X == a and exact):
                idx <<= 1
                continue
            b = c + half_u[n]
            if X >= b:
                lo += off[n]
                idx = (idx << 1) | 1
                continue
            pl = c - half_v[n]
            pr = c + half_v[n]
            if X < pl:
                return n, idx, lo, "left"
            if X < pr or (X == pr and exact):
                return n, idx, lo, "plateau"
            return n, idx, lo, "right"
        return depth, idx, lo, None

    def gap_bounds(self, n: int, lo: int):
        """Scaled ``(a, pl, pr, b)``: gap ends and plateau ends of a level-n node."""
        c = lo + self.half_r[n]
        return c - self.half_u[n], c - self.half_v[n], c + self.half_v[n], c + self.half_u[n]


@lru_cache(maxsize=32)
def _geometry(scheme: CantorScheme, cap: int) -> _Geometry:
    return _Geometry(scheme, cap)


def _ratio(x) -> tuple[int, int]:
    if isinstance(x, Fraction):
        return x.numerator, x.denominator
    if isinstance(x, int):
        return x, 1
    return float(x).as_integer_ratio()


def _le(X: int, exact: bool, B: int) -> bool:
    return X < B or (X == B and exact)


def cantor_level_intervals(scheme: CantorScheme, n: int,
                           depth_cap: int = DEFAULT_DEPTH_CAP) -> list[Interval]:
    """The ``2**n`` closed level-``n`` intervals, in increasing order, exactly."""
    if n < 0:
        raise ArgumentError("level must be >= 0")
    if n > depth_cap or 2**n > MAX_ENUMERATED_INTERVALS:
        raise ResourceError(f"level {n} exceeds depth cap {depth_cap} or enumeration limit")
    los = [Fraction(0)]
    for m in range(n):
        step = scheme.r(m + 1) + scheme.u(m)
        los = [x for lo in los for x in (lo, lo + step)]
    rn = scheme.r(n)
    return [Interval(lo, lo + rn) for lo in los]


def _level_interval_lo(scheme: CantorScheme, n: int, k: int) -> Fraction:
    lo = Fraction(0)
    bits = k - 1
    for m in range(n):
        if (bits >> (n - 1 - m)) & 1:
            lo += scheme.r(m + 1) + scheme.u(m)
    return lo


def gap_intervals(scheme: CantorScheme, address: GapAddress,
                  depth_cap: int = DEFAULT_DEPTH_CAP) -> tuple[Interval, Interval]:
    """Exact closures of the gap ``u_{n,k}`` and its concentric plateau ``v_{n,k}``."""
    n, k = address
    if not 0 <= n < depth_cap:
        raise ArgumentError(f"gap level {n} outside [0, {depth_cap})")
    if not 1 <= k <= 2**n:
        raise ArgumentError(f"gap index {k} outside [1, {2**n}]")
    c = _level_interval_lo(scheme, n, k) + scheme.r(n) / 2
    hu, hv = scheme.u(n) / 2, scheme.v(n) / 2
    return Interval(c - hu, c + hu), Interval(c - hv, c + hv)


def level_measure(scheme: CantorScheme, n: int) -> Fraction:
    """Total length ``2**n * r(n)`` of the level-``n`` intervals."""
    if n < 0:
        raise ArgumentError("level must be >= 0")
    return 2**n * scheme.r(n)


def classify_point(scheme: CantorScheme, x: Real, max_depth: int) -> PointClassification:
    if not 0 <= x <= 1:
        raise DomainError(f"x={x} outside [0, 1]")
    n, idx, _, region = _geometry(scheme, max_depth).locate(x, max_depth)
    if region is None:
        return InPerfectSet(max_depth)
    address = GapAddress(n, idx + 1)
    return OnPlateau(address) if region == "plateau" else OnRamp(address, region)


def plateau_value(n: int) -> Fraction:
    """Value on the level-``n`` plateaus; level 0 borrows the level-1 value."""
    return Fraction(-1) if n == 0 else Fraction((-1) ** n, n)


class Counterexample(FunctionModel):
    """Continuous function vanishing on the perfect set, with alternating plateaus.

    Equal to ``plateau_value(n)`` on every level-``n`` plateau, affine on the two
    ramps joining each plateau to 0 at the ends of its gap, and 0 elsewhere.
    Gaps of level ``>= depth_cap`` are not represented; the resulting absolute
    error is at most ``1/depth_cap``.
    """

    def __init__(self, scheme: CantorScheme = STANDARD_SCHEME, depth_cap: int = DEFAULT_DEPTH_CAP,
                 breakpoint_depth: int | None = None):
        if depth_cap < 1:
            raise ArgumentError("depth cap must be >= 1")
        self.scheme = scheme
        self.depth_cap = depth_cap
        self.breakpoint_depth = depth_cap if breakpoint_depth is None else min(breakpoint_depth, depth_cap)
        self.domain = Interval(0, 1)
        self.geometry = _geometry(scheme, depth_cap)
        self._values = [plateau_value(n) for n in range(depth_cap)]
        self._subtree_cache: dict = {}
        sch = scheme
        self._sf = [float(v) for v in self._values]
        self._s = np.array(self._sf)
        self._v = np.array([float(sch.v(n)) for n in range(depth_cap)])
        self._ramp = np.array([float(sch.u(n) - sch.v(n)) for n in range(depth_cap)])
        self._R = [float(sch.r(n)) for n in range(depth_cap + 1)]
        # sup |F| over a level-n cell: plateau magnitudes of that level and deeper
        self._sup = [1.0 if n <= 1 else 1.0 / n for n in range(depth_cap)] + [0.0]

    def classify(self, x) -> PointClassification:
        return classify_point(self.scheme, x, self.depth_cap)

    def in_perfect_set(self, x) -> bool:
        return self.geometry.locate(x, self.depth_cap)[3] is None

    def _eval(self, x):
        g = self.geometry
        n, _, lo, region = g.locate(x, self.depth_cap)
        if region is None:
            return 0.0
        s = self._values[n]
        if region == "plateau":
            return float(s)
        a, pl, pr, b = g.gap_bounds(n, lo)
        p, q = (x.numerator, x.denominator) if isinstance(x, Fraction) else float(x).as_integer_ratio()
        if region == "left":
            num, den = p * g.D - a * q, q * (pl - a)
        else:
            num, den = b * q - p * g.D, q * (b - pr)
        return (num * s.numerator) / (den * s.denominator)

    def breakpoints(self, lo, hi, resolution=0.0):
        g = self.geometry
        if not lo < hi:
            return []
        min_gap = resolution * (hi - lo) * g.D
        Xlo, _ = g.scaled(lo)
        Xhi, _ = g.scaled(hi)
        depth = self.breakpoint_depth
        out = []
        stack = [(0, 0)]
        while stack:
            n, node = stack.pop()
            if n >= depth or node + g.length[n] < Xlo or node > Xhi:
                continue
            if 2 * g.half_u[n] < min_gap:
                continue
            for B in g.gap_bounds(n, node):
                f = B / g.D
                if lo < f < hi:
                    out.append(f)
            stack.append((n + 1, node))
            stack.append((n + 1, node + g.right_offset[n]))
        return sorted(set(out))

    def affine_on(self, lo, hi):
        g = self.geometry
        n, _, node, region = g.locate(0.5 * (lo + hi), self.depth_cap)
        if region is None:
            left, right = node, node + g.length[n]
            slope = 0.0
        else:
            a, pl, pr, b = g.gap_bounds(n, node)
            left, right = {"left": (a, pl), "plateau": (pl, pr), "right": (pr, b)}[region]
            s = self._values[n]
            if region == "plateau":
                slope = 0.0
            else:
                sign = 1 if region == "left" else -1
                slope = sign * float(s * g.D / (right - left))
        Xlo, _ = g.scaled(lo)
        Xhi, ehi = g.scaled(hi)
        if Xlo >= left and _le(Xhi, ehi, right):
            return Affine(lo, self._eval(lo), slope)
        return None

    def _subtree_integrals(self, r: float, part: str) -> list[float]:
        key = (r, part)
        cached = self._subtree_cache.get(key)
        if cached is not None:
            return cached
        sch = self.scheme
        S = [0.0] * (self.depth_cap + 1)
        for n in range(self.depth_cap - 1, -1, -1):
            s = self._values[n]
            gap = 0.0
            if part == "abs" or (part == "pos") == (s > 0):
                u, v = float(sch.u(n)), float(sch.v(n))
                gap = float(abs(s)) ** r * (v + (u - v) / (r + 1))
            S[n] = gap + 2 * S[n + 1]
        self._subtree_cache[key] = S
        return S

    def power_integral(self, lo, hi, r, part):
        """Exact ``integral_lo^hi [F]_part^r`` for the depth-capped function."""
        if not lo < hi:
            return 0.0
        g = self.geometry
        S = self._subtree_integrals(r, part)
        # work in integers: positions are multiplied by D * Q, Q a common denominator
        D = g.D
        (plo, qlo), (phi, qhi) = _ratio(lo), _ratio(hi)
        Q = math.lcm(qlo, qhi)
        Xlo, Xhi = plo * (Q // qlo) * D, phi * (Q // qhi) * D
        fDQ = float(D * Q)
        length, half_r, half_u, half_v = g.length, g.half_r, g.half_u, g.half_v
        offset, values, cap = g.right_offset, self._sf, self.depth_cap
        total = []
        stack = [(0, 0)]
        while stack:
            n, node = stack.pop()
            start, end = node * Q, (node + length[n]) * Q
            if end <= Xlo or start >= Xhi:
                continue
            if Xlo <= start and end <= Xhi:
                total.append(S[n])
                continue
            if n == cap:
                continue
            s = values[n]
            if part == "abs" or (part == "pos") == (s > 0):
                c = node + half_r[n]
                a, pl = (c - half_u[n]) * Q, (c - half_v[n]) * Q
                pr, b = (c + half_v[n]) * Q, (c + half_u[n]) * Q
                mag = abs(s) ** r
                # ramps rise from 0 at the gap ends to |s| at the plateau ends
                for p0, p1, rising in ((a, pl, True), (pl, pr, None), (pr, b, False)):
                    y1, y2 = max(Xlo, p0), min(Xhi, p1)
                    if y1 >= y2:
                        continue
                    if rising is None:
                        total.append(mag * (float(y2 - y1) / fDQ))
                        continue
                    span = float(p1 - p0)
                    t1, t2 = float(y1 - p0) / span, float(y2 - p0) / span
                    if not rising:
                        t1, t2 = 1.0 - t2, 1.0 - t1
                    total.append(mag * (span / fDQ) * (t2 ** (r + 1) - t1 ** (r + 1)) / (r + 1))
            stack.append((n + 1, node))
            stack.append((n + 1, node + offset[n]))
        return math.fsum(total)

    def cell_constant_integral(self, n: int, level_value: float, r: float, part: str) -> float:
        """``integral over a level-n cell of [F - L]_part^r`` with ``L`` constant.

        Exact for the depth-capped model: on a cell, F takes each plateau
        value on a set of known length, is uniformly distributed between 0 and
        the plateau value along the ramps, and vanishes on the rest.
        """
        L = level_value
        cap = self.depth_cap
        const = float(_bracket(np.float64(-L), part)) ** r
        tail = 2.0 ** (cap - n) * self._R[cap] * const
        if n >= cap:
            return tail
        s, v, ramp = self._s[n:], self._v[n:], self._ramp[n:]
        w = np.ldexp(1.0, np.arange(cap - n))
        plateau = v * _bracket(s - L, part) ** r
        ramps = ramp * (power_antiderivative(s - L, r, part) - power_antiderivative(-L, r, part)) / s
        return float(np.dot(w, plateau + ramps)) + tail

    def cell_band_measure(self, n: int, level_value: float, width: float) -> float:
        """Length of ``{t in a level-n cell : |F(t) - L| < width}``."""
        L, cap = level_value, self.depth_cap
        tail = 2.0 ** (cap - n) * self._R[cap] if abs(L) < width else 0.0
        if n >= cap:
            return tail
        s, v, ramp = self._s[n:], self._v[n:], self._ramp[n:]
        w = np.ldexp(1.0, np.arange(cap - n))
        plateau = v * (np.abs(s - L) < width)
        lo = np.maximum(np.minimum(s, 0.0), L - width)
        hi = np.minimum(np.maximum(s, 0.0), L + width)
        ramps = ramp * np.maximum(hi - lo, 0.0) / np.abs(s)
        return float(np.dot(w, plateau + ramps)) + tail

    def line_power_integral(self, lo, hi, x, c, alpha, r, part, tol, rel_tol, budget):
        """Integral of ``[F(y) - c - alpha (y - x)]_part^r`` over ``[lo, hi]``.

        Gap pieces met on the way down are affine and integrated exactly.  A
        whole cell left unopened is integrated with the line frozen at its
        center value; F is even about every cell center, so the first-order
        error term vanishes and the remainder is bounded explicitly.  Cells
        with the largest bounds are opened first until the summed bound is
        below ``max(tol, rel_tol * value)`` or ``budget`` cells have been opened.
        """
        g = self.geometry
        D = g.D
        cap = self.depth_cap
        line0 = c - alpha * x  # line(y) = line0 + alpha * y
        exact: list[float] = []
        heap: list = []
        counter = 0
        pending = 0.0  # summed error bounds of queued cells
        running = 0.0  # rough running value, only used for the relative stopping test
        frozen_err = 0.0

        def settle(value):
            nonlocal running
            exact.append(value)
            running += value

        def line_piece(y1, y2, f1, slope):
            # F affine on [y1, y2] with F(y1) = f1
            if y2 > y1:
                settle(affine_power_integral(f1 - (line0 + alpha * y1), slope - alpha,
                                             r, 0.0, y2 - y1, part))

        def visit(n, node):
            nonlocal counter, pending, running, frozen_err
            p0 = node / D
            R = self._R[n]
            p1 = p0 + R
            if p1 <= lo or p0 >= hi:
                return
            inside = lo <= p0 and p1 <= hi
            if n < cap and 0.5 * self._ramp[n] < 64 * math.ulp(max(abs(p0), abs(p1), 1.0)):
                # below float resolution: keep the frozen value, clipped, as a final answer
                value, err = self._frozen_cell(n, p0 + 0.5 * R, line0, alpha, r, part)
                share = 1.0 if inside else (min(hi, p1) - max(lo, p0)) / R
                settle(share * value)
                M = self._sup[n] + abs(line0 + alpha * p0) + abs(alpha) * R
                frozen_err += err if inside else R * M**r
                return
            if inside:
                value, err = self._frozen_cell(n, p0 + 0.5 * R, line0, alpha, r, part)
                if err > 0:
                    counter += 1
                    pending += err
                    running += value
                    heapq.heappush(heap, (-err, counter, n, node, value))
                else:
                    settle(value)
                return
            expand(n, node)

        def expand(n, node):
            if n >= cap:
                y1, y2 = max(lo, node / D), min(hi, node / D + self._R[n])
                line_piece(y1, y2, 0.0, 0.0)
                return
            a, pl, pr, b = (B / D for B in g.gap_bounds(n, node))
            s = float(self._values[n])
            up, down = s / (pl - a), -s / (b - pr)
            for q0, q1, f0, slope in ((a, pl, 0.0, up), (pl, pr, s, 0.0), (pr, b, s, down)):
                y1, y2 = max(lo, q0), min(hi, q1)
                line_piece(y1, y2, f0 + slope * (y1 - q0), slope)
            visit(n + 1, node)
            visit(n + 1, node + g.right_offset[n])

        visit(0, 0)
        opened = 0
        while heap and opened < budget and pending > max(tol, rel_tol * running):
            e, _, n, node, value = heapq.heappop(heap)
            pending += e
            running -= value
            opened += 1
            expand(n, node)
        approx = [item[4] for item in heap]
        err = math.fsum(-item[0] for item in heap) + frozen_err
        return math.fsum(exact + approx), err, opened

    def _frozen_cell(self, n, center, line0, alpha, r, part):
        """``(value, error bound)`` for a whole level-n cell with the line frozen at its center."""
        L = line0 + alpha * center
        value = self.cell_constant_integral(n, L, r, part)
        if alpha == 0:
            return value, 0.0
        R = self._R[n]
        half = 0.5 * R
        swing = abs(alpha) * half
        fixed = abs(L) - swing > self._sup[n]
        if r == 1:
            # pairing t with -t: |a - e| + |a + e| - 2|a| = 2 max(0, |e| - |a|)
            if fixed:
                return value, 0.0
            return value, 2.0 * swing * self.cell_band_measure(n, L, swing)
        if r == 2 and (part == "abs" or fixed):
            # the cross term integrates to zero by symmetry; add the exact quadratic term
            matches = part == "abs" or (L > 0) == (part == "neg")
            return value + (alpha * alpha * R**3 / 12.0 if matches else 0.0), 0.0
        if r >= 2:
            M = self._sup[n] + abs(L) + swing
            return value, 0.5 * r * (r - 1) * M ** (r - 2) * alpha * alpha * R**3 / 12.0
        return value, 2.0 * abs(alpha) ** r * 2.0 * half ** (r + 1) / (r + 1)

    def gap_midpoints_near(self, x: float, side: str, max_dist: float) -> list[float]:
        """Centers of gaps met while descending to ``x`` that lie within ``max_dist`` on ``side``."""
        g = self.geometry
        X, exact = g.scaled(x)
        node = 0
        out = []
        for n in range(self.depth_cap):
            c = node + g.half_r[n]
            mid = c / g.D
            d = mid - x if side == "right" else x - mid
            if 0 < d < max_dist:
                out.append(mid)
            a, b = c - g.half_u[n], c + g.half_u[n]
            if _le(X, exact, a):
                continue
            if X >= b:
                node += g.right_offset[n]
                continue
            break
        return out

    def to_spec(self):
        return {"kind": "counterexample", "depth_cap": self.depth_cap}


def perfect_set_samples(model: Counterexample, level: int) -> list[float]:
    """Floats in the perfect set next to each endpoint of the level-``level`` intervals.

    Endpoints are rarely floats; each is rounded toward the interior of its
    interval and nudged until the exact classifier places it in the set.
    """
    out = []
    for iv in cantor_level_intervals(model.scheme, level, model.depth_cap):
        for end, toward in ((iv.lo, math.inf), (iv.hi, -math.inf)):
            x = float(end)
            if (Fraction(x) < end and toward > 0) or (Fraction(x) > end and toward < 0):
                x = math.nextafter(x, toward)
            for _ in range(256):
                if model.in_perfect_set(x):
                    out.append(x)
                    break
                x = math.nextafter(x, toward)
    return sorted(set(out))


# ---------------------------------------------------------------------------
# JSON function specs


def _domain_from(spec, default=None) -> Interval:
    dom = spec.get("domain", default)
    if dom is None:
        raise ArgumentError(f"{spec.get('kind')} spec needs a domain")
    if len(dom) != 2:
        raise ArgumentError("domain must be [lo, hi]")
    return Interval(float(parse_real(dom[0])), float(parse_real(dom[1])))


_SPEC_KEYS = {
    "pwl": {"kind", "points", "domain"},
    "poly": {"kind", "coeffs", "domain"},
    "power": {"kind", "c", "x0", "p", "parity", "domain"},
    "counterexample": {"kind", "depth_cap", "domain"},
    "neg": {"kind", "inner", "domain"},
    "reflect": {"kind", "inner", "domain"},
}


def model_from_spec(spec: dict) -> FunctionModel:
    """Build a model from its JSON description (see README for the schema)."""
    if not isinstance(spec, dict) or "kind" not in spec:
        raise ArgumentError("function spec must be an object with a 'kind'")
    kind = spec["kind"]
    if kind not in _SPEC_KEYS:
        raise ArgumentError(f"unknown function kind {kind!r}")
    unknown = set(spec) - _SPEC_KEYS[kind]
    if unknown:
        raise ArgumentError(f"unknown keys for {kind}: {sorted(unknown)}")
    if kind == "pwl":
        model = PiecewiseLinear.from_points(spec["points"])
    elif kind == "poly":
        model = PolynomialModel(spec["coeffs"], _domain_from(spec))
    elif kind == "power":
        model = ScaledPower(parse_real(spec.get("c", 1)), parse_real(spec.get("x0", 0)),
                            parse_real(spec["p"]), _domain_from(spec), spec.get("parity", "even"))
    elif kind == "counterexample":
        model = Counterexample(depth_cap=int(spec.get("depth_cap", DEFAULT_DEPTH_CAP)))
    elif kind == "neg":
        model = Negation(model_from_spec(spec["inner"]))
    else:
        model = Reflection(model_from_spec(spec["inner"]))
    if "domain" in spec and kind in ("pwl", "counterexample", "neg", "reflect"):
        given = _domain_from(spec)
        if (given.lo, given.hi) != (float(model.domain.lo), float(model.domain.hi)):
            raise ArgumentError(f"domain {given.to_json()} does not match the {kind} model")
    return model
