"""Gauges, tagged partitions, delta-fineness and Riemann-type L^r sums.

A gauge is a strictly positive function ``delta``; a tagged interval
``([c, d], x)`` is delta-fine when ``[c, d]`` lies inside the *open* interval
``(x - delta(x), x + delta(x))``.  Fineness is decided in exact rational
arithmetic whenever the float comparison is too close to call, so boundary
cases are never misjudged.
"""

from __future__ import annotations

import bisect
import math
from dataclasses import dataclass, field
from fractions import Fraction
from typing import Callable, Iterable, Sequence

import numpy as np

from .errors import ArgumentError, ResourceError
from .funcmodel import Counterexample, FunctionModel, Interval, format_real, parse_real
from .quadrature import QuadOptions, adaptive_lr_integral

DEFAULT_MAX_DEPTH = 40
DEFAULT_SEARCH_BUDGET = 10_000
LADDER_STEPS = 8


# ---------------------------------------------------------------------------
# gauges


@dataclass(frozen=True)
class Gauge:
    """A strictly positive function, optionally restricted to a set.

    Build one with :meth:`constant`, :meth:`piecewise` or :meth:`pointwise`.
    A piecewise-constant gauge takes ``values[i]`` on
    ``[breakpoints[i-1], breakpoints[i])`` (the last piece is closed).
    """

    kind: str
    value: float | None = None
    breakpoints: tuple = ()
    values: tuple = ()
    func: Callable[[float], float] | None = field(default=None, compare=False)
    domain_set: Callable[[float], bool] | None = field(default=None, compare=False)

    @classmethod
    def constant(cls, value, domain_set=None) -> Gauge:
        v = float(parse_real(value))
        if not v > 0:
            raise ArgumentError(f"gauge values must be positive, got {value}")
        return cls("constant", value=v, domain_set=domain_set)

    @classmethod
    def piecewise(cls, breakpoints, values, domain_set=None) -> Gauge:
        bps = tuple(float(parse_real(b)) for b in breakpoints)
        vals = tuple(float(parse_real(v)) for v in values)
        if len(vals) != len(bps) + 1:
            raise ArgumentError("a piecewise gauge needs one more value than breakpoints")
        if any(b >= c for b, c in zip(bps, bps[1:])):
            raise ArgumentError("gauge breakpoints must increase strictly")
        if not all(v > 0 for v in vals):
            raise ArgumentError("gauge values must be positive")
        return cls("piecewise", breakpoints=bps, values=vals, domain_set=domain_set)

    @classmethod
    def pointwise(cls, func: Callable[[float], float], domain_set=None) -> Gauge:
        return cls("pointwise", func=func, domain_set=domain_set)

    def __call__(self, x) -> float:
        if self.domain_set is not None and not self.domain_set(x):
            raise ArgumentError(f"gauge undefined at {x}")
        if self.kind == "constant":
            return self.value
        if self.kind == "piecewise":
            return self.values[bisect.bisect_right(self.breakpoints, float(x))]
        try:
            v = float(self.func(x))
        except (ArithmeticError, ValueError) as exc:
            raise ArgumentError(f"gauge undefined at {x}: {exc}") from exc
        if not v > 0:
            raise ArgumentError(f"gauge must be positive, got {v} at {x}")
        return v

    def describe(self) -> dict:
        if self.kind == "constant":
            return {"kind": "constant", "value": self.value}
        if self.kind == "piecewise":
            return {"kind": "piecewise", "breakpoints": list(self.breakpoints),
                    "values": list(self.values)}
        return {"kind": "pointwise", "func": getattr(self.func, "__name__", repr(self.func))}

    @classmethod
    def from_spec(cls, spec) -> Gauge:
        """Gauge from a number, a ``"p/q"`` string or a constant/piecewise object."""
        if isinstance(spec, (int, float, str)) and not isinstance(spec, bool):
            return cls.constant(spec)
        if not isinstance(spec, dict):
            raise ArgumentError(f"cannot read gauge spec {spec!r}")
        kind = spec.get("kind")
        keys = {"constant": {"kind", "value"}, "piecewise": {"kind", "breakpoints", "values"}}
        if kind not in keys:
            raise ArgumentError(f"gauge kind must be 'constant' or 'piecewise', got {kind!r}")
        unknown = set(spec) - keys[kind]
        if unknown:
            raise ArgumentError(f"unknown gauge keys: {sorted(unknown)}")
        if kind == "constant":
            return cls.constant(spec["value"])
        return cls.piecewise(spec["breakpoints"], spec["values"])


# ---------------------------------------------------------------------------
# tagged intervals and partitions


@dataclass(frozen=True, order=True)
class TaggedInterval:
    """``([lo, hi], tag)`` with ``lo < hi`` and ``tag`` in ``[lo, hi]``."""

    lo: float
    hi: float
    tag: float

    def __post_init__(self):
        if not self.lo < self.hi:
            raise ArgumentError(f"degenerate interval [{self.lo}, {self.hi}]")
        if not self.lo <= self.tag <= self.hi:
            raise ArgumentError(f"tag {self.tag} outside [{self.lo}, {self.hi}]")

    @property
    def interval(self) -> Interval:
        return Interval(self.lo, self.hi)

    @property
    def length(self):
        return self.hi - self.lo

    def to_json(self) -> dict:
        return {"lo": format_real(self.lo), "hi": format_real(self.hi),
                "tag": format_real(self.tag)}

    @classmethod
    def from_json(cls, obj) -> TaggedInterval:
        if not isinstance(obj, dict) or set(obj) != {"lo", "hi", "tag"}:
            raise ArgumentError(f"partition items need exactly lo, hi, tag: {obj!r}")
        lo, hi, tag = (_number(obj[k]) for k in ("lo", "hi", "tag"))
        return cls(lo, hi, tag)


def _number(value):
    """Floats stay floats; ``"p/q"`` strings become exact fractions."""
    if isinstance(value, float):
        return value
    q = parse_real(value)
    return int(q) if q.denominator == 1 else q


def nonoverlapping(items: Iterable[TaggedInterval]) -> bool:
    """True when no two intervals share an interior point."""
    ordered = sorted(items)
    return all(a.hi <= b.lo for a, b in zip(ordered, ordered[1:]))


@dataclass(frozen=True)
class TaggedPartition:
    """Finite collection of pairwise nonoverlapping tagged intervals, kept sorted."""

    items: tuple = ()

    def __post_init__(self):
        ordered = tuple(sorted(self.items))
        object.__setattr__(self, "items", ordered)
        if not nonoverlapping(ordered):
            raise ArgumentError("partition intervals overlap")

    def __len__(self):
        return len(self.items)

    def __iter__(self):
        return iter(self.items)

    @property
    def total_length(self) -> float:
        return math.fsum(float(it.hi) - float(it.lo) for it in self.items)

    @property
    def mesh(self) -> float:
        return max((float(it.hi) - float(it.lo) for it in self.items), default=0.0)

    def tiles(self, domain: Interval) -> bool:
        """True when the intervals abut end to end and cover ``domain`` exactly."""
        if not self.items:
            return False
        its = self.items
        return (its[0].lo == domain.lo and its[-1].hi == domain.hi
                and all(a.hi == b.lo for a, b in zip(its, its[1:])))

    def union(self, other: TaggedPartition) -> TaggedPartition:
        return TaggedPartition(self.items + other.items)

    def to_json(self) -> list:
        return [it.to_json() for it in self.items]

    @classmethod
    def from_json(cls, data) -> TaggedPartition:
        return cls(tuple(parse_items(data)))


def parse_items(data) -> list[TaggedInterval]:
    """Tagged intervals from JSON, without the nonoverlap check."""
    if not isinstance(data, list):
        raise ArgumentError("a partition is a JSON list of {lo, hi, tag} objects")
    return [TaggedInterval.from_json(obj) for obj in data]


# ---------------------------------------------------------------------------
# fineness


def _strictly_inside(lo, hi, x, delta: float) -> bool:
    """``x - delta < lo`` and ``hi < x + delta``, exactly."""
    margin = 1e-12 * (abs(float(x)) + delta)
    left = float(lo) - (float(x) - delta)
    right = (float(x) + delta) - float(hi)
    if left > margin and right > margin:
        return True
    if left < -margin or right < -margin:
        return False
    X, D = Fraction(x), Fraction(delta)
    return X - D < Fraction(lo) and Fraction(hi) < X + D


def is_fine_item(item: TaggedInterval, g: Gauge) -> bool:
    return _strictly_inside(item.lo, item.hi, item.tag, g(item.tag))


def is_fine(p: Iterable[TaggedInterval], g: Gauge) -> bool:
    """True iff every item lies in the open ``g``-neighbourhood of its tag."""
    return all(is_fine_item(it, g) for it in p)


def cousin_partition(domain: Interval, g: Gauge,
                     max_depth: int = DEFAULT_MAX_DEPTH) -> TaggedPartition:
    """A ``g``-fine partition tiling ``domain``, by bisection with midpoint tags.

    Raises :class:`ResourceError` carrying the offending subinterval when an
    interval still fails at depth ``max_depth``.
    """
    if max_depth < 1:
        raise ArgumentError("max_depth must be >= 1")
    lo, hi = domain.lo, domain.hi
    exact = isinstance(lo, Fraction) or isinstance(hi, Fraction)
    out = []
    stack = [(lo, hi, 0)]
    while stack:
        a, b, depth = stack.pop()
        m = (a + b) / 2 if exact else 0.5 * (a + b)
        if _strictly_inside(a, b, m, g(m)):
            out.append(TaggedInterval(a, b, m))
            continue
        if depth >= max_depth or not a < m < b:
            raise ResourceError(f"gauge too small on [{a}, {b}] for depth {max_depth}",
                                witness=(a, b))
        stack.append((m, b, depth + 1))
        stack.append((a, m, depth + 1))
    return TaggedPartition(tuple(out))


def random_fine_partition(domain: Interval, g: Gauge, rng: np.random.Generator,
                          max_depth: int = DEFAULT_MAX_DEPTH) -> TaggedPartition:
    """A random ``g``-fine tiling: random cut points and uniformly random tags.

    Each interval draws a tag; a fine one is kept with probability 1/2, else it
    is cut at a random point of its middle half.  Below ``max_depth - 1`` cuts
    the remaining pieces fall back to :func:`cousin_partition`.
    """
    lo, hi = float(domain.lo), float(domain.hi)
    out = []
    stack = [(lo, hi, 0)]
    while stack:
        a, b, depth = stack.pop()
        t = float(rng.uniform(a, b))
        if _strictly_inside(a, b, t, g(t)) and (rng.random() < 0.5 or depth >= max_depth - 1):
            out.append(TaggedInterval(a, b, t))
            continue
        if depth >= max_depth - 1:
            out.extend(cousin_partition(Interval(a, b), g, max_depth).items)
            continue
        c = float(rng.uniform(a + 0.25 * (b - a), b - 0.25 * (b - a)))
        if not a < c < b:
            out.extend(cousin_partition(Interval(a, b), g, max_depth).items)
            continue
        stack.append((c, b, depth + 1))
        stack.append((a, c, depth + 1))
    return TaggedPartition(tuple(out))


# ---------------------------------------------------------------------------
# Riemann-type sums


def lr_term(F: FunctionModel, item: TaggedInterval, slope: float, r: float,
            options: QuadOptions | None = None, *, kernels: bool = True) -> tuple[float, float]:
    """``((1/(d-c)) integral_c^d |F(y) - F(x) - slope (y - x)|^r dy)^(1/r)`` and its error bound."""
    opt = options or QuadOptions()
    lo, hi, x = float(item.lo), float(item.hi), float(item.tag)
    length = hi - lo
    res = adaptive_lr_integral(F, (lo, hi), x, slope, r, "abs", tol=opt.tol * length ** (r + 1),
                               rel_tol=opt.rel_tol, budget=opt.budget, kernels=kernels)
    value = (res.value / length) ** (1 / r)
    upper = ((res.value + res.error_estimate) / length) ** (1 / r)
    return value, upper - value


def riemann_lr_terms(p: Iterable[TaggedInterval], F: FunctionModel, f: FunctionModel | None,
                     r: float = 1.0, options: QuadOptions | None = None, *,
                     kernels: bool = True) -> list[tuple[float, float]]:
    """Per-item ``(term, error_bound)`` in canonical (sorted) order; ``f=None`` means slope 0."""
    return [lr_term(F, it, 0.0 if f is None else f.eval(float(it.tag)), r, options,
                    kernels=kernels) for it in sorted(p)]


def riemann_lr_sum(p: Iterable[TaggedInterval], F: FunctionModel, f: FunctionModel,
                   r: float = 1.0, options: QuadOptions | None = None) -> float:
    """``sum_i ((1/(d_i-c_i)) integral |F(y) - F(x_i) - f(x_i)(y - x_i)|^r dy)^(1/r)``."""
    return math.fsum(t for t, _ in riemann_lr_terms(p, F, f, r, options))


def ac_sum(p: Iterable[TaggedInterval], F: FunctionModel, r: float = 1.0,
           options: QuadOptions | None = None) -> float:
    """``sum_i ((1/(d_i-c_i)) integral |F(y) - F(x_i)|^r dy)^(1/r)``."""
    return math.fsum(t for t, _ in riemann_lr_terms(p, F, None, r, options))


# ---------------------------------------------------------------------------
# adversarial search


def _candidate_shapes(F: FunctionModel, x: float, delta: float, eta: float) -> list[tuple]:
    """Intervals around tag ``x`` that are fine for ``delta`` and shorter than ``eta``."""
    dom_lo, dom_hi = float(F.domain.lo), float(F.domain.hi)
    top = min(delta, eta) * (1 - 1e-9)
    shapes = set()

    def add(a, b):
        a, b = max(a, dom_lo), min(b, dom_hi)
        if a < b and b - a < eta:
            shapes.add((a, b))

    # an absolute dyadic ladder, so searches with nearby (delta, eta) share candidates
    top_exp = math.floor(math.log2(top))
    for k in range(LADDER_STEPS):
        s = math.ldexp(1.0, top_exp - k)
        add(x, x + s)
        add(x - s, x)
        add(x - s / 2, x + s / 2)
    if isinstance(F, Counterexample):
        # the interval from x to a gap centre carries the largest mean deviation
        for side in ("right", "left"):
            for m in F.gap_midpoints_near(x, side, top):
                add(*((x, m) if side == "right" else (m, x)))
    return [(a, b) for a, b in sorted(shapes) if _strictly_inside(a, b, x, delta)]


def adversarial_small_partition(E: Sequence[float], g: Gauge, eta: float, F: FunctionModel,
                                r: float = 1.0, budget: int = DEFAULT_SEARCH_BUDGET, *,
                                seed: int = 0, options: QuadOptions | None = None,
                                cache: dict | None = None) -> TaggedPartition:
    """Greedy search for a ``g``-fine partial partition tagged in ``E`` with large ``ac_sum``.

    Candidates at each tag: one-sided and centred intervals on a geometric
    ladder of lengths below ``min(g(x), eta)``, plus intervals reaching a gap
    centre when ``F`` is the counterexample.  At most ``budget`` candidates are
    scored (a seeded random subset when there are more).  Nonoverlapping
    candidates are then taken greedily, once by value per length and once by
    value, subject to total length ``< eta``; the better selection is returned.
    ``cache`` (a dict) may be shared between calls with the same ``F`` and ``r``
    to reuse scored candidates.
    """
    if not eta > 0:
        raise ArgumentError("eta must be positive")
    tags = sorted({float(x) for x in E})
    if not tags:
        raise ArgumentError("E must be nonempty")
    cands = [(a, b, x) for x in tags for a, b in _candidate_shapes(F, x, g(x), eta)]
    if len(cands) > budget:
        rng = np.random.default_rng(seed)
        keep = np.sort(rng.choice(len(cands), size=budget, replace=False))
        cands = [cands[i] for i in keep]
    cache = {} if cache is None else cache
    scored = []
    for a, b, x in cands:
        item = TaggedInterval(a, b, x)
        value = cache.get(item)
        if value is None:
            value = cache[item] = lr_term(F, item, 0.0, r, options)[0]
        if value > 0:
            scored.append((value, item))
    best: list[TaggedInterval] = []
    best_sum = -1.0
    for key in (lambda s: s[0] / s[1].length, lambda s: s[0]):
        chosen, total = _greedy(sorted(scored, key=lambda s: (-key(s), s[1])), eta)
        if total > best_sum:
            best, best_sum = chosen, total
    return TaggedPartition(tuple(best))


def _greedy(ranked, eta: float) -> tuple[list[TaggedInterval], float]:
    """Take nonoverlapping items in rank order while the exact total length stays below ``eta``."""
    los, his, chosen, values = [], [], [], []
    length, limit = Fraction(0), Fraction(eta)
    for value, item in ranked:
        piece = Fraction(item.hi) - Fraction(item.lo)
        if length + piece >= limit:
            continue
        i = bisect.bisect_left(los, item.lo)
        if (i < len(los) and los[i] < item.hi) or (i > 0 and his[i - 1] > item.lo):
            continue
        los.insert(i, item.lo)
        his.insert(i, item.hi)
        chosen.append(item)
        values.append(value)
        length += piece
    return chosen, math.fsum(values)


__all__ = [
    "Gauge", "TaggedInterval", "TaggedPartition", "nonoverlapping", "parse_items", "is_fine",
    "is_fine_item", "cousin_partition", "random_fine_partition", "lr_term", "riemann_lr_terms",
    "riemann_lr_sum", "ac_sum", "adversarial_small_partition",
]
