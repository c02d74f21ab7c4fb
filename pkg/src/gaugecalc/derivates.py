"""L^r derivates, the L^r-derivative and the approximate derivative.

Everything here estimates a limit ``h -> 0+`` from a finite geometric grid of
scales, so every estimate carries its diagnostics and a verdict in
{converges, diverges, inconclusive}.

Conventions, with ``g(y) = F(y) - F(x) - alpha (y - x)``:

=============  ==========  =====  ================================
derivate       window      part   threshold
=============  ==========  =====  ================================
upper-right    [x, x+h]    pos    infimum of alphas that converge
lower-right    [x, x+h]    neg    supremum of alphas that converge
upper-left     [x-h, x]    neg    infimum of alphas that converge
lower-left     [x-h, x]    pos    supremum of alphas that converge
=============  ==========  =====  ================================

"alpha converges" means ``Phi_h(alpha) / h -> 0``.  Lower derivates run the same
search as upper ones in the mirrored variable ``beta = -alpha``, so
``lower_right(F) == -upper_right(-F)`` holds exactly, not just approximately.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Callable, Sequence

import numpy as np

from .errors import ArgumentError, DomainError
from .funcmodel import Counterexample, FunctionModel
from .quadrature import LrParams, QuadOptions, lr_mean_deviation

CONVERGES = "converges"
DIVERGES = "diverges"
INCONCLUSIVE = "inconclusive"

ALPHA_LIMIT = 1e6
DEFAULT_ALPHA_TOL = 1e-8
RATIO_THRESHOLD = 1e-3
SLOPE_THRESHOLD = 0.5
NOISE_FLOOR = 1e-13
ROUNDOFF_ULPS = 2
EPS = float(np.finfo(float).eps)

WHICH = ("upperRight", "lowerRight", "upperLeft", "lowerLeft")
_DERIVATE_SETUP = {
    # which: (side, part, mirror sign)
    "upperRight": ("right", "pos", 1.0),
    "lowerRight": ("right", "neg", -1.0),
    "upperLeft": ("left", "neg", 1.0),
    "lowerLeft": ("left", "pos", -1.0),
}


@dataclass(frozen=True)
class HGrid:
    """Scales ``h0 * q**k``, ``k < count``, or an explicit list of scales.

    ``h0=None`` means ``min(0.1, d) / 2`` with ``d`` the room left in the
    domain on the relevant side(s) of the point.  Scales whose window would
    leave the domain are dropped.
    """

    h0: float | None = None
    q: float = 0.5
    count: int = 20
    scales: tuple[float, ...] | None = None

    def __post_init__(self):
        if self.scales is None:
            if not 0 < self.q < 1:
                raise ArgumentError(f"grid ratio q must lie in (0, 1), got {self.q}")
            if self.count < 3:
                raise ArgumentError(f"grid count must be >= 3, got {self.count}")
            if self.h0 is not None and not self.h0 > 0:
                raise ArgumentError(f"h0 must be positive, got {self.h0}")
        elif not self.scales or any(not h > 0 for h in self.scales):
            raise ArgumentError("explicit scales must be positive and non-empty")

    def scales_for(self, F: FunctionModel, x: float, side: str) -> list[float]:
        room = _room(F, x, side)
        if self.scales is not None:
            hs = sorted((float(h) for h in self.scales), reverse=True)
        else:
            h0 = self.h0 if self.h0 is not None else min(0.1, room) / 2
            hs = [h0 * self.q**k for k in range(self.count)]
        hs = [h for h in hs if 0 < h <= room]
        if not hs:
            raise DomainError(f"no scale of the grid fits the domain at x={x} ({side})")
        return hs


def gap_midpoint_grid(model: Counterexample, levels: Sequence[int]) -> HGrid:
    """Scales ``r_n / 2``: from 0, the midpoints of the gaps next to 0."""
    return HGrid(scales=tuple(float(model.scheme.r(n)) / 2 for n in levels))


def _room(F: FunctionModel, x: float, side: str) -> float:
    dom = F.domain
    right, left = float(dom.hi) - x, x - float(dom.lo)
    if right < 0 or left < 0:
        raise DomainError(f"x={x} outside domain [{dom.lo}, {dom.hi}]")
    return {"right": right, "left": left, "two-sided": min(left, right)}[side]


@dataclass
class DerivateEstimate:
    value: float
    diagnostics: list[tuple[float, float]]  # (h, Phi_h / h), coarse to fine
    trend_slope: float
    verdict: str
    which: str = ""

    def to_rows(self, alpha: float | None = None) -> list[dict]:
        a = self.value if alpha is None else alpha
        return [{"h": h, "phi": q * h, "ratio": q, "alpha": a} for h, q in self.diagnostics]


@dataclass
class DerivativeEstimate:
    value: float
    residual_ratios: list[tuple[float, float]]  # (h, Phi_h(alpha*(h)) / h)
    alpha_trace: list[float]
    verdict: str
    trend_slope: float = math.nan
    side: str = "two-sided"

    def to_rows(self) -> list[dict]:
        return [{"h": h, "phi": q * h, "ratio": q, "alpha": a}
                for (h, q), a in zip(self.residual_ratios, self.alpha_trace)]


@dataclass
class FourDerivates:
    upper_right: DerivateEstimate
    lower_right: DerivateEstimate
    upper_left: DerivateEstimate
    lower_left: DerivateEstimate
    agree: bool
    spread: float

    def items(self):
        return (("upperRight", self.upper_right), ("lowerRight", self.lower_right),
                ("upperLeft", self.upper_left), ("lowerLeft", self.lower_left))


def phi_ratio(F: FunctionModel, x: float, alpha: float, h: float, params: LrParams = LrParams(),
              options: QuadOptions | None = None) -> float:
    """``Phi_h(alpha) / h``, the quantity that must be ``o(1)``."""
    opt = options or QuadOptions()
    res = lr_mean_deviation(F, x, alpha, h, params, tol=opt.tol, rel_tol=opt.rel_tol,
                            budget=opt.budget)
    return res.value / h


# ---------------------------------------------------------------------------
# verdicts


def trend_slope(hs: Sequence[float], ratios: Sequence[float]) -> float:
    """Least-squares slope of ``log ratio`` against ``log h`` over positive ratios."""
    pts = [(math.log(h), math.log(q)) for h, q in zip(hs, ratios) if q > 0]
    if len(pts) < 3:
        return math.nan
    lx, ly = np.array(pts).T
    lx = lx - lx.mean()
    return float(np.dot(lx, ly - ly.mean()) / np.dot(lx, lx))


def _fine_count(n: int) -> int:
    """Number of finest scales the trend is fitted on: a third, at least three."""
    return min(n, max(3, n // 3))


def noise_floor(h: float, alpha: float, x: float = 0.0, fx: float = 0.0) -> float:
    """Ratios at or below this level at scale ``h`` are indistinguishable from 0.

    The integrand ``F(y) - F(x) - alpha (y - x)`` carries an absolute rounding
    error of a few ulps of the magnitudes involved; dividing by ``h`` turns it
    into a ratio error growing like ``eps / h``.
    """
    scale = 1.0 + abs(alpha)
    return NOISE_FLOOR * scale + ROUNDOFF_ULPS * EPS * (1.0 + abs(x) + abs(fx)) * scale / h


def classify_ratios(hs: Sequence[float], ratios: Sequence[float], alpha: float = 0.0, *,
                    threshold: float = RATIO_THRESHOLD, x: float = 0.0,
                    fx: float = 0.0) -> tuple[str, float]:
    """Verdict and trend slope for ratios ordered from the coarsest scale to the finest.

    Ratios below a noise floor count as 0.  The trend slope is fitted on the
    finest third of the grid.  converges: those finest ratios are all 0, or
    the slope exceeds 0.5 and the last ratio is below
    ``threshold * (1 + |alpha|)``.  diverges: the slope is negative and the
    smallest of the finest ratios exceeds the smallest ratio of the coarsest
    half (the running minimum grows).  Otherwise inconclusive.
    """
    n = len(ratios)
    if n < 3:
        return INCONCLUSIVE, math.nan
    scale = 1.0 + abs(alpha)
    eff = [0.0 if q <= noise_floor(h, alpha, x, fx) else q for h, q in zip(hs, ratios)]
    k = _fine_count(n)
    fine = eff[n - k:]
    slope = trend_slope(hs[n - k:], fine)
    if all(q == 0 for q in fine):
        return CONVERGES, slope
    if math.isnan(slope):
        slope = trend_slope(hs, eff)
    if slope > SLOPE_THRESHOLD and eff[-1] < threshold * scale:
        return CONVERGES, slope
    if slope < 0 and min(fine) > min(eff[: max(1, n // 2)]):
        return DIVERGES, slope
    return INCONCLUSIVE, slope


# ---------------------------------------------------------------------------
# L^r-derivative


def golden_section_min(f: Callable[[float], float], a: float, b: float,
                       tol: float) -> tuple[float, float]:
    """Minimize a unimodal ``f`` on ``[a, b]`` to an interval of width ``tol``."""
    invphi = (math.sqrt(5) - 1) / 2
    c = b - invphi * (b - a)
    d = a + invphi * (b - a)
    fc, fd = f(c), f(d)
    while b - a > tol:
        if fc <= fd:
            b, d, fd = d, c, fc
            c = b - invphi * (b - a)
            fc = f(c)
        else:
            a, c, fc = c, d, fd
            d = a + invphi * (b - a)
            fd = f(d)
        if not a < c < d < b:
            break
    return (c, fc) if fc <= fd else (d, fd)


def _difference_quotient(F: FunctionModel, x: float, h: float, side: str) -> float:
    if side == "right":
        return (F.eval(x + h) - F.eval(x)) / h
    if side == "left":
        return (F.eval(x) - F.eval(x - h)) / h
    return (F.eval(x + h) - F.eval(x - h)) / (2 * h)


def _derivative_side(F: FunctionModel, x: float) -> str:
    """Two-sided when there is room on both sides, else the side that has room."""
    dom = F.domain
    if float(dom.lo) < x < float(dom.hi):
        return "two-sided"
    return "right" if x == float(dom.lo) else "left"


def lr_derivative(F: FunctionModel, x: float, r: float = 1.0, grid: HGrid = HGrid(), *,
                  alpha_tol: float = DEFAULT_ALPHA_TOL,
                  options: QuadOptions | None = None) -> DerivativeEstimate:
    """Estimate the L^r-derivative: for each scale the minimizer of ``Phi_h``.

    ``alpha -> Phi_h(alpha)`` (two-sided, absolute) is convex.  Its minimum is
    bracketed around the difference quotient at that scale, widening by
    doubling, then located by golden section.  At a domain endpoint only the
    one-sided window is available and is used instead.
    """
    side = _derivative_side(F, x)
    params = LrParams(r, side, "abs")
    hs = grid.scales_for(F, x, side)
    ratios, trace = [], []
    for h in hs:
        dq = _difference_quotient(F, x, h, side)
        objective = lambda a, h=h: phi_ratio(F, x, a, h, params, options)  # noqa: E731
        bracket = _bracket_minimum(objective, dq)
        if bracket is None:
            return DerivativeEstimate(_difference_quotient(F, x, hs[-1], side),
                                      list(zip(hs, ratios)), trace, DIVERGES, math.nan, side)
        lo, hi = bracket
        a_star, q = golden_section_min(objective, lo, hi, alpha_tol)
        # the difference quotient is exact for affine data; keep it when it is no worse
        q_dq = objective(dq)
        if q_dq <= q:
            a_star, q = dq, q_dq
        trace.append(a_star)
        ratios.append(q)
    verdict, slope = classify_ratios(hs, ratios, trace[-1], x=x, fx=F.eval(x))
    return DerivativeEstimate(trace[-1], list(zip(hs, ratios)), trace, verdict, slope, side)


def _bracket_minimum(f: Callable[[float], float], center: float) -> tuple[float, float] | None:
    w = max(1.0, abs(center))
    fc = f(center)
    while True:
        lo, hi = center - w, center + w
        if f(lo) >= fc and f(hi) >= fc:
            return lo, hi
        w *= 2
        if w > ALPHA_LIMIT:
            return None


# ---------------------------------------------------------------------------
# one-sided derivates


class _Classifier:
    """Decides "alpha converges" for one derivate, evaluating ratios lazily."""

    def __init__(self, F, x, r, side, part, hs, options):
        self.F, self.x, self.hs, self.options = F, x, hs, options
        self.fx = F.eval(x)
        self.params = LrParams(r, side, part)

    def ratios(self, alpha: float, indices) -> dict[int, float]:
        return {i: phi_ratio(self.F, self.x, alpha, self.hs[i], self.params, self.options)
                for i in indices}

    def converges(self, alpha: float) -> bool:
        """Same rule as :func:`classify_ratios`, computing only the ratios it needs."""
        n = len(self.hs)
        scale = 1.0 + abs(alpha)
        last = self.ratios(alpha, [n - 1])[n - 1]
        floor = lambda i: noise_floor(self.hs[i], alpha, self.x, self.fx)  # noqa: E731
        # cheap rejection: a converging sequence ends below the threshold
        if last > floor(n - 1) and last >= RATIO_THRESHOLD * scale:
            return False
        idx = range(n - _fine_count(n), n)
        got = self.ratios(alpha, [i for i in idx if i != n - 1])
        got[n - 1] = last
        hs = [self.hs[i] for i in idx]
        eff = [0.0 if got[i] <= floor(i) else got[i] for i in idx]
        if all(q == 0 for q in eff):
            return True
        slope = trend_slope(hs, eff)
        if math.isnan(slope):
            return False
        return slope > SLOPE_THRESHOLD


def one_sided_derivate(F: FunctionModel, x: float, r: float = 1.0, which: str = "upperRight",
                       grid: HGrid = HGrid(), alpha_tol: float = DEFAULT_ALPHA_TOL, *,
                       options: QuadOptions | None = None) -> DerivateEstimate:
    """One of the four L^r derivates by bisection on the convergence threshold.

    Upper derivates return the infimum of the alphas whose ratio sequence
    converges, lower ones the supremum.  When no flip is found within
    ``|alpha| <= 1e6`` the result is the corresponding infinity.
    """
    if which not in _DERIVATE_SETUP:
        raise ArgumentError(f"which must be one of {WHICH}")
    side, part, sigma = _DERIVATE_SETUP[which]
    hs = grid.scales_for(F, x, side)
    cls = _Classifier(F, x, r, side, part, hs, options)
    # search in beta = sigma * alpha, where "converges" is monotone increasing
    conv = lambda beta: cls.converges(sigma * beta)  # noqa: E731
    dq = sigma * _difference_quotient(F, x, hs[-1], side)
    beta = _threshold_search(conv, dq, alpha_tol)
    value = sigma * beta
    if math.isinf(value):
        probe = sigma * math.copysign(ALPHA_LIMIT, beta)
    else:
        probe = value
    ratios = [phi_ratio(F, x, probe, h, cls.params, options) for h in hs]
    verdict, slope = classify_ratios(hs, ratios, probe, x=x, fx=cls.fx)
    if math.isinf(value) and verdict == CONVERGES:
        verdict = INCONCLUSIVE
    return DerivateEstimate(value, list(zip(hs, ratios)), slope, verdict, which)


def _threshold_search(conv: Callable[[float], bool], center: float, tol: float) -> float:
    """Smallest ``beta`` with ``conv(beta)``, for ``conv`` monotone increasing."""
    center = min(max(center, -ALPHA_LIMIT), ALPHA_LIMIT)
    w = max(1.0, abs(center))
    hi = min(center + w, ALPHA_LIMIT)
    while not conv(hi):
        if hi >= ALPHA_LIMIT:
            return math.inf
        w *= 2
        hi = min(center + w, ALPHA_LIMIT)
    lo = max(center - w, -ALPHA_LIMIT)
    while conv(lo):
        if lo <= -ALPHA_LIMIT:
            return -math.inf
        hi = lo
        w *= 2
        lo = max(center - w, -ALPHA_LIMIT)
    while hi - lo > tol:
        mid = 0.5 * (lo + hi)
        if not lo < mid < hi:
            break
        if conv(mid):
            hi = mid
        else:
            lo = mid
    return hi


def four_derivates(F: FunctionModel, x: float, r: float = 1.0, grid: HGrid = HGrid(),
                   alpha_tol: float = DEFAULT_ALPHA_TOL, *, agree_tol: float | None = None,
                   options: QuadOptions | None = None) -> FourDerivates:
    """All four derivates; ``agree`` when they are finite and within ``agree_tol``."""
    tol = alpha_tol if agree_tol is None else agree_tol
    est = [one_sided_derivate(F, x, r, w, grid, alpha_tol, options=options) for w in WHICH]
    values = [e.value for e in est]
    finite = all(math.isfinite(v) for v in values)
    spread = max(values) - min(values) if finite else math.inf
    return FourDerivates(*est, agree=finite and spread <= tol, spread=spread)


# ---------------------------------------------------------------------------
# approximate derivative


class DensitySet:
    """A set of reals with a membership test and a sampler for windows."""

    def contains(self, y: float) -> bool:
        raise NotImplementedError

    def sample(self, lo: float, hi: float, k: int, rng: np.random.Generator) -> list[float]:
        """Up to ``k`` points of the set in the open window ``(lo, hi)``."""
        out = []
        for _ in range(64):
            ys = rng.uniform(lo, hi, size=4 * k)
            out.extend(float(y) for y in ys if lo < y < hi and self.contains(float(y)))
            if len(out) >= k:
                break
        return out[:k]


@dataclass(frozen=True)
class FullLine(DensitySet):
    def contains(self, y):
        return True


@dataclass(frozen=True)
class HalfLine(DensitySet):
    """``{y > bound}`` (``upper=True``) or ``{y < bound}``."""

    bound: float = 0.0
    upper: bool = True

    def contains(self, y):
        return y > self.bound if self.upper else y < self.bound


@dataclass(frozen=True)
class CantorPoints(DensitySet):
    """The perfect set of a counterexample model, membership by exact descent."""

    model: Counterexample = field(default_factory=Counterexample)

    def contains(self, y):
        return 0 <= y <= 1 and self.model.in_perfect_set(y)


def approx_derivative(F: FunctionModel, x: float, density_set: DensitySet = FullLine(),
                      grid: HGrid = HGrid(), *, samples: int = 33,
                      seed: int = 0) -> DerivativeEstimate:
    """Difference quotients along a set having ``x`` as a density point.

    At every scale, ``samples`` points of the set in ``(x - h, x + h)`` give
    quotients ``(F(y) - F(x)) / (y - x)``; the estimate is the median at the
    finest scale.  ``residual_ratios`` holds the spread (max minus min) of the
    quotients at each scale, and ``alpha_trace`` the per-scale medians.  The
    verdict is "converges" when the medians settle (successive changes in the
    finest half below ``1e-3 (1 + |value|)`` and not larger than in the coarsest
    half), "inconclusive" when some scale has no sample.
    """
    side = _derivative_side(F, x)
    hs = grid.scales_for(F, x, side)
    rng = np.random.default_rng(seed)
    fx = F.eval(x)
    lo_dom, hi_dom = float(F.domain.lo), float(F.domain.hi)
    medians, spreads = [], []
    for h in hs:
        lo, hi = max(x - h, lo_dom), min(x + h, hi_dom)
        ys = [y for y in density_set.sample(lo, hi, samples, rng) if y != x]
        if not ys:
            return DerivativeEstimate(math.nan, list(zip(hs, spreads)), medians, INCONCLUSIVE,
                                      math.nan, side)
        qs = np.array([(F.eval(y) - fx) / (y - x) for y in ys])
        medians.append(float(np.median(qs)))
        spreads.append(float(qs.max() - qs.min()))
    value = medians[-1]
    steps = [abs(a - b) for a, b in zip(medians, medians[1:])]
    half = len(steps) // 2
    fine, coarse = steps[half:], steps[:half]
    scale = 1.0 + abs(value)
    if fine and max(fine) < RATIO_THRESHOLD * scale and (not coarse or max(fine) <= max(coarse)
                                                          or max(fine) <= NOISE_FLOOR * scale):
        verdict = CONVERGES
    elif fine and coarse and max(fine) > max(coarse):
        verdict = DIVERGES
    else:
        verdict = INCONCLUSIVE
    slope = trend_slope(hs[1:], steps)
    return DerivativeEstimate(value, list(zip(hs, spreads)), medians, verdict, slope, side)
