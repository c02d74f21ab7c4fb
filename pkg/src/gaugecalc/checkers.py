"""Certificates and refutations for the gauge-integral definitions.

The definitions quantify over all gauges and all fine partitions, which no
finite search can decide.  Every report therefore says what its verdict
means:

* ``witnessViolation`` is a proof: the attached witness has been re-evaluated
  on a second computation path and still exceeds the threshold;
* ``certificate`` is evidence: nothing was found within the searched ladders
  and budget;
* ``inconclusive``: the comparison with the threshold is within the
  numerical error, or a budget ran out.

Only constant and piecewise-constant gauges are searched.
"""

from __future__ import annotations

import bisect
import math
from dataclasses import dataclass, field
from fractions import Fraction
from typing import Sequence

import numpy as np

from .errors import ArgumentError, GaugeCalcError
from .funcmodel import STANDARD_SCHEME, CantorScheme, Counterexample, FunctionModel
from .gauges import (DEFAULT_MAX_DEPTH, DEFAULT_SEARCH_BUDGET, Gauge,
                     adversarial_small_partition, cousin_partition, lr_term,
                     random_fine_partition)
from .quadrature import LrParams, QuadOptions, lr_mean_deviation
from .reporting import dumps, ordered_map, rows_to_csv

CERTIFICATE = "certificate"
WITNESS = "witnessViolation"
INCONCLUSIVE = "inconclusive"

SEMANTICS = {
    CERTIFICATE: "evidence: no violation found within the searched ladders and budget",
    WITNESS: "proof: the witness re-evaluates above the threshold on an independent path",
    INCONCLUSIVE: "undecided: threshold within numerical error, or budget exhausted",
}
GAUGE_SCOPE = "constant and piecewise-constant gauges only"

DEFAULT_ETAS = (0.1, 0.01, 1e-3)
DEFAULT_DELTAS = (0.1, 1e-2, 1e-3, 1e-4)
IDENTITY_RTOL = 1e-12
# refinements per term on the re-evaluation path; only a lower bound is needed
RECHECK_BUDGET = 40
WITNESS_MARGIN = 2.0


def default_gauges() -> list[Gauge]:
    return [Gauge.constant(d) for d in DEFAULT_DELTAS]


@dataclass
class CheckReport:
    """Outcome of a check: verdict, the parameters searched, witness and numbers."""

    check: str
    verdict: str
    parameters: dict
    witness: object = None
    numeric_summary: dict = field(default_factory=dict)
    rows: list = field(default_factory=list)
    semantics: str = ""

    def __post_init__(self):
        if self.verdict not in SEMANTICS:
            raise ArgumentError(f"unknown verdict {self.verdict!r}")
        if not self.semantics:
            self.semantics = SEMANTICS[self.verdict]

    def to_json(self) -> dict:
        return {"check": self.check, "verdict": self.verdict, "semantics": self.semantics,
                "parameters": self.parameters, "witness": self.witness,
                "numericSummary": self.numeric_summary, "rows": self.rows}

    def dumps(self) -> str:
        return dumps(self.to_json())

    def to_csv(self, columns: Sequence[str] | None = None) -> str:
        return rows_to_csv(self.rows, columns)


# ---------------------------------------------------------------------------
# witness re-evaluation


def _confirm_above(F: FunctionModel, f: FunctionModel | None, items, r: float, threshold: float,
                   options: QuadOptions | None) -> tuple[bool, float]:
    """Recompute terms by the generic quadrature route until their lower bounds pass ``threshold``.

    Terms are non-negative, so a partial sum of lower bounds that reaches the
    threshold proves the full sum does.  Items are visited largest first.
    """
    opt = options or QuadOptions()
    recheck = QuadOptions(opt.tol, opt.rel_tol, min(opt.budget, RECHECK_BUDGET))
    lower = 0.0
    for item in items:
        slope = 0.0 if f is None else f.eval(float(item.tag))
        value, err = lr_term(F, item, slope, r, recheck, kernels=False)
        lower += max(value - err, 0.0)
        if lower >= threshold:
            return True, lower
    return False, lower


# ---------------------------------------------------------------------------
# HK_r


def _sum_terms(F, f, partition, r, options, stop_at: float | None):
    """Sum of terms, its error bound and per-item values; may stop once ``stop_at`` is passed."""
    values, errs, items = [], [], []
    running = running_err = 0.0
    for item in partition:
        slope = 0.0 if f is None else f.eval(float(item.tag))
        v, e = lr_term(F, item, slope, r, options)
        values.append(v)
        errs.append(e)
        items.append(item)
        running += v
        running_err += e
        if stop_at is not None and running - running_err >= stop_at:
            break
    return math.fsum(values), math.fsum(errs), list(zip(values, items)), len(items) < len(partition)


def hkr_check(F: FunctionModel, f: FunctionModel, epsilon: float,
              gauge_ladder: Sequence[Gauge] | None = None, trials: int = 8, *, r: float = 1.0,
              seed: int = 0, max_depth: int = DEFAULT_MAX_DEPTH,
              options: QuadOptions | None = None) -> CheckReport:
    """Probe whether ``F`` is an HK_r primitive of ``f`` at tolerance ``epsilon``.

    For each gauge (coarse to fine) the Riemann-type sums of the Cousin
    partition and of ``trials`` random fine partitions are evaluated.  The
    first gauge keeping every sampled sum below ``epsilon`` gives a
    certificate.  A sum at or above ``epsilon`` at the finest gauge gives a
    witness once re-evaluated.
    """
    if not epsilon > 0:
        raise ArgumentError("epsilon must be positive")
    dom = F.domain
    if (float(dom.lo), float(dom.hi)) != (float(f.domain.lo), float(f.domain.hi)):
        raise ArgumentError("F and f must share their domain")
    ladder = list(gauge_ladder) if gauge_ladder else default_gauges()
    params = {"epsilon": epsilon, "r": r, "trials": trials, "seed": seed,
              "gauges": [g.describe() for g in ladder], "gaugeScope": GAUGE_SCOPE}
    rng = np.random.default_rng(seed)
    rows = []
    for gi, g in enumerate(ladder):
        finest = gi == len(ladder) - 1
        partitions = [cousin_partition(dom, g, max_depth)]
        partitions += [random_fine_partition(dom, g, rng, max_depth) for _ in range(trials)]
        worst = None
        clean = True
        for k, p in enumerate(partitions):
            # stop early only with headroom for the coarser re-evaluation
            total, err, terms, partial = _sum_terms(F, f, p, r, options,
                                                    WITNESS_MARGIN * epsilon if finest else None)
            rows.append({"gauge": gi, "partition": k, "items": len(p), "sum": total,
                         "error": err, "partial": partial})
            if worst is None or total > worst[0]:
                worst = (total, err, terms, p)
            if total + err >= epsilon:
                clean = False
                if not finest or total - err >= epsilon:
                    break
        if clean:
            return CheckReport("hkr", CERTIFICATE, {**params, "certifiedBy": g.describe()},
                               None, {"maxSampledSum": max(r_["sum"] for r_ in rows
                                                           if r_["gauge"] == gi)}, rows)
        if finest:
            total, err, terms, p = worst
            ranked = [it for _, it in sorted(terms, key=lambda t: (-t[0], t[1]))]
            ok, lower = _confirm_above(F, f, ranked, r, epsilon, options) if total - err >= epsilon \
                else (False, total - err)
            summary = {"witnessSum": total, "witnessError": err, "recheckedLowerBound": lower,
                       "witnessGauge": g.describe()}
            verdict = WITNESS if ok else INCONCLUSIVE
            return CheckReport("hkr", verdict, params, p.to_json(), summary, rows)
    raise GaugeCalcError("empty gauge ladder")  # pragma: no cover


# ---------------------------------------------------------------------------
# AC_r and AC


def acr_check(F: FunctionModel, E: Sequence[float], r: float = 1.0, epsilon: float = 1.0,
              eta_ladder: Sequence[float] = DEFAULT_ETAS,
              gauge_ladder: Sequence[Gauge] | None = None,
              budget: int = DEFAULT_SEARCH_BUDGET, *, seed: int = 0,
              options: QuadOptions | None = None) -> CheckReport:
    """Attack AC_r on ``E``: small-length fine partitions tagged in ``E`` with large sums.

    Every ``(eta, gauge)`` pair runs :func:`adversarial_small_partition`.  A
    pair whose best sum stays below ``epsilon`` gives a certificate; when every
    pair is beaten, the witness from the last (smallest) pair is re-evaluated.
    """
    if not epsilon > 0:
        raise ArgumentError("epsilon must be positive")
    if not E:
        raise ArgumentError("E must be nonempty")
    ladder = list(gauge_ladder) if gauge_ladder else default_gauges()
    params = {"epsilon": epsilon, "r": r, "etas": list(eta_ladder), "budget": budget,
              "seed": seed, "gauges": [g.describe() for g in ladder], "points": len(E),
              "gaugeScope": GAUGE_SCOPE}
    cache: dict = {}
    rows = []
    last = None
    for eta in eta_ladder:
        for g in ladder:
            p = adversarial_small_partition(E, g, eta, F, r, budget, seed=seed, options=options,
                                            cache=cache)
            terms = [(cache[it], it) for it in p]
            total = math.fsum(v for v, _ in terms)
            beaten = total >= epsilon
            rows.append({"eta": eta, "gauge": g.describe(), "items": len(p),
                         "length": p.total_length, "sum": total, "beaten": beaten})
            if not beaten:
                return CheckReport("acr", CERTIFICATE,
                                   {**params, "certifiedBy": {"eta": eta, "gauge": g.describe()}},
                                   None, {"maxFoundSum": total}, rows)
            last = (total, terms, p, eta, g)
    total, terms, p, eta, g = last
    ranked = [it for _, it in sorted(terms, key=lambda t: (-t[0], t[1]))]
    ok, lower = _confirm_above(F, None, ranked, r, epsilon, options)
    summary = {"witnessSum": total, "recheckedLowerBound": lower, "witnessEta": eta,
               "witnessGauge": g.describe(), "witnessLength": p.total_length}
    return CheckReport("acr", WITNESS if ok else INCONCLUSIVE, params, p.to_json(), summary, rows)


def ac_check(F: FunctionModel, E: Sequence[float], epsilon: float,
             eta_ladder: Sequence[float] = DEFAULT_ETAS,
             budget: int = DEFAULT_SEARCH_BUDGET) -> CheckReport:
    """Attack classical AC on ``E``: collections ``[c_i, d_i]`` with endpoints in ``E``.

    Candidates pair each point with its nearest successors (up to ``budget``
    pairs) and are chosen greedily by ``|F(d) - F(c)|`` per length, keeping the
    intervals nonoverlapping with total length ``< eta``.
    """
    if not epsilon > 0:
        raise ArgumentError("epsilon must be positive")
    pts = sorted({float(x) for x in E})
    if not pts:
        raise ArgumentError("E must be nonempty")
    vals = [F.eval(x) for x in pts]
    params = {"epsilon": epsilon, "etas": list(eta_ladder), "budget": budget,
              "points": len(pts)}
    rows = []
    last = None
    for eta in eta_ladder:
        cands = []
        span = 1
        while len(cands) < budget and span < len(pts):
            for i in range(len(pts) - span):
                if len(cands) >= budget:
                    break
                c, d = pts[i], pts[i + span]
                if d - c < eta:
                    cands.append((abs(vals[i + span] - vals[i]), c, d))
            span += 1
        cands.sort(key=lambda t: (-(t[0] / (t[2] - t[1])), t[1], t[2]))
        chosen, length, limit = [], Fraction(0), Fraction(eta)
        los, his = [], []
        for v, c, d in cands:
            piece = Fraction(d) - Fraction(c)
            if v == 0 or length + piece >= limit:
                continue
            i = bisect.bisect_left(los, c)
            if (i < len(los) and los[i] < d) or (i > 0 and his[i - 1] > c):
                continue
            los.insert(i, c)
            his.insert(i, d)
            chosen.append((v, c, d))
            length += piece
        total = math.fsum(v for v, _, _ in chosen)
        beaten = total >= epsilon
        rows.append({"eta": eta, "intervals": len(chosen), "length": float(length), "sum": total,
                     "beaten": beaten})
        if not beaten:
            return CheckReport("ac", CERTIFICATE, {**params, "certifiedBy": {"eta": eta}}, None,
                               {"maxFoundSum": total, "allSumsZero": all(
                                   row["sum"] == 0 for row in rows)}, rows)
        last = (total, sorted(chosen, key=lambda t: t[1]), eta)
    total, chosen, eta = last
    # independent path: exact rational arguments
    rechecked = math.fsum(abs(F.eval(Fraction(d)) - F.eval(Fraction(c))) for _, c, d in chosen)
    witness = [{"lo": c, "hi": d} for _, c, d in chosen]
    summary = {"witnessSum": total, "recheckedSum": rechecked, "witnessEta": eta}
    return CheckReport("ac", WITNESS if rechecked >= epsilon else INCONCLUSIVE, params, witness,
                       summary, rows)


# ---------------------------------------------------------------------------
# the counterexample's divergence bound


def bound_forms(n: int, r: float, scheme: CantorScheme = STANDARD_SCHEME) -> tuple[float, float]:
    """Closed form of the mean-deviation lower bound at scale ``r_n / 2``, and its unsimplified form.

    closed: ``2^(n+2) (n+2) / (n (n+4)^(1+1/r) (n+3)^(1/r))``;
    intermediate: ``2^(1-1/r) / (n r_n) * (u_n / r_n)^(1/r)``.
    """
    if isinstance(n, bool) or int(n) != n or n < 1:
        raise ArgumentError(f"the bound needs an integer n >= 1, got {n}")
    if not (math.isfinite(r) and r >= 1):
        raise ArgumentError(f"r must be a finite number >= 1, got {r}")
    n = int(n)
    closed = math.ldexp(n + 2, n + 2) / (n * (n + 4) ** (1 + 1 / r) * (n + 3) ** (1 / r))
    rn, un = scheme.r(n), scheme.u(n)
    intermediate = 2 ** (1 - 1 / r) / (n * float(rn)) * float(un / rn) ** (1 / r)
    return closed, intermediate


def counterexample_bound(n: int, r: float) -> float:
    """Lower bound for ``Phi_h / h`` of the counterexample at ``x = 0, h = r_n / 2, alpha = 0``."""
    closed, intermediate = bound_forms(n, r)
    if abs(closed - intermediate) > IDENTITY_RTOL * abs(closed):
        raise GaugeCalcError(f"bound forms disagree at n={n}, r={r}: {closed} vs {intermediate}")
    return closed


def plateau_minorant(n: int, r: float, scheme: CantorScheme = STANDARD_SCHEME) -> float:
    """``(2/r_n) ((2/r_n) v_n / (2 n^r))^(1/r)``: only the plateau half inside the window counts."""
    rn, vn = float(scheme.r(n)), float(scheme.v(n))
    return (2 / rn) * ((2 / rn) * vn / (2 * n**r)) ** (1 / r)


VERIFY_COLUMNS = ("n", "r", "h", "Q", "Q_error", "bound", "Q_lower", "pass")


def counterexample_verify(n_range: Sequence[int], r_list: Sequence[float] = (1.0, 2.0),
                          tol: float = 1e-6, *, model: Counterexample | None = None,
                          options: QuadOptions | None = None) -> CheckReport:
    """Check ``Q(n, r) >= bound(n, r) (1 - tol)`` at ``x = 0``, ``alpha = 0``, ``h = r_n / 2``.

    ``Q = Phi_h / h`` on the right window.  A row passes when the lower end of
    the quadrature interval clears both the closed-form bound and the plateau
    minorant; it is inconclusive when the error straddles the bound.
    """
    C = model or Counterexample()
    ns = [int(n) for n in n_range]
    if any(n < 1 or n >= C.depth_cap for n in ns):
        raise ArgumentError(f"n must lie in 1..{C.depth_cap - 1} for depth cap {C.depth_cap}")
    opt = options or QuadOptions()
    jobs = [(n, float(r)) for n in ns for r in r_list]

    def row(job):
        n, r = job
        h = float(C.scheme.r(n) / 2)
        res = lr_mean_deviation(C, 0.0, 0.0, h, LrParams(r, "right", "abs"), tol=opt.tol,
                                rel_tol=opt.rel_tol, budget=opt.budget)
        q, err = res.value / h, res.error_estimate / h
        bound, lower = counterexample_bound(n, r), plateau_minorant(n, r, C.scheme)
        need = max(bound, lower) * (1 - tol)
        status = True if q - err >= need else (False if q + err < need else None)
        return {"n": n, "r": r, "h": h, "Q": q, "Q_error": err, "bound": bound,
                "Q_lower": lower, "pass": status}

    rows = ordered_map(row, jobs)
    if any(row_["pass"] is False for row_ in rows):
        verdict = WITNESS
    elif all(row_["pass"] for row_ in rows):
        verdict = CERTIFICATE
    else:
        verdict = INCONCLUSIVE
    summary = {}
    for r in r_list:
        qs = {row_["n"]: row_["Q"] for row_ in rows if row_["r"] == float(r)}
        summary[f"maxQ_over_bound1_r{r:g}"] = max(qs.values()) / counterexample_bound(1, r)
        if min(qs) != max(qs):
            summary[f"growth_r{r:g}"] = qs[max(qs)] / qs[min(qs)]
    semantics = {CERTIFICATE: "every row clears the closed-form bound beyond quadrature error",
                 WITNESS: "some row falls below the bound beyond quadrature error",
                 INCONCLUSIVE: "some row is within quadrature error of the bound"}[verdict]
    params = {"n": ns, "r": [float(r) for r in r_list], "tol": tol, "x": 0.0, "alpha": 0.0,
              "depthCap": C.depth_cap}
    return CheckReport("counterexample-verify", verdict, params, None, summary, rows, semantics)


__all__ = [
    "CERTIFICATE", "WITNESS", "INCONCLUSIVE", "CheckReport", "hkr_check", "acr_check",
    "ac_check", "bound_forms", "counterexample_bound", "plateau_minorant",
    "counterexample_verify", "default_gauges", "VERIFY_COLUMNS",
]
