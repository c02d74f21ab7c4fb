import json
import math
from fractions import Fraction

import pytest

from gaugecalc.checkers import (CERTIFICATE, INCONCLUSIVE, WITNESS, CheckReport, ac_check,
                                acr_check, bound_forms, counterexample_bound,
                                counterexample_verify, hkr_check, plateau_minorant)
from gaugecalc.errors import ArgumentError
from gaugecalc.funcmodel import (STANDARD_SCHEME, Counterexample, Interval, PolynomialModel,
                                 cantor_level_intervals, perfect_set_samples)
from gaugecalc.gauges import Gauge, TaggedPartition, ac_sum, is_fine

UNIT = Interval(0, 1)
HALF_SQUARE = PolynomialModel([0, 0, 0.5], UNIT)
IDENTITY = PolynomialModel([0, 1], UNIT)


def direct_bound(n, r):
    """The bound evaluated in exact rationals up to the final real powers."""
    head = Fraction(2 ** (n + 2) * (n + 2), n)
    return float(head) / ((n + 4) ** (1 + 1 / r) * (n + 3) ** (1 / r))


# ---------------------------------------------------------------- reports


def test_report_json_shape():
    rep = CheckReport("x", CERTIFICATE, {"epsilon": 1.0}, None, {"v": Fraction(1, 3)})
    data = json.loads(rep.dumps())
    assert set(data) == {"check", "verdict", "semantics", "parameters", "witness",
                         "numericSummary", "rows"}
    assert data["numericSummary"]["v"] == "1/3"
    assert data["semantics"].startswith("evidence")
    assert CheckReport("x", WITNESS, {}).semantics.startswith("proof")
    with pytest.raises(ArgumentError):
        CheckReport("x", "maybe", {})


# ---------------------------------------------------------------- the divergence bound


@pytest.mark.parametrize("n,r,want", [(1, 1, 0.24), (2, 1, 64 / 360)])
def test_bound_examples(n, r, want):
    assert counterexample_bound(n, r) == pytest.approx(want, rel=1e-15)


@pytest.mark.parametrize("r", [1, 1.5, 2, 3])
def test_bound_forms_agree(r):
    for n in range(1, 41):
        closed, intermediate = bound_forms(n, r)
        assert abs(closed - intermediate) <= 1e-12 * closed
        assert closed == pytest.approx(direct_bound(n, r), rel=1e-13)


def test_bound_rejects_n0():
    with pytest.raises(ArgumentError):
        counterexample_bound(0, 1)
    with pytest.raises(ArgumentError):
        counterexample_bound(2, 0.5)


@pytest.mark.parametrize("r", [1, 2, 3])
def test_bound_grows_eventually(r):
    vals = [counterexample_bound(n, r) for n in range(1, 41)]
    assert all(b > a for a, b in zip(vals[3:], vals[4:]))


def test_bound_increases_in_r_and_is_unbounded():
    # (n+4)^(1/r) (n+3)^(1/r) shrinks as r grows, matching the power-mean monotonicity of Q
    for n in range(1, 21):
        row = [counterexample_bound(n, r) for r in (1, 2, 4)]
        assert row[0] < row[1] < row[2]
    for r in (1, 2, 4):
        assert counterexample_bound(20, r) > 100 * counterexample_bound(1, r)


def test_plateau_minorant_below_bound_formula_inputs():
    # the minorant counts half a plateau of height 1/n inside a window of length r_n/2
    for n in range(1, 10):
        rn, vn = STANDARD_SCHEME.r(n), STANDARD_SCHEME.v(n)
        want = (2 / float(rn)) * ((2 / float(rn)) * float(vn) / (2 * n)) ** 1.0
        assert plateau_minorant(n, 1) == pytest.approx(want)


def test_counterexample_verify_rows():
    rep = counterexample_verify(range(1, 11), (1, 2))
    assert rep.verdict == CERTIFICATE
    assert len(rep.rows) == 20
    for row in rep.rows:
        assert row["pass"] is True
        assert row["Q"] >= row["bound"] * (1 - 1e-6)
        assert row["Q"] >= row["Q_lower"] * (1 - 1e-6)
        assert row["h"] == float(STANDARD_SCHEME.r(row["n"]) / 2)
    first = next(r for r in rep.rows if r["n"] == 1 and r["r"] == 1)
    assert first["Q"] >= 0.24 * (1 - 1e-6)
    assert rep.to_csv().splitlines()[0] == "n,r,h,Q,Q_error,bound,Q_lower,pass"


def test_counterexample_verify_range_check():
    with pytest.raises(ArgumentError):
        counterexample_verify([0, 1])
    with pytest.raises(ArgumentError):
        counterexample_verify([70])


# ---------------------------------------------------------------- HK_r


def test_hkr_positive_control():
    rep = hkr_check(HALF_SQUARE, IDENTITY, 1e-3, [Gauge.constant(1e-3)], trials=2)
    assert rep.verdict == CERTIFICATE
    # each term is at most (d - c)^2 / 2, hence the sum at most mesh / 2 < gauge
    assert rep.numeric_summary["maxSampledSum"] < 1e-3
    assert rep.parameters["gaugeScope"].startswith("constant and piecewise-constant")


def test_hkr_default_ladder_certifies_early():
    rep = hkr_check(HALF_SQUARE, IDENTITY, 1e-2, trials=2)
    assert rep.verdict == CERTIFICATE
    # terms are about (d - c)^2 / 6, so the coarsest default gauge already suffices
    assert rep.parameters["certifiedBy"] == {"kind": "constant", "value": 0.1}
    assert rep.numeric_summary["maxSampledSum"] < 1e-2


@pytest.mark.parametrize("c", [-1.5, 2.0])
def test_hkr_affine_exact(c):
    F = PolynomialModel([0.25, c], UNIT)
    f = PolynomialModel([c], UNIT)
    rep = hkr_check(F, f, 1e-9, [Gauge.constant(0.3)], trials=3)
    assert rep.verdict == CERTIFICATE and rep.numeric_summary["maxSampledSum"] == 0.0


def test_hkr_rejects_bad_arguments():
    with pytest.raises(ArgumentError):
        hkr_check(HALF_SQUARE, IDENTITY, 0.0)
    with pytest.raises(ArgumentError):
        hkr_check(HALF_SQUARE, PolynomialModel([0, 1], Interval(0, 2)), 1e-3)


@pytest.mark.slow
def test_hkr_counterexample_witness():
    C = Counterexample()
    zero = PolynomialModel([0], UNIT)
    rep = hkr_check(C, zero, 1.0, trials=2)
    assert rep.verdict == WITNESS
    assert rep.numeric_summary["recheckedLowerBound"] >= 1.0
    p = TaggedPartition.from_json(rep.witness)
    assert is_fine(p, Gauge.constant(1e-4)) and p.tiles(UNIT)


# ---------------------------------------------------------------- AC_r


def test_acr_identity_certificate():
    E = [i / 50 for i in range(51)]
    rep = acr_check(IDENTITY, E, 1, 0.01, [0.01], [Gauge.constant(0.05)])
    assert rep.verdict == CERTIFICATE
    assert rep.numeric_summary["maxFoundSum"] < 0.01


def test_acr_constant_certificate():
    F = PolynomialModel([3], UNIT)
    rep = acr_check(F, [0.1, 0.5, 0.7], 2, 1e-6, [0.5])
    assert rep.verdict == CERTIFICATE and rep.numeric_summary["maxFoundSum"] == 0.0


def test_acr_counterexample_small_ladder():
    C = Counterexample()
    E = perfect_set_samples(C, 8)
    rep = acr_check(C, E, 1, 1.0, [0.05], [Gauge.constant(0.01)], seed=1)
    assert rep.verdict == WITNESS
    p = TaggedPartition.from_json(rep.witness)
    assert ac_sum(p, C, 1) >= 1.0
    assert p.total_length < 0.05 and is_fine(p, Gauge.constant(0.01))
    assert all(float(it.tag) in E for it in p)


def test_acr_rejects_bad_arguments():
    with pytest.raises(ArgumentError):
        acr_check(IDENTITY, [], 1, 1.0)
    with pytest.raises(ArgumentError):
        acr_check(IDENTITY, [0.5], 1, -1.0)


# ---------------------------------------------------------------- AC


def test_ac_certificate_on_perfect_set():
    C = Counterexample()
    rep = ac_check(C, perfect_set_samples(C, 10), 1e-9)
    assert rep.verdict == CERTIFICATE
    assert rep.numeric_summary["allSumsZero"] is True


def test_ac_identity_certificate():
    rep = ac_check(IDENTITY, [i / 100 for i in range(101)], 0.01, [0.01])
    assert rep.verdict == CERTIFICATE and rep.numeric_summary["maxFoundSum"] < 0.01


def test_ac_counterexample_gap_midpoints():
    C = Counterexample()
    mids = [float(iv.mid) for n in range(1, 13) for iv in cantor_level_intervals(C.scheme, n)]
    E = sorted(set(mids) | set(perfect_set_samples(C, 12)))
    rep = ac_check(C, E, 1.0)
    assert rep.verdict == WITNESS
    witness = rep.witness
    assert set(x for w in witness for x in (w["lo"], w["hi"])) <= set(E)
    lengths = sum(Fraction(w["hi"]) - Fraction(w["lo"]) for w in witness)
    assert lengths < Fraction(rep.numeric_summary["witnessEta"])
    exact = math.fsum(abs(C.eval(Fraction(w["hi"])) - C.eval(Fraction(w["lo"]))) for w in witness)
    assert exact == pytest.approx(rep.numeric_summary["witnessSum"], rel=1e-12)
    # oracle: [left end of a level-n interval (in P), its centre] changes F by 1/n over
    # length r_n / 2; at n = 12 such pieces packed into length 1e-3 already sum past 1
    per_length = 2 / (12 * STANDARD_SCHEME.r(12))
    assert float(per_length) * 1e-3 > 1
    assert exact >= 1.0


def test_inconclusive_is_a_verdict():
    assert CheckReport("x", INCONCLUSIVE, {}).semantics.startswith("undecided")
