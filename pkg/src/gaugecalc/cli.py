"""Command-line front end.

Exit status: 0 when every result is a pass or certificate, 1 when a result is
inconclusive or a witness of violation was found, 2 on usage errors
(malformed specs, bad flags, unknown config keys).
"""

from __future__ import annotations

import argparse
import json
import math
import sys
from dataclasses import dataclass, fields
from fractions import Fraction
from pathlib import Path

from . import __version__
from .checkers import (CERTIFICATE, VERIFY_COLUMNS, CheckReport, ac_check, acr_check,
                       counterexample_verify, default_gauges, hkr_check)
from .derivates import (DEFAULT_ALPHA_TOL, INCONCLUSIVE, WHICH, HGrid, lr_derivative,
                        one_sided_derivate)
from .errors import DomainError, GaugeCalcError, ResourceError
from .funcmodel import (DEFAULT_DEPTH_CAP, Counterexample, FunctionModel, Interval,
                        cantor_level_intervals, model_from_spec, parse_real,
                        perfect_set_samples)
from .gauges import (DEFAULT_MAX_DEPTH, Gauge, TaggedPartition, ac_sum, cousin_partition,
                     is_fine, nonoverlapping, parse_items, riemann_lr_sum)
from .reporting import dumps, rows_to_csv


class UsageError(GaugeCalcError):
    """Bad command-line input."""


# ---------------------------------------------------------------------------
# configuration


@dataclass
class RunConfig:
    """Everything a command needs; built from a config file overlaid with flags."""

    command: str = ""
    action: str | None = None
    spec: str | None = None
    f_spec: str | None = None
    points: str | None = None
    partition: str | None = None
    domain: str | None = None
    n: str | None = None
    r: str = "1"
    h0: float | None = None
    q: float = 0.5
    count: int = 20
    alpha_tol: float = DEFAULT_ALPHA_TOL
    eta: str | None = None
    epsilon: float | None = None
    gauge: str | None = None
    trials: int = 8
    budget: int = 10_000
    tol: float = 1e-6
    seed: int = 0
    out: str | None = None
    format: str | None = None
    depth_cap: int | None = None

    @classmethod
    def from_sources(cls, args: argparse.Namespace) -> RunConfig:
        names = {f.name for f in fields(cls)}
        values = {}
        if getattr(args, "config", None):
            raw = _load_json(args.config, "config")
            if not isinstance(raw, dict):
                raise UsageError("config must be a JSON object")
            for key, value in raw.items():
                name = key.replace("-", "_")
                if name not in names or name in ("command", "action"):
                    raise UsageError(f"unknown config key {key!r}")
                values[name] = value
        for name in names:
            value = getattr(args, name, None)
            if value is not None:
                values[name] = value
        cfg = cls(**values)
        if cfg.format not in (None, "json", "csv"):
            raise UsageError(f"format must be json or csv, got {cfg.format!r}")
        return cfg


def _load_json(text: str, what: str):
    """Inline JSON, or the contents of a file holding JSON."""
    stripped = text.strip()
    try:
        if stripped[:1] in "[{\"" or stripped[:1].isdigit() or stripped[:1] == "-":
            return json.loads(stripped)
        return json.loads(Path(text).read_text())
    except json.JSONDecodeError as exc:
        raise UsageError(f"malformed JSON in {what}: {exc}") from exc
    except OSError as exc:
        raise UsageError(f"cannot read {what} {text!r}: {exc.strerror}") from exc


def _model(text: str | None, what: str = "--spec") -> FunctionModel:
    if text is None:
        raise UsageError(f"{what} is required")
    if text.strip() == "counterexample":
        return Counterexample()
    return model_from_spec(_load_json(text, what))


def _reals(text) -> list:
    """A JSON list, or comma-separated numbers (``"p/q"`` allowed)."""
    if isinstance(text, list):
        return [parse_real(v) for v in text]
    if isinstance(text, (int, float)):
        return [parse_real(text)]
    stripped = str(text).strip()
    if stripped.startswith("["):
        return [parse_real(v) for v in _load_json(stripped, "list")]
    return [parse_real(v) for v in stripped.split(",") if v.strip()]


def _floats(text) -> list[float]:
    return [float(v) for v in _reals(text)]


def _int_range(text) -> list[int]:
    """``"a..b"`` (inclusive), ``"a-b"``, ``"n"`` or ``"a,b,c"``."""
    if isinstance(text, int):
        return [text]
    if isinstance(text, list):
        return [int(v) for v in text]
    s = str(text).strip()
    for sep in ("..", "-"):
        if sep in s and not s.startswith("-"):
            a, b = s.split(sep, 1)
            try:
                lo, hi = int(a), int(b)
            except ValueError as exc:
                raise UsageError(f"bad range {text!r}") from exc
            if hi < lo:
                raise UsageError(f"empty range {text!r}")
            return list(range(lo, hi + 1))
    try:
        return [int(v) for v in s.split(",")]
    except ValueError as exc:
        raise UsageError(f"bad integer list {text!r}") from exc


def _point_set(text: str | None, F: FunctionModel) -> list[float]:
    """Points: numbers, plus for the counterexample ``perfect:L`` and ``gapmid:A..B`` terms.

    Terms are joined with ``+``: ``perfect:10+gapmid:1..10``.
    """
    if text is None:
        raise UsageError("--points is required")
    if isinstance(text, list):
        return _floats(text)
    out: list[float] = []
    for term in str(text).split("+"):
        term = term.strip()
        if term.startswith(("perfect:", "gapmid:")):
            if not isinstance(F, Counterexample):
                raise UsageError(f"{term!r} needs the counterexample")
            kind, arg = term.split(":", 1)
            if kind == "perfect":
                out += perfect_set_samples(F, int(arg))
            else:
                for n in _int_range(arg):
                    out += [float(iv.mid) for iv in cantor_level_intervals(F.scheme, n)]
        else:
            out += _floats(term)
    return out


def _gauges(text) -> list[Gauge]:
    if text is None:
        return default_gauges()
    if isinstance(text, (list, dict)):
        spec = text
    else:
        s = str(text).strip()
        spec = _load_json(s, "--gauge") if s[:1] in "[{" else [v for v in s.split(",") if v]
    if not isinstance(spec, list):
        spec = [spec]
    return [Gauge.from_spec(g) for g in spec]


def _domain(cfg: RunConfig, F: FunctionModel | None = None) -> Interval:
    if cfg.domain is not None:
        vals = _reals(cfg.domain)
        if len(vals) != 2:
            raise UsageError("--domain needs two numbers lo,hi")
        lo, hi = (int(v) if v.denominator == 1 else v for v in vals)
        return Interval(lo, hi)
    if F is not None:
        return F.domain
    return Interval(0, 1)


# ---------------------------------------------------------------------------
# output


def _emit(cfg: RunConfig, payload, rows=None, columns=None, default_format="json"):
    fmt = cfg.format or default_format
    text = rows_to_csv(rows or [], columns) if fmt == "csv" else dumps(payload)
    if cfg.out:
        Path(cfg.out).write_text(text)
    else:
        sys.stdout.write(text)


def _report_exit(report: CheckReport) -> int:
    return 0 if report.verdict == CERTIFICATE else 1


# ---------------------------------------------------------------------------
# commands


def cmd_derivate(cfg: RunConfig) -> int:
    F = _model(cfg.spec)
    xs = _floats(cfg.points) if cfg.points is not None else None
    if not xs:
        raise UsageError("--points is required")
    grid = HGrid(h0=cfg.h0, q=cfg.q, count=cfg.count)
    results, rows = [], []
    verdicts = []
    for r in _floats(cfg.r):
        for x in xs:
            entry = {"x": x, "r": r, "derivates": {}}
            values = []
            for which in WHICH:
                try:
                    est = one_sided_derivate(F, x, r, which, grid, cfg.alpha_tol)
                except DomainError:
                    entry["derivates"][which] = {"verdict": "unavailable"}
                    rows.append({"x": x, "r": r, "estimate": which, "verdict": "unavailable"})
                    continue
                values.append(est.value)
                entry["derivates"][which] = {"value": est.value, "verdict": est.verdict,
                                             "trendSlope": est.trend_slope,
                                             "diagnostics": est.to_rows()}
                rows.append({"x": x, "r": r, "estimate": which, "value": est.value,
                             "verdict": est.verdict, "trend_slope": est.trend_slope})
            finite = len(values) == 4 and all(math.isfinite(v) for v in values)
            entry["agree"] = finite and max(values) - min(values) <= cfg.alpha_tol
            d = lr_derivative(F, x, r, grid, alpha_tol=cfg.alpha_tol)
            verdicts.append(d.verdict)
            entry["derivative"] = {"value": d.value, "verdict": d.verdict,
                                   "trendSlope": d.trend_slope, "side": d.side,
                                   "diagnostics": d.to_rows()}
            rows.append({"x": x, "r": r, "estimate": "derivative", "value": d.value,
                         "verdict": d.verdict, "trend_slope": d.trend_slope})
            results.append(entry)
    _emit(cfg, {"command": "derivate", "spec": F.to_spec(), "results": results}, rows,
          ("x", "r", "estimate", "value", "verdict", "trend_slope"))
    return 1 if all(v == INCONCLUSIVE for v in verdicts) else 0


BUILD_COLUMNS = ("n", "r_n", "u_n", "v_n", "2^n*r_n", "1/2+1/(n+2)")


def cmd_counterexample(cfg: RunConfig) -> int:
    if cfg.action == "build":
        ns = _int_range(cfg.n if cfg.n is not None else "0..5")
        if min(ns) < 0:
            raise UsageError("levels must be >= 0")
        sch = Counterexample(depth_cap=1).scheme
        rows = [{"n": n, "r_n": sch.r(n), "u_n": sch.u(n), "v_n": sch.v(n),
                 "2^n*r_n": 2**n * sch.r(n), "1/2+1/(n+2)": Fraction(1, 2) + Fraction(1, n + 2)}
                for n in ns]
        _emit(cfg, {"command": "counterexample build", "rows": rows}, rows, BUILD_COLUMNS, "csv")
        return 0
    ns = _int_range(cfg.n if cfg.n is not None else "1..12")
    if max(ns) >= cfg.depth_cap:
        raise UsageError(f"n must stay below the depth cap {cfg.depth_cap}")
    report = counterexample_verify(ns, _floats(cfg.r), cfg.tol,
                                   model=Counterexample(depth_cap=cfg.depth_cap))
    _emit(cfg, report.to_json(), report.rows, VERIFY_COLUMNS, "csv")
    return _report_exit(report)


def cmd_partition(cfg: RunConfig) -> int:
    if cfg.action == "cousin":
        if cfg.gauge is None:
            raise UsageError("--gauge is required")
        gauges = _gauges(cfg.gauge)
        if len(gauges) != 1:
            raise UsageError("cousin takes a single gauge")
        F = _model(cfg.spec) if cfg.spec else None
        p = cousin_partition(_domain(cfg, F), gauges[0], cfg.depth_cap)
        _emit(cfg, p.to_json(), [it.to_json() for it in p], ("lo", "hi", "tag"))
        return 0
    if cfg.partition is None:
        raise UsageError("--partition is required")
    items = parse_items(_load_json(cfg.partition, "--partition"))
    out: dict = {"items": len(items), "nonoverlap": nonoverlapping(items)}
    F = _model(cfg.spec) if cfg.spec else None
    dom = _domain(cfg, F) if (cfg.domain or F) else None
    ok = out["nonoverlap"]
    if dom is not None and out["nonoverlap"]:
        out["tiles"] = TaggedPartition(tuple(items)).tiles(dom)
        ok = ok and out["tiles"]
    if cfg.gauge is not None:
        gauges = _gauges(cfg.gauge)
        out["fine"] = {json.dumps(g.describe(), sort_keys=True): is_fine(items, g) for g in gauges}
        ok = ok and all(out["fine"].values())
    if F is not None and out["nonoverlap"]:
        r = _floats(cfg.r)[0]
        out["r"] = r
        out["ac_sum"] = ac_sum(items, F, r)
        if cfg.f_spec:
            out["riemann_lr_sum"] = riemann_lr_sum(items, F, _model(cfg.f_spec, "--f-spec"), r)
    _emit(cfg, out, [out], list(out))
    return 0 if ok else 1


def _etas(cfg: RunConfig) -> list[float]:
    return _floats(cfg.eta) if cfg.eta is not None else [0.1, 0.01, 1e-3]


def cmd_acr_check(cfg: RunConfig) -> int:
    F = _model(cfg.spec)
    E = _point_set(cfg.points, F)
    report = acr_check(F, E, _floats(cfg.r)[0], cfg.epsilon if cfg.epsilon else 1.0, _etas(cfg),
                       _gauges(cfg.gauge), cfg.budget, seed=cfg.seed)
    _emit(cfg, report.to_json(), report.rows)
    return _report_exit(report)


def cmd_ac_check(cfg: RunConfig) -> int:
    F = _model(cfg.spec)
    E = _point_set(cfg.points, F)
    report = ac_check(F, E, cfg.epsilon if cfg.epsilon else 1.0, _etas(cfg), cfg.budget)
    _emit(cfg, report.to_json(), report.rows)
    return _report_exit(report)


def cmd_hkr_check(cfg: RunConfig) -> int:
    F = _model(cfg.spec)
    f = _model(cfg.f_spec, "--f-spec")
    report = hkr_check(F, f, cfg.epsilon if cfg.epsilon else 1e-3, _gauges(cfg.gauge),
                       cfg.trials, r=_floats(cfg.r)[0], seed=cfg.seed, max_depth=cfg.depth_cap)
    _emit(cfg, report.to_json(), report.rows)
    return _report_exit(report)


# ---------------------------------------------------------------------------
# parser


def _common(p: argparse.ArgumentParser, *names: str):
    helps = {
        "spec": "function spec: inline JSON, a JSON file, or 'counterexample'",
        "f_spec": "spec of the candidate derivative f (hkr-check, partition check)",
        "points": "points: comma list or JSON list; for the counterexample also "
                  "'perfect:L' and 'gapmid:A..B' joined with '+'",
        "r": "exponent(s) r >= 1, comma-separated where several are allowed",
        "h0": "largest scale of the h grid", "q": "ratio of the h grid",
        "count": "number of scales", "alpha_tol": "alpha resolution",
        "eta": "comma list of total-length bounds", "epsilon": "threshold",
        "gauge": "gauge: a number, comma list of numbers, or JSON constant/piecewise spec(s)",
        "trials": "random partitions per gauge", "budget": "candidate intervals per search",
        "seed": "random seed", "n": "levels: 'a..b', 'a-b' or comma list",
        "partition": "partition JSON (inline or file) of {lo, hi, tag} items",
        "domain": "interval 'lo,hi'", "tol": "relative tolerance on the bound",
        "depth_cap": "counterexample depth cap / bisection depth",
    }
    types = {"h0": float, "q": float, "count": int, "alpha_tol": float, "epsilon": float,
             "trials": int, "budget": int, "seed": int, "tol": float, "depth_cap": int}
    for name in names:
        p.add_argument("--" + name.replace("_", "-"), dest=name, type=types.get(name, str),
                       default=None, help=helps[name])
    p.add_argument("--out", default=None, help="output file (default stdout)")
    p.add_argument("--format", choices=("json", "csv"), default=None, help="output format")
    p.add_argument("--config", default=None, help="JSON file (or inline JSON) of settings")


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="gaugecalc",
                                     description="L^r derivates, gauge partitions and checks.")
    parser.add_argument("--version", action="version", version=f"%(prog)s {__version__}")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("derivate", help="four L^r derivates and the L^r-derivative at points")
    _common(p, "spec", "points", "r", "h0", "q", "count", "alpha_tol")

    p = sub.add_parser("counterexample", help="tables and checks for the counterexample")
    act = p.add_subparsers(dest="action", required=True)
    _common(act.add_parser("build", help="level lengths in exact rationals"), "n")
    _common(act.add_parser("verify", help="divergence bound rows"), "n", "r", "tol",
            "depth_cap")

    p = sub.add_parser("partition", help="Cousin partitions and partition checks")
    act = p.add_subparsers(dest="action", required=True)
    _common(act.add_parser("cousin", help="a fine tiling for a gauge"), "gauge", "domain",
            "spec", "depth_cap")
    _common(act.add_parser("check", help="fineness, nonoverlap, tiling and sums"), "partition",
            "gauge", "domain", "spec", "f_spec", "r")

    _common(sub.add_parser("acr-check", help="AC_r attack on a point set"), "spec", "points", "r",
            "epsilon", "eta", "gauge", "budget", "seed")
    _common(sub.add_parser("ac-check", help="classical AC attack on a point set"), "spec",
            "points", "epsilon", "eta", "budget")
    _common(sub.add_parser("hkr-check", help="HK_r primitive probe"), "spec", "f_spec", "r",
            "epsilon", "gauge", "trials", "seed", "depth_cap")
    return parser


COMMANDS = {
    "derivate": cmd_derivate,
    "counterexample": cmd_counterexample,
    "partition": cmd_partition,
    "acr-check": cmd_acr_check,
    "ac-check": cmd_ac_check,
    "hkr-check": cmd_hkr_check,
}


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        cfg = RunConfig.from_sources(args)
        if cfg.depth_cap is None:
            cfg.depth_cap = DEFAULT_DEPTH_CAP if args.command == "counterexample" \
                else DEFAULT_MAX_DEPTH
        return COMMANDS[args.command](cfg)
    except ResourceError as exc:
        print(f"gaugecalc: {exc}", file=sys.stderr)
        return 1
    except (GaugeCalcError, ValueError, TypeError, KeyError) as exc:
        print(f"gaugecalc: error: {exc}", file=sys.stderr)
        return 2


if __name__ == "__main__":  # pragma: no cover
    sys.exit(main())
