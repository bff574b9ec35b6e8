"""Run a configured problem end to end and render the results.

Stages: radialize the problem, evaluate the selected bounds and criteria,
run the finite-volume oracle, and compare the two.  A vacuous or
inconclusive bound is recorded, never raised.
"""

from __future__ import annotations

import csv
import io
import math
from dataclasses import dataclass, field
from pathlib import Path
from typing import Optional

import numpy as np

from . import __version__
from .bounds import (
    LAMBDA1,
    LAMBDA_C,
    BoundResult,
    Verdict,
    combine_eq13,
    criterion_cor13a,
    criterion_cor13b,
    lambda_R_eq27,
    lower_1d_eq16,
    lower_eq28,
    lower_radial,
    search_test_function,
    upper_eq12,
    upper_eq17,
    upper_thm32,
    verdict_cor14,
)
from .config import ExprValue, FamilyValue, RunConfig, to_function
from .oracle import (
    discretize,
    lambda1_discrete,
    lambda_c_discrete,
    lambda_R_discrete,
    mu_ball_discrete,
    truncation_drift,
)
from .profile import RadialFunction, family, mu_ball, radialize
from .quad import NestedIntegral, cumulative_C, make_log_weight

__all__ = ["Check", "Report", "run_pipeline", "emit_report", "render", "CSV_COLUMNS"]

CSV_COLUMNS = ("method", "direction", "value", "citation", "error_estimate", "flags")
ORDER_SLACK = 0.03
PLOT_SAMPLES = 512
STAGES = ("bounds", "oracle", "check")


@dataclass(frozen=True)
class Check:
    name: str
    passed: bool
    detail: str


@dataclass
class Report:
    config: RunConfig
    verdict: Verdict
    bounds: list = field(default_factory=list)
    criteria: list = field(default_factory=list)
    oracle: Optional[dict] = None
    checks: list = field(default_factory=list)
    notes: list = field(default_factory=list)
    provenance: dict = field(default_factory=dict)
    # for plot data: coefficients, C, and the best test function
    context: dict = field(default_factory=dict)

    def by_method(self, method: str) -> list:
        return [b for b in self.bounds if b.method == method]


def _fmt(x: float) -> str:
    if isinstance(x, float) and math.isinf(x):
        return "inf" if x > 0 else "-inf"
    return "%.17g" % x


def _test_function_label(spec) -> str:
    if isinstance(spec, ExprValue):
        return spec.canonical()
    if isinstance(spec, FamilyValue):
        return spec.canonical()
    return str(spec)


def _search(C, alpha, r0, spec, cfg, settings) -> BoundResult:
    b = cfg.bounds
    if spec == "exponential":
        lo, hi = b.theta_min, b.theta_max
        res = search_test_function(C, alpha, r0, "exponential", b.budget, (lo, hi), settings)
        # the optimum may sit beyond the configured range; widen a few times
        for _ in range(3):
            if "theta at upper end of range" not in res.flags:
                break
            hi *= 4.0
            res = search_test_function(C, alpha, r0, "exponential", b.budget, (lo, hi), settings)
        return res
    if spec == "sqrt":
        return search_test_function(C, alpha, r0, "sqrt", b.budget, settings=settings)
    f = to_function(spec)
    res = lower_radial(C, alpha, f, r0, settings)
    res.diagnostics["test_function"] = _test_function_label(spec)
    return res


def run_pipeline(config: RunConfig, stages=STAGES) -> Report:
    """Execute the configured run; ``stages`` is a subset of bounds, oracle, check."""
    stages = set(stages)
    if "check" in stages:
        stages |= {"bounds", "oracle"}
    problem = config.problem.build()
    coeffs = radialize(problem)
    settings = config.settings()
    H = settings.tail_horizon
    r0 = problem.r0
    R_max = problem.R_max
    bcfg = config.bounds
    unit_alpha = coeffs.alpha.is_constant(1.0, r0, R_max)
    main = "thm12" if unit_alpha else "thm31"
    two_sided = problem.d == 1
    notes = []
    bounds: list = []
    criteria: list = []
    context = {"coeffs": coeffs, "r0": r0, "horizon": H}

    C = cumulative_C(coeffs.gamma, r0, H, settings)
    context["C"] = C

    oracle = None
    op = None
    if "oracle" in stages and config.oracle.enabled:
        R_o = config.oracle.R_max or R_max
        op = discretize(coeffs, R_o, config.oracle.n, grid=config.oracle.grid)
        oracle = {"n": config.oracle.n, "R_max": R_o, "lambda1": lambda1_discrete(op)}
        if r0 > 0:
            oracle["lambda_c_r0"] = lambda_c_discrete(op, r0)
        if config.oracle.doubling_check:
            oracle["truncation"] = truncation_drift(coeffs, config.oracle.n, R_o)
        if not two_sided:
            notes.append("oracle covers the radial sector only; upper bounds are not checked against it")

    if "bounds" in stages:
        best_exp = None
        if bcfg.enabled(main) or bcfg.enabled("thm12") or bcfg.enabled("thm31"):
            for spec in bcfg.test_functions:
                res = _search(C, None if unit_alpha else coeffs.alpha, r0, spec, config, settings)
                bounds.append(res)
                if spec == "exponential":
                    best_exp = res
            best = max((b for b in bounds if b.method == main), key=lambda b: b.value, default=None)
            if best is not None:
                context["best_test_function"] = best.diagnostics.get("test_function")
                context["best_theta"] = best.diagnostics.get("theta")

        if bcfg.enabled("eq16") and problem.kind == "half_line" and unit_alpha:
            theta = best_exp.diagnostics.get("theta") if best_exp is not None else None
            theta = theta or 0.5
            try:
                bounds.append(lower_1d_eq16(C, family("exponential", theta=theta), settings))
            except ValueError as exc:
                notes.append(f"eq16 skipped: {exc}")

        if bcfg.enabled("eq28"):
            bounds.append(lower_eq28(coeffs.gamma, r0, horizon=H))

        lam_R_source = None
        if bcfg.K is not None and bcfg.enabled("eq27"):
            lam_R_source = "eq27"
        elif op is not None:
            lam_R_source = "oracle"
        if bcfg.enabled("eq13"):
            if lam_R_source is None:
                notes.append("eq13 skipped: needs K or the oracle for lambda(R)")
            else:
                res = _combine(coeffs, C, config, settings, op, lam_R_source, bounds)
                if res is not None:
                    bounds.extend(res)
        elif bcfg.K is not None and bcfg.enabled("eq27"):
            bounds.append(lambda_R_eq27(bcfg.K, R_max / 2))

        if bcfg.enabled("eq12") and op is not None:
            bounds.append(_upper_eq12_grid(op, r0))

        if bcfg.enabled("eq17") and unit_alpha:
            bounds.append(upper_eq17(coeffs, settings))
        if bcfg.enabled("thm32") and (not unit_alpha or (bcfg.methods and "thm32" in bcfg.methods)):
            bounds.append(upper_thm32(coeffs.beta, coeffs, settings))

        if unit_alpha:
            if bcfg.enabled("cor13a"):
                criteria.append(criterion_cor13a(C, settings))
            if bcfg.enabled("cor13b"):
                criteria.append(criterion_cor13b(coeffs.gamma, bcfg.eps, r0, settings, H))
            if bcfg.enabled("cor14"):
                criteria.append(verdict_cor14(coeffs.gamma, pole_assumption=bcfg.pole, horizon=H))
        elif any(bcfg.enabled(m) and bcfg.methods is not None for m in ("cor13a", "cor13b", "cor14")):
            notes.append("drift criteria skipped: they assume unit radial diffusion")

    checks = _ordering_checks(bounds, oracle, two_sided) if "check" in stages else []
    verdict = _verdict(bounds, criteria)
    provenance = {
        "digest": config.digest(),
        "version": __version__,
        "rel_tol": settings.rel_tol,
        "tail_horizon": settings.tail_horizon,
        "source": config.source,
    }
    return Report(config, verdict, bounds, criteria, oracle, checks, notes, provenance, context)


def _combine(coeffs, C, config, settings, op, source, bounds):
    """Maximize the combined bound over an R grid.  Returns result rows."""
    bcfg = config.bounds
    r0 = coeffs.r0
    R_top = op.nodes[-1] if op is not None else coeffs.R_max
    r = bcfg.eq13_r if bcfg.eq13_r is not None else (r0 if r0 > 0 else min(1.0, R_top / 10))
    # exterior eigenvalue at r: the best rigorous lower bound available there
    if r == r0:
        cands = [b.value for b in bounds if b.quantity == LAMBDA_C and b.direction == "lower"]
        if r0 == 0:
            cands += [b.value for b in bounds if b.method in ("thm12", "thm31")]
    else:
        C_r = cumulative_C(coeffs.gamma, r, settings.tail_horizon, settings)
        alpha = None if coeffs.alpha.is_constant(1.0, r, coeffs.R_max) else coeffs.alpha
        found = search_test_function(C_r, alpha, r, "exponential", bcfg.budget,
                                     (bcfg.theta_min, bcfg.theta_max), settings)
        cands = [found.value, lower_eq28(coeffs.gamma, r, horizon=settings.tail_horizon).value]
    lam_c = max(cands, default=0.0)
    if not lam_c > 0:
        return None
    rows = []
    best = None
    Rs = np.linspace(r, R_top, bcfg.R_grid + 1)[1:]
    for R in Rs:
        if source == "eq27":
            lam_R = lambda_R_eq27(bcfg.K, float(R)).value
            mu = mu_ball(coeffs, float(R))
        else:
            try:
                lam_R = lambda_R_discrete(op, float(R))
            except ValueError:
                continue
            mu = mu_ball_discrete(op, float(R))
        if not (lam_R > 0 and mu > 0):
            continue
        res = combine_eq13(lam_c, lam_R, mu, r, float(R))
        if best is None or res.value > best[0].value:
            best = (res, lam_R, float(R))
    if best is None:
        return None
    res, lam_R, R = best
    flags = list(res.flags)
    if source == "oracle":
        flags.append("oracle-supplied")
    diag = dict(res.diagnostics)
    diag.update({"lambda_R_source": source, "R_grid": len(Rs)})
    rows.append(BoundResult("lower", res.value, "eq13", quantity=LAMBDA1, flags=tuple(flags),
                            diagnostics=diag))
    if source == "eq27":
        rows.append(lambda_R_eq27(bcfg.K, R))
    return rows


def _upper_eq12_grid(op, r0) -> BoundResult:
    """Smallest oracle-supplied quotient lambda_c(r) / mu(B_r) over an r grid."""
    R_top = op.nodes[-1]
    best = None
    for r in np.geomspace(max(r0, R_top / 200), R_top / 2, 16):
        mu = mu_ball_discrete(op, float(r))
        if mu <= 0:
            continue
        res = upper_eq12(lambda_c_discrete(op, float(r)), mu)
        if best is None or res.value < best[0].value:
            best = (res, float(r))
    res, r = best
    diag = dict(res.diagnostics, r=r)
    return BoundResult("upper", res.value, "eq12", flags=("oracle-supplied",), diagnostics=diag)


def _ordering_checks(bounds, oracle, two_sided) -> list:
    if oracle is None:
        return [Check("oracle", False, "oracle disabled; ordering not checked")]
    lam1 = oracle["lambda1"]
    out = []
    for b in bounds:
        if b.direction == "lower" and b.quantity == LAMBDA1:
            ok = b.value <= lam1 * (1 + ORDER_SLACK)
            out.append(Check(f"{b.method} lower <= oracle lambda1", ok, f"{_fmt(b.value)} vs {_fmt(lam1)}"))
        elif b.direction == "lower" and b.quantity == LAMBDA_C and "lambda_c_r0" in oracle:
            lc = oracle["lambda_c_r0"]
            ok = b.value <= lc * (1 + ORDER_SLACK)
            out.append(Check(f"{b.method} lower <= oracle lambda_c(r0)", ok, f"{_fmt(b.value)} vs {_fmt(lc)}"))
        elif b.direction == "upper" and two_sided and math.isfinite(b.value):
            ok = lam1 <= b.value * (1 + ORDER_SLACK)
            out.append(Check(f"oracle lambda1 <= {b.method} upper", ok, f"{_fmt(lam1)} vs {_fmt(b.value)}"))
    if "truncation" in oracle:
        t = oracle["truncation"]
        out.append(Check("truncation drift < 1%", bool(t["ok"]), f"drift {t['drift']:.3g}"))
    return out


def _verdict(bounds, criteria) -> Verdict:
    gap = [b for b in bounds if b.direction == "lower" and b.value > 0 and not b.inconclusive
           and "oracle-supplied" not in b.flags and b.quantity in (LAMBDA1, LAMBDA_C)]
    gap_crit = [v for v in criteria if v.outcome == "gap_exists"]
    none = [v for v in criteria if v.outcome == "no_gap"]
    if (gap or gap_crit) and none:
        return Verdict("inconclusive", "conflicting evidence: positive bound and the no-gap criterion",
                       supporting=tuple(gap) + tuple(gap_crit) + tuple(none))
    if gap:
        top = max(gap, key=lambda b: (b.quantity == LAMBDA1, b.value))
        what = "spectral gap" if top.quantity == LAMBDA1 else "exterior eigenvalue"
        return Verdict("gap_exists", f"{top.method} gives a positive {what} lower bound {top.value:.6g}",
                       top.method, tuple(gap))
    if gap_crit:
        return Verdict("gap_exists", f"{gap_crit[0].method}: {gap_crit[0].reason}", gap_crit[0].method,
                       tuple(gap_crit))
    if none:
        return Verdict("no_gap", f"{none[0].method}: {none[0].reason}", none[0].method, tuple(none))
    return Verdict("inconclusive", "no positive lower bound and no satisfied criterion")


# ---------------------------------------------------------------------------
# rendering


def render(report: Report, fmt: str) -> str:
    if fmt == "text":
        return _render_text(report)
    if fmt == "csv":
        return _render_csv(report)
    if fmt == "plotdata":
        return _render_plot(report)
    raise ValueError(f"unknown format {fmt!r}")


def _render_text(report: Report) -> str:
    v = report.verdict
    lines = [f"Verdict: {v.outcome} ({v.reason})"]
    p = report.config.problem
    lines.append(f"Problem: {p.kind}, d = {p.d}, r0 = {p.r0:g}, R_max = {p.R_max:g}")
    if report.bounds:
        lines.append("")
        lines.append(f"{'method':<8} {'dir':<6} {'bounds':<9} {'value':>24}  flags")
        for b in report.bounds:
            flags = "; ".join(b.flags)
            extra = ""
            if b.diagnostics.get("theta") is not None:
                extra = f" theta={b.diagnostics['theta']:.6g}"
            elif b.diagnostics.get("test_function") and b.method in ("thm12", "thm31"):
                extra = f" f={b.diagnostics['test_function']}"
            lines.append(f"{b.method:<8} {b.direction:<6} {b.quantity:<9} {_fmt(b.value):>24}  {flags}{extra}")
    if report.criteria:
        lines.append("")
        for c in report.criteria:
            lines.append(f"{c.method:<8} {c.outcome:<13} {c.reason}")
    if report.oracle is not None:
        o = report.oracle
        lines.append("")
        lines.append(f"Oracle: lambda1 = {_fmt(o['lambda1'])} (n = {o['n']}, R_max = {o['R_max']:g})")
        if "lambda_c_r0" in o:
            lines.append(f"Oracle: lambda_c(r0) = {_fmt(o['lambda_c_r0'])}")
        if "truncation" in o:
            lines.append(f"Oracle: truncation drift {o['truncation']['drift']:.3g}")
    if report.checks:
        lines.append("")
        for c in report.checks:
            lines.append(f"{'PASS' if c.passed else 'FAIL'} {c.name}: {c.detail}")
    for n in report.notes:
        lines.append(f"Note: {n}")
    lines.append("")
    prov = report.provenance
    lines.append(f"Provenance: specgap {prov['version']}, config sha256 {prov['digest']}")
    return "\n".join(lines) + "\n"


def _render_csv(report: Report) -> str:
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(CSV_COLUMNS)
    for b in report.bounds:
        w.writerow([b.method, b.direction, _fmt(float(b.value)), b.citation, _fmt(float(b.error_estimate)),
                    ";".join(b.flags)])
    return buf.getvalue()


def plot_columns(report: Report, samples: int = PLOT_SAMPLES) -> dict:
    """Columns r, gamma(r), C(r) and the bound ratio f(t)/F(t) at t = r."""
    ctx = report.context
    coeffs, C, r0, H = ctx["coeffs"], ctx["C"], ctx["r0"], ctx["horizon"]
    r = r0 + (H - r0) * np.arange(1, samples + 1) / samples
    gamma = np.asarray(coeffs.gamma(r), dtype=float)
    c_vals = np.asarray(C(r), dtype=float)
    ratio = np.full(samples, np.nan)
    f = _best_function(report)
    if f is not None:
        alpha = None if coeffs.alpha.is_constant(1.0, r0, coeffs.R_max) else coeffs.alpha
        nested = NestedIntegral(C, make_log_weight(f, alpha), r0, H, report.config.settings())
        if nested.divergent:
            ratio[:] = 0.0
        else:
            ratio = np.exp(np.asarray(f.log(r), dtype=float) - nested.log_F(r))
    return {"r": r, "gamma": gamma, "C": c_vals, "ratio": ratio}


def _best_function(report: Report) -> Optional[RadialFunction]:
    theta = report.context.get("best_theta")
    label = report.context.get("best_test_function")
    if theta is not None:
        return family("exponential", theta=theta)
    if label is None:
        return None
    for spec in report.config.bounds.test_functions:
        if spec == "sqrt" and label.startswith("sqrt"):
            return family("sqrt")
        if _test_function_label(spec) == label:
            return to_function(spec)
    return None


def _render_plot(report: Report) -> str:
    cols = plot_columns(report)
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(["r", "gamma", "C", "ratio"])
    for row in zip(cols["r"], cols["gamma"], cols["C"], cols["ratio"]):
        w.writerow([_fmt(float(x)) for x in row])
    return buf.getvalue()


_FILENAMES = {"text": "report.txt", "csv": "bounds.csv", "plotdata": "plotdata.csv"}


def emit_report(report: Report, fmt: str = "text", out: Optional[str] = None) -> Optional[Path]:
    """Write the report in ``fmt`` under directory ``out``; print it when ``out`` is None."""
    text = render(report, fmt)
    if out is None:
        print(text, end="")
        return None
    d = Path(out)
    d.mkdir(parents=True, exist_ok=True)
    path = d / _FILENAMES[fmt]
    path.write_text(text)
    return path
