"""Lower and upper bounds on the spectral gap and the qualitative gap criteria.

Every function returns a :class:`BoundResult` or a :class:`Verdict`.  Vacuous
outcomes (a divergent inner integral, an undecided tail) are values, not
exceptions: a lower bound degrades to 0 and an upper bound to ``+inf``, with
the reason recorded in ``flags`` and ``diagnostics``.

Each result also records which eigenvalue it bounds (``quantity``): the
spectral gap ``lambda1``, the exterior Dirichlet eigenvalue ``lambda_c`` or
the Neumann eigenvalue of a ball ``lambda_R``.  Ordering checks only compare
like with like.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Callable, Optional, Sequence, Union

import numpy as np

from .profile import RadialFunction, RadializedCoefficients, family
from .quad import (
    CumulativeC,
    NestedIntegral,
    QuadratureSettings,
    cumulative_C,
    log_tail_integral,
    make_log_weight,
)

__all__ = [
    "BoundResult",
    "Verdict",
    "CITATIONS",
    "golden_section_min",
    "lower_radial",
    "lower_1d_eq16",
    "search_test_function",
    "criterion_cor13a",
    "criterion_cor13b",
    "verdict_cor14",
    "lower_eq28",
    "lambda_R_eq27",
    "combine_eq13",
    "upper_eq12",
    "upper_eq17",
    "upper_thm32",
]

CITATIONS = {
    "thm12": "lambda_c(r0) >= inf_t f(t) / int_r0^t exp(-C(r)) dr int_r^inf exp(C(s)) f(s) ds",
    "thm31": "lambda_c(r0) >= inf_t f(t) / int_r0^t exp(-C(r)) dr int_r^inf exp(C(s)) f(s)/alpha(s) ds",
    "eq16": "lambda1 >= inf_t f'(t) exp(C(t)) / int_t^inf exp(C(s)) f(s) ds  (half-line, f' > 0)",
    "eq13": "lambda1 >= sup_R [lc lR mu(B_R)(R-r)^2 - 2 lR (1-mu(B_R))]"
            " / [2 lR (R-r)^2 + lc (R-r)^2 mu(B_R) + 2 mu(B_R)]",
    "eq27": "lambda(R) >= (pi^2/8) K / (exp(K R^2/2) - 1)  when Ric - Hess V >= -K",
    "eq28": "lambda_c(r) >= beta(r)^2/4,  beta(r) = inf_{s>=r} (-gamma(s))^+",
    "eq12": "lambda1 <= lambda_c(r) / mu(B_r)",
    "eq17": "lambda1 <= (1/4) sup{eps^2 : mu(exp(eps rho)) < inf}",
    "thm32": "lambda1 <= (1/4) sup{eps^2 : mu(exp(eps h)) < inf},  h(r) = int_0^r beta^(-1/2)",
    "cor13a": "gap if sup_t exp(-C(t)) int_t^inf exp(C(s)) ds < inf",
    "cor13b": "gap if int_r0^inf (gamma + eps)^+ dr < inf for some eps > 0",
    "cor14": "gap if limsup gamma < 0; no gap if liminf gamma >= 0 and the origin is a pole",
}

# quantities a BoundResult may refer to
LAMBDA1, LAMBDA_C, LAMBDA_R = "lambda1", "lambda_c", "lambda_R"

# exponential moments are probed out to this radius
MOMENT_HORIZON = 1.0e5
# exponential rates below this are indistinguishable from zero on MOMENT_HORIZON
EPS_FLOOR = 1.0e-3
# a ratio still falling at the horizon is followed out to this multiple of it
EXTENSION_FACTOR = 16.0


@dataclass(frozen=True, eq=False)
class BoundResult:
    """One bound.  ``value`` is ``>= 0``; lower bounds are finite."""

    direction: str
    value: float
    method: str
    citation: str = ""
    quantity: str = LAMBDA1
    error_estimate: float = 0.0
    flags: tuple = ()
    diagnostics: dict = field(default_factory=dict)

    def __post_init__(self):
        if self.direction not in ("lower", "upper"):
            raise ValueError(f"direction must be 'lower' or 'upper', got {self.direction!r}")
        if math.isnan(self.value) or self.value < 0:
            raise ValueError(f"bound value must be a nonnegative number, got {self.value!r}")
        if self.direction == "lower" and not math.isfinite(self.value):
            raise ValueError("lower bounds must be finite")
        if not self.citation:
            object.__setattr__(self, "citation", CITATIONS.get(self.method, ""))

    @property
    def vacuous(self) -> bool:
        return (self.direction == "lower" and self.value == 0) or math.isinf(self.value)

    @property
    def inconclusive(self) -> bool:
        return "inconclusive" in self.flags


@dataclass(frozen=True, eq=False)
class Verdict:
    outcome: str
    reason: str
    method: str = ""
    supporting: tuple = ()
    diagnostics: dict = field(default_factory=dict)

    def __post_init__(self):
        if self.outcome not in ("gap_exists", "no_gap", "inconclusive"):
            raise ValueError(f"unknown verdict outcome {self.outcome!r}")


# ---------------------------------------------------------------------------


def golden_section_min(fn: Callable[[float], float], a: float, b: float,
                       xtol: float = 1e-10, max_evals: int = 200):
    """Minimize a unimodal ``fn`` on ``[a, b]``.

    Returns ``(x, fx, trace)`` where ``trace`` lists every ``(x, fx)`` pair
    evaluated, in order.
    """
    invphi = (math.sqrt(5.0) - 1.0) / 2.0
    trace = []

    def ev(x):
        y = float(fn(x))
        trace.append((x, y))
        return y

    c = b - invphi * (b - a)
    d = a + invphi * (b - a)
    fc, fd = ev(c), ev(d)
    while abs(b - a) > xtol * max(1.0, abs(a) + abs(b)) and len(trace) < max_evals:
        if fc <= fd:
            b, d, fd = d, c, fc
            c = b - invphi * (b - a)
            fc = ev(c)
        else:
            a, c, fc = c, d, fd
            d = a + invphi * (b - a)
            fd = ev(d)
    x, y = min(trace, key=lambda p: p[1])
    return x, y, trace


def _scan_points(r0: float, horizon: float, n: int = 64) -> np.ndarray:
    return r0 + (horizon - r0) * np.geomspace(1e-4, 1.0, n)


def _minimize_on_scan(log_ratio: Callable, r0: float, horizon: float, n: int = 64):
    """Log-spaced scan then golden-section refinement between the scan
    neighbours of the smallest value.  Returns ``(t*, value, scan_t, scan_v)``."""
    ts = _scan_points(r0, horizon, n)
    vals = np.asarray(log_ratio(ts), dtype=float)
    k = int(np.argmin(vals))
    lo = ts[k - 1] if k > 0 else r0 + 0.5 * (ts[0] - r0)
    hi = ts[k + 1] if k + 1 < len(ts) else ts[k]
    best_t, best_v = float(ts[k]), float(vals[k])
    if hi > lo:
        t, v, _ = golden_section_min(lambda x: float(log_ratio(np.array([x]))[0]), lo, hi, xtol=1e-9)
        if v < best_v:
            best_t, best_v = t, v
    return best_t, best_v, ts, vals


def _horizon(settings: QuadratureSettings, C: CumulativeC, horizon: Optional[float]) -> float:
    if horizon is not None:
        return float(horizon)
    return settings.horizon(C.horizon)


def _is_unit(alpha) -> bool:
    return alpha is None or (isinstance(alpha, RadialFunction) and alpha.is_constant(1.0, 0.5, 10.0))


def _beyond_horizon(make_log_ratio: Callable, H: float, log_val: float, diag: dict, flags: list):
    """Follow a ratio that is still falling at the horizon out to ``16 H``.

    ``make_log_ratio(horizon)`` returns the log ratio tabulated up to
    ``horizon`` (or ``None`` if the inner tail stops converging).  The result
    is the smallest of the scanned minimum, the ratios at ``H, 2H, .., 16H``
    and their ``A + B/t`` extrapolation to ``t -> inf``.
    """
    far = EXTENSION_FACTOR * H
    log_ratio = make_log_ratio(far)
    if log_ratio is None:
        flags.append("inconclusive")
        diag["reason"] = "inner tail stops converging beyond the horizon"
        return log_val
    ts = H * 2.0 ** np.arange(int(round(math.log2(EXTENSION_FACTOR))) + 1)
    ratios = np.exp(np.asarray(log_ratio(ts), dtype=float))
    scan = np.exp(np.asarray(log_ratio(np.geomspace(H, far, 33)), dtype=float))
    limit = max(2.0 * ratios[-1] - ratios[-2], 0.0)
    value = min(math.exp(log_val), float(np.min(ratios)), float(np.min(scan)), limit)
    diag.update({"tail_t": ts, "tail_ratio": ratios, "tail_limit": limit})
    flags.append("extrapolated beyond horizon")
    if value <= 0:
        return -math.inf
    return math.log(value)


def _still_falling(ts: np.ndarray, vals: np.ndarray, t_star: float, tol: float) -> bool:
    """True when the scanned minimum sits at the last scan point and the
    ratio has not yet levelled off there."""
    if t_star < ts[-2]:
        return False
    return vals[-2] - vals[-1] > tol


def lower_radial(C: CumulativeC, alpha: Optional[RadialFunction], f: RadialFunction, r0: float,
                 settings: QuadratureSettings = QuadratureSettings(),
                 horizon: Optional[float] = None, quantity: Optional[str] = None,
                 nested: Optional[NestedIntegral] = None, extrapolate: bool = True) -> BoundResult:
    """``inf_t f(t) / F(t)`` over ``t >= r0``.

    ``F`` is the nested integral with inner weight ``f/alpha``; ``alpha=None``
    means ``alpha = 1``.  The bound is on the exterior eigenvalue at ``r0``;
    at ``r0 = 0`` on the half-line it also bounds the spectral gap, which is
    the default ``quantity`` there.

    The ratio is scanned on ``[r0, horizon]``.  If it is still decreasing at
    the horizon and ``extrapolate`` is set, it is followed further and its
    limit estimated (see :func:`_beyond_horizon`), so a slowly decaying ratio
    does not overstate the infimum.
    """
    H = _horizon(settings, C, horizon)
    method = "thm12" if _is_unit(alpha) else "thm31"
    if quantity is None:
        quantity = LAMBDA1 if r0 == 0 else LAMBDA_C
    if nested is None:
        nested = NestedIntegral(C, make_log_weight(f, alpha), r0, H, settings)
    diag = {
        "test_function": repr(f),
        "horizon": H,
        "panels": nested.panels,
        "inner_tail": nested.tail.status,
    }
    flags = list(nested.flags)
    if nested.divergent:
        diag["reason"] = "inner integral diverges for this test function"
        return BoundResult("lower", 0.0, method, quantity=quantity, flags=tuple(flags + ["divergent"]),
                           diagnostics=diag)
    if nested.truncated:
        diag["reason"] = "inner tail undecided at the horizon"
        return BoundResult("lower", 0.0, method, quantity=quantity,
                           flags=tuple(flags + ["truncated", "inconclusive"]), diagnostics=diag)

    def log_ratio(t):
        return np.asarray(f.log(t), dtype=float) - nested.log_F(t)

    t_star, log_val, ts, vals = _minimize_on_scan(log_ratio, r0, H)
    diag.update({"t_star": t_star, "scan_t": ts, "scan_log_ratio": vals})
    if _still_falling(ts, vals, t_star, 10 * settings.rel_tol):
        flags.append("minimum at horizon")
        if extrapolate:
            def extended(far):
                wide = NestedIntegral(C, make_log_weight(f, alpha), r0, far, settings)
                if wide.divergent or wide.truncated:
                    return None
                return lambda t: np.asarray(f.log(t), dtype=float) - wide.log_F(t)

            log_val = _beyond_horizon(extended, H, log_val, diag, flags)
    return BoundResult("lower", float(math.exp(log_val)), method, quantity=quantity,
                       error_estimate=10 * settings.rel_tol * math.exp(log_val),
                       flags=tuple(flags), diagnostics=diag)


def lower_1d_eq16(C: CumulativeC, f: RadialFunction,
                  settings: QuadratureSettings = QuadratureSettings(),
                  horizon: Optional[float] = None) -> BoundResult:
    """Half-line bound ``inf_t f'(t) exp(C(t)) / int_t^inf exp(C) f``; needs ``f' > 0``."""
    H = _horizon(settings, C, horizon)
    r0 = C.r0
    df = f.derivative()
    probe = np.concatenate([[r0], _scan_points(r0, H, 256)])
    slope = np.asarray(df(probe), dtype=float)
    if not np.all(slope > 0):
        raise ValueError("test function must be strictly increasing (f' > 0)")
    nested = NestedIntegral(C, make_log_weight(f), r0, H, settings)
    diag = {"test_function": repr(f), "horizon": H, "inner_tail": nested.tail.status}
    if nested.divergent or nested.truncated:
        flag = "divergent" if nested.divergent else "truncated"
        extra = ("inconclusive",) if nested.truncated else ()
        return BoundResult("lower", 0.0, "eq16", flags=(flag,) + extra, diagnostics=diag)

    def log_slope(t):
        # log f' = log f + log(f'/f); stays finite where f' itself overflows
        return np.asarray(f.log(t), dtype=float) + np.log(np.asarray(f.dlog(t), dtype=float))

    def log_ratio(t):
        t = np.asarray(t, dtype=float)
        return log_slope(t) + C(t) - nested.log_inner(t)

    ts = np.concatenate([[r0], _scan_points(r0, H, 63)])
    vals = log_ratio(ts)
    k = int(np.argmin(vals))
    best_t, best_v = float(ts[k]), float(vals[k])
    lo, hi = ts[max(k - 1, 0)], ts[min(k + 1, len(ts) - 1)]
    if hi > lo:
        t, v, _ = golden_section_min(lambda x: float(log_ratio(np.array([x]))[0]), lo, hi, xtol=1e-9)
        if v < best_v:
            best_t, best_v = t, v
    diag["t_star"] = best_t
    flags = []
    if _still_falling(ts, vals, best_t, 10 * settings.rel_tol):
        flags.append("minimum at horizon")

        def extended(far):
            wide = NestedIntegral(C, make_log_weight(f), r0, far, settings)
            if wide.divergent or wide.truncated:
                return None
            return lambda t: log_slope(t) + wide.C(np.asarray(t, dtype=float)) - wide.log_inner(t)

        best_v = _beyond_horizon(extended, H, best_v, diag, flags)
    value = math.exp(best_v)
    return BoundResult("lower", value, "eq16", flags=tuple(flags), error_estimate=10 * settings.rel_tol * value,
                       diagnostics=diag)


def search_test_function(C: CumulativeC, alpha: Optional[RadialFunction], r0: float,
                         family_name: Union[str, Callable[[float], RadialFunction]] = "exponential",
                         budget: int = 40, theta_range: tuple = (0.01, 4.0),
                         settings: QuadratureSettings = QuadratureSettings(),
                         horizon: Optional[float] = None,
                         quantity: Optional[str] = None) -> BoundResult:
    """Best :func:`lower_radial` bound over a one-parameter family of test functions.

    ``family_name`` is ``"exponential"`` (``f = exp(theta t)``), ``"sqrt"``
    (a single function, no search) or a callable ``theta -> RadialFunction``.
    The search scans ``theta`` log-uniformly with half the budget, then spends
    the rest on golden-section refinement around the best scan point.
    """
    if budget < 8:
        raise ValueError("budget must be at least 8")
    if family_name == "sqrt":
        res = lower_radial(C, alpha, family("sqrt"), r0, settings, horizon, quantity)
        res.diagnostics["theta"] = None
        return res
    if family_name == "exponential":
        make = lambda th: family("exponential", theta=th)  # noqa: E731
    elif callable(family_name):
        make = family_name
    else:
        raise ValueError(f"unknown test-function family {family_name!r}")
    lo, hi = theta_range
    if not 0 < lo < hi:
        raise ValueError("theta_range must satisfy 0 < min < max")
    cache: dict = {}

    def run(log_theta: float) -> BoundResult:
        if log_theta not in cache:
            cache[log_theta] = lower_radial(C, alpha, make(math.exp(log_theta)), r0, settings, horizon,
                                            quantity, extrapolate=False)
        return cache[log_theta]

    def objective(log_theta: float) -> float:
        v = run(log_theta).value
        return -v

    n_scan = max(5, budget // 2)
    grid = np.linspace(math.log(lo), math.log(hi), n_scan)
    scores = [objective(float(x)) for x in grid]
    k = int(np.argmin(scores))
    remaining = budget - n_scan
    if remaining >= 2 and scores[k] < 0:
        a = grid[max(k - 1, 0)]
        b = grid[min(k + 1, n_scan - 1)]
        golden_section_min(objective, float(a), float(b), xtol=1e-12, max_evals=remaining)
    best_key = min(cache, key=lambda x: (-cache[x].value, x))
    best = cache[best_key]
    if "minimum at horizon" in best.flags:
        best = lower_radial(C, alpha, make(math.exp(best_key)), r0, settings, horizon, quantity)
    trace = sorted((math.exp(x), r.value) for x, r in cache.items())
    diag = dict(best.diagnostics)
    diag.update({"theta": math.exp(best_key), "theta_range": (lo, hi), "budget": budget,
                 "evaluations": len(cache), "trace": trace})
    flags = tuple(best.flags)
    if math.exp(best_key) >= hi * (1 - 1e-9) and best.value > 0:
        flags = flags + ("theta at upper end of range",)
    return BoundResult("lower", best.value, best.method, quantity=best.quantity,
                       error_estimate=best.error_estimate, flags=flags, diagnostics=diag)


# ---------------------------------------------------------------------------
# qualitative criteria


def criterion_cor13a(C: CumulativeC, settings: QuadratureSettings = QuadratureSettings(),
                     horizon: Optional[float] = None, n: int = 256) -> Verdict:
    """Boundedness of ``exp(-C(t)) int_t^inf exp(C(s)) ds`` on a log grid."""
    H = _horizon(settings, C, horizon)
    r0 = C.r0
    nested = NestedIntegral(C, lambda s: np.zeros_like(np.asarray(s, dtype=float)), r0, H, settings)
    if nested.divergent:
        return Verdict("inconclusive", "inner integral diverges", "cor13a")
    if nested.truncated:
        return Verdict("inconclusive", "inner tail undecided at the horizon", "cor13a")
    ts = np.concatenate([[r0], _scan_points(r0, H, n - 1)])
    log_ratio = nested.log_inner(ts) - C(ts)
    ratio = np.exp(log_ratio)
    quarter = ratio[-(n // 4):]
    trend = float(quarter[-1] / quarter[0]) if quarter[0] > 0 else math.inf
    diag = {"sup": float(np.max(ratio)), "trend_last_quarter": trend, "horizon": H}
    if trend > 1.01:
        return Verdict("inconclusive", "ratio still growing at the horizon", "cor13a", diagnostics=diag)
    return Verdict("gap_exists", f"ratio bounded by {diag['sup']:.6g}", "cor13a", diagnostics=diag)


def criterion_cor13b(gamma: RadialFunction, eps: float, r0: float = 1.0,
                     settings: QuadratureSettings = QuadratureSettings(),
                     horizon: Optional[float] = None) -> Verdict:
    """Finiteness of ``int_{r0}^inf (gamma + eps)^+``."""
    if eps <= 0:
        raise ValueError("eps must be positive")
    H = settings.horizon() if horizon is None else float(horizon)

    def log_g(s):
        v = np.maximum(np.asarray(gamma(s), dtype=float) + eps, 0.0)
        with np.errstate(divide="ignore"):
            return np.log(v)

    tail = log_tail_integral(log_g, r0, settings, H)
    diag = {"eps": eps, "tail_status": tail.status, "integral": tail.value}
    if tail.status == "converged":
        return Verdict("gap_exists", f"integral of (gamma+eps)^+ is {tail.value:.6g}", "cor13b",
                       diagnostics=diag)
    return Verdict("inconclusive", f"integral of (gamma+eps)^+ is {tail.status} for this eps", "cor13b",
                   diagnostics=diag)


def _limit_estimates(fn: RadialFunction, H: float, n: int = 257):
    """Estimate ``(limsup, liminf)`` of ``fn`` from the window ``[H/2, H]``.

    A fit ``A + B/r`` that matches the window to 1e-6 extrapolates both to
    ``A``; otherwise the window max and min are used.
    """
    r = np.linspace(H / 2, H, n)
    y = np.asarray(fn(r), dtype=float)
    design = np.column_stack([np.ones_like(r), 1.0 / r])
    coef, *_ = np.linalg.lstsq(design, y, rcond=None)
    resid = float(np.max(np.abs(design @ coef - y)))
    if resid <= 1e-6 * (1.0 + abs(coef[0])):
        return float(coef[0]), float(coef[0]), True
    return float(np.max(y)), float(np.min(y)), False


def verdict_cor14(gamma: RadialFunction, gamma_inf: Optional[RadialFunction] = None,
                  pole_assumption: bool = False, horizon: float = 1.0e4,
                  tol: float = 1e-8) -> Verdict:
    """Gap from a negative limsup of ``gamma``; no gap from a nonnegative
    liminf when the caller asserts the origin is a pole."""
    gamma_inf = gamma if gamma_inf is None else gamma_inf
    limsup, _, fit_sup = _limit_estimates(gamma, horizon)
    _, liminf, fit_inf = _limit_estimates(gamma_inf, horizon)
    diag = {"limsup": limsup, "liminf": liminf, "fitted": fit_sup and fit_inf, "horizon": horizon,
            "pole_assumption": pole_assumption}
    if limsup < -tol:
        return Verdict("gap_exists", f"limsup gamma = {limsup:.6g} < 0", "cor14", diagnostics=diag)
    if pole_assumption and liminf >= -tol:
        return Verdict("no_gap", f"liminf gamma = {liminf:.6g} >= 0 with a pole at the origin", "cor14",
                       diagnostics=diag)
    return Verdict("inconclusive", "limsup gamma >= 0 and the no-gap hypotheses do not hold", "cor14",
                   diagnostics=diag)


# ---------------------------------------------------------------------------
# closed-form bounds


def lower_eq28(gamma: RadialFunction, r: float, horizon: float = 1.0e4, n: int = 4096) -> BoundResult:
    """``beta(r)^2 / 4`` with ``beta(r) = inf_{s >= r} (-gamma(s))^+`` on a dense grid."""
    if horizon <= r:
        raise ValueError("horizon must exceed r")
    grid = np.unique(np.concatenate([
        np.linspace(r, horizon, n),
        r + (horizon - r) * np.geomspace(1e-8, 1.0, n),
    ]))
    g = np.asarray(gamma(grid), dtype=float)
    neg = np.maximum(-g, 0.0)
    beta = float(np.min(neg))
    diag = {"beta": beta, "r": r, "grid": len(grid), "horizon": horizon}
    flags = ()
    if neg[-1] <= beta and neg[-2] > neg[-1]:
        # -gamma still falling at the horizon: follow it out and use its fitted limit
        far = horizon * np.geomspace(1.0, 1e4, 257)[1:]
        with np.errstate(over="ignore", invalid="ignore"):
            g_far = np.asarray(gamma(far), dtype=float)
        finite = np.isfinite(g_far)
        if np.any(finite):
            beta = min(beta, float(np.min(np.maximum(-g_far[finite], 0.0))))
        limsup, _, fitted = _limit_estimates(gamma, horizon * 1e4)
        if fitted:
            beta = min(beta, max(-limsup, 0.0))
        diag.update({"beta": beta, "extended_to": float(far[-1]), "fitted_limit": limsup if fitted else None})
        flags = ("extrapolated beyond horizon",)
    return BoundResult("lower", beta * beta / 4.0, "eq28", quantity=LAMBDA_C, flags=flags, diagnostics=diag)


def lambda_R_eq27(K: float, R: float) -> BoundResult:
    """Neumann-ball bound under a curvature lower bound ``-K``."""
    if K < 0 or R <= 0:
        raise ValueError("need K >= 0 and R > 0")
    if K < 1e-10:
        value = math.pi**2 / (4.0 * R * R)
        flags = ("K -> 0 limit",)
    else:
        value = math.pi**2 / 8.0 * K / math.expm1(K * R * R / 2.0)
        flags = ()
    return BoundResult("lower", value, "eq27", quantity=LAMBDA_R, flags=flags,
                       diagnostics={"K": K, "R": R})


def combine_eq13(lambda_c: float, lambda_R: float, mu_BR: float, r: float, R: float) -> BoundResult:
    """Gap lower bound from the exterior eigenvalue at ``r`` and the Neumann
    eigenvalue of the ball of radius ``R``; negative values clamp to 0."""
    if not mu_BR > 0:
        raise ValueError("mu(B_R) must be positive")
    if mu_BR > 1 + 1e-12:
        raise ValueError("mu(B_R) cannot exceed 1")
    if not (lambda_c > 0 and lambda_R > 0):
        raise ValueError("lambda_c and lambda_R must be positive")
    if not R > r:
        raise ValueError("need R > r")
    L2 = (R - r) ** 2
    num = lambda_c * lambda_R * mu_BR * L2 - 2.0 * lambda_R * (1.0 - mu_BR)
    den = 2.0 * lambda_R * L2 + lambda_c * L2 * mu_BR + 2.0 * mu_BR
    raw = num / den
    diag = {"lambda_c": lambda_c, "lambda_R": lambda_R, "mu_BR": mu_BR, "r": r, "R": R, "raw": raw}
    if raw < 0:
        return BoundResult("lower", 0.0, "eq13", flags=("clamped",), diagnostics=diag)
    return BoundResult("lower", raw, "eq13", diagnostics=diag)


def upper_eq12(lambda_c: float, mu_Br: float) -> BoundResult:
    """``lambda_c(r) / mu(B_r)``."""
    if not mu_Br > 0:
        raise ValueError("mu(B_r) must be positive")
    if lambda_c < 0:
        raise ValueError("lambda_c must be nonnegative")
    return BoundResult("upper", lambda_c / mu_Br, "eq12", diagnostics={"lambda_c": lambda_c, "mu_Br": mu_Br})


def _moment_search(log_mu: Callable, weight: Callable, start: float,
                   settings: QuadratureSettings, eps_max: float, horizon: float):
    """Bisect for ``sup{eps : int exp(eps * weight) mu < inf}``.

    Undecided tails count as infinite, which can only lower ``eps*``.
    Returns ``(eps_star, finite_at_max, trace)``.
    """
    trace = []

    def finite(eps):
        def logg(s):
            return np.asarray(log_mu(s), dtype=float) + eps * np.asarray(weight(s), dtype=float)

        res = log_tail_integral(logg, start, settings, horizon)
        trace.append((eps, res.status))
        return res.status == "converged"

    if finite(eps_max):
        return math.inf, True, trace
    if not finite(EPS_FLOOR):
        return 0.0, False, trace
    lo, hi = EPS_FLOOR, eps_max
    while hi - lo > 1e-3 * hi:
        mid = 0.5 * (lo + hi)
        if finite(mid):
            lo = mid
        else:
            hi = mid
    return hi, False, trace


def _moment_bound(method: str, log_mu, weight, start, settings, eps_max, horizon, extra=None):
    eps_star, all_finite, trace = _moment_search(log_mu, weight, start, settings, eps_max, horizon)
    diag = {"eps_star": eps_star, "eps_max": eps_max, "moment_horizon": horizon, "trace": trace}
    if extra:
        diag.update(extra)
    if all_finite:
        return BoundResult("upper", math.inf, method, flags=("all moments finite",), diagnostics=diag)
    flags = ("no exponential moment",) if eps_star == 0 else ()
    return BoundResult("upper", eps_star**2 / 4.0, method, error_estimate=2e-3 * eps_star**2 / 4.0,
                       flags=flags, diagnostics=diag)


def upper_eq17(coeffs: RadializedCoefficients, settings: QuadratureSettings = QuadratureSettings(),
               eps_max: float = 100.0, horizon: float = MOMENT_HORIZON) -> BoundResult:
    """``eps*^2 / 4`` with ``eps*`` the exponential integrability threshold of ``mu``."""
    start = max(coeffs.r0, 1.0)
    return _moment_bound("eq17", coeffs.mu_density.log, lambda s: s, start, settings, eps_max, horizon)


def upper_thm32(beta: RadialFunction, coeffs: RadializedCoefficients,
                settings: QuadratureSettings = QuadratureSettings(),
                eps_max: float = 100.0, horizon: float = MOMENT_HORIZON) -> BoundResult:
    """As :func:`upper_eq17` with the distance replaced by ``h(r) = int_0^r beta^(-1/2)``."""
    start = max(coeffs.r0, 1.0)

    def inv_sqrt_beta(s):
        b = np.asarray(beta(s), dtype=float)
        if np.any(b <= 0):
            raise ValueError("beta must be positive")
        return 1.0 / np.sqrt(b)

    h = cumulative_C(inv_sqrt_beta, 0.0, horizon, settings)
    h_end = float(h(horizon))
    return _moment_bound("thm32", coeffs.mu_density.log, h, start, settings, eps_max, horizon,
                         {"h_at_horizon": h_end})
