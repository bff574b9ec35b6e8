"""Radial coefficient profiles and reduction of problems to radial data.

Every bound formula consumes the same four radial profiles: the drift
profile ``gamma``, the inf/sup normalized diffusion ``alpha``/``beta`` and the
(unnormalized) density of the symmetrizing measure in ``r``.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from functools import cached_property
from typing import Callable, Optional, Union

import numpy as np

from . import expr as _expr

__all__ = [
    "RadialFunction",
    "ExpressionFunction",
    "FamilyFunction",
    "TableFunction",
    "CallableFunction",
    "FAMILIES",
    "family",
    "constant",
    "HalfLine",
    "IsotropicEuclidean",
    "DirectRadial",
    "Problem",
    "RadializedCoefficients",
    "ProblemError",
    "drift_from_potential",
    "radialize",
    "mu_ball",
]

SMOOTHNESS = ("C0", "C1", "C2")


class ProblemError(ValueError):
    pass


def _fd_step(r):
    return np.maximum(1e-6, 1e-6 * np.abs(r))


class RadialFunction:
    """A scalar function of the radius, defined for ``r >= domain_start``.

    Subclasses supply ``_value``; ``log``, ``derivative`` and ``dlog`` fall
    back to generic numerics when no closed form is known.
    """

    domain_start: float = 0.0
    domain_end: Optional[float] = None
    smoothness: str = "C2"
    open_start: bool = False

    def _value(self, r):
        raise NotImplementedError

    def _check_domain(self, r):
        r = np.asarray(r, dtype=float)
        lo = self.domain_start
        bad = (r <= lo) if self.open_start else (r < lo)
        if self.domain_end is not None:
            bad = bad | (r > self.domain_end)
        if np.any(bad):
            raise ValueError(
                f"evaluation outside the domain [{self.domain_start}, "
                f"{self.domain_end if self.domain_end is not None else 'inf'})"
            )
        return r

    def _out(self, r, value):
        if np.ndim(r) == 0:
            return float(value)
        return np.broadcast_to(np.asarray(value, dtype=float), np.shape(r)).copy()

    def __call__(self, r):
        rr = self._check_domain(r)
        return self._out(r, self._value(rr))

    def log(self, r):
        rr = self._check_domain(r)
        return self._out(r, self._log(rr))

    def _log(self, r):
        value = np.asarray(self._value(r), dtype=float)
        if np.any(value <= 0):
            raise ValueError("log of a nonpositive radial function")
        return np.log(value)

    def _derivative_values(self, r):
        if self.smoothness == "C0":
            raise ValueError("drift requires C¹ coefficients")
        h = _fd_step(r)
        lo = r - h
        hi = r + h
        left_ok = (lo > self.domain_start) if self.open_start else (lo >= self.domain_start)
        lo = np.where(left_ok, lo, r)
        if self.domain_end is not None:
            hi = np.where(hi <= self.domain_end, hi, r)
        return (np.asarray(self._value(hi)) - np.asarray(self._value(lo))) / (hi - lo)

    def derivative(self) -> "RadialFunction":
        if self.smoothness == "C0":
            raise ValueError("drift requires C¹ coefficients")
        return CallableFunction(
            self._derivative_values,
            domain_start=self.domain_start,
            domain_end=self.domain_end,
            open_start=self.open_start,
            smoothness="C0" if self.smoothness == "C1" else "C1",
        )

    def dlog(self, r):
        """Derivative of ``log f``."""
        rr = self._check_domain(r)
        h = _fd_step(rr)
        lo = rr - h
        left_ok = (lo > self.domain_start) if self.open_start else (lo >= self.domain_start)
        lo = np.where(left_ok, lo, rr)
        hi = rr + h
        if self.domain_end is not None:
            hi = np.where(hi <= self.domain_end, hi, rr)
        return self._out(r, (self._log(hi) - self._log(lo)) / (hi - lo))

    def is_constant(self, value=None, lo=0.0, hi=1.0, n=64) -> bool:
        lo = max(lo, self.domain_start + (1e-9 if self.open_start else 0.0))
        if self.domain_end is not None:
            hi = min(hi, self.domain_end)
        r = np.linspace(lo, hi, n)
        v = np.asarray(self(r))
        ref = v[0] if value is None else value
        return bool(np.all(v == ref))


@dataclass(frozen=True, eq=False)
class ExpressionFunction(RadialFunction):
    expression: _expr.Expression
    domain_start: float = 0.0
    smoothness: str = "C2"
    text: str = ""
    domain_end: Optional[float] = None
    open_start: bool = False

    @classmethod
    def from_text(cls, text: str, **kwargs) -> "ExpressionFunction":
        return cls(_expr.parse(text), text=text, **kwargs)

    def _value(self, r):
        return _expr.evaluate(self.expression, r)

    def _log(self, r):
        return _expr.log_evaluate(self.expression, r)

    def __repr__(self):
        return f"ExpressionFunction({self.text or _expr.unparse(self.expression)!r})"


@dataclass(frozen=True, eq=False)
class TableFunction(RadialFunction):
    """Piecewise-linear interpolation of ``(r, value)`` samples."""

    r: np.ndarray
    values: np.ndarray
    smoothness: str = "C0"
    open_start: bool = False

    def __post_init__(self):
        r = np.asarray(self.r, dtype=float)
        v = np.asarray(self.values, dtype=float)
        if r.ndim != 1 or r.shape != v.shape or r.size < 2:
            raise ValueError("table needs matching 1-d arrays with at least two samples")
        if np.any(np.diff(r) <= 0):
            raise ValueError("table radii must be strictly increasing")
        if r[0] < 0:
            raise ValueError("table radii must be nonnegative")
        object.__setattr__(self, "r", r)
        object.__setattr__(self, "values", v)

    @property
    def domain_start(self):
        return float(self.r[0])

    @property
    def domain_end(self):
        return float(self.r[-1])

    def _value(self, r):
        return np.interp(r, self.r, self.values)


@dataclass(frozen=True, eq=False)
class CallableFunction(RadialFunction):
    """Wraps vectorized callables; used for derived profiles."""

    fn: Callable
    log_fn: Optional[Callable] = None
    derivative_fn: Optional[Callable] = None
    dlog_fn: Optional[Callable] = None
    domain_start: float = 0.0
    domain_end: Optional[float] = None
    smoothness: str = "C2"
    open_start: bool = False
    label: str = ""

    def _value(self, r):
        with np.errstate(divide="ignore", over="ignore"):
            return self.fn(r)

    def _log(self, r):
        if self.log_fn is None:
            return super()._log(r)
        with np.errstate(divide="ignore", over="ignore"):
            return self.log_fn(r)

    def derivative(self):
        if self.derivative_fn is None:
            return super().derivative()
        return CallableFunction(
            self.derivative_fn,
            domain_start=self.domain_start,
            domain_end=self.domain_end,
            open_start=self.open_start,
            smoothness="C1",
        )

    def dlog(self, r):
        if self.dlog_fn is None:
            return super().dlog(r)
        rr = self._check_domain(r)
        return self._out(r, self.dlog_fn(rr))

    def __repr__(self):
        return f"CallableFunction({self.label or self.fn!r})"


# ---------------------------------------------------------------------------
# Built-in parametric families with closed-form derivatives.
# Each entry: (defaults, value, derivative, log, dlog); log/dlog may be None.


def _safe_pow(r, p):
    if p == 0:
        return np.ones_like(r)
    return np.power(r, p)


def _power_exp_value(r, c, p, q0, q1, q2):
    return c * _safe_pow(r, p) * np.exp(q0 + q1 * r + q2 * r * r)


def _power_exp_dlog(r, c, p, q0, q1, q2):
    out = q1 + 2.0 * q2 * r
    if p != 0:
        out = out + p / r
    return out


def _power_exp_log(r, c, p, q0, q1, q2):
    out = math.log(c) + q0 + q1 * r + q2 * r * r
    if p != 0:
        out = out + p * np.log(r)
    return out


FAMILIES: dict = {
    "const": (
        {"c": 1.0},
        lambda r, c: np.full_like(r, c),
        lambda r, c: np.zeros_like(r),
        lambda r, c: np.full_like(r, math.log(c)) if c > 0 else np.full_like(r, np.nan),
        lambda r, c: np.zeros_like(r),
    ),
    "linear": (
        {"c0": 0.0, "c1": 0.0},
        lambda r, c0, c1: c0 + c1 * r,
        lambda r, c0, c1: np.full_like(r, c1),
        None,
        None,
    ),
    "poly": (
        {"c0": 0.0, "c1": 0.0, "c2": 0.0, "c3": 0.0},
        lambda r, c0, c1, c2, c3: c0 + r * (c1 + r * (c2 + r * c3)),
        lambda r, c0, c1, c2, c3: c1 + r * (2 * c2 + 3 * c3 * r),
        None,
        None,
    ),
    "power": (
        {"c": 1.0, "p": 1.0},
        lambda r, c, p: c * _safe_pow(r, p),
        lambda r, c, p: c * p * _safe_pow(r, p - 1) if p != 0 else np.zeros_like(r),
        lambda r, c, p: math.log(c) + p * np.log(r) if c > 0 else np.full_like(r, np.nan),
        lambda r, c, p: p / r,
    ),
    "sqrt": (
        {"c": 1.0},
        lambda r, c: c * np.sqrt(r),
        lambda r, c: 0.5 * c / np.sqrt(r),
        lambda r, c: math.log(c) + 0.5 * np.log(r),
        lambda r, c: 0.5 / r,
    ),
    "exponential": (
        {"c": 1.0, "theta": 1.0},
        lambda r, c, theta: c * np.exp(theta * r),
        lambda r, c, theta: c * theta * np.exp(theta * r),
        lambda r, c, theta: math.log(c) + theta * r,
        lambda r, c, theta: np.full_like(r, theta),
    ),
    "power_exp": (
        {"c": 1.0, "p": 0.0, "q0": 0.0, "q1": 0.0, "q2": 0.0},
        _power_exp_value,
        lambda r, c, p, q0, q1, q2: _power_exp_value(r, c, p, q0, q1, q2)
        * _power_exp_dlog(r, c, p, q0, q1, q2),
        _power_exp_log,
        _power_exp_dlog,
    ),
    "one_plus_r2_pow": (
        {"c": 1.0, "p": 1.0},
        lambda r, c, p: c * np.power(1.0 + r * r, p),
        lambda r, c, p: 2.0 * c * p * r * np.power(1.0 + r * r, p - 1.0),
        lambda r, c, p: math.log(c) + p * np.log1p(r * r),
        lambda r, c, p: 2.0 * p * r / (1.0 + r * r),
    ),
    "one_plus_r_pow": (
        {"c": 1.0, "p": 1.0},
        lambda r, c, p: c * np.power(1.0 + r, p),
        lambda r, c, p: c * p * np.power(1.0 + r, p - 1.0),
        lambda r, c, p: math.log(c) + p * np.log1p(r),
        lambda r, c, p: p / (1.0 + r),
    ),
    "log_one_plus_r2": (
        {"k": 1.0},
        lambda r, k: k * np.log1p(r * r),
        lambda r, k: 2.0 * k * r / (1.0 + r * r),
        None,
        None,
    ),
    "log_one_plus_r": (
        {"k": 1.0},
        lambda r, k: k * np.log1p(r),
        lambda r, k: k / (1.0 + r),
        None,
        None,
    ),
    "sine": (
        {"c": 1.0, "k": 1.0, "shift": 0.0},
        lambda r, c, k, shift: c * np.sin(k * r) + shift,
        lambda r, c, k, shift: c * k * np.cos(k * r),
        None,
        None,
    ),
}

# Negative powers are evaluated on r > 0 only.
_OPEN_AT_ZERO = {"power", "power_exp"}


@dataclass(frozen=True, eq=False)
class FamilyFunction(RadialFunction):
    name: str
    params: tuple = ()
    domain_start: float = 0.0
    smoothness: str = "C2"
    domain_end: Optional[float] = None
    open_start: bool = False

    def __post_init__(self):
        if self.name not in FAMILIES:
            raise ValueError(f"unknown family {self.name!r}; known: {sorted(FAMILIES)}")

    @property
    def kwargs(self) -> dict:
        defaults = dict(FAMILIES[self.name][0])
        defaults.update(dict(self.params))
        return defaults

    def _value(self, r):
        with np.errstate(divide="ignore", over="ignore"):
            return FAMILIES[self.name][1](r, **self.kwargs)

    def _log(self, r):
        log_fn = FAMILIES[self.name][3]
        if log_fn is None:
            return super()._log(r)
        with np.errstate(divide="ignore", over="ignore"):
            out = np.asarray(log_fn(r, **self.kwargs), dtype=float)
        if np.any(np.isnan(out)):
            raise ValueError("log of a nonpositive radial function")
        return out

    def derivative(self):
        deriv = FAMILIES[self.name][2]
        kw = self.kwargs
        return CallableFunction(
            lambda r: deriv(r, **kw),
            domain_start=self.domain_start,
            domain_end=self.domain_end,
            open_start=self.open_start,
            smoothness="C1",
            label=f"d/dr {self.name}",
        )

    def dlog(self, r):
        dlog_fn = FAMILIES[self.name][4]
        if dlog_fn is None:
            return super().dlog(r)
        rr = self._check_domain(r)
        return self._out(r, dlog_fn(rr, **self.kwargs))

    def __repr__(self):
        args = ", ".join(f"{k}={v!r}" for k, v in self.params)
        return f"{self.name}({args})"


def family(name: str, **params) -> FamilyFunction:
    """Instantiate a built-in family, e.g. ``family("linear", c1=-2.0)``."""
    if name not in FAMILIES:
        raise ValueError(f"unknown family {name!r}; known: {sorted(FAMILIES)}")
    unknown = set(params) - set(FAMILIES[name][0])
    if unknown:
        raise ValueError(f"family {name!r} has no parameter(s) {sorted(unknown)}")
    open_start = name in _OPEN_AT_ZERO and float(params.get("p", 0.0)) < 0
    items = tuple(sorted((k, float(v)) for k, v in params.items()))
    return FamilyFunction(name, items, open_start=open_start)


def constant(c: float) -> FamilyFunction:
    return family("const", c=c)


# ---------------------------------------------------------------------------
# Problems


@dataclass(frozen=True)
class HalfLine:
    """``L = a g'' + (a V' + a') g'`` on ``[0, inf)``, Neumann at 0."""

    a: RadialFunction
    V: RadialFunction


@dataclass(frozen=True)
class IsotropicEuclidean:
    """``a(x) = a_scalar(|x|) I`` and potential ``V(|x|)`` on R^d."""

    d: int
    a_scalar: RadialFunction
    V: RadialFunction


@dataclass(frozen=True)
class DirectRadial:
    gamma: RadialFunction
    alpha: RadialFunction
    beta: RadialFunction
    mu_density: RadialFunction
    d: int = 1


Variant = Union[HalfLine, IsotropicEuclidean, DirectRadial]


@dataclass(frozen=True)
class Problem:
    variant: Variant
    r0: float
    R_max: float
    check_grid: int = 1000

    def __post_init__(self):
        v = self.variant
        d = getattr(v, "d", 1)
        if int(d) != d or d < 1:
            raise ProblemError("dimension d must be an integer >= 1")
        if isinstance(v, HalfLine):
            if self.r0 < 0:
                raise ProblemError("base radius r0 must be nonnegative")
        elif self.r0 <= 0 and not (isinstance(v, DirectRadial) and d == 1):
            raise ProblemError("base radius r0 must be positive")
        if not self.r0 < self.R_max:
            raise ProblemError("need r0 < R_max")
        if isinstance(v, (HalfLine, IsotropicEuclidean)):
            a = v.a if isinstance(v, HalfLine) else v.a_scalar
            grid = np.linspace(0.0, self.R_max, self.check_grid)
            if np.any(np.asarray(a(grid)) <= 0):
                raise ProblemError("ellipticity violated: diffusion coefficient must be > 0 on [0, R_max]")

    @property
    def d(self) -> int:
        return int(getattr(self.variant, "d", 1))

    @property
    def kind(self) -> str:
        return {HalfLine: "half_line", IsotropicEuclidean: "isotropic", DirectRadial: "direct"}[
            type(self.variant)
        ]


@dataclass(frozen=True, eq=False)
class RadializedCoefficients:
    gamma: RadialFunction
    alpha: RadialFunction
    beta: RadialFunction
    mu_density: RadialFunction
    d: int
    r0: float
    R_max: float
    kind: str = "direct"

    @cached_property
    def log_normalizer(self) -> float:
        from .quad import log_integrate

        start = self.mu_density.domain_start
        value, _ = log_integrate(self.mu_density.log, start, self.R_max, open_start=True)
        if not np.isfinite(value):
            raise ProblemError("density is not normalizable on [0, R_max]")
        return value

    def truncation_tail(self) -> float:
        """Rough mass beyond ``R_max``: density(R_max) times its decay length."""
        R = self.R_max
        log_m = float(self.mu_density.log(R))
        slope = float(self.mu_density.dlog(R))
        length = 1.0 / slope if slope < 0 else R
        return math.exp(log_m - self.log_normalizer) * length


def drift_from_potential(problem: Problem) -> RadialFunction:
    """Radial drift pairing ``<b(x), x>`` as a function of ``r = |x|``.

    With ``a = a_s(|x|) I`` the drift ``b_i = sum_j (a_ij d_j V + d_j a_ij)``
    is ``(a_s V' + a_s') x / r``, so ``<b, x> = r (a_s V' + a_s')``.
    """
    v = problem.variant
    if isinstance(v, IsotropicEuclidean):
        a, V = v.a_scalar, v.V
    elif isinstance(v, HalfLine):
        a, V = v.a, v.V
    else:
        raise ProblemError("drift is only defined for coefficient-based problems")
    for fn in (a, V):
        if fn.smoothness == "C0":
            raise ValueError("drift requires C¹ coefficients")
    da = a.derivative()
    dV = V.derivative()

    def pairing(r):
        return r * (a(r) * dV(r) + da(r))

    return CallableFunction(pairing, smoothness="C1", label="<b(x),x>")


def radialize(problem: Problem) -> RadializedCoefficients:
    v = problem.variant
    if isinstance(v, DirectRadial):
        return RadializedCoefficients(
            v.gamma, v.alpha, v.beta, v.mu_density, int(v.d), problem.r0, problem.R_max, "direct"
        )
    if isinstance(v, HalfLine):
        a, V, d, kind = v.a, v.V, 1, "half_line"
    else:
        a, V, d, kind = v.a_scalar, v.V, int(v.d), "isotropic"
    grid = np.linspace(0.0, problem.R_max, problem.check_grid)
    if np.any(np.asarray(a(grid)) <= 0):
        raise ProblemError("ellipticity violated: diffusion coefficient must be > 0")
    da = a.derivative()
    dV = V.derivative()

    # r (tr a + <b,x>) / <a x, x> - 1/r  ==  (d-1)/r + V' + a'/a  for isotropic a
    def gamma(r):
        out = dV(r) + da(r) / a(r)
        if d > 1:
            out = out + (d - 1) / r
        return out

    def log_mu(r):
        out = np.asarray(V(r), dtype=float)
        if d > 1:
            with np.errstate(divide="ignore"):
                out = out + (d - 1) * np.log(r)
        return out

    def mu(r):
        with np.errstate(divide="ignore", under="ignore"):
            return np.exp(log_mu(r))

    def dlog_mu(r):
        out = np.asarray(dV(r), dtype=float)
        if d > 1:
            out = out + (d - 1) / r
        return out

    gamma_fn = CallableFunction(gamma, open_start=d > 1, smoothness="C1", label="gamma")
    mu_fn = CallableFunction(mu, log_fn=log_mu, dlog_fn=dlog_mu, label="mu_density")
    coeffs = RadializedCoefficients(gamma_fn, a, a, mu_fn, d, problem.r0, problem.R_max, kind)
    coeffs.log_normalizer  # fail early on non-normalizable input
    return coeffs


def mu_ball(coeffs: RadializedCoefficients, r: float) -> float:
    """``mu(B_r)`` normalized over ``[0, R_max]``."""
    if r > coeffs.R_max * (1 + 1e-12):
        raise ValueError("r exceeds R_max")
    start = coeffs.mu_density.domain_start
    if r <= start:
        return 0.0
    from .quad import log_integrate

    log_part, _ = log_integrate(coeffs.mu_density.log, start, min(r, coeffs.R_max), open_start=True)
    return float(min(1.0, math.exp(log_part - coeffs.log_normalizer)))
