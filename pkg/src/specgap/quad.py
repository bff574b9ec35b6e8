"""Quadrature: adaptive integrals, the cumulative drift integral, improper
tails with divergence detection, and the nested double integral

    F(t) = int_{r0}^t exp(-C(r)) dr int_r^inf exp(C(s)) f(s) / alpha(s) ds.

Integrands in the bound formulas routinely span hundreds of orders of
magnitude, so everything past :func:`integrate` works with logarithms.
"""

from __future__ import annotations

import heapq
import math
from dataclasses import dataclass, field, replace
from typing import Callable, Optional

import numpy as np
from numpy.polynomial import legendre as _leg

from . import expr as _expr

__all__ = [
    "QuadratureSettings",
    "IntegrationError",
    "integrate",
    "log_integrate",
    "CumulativeC",
    "cumulative_C",
    "TailResult",
    "tail_integral",
    "log_tail_integral",
    "NestedIntegral",
    "nested_F",
]

DEFAULT_TAIL_HORIZON = 1.0e4
# inner tails of the nested integral run this many times past the scan range
TAIL_EXTENSION = 1024.0
# doubling-panel ratio at or above which a tail is treated as non-decaying
NON_DECAY_RATIO = 0.999


@dataclass(frozen=True)
class QuadratureSettings:
    rel_tol: float = 1e-9
    abs_tol: float = 1e-12
    max_subdivisions: int = 2**16
    tail_horizon: Optional[float] = None
    divergence_threshold: float = 1e12

    def __post_init__(self):
        if self.rel_tol <= 0 or self.abs_tol <= 0:
            raise ValueError("tolerances must be positive")
        if self.max_subdivisions < 16:
            raise ValueError("max_subdivisions must be >= 16")
        if self.tail_horizon is not None and self.tail_horizon <= 0:
            raise ValueError("tail_horizon must be positive")
        if self.divergence_threshold <= 0:
            raise ValueError("divergence_threshold must be positive")

    def horizon(self, fallback: float = DEFAULT_TAIL_HORIZON) -> float:
        return float(self.tail_horizon) if self.tail_horizon is not None else float(fallback)


class IntegrationError(RuntimeError):
    """Subdivision budget exhausted; ``estimate`` and ``error`` hold the best result."""

    def __init__(self, message, estimate, error):
        super().__init__(f"{message} (estimate {estimate!r}, error {error!r})")
        self.estimate = estimate
        self.error = error


# Gauss-Kronrod 7/15 abscissae and weights (positive half, centre last).
_XGK = np.array([
    0.991455371120812639206854697526329, 0.949107912342758524526189684047851,
    0.864864423359769072789712788640926, 0.741531185599394439863864773280788,
    0.586087235467691130294144845693013, 0.405845151377397166906606412076961,
    0.207784955007898467600689403773245, 0.0,
])
_WGK = np.array([
    0.022935322010529224963732008058970, 0.063092092629978553290700663189204,
    0.104790010322250183839876322541518, 0.140653259715525918745189590510238,
    0.169004726639267902826583426598550, 0.190350578064785409913256402421014,
    0.204432940075298892414161999234649, 0.209482141084727828012999174891714,
])
_WG = np.array([
    0.129484966168869693270611432679082, 0.279705391489276667901467771423780,
    0.381830050505118944950369775488975, 0.417959183673469387755102040816327,
])
_KX = np.concatenate([-_XGK[:-1], _XGK[::-1]])
_KW = np.concatenate([_WGK[:-1], _WGK[::-1]])
_GW = np.zeros(15)
_GW[[1, 3, 5, 7, 9, 11, 13]] = np.concatenate([_WG[:-1], _WG[::-1]])


def _as_callable(f) -> Callable:
    if isinstance(f, (_expr.Num, _expr.Var, _expr.Const, _expr.Neg, _expr.BinOp, _expr.Call)):
        node = f
        return lambda r: _expr.evaluate(node, r)
    return f


def _gk_batch(f, a: np.ndarray, b: np.ndarray):
    """Apply the 15-point rule to each interval [a_i, b_i] with one call of ``f``."""
    centre = 0.5 * (a + b)
    half = 0.5 * (b - a)
    pts = centre[:, None] + half[:, None] * _KX[None, :]
    vals = np.asarray(f(pts.ravel()), dtype=float).reshape(pts.shape)
    with np.errstate(invalid="ignore", over="ignore"):
        kron = half * (vals @ _KW)
        gauss = half * (vals @ _GW)
    return kron, np.abs(kron - gauss)


def integrate(f, a: float, b: float, settings: QuadratureSettings = QuadratureSettings()):
    """Adaptive Gauss-Kronrod quadrature of ``f`` over ``[a, b]``.

    Returns ``(value, error_estimate)``.  Raises :class:`IntegrationError`
    when the subdivision budget runs out.
    """
    if b < a:
        raise ValueError("need a <= b")
    if a == b:
        return 0.0, 0.0
    f = _as_callable(f)
    k, e = _gk_batch(f, np.array([a]), np.array([b]))
    heap = [(-e[0], a, b, k[0])]
    total, err = k[0], e[0]
    subdivisions = 0
    while err > max(settings.abs_tol, settings.rel_tol * abs(total)):
        neg_e, lo, hi, val = heapq.heappop(heap)
        mid = 0.5 * (lo + hi)
        if not (lo < mid < hi):
            heapq.heappush(heap, (neg_e, lo, hi, val))
            break
        kk, ee = _gk_batch(f, np.array([lo, mid]), np.array([mid, hi]))
        for x0, x1, kv, ev in ((lo, mid, kk[0], ee[0]), (mid, hi, kk[1], ee[1])):
            heapq.heappush(heap, (-ev, x0, x1, kv))
        subdivisions += 1
        # re-sum instead of updating incrementally: keeps summation order fixed
        total = math.fsum(item[3] for item in heap)
        err = math.fsum(-item[0] for item in heap)
        if subdivisions >= settings.max_subdivisions:
            raise IntegrationError("subdivision budget exhausted", total, err)
    if not np.isfinite(total):
        raise IntegrationError("non-finite integrand", total, err)
    return float(total), float(err)


def _golden_max(logf, lo: float, hi: float, iters: int = 80):
    """Golden-section search for the maximum of ``logf`` on ``[lo, hi]``."""
    g = 0.5 * (math.sqrt(5.0) - 1.0)

    def val(x):
        with np.errstate(divide="ignore", over="ignore", invalid="ignore"):
            v = float(np.asarray(logf(np.array([x])), dtype=float)[0])
        return -math.inf if math.isnan(v) else v

    x1, x2 = hi - g * (hi - lo), lo + g * (hi - lo)
    f1, f2 = val(x1), val(x2)
    for _ in range(iters):
        if f1 >= f2:
            hi, x2, f2 = x2, x1, f1
            x1 = hi - g * (hi - lo)
            f1 = val(x1)
        else:
            lo, x1, f1 = x1, x2, f2
            x2 = lo + g * (hi - lo)
            f2 = val(x2)
    return (x1, f1) if f1 >= f2 else (x2, f2)


def log_integrate(logf, a: float, b: float, settings: QuadratureSettings = QuadratureSettings(),
                  open_start: bool = False, samples: int = 129, _depth: int = 0):
    """``log int_a^b exp(logf(s)) ds`` for integrands of any magnitude.

    Returns ``(log_value, relative_error)``; ``log_value`` is ``-inf`` for a
    vanishing integral.
    """
    if b <= a:
        return -math.inf, 0.0
    grid = np.linspace(a, b, samples + 2)[1:-1]
    with np.errstate(divide="ignore", over="ignore", invalid="ignore"):
        lg = np.asarray(logf(grid), dtype=float)
    if np.any(np.isnan(lg)):
        raise ValueError("log-integrand is undefined on the interval")
    i = int(np.argmax(lg))
    shift = float(lg[i])
    if shift == -math.inf:
        shift = 0.0
    if shift == math.inf:
        return math.inf, 0.0
    if _depth == 0 and 0 < i < len(grid) - 1 and lg[i] - max(lg[i - 1], lg[i + 1]) > 1.0:
        # an interior peak narrower than the sample spacing: locate it and split there
        peak, top = _golden_max(logf, grid[i - 1], grid[i + 1])
        if top > shift + 1.0 and a < peak < b:
            left, e1 = log_integrate(logf, a, peak, settings, open_start, samples, _depth + 1)
            right, e2 = log_integrate(logf, peak, b, settings, False, samples, _depth + 1)
            return float(np.logaddexp(left, right)), max(e1, e2)

    def scaled(s):
        with np.errstate(divide="ignore", over="ignore", under="ignore"):
            return np.exp(np.asarray(logf(s), dtype=float) - shift)

    try:
        value, err = integrate(scaled, a, b, replace(settings, abs_tol=max(settings.abs_tol * (b - a), 1e-300)))
    except IntegrationError:
        # the sample grid missed a sharp peak; give each half its own shift
        if _depth >= 40:
            raise
        mid = 0.5 * (a + b)
        left, e1 = log_integrate(logf, a, mid, settings, open_start, samples, _depth + 1)
        right, e2 = log_integrate(logf, mid, b, settings, False, samples, _depth + 1)
        total = np.logaddexp(left, right)
        return float(total), max(e1, e2)
    if value <= 0:
        return -math.inf, 0.0
    return math.log(value) + shift, err / value


# ---------------------------------------------------------------------------
# Spectral panels: n-point Gauss-Legendre samples with exact polynomial
# antiderivatives, used for partial integrals inside a panel.


class _Spectral:
    def __init__(self, n: int = 20):
        self.n = n
        self.x, self.w = _leg.leggauss(n)
        vander = _leg.legvander(self.x, n - 1)
        self.to_coef = np.linalg.inv(vander)
        integ = np.zeros((n + 1, n))
        for k in range(n):
            unit = np.zeros(n)
            unit[k] = 1.0
            integ[:, k] = _leg.legint(unit, lbnd=-1)
        self._integ_coef = integ @ self.to_coef
        self.from_start = self.antiderivative(self.x)
        self.to_end = self.w[None, :] - self.from_start

    def antiderivative(self, u) -> np.ndarray:
        """Rows map node values to ``int_{-1}^{u} p(x) dx`` on the reference panel."""
        u = np.atleast_1d(np.asarray(u, dtype=float))
        return _leg.legvander(u, self.n) @ self._integ_coef

    def tail(self, values: np.ndarray) -> np.ndarray:
        """Relative size of the two highest Legendre coefficients, per row."""
        with np.errstate(over="ignore", invalid="ignore"):
            coef = values @ self.to_coef.T
        scale = np.sum(np.abs(coef), axis=-1)
        top = np.abs(coef[..., -1]) + np.abs(coef[..., -2])
        with np.errstate(invalid="ignore", divide="ignore"):
            return np.where(scale > 0, top / scale, 0.0)

    def nodes(self, a: np.ndarray, b: np.ndarray) -> np.ndarray:
        return 0.5 * (a + b)[:, None] + 0.5 * (b - a)[:, None] * self.x[None, :]


_SPECTRAL = _Spectral(20)


def _refine_panels(edges: np.ndarray, bad: np.ndarray) -> np.ndarray:
    mids = 0.5 * (edges[:-1] + edges[1:])[bad]
    return np.sort(np.concatenate([edges, mids]))


def _width_ok(a, b):
    return (b - a) <= 0.5 * np.maximum(np.abs(a), 1.0)


# ---------------------------------------------------------------------------


@dataclass(frozen=True, eq=False)
class CumulativeC:
    """Queryable ``C(r) = int_{r0}^r gamma(s) ds`` on ``[r0, horizon]``."""

    gamma: Callable
    r0: float
    edges: np.ndarray
    node_values: np.ndarray
    panel_gamma: np.ndarray
    settings: QuadratureSettings = field(default_factory=QuadratureSettings)

    @property
    def horizon(self) -> float:
        return float(self.edges[-1])

    def __call__(self, r):
        rr = np.atleast_1d(np.asarray(r, dtype=float))
        if np.any(rr < self.r0 - 1e-12 * max(1.0, abs(self.r0))):
            raise ValueError("C is only defined for r >= r0")
        out = np.empty_like(rr)
        inside = rr <= self.horizon
        if np.any(inside):
            q = np.clip(rr[inside], self.r0, self.horizon)
            k = np.clip(np.searchsorted(self.edges, q, side="right") - 1, 0, len(self.edges) - 2)
            a, b = self.edges[k], self.edges[k + 1]
            u = 2.0 * (q - a) / (b - a) - 1.0
            rows = _SPECTRAL.antiderivative(u)
            partial = 0.5 * (b - a) * np.einsum("ij,ij->i", rows, self.panel_gamma[k])
            partial[q == a] = 0.0
            out[inside] = self.node_values[k] + partial
        for i in np.flatnonzero(~inside):
            extra, _ = integrate(self.gamma, self.horizon, float(rr[i]), self.settings)
            out[i] = self.node_values[-1] + extra
        if np.ndim(r) == 0:
            return float(out[0])
        return out.reshape(np.shape(r))

    def extended(self, horizon: float) -> "CumulativeC":
        if horizon <= self.horizon:
            return self
        tail = cumulative_C(self.gamma, self.horizon, horizon, self.settings)
        return CumulativeC(
            self.gamma,
            self.r0,
            np.concatenate([self.edges, tail.edges[1:]]),
            np.concatenate([self.node_values, self.node_values[-1] + tail.node_values[1:]]),
            np.concatenate([self.panel_gamma, tail.panel_gamma]),
            self.settings,
        )


def cumulative_C(gamma, r0: float, horizon: float,
                 settings: QuadratureSettings = QuadratureSettings(),
                 max_panels: int = 2**15) -> CumulativeC:
    """Tabulate the drift integral from ``r0`` on panels fine enough that the
    20-point Legendre interpolant of ``gamma`` meets ``rel_tol``."""
    if horizon <= r0:
        raise ValueError("need horizon > r0")
    gamma = _as_callable(gamma)
    edges = np.linspace(r0, horizon, 17)
    while True:
        a, b = edges[:-1], edges[1:]
        pts = _SPECTRAL.nodes(a, b)
        with np.errstate(divide="ignore", invalid="ignore"):
            vals = np.asarray(gamma(pts.ravel()), dtype=float).reshape(pts.shape)
        if not np.all(np.isfinite(vals)):
            raise ValueError("drift profile is not finite on the integration range")
        tail = _SPECTRAL.tail(vals)
        bad = (tail > settings.rel_tol) | ~_width_ok(a, b)
        if not np.any(bad) or len(edges) > max_panels:
            break
        edges = _refine_panels(edges, bad)
    panel = 0.5 * (b - a) * (vals @ _SPECTRAL.w)
    node_values = np.concatenate([[0.0], np.cumsum(panel)])
    return CumulativeC(gamma, float(r0), edges, node_values, vals, settings)


# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class TailResult:
    """Outcome of an improper integral ``int_r^inf``.

    ``status`` is ``"converged"``, ``"divergent"`` or ``"truncated"`` (the
    horizon was reached before the tail could be decided).
    """

    status: str
    log_value: float
    error: float
    end: float
    panels: int
    extrapolated: bool = False

    @property
    def value(self) -> float:
        if self.status == "divergent":
            return math.inf
        return math.exp(self.log_value) if self.log_value > -math.inf else 0.0

    @property
    def divergent(self) -> bool:
        return self.status == "divergent"

    @property
    def finite(self) -> bool:
        return self.status == "converged"


def log_tail_integral(logg, r: float, settings: QuadratureSettings = QuadratureSettings(),
                      horizon: Optional[float] = None) -> TailResult:
    """Tail integral of ``exp(logg)`` over doubling panels ``[r, 2r], [2r, 4r], ...``.

    Panels are added until the newest one is negligible (converged), the
    panel sums stop shrinking and the total has grown past
    ``divergence_threshold`` (divergent), or the horizon is hit.  At the
    horizon a steady geometric panel ratio is extrapolated; anything else
    is reported as truncated.
    """
    horizon = settings.horizon() if horizon is None else float(horizon)
    if r >= horizon:
        return TailResult("truncated", -math.inf, math.inf, r, 0)
    log_rel = math.log(settings.rel_tol)
    log_threshold = math.log(settings.divergence_threshold)
    width = max(r, 1.0)
    a = r
    logs: list[float] = []
    full: list[float] = []
    log_acc = -math.inf
    log_first = None
    err_acc = 0.0
    while True:
        b = a + width
        clipped = b >= horizon
        if clipped:
            b = horizon
        lp, rel_err = log_integrate(logg, a, b, settings, open_start=(a == r))
        if lp == math.inf:
            return TailResult("divergent", math.inf, math.inf, b, len(logs) + 1)
        logs.append(lp)
        if not clipped:
            full.append(lp)
        log_acc = np.logaddexp(log_acc, lp)
        err_acc += rel_err * math.exp(lp - log_acc) if lp > -math.inf else 0.0
        if log_first is None and lp > -math.inf:
            log_first = lp
        ratios = [math.exp(min(full[i] - full[i - 1], 700.0)) for i in range(1, len(full))
                  if full[i - 1] > -math.inf and full[i] > -math.inf]
        negligible = lp == -math.inf or lp <= log_rel + log_acc
        if negligible and len(logs) >= 2 and log_acc > -math.inf:
            return TailResult("converged", float(log_acc), err_acc + settings.rel_tol, b, len(logs))
        growing = len(ratios) >= 2 and ratios[-1] >= NON_DECAY_RATIO and ratios[-2] >= NON_DECAY_RATIO
        # a large transient bump can look divergent; only trust growth seen late
        late = b >= horizon / 8.0
        if growing and late and log_first is not None and log_acc - log_first > log_threshold:
            return TailResult("divergent", math.inf, math.inf, b, len(logs))
        steady = (
            len(ratios) >= 2
            and ratios[-1] < NON_DECAY_RATIO
            and abs(ratios[-1] - ratios[-2]) <= 0.05 * ratios[-1]
        )
        if steady and not clipped:
            q = ratios[-1]
            log_rest = lp + math.log(q / (1.0 - q))
            if log_rest <= log_rel + log_acc:
                total = np.logaddexp(log_acc, log_rest)
                return TailResult("converged", float(total), err_acc + settings.rel_tol, b, len(logs), True)
        if clipped:
            if negligible:
                if log_acc == -math.inf:
                    return TailResult("converged", -math.inf, 0.0, b, len(logs))
                return TailResult("converged", float(log_acc), err_acc + settings.rel_tol, b, len(logs))
            if ratios and ratios[-1] >= NON_DECAY_RATIO:
                return TailResult("divergent", math.inf, math.inf, b, len(logs))
            steady_h = (
                len(ratios) >= 2
                and ratios[-1] < NON_DECAY_RATIO
                and abs(ratios[-1] - ratios[-2]) <= 0.1 * ratios[-1]
            )
            if steady_h:
                q = ratios[-1]
                # future full panels sum to P q/(1-q); the clipped panel already covers part
                log_future = full[-1] + math.log(q / (1.0 - q))
                covered = math.exp(lp - log_future) if lp > -math.inf else 0.0
                log_rest = log_future + math.log1p(-covered) if covered < 1.0 else -math.inf
                total = np.logaddexp(log_acc, log_rest)
                err = abs(ratios[-1] - ratios[-2]) / (1.0 - q)
                return TailResult("converged", float(total), err_acc + err, b, len(logs), True)
            return TailResult("truncated", float(log_acc), math.inf, b, len(logs))
        a = b
        width *= 2.0


def tail_integral(g, r: float, settings: QuadratureSettings = QuadratureSettings(),
                  horizon: Optional[float] = None) -> TailResult:
    """``int_r^inf g(s) ds`` for nonnegative ``g``; see :func:`log_tail_integral`."""
    g = _as_callable(g)

    def logg(s):
        v = np.asarray(g(s), dtype=float)
        if np.any(v < 0):
            raise ValueError("tail integrand must be nonnegative")
        with np.errstate(divide="ignore"):
            return np.log(v)

    return log_tail_integral(logg, r, settings, horizon)


# ---------------------------------------------------------------------------


def _logsum_rows(logv: np.ndarray, weights: np.ndarray) -> np.ndarray:
    """``log sum_j weights_ij exp(logv_ij)`` per row, tolerant of -inf rows."""
    m = np.max(logv, axis=-1)
    m_safe = np.where(np.isfinite(m), m, 0.0)
    with np.errstate(under="ignore", invalid="ignore"):
        s = np.sum(weights * np.exp(logv - m_safe[..., None]), axis=-1)
    with np.errstate(divide="ignore"):
        out = np.log(np.where(s > 0, s, 0.0)) + m_safe
    return np.where(s > 0, out, -np.inf)


def _reverse_logcumsum(v: np.ndarray) -> np.ndarray:
    return np.logaddexp.accumulate(v[::-1])[::-1]


class NestedIntegral:
    """The nested integral ``F`` and its inner tail, tabulated once on ``[r0, H]``.

    ``log_weight(s)`` is ``log f(s) - log alpha(s)``.  Queries at any
    ``t`` in ``[r0, H]`` interpolate spectrally inside a panel, so the
    tabulation is reused for every scan and refinement point.
    """

    def __init__(self, C: CumulativeC, log_weight: Callable, r0: float, horizon: float,
                 settings: QuadratureSettings = QuadratureSettings(), max_panels: int = 2**14):
        if horizon <= r0:
            raise ValueError("need horizon > r0")
        self.r0 = float(r0)
        self.horizon = float(horizon)
        self.settings = settings
        self.tail_horizon = TAIL_EXTENSION * self.horizon
        self.C = C.extended(self.horizon)
        self.log_weight = log_weight
        self.flags: list[str] = []
        sp = _SPECTRAL
        tol = max(settings.rel_tol, 1e-13)

        edges = np.linspace(self.r0, self.horizon, 17)
        for _ in range(64):
            a, b = edges[:-1], edges[1:]
            pts = sp.nodes(a, b)
            c_vals = self.C(pts.ravel()).reshape(pts.shape)
            with np.errstate(divide="ignore", over="ignore", invalid="ignore"):
                phi = c_vals + np.asarray(log_weight(pts.ravel()), dtype=float).reshape(pts.shape)
            if np.any(np.isnan(phi)):
                raise ValueError("test function or diffusion coefficient undefined on the scan range")
            bad = ~_width_ok(a, b) | (sp.tail(self._scaled(phi)) > tol)
            if np.any(bad) and len(edges) < max_panels:
                edges = _refine_panels(edges, bad)
                continue
            inner = self._assemble(edges, pts, c_vals, phi)
            bad = sp.tail(self._scaled(inner["psi"])) > tol
            if np.any(bad) and len(edges) < max_panels and not self.divergent:
                edges = _refine_panels(edges, bad)
                continue
            break
        else:
            self.flags.append("panel refinement did not settle")
        if len(edges) >= max_panels:
            self.flags.append("panel budget reached")

    @staticmethod
    def _scaled(v):
        m = np.max(v, axis=-1, keepdims=True)
        m = np.where(np.isfinite(m), m, 0.0)
        with np.errstate(under="ignore", invalid="ignore"):
            return np.nan_to_num(np.exp(v - m))

    def _assemble(self, edges, pts, c_vals, phi):
        sp = _SPECTRAL
        a, b = edges[:-1], edges[1:]
        half = 0.5 * (b - a)
        self.edges = edges
        self.phi = phi
        self.c_vals = c_vals
        log_panels = _logsum_rows(phi, sp.w[None, :]) + np.log(half)

        C = self.C.extended(self.tail_horizon)
        lw = self.log_weight

        def log_tail_g(s):
            with np.errstate(divide="ignore", over="ignore", invalid="ignore"):
                return C(s) + np.asarray(lw(s), dtype=float)

        self.tail = log_tail_integral(log_tail_g, self.horizon, self.settings, self.tail_horizon)
        self.divergent = self.tail.divergent
        self.truncated = self.tail.status == "truncated"
        tail_log = self.tail.log_value if not self.divergent else math.inf
        # log of int_{x_k}^inf exp(phi) at every panel edge
        self.log_inner_nodes = np.logaddexp(
            np.concatenate([_reverse_logcumsum(log_panels), [-math.inf]]), tail_log
        )
        # inner integral at the Gauss nodes: next edge plus the partial panel
        part = np.empty_like(phi)
        for k in range(len(a)):
            part[k] = _logsum_rows(np.broadcast_to(phi[k], (sp.n, sp.n)), sp.to_end)
        part = part + np.log(half)[:, None]
        log_inner = np.logaddexp(self.log_inner_nodes[1:, None], part)
        self.log_inner_pts = log_inner
        psi = -c_vals + log_inner
        self.psi = psi
        log_outer = _logsum_rows(psi, sp.w[None, :]) + np.log(half)
        self.log_F_nodes = np.concatenate([[-math.inf], np.logaddexp.accumulate(log_outer)])
        return {"psi": psi}

    # -- queries -------------------------------------------------------------

    def _locate(self, t):
        t = np.atleast_1d(np.asarray(t, dtype=float))
        lo, hi = self.r0, self.horizon
        if np.any(t < lo - 1e-12 * max(1, abs(lo))) or np.any(t > hi * (1 + 1e-12)):
            raise ValueError("query outside the tabulated range")
        t = np.clip(t, lo, hi)
        k = np.clip(np.searchsorted(self.edges, t, side="right") - 1, 0, len(self.edges) - 2)
        a, b = self.edges[k], self.edges[k + 1]
        u = 2.0 * (t - a) / (b - a) - 1.0
        return t, k, a, b, u

    def log_F(self, t):
        """``log F(t)``; ``+inf`` when the inner tail diverges."""
        scalar = np.ndim(t) == 0
        t, k, a, b, u = self._locate(t)
        if self.divergent:
            out = np.where(t > self.r0, math.inf, -math.inf)
        else:
            rows = _SPECTRAL.antiderivative(u)
            part = _logsum_rows(self.psi[k], rows) + np.log(0.5 * (b - a))
            out = np.logaddexp(self.log_F_nodes[k], part)
        return float(out[0]) if scalar else out

    def log_inner(self, t):
        """``log int_t^inf exp(C(s)) f(s)/alpha(s) ds``."""
        scalar = np.ndim(t) == 0
        t, k, a, b, u = self._locate(t)
        if self.divergent:
            out = np.full_like(t, math.inf)
        else:
            rows = _SPECTRAL.w[None, :] - _SPECTRAL.antiderivative(u)
            part = _logsum_rows(self.phi[k], rows) + np.log(0.5 * (b - a))
            out = np.logaddexp(self.log_inner_nodes[k + 1], part)
        return float(out[0]) if scalar else out

    @property
    def panels(self) -> int:
        return len(self.edges) - 1


def nested_F(C: CumulativeC, f, alpha, r0: float, t: float,
             settings: QuadratureSettings = QuadratureSettings()) -> float:
    """``F(t) = int_{r0}^t exp(-C(r)) dr int_r^inf exp(C(s)) f(s)/alpha(s) ds``.

    Returns ``inf`` when the inner integral diverges.
    """
    if t < r0:
        raise ValueError("need r0 <= t")
    if t == r0:
        return 0.0
    horizon = max(float(t), settings.horizon(t))
    nested = NestedIntegral(C, make_log_weight(f, alpha), r0, horizon, settings)
    return float(np.exp(nested.log_F(t)))


def make_log_weight(f, alpha=None) -> Callable:
    """``s -> log f(s) - log alpha(s)`` from radial functions (``alpha`` optional)."""

    def log_weight(s):
        out = np.asarray(f.log(s), dtype=float)
        if alpha is not None:
            out = out - np.asarray(alpha.log(s), dtype=float)
        return out

    return log_weight
