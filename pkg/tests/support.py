"""Shared problem builders for the test suite."""

from __future__ import annotations

import numpy as np

from specgap.profile import HalfLine, IsotropicEuclidean, Problem, constant, family, radialize
from specgap.quad import QuadratureSettings, cumulative_C


def c_drift(c: float, R_max: float = 60.0):
    """Coefficients of ``g'' - c g'`` on the half-line (gap ``c^2/4``)."""
    return radialize(Problem(HalfLine(constant(1.0), family("linear", c1=-c)), 0.0, R_max))


def settings_for(coeffs, **kw) -> QuadratureSettings:
    kw.setdefault("tail_horizon", coeffs.R_max)
    return QuadratureSettings(**kw)


def cumulative(coeffs, r0=None, settings=None):
    settings = settings or settings_for(coeffs)
    r0 = coeffs.r0 if r0 is None else r0
    return cumulative_C(coeffs.gamma, r0, settings.tail_horizon, settings)


def radial_power(R_max: float = 1000.0):
    """R^3, a = (1+r^2)^2, V = -2 log(1+r^2), base radius 1."""
    v = IsotropicEuclidean(3, family("one_plus_r2_pow", p=2.0), family("log_one_plus_r2", k=-2.0))
    return radialize(Problem(v, 1.0, R_max))


def damped_gaussian(R_max: float = 20.0, q2: float = -1.0):
    """R^3, a = 1/(1+r), V = q2 r^2, base radius 1."""
    v = IsotropicEuclidean(3, family("one_plus_r_pow", p=-1.0), family("poly", c2=q2))
    return radialize(Problem(v, 1.0, R_max))


def log_grid(lo: float, hi: float, n: int) -> np.ndarray:
    return np.geomspace(lo, hi, n)
