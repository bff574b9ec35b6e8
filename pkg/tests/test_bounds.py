import math

import mpmath
import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from specgap.bounds import (
    CITATIONS,
    BoundResult,
    Verdict,
    combine_eq13,
    criterion_cor13a,
    criterion_cor13b,
    golden_section_min,
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
from specgap.oracle import discretize, lambda1_discrete, lambda_c_discrete, lambda_R_discrete
from specgap.profile import CallableFunction, DirectRadial, HalfLine, Problem, constant, family, mu_ball, radialize
from specgap.quad import QuadratureSettings, cumulative_C
from support import c_drift, cumulative, radial_power

S60 = QuadratureSettings(tail_horizon=60.0)


def C_of(gamma, r0=0.0, horizon=60.0):
    s = QuadratureSettings(tail_horizon=horizon)
    return cumulative_C(gamma, r0, horizon, s), s


def direct(gamma, mu, beta=None, R_max=60.0, r0=0.0):
    beta = constant(1.0) if beta is None else beta
    return radialize(Problem(DirectRadial(gamma, constant(1.0), beta, mu), r0, R_max))


# ---------------------------------------------------------------------------
# result types


def test_result_invariants():
    with pytest.raises(ValueError):
        BoundResult("lower", -1.0, "thm12")
    with pytest.raises(ValueError):
        BoundResult("lower", math.inf, "thm12")
    with pytest.raises(ValueError):
        BoundResult("sideways", 1.0, "thm12")
    assert BoundResult("upper", math.inf, "eq17").vacuous
    assert BoundResult("lower", 0.5, "eq28").citation == CITATIONS["eq28"]
    with pytest.raises(ValueError):
        Verdict("maybe", "")


def test_golden_section_on_parabola():
    x, y, trace = golden_section_min(lambda t: (t - 0.7) ** 2, 0.0, 2.0, xtol=1e-12)
    assert abs(x - 0.7) < 1e-6 and y < 1e-12 and len(trace) <= 200


# ---------------------------------------------------------------------------
# lower_radial


def test_sharp_constant_drift_bound():
    C, s = C_of(constant(-2.0))
    res = lower_radial(C, None, family("exponential", theta=1.0), 0.0, s)
    assert res.direction == "lower" and res.method == "thm12" and res.quantity == "lambda1"
    assert abs(res.value - 1.0) < 1e-6
    assert "test_function" in res.diagnostics


def test_no_confinement_gives_zero():
    C, s = C_of(constant(0.0), horizon=200.0)
    res = lower_radial(C, None, constant(1.0), 0.0, s)
    assert res.value == 0.0 and "divergent" in res.flags


def test_radial_diffusion_example_with_square_root():
    co = radial_power(R_max=1000.0)
    s = QuadratureSettings(tail_horizon=1000.0)
    C = cumulative(co, settings=s)
    res = lower_radial(C, co.alpha, family("sqrt"), 1.0, s)
    assert res.method == "thm31" and res.quantity == "lambda_c"
    assert 0 < res.value < math.inf
    assert 1.0 / res.value <= 4.1


@pytest.mark.parametrize("c,theta", [(2.0, 0.5), (2.0, 1.0), (3.0, 2.0), (6.0, 3.0)])
def test_matches_closed_form_family(c, theta):
    # f/F = theta (c - theta) e^{theta t} / (e^{theta t} - 1), decreasing to theta (c - theta)
    C, s = C_of(constant(-c))
    res = lower_radial(C, None, family("exponential", theta=theta), 0.0, s)
    exact = theta * (c - theta) / -math.expm1(-theta * 60.0)
    assert res.value == pytest.approx(exact, rel=1e-6)


def test_theta_beyond_drift_is_vacuous():
    C, s = C_of(constant(-2.0))
    assert lower_radial(C, None, family("exponential", theta=2.5), 0.0, s).value == 0.0


def test_scaling_invariance():
    C, s = C_of(CallableFunction(lambda r: -2.0 - 0.5 * np.sin(r)))
    a = lower_radial(C, None, family("exponential", theta=0.7), 0.0, s)
    b = lower_radial(C, None, family("exponential", c=5.0, theta=0.7), 0.0, s)
    assert abs(a.value - b.value) < 1e-12


@settings(max_examples=12)
@given(st.floats(1.0, 3.0), st.floats(0.0, 1.0), st.floats(0.1, 3.0))
def test_monotone_in_gamma(c, amp, freq):
    g2 = CallableFunction(lambda r: -c + 0.3 * np.sin(freq * r))
    g1 = CallableFunction(lambda r: -c + 0.3 * np.sin(freq * r) - amp * (1 + np.cos(r)))
    f = family("exponential", theta=0.3)
    C1, s = C_of(g1)
    C2, _ = C_of(g2)
    assert lower_radial(C1, None, f, 0.0, s).value >= lower_radial(C2, None, f, 0.0, s).value - 1e-9


def test_slowly_decaying_ratio_is_followed_past_the_horizon():
    # gamma = -2 - 1/(1+r): the ratio for f = e^t approaches 1 only like 1/t
    gamma = CallableFunction(lambda r: -2.0 - 1.0 / (1.0 + r))
    C, s = C_of(gamma, horizon=40.0)
    f = family("exponential", theta=1.0)
    plain = lower_radial(C, None, f, 0.0, s, extrapolate=False)
    followed = lower_radial(C, None, f, 0.0, s)
    assert "minimum at horizon" in plain.flags
    assert "extrapolated beyond horizon" in followed.flags
    assert followed.value < plain.value
    assert followed.value <= 1.0 + 1e-3


# ---------------------------------------------------------------------------
# half-line derivative form


def test_derivative_form_sharp_value():
    C, s = C_of(constant(-2.0))
    res = lower_1d_eq16(C, family("exponential", theta=1.0), s)
    assert res.method == "eq16"
    assert abs(res.value - 1.0) < 1e-6


def test_derivative_form_rejects_constant_f():
    C, s = C_of(constant(-2.0))
    with pytest.raises(ValueError):
        lower_1d_eq16(C, constant(1.0), s)


def test_derivative_form_divergent_tail():
    C, s = C_of(constant(0.0), horizon=200.0)
    res = lower_1d_eq16(C, family("exponential", theta=1.0), s)
    assert res.value == 0.0 and "divergent" in res.flags


# ---------------------------------------------------------------------------
# test-function search


def _sweep_oracle(c, n=10_000):
    """Best closed-form bound over a dense theta grid."""
    theta = np.geomspace(0.01, 4.0, n)
    value = np.where(theta < c, theta * (c - theta) / -np.expm1(-theta * 60.0), 0.0)
    k = int(np.argmax(value))
    return theta[k], value[k]


def test_search_finds_half_drift():
    theta_ref, value_ref = _sweep_oracle(2.0)
    C, s = C_of(constant(-2.0))
    res = search_test_function(C, None, 0.0, settings=s)
    assert abs(res.diagnostics["theta"] - 1.0) < 1e-3
    assert abs(theta_ref - 1.0) < 1e-3
    assert abs(res.value - 1.0) < 1e-6
    assert res.value == pytest.approx(value_ref, abs=1e-6)


def test_search_strong_drift():
    theta_ref, value_ref = _sweep_oracle(6.0)
    C, s = C_of(constant(-6.0))
    res = search_test_function(C, None, 0.0, theta_range=(0.01, 6.0), settings=s)
    assert abs(res.diagnostics["theta"] - 3.0) < 3e-3
    assert abs(theta_ref - 3.0) < 3e-3
    assert abs(res.value - 9.0) < 1e-5


def test_small_budget_is_still_close():
    C, s = C_of(constant(-2.0))
    res = search_test_function(C, None, 0.0, budget=8, settings=s)
    assert 0.95 <= res.value <= 1.0 + 1e-9
    assert res.diagnostics["evaluations"] <= 8


def test_search_argument_checks():
    C, s = C_of(constant(-2.0))
    with pytest.raises(ValueError):
        search_test_function(C, None, 0.0, budget=4, settings=s)
    with pytest.raises(ValueError):
        search_test_function(C, None, 0.0, family_name="cubic", settings=s)
    with pytest.raises(ValueError):
        search_test_function(C, None, 0.0, theta_range=(2.0, 1.0), settings=s)


def test_search_records_trace_and_theta():
    C, s = C_of(constant(-2.0))
    res = search_test_function(C, None, 0.0, budget=12, settings=s)
    assert res.diagnostics["theta"] > 0
    assert len(res.diagnostics["trace"]) == res.diagnostics["evaluations"]


# ---------------------------------------------------------------------------
# qualitative criteria


def test_cor13a_constant_drift():
    C, s = C_of(constant(-2.0))
    v = criterion_cor13a(C, s)
    assert v.outcome == "gap_exists"
    assert v.diagnostics["sup"] == pytest.approx(0.5, rel=1e-6)


def test_cor13a_no_drift():
    C, s = C_of(constant(0.0), horizon=200.0)
    assert criterion_cor13a(C, s).outcome == "inconclusive"


def test_cor13a_weak_drift_agrees_with_denser_grid():
    C, s = C_of(CallableFunction(lambda r: -1.0 / np.sqrt(r), open_start=True), r0=1.0, horizon=1000.0)
    coarse = criterion_cor13a(C, s)
    fine = criterion_cor13a(C, s, n=2560)
    assert coarse.outcome == fine.outcome == "inconclusive"
    assert fine.diagnostics["trend_last_quarter"] > 1.01


def test_cor13b_examples():
    s = QuadratureSettings(tail_horizon=1e4)
    compact = criterion_cor13b(CallableFunction(lambda r: -1.0 + r**-2.0, open_start=True), 0.5, 1.0, s)
    assert compact.outcome == "gap_exists"
    # int_1^sqrt2 (r^-2 - 1/2) dr = 1 - 1/sqrt2 - (sqrt2 - 1)/2
    assert compact.diagnostics["integral"] == pytest.approx(1 - 2**-0.5 - (2**0.5 - 1) / 2, rel=1e-7)
    assert criterion_cor13b(CallableFunction(lambda r: -1.0 / r, open_start=True), 0.3, 1.0, s).outcome \
        == "inconclusive"
    assert criterion_cor13b(constant(-2.0), 1.0, 1.0, s).outcome == "gap_exists"
    with pytest.raises(ValueError):
        criterion_cor13b(constant(-2.0), 0.0)


def test_cor14_examples():
    assert verdict_cor14(constant(-2.0)).outcome == "gap_exists"
    lap = CallableFunction(lambda r: 2.0 / r, open_start=True)
    assert verdict_cor14(lap, pole_assumption=True).outcome == "no_gap"
    assert verdict_cor14(lap, pole_assumption=False).outcome == "inconclusive"
    assert verdict_cor14(CallableFunction(np.sin)).outcome == "inconclusive"


# ---------------------------------------------------------------------------
# closed forms


def test_eq28_examples():
    assert lower_eq28(constant(-3.0), 1.0).value == pytest.approx(2.25, rel=1e-15)
    assert lower_eq28(constant(0.0), 1.0).value == 0.0
    res = lower_eq28(CallableFunction(lambda s: -s), 4.0)
    assert res.value == pytest.approx(4.0, rel=1e-12)
    assert res.quantity == "lambda_c"


def test_eq28_dense_grid_oracle():
    gamma = CallableFunction(lambda s: -1.0 - np.exp(-s) * np.cos(5 * s))
    # the dip sits near s = pi/5; far out the profile is within e^-3 of 1
    grid = np.concatenate([np.linspace(0.5, 3.0, 2_000_001), np.linspace(3.0, 1e4, 100_001)])
    beta = np.min(np.maximum(1.0 + np.exp(-grid) * np.cos(5 * grid), 0.0))
    assert lower_eq28(gamma, 0.5).value == pytest.approx(beta**2 / 4, rel=1e-6)


def test_eq28_below_matching_exponential_bound():
    gamma = CallableFunction(lambda r: -2.0 - np.exp(-r))
    C, s = C_of(gamma)
    eq28 = lower_eq28(gamma, 0.0, horizon=60.0)
    beta = eq28.diagnostics["beta"]
    radial = lower_radial(C, None, family("exponential", theta=beta / 2), 0.0, s)
    assert eq28.value <= radial.value + 1e-9


def test_eq27_against_high_precision():
    mpmath.mp.dps = 50
    ref = mpmath.pi**2 / 8 * 2 / (mpmath.e - 1)
    mpmath.mp.dps = 15
    res = lambda_R_eq27(2.0, 1.0)
    assert res.value == pytest.approx(float(ref), rel=1e-14)
    assert f"{res.value:.5f}" == "1.43597"
    assert res.quantity == "lambda_R"


def test_eq27_flat_limit():
    assert lambda_R_eq27(0.0, 2.0).value == pytest.approx(math.pi**2 / 16, rel=1e-15)
    assert lambda_R_eq27(1e-12, 2.0).value == pytest.approx(math.pi**2 / 16, rel=1e-10)
    with pytest.raises(ValueError):
        lambda_R_eq27(-1.0, 1.0)


def test_eq27_below_unit_interval_neumann_gap():
    flat = radialize(Problem(HalfLine(constant(1.0), constant(0.0)), 0.0, 2.0))
    oracle = lambda_R_discrete(discretize(flat, 2.0, 4096), 1.0)
    assert oracle == pytest.approx(math.pi**2, rel=1e-3)
    assert lambda_R_eq27(0.0, 1.0).value <= oracle


def test_eq13_examples():
    assert combine_eq13(1.0, 2.0, 0.9, 0.0, 3.0).value == pytest.approx(15.8 / 45.9, rel=1e-14)
    assert f"{15.8 / 45.9:.6f}" == "0.344227"
    assert combine_eq13(1.0, 1.0, 1.0, 0.0, 1.0).value == pytest.approx(0.2, rel=1e-15)
    clamped = combine_eq13(0.1, 1.0, 0.5, 0.0, 1.0)
    assert clamped.value == 0.0 and "clamped" in clamped.flags and clamped.diagnostics["raw"] < 0
    with pytest.raises(ValueError):
        combine_eq13(1.0, 1.0, 0.0, 0.0, 1.0)


@settings(max_examples=500)
@given(st.floats(1e-3, 1e3), st.floats(1e-3, 1e3), st.floats(1e-3, 1.0), st.floats(1e-2, 1e2))
def test_eq13_never_exceeds_exterior_value(lc, lR, mu, L):
    assert combine_eq13(lc, lR, mu, 0.0, L).value <= lc * (1 + 1e-12)


def test_eq12_examples():
    assert upper_eq12(1.0, 0.5).value == 2.0
    assert upper_eq12(1.0, 1.0).value == 1.0
    with pytest.raises(ValueError):
        upper_eq12(1.0, 0.0)


def test_eq12_with_oracle_values():
    co = c_drift(2.0, R_max=30.0)
    op = discretize(co, 30.0, 3000)
    lc = lambda_c_discrete(op, 1.0)
    res = upper_eq12(lc, mu_ball(co, 1.0))
    assert res.value == pytest.approx(1.1565, rel=2e-2)
    assert lambda1_discrete(op) <= res.value


def test_eq17_constant_drift_is_sharp():
    res = upper_eq17(c_drift(2.0))
    assert abs(res.diagnostics["eps_star"] - 2.0) <= 2e-3
    assert abs(res.value - 1.0) <= 2e-3


def test_eq17_gaussian_density_is_vacuous():
    res = upper_eq17(direct(constant(-1.0), family("power_exp", p=0.0, q2=-1.0)))
    assert res.value == math.inf and res.vacuous


def test_eq17_polynomial_density_has_no_moment():
    res = upper_eq17(direct(constant(-1.0), family("one_plus_r_pow", p=-4.0)))
    assert res.value == 0.0 and "no exponential moment" in res.flags


def test_thm32_with_unit_beta_matches_eq17():
    co = c_drift(2.0)
    a, b = upper_eq17(co), upper_thm32(constant(1.0), co)
    assert b.value == pytest.approx(a.value, rel=2e-3)


def test_thm32_radial_diffusion_example_is_vacuous():
    co = radial_power(R_max=1000.0)
    res = upper_thm32(co.beta, co)
    assert res.value == math.inf
    assert res.diagnostics["h_at_horizon"] == pytest.approx(math.pi / 2, rel=1e-4)


def test_thm32_log_distance():
    co = direct(constant(-1.0), family("exponential", theta=-1.0), beta=family("one_plus_r_pow", p=2.0))
    res = upper_thm32(co.beta, co)
    assert res.value == math.inf
    assert res.diagnostics["h_at_horizon"] == pytest.approx(math.log1p(1e5), rel=1e-9)


def test_thm32_rejects_nonpositive_beta():
    with pytest.raises(ValueError):
        upper_thm32(constant(0.0), c_drift(2.0))
