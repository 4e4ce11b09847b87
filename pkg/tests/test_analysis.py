import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st
from scipy.integrate import quad

from ckptsim.analysis import (
    beta_lim,
    compose_waste,
    exact_exponential_makespan,
    optimize_period,
    period_daly,
    period_exponential_lambert,
    period_no_pred,
    period_optimal_exponential,
    period_pred,
    period_pred_approx,
    period_rfo,
    period_young,
    prediction_waste_coefficients,
    simple_policy_fault_waste,
    waste_no_prediction,
    waste_simple_policy,
    waste_with_prediction,
)
from ckptsim.model import SECONDS_PER_YEAR, CostParams, PredictorParams

MU_IND = 125 * SECONDS_PER_YEAR
COSTS = CostParams(regular_ckpt=600, proactive_ckpt=600, downtime=60, recovery=600)
PRED = PredictorParams(recall=0.85, precision=0.82)


# ---------------------------------------------------------------------------
# First-order periods
# ---------------------------------------------------------------------------


def test_period_young_reference_rows():
    assert period_young(MU_IND / 2**10, 600) == pytest.approx(68_567, abs=1)
    assert period_young(MU_IND / 2**19, 600) == pytest.approx(3_604, abs=1)
    assert period_young(12345.0, 0.0) == 0.0


def test_period_daly_reference_rows():
    assert period_daly(MU_IND / 2**10, 600, 60, 600) == pytest.approx(68_573, abs=1)
    assert period_daly(MU_IND / 2**19, 600, 60, 600) == pytest.approx(3_733, abs=1)
    assert period_daly(5000.0, 30.0, 0.0, 0.0) == period_young(5000.0, 30.0)


def test_period_rfo_reference_rows():
    assert period_rfo(MU_IND / 2**10, 600, 60, 600) == pytest.approx(67_961, abs=1)
    assert period_rfo(MU_IND / 2**19, 600, 60, 600) == pytest.approx(2_869, abs=1)
    assert period_rfo(5000.0, 30.0, 0.0, 0.0) == pytest.approx(math.sqrt(2 * 5000 * 30))
    with pytest.raises(ValueError):
        period_rfo(100.0, 30.0, 60.0, 60.0)


def test_period_ordering_across_reference_rows():
    for k in range(10, 20):
        mu = MU_IND / 2**k
        assert period_daly(mu, 600, 60, 600) >= period_young(mu, 600) >= period_rfo(mu, 600, 60, 600)


# ---------------------------------------------------------------------------
# Plain periodic waste
# ---------------------------------------------------------------------------


def test_waste_no_prediction_at_period_equal_ckpt():
    costs = CostParams(regular_ckpt=600, downtime=0, recovery=0)
    br = waste_no_prediction(600.0, 1e12, costs)
    assert br.fault_free == 1.0
    assert br.total == pytest.approx(1.0, rel=1e-9)


def test_waste_no_prediction_at_rfo_minimum():
    mu = 60_000.0
    costs = CostParams(regular_ckpt=600, downtime=60, recovery=600)
    t_rfo = period_rfo(mu, 600, 60, 600)
    assert t_rfo == pytest.approx(8438.48, abs=0.01)
    br = waste_no_prediction(t_rfo, mu, costs)
    assert br.total == pytest.approx(0.14664, abs=5e-6)
    assert br.valid
    # grid oracle: the interior minimiser of the composed waste sits at t_rfo
    grid = np.arange(600.0, 0.27 * mu, 0.5)
    vals = [waste_no_prediction(t, mu, costs).total for t in grid]
    assert grid[int(np.argmin(vals))] == pytest.approx(t_rfo, abs=0.5)
    # unimodal on the admissible range
    diffs = np.sign(np.diff(vals))
    assert (np.diff(diffs) >= 0).all()


def test_waste_no_prediction_rejects_short_period():
    with pytest.raises(ValueError):
        waste_no_prediction(599.0, 60_000.0, CostParams(regular_ckpt=600))


def test_waste_breakdown_composition_identity():
    rng = np.random.default_rng(7)
    for _ in range(200):
        mu = rng.uniform(1e3, 1e7)
        c = rng.uniform(1.0, 0.1 * mu)
        costs = CostParams(regular_ckpt=c, downtime=rng.uniform(0, 0.1 * mu), recovery=rng.uniform(0, 0.1 * mu))
        t = rng.uniform(c, 3 * c + 0.3 * mu)
        br = waste_no_prediction(t, mu, costs)
        assert br.total == pytest.approx(compose_waste(br.fault_free, br.fault), rel=1e-12)


def test_waste_validity_flag_reports_out_of_range():
    # tiny MTBF drives the fault part above 1: flagged, not clamped
    costs = CostParams(regular_ckpt=10, downtime=50, recovery=50)
    br = waste_no_prediction(100.0, 120.0, costs)
    assert not br.valid
    assert br.fault > 1.0


# ---------------------------------------------------------------------------
# Exact Exponential makespan and optimum
# ---------------------------------------------------------------------------


def test_exact_makespan_triple_comparison():
    mu = MU_IND / 2**10
    costs = CostParams(regular_ckpt=600, downtime=60, recovery=600)
    mk = lambda t: exact_exponential_makespan(t, mu, costs, t_base=7200.0)
    assert mk(68_240.0) < mk(60_000.0)
    assert mk(68_240.0) < mk(76_000.0)


def test_exact_makespan_divergence_and_growth():
    costs = CostParams(regular_ckpt=600, downtime=60, recovery=600)
    mu = 60_000.0
    assert exact_exponential_makespan(600.0 + 1e-7, mu, costs, 1.0) > 1e9
    big = [exact_exponential_makespan(t, mu, costs, 1.0) for t in (1e5, 2e5, 4e5)]
    assert big[0] < big[1] < big[2]
    with pytest.raises(ValueError):
        exact_exponential_makespan(600.0, mu, costs, 1.0)


def test_period_optimal_exponential_matches_lambert_closed_form():
    for k in (10, 13, 16, 19):
        mu = MU_IND / 2**k
        num = period_optimal_exponential(mu, 600.0)
        closed = period_exponential_lambert(mu, 600.0)
        assert num == pytest.approx(closed, abs=0.5)


def test_period_optimal_exponential_reference_rows():
    assert period_optimal_exponential(MU_IND / 2**16, 600.0) == pytest.approx(8701, abs=1)
    assert period_optimal_exponential(MU_IND / 2**19, 600.0) == pytest.approx(3218, abs=1)


@given(
    mu=st.floats(min_value=5e3, max_value=1e9),
    c=st.floats(min_value=1.0, max_value=3000.0),
)
@settings(max_examples=60, deadline=None)
def test_period_optimal_exponential_is_a_minimum(mu, c):
    t_opt = period_optimal_exponential(mu, c)
    kernel = lambda t: math.expm1(t / mu) / (t - c)
    step = max(1.0, 0.01 * t_opt)
    assert kernel(t_opt) <= kernel(t_opt + step) + 1e-15
    if t_opt - step > c:
        assert kernel(t_opt) <= kernel(t_opt - step) + 1e-15


# ---------------------------------------------------------------------------
# Constant-trust policy
# ---------------------------------------------------------------------------


def _fault_waste_by_quadrature(t, q, mu, pred, costs):
    """Independent oracle: integrate the three prediction outcomes over the
    period and combine with the unpredicted-fault overhead."""
    cp, d, rr = costs.proactive_ckpt, costs.downtime, costs.recovery
    r, p = pred.recall, pred.precision
    mu_np = math.inf if r == 1 else mu / (1 - r)
    mu_p = math.inf if r == 0 else p * mu / r
    lost_missed = quad(lambda x: p * (x + d + rr) / t, 0, cp)[0]
    lost_ignored = (1 - q) * quad(lambda x: p * (x + d + rr) / t, cp, t)[0]
    lost_trusted = q * quad(lambda x: (p * (cp + d + rr) + (1 - p) * cp) / t, cp, t)[0]
    unpred = 0.0 if math.isinf(mu_np) else (t / 2 + d + rr) / mu_np
    pred_part = 0.0 if math.isinf(mu_p) else (lost_missed + lost_ignored + lost_trusted) / mu_p
    return unpred + pred_part


def test_simple_policy_fault_waste_reference_value():
    got = simple_policy_fault_waste(10_000.0, 1.0, 60_000.0, PRED, COSTS)
    assert got == pytest.approx(0.03350, abs=5e-6)
    assert got == pytest.approx(_fault_waste_by_quadrature(10_000.0, 1.0, 60_000.0, PRED, COSTS), rel=1e-10)


def test_simple_policy_matches_quadrature_oracle():
    rng = np.random.default_rng(11)
    for _ in range(25):
        mu = rng.uniform(1e4, 1e6)
        costs = CostParams(
            regular_ckpt=rng.uniform(10, 0.01 * mu),
            proactive_ckpt=rng.uniform(10, 0.01 * mu),
            downtime=rng.uniform(0, 0.01 * mu),
            recovery=rng.uniform(0, 0.01 * mu),
        )
        pred = PredictorParams(recall=rng.uniform(0.05, 0.95), precision=rng.uniform(0.05, 1.0))
        t = rng.uniform(max(costs.regular_ckpt, costs.proactive_ckpt) * 1.5, 0.2 * mu)
        q = rng.uniform(0, 1)
        assert simple_policy_fault_waste(t, q, mu, pred, costs) == pytest.approx(
            _fault_waste_by_quadrature(t, q, mu, pred, costs), rel=1e-9
        )


def test_simple_policy_never_trust_reduces_to_plain_waste():
    fault = simple_policy_fault_waste(10_000.0, 0.0, 60_000.0, PRED, COSTS)
    assert fault == pytest.approx((10_000.0 / 2 + 660) / 60_000.0, rel=1e-12)


def test_simple_policy_total_minimised_at_a_trust_endpoint():
    rng = np.random.default_rng(23)
    for _ in range(100):
        mu = rng.uniform(1e4, 1e7)
        costs = CostParams(
            regular_ckpt=rng.uniform(1, 0.05 * mu),
            proactive_ckpt=rng.uniform(1, 0.05 * mu),
            downtime=rng.uniform(0, 0.05 * mu),
            recovery=rng.uniform(0, 0.05 * mu),
        )
        pred = PredictorParams(recall=rng.uniform(0, 1), precision=rng.uniform(0.05, 1))
        t = rng.uniform(max(costs.regular_ckpt, costs.proactive_ckpt), 0.3 * mu)
        qs = np.linspace(0, 1, 11)
        wastes = [waste_simple_policy(t, q, mu, pred, costs) for q in qs]
        best_endpoint = min(wastes[0], wastes[-1])
        assert best_endpoint <= min(wastes) + 1e-12


def test_simple_policy_rejects_bad_trust_prob():
    with pytest.raises(ValueError):
        waste_simple_policy(10_000.0, 1.5, 60_000.0, PRED, COSTS)


# ---------------------------------------------------------------------------
# Offset-threshold policy waste and periods
# ---------------------------------------------------------------------------


def test_beta_lim_values():
    assert beta_lim(COSTS, PRED) == pytest.approx(731.71, abs=0.01)
    assert beta_lim(CostParams(600, 600, 0, 0), PredictorParams(0.5, 1.0)) == 600.0
    assert beta_lim(CostParams(600, 60, 0, 0), PredictorParams(0.5, 0.4)) == pytest.approx(150.0)


def test_waste_with_prediction_branches_agree_at_break_even():
    blim = beta_lim(COSTS, PRED)
    w1 = waste_no_prediction(blim, 60_000.0, COSTS).total
    w2 = waste_with_prediction(blim, 60_000.0, PRED, COSTS)
    assert abs(w1 - w2) <= 1e-12 * max(1.0, w1)


def test_waste_with_prediction_silent_predictor_reduces_to_plain():
    pred0 = PredictorParams(recall=0.0, precision=0.82)
    for t in (700.0, 5_000.0, 40_000.0):
        assert waste_with_prediction(t, 60_000.0, pred0, COSTS) == pytest.approx(
            waste_no_prediction(t, 60_000.0, COSTS).total, rel=1e-12
        )


def test_waste_with_prediction_reference_value():
    got = waste_with_prediction(21_607.0, 60_000.0, PRED, COSTS)
    assert got == pytest.approx(0.0746, abs=5e-5)
    # independent route: the pre-expansion fault waste composed with C/T
    t, mu = 21_607.0, 60_000.0
    r, p = PRED.recall, PRED.precision
    cp, d, rr = 600.0, 60.0, 600.0
    fault = ((1 - r) * t / 2 + (r / p) * cp * (1 - cp / (2 * p * t)) + d + rr) / mu
    assert got == pytest.approx(compose_waste(600.0 / t, fault), rel=1e-12)


def test_period_no_pred_clamps():
    assert period_no_pred(60_000.0, PRED, COSTS) == pytest.approx(731.71, abs=0.01)
    wide = CostParams(600, 60_000, 60, 600)
    assert period_no_pred(60_000.0, PredictorParams(0.85, 1.0), wide) == pytest.approx(8438.48, abs=0.01)
    low = CostParams(600, 60, 60, 600)
    assert period_no_pred(60_000.0, PredictorParams(0.85, 1.0), low) == 600.0


def test_period_pred_reference_value_and_grid_oracle():
    t = period_pred(60_000.0, PRED, COSTS)
    assert t == pytest.approx(21_607, abs=5)
    blim = beta_lim(COSTS, PRED)
    grid = np.arange(blim, 1e5, 1.0)
    u, v, w, x = prediction_waste_coefficients(60_000.0, PRED, COSTS)
    vals = u / grid**2 + v / grid + w + x * grid
    assert grid[int(np.argmin(vals))] == pytest.approx(t, abs=1.0)


def test_period_pred_approaches_rfo_as_recall_vanishes():
    pred = PredictorParams(recall=1e-9, precision=0.82)
    assert period_pred(60_000.0, pred, COSTS) == pytest.approx(
        period_rfo(60_000.0, 600, 60, 600), abs=1.0
    )


def test_period_pred_clamps_to_break_even():
    pred = PredictorParams(recall=0.85, precision=0.01)
    assert period_pred(60_000.0, pred, COSTS) == pytest.approx(60_000.0)


def test_period_pred_rejects_full_recall():
    with pytest.raises(ValueError):
        period_pred(60_000.0, PredictorParams(1.0, 0.82), COSTS)


def test_period_pred_zero_proactive_cost_collapses_to_quadratic():
    costs = CostParams(regular_ckpt=600, proactive_ckpt=0, downtime=60, recovery=600)
    pred = PredictorParams(recall=0.85, precision=1.0)
    u, v, w, x = prediction_waste_coefficients(60_000.0, pred, costs)
    assert u == 0.0
    assert period_pred(60_000.0, pred, costs) == pytest.approx(math.sqrt(v / x), rel=1e-9)


def test_period_pred_negative_linear_coefficient_branch():
    # large proactive cost and small MTBF push v below zero
    costs = CostParams(regular_ckpt=600, proactive_ckpt=1200, downtime=60, recovery=600)
    pred = PredictorParams(recall=0.9, precision=0.5)
    mu = 5_000.0
    u, v, w, x = prediction_waste_coefficients(mu, pred, costs)
    assert v < 0
    t = period_pred(mu, pred, costs)
    blim = beta_lim(costs, pred)
    grid = np.arange(max(blim, 600.0), 1e5, 0.5)
    vals = u / grid**2 + v / grid + w + x * grid
    t_grid = grid[int(np.argmin(vals))]
    assert min(vals) >= u / t**2 + v / t + w + x * t - 1e-9 or abs(t - t_grid) <= 1.0


def test_period_pred_approx_values():
    assert period_pred_approx(60_000.0, 600.0, 0.85) == pytest.approx(21_909, abs=1)
    assert period_pred_approx(60_000.0, 600.0, 0.0) == pytest.approx(math.sqrt(2 * 60_000 * 600))
    assert period_pred_approx(60_000.0, 600.0, 0.7) == pytest.approx(15_492, abs=1)
    # within 2% of the exact trusted-branch optimum at these parameters
    assert period_pred_approx(60_000.0, 600.0, 0.85) == pytest.approx(
        period_pred(60_000.0, PRED, COSTS), rel=0.02
    )


def test_optimize_period_prefers_trusting_good_predictor():
    rec = optimize_period(60_000.0, PRED, COSTS)
    assert rec.branch == "prediction"
    assert rec.period == pytest.approx(21_607, abs=5)
    assert rec.predicted_waste == pytest.approx(0.0746, abs=5e-5)
    w_np = waste_no_prediction(period_no_pred(60_000.0, PRED, COSTS), 60_000.0, COSTS).total
    assert w_np == pytest.approx(0.823, abs=5e-4)
    assert rec.predicted_waste < w_np


def test_optimize_period_silent_predictor_keeps_plain_periodic():
    pred0 = PredictorParams(recall=0.0, precision=1.0)
    costs = CostParams(regular_ckpt=600, proactive_ckpt=60_000, downtime=60, recovery=600)
    rec = optimize_period(60_000.0, pred0, costs)
    assert rec.branch == "no-prediction"
    assert rec.period == pytest.approx(period_rfo(60_000.0, 600, 60, 600))


def test_optimize_period_cheap_perfect_proactive():
    costs = CostParams(regular_ckpt=600, proactive_ckpt=0, downtime=60, recovery=600)
    pred = PredictorParams(recall=0.85, precision=1.0)
    rec = optimize_period(60_000.0, pred, costs)
    assert rec.branch == "prediction"
    u, v, w, x = prediction_waste_coefficients(60_000.0, pred, costs)
    assert rec.period == pytest.approx(math.sqrt(v / x), rel=1e-9)


# ---------------------------------------------------------------------------
# Property sweeps
# ---------------------------------------------------------------------------


def _random_setting(rng):
    mu = rng.uniform(1e3, 1e7)
    costs = CostParams(
        regular_ckpt=rng.uniform(1.0, 0.1 * mu),
        proactive_ckpt=rng.uniform(1.0, 0.1 * mu),
        downtime=rng.uniform(1.0, 0.1 * mu),
        recovery=rng.uniform(1.0, 0.1 * mu),
    )
    pred = PredictorParams(recall=rng.uniform(0.0, 1.0 - 1e-9), precision=rng.uniform(1e-6, 1.0))
    return mu, costs, pred


def test_branch_continuity_over_random_draws():
    rng = np.random.default_rng(42)
    for _ in range(1000):
        mu, costs, pred = _random_setting(rng)
        blim = beta_lim(costs, pred)
        if blim < costs.regular_ckpt:
            continue
        u, v, w, x = prediction_waste_coefficients(mu, pred, costs)
        w1 = waste_no_prediction(blim, mu, costs).total
        w2 = u / blim**2 + v / blim + w + x * blim
        assert abs(w1 - w2) <= 1e-10 * max(1.0, abs(w1))


def test_trusted_branch_convex_when_linear_coefficient_nonnegative():
    rng = np.random.default_rng(5)
    checked = 0
    while checked < 40:
        mu, costs, pred = _random_setting(rng)
        u, v, w, x = prediction_waste_coefficients(mu, pred, costs)
        if v < 0 or x <= 0:
            continue
        checked += 1
        t_extr = period_pred(mu, pred, costs)
        blim = beta_lim(costs, pred)
        lo = max(blim, costs.regular_ckpt)
        grid = np.linspace(lo, max(10 * t_extr, lo * 1.01), 4001)
        vals = u / grid**2 + v / grid + w + x * grid
        # unimodal: signs of successive differences never flip back down
        signs = np.sign(np.diff(vals))
        assert (np.diff(signs) >= 0).all()
        i = int(np.argmin(vals))
        step = grid[1] - grid[0]
        assert abs(grid[i] - t_extr) <= step + 1e-9 or vals[i] >= u / t_extr**2 + v / t_extr + w + x * t_extr - 1e-12
