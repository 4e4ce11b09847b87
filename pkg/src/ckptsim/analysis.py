"""Closed-form waste models and checkpoint-period optimisation.

The waste of an execution is the fraction of wall time not spent on
useful work.  For periodic checkpointing with period T, checkpoint cost
C, downtime D, recovery R and platform MTBF mu, the first-order model
composes a fault-free part C/T with a fault part (D + R + T/2)/mu:

    total = ff + fault - ff * fault

With a predictor of recall r and precision p, the optimal policy ignores
predictions arriving earlier than Cp/p into a period and trusts all
later ones; the resulting total waste is a piecewise function of T that
switches branch at Cp/p.  The branch above Cp/p has the form

    u/T^2 + v/T + w + x*T

whose stationary point solves the cubic x*T^3 - v*T - 2*u = 0.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np
from scipy.optimize import brentq, minimize_scalar
from scipy.special import lambertw

from .model import CostParams, PredictorParams


class ConvergenceError(RuntimeError):
    """A bracketed numerical search failed to converge."""


@dataclass(frozen=True)
class WasteBreakdown:
    """Fault-free and fault-induced waste fractions and their composition.

    `valid` is False when any component leaves [0, 1]: the first-order
    model is out of its trust region there, and callers decide what to do
    with such values (they are reported, never clamped).
    """

    fault_free: float
    fault: float
    total: float
    valid: bool


@dataclass(frozen=True)
class PeriodRecommendation:
    period: float
    predicted_waste: float
    branch: str  # "no-prediction" or "prediction"
    clamped: bool


def compose_waste(fault_free: float, fault: float) -> float:
    """Combine independent waste fractions: 1 - (1-a)(1-b)."""
    return fault_free + fault - fault_free * fault


def period_young(mu: float, c: float) -> float:
    """First-order period sqrt(2*mu*C) + C (recovery costs ignored)."""
    if mu <= 0:
        raise ValueError("mu must be > 0")
    if c < 0:
        raise ValueError("c must be >= 0")
    return math.sqrt(2.0 * mu * c) + c


def period_daly(mu: float, c: float, d: float, r: float) -> float:
    """First-order period sqrt(2*(mu + D + R)*C) + C."""
    if mu <= 0:
        raise ValueError("mu must be > 0")
    return math.sqrt(2.0 * (mu + d + r) * c) + c


def period_rfo(mu: float, c: float, d: float, r: float) -> float:
    """Refined first-order period sqrt(2*(mu - (D + R))*C).

    Minimises the composed waste u/T + v + w*T with u = C*(1-(D+R)/mu)
    and w = 1/(2*mu); requires mu > D + R.
    """
    if mu <= d + r:
        raise ValueError("mu must exceed D + R")
    return math.sqrt(2.0 * (mu - (d + r)) * c)


def waste_no_prediction(period: float, mu: float, costs: CostParams) -> WasteBreakdown:
    """First-order waste of plain periodic checkpointing at period T.

    fault_free = C/T, fault = (D + R + T/2)/mu, total composed.
    Rejects T < C (a period shorter than its own checkpoint).
    """
    c = costs.regular_ckpt
    if period < c:
        raise ValueError("period must be >= regular checkpoint cost")
    if mu <= 0:
        raise ValueError("mu must be > 0")
    ff = c / period
    fault = (costs.downtime + costs.recovery + period / 2.0) / mu
    total = compose_waste(ff, fault)
    valid = 0.0 <= ff <= 1.0 and 0.0 <= fault <= 1.0 and 0.0 <= total <= 1.0
    return WasteBreakdown(fault_free=ff, fault=fault, total=total, valid=valid)


def exact_exponential_makespan(
    period: float, mu: float, costs: CostParams, t_base: float
) -> float:
    """Exact expected makespan under Exponential faults:

        (mu + D) * exp(R/mu) * (exp(T/mu) - 1) * t_base / (T - C)

    Diverges as T -> C+ and grows exponentially for large T.
    """
    c = costs.regular_ckpt
    if period <= c:
        raise ValueError("period must be > regular checkpoint cost")
    if mu <= 0:
        raise ValueError("mu must be > 0")
    if t_base <= 0:
        raise ValueError("t_base must be > 0")
    return (
        (mu + costs.downtime)
        * math.exp(costs.recovery / mu)
        * math.expm1(period / mu)
        * t_base
        / (period - c)
    )


def period_optimal_exponential(mu: float, c: float, *, xatol: float = 0.1) -> float:
    """Period minimising the exact Exponential makespan.

    Downtime and recovery scale the makespan but not its argmin, so this
    minimises the kernel (exp(T/mu) - 1)/(T - C) by bounded golden/Brent
    search on [C+, 5*(sqrt(2*mu*C) + C)], converged to `xatol` seconds
    (default well inside 0.5 s).
    """
    if mu <= 0 or c <= 0:
        raise ValueError("mu and c must be > 0")
    if c >= mu:
        raise ValueError("c must be < mu")

    def kernel(t: float) -> float:
        return math.expm1(t / mu) / (t - c)

    lo = c + 1e-9 * max(c, 1.0)
    hi = 5.0 * period_young(mu, c)
    res = minimize_scalar(kernel, bounds=(lo, hi), method="bounded", options={"xatol": xatol})
    if not res.success:
        raise ConvergenceError(f"period search failed: {res.message}")
    return float(res.x)


def period_exponential_lambert(mu: float, c: float) -> float:
    """Closed-form stationary point of the Exponential makespan kernel,
    mu * (1 + W0(-exp(-C/mu - 1))) + C, used as a cross-check for the
    numerical optimum."""
    if mu <= 0 or c <= 0:
        raise ValueError("mu and c must be > 0")
    w = lambertw(-math.exp(-c / mu - 1.0)).real
    return mu * (1.0 + w) + c


def simple_policy_fault_waste(
    period: float, trust_prob: float, mu: float, pred: PredictorParams, costs: CostParams
) -> float:
    """Fault-induced waste of the constant-trust policy: every prediction
    that can be acted on is trusted with the same probability q.

    Closed form, affine in q:

        (1/mu) * ((1 - r*q)*T/2 + D + R + (q*r/p)*Cp
                  - (q*r*Cp^2/(p*T)) * (1 - p/2))
    """
    c, cp = costs.regular_ckpt, costs.proactive_ckpt
    if period < max(c, cp):
        raise ValueError("period must be >= max(regular, proactive) checkpoint cost")
    if not 0.0 <= trust_prob <= 1.0:
        raise ValueError("trust_prob must lie in [0, 1]")
    if mu <= 0:
        raise ValueError("mu must be > 0")
    q, r, p = trust_prob, pred.recall, pred.precision
    d_r = costs.downtime + costs.recovery
    return (
        (1.0 - r * q) * period / 2.0
        + d_r
        + (q * r / p) * cp
        - (q * r * cp * cp / (p * period)) * (1.0 - p / 2.0)
    ) / mu


def waste_simple_policy(
    period: float, trust_prob: float, mu: float, pred: PredictorParams, costs: CostParams
) -> float:
    """Total waste of the constant-trust policy (fault part composed with
    the fault-free part C/T)."""
    fault = simple_policy_fault_waste(period, trust_prob, mu, pred, costs)
    return compose_waste(costs.regular_ckpt / period, fault)


def beta_lim(costs: CostParams, pred: PredictorParams) -> float:
    """Break-even offset Cp/p: predictions arriving earlier than this in
    a period are not worth a proactive checkpoint, later ones are."""
    return costs.proactive_ckpt / pred.precision


def prediction_waste_coefficients(
    mu: float, pred: PredictorParams, costs: CostParams
) -> tuple[float, float, float, float]:
    """Coefficients (u, v, w, x) of the trusted-branch waste
    u/T^2 + v/T + w + x*T, valid for T >= Cp/p."""
    if mu <= 0:
        raise ValueError("mu must be > 0")
    c, cp = costs.regular_ckpt, costs.proactive_ckpt
    d_r = costs.downtime + costs.recovery
    r, p = pred.recall, pred.precision
    u = r * c * cp * cp / (2.0 * mu * p * p)
    v = c * (1.0 - (r * cp / p + d_r) / mu) - r * cp * cp / (2.0 * mu * p * p)
    w = (-(1.0 - r) * c / 2.0 + r * cp / p + d_r) / mu
    x = (1.0 - r) / (2.0 * mu)
    return u, v, w, x


def waste_with_prediction(
    period: float, mu: float, pred: PredictorParams, costs: CostParams
) -> float:
    """Total waste of the offset-threshold policy at period T.

    Below the break-even offset Cp/p no prediction is ever trusted and the
    plain periodic waste applies; at or above it the trusted-branch
    polynomial applies.  Both branches agree at T = Cp/p.
    """
    c = costs.regular_ckpt
    if period < c:
        raise ValueError("period must be >= regular checkpoint cost")
    if period < beta_lim(costs, pred):
        return waste_no_prediction(period, mu, costs).total
    u, v, w, x = prediction_waste_coefficients(mu, pred, costs)
    return u / period**2 + v / period + w + x * period


def period_no_pred(mu: float, pred: PredictorParams, costs: CostParams) -> float:
    """Best period on the never-trust branch [C, Cp/p]:
    max(C, min(T_rfo, Cp/p))."""
    t_rfo = period_rfo(mu, costs.regular_ckpt, costs.downtime, costs.recovery)
    return max(costs.regular_ckpt, min(t_rfo, beta_lim(costs, pred)))


def _cubic_positive_root(u: float, v: float, x: float, rtol: float) -> float:
    """Unique positive root of x*T^3 - v*T - 2*u for u, v >= 0, x > 0."""
    if u == 0.0 and v == 0.0:
        return 0.0
    hi = max(10.0 * math.sqrt(v / x + 1.0), 10.0 * (2.0 * u / x) ** (1.0 / 3.0))
    f = lambda t: x * t**3 - v * t - 2.0 * u
    lo = 1e-12
    if f(hi) <= 0:  # pragma: no cover - bracket is generous by construction
        raise ConvergenceError("failed to bracket the cubic root")
    return float(brentq(f, lo, hi, rtol=rtol))


def period_pred(
    mu: float, pred: PredictorParams, costs: CostParams, *, rtol: float = 1e-9
) -> float:
    """Best period on the trusted branch [Cp/p, inf):
    max(C, max(T_extr, Cp/p)).

    With v >= 0 the branch is convex and T_extr is the unique positive
    root of x*T^3 - v*T - 2*u, found by bracketed root-finding.  With
    v < 0 every nonnegative real root of that derivative polynomial is
    evaluated together with the branch bound Cp/p and the best wins.
    Rejects r = 1 (x = 0: the branch has no interior minimum and plain
    periodic checkpointing degenerates).
    """
    if pred.recall >= 1.0:
        raise ValueError("recall must be < 1 for a periodic regime to exist")
    u, v, w, x = prediction_waste_coefficients(mu, pred, costs)
    blim = beta_lim(costs, pred)
    if v >= 0.0:
        t_extr = _cubic_positive_root(u, v, x, rtol)
    else:
        roots = np.roots([x, 0.0, -v, -2.0 * u])
        real = [
            float(z.real)
            for z in roots
            if abs(z.imag) <= 1e-9 * max(1.0, abs(z.real)) and z.real > 0.0
        ]
        candidates = [t for t in real if t >= blim]
        candidates.append(max(blim, costs.regular_ckpt))
        value = lambda t: u / t**2 + v / t + w + x * t
        t_extr = min(candidates, key=value)
    return max(costs.regular_ckpt, max(t_extr, blim))


def period_pred_approx(mu: float, c: float, r: float) -> float:
    """Large-mu approximation to the trusted-branch optimum,
    sqrt(2*mu*C/(1-r)): only unpredicted faults matter and the proactive
    overhead washes out."""
    if not 0.0 <= r < 1.0:
        raise ValueError("r must lie in [0, 1)")
    if mu <= 0:
        raise ValueError("mu must be > 0")
    return math.sqrt(2.0 * mu * c / (1.0 - r))


def optimize_period(
    mu: float, pred: PredictorParams, costs: CostParams
) -> PeriodRecommendation:
    """Pick the better of the two branch optima.

    Evaluates the never-trust waste at period_no_pred and the trusted
    waste at period_pred and returns the smaller; ties go to the
    prediction branch so the output is deterministic.
    """
    t_np = period_no_pred(mu, pred, costs)
    w_np = waste_no_prediction(t_np, mu, costs).total
    t_p = period_pred(mu, pred, costs)
    u, v, w, x = prediction_waste_coefficients(mu, pred, costs)
    w_p = u / t_p**2 + v / t_p + w + x * t_p
    if w_np < w_p:
        t_rfo = period_rfo(mu, costs.regular_ckpt, costs.downtime, costs.recovery)
        return PeriodRecommendation(
            period=t_np,
            predicted_waste=w_np,
            branch="no-prediction",
            clamped=t_np != t_rfo,
        )
    # clamped when the period sits on a bound instead of the stationary point
    resid = x * t_p**3 - v * t_p - 2.0 * u
    scale = max(abs(x) * t_p**3, abs(v) * t_p, abs(2.0 * u), 1e-300)
    return PeriodRecommendation(
        period=t_p,
        predicted_waste=w_p,
        branch="prediction",
        clamped=abs(resid) > 1e-6 * scale,
    )
