"""Shared domain parameters and fault-rate algebra.

All times are seconds; a year is 365 days.  A platform of N identical
components with individual mean time between faults m has platform MTBF
m/N (a renewal-theory identity, independent of the inter-arrival law).
A predictor with recall r and precision p splits the event stream into
unpredicted faults, predicted events (true and false alarms), and their
harmonic combination.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

SECONDS_PER_MINUTE = 60.0
SECONDS_PER_HOUR = 3600.0
SECONDS_PER_DAY = 86400.0
SECONDS_PER_YEAR = 365.0 * SECONDS_PER_DAY

#: Default cap factor for the checkpoint period relative to the MTBF.
#: With period <= 0.27 * MTBF, the chance of two or more faults landing in
#: one period stays near 3%, keeping the single-fault-per-period waste
#: model trustworthy.
DEFAULT_ALPHA = 0.27


def _check_finite(name: str, value: float) -> float:
    if not math.isfinite(value):
        raise ValueError(f"{name} must be finite, got {value!r}")
    return float(value)


@dataclass(frozen=True)
class CostParams:
    """Durations of the four overhead activities, in seconds.

    regular_ckpt is the cost of a periodic checkpoint, proactive_ckpt the
    cost of a checkpoint taken ahead of a predicted fault, downtime the
    resource-replacement delay after a fault, and recovery the time to
    restore the last checkpoint.
    """

    regular_ckpt: float
    proactive_ckpt: float = 0.0
    downtime: float = 0.0
    recovery: float = 0.0

    def __post_init__(self) -> None:
        if _check_finite("regular_ckpt", self.regular_ckpt) <= 0:
            raise ValueError("regular_ckpt must be > 0")
        for name in ("proactive_ckpt", "downtime", "recovery"):
            if _check_finite(name, getattr(self, name)) < 0:
                raise ValueError(f"{name} must be >= 0")


@dataclass(frozen=True)
class PredictorParams:
    """Recall r (fraction of faults announced in advance) and precision p
    (fraction of announcements that are real).

    p = 0 is rejected: a predictor that is never right has an undefined
    predicted-event rate and an unbounded break-even offset.
    """

    recall: float
    precision: float

    def __post_init__(self) -> None:
        if not 0.0 <= _check_finite("recall", self.recall) <= 1.0:
            raise ValueError("recall must lie in [0, 1]")
        if not 0.0 < _check_finite("precision", self.precision) <= 1.0:
            raise ValueError("precision must lie in (0, 1]")


@dataclass(frozen=True)
class PlatformParams:
    n_processors: int
    individual_mtbf: float

    def __post_init__(self) -> None:
        if int(self.n_processors) != self.n_processors or self.n_processors < 1:
            raise ValueError("n_processors must be an integer >= 1")
        if _check_finite("individual_mtbf", self.individual_mtbf) <= 0:
            raise ValueError("individual_mtbf must be > 0")


@dataclass(frozen=True)
class EventRates:
    """Mean times between the different event kinds; math.inf marks an
    event kind that never occurs."""

    platform_mtbf: float
    predicted_mtbf: float
    unpredicted_mtbf: float
    event_mtbf: float


@dataclass(frozen=True)
class AdmissibleInterval:
    """Period range [lower, upper] on which the first-order waste model is
    trusted, plus pass/fail flags for the companion sanity caps."""

    lower: float
    upper: float
    alpha: float
    ckpt_within_cap: bool
    restart_within_cap: bool

    @property
    def is_empty(self) -> bool:
        return self.lower > self.upper


def mu_platform(platform: PlatformParams) -> float:
    """Platform MTBF of N IID components: individual MTBF divided by N."""
    return platform.individual_mtbf / platform.n_processors


def derive_rates(mu: float, pred: PredictorParams) -> EventRates:
    """Split the platform fault rate 1/mu into unpredicted faults and
    predicted events.

    Unpredicted faults arrive every mu/(1-r) seconds (infinite when every
    fault is predicted), predicted events every p*mu/r seconds (infinite
    when the predictor is silent), and the merged event stream at the
    harmonic combination of both.
    """
    if mu <= 0 or not math.isfinite(mu):
        raise ValueError("mu must be a positive finite duration")
    r, p = pred.recall, pred.precision
    mu_np = math.inf if r == 1.0 else mu / (1.0 - r)
    mu_p = math.inf if r == 0.0 else p * mu / r
    inv = (0.0 if math.isinf(mu_p) else 1.0 / mu_p) + (
        0.0 if math.isinf(mu_np) else 1.0 / mu_np
    )
    mu_e = math.inf if inv == 0.0 else 1.0 / inv
    return EventRates(
        platform_mtbf=mu,
        predicted_mtbf=mu_p,
        unpredicted_mtbf=mu_np,
        event_mtbf=mu_e,
    )


def multi_fault_probability(period: float, mu: float) -> float:
    """Probability that two or more faults land within one period of
    length `period`, under Poisson arrivals with mean spacing mu:
    1 - (1 + b) * exp(-b) with b = period/mu.
    """
    if period < 0:
        raise ValueError("period must be >= 0")
    if mu <= 0:
        raise ValueError("mu must be > 0")
    b = period / mu
    return -math.expm1(-b) - b * math.exp(-b)


def admissible_interval(
    costs: CostParams, mu_ref: float, alpha: float = DEFAULT_ALPHA
) -> AdmissibleInterval:
    """Period interval [C, alpha*mu_ref] on which the waste model holds.

    An empty interval (C above the cap) is a legitimate value, not an
    error.  The flags record whether the checkpoint cost and the combined
    downtime-plus-recovery also fit under the cap.
    """
    if alpha <= 0:
        raise ValueError("alpha must be > 0")
    if mu_ref <= 0:
        raise ValueError("mu_ref must be > 0")
    cap = alpha * mu_ref
    return AdmissibleInterval(
        lower=costs.regular_ckpt,
        upper=cap,
        alpha=alpha,
        ckpt_within_cap=costs.regular_ckpt <= cap,
        restart_within_cap=costs.downtime + costs.recovery <= cap,
    )
