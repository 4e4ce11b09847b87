"""Brute-force search for the empirically best fixed period.

Every candidate period is scored as the mean simulated waste over the
same set of traces (common random numbers), so candidate comparisons are
paired and low-variance.  A run that exhausts its trace horizon scores
the limiting waste of a never-finishing job, 1.0, instead of aborting the
search; any other simulation failure propagates.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Callable

import numpy as np

from .model import CostParams
from .simulator import HorizonExhaustedError, Policy, simulate
from .tracegen import EventTrace


@dataclass(frozen=True)
class SearchSpec:
    grid: tuple[float, ...]
    instances_per_candidate: int = 100
    refinement_rounds: int = 2

    def __post_init__(self) -> None:
        if len(self.grid) == 0:
            raise ValueError("grid must be non-empty")
        if any(b <= a for a, b in zip(self.grid, self.grid[1:])):
            raise ValueError("grid must be strictly increasing")
        if self.instances_per_candidate < 1:
            raise ValueError("instances_per_candidate must be >= 1")
        if self.refinement_rounds < 0:
            raise ValueError("refinement_rounds must be >= 0")


def default_grid(t_ref: float, c: float, n_points: int = 30) -> tuple[float, ...]:
    """Geometric grid of n_points spanning [max(C, t_ref/10), 10*t_ref],
    with the reference period itself injected."""
    lo = max(c, t_ref / 10.0)
    hi = 10.0 * t_ref
    pts = np.geomspace(lo, hi, n_points).tolist()
    pts.append(t_ref)
    return tuple(sorted(set(pts)))


def evaluate_period(
    period: float,
    policy_for_period: Callable[[float], Policy],
    traces: list[EventTrace],
    costs: CostParams,
    t_base: float,
    policy_seeds: list[int],
) -> float:
    """Mean waste of one candidate period over a fixed trace set."""
    wastes = []
    for trace, seed in zip(traces, policy_seeds):
        try:
            wastes.append(simulate(trace, policy_for_period(period), costs, t_base, seed).waste)
        except HorizonExhaustedError:
            wastes.append(1.0)
    return float(np.mean(wastes))


def best_period(
    policy_for_period: Callable[[float], Policy],
    trace_for_instance: Callable[[int], EventTrace],
    costs: CostParams,
    t_base: float,
    spec: SearchSpec,
    policy_seed_for_instance: Callable[[int], int] = lambda i: i,
) -> tuple[float, float]:
    """Return (best period, its mean waste) for a policy family.

    All candidates see the traces of instances 0..k-1 generated once up
    front.  After scanning the grid, each refinement round rebuilds a
    roughly ten-times-finer geometric grid between the incumbent's grid
    neighbours and rescans.  Ties break to the smaller period.
    """
    k = spec.instances_per_candidate
    traces = [trace_for_instance(i) for i in range(k)]
    seeds = [policy_seed_for_instance(i) for i in range(k)]
    cache: dict[float, float] = {}

    def score(period: float) -> float:
        if period not in cache:
            cache[period] = evaluate_period(
                period, policy_for_period, traces, costs, t_base, seeds
            )
        return cache[period]

    def scan(grid: tuple[float, ...]) -> float:
        best_t = grid[0]
        best_w = score(best_t)
        for t in grid[1:]:
            w = score(t)
            if w < best_w:
                best_t, best_w = t, w
        return best_t

    grid = spec.grid
    incumbent = scan(grid)
    for _ in range(spec.refinement_rounds):
        ordered = sorted(grid)
        i = ordered.index(incumbent)
        lo = ordered[max(i - 1, 0)]
        hi = ordered[min(i + 1, len(ordered) - 1)]
        if math.isclose(lo, hi):
            break
        refined = tuple(sorted(set(np.geomspace(lo, hi, 21).tolist() + [incumbent])))
        grid = refined
        incumbent = scan(refined)
    return incumbent, cache[incumbent]
