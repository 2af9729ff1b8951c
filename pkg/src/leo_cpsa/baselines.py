"""Reference strategies and an exhaustive oracle.

All baselines are scored through the same cost pipeline as the genetic
search, so comparisons are apples to apples.
"""
from __future__ import annotations

import itertools
import math

import numpy as np

from .constellation import ConstellationConfig
from .costs import CostBreakdown, SlotContext, Strategy, Weights, evaluate_arrays
from .errors import ConfigurationError, OracleSizeError
from .ga import cluster_seed

BRUTE_FORCE_GUARD = 10_000_000


def soft_leo(cfg: ConstellationConfig, in_orbit_index: int = 0) -> Strategy:
    """One controller per orbital plane, all at the same in-plane index; every
    switch reports to its own plane's controller. Constant over time."""
    if not 0 <= in_orbit_index < cfg.sats_per_plane:
        raise ConfigurationError("in_orbit_index: must be in 0..sats_per_plane-1")
    controllers = tuple(
        p * cfg.sats_per_plane + in_orbit_index + 1 for p in range(cfg.num_planes)
    )
    assignment = tuple(
        controllers[(n - 1) // cfg.sats_per_plane]
        for n in range(1, cfg.num_satellites + 1)
    )
    return Strategy(controllers, assignment)


class SoftLeoSolver:
    name = "soft_leo"

    def __init__(self, cfg: ConstellationConfig, in_orbit_index: int = 0) -> None:
        self._strategy = soft_leo(cfg, in_orbit_index)

    def solve_slot(self, slot, ctx, weights, rng) -> Strategy:
        return self._strategy


class StaticClusterSolver:
    """Placement frozen to the first slot's cluster medoids; each slot every
    switch joins the nearest controller (shortest path, ties to lowest id)."""

    name = "static_cluster"

    def __init__(self, k: int, cluster_max_iters: int = 100) -> None:
        self.k = k
        self.cluster_max_iters = cluster_max_iters
        self._placement: np.ndarray | None = None

    def solve_slot(self, slot, ctx, weights, rng) -> Strategy:
        if self._placement is None:
            seed = cluster_seed(self.k, ctx.dm, rng, self.cluster_max_iters)
            self._placement = np.array(seed.placement, dtype=np.int64)
        member = np.argmin(ctx.dm.dist_km[:, self._placement - 1], axis=1)
        return Strategy(
            tuple(int(c) for c in self._placement),
            tuple(int(self._placement[m]) for m in member),
        )


def brute_force(ctx: SlotContext, k: int, weights: Weights) -> tuple[Strategy, CostBreakdown]:
    """Exhaustive minimum over every placement and assignment.

    Enumeration is lexicographic and only a strictly better objective
    replaces the incumbent, so ties resolve to the lexicographically first
    strategy regardless of hardware.
    """
    n = ctx.num_satellites
    size = math.comb(n, k) * k**n
    if size > BRUTE_FORCE_GUARD:
        raise OracleSizeError(
            f"instance has {size} candidate strategies, guard is {BRUTE_FORCE_GUARD}"
        )
    best: tuple[CostBreakdown, tuple[int, ...], tuple[int, ...]] | None = None
    for placement in itertools.combinations(range(1, n + 1), k):
        place_arr = np.array(placement, dtype=np.int64)
        for positions in itertools.product(range(k), repeat=n):
            bd = evaluate_arrays(place_arr, np.array(positions, dtype=np.int64), ctx, weights)
            if best is None or bd.objective < best[0].objective:
                best = (bd, placement, positions)
    assert best is not None
    bd, placement, positions = best
    strategy = Strategy(placement, tuple(placement[p] for p in positions))
    return strategy, bd


class BruteForceSolver:
    name = "brute_force"

    def __init__(self, k: int) -> None:
        self.k = k

    def solve_slot(self, slot, ctx, weights, rng):
        return brute_force(ctx, self.k, weights)
