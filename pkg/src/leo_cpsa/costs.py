"""Per-slot cost model and constraint validation.

Five components are evaluated for a candidate strategy against a frozen slot
context: request-weighted average response delay (propagation, per-hop
processing/forwarding, transmission, and a queuing term driven by control
domain size and carried backlog), controller migration cost, switch
reassignment cost, controller synchronization cost, and a load balance
factor. The weighted sum of the five is the objective to minimise.

All delays are milliseconds, distances kilometres, request counts unitless.
"""
from __future__ import annotations

from dataclasses import dataclass, field
from typing import Mapping

import numpy as np

from .constellation import DistanceMatrix
from .errors import ConfigurationError, StrategyError

MS_PER_S = 1000.0

# Constraint numbers reported by validate(): binary placement indicator (16),
# binary assignment indicator (17), assignment only to active controllers
# (18), exactly K controllers (19), exactly one controller per switch (20).
CONSTRAINT_PLACEMENT_BINARY = 16
CONSTRAINT_ASSIGNMENT_BINARY = 17
CONSTRAINT_ASSIGN_TO_ACTIVE = 18
CONSTRAINT_CONTROLLER_COUNT = 19
CONSTRAINT_SINGLE_CONTROLLER = 20


@dataclass(frozen=True)
class Strategy:
    """One slot's solution: which satellites host controllers, and the
    controller satellite serving each switch.

    ``controllers`` holds K distinct satellite ids; ``assignment[n-1]`` is
    the controller satellite id serving switch n.
    """

    controllers: tuple[int, ...]
    assignment: tuple[int, ...]

    def controller_positions(self) -> np.ndarray:
        """0-based index into ``controllers`` per switch."""
        lookup = {sat: i for i, sat in enumerate(self.controllers)}
        try:
            return np.array([lookup[sat] for sat in self.assignment], dtype=np.int64)
        except KeyError as exc:
            raise StrategyError(
                [CONSTRAINT_ASSIGN_TO_ACTIVE],
                f"switch assigned to non-controller satellite {exc.args[0]}",
            ) from exc


def validate(strategy: Strategy, num_satellites: int, k: int) -> list[int]:
    """Return the violated constraint numbers (empty list means feasible)."""
    violations: set[int] = set()
    ctrl = strategy.controllers
    if any(not (1 <= c <= num_satellites) for c in ctrl):
        violations.add(CONSTRAINT_PLACEMENT_BINARY)
    if len(ctrl) != k or len(set(ctrl)) != k:
        violations.add(CONSTRAINT_CONTROLLER_COUNT)
    if len(strategy.assignment) != num_satellites:
        violations.add(CONSTRAINT_SINGLE_CONTROLLER)
    ctrl_set = set(ctrl)
    for sat in strategy.assignment:
        if not (1 <= sat <= num_satellites):
            violations.add(CONSTRAINT_ASSIGNMENT_BINARY)
        elif sat not in ctrl_set:
            violations.add(CONSTRAINT_ASSIGN_TO_ACTIVE)
    return sorted(violations)


@dataclass(frozen=True)
class DelayParams:
    """Delay-model constants.

    ``processing_rate_per_s`` is the uniform controller service rate in
    requests per second; ``rate_overrides`` supplies per-satellite values.
    ``queue_fit_ms`` converts the squared control-domain size into the
    congestion part of the queuing delay.
    """

    processing_rate_per_s: float = 4000.0
    rate_overrides: tuple[tuple[int, float], ...] = ()
    queue_fit_ms: float = 0.09
    transmission_ms: float = 0.1
    forwarding_ms: float = 0.1
    processing_ms: float = 0.5
    light_speed_km_per_ms: float = 299.792458

    def __post_init__(self) -> None:
        if self.processing_rate_per_s <= 0:
            raise ConfigurationError("processing_rate_per_s: must be > 0")
        for name in ("queue_fit_ms", "transmission_ms", "forwarding_ms", "processing_ms"):
            if getattr(self, name) < 0:
                raise ConfigurationError(f"{name}: must be >= 0")
        if self.light_speed_km_per_ms <= 0:
            raise ConfigurationError("light_speed_km_per_ms: must be > 0")
        if any(rate <= 0 for _, rate in self.rate_overrides):
            raise ConfigurationError("rate_overrides: rates must be > 0")

    def rate_for(self, sat_id: int) -> float:
        for sat, rate in self.rate_overrides:
            if sat == sat_id:
                return rate
        return self.processing_rate_per_s

    def rates_by_sat(self, num_satellites: int) -> np.ndarray:
        rates = np.full(num_satellites, self.processing_rate_per_s)
        for sat, rate in self.rate_overrides:
            if 1 <= sat <= num_satellites:
                rates[sat - 1] = rate
        return rates


@dataclass(frozen=True)
class Weights:
    """Objective weights. ``w3_*`` split the strategy-shifting weight into
    migration, reassignment and synchronization parts; use :meth:`simple`
    for a single shared value."""

    w1: float
    w2: float
    w3_migration: float
    w3_reassignment: float
    w3_sync: float

    def __post_init__(self) -> None:
        vals = (self.w1, self.w2, self.w3_migration, self.w3_reassignment, self.w3_sync)
        if any(v < 0 for v in vals):
            raise ConfigurationError("weights: must be nonnegative")
        if not any(v > 0 for v in vals):
            raise ConfigurationError("weights: at least one must be positive")

    @classmethod
    def simple(cls, w1: float, w2: float, w3: float) -> "Weights":
        return cls(w1, w2, w3, w3, w3)


@dataclass(frozen=True)
class CostBreakdown:
    load_balance: float
    avg_response_ms: float
    migration_ms: float
    reassignment_ms: float
    sync_ms: float
    objective: float


@dataclass(frozen=True)
class SlotContext:
    """Everything a cost evaluation needs for one slot.

    ``backlogs`` carries the unprocessed request counts of the previous
    slot's controllers, keyed by satellite id; a satellite without an entry
    starts the slot with an empty queue.
    """

    dm: DistanceMatrix
    requests: np.ndarray
    backlogs: Mapping[int, float]
    params: DelayParams
    migration_data_bytes: float = 100e6
    migration_rate_bps: float = 1e9
    prev_strategy: Strategy | None = None
    backlog_by_sat: np.ndarray = field(init=False, repr=False)
    rate_by_sat: np.ndarray = field(init=False, repr=False)
    _prev_ctrl: np.ndarray | None = field(init=False, repr=False)
    _prev_assign: np.ndarray | None = field(init=False, repr=False)

    def __post_init__(self) -> None:
        n = self.dm.num_satellites
        if len(self.requests) != n:
            raise ConfigurationError("requests: length must match satellite count")
        by_sat = np.zeros(n)
        for sat, b in self.backlogs.items():
            if 1 <= sat <= n:
                by_sat[sat - 1] = b
        object.__setattr__(self, "backlog_by_sat", by_sat)
        object.__setattr__(self, "rate_by_sat", self.params.rates_by_sat(n))
        prev = self.prev_strategy
        object.__setattr__(
            self, "_prev_ctrl", None if prev is None else np.array(prev.controllers)
        )
        object.__setattr__(
            self, "_prev_assign", None if prev is None else np.array(prev.assignment)
        )

    @property
    def num_satellites(self) -> int:
        return self.dm.num_satellites

    @property
    def migration_transfer_ms(self) -> float:
        return self.migration_data_bytes * 8.0 / self.migration_rate_bps * MS_PER_S


def _path_terms(switch: int, controller: int, dm: DistanceMatrix, params: DelayParams):
    """(propagation_ms, processing_hop_count, forwarding_hop_count) for the
    shortest path from a switch to its controller.

    With E links on the path there are E-1 relay satellites, each adding one
    forwarding and one processing step, plus one processing step at the
    controller; a controller serving itself still processes the request once.
    """
    d = float(dm.dist_km[switch - 1, controller - 1])
    e = int(dm.hops[switch - 1, controller - 1])
    prop_ms = d / params.light_speed_km_per_ms
    return prop_ms, max(e, 1), max(e - 1, 0)


def queuing_delay(
    switch: int,
    controller: int,
    strategy: Strategy,
    backlogs: Mapping[int, float],
    dm: DistanceMatrix,
    params: DelayParams,
) -> float:
    """Expected queuing delay: a congestion term quadratic in the control
    domain size, plus the carried-backlog drain time net of the request's
    transit time (clamped at zero)."""
    if controller not in strategy.controllers:
        raise StrategyError([CONSTRAINT_ASSIGN_TO_ACTIVE], "controller not active")
    domain = sum(1 for sat in strategy.assignment if sat == controller)
    prop_ms, _, relays = _path_terms(switch, controller, dm, params)
    transit_ms = (
        params.transmission_ms
        + prop_ms
        + relays * (params.processing_ms + params.forwarding_ms)
    )
    backlog = backlogs.get(controller, 0.0)
    drain_ms = backlog / params.rate_for(controller) * MS_PER_S
    return params.queue_fit_ms * domain**2 + max(drain_ms - transit_ms, 0.0)


def response_delay(
    switch: int,
    controller: int,
    strategy: Strategy,
    backlogs: Mapping[int, float],
    dm: DistanceMatrix,
    params: DelayParams,
) -> float:
    """Round-trip response delay of one request: doubled path terms (request
    and response take the same route), one transmission delay at the switch,
    plus the queuing delay at the controller."""
    prop_ms, processing_hops, forwarding_hops = _path_terms(switch, controller, dm, params)
    path_ms = (
        prop_ms
        + processing_hops * params.processing_ms
        + forwarding_hops * params.forwarding_ms
    )
    return (
        2.0 * path_ms
        + params.transmission_ms
        + queuing_delay(switch, controller, strategy, backlogs, dm, params)
    )


def avg_response_delay(
    strategy: Strategy,
    requests: np.ndarray,
    backlogs: Mapping[int, float],
    dm: DistanceMatrix,
    params: DelayParams,
) -> float:
    """Request-weighted mean response delay; zero when no requests exist."""
    total = float(np.sum(requests))
    if total <= 0:
        return 0.0
    acc = 0.0
    for n, controller in enumerate(strategy.assignment, start=1):
        if requests[n - 1]:
            acc += requests[n - 1] * response_delay(
                n, controller, strategy, backlogs, dm, params
            )
    return acc / total


def update_backlogs(
    prev_strategy: Strategy,
    prev_requests: np.ndarray,
    prev_backlogs: Mapping[int, float],
    params: DelayParams,
    slot_seconds: float,
) -> dict[int, float]:
    """Roll each controller's queue forward one slot: arrivals plus carried
    backlog, minus one slot of service capacity, clamped at zero. Keys are
    the previous slot's controllers."""
    arrivals: dict[int, float] = {c: 0.0 for c in prev_strategy.controllers}
    for n, controller in enumerate(prev_strategy.assignment, start=1):
        arrivals[controller] += float(prev_requests[n - 1])
    out: dict[int, float] = {}
    for controller in prev_strategy.controllers:
        capacity = params.rate_for(controller) * slot_seconds
        queued = arrivals[controller] + prev_backlogs.get(controller, 0.0)
        out[controller] = max(queued - capacity, 0.0)
    return out


def migration_cost(
    current: Strategy,
    previous: Strategy | None,
    dm: DistanceMatrix,
    data_bytes: float,
    rate_bps: float,
    params: DelayParams,
) -> float:
    """Each newly activated controller pulls the network data store from the
    nearest previous-slot controller: path propagation plus transfer time.
    Zero for the first slot."""
    if previous is None:
        return 0.0
    prev = np.array(previous.controllers)
    transfer_ms = data_bytes * 8.0 / rate_bps * MS_PER_S
    cost = 0.0
    for c in current.controllers:
        if c in previous.controllers:
            continue
        nearest = float(dm.dist_km[c - 1, prev - 1].min())
        cost += nearest / params.light_speed_km_per_ms + transfer_ms
    return cost


def reassignment_cost(
    current: Strategy,
    previous: Strategy | None,
    dm: DistanceMatrix,
    params: DelayParams,
) -> float:
    """Switches whose controller satellite changed exchange a six-message
    handshake with the new controller over the shortest path."""
    if previous is None:
        return 0.0
    cost = 0.0
    for n in range(1, len(current.assignment) + 1):
        new_ctrl = current.assignment[n - 1]
        if new_ctrl != previous.assignment[n - 1]:
            cost += 6.0 * float(dm.dist_km[n - 1, new_ctrl - 1]) / params.light_speed_km_per_ms
    return cost


def synchronization_cost(strategy: Strategy, dm: DistanceMatrix, params: DelayParams) -> float:
    """Fully distributed state exchange: every ordered controller pair ships
    one update over the shortest path."""
    ctrl = np.array(strategy.controllers) - 1
    return float(dm.dist_km[np.ix_(ctrl, ctrl)].sum()) / params.light_speed_km_per_ms


def load_balance_factor(strategy: Strategy, requests: np.ndarray) -> float:
    """Population standard deviation of per-controller request loads."""
    loads: dict[int, float] = {c: 0.0 for c in strategy.controllers}
    for n, controller in enumerate(strategy.assignment, start=1):
        loads[controller] += float(requests[n - 1])
    arr = np.array([loads[c] for c in strategy.controllers])
    return float(np.sqrt(np.mean((arr - arr.mean()) ** 2)))


def evaluate_arrays(
    placement: np.ndarray,
    positions: np.ndarray,
    ctx: SlotContext,
    weights: Weights,
) -> CostBreakdown:
    """Vectorised objective for the hot path.

    ``placement`` holds K distinct satellite ids; ``positions`` maps each
    switch to a 0-based index into ``placement``. No validation happens
    here; callers guarantee feasibility.
    """
    p = ctx.params
    dm = ctx.dm
    n = ctx.num_satellites
    k = len(placement)
    ctrl_sat = placement[positions]  # (N,) satellite id per switch
    sw = np.arange(n)
    d = dm.dist_km[sw, ctrl_sat - 1]
    e = dm.hops[sw, ctrl_sat - 1]
    prop = d / p.light_speed_km_per_ms
    relays = np.maximum(e - 1, 0)
    processing_hops = np.maximum(e, 1)

    domain = np.bincount(positions, minlength=k)
    backlog = ctx.backlog_by_sat[placement - 1]
    rate = ctx.rate_by_sat[placement - 1]
    drain = backlog[positions] / rate[positions] * MS_PER_S
    transit = p.transmission_ms + prop + relays * (p.processing_ms + p.forwarding_ms)
    queuing = p.queue_fit_ms * domain[positions].astype(float) ** 2 + np.maximum(
        drain - transit, 0.0
    )
    response = (
        2.0 * (prop + processing_hops * p.processing_ms + relays * p.forwarding_ms)
        + p.transmission_ms
        + queuing
    )

    req = ctx.requests.astype(float)
    total = req.sum()
    avg_response = float(response @ req / total) if total > 0 else 0.0

    loads = np.bincount(positions, weights=req, minlength=k)
    load_balance = float(np.sqrt(np.mean((loads - loads.mean()) ** 2)))

    sync = float(dm.dist_km[np.ix_(placement - 1, placement - 1)].sum()) / p.light_speed_km_per_ms

    migration = 0.0
    reassignment = 0.0
    if ctx._prev_ctrl is not None:
        new_mask = ~np.isin(placement, ctx._prev_ctrl)
        if new_mask.any():
            nearest = dm.dist_km[np.ix_(placement[new_mask] - 1, ctx._prev_ctrl - 1)].min(axis=1)
            migration = float(
                (nearest / p.light_speed_km_per_ms + ctx.migration_transfer_ms).sum()
            )
        changed = ctrl_sat != ctx._prev_assign
        if changed.any():
            reassignment = float(6.0 * d[changed].sum() / p.light_speed_km_per_ms)

    total_objective = (
        weights.w1 * load_balance
        + weights.w2 * avg_response
        + weights.w3_migration * migration
        + weights.w3_reassignment * reassignment
        + weights.w3_sync * sync
    )
    return CostBreakdown(
        load_balance=load_balance,
        avg_response_ms=avg_response,
        migration_ms=migration,
        reassignment_ms=reassignment,
        sync_ms=sync,
        objective=total_objective,
    )


def objective(strategy: Strategy, ctx: SlotContext, weights: Weights) -> CostBreakdown:
    """Validate a strategy and evaluate the full cost breakdown."""
    k = len(strategy.controllers)
    violations = validate(strategy, ctx.num_satellites, k)
    if violations:
        raise StrategyError(violations)
    placement = np.array(strategy.controllers, dtype=np.int64)
    positions = strategy.controller_positions()
    return evaluate_arrays(placement, positions, ctx, weights)
