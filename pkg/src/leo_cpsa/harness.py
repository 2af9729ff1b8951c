"""Scenario orchestration and artifact persistence.

Runs the sequential slot loop: per-slot geometry and traffic synthesis,
strategy selection by the configured solver, cost accounting, and backlog
bookkeeping between slots. Emits a per-slot metrics CSV, per-slot strategy
JSON, a run summary JSON, and optional convergence traces.

Units in artifacts: delays in milliseconds, distances in kilometres,
request counts unitless. Timestamps are UTC, second resolution.
"""
from __future__ import annotations

import csv
import json
from dataclasses import dataclass
from datetime import datetime, timedelta
from pathlib import Path

import numpy as np

from . import constellation as geom
from . import costs, traffic
from .baselines import BruteForceSolver, SoftLeoSolver, StaticClusterSolver
from .config import ScenarioConfig, scenario_to_dict
from .errors import StrategyError
from .ga import GaSolver, SlotSolution

METRICS_COLUMNS = (
    "slot",
    "gmt",
    "load_balance",
    "avg_response_ms",
    "migration_ms",
    "reassignment_ms",
    "sync_ms",
    "objective",
    "total_requests",
    "generations_run",
)


def format_gmt(dt: datetime) -> str:
    return dt.strftime("%Y-%m-%dT%H:%M:%SZ")


@dataclass(frozen=True)
class SlotSnapshot:
    """Frozen per-slot network state."""

    slot: int
    gmt: datetime
    states: tuple[geom.SatState, ...]
    graph: geom.TopologyGraph
    dm: geom.DistanceMatrix
    requests: np.ndarray
    requests_before_rounding: np.ndarray


@dataclass
class SlotRecord:
    slot: int
    gmt: datetime
    strategy: costs.Strategy
    breakdown: costs.CostBreakdown
    total_requests: int
    generations_run: int
    arrivals: float
    processed: float
    orphaned_backlog: float
    spill_controllers: int
    audit_checked: int
    audit_violations: int
    trace: tuple[float, ...] | None


@dataclass
class HorizonResult:
    scenario: ScenarioConfig
    strategy_name: str
    records: list[SlotRecord]
    final_backlogs: dict[int, float]

    def totals(self) -> dict[str, float]:
        recs = self.records
        return {
            "load_balance": sum(r.breakdown.load_balance for r in recs),
            "avg_response_ms": sum(r.breakdown.avg_response_ms for r in recs),
            "migration_ms": sum(r.breakdown.migration_ms for r in recs),
            "reassignment_ms": sum(r.breakdown.reassignment_ms for r in recs),
            "sync_ms": sum(r.breakdown.sync_ms for r in recs),
            "objective": sum(r.breakdown.objective for r in recs),
            "total_requests": sum(r.total_requests for r in recs),
            "arrivals": sum(r.arrivals for r in recs),
            "processed": sum(r.processed for r in recs),
            "orphaned_backlog": sum(r.orphaned_backlog for r in recs),
            "final_backlog": sum(self.final_backlogs.values()),
            "audit_checked": sum(r.audit_checked for r in recs),
            "audit_violations": sum(r.audit_violations for r in recs),
        }


def make_solver(scenario: ScenarioConfig, name: str | None = None):
    name = name or scenario.strategy
    if name == "ga":
        return GaSolver(scenario.k, scenario.ga)
    if name == "soft_leo":
        return SoftLeoSolver(scenario.constellation, scenario.soft_leo_in_orbit_index)
    if name == "static_cluster":
        return StaticClusterSolver(scenario.k, scenario.ga.cluster_max_iters)
    if name == "brute_force":
        return BruteForceSolver(scenario.k)
    raise ValueError(f"unknown strategy {name!r}")


class _SlotGeometry:
    """Per-scenario geometry pipeline with the static pieces precomputed.

    With ``cache=True`` snapshots are kept and reused; geometry and traffic
    depend only on the scenario, not on the solver, so one pipeline can serve
    several runs of the same scenario (weight sweeps, strategy comparisons).
    """

    def __init__(
        self,
        scenario: ScenarioConfig,
        region_map: traffic.RegionMap,
        cache: bool = False,
    ) -> None:
        self.scenario = scenario
        self.region_map = region_map
        self.elements = geom.build_walker(scenario.constellation)
        self._cache: dict[int, SlotSnapshot] | None = {} if cache else None

    def snapshot(self, slot: int) -> SlotSnapshot:
        if self._cache is not None and slot in self._cache:
            return self._cache[slot]
        sc = self.scenario
        gmt = sc.start_gmt + timedelta(seconds=(slot - 1) * sc.slot_seconds)
        states = geom.propagate(self.elements, sc.constellation, slot, sc.slot_seconds)
        graph = geom.isl_topology(states, sc.constellation)
        dm = geom.shortest_paths(graph)
        areas = geom.coverage_areas(
            states, self.region_map.bounds, sc.constellation, sc.coverage_resolution_deg
        )
        messages = traffic.region_message_vector(self.region_map, gmt, sc.traffic)
        shares = traffic.satellite_request_shares(areas, messages)
        counts = traffic.apply_rounding(shares, sc.traffic.rounding)
        snap = SlotSnapshot(slot, gmt, tuple(states), graph, dm, counts, shares)
        if self._cache is not None:
            self._cache[slot] = snap
        return snap


def geometry_pipeline(scenario: ScenarioConfig, cache: bool = True) -> _SlotGeometry:
    """Build a reusable snapshot pipeline for repeated runs of one scenario."""
    region_map = traffic.load_region_map(scenario.resolve_region_map_path())
    return _SlotGeometry(scenario, region_map, cache=cache)


def run_horizon(
    scenario: ScenarioConfig,
    solver=None,
    on_record=None,
    pipeline: _SlotGeometry | None = None,
) -> HorizonResult:
    """Sequential slot loop shared by the GA and every baseline.

    ``on_record`` is called with each finished SlotRecord, letting callers
    stream artifacts; partial results are therefore flushed even if a later
    slot fails. ``pipeline`` may supply a cached geometry pipeline when the
    same scenario geometry is run repeatedly; it must have been built from a
    scenario that matches in everything but weights, seed, and strategy.
    """
    if pipeline is None:
        region_map = traffic.load_region_map(scenario.resolve_region_map_path())
        pipeline = _SlotGeometry(scenario, region_map)
    solver = solver if solver is not None else make_solver(scenario)
    rng = np.random.default_rng(scenario.rng_seed)

    carried: dict[int, float] = {}
    prev_strategy: costs.Strategy | None = None
    records: list[SlotRecord] = []
    n = scenario.constellation.num_satellites

    for slot in range(1, scenario.slots + 1):
        snap = pipeline.snapshot(slot)
        ctx = costs.SlotContext(
            dm=snap.dm,
            requests=snap.requests,
            backlogs=carried,
            params=scenario.delay,
            migration_data_bytes=scenario.migration_data_bytes,
            migration_rate_bps=scenario.migration_rate_bps,
            prev_strategy=prev_strategy,
        )
        weights = scenario.weights_for_slot(slot)
        result = solver.solve_slot(slot, ctx, weights, rng)

        if isinstance(result, SlotSolution):
            strategy = result.best_strategy
            breakdown = result.best_cost
            generations = result.generations_run
            trace = result.convergence_trace
            audit_checked = result.audit_checked
            audit_violations = result.audit_violations
        elif isinstance(result, tuple):
            strategy, breakdown = result
            generations, trace, audit_checked, audit_violations = 0, None, 0, 0
        else:
            strategy = result
            breakdown = costs.objective(strategy, ctx, weights)
            generations, trace, audit_checked, audit_violations = 0, None, 0, 0

        violations = costs.validate(strategy, n, scenario.k)
        if violations:
            raise StrategyError(violations, f"slot {slot}: solver produced an infeasible strategy")

        orphaned = sum(b for sat, b in carried.items() if sat not in strategy.controllers)
        arrivals_total = float(snap.requests.sum())
        next_carry = costs.update_backlogs(
            strategy, snap.requests, carried, scenario.delay, scenario.slot_seconds
        )
        processed = (
            arrivals_total
            + sum(carried.get(c, 0.0) for c in strategy.controllers)
            - sum(next_carry.values())
        )
        spill = sum(
             1
             for sat, b in next_carry.items()
             if b / scenario.delay.rate_for(sat) > scenario.slot_seconds
        )

        record = SlotRecord(
            slot=slot,
            gmt=snap.gmt,
            strategy=strategy,
            breakdown=breakdown,
            total_requests=int(snap.requests.sum()),
            generations_run=generations,
            arrivals=arrivals_total,
            processed=processed,
            orphaned_backlog=orphaned,
            spill_controllers=spill,
            audit_checked=audit_checked,
            audit_violations=audit_violations,
            trace=trace,
        )
        records.append(record)
        if on_record is not None:
            on_record(record)
        carried = next_carry
        prev_strategy = strategy

    return HorizonResult(scenario, getattr(solver, "name", scenario.strategy), records, carried)


def _metrics_row(record: SlotRecord) -> list:
    bd = record.breakdown
    return [
        record.slot,
        format_gmt(record.gmt),
        repr(bd.load_balance),
        repr(bd.avg_response_ms),
        repr(bd.migration_ms),
        repr(bd.reassignment_ms),
        repr(bd.sync_ms),
        repr(bd.objective),
        record.total_requests,
        record.generations_run,
    ]


def run(scenario: ScenarioConfig, output_dir: str | Path | None = None) -> HorizonResult:
    """Execute the configured scenario and persist artifacts.

    Writes metrics.csv (streamed per slot), strategies.json, summary.json,
    and convergence.csv when enabled. On failure the summary notes the
    partial flush and the error before the exception propagates.
    """
    out = Path(output_dir if output_dir is not None else scenario.output_dir)
    out.mkdir(parents=True, exist_ok=True)
    strategies: list[dict] = []
    trace_rows: list[tuple[int, int, float]] = []

    metrics_path = out / "metrics.csv"
    with open(metrics_path, "w", newline="", encoding="utf-8") as fh:
        writer = csv.writer(fh)
        writer.writerow(METRICS_COLUMNS)

        def on_record(rec: SlotRecord) -> None:
            writer.writerow(_metrics_row(rec))
            fh.flush()
            strategies.append(
                {
                    "slot": rec.slot,
                    "gmt": format_gmt(rec.gmt),
                    "controllers": list(rec.strategy.controllers),
                    "assignment": list(rec.strategy.assignment),
                }
            )
            if scenario.emit_convergence and rec.trace is not None:
                for gen, best in enumerate(rec.trace):
                    trace_rows.append((rec.slot, gen, best))

        try:
            result = run_horizon(scenario, on_record=on_record)
        except Exception as exc:
            _write_json(out / "strategies.json", strategies)
            _write_json(
                out / "summary.json",
                {
                    "partial": True,
                    "error": f"{type(exc).__name__}: {exc}",
                    "config": scenario_to_dict(scenario),
                    "slots_completed": len(strategies),
                },
            )
            raise

    _write_json(out / "strategies.json", strategies)
    summary = {
        "partial": False,
        "config": scenario_to_dict(scenario),
        "strategy": result.strategy_name,
        "seed": scenario.rng_seed,
        "slots": scenario.slots,
        "totals": result.totals(),
        "diagnostics": {
            "spill_slots": sum(1 for r in result.records if r.spill_controllers > 0),
            "orphaned_backlog": sum(r.orphaned_backlog for r in result.records),
        },
    }
    _write_json(out / "summary.json", summary)
    if scenario.emit_convergence:
        with open(out / "convergence.csv", "w", newline="", encoding="utf-8") as fh:
            writer = csv.writer(fh)
            writer.writerow(["slot", "generation", "best_objective"])
            for slot, gen, best in trace_rows:
                writer.writerow([slot, gen, repr(best)])
    return result


def _write_json(path: Path, payload) -> None:
    with open(path, "w", encoding="utf-8") as fh:
        json.dump(payload, fh, indent=2, sort_keys=True)
        fh.write("\n")


def emit_request_trace(scenario: ScenarioConfig, output_dir: str | Path | None = None) -> list[tuple[int, str, int]]:
    """Total request count per slot, for load-over-time plots."""
    region_map = traffic.load_region_map(scenario.resolve_region_map_path())
    pipeline = _SlotGeometry(scenario, region_map)
    rows = []
    for slot in range(1, scenario.slots + 1):
        snap = pipeline.snapshot(slot)
        rows.append((slot, format_gmt(snap.gmt), int(snap.requests.sum())))
    out = Path(output_dir if output_dir is not None else scenario.output_dir)
    out.mkdir(parents=True, exist_ok=True)
    with open(out / "request_trace.csv", "w", newline="", encoding="utf-8") as fh:
        writer = csv.writer(fh)
        writer.writerow(["slot", "gmt", "total_requests"])
        writer.writerows(rows)
    return rows


def compare(
    scenario: ScenarioConfig,
    strategy_names: list[str],
    output_dir: str | Path | None = None,
) -> dict[str, HorizonResult]:
    """Run several strategies on one scenario and merge their per-slot costs.

    Every run starts from the same seed. The merged CSV carries one row per
    (slot, strategy) plus empirical CDF columns for the migration and
    reassignment costs, sorted by (slot, strategy).
    """
    if len(strategy_names) < 2:
        raise ValueError("compare needs at least two strategies")
    runs: list[tuple[str, HorizonResult]] = [
        (name, run_horizon(scenario, solver=make_solver(scenario, name)))
        for name in strategy_names
    ]

    cdf: list[dict[str, np.ndarray]] = []
    for _, res in runs:
        cm = np.array([r.breakdown.migration_ms for r in res.records])
        sm = np.array([r.breakdown.reassignment_ms for r in res.records])
        cdf.append(
            {
                "migration": (cm[:, None] >= cm[None, :]).mean(axis=1),
                "reassignment": (sm[:, None] >= sm[None, :]).mean(axis=1),
            }
        )

    order = sorted(range(len(runs)), key=lambda i: runs[i][0])  # stable by name
    out = Path(output_dir if output_dir is not None else scenario.output_dir)
    out.mkdir(parents=True, exist_ok=True)
    with open(out / "compare.csv", "w", newline="", encoding="utf-8") as fh:
        writer = csv.writer(fh)
        writer.writerow(
            [
                "slot", "gmt", "strategy", "load_balance", "avg_response_ms",
                "migration_ms", "reassignment_ms", "sync_ms", "objective",
                "migration_ms_cdf", "reassignment_ms_cdf",
            ]
        )
        for slot in range(1, scenario.slots + 1):
            for i in order:
                name, res = runs[i]
                rec = res.records[slot - 1]
                bd = rec.breakdown
                writer.writerow(
                    [
                        slot,
                        format_gmt(rec.gmt),
                        name,
                        repr(bd.load_balance),
                        repr(bd.avg_response_ms),
                        repr(bd.migration_ms),
                        repr(bd.reassignment_ms),
                        repr(bd.sync_ms),
                        repr(bd.objective),
                        repr(float(cdf[i]["migration"][slot - 1])),
                        repr(float(cdf[i]["reassignment"][slot - 1])),
                    ]
                )
    return {name: res for name, res in runs}
