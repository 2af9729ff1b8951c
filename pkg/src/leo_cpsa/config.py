"""Scenario configuration: dataclass assembly plus JSON ingestion.

Config errors carry the dotted field path of the offending entry so a bad
file is diagnosable from the message alone.
"""
from __future__ import annotations

import json
from dataclasses import dataclass, field
from datetime import datetime, timezone
from importlib import resources
from pathlib import Path

from .constellation import ConstellationConfig
from .costs import DelayParams, Weights
from .errors import ConfigurationError
from .ga import GAParams
from .traffic import TrafficParams

STRATEGY_NAMES = ("ga", "soft_leo", "static_cluster", "brute_force")

_SAMPLE_MAP_TOKEN = "sample"


@dataclass(frozen=True)
class ScenarioConfig:
    """Everything a run needs; see README for the JSON schema."""

    constellation: ConstellationConfig = ConstellationConfig()
    traffic: TrafficParams = TrafficParams()
    region_map_path: str | None = None  # None -> bundled sample map
    delay: DelayParams = DelayParams()
    migration_data_bytes: float = 100e6
    migration_rate_bps: float = 1e9
    weights_schedule: tuple[tuple[int, Weights], ...] = (
        (1, Weights.simple(0.001, 1.0, 0.002)),
    )
    ga: GAParams = GAParams()
    k: int = 8
    slots: int = 1440
    slot_seconds: float = 60.0
    start_gmt: datetime = datetime(2022, 1, 1, tzinfo=timezone.utc)
    strategy: str = "ga"
    soft_leo_in_orbit_index: int = 0
    output_dir: str = "out"
    rng_seed: int = 0
    coverage_resolution_deg: float = 0.5
    emit_convergence: bool = False

    def __post_init__(self) -> None:
        if self.slots < 1:
            raise ConfigurationError("slots: must be >= 1")
        if self.slot_seconds <= 0:
            raise ConfigurationError("slot_seconds: must be > 0")
        if not 1 <= self.k <= self.constellation.num_satellites:
            raise ConfigurationError("k: must be in 1..num_satellites")
        if self.strategy not in STRATEGY_NAMES:
            raise ConfigurationError(f"strategy: must be one of {STRATEGY_NAMES}")
        if self.migration_data_bytes < 0:
            raise ConfigurationError("migration.data_bytes: must be >= 0")
        if self.migration_rate_bps <= 0:
            raise ConfigurationError("migration.rate_bps: must be > 0")
        if not self.weights_schedule or self.weights_schedule[0][0] != 1:
            raise ConfigurationError("weights: schedule must start at slot 1")
        starts = [s for s, _ in self.weights_schedule]
        if starts != sorted(starts) or len(set(starts)) != len(starts):
            raise ConfigurationError("weights: schedule slots must be strictly increasing")
        if self.start_gmt.tzinfo is None:
            object.__setattr__(self, "start_gmt", self.start_gmt.replace(tzinfo=timezone.utc))

    def weights_for_slot(self, slot: int) -> Weights:
        chosen = self.weights_schedule[0][1]
        for start, w in self.weights_schedule:
            if slot >= start:
                chosen = w
            else:
                break
        return chosen

    def resolve_region_map_path(self) -> Path:
        if self.region_map_path is None or self.region_map_path == _SAMPLE_MAP_TOKEN:
            return sample_region_map_path()
        return Path(self.region_map_path)


def sample_region_map_path() -> Path:
    return Path(str(resources.files("leo_cpsa").joinpath("data/sample_region_map.csv")))


def _expect(obj: dict, path: str) -> dict:
    if not isinstance(obj, dict):
        raise ConfigurationError(f"{path}: expected an object")
    return obj


def _get(obj: dict, key: str, kind, path: str, default=None, required=False):
    if key not in obj:
        if required:
            raise ConfigurationError(f"{path}.{key}: required")
        return default
    val = obj[key]
    if kind is float and isinstance(val, int) and not isinstance(val, bool):
        val = float(val)
    if kind is not None and (not isinstance(val, kind) or isinstance(val, bool) and kind is not bool):
        raise ConfigurationError(f"{path}.{key}: expected {getattr(kind, '__name__', kind)}")
    return val


def _parse_datetime(raw: str, path: str) -> datetime:
    try:
        dt = datetime.fromisoformat(raw.replace("Z", "+00:00"))
    except ValueError as exc:
        raise ConfigurationError(f"{path}: invalid ISO 8601 timestamp") from exc
    if dt.tzinfo is None:
        dt = dt.replace(tzinfo=timezone.utc)
    return dt.astimezone(timezone.utc)


def _parse_weights(raw: dict, path: str) -> Weights:
    raw = _expect(raw, path)
    w1 = _get(raw, "w1", float, path, required=True)
    w2 = _get(raw, "w2", float, path, required=True)
    if "w3" in raw:
        return Weights.simple(w1, w2, _get(raw, "w3", float, path, required=True))
    return Weights(
        w1,
        w2,
        _get(raw, "w3_migration", float, path, required=True),
        _get(raw, "w3_reassignment", float, path, required=True),
        _get(raw, "w3_sync", float, path, required=True),
    )


def _parse_weights_schedule(raw, path: str) -> tuple[tuple[int, Weights], ...]:
    if isinstance(raw, dict):
        return ((1, _parse_weights(raw, path)),)
    if isinstance(raw, list):
        entries = []
        for i, item in enumerate(raw):
            item_path = f"{path}[{i}]"
            item = _expect(item, item_path)
            start = _get(item, "from_slot", int, item_path, default=1)
            body = {k: v for k, v in item.items() if k != "from_slot"}
            entries.append((start, _parse_weights(body, item_path)))
        return tuple(entries)
    raise ConfigurationError(f"{path}: expected an object or a list")


def _build(section: dict, path: str, cls, fields_map: dict):
    kwargs = {}
    known = set(fields_map)
    for key in section:
        if key not in known:
            raise ConfigurationError(f"{path}.{key}: unknown field")
    for key, kind in fields_map.items():
        if key in section:
            kwargs[key] = _get(section, key, kind, path)
    try:
        return cls(**kwargs)
    except ConfigurationError as exc:
        raise ConfigurationError(f"{path}.{exc}") from exc


def scenario_from_dict(raw: dict, base_dir: Path | None = None) -> ScenarioConfig:
    raw = _expect(raw, "config")
    known_top = {
        "constellation", "traffic", "delay", "migration", "weights", "ga",
        "k", "slots", "slot_seconds", "start_gmt", "strategy",
        "soft_leo_in_orbit_index", "output_dir", "rng_seed",
        "coverage_resolution_deg", "emit_convergence", "region_map",
    }
    for key in raw:
        if key not in known_top:
            raise ConfigurationError(f"config.{key}: unknown field")

    constellation = _build(
        raw.get("constellation", {}),
        "constellation",
        ConstellationConfig,
        {
            "num_planes": int,
            "sats_per_plane": int,
            "altitude_km": float,
            "inclination_deg": float,
            "half_view_angle_deg": float,
            "phasing_factor": int,
            "earth_radius_km": float,
            "earth_rotation_rad_s": float,
            "greenwich_angle_at_epoch_deg": float,
        },
    )

    traffic_section = dict(raw.get("traffic", {}))
    region_map_path = traffic_section.pop("region_map", None)
    if region_map_path is not None and not isinstance(region_map_path, str):
        raise ConfigurationError("traffic.region_map: expected a path string")
    traffic_params = _build(
        traffic_section, "traffic", TrafficParams,
        {"request_scale": float, "rounding": str},
    )

    delay_section = dict(raw.get("delay", {}))
    overrides_raw = delay_section.pop("rate_overrides", None)
    overrides: tuple[tuple[int, float], ...] = ()
    if overrides_raw is not None:
        if not isinstance(overrides_raw, dict):
            raise ConfigurationError("delay.rate_overrides: expected an object of sat_id -> rate")
        try:
            overrides = tuple(sorted((int(k), float(v)) for k, v in overrides_raw.items()))
        except (TypeError, ValueError) as exc:
            raise ConfigurationError("delay.rate_overrides: unparseable entry") from exc
    delay = _build(
        delay_section, "delay", DelayParams,
        {
            "processing_rate_per_s": float,
            "queue_fit_ms": float,
            "transmission_ms": float,
            "forwarding_ms": float,
            "processing_ms": float,
            "light_speed_km_per_ms": float,
        },
    )
    if overrides:
        delay = DelayParams(
            processing_rate_per_s=delay.processing_rate_per_s,
            rate_overrides=overrides,
            queue_fit_ms=delay.queue_fit_ms,
            transmission_ms=delay.transmission_ms,
            forwarding_ms=delay.forwarding_ms,
            processing_ms=delay.processing_ms,
            light_speed_km_per_ms=delay.light_speed_km_per_ms,
        )

    migration = _expect(raw.get("migration", {}), "migration")
    for key in migration:
        if key not in {"data_bytes", "rate_bps"}:
            raise ConfigurationError(f"migration.{key}: unknown field")

    ga_params = _build(
        raw.get("ga", {}),
        "ga",
        GAParams,
        {
            "population_size": int,
            "max_generations": int,
            "stall_limit": int,
            "stall_epsilon": float,
            "crossover_prob_placement": float,
            "crossover_prob_assignment": float,
            "mutation_prob_placement": float,
            "mutation_prob_assignment": float,
            "breeder_shrink": float,
            "breeder_gradient": int,
            "tournament_size": int,
            "prior_pool_size": int,
            "audit_fraction": float,
            "use_cluster_seed": bool,
            "use_prior_population": bool,
            "cluster_max_iters": int,
            "rng_seed": int,
        },
    )

    weights_schedule = (
        _parse_weights_schedule(raw["weights"], "weights")
        if "weights" in raw
        else ((1, Weights.simple(0.001, 1.0, 0.002)),)
    )

    start_raw = raw.get("start_gmt", "2022-01-01T00:00:00Z")
    if not isinstance(start_raw, str):
        raise ConfigurationError("start_gmt: expected an ISO 8601 string")
    start_gmt = _parse_datetime(start_raw, "start_gmt")

    if region_map_path and region_map_path != _SAMPLE_MAP_TOKEN and base_dir is not None:
        candidate = Path(region_map_path)
        if not candidate.is_absolute():
            region_map_path = str(base_dir / candidate)

    constellation = ConstellationConfig(
        num_planes=constellation.num_planes,
        sats_per_plane=constellation.sats_per_plane,
        altitude_km=constellation.altitude_km,
        inclination_deg=constellation.inclination_deg,
        half_view_angle_deg=constellation.half_view_angle_deg,
        phasing_factor=constellation.phasing_factor,
        epoch_gmt=start_gmt,
        earth_radius_km=constellation.earth_radius_km,
        earth_rotation_rad_s=constellation.earth_rotation_rad_s,
        greenwich_angle_at_epoch_deg=constellation.greenwich_angle_at_epoch_deg,
    )

    return ScenarioConfig(
        constellation=constellation,
        traffic=traffic_params,
        region_map_path=region_map_path,
        delay=delay,
        migration_data_bytes=_get(migration, "data_bytes", float, "migration", default=100e6),
        migration_rate_bps=_get(migration, "rate_bps", float, "migration", default=1e9),
        weights_schedule=weights_schedule,
        ga=ga_params,
        k=_get(raw, "k", int, "config", default=8),
        slots=_get(raw, "slots", int, "config", default=1440),
        slot_seconds=_get(raw, "slot_seconds", float, "config", default=60.0),
        start_gmt=start_gmt,
        strategy=_get(raw, "strategy", str, "config", default="ga"),
        soft_leo_in_orbit_index=_get(raw, "soft_leo_in_orbit_index", int, "config", default=0),
        output_dir=_get(raw, "output_dir", str, "config", default="out"),
        rng_seed=_get(raw, "rng_seed", int, "config", default=0),
        coverage_resolution_deg=_get(raw, "coverage_resolution_deg", float, "config", default=0.5),
        emit_convergence=_get(raw, "emit_convergence", bool, "config", default=False),
    )


def load_scenario(path) -> ScenarioConfig:
    path = Path(path)
    try:
        raw = json.loads(path.read_text(encoding="utf-8"))
    except FileNotFoundError:
        raise ConfigurationError(f"config file not found: {path}") from None
    except json.JSONDecodeError as exc:
        raise ConfigurationError(f"{path}: invalid JSON ({exc})") from exc
    return scenario_from_dict(raw, base_dir=path.parent)


def scenario_to_dict(cfg: ScenarioConfig) -> dict:
    """Config echo for the run summary; JSON-safe types only."""
    weights = [
        {
            "from_slot": start,
            "w1": w.w1,
            "w2": w.w2,
            "w3_migration": w.w3_migration,
            "w3_reassignment": w.w3_reassignment,
            "w3_sync": w.w3_sync,
        }
        for start, w in cfg.weights_schedule
    ]
    return {
        "constellation": {
            "num_planes": cfg.constellation.num_planes,
            "sats_per_plane": cfg.constellation.sats_per_plane,
            "altitude_km": cfg.constellation.altitude_km,
            "inclination_deg": cfg.constellation.inclination_deg,
            "half_view_angle_deg": cfg.constellation.half_view_angle_deg,
            "phasing_factor": cfg.constellation.phasing_factor,
            "earth_radius_km": cfg.constellation.earth_radius_km,
            "earth_rotation_rad_s": cfg.constellation.earth_rotation_rad_s,
            "greenwich_angle_at_epoch_deg": cfg.constellation.greenwich_angle_at_epoch_deg,
        },
        "traffic": {
            "request_scale": cfg.traffic.request_scale,
            "rounding": cfg.traffic.rounding,
            "region_map": cfg.region_map_path or "sample",
        },
        "delay": {
            "processing_rate_per_s": cfg.delay.processing_rate_per_s,
            "rate_overrides": {str(sat): rate for sat, rate in cfg.delay.rate_overrides},
            "queue_fit_ms": cfg.delay.queue_fit_ms,
            "transmission_ms": cfg.delay.transmission_ms,
            "forwarding_ms": cfg.delay.forwarding_ms,
            "processing_ms": cfg.delay.processing_ms,
            "light_speed_km_per_ms": cfg.delay.light_speed_km_per_ms,
        },
        "migration": {
            "data_bytes": cfg.migration_data_bytes,
            "rate_bps": cfg.migration_rate_bps,
        },
        "weights": weights,
        "ga": {
            "population_size": cfg.ga.population_size,
            "max_generations": cfg.ga.max_generations,
            "stall_limit": cfg.ga.stall_limit,
            "stall_epsilon": cfg.ga.stall_epsilon,
            "crossover_prob_placement": cfg.ga.crossover_prob_placement,
            "crossover_prob_assignment": cfg.ga.crossover_prob_assignment,
            "mutation_prob_placement": cfg.ga.mutation_prob_placement,
            "mutation_prob_assignment": cfg.ga.mutation_prob_assignment,
            "breeder_shrink": cfg.ga.breeder_shrink,
            "breeder_gradient": cfg.ga.breeder_gradient,
            "tournament_size": cfg.ga.tournament_size,
            "prior_pool_size": cfg.ga.prior_pool_size,
            "audit_fraction": cfg.ga.audit_fraction,
            "use_cluster_seed": cfg.ga.use_cluster_seed,
            "use_prior_population": cfg.ga.use_prior_population,
            "cluster_max_iters": cfg.ga.cluster_max_iters,
            "rng_seed": cfg.ga.rng_seed,
        },
        "k": cfg.k,
        "slots": cfg.slots,
        "slot_seconds": cfg.slot_seconds,
        "start_gmt": cfg.start_gmt.strftime("%Y-%m-%dT%H:%M:%SZ"),
        "strategy": cfg.strategy,
        "soft_leo_in_orbit_index": cfg.soft_leo_in_orbit_index,
        "output_dir": cfg.output_dir,
        "rng_seed": cfg.rng_seed,
        "coverage_resolution_deg": cfg.coverage_resolution_deg,
        "emit_convergence": cfg.emit_convergence,
    }
