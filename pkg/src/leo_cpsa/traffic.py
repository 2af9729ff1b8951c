"""Ground traffic synthesis.

A 288-region Internet-user map drives per-slot control-plane load: each
region emits up to ``max_users / 100`` messages per slot, scaled by a local
diurnal activity curve and by the fraction of those messages that turn into
controller requests. Messages from a region are split among the satellites
covering it in proportion to covered area; regions no satellite covers
contribute nothing.
"""
from __future__ import annotations

import csv
import math
from dataclasses import dataclass
from datetime import datetime

import numpy as np

from . import constellation as geom
from .errors import ConfigurationError, IngestionError

NUM_REGIONS = geom.NUM_GRID_CELLS
USERS_PER_MESSAGE = 100.0

ROUNDING_POLICIES = ("floor", "round")


@dataclass(frozen=True)
class TrafficParams:
    """``request_scale`` is the fraction of network messages that are
    controller requests; ``rounding`` fixes how fractional per-satellite
    counts become integers (floor, or round half up)."""

    request_scale: float = 0.05
    rounding: str = "floor"

    def __post_init__(self) -> None:
        if not 0 < self.request_scale <= 1:
            raise ConfigurationError("request_scale: must be in (0, 1]")
        if self.rounding not in ROUNDING_POLICIES:
            raise ConfigurationError(f"rounding: must be one of {ROUNDING_POLICIES}")


@dataclass(frozen=True)
class Region:
    region_id: int
    lat_min: float
    lon_min: float
    max_users: int
    utc_offset_hours: int

    @property
    def max_messages(self) -> float:
        return self.max_users / USERS_PER_MESSAGE

    @property
    def center(self) -> tuple[float, float]:
        half = geom.GRID_CELL_DEG / 2
        return (self.lat_min + half, self.lon_min + half)


@dataclass(eq=False)
class RegionMap:
    """Immutable after construction; numpy views are precomputed."""

    regions: tuple[Region, ...]

    def __post_init__(self) -> None:
        self.bounds = np.array([(r.lat_min, r.lon_min) for r in self.regions])
        self.max_messages = np.array([r.max_messages for r in self.regions])
        self.utc_offsets = np.array([r.utc_offset_hours for r in self.regions])

    def __len__(self) -> int:
        return len(self.regions)


def default_utc_offset(center_lon: float) -> int:
    """Offset from the region centre longitude, one hour per 15 degrees,
    rounded half away from zero (so a centre at 7.5E is UTC+1)."""
    x = center_lon / geom.GRID_CELL_DEG
    return int(math.floor(x + 0.5)) if x >= 0 else -int(math.floor(-x + 0.5))


def _check_tiling(regions: list[Region]) -> None:
    seen_ids: dict[int, int] = {}
    seen_cells: dict[tuple[float, float], int] = {}
    for row, reg in enumerate(regions, start=1):
        if reg.region_id in seen_ids:
            raise IngestionError(
                f"row {row}: duplicate region_id {reg.region_id} (also row {seen_ids[reg.region_id]})"
            )
        seen_ids[reg.region_id] = row
        cell = (reg.lat_min, reg.lon_min)
        if cell in seen_cells:
            raise IngestionError(
                f"row {row}: bounds overlap region of row {seen_cells[cell]}"
            )
        seen_cells[cell] = row
        lat_ok = (
            -90 <= reg.lat_min <= 90 - geom.GRID_CELL_DEG
            and abs((reg.lat_min + 90) % geom.GRID_CELL_DEG) < 1e-9
        )
        lon_ok = (
            -180 <= reg.lon_min <= 180 - geom.GRID_CELL_DEG
            and abs((reg.lon_min + 180) % geom.GRID_CELL_DEG) < 1e-9
        )
        if not (lat_ok and lon_ok):
            raise IngestionError(f"row {row}: bounds not on the 15 degree grid")
    # 288 unique on-lattice cells with no duplicates tile the sphere.


def load_region_map(path) -> RegionMap:
    """Read a region map CSV.

    Columns: region_id, lat_min, lon_min, max_users[, utc_offset]. A header
    row is required; lines starting with '#' are comments. The 288 rows must
    tile the globe exactly once.
    """
    regions: list[Region] = []
    with open(path, newline="", encoding="utf-8") as fh:
        filtered = (line for line in fh if not line.lstrip().startswith("#"))
        reader = csv.DictReader(filtered)
        if reader.fieldnames is None:
            raise IngestionError(f"{path}: empty file, header row required")
        required = {"region_id", "lat_min", "lon_min", "max_users"}
        missing = required - set(name.strip() for name in reader.fieldnames)
        if missing:
            raise IngestionError(f"{path}: missing columns {sorted(missing)}")
        for row_no, row in enumerate(reader, start=1):
            try:
                region_id = int(row["region_id"])
                lat_min = float(row["lat_min"])
                lon_min = float(row["lon_min"])
                max_users = int(float(row["max_users"]))
            except (TypeError, ValueError) as exc:
                raise IngestionError(f"row {row_no}: unparseable value ({exc})") from exc
            if max_users < 0:
                raise IngestionError(f"row {row_no}: negative max_users")
            raw_offset = (row.get("utc_offset") or "").strip()
            if raw_offset:
                offset = int(raw_offset)
            else:
                offset = default_utc_offset(lon_min + geom.GRID_CELL_DEG / 2)
            regions.append(Region(region_id, lat_min, lon_min, max_users, offset))
    if len(regions) != NUM_REGIONS:
        raise IngestionError(
            f"{path}: expected {NUM_REGIONS} regions, found {len(regions)}"
        )
    _check_tiling(regions)
    return RegionMap(tuple(regions))


def write_region_map_csv(region_map: RegionMap, path) -> None:
    with open(path, "w", newline="", encoding="utf-8") as fh:
        writer = csv.writer(fh)
        writer.writerow(["region_id", "lat_min", "lon_min", "max_users", "utc_offset"])
        for r in region_map.regions:
            writer.writerow([r.region_id, r.lat_min, r.lon_min, r.max_users, r.utc_offset_hours])


def gmt_hours(gmt: datetime) -> float:
    return gmt.hour + gmt.minute / 60 + gmt.second / 3600 + gmt.microsecond / 3.6e9


def diurnal_factor(region: Region, gmt: datetime) -> float:
    """Activity scale in [0, 1] at the region's local time: zero overnight,
    a linear morning ramp, flat daytime, and a linear late-evening decay."""
    tau = (gmt_hours(gmt) + region.utc_offset_hours) % 24.0
    return _diurnal_of_local_hours(tau)


def _diurnal_of_local_hours(tau: float) -> float:
    if tau < 6.0:
        return 0.0
    if tau < 10.0:
        return 0.25 * (tau - 6.0)
    if tau < 22.0:
        return 1.0
    return 1.0 - 0.25 * (tau - 22.0)


def region_messages(region: Region, gmt: datetime, params: TrafficParams) -> float:
    """Messages a region sends toward the control plane this slot,
    before any rounding."""
    return region.max_messages * diurnal_factor(region, gmt) * params.request_scale


def region_message_vector(region_map: RegionMap, gmt: datetime, params: TrafficParams) -> np.ndarray:
    tau = (gmt_hours(gmt) + region_map.utc_offsets) % 24.0
    w = np.select(
        [tau < 6.0, tau < 10.0, tau < 22.0],
        [0.0, 0.25 * (tau - 6.0), 1.0],
        default=1.0 - 0.25 * (tau - 22.0),
    )
    return region_map.max_messages * w * params.request_scale


def satellite_request_shares(areas: np.ndarray, messages: np.ndarray) -> np.ndarray:
    """Per-satellite request totals before rounding.

    ``areas`` is the (N, R) covered-area matrix; each region's messages are
    split in proportion to covered area. Uncovered regions are dropped, so
    the shares of the covered regions sum to their message total exactly.
    """
    totals = areas.sum(axis=0)
    covered = totals > 0
    ratios = np.zeros_like(areas)
    ratios[:, covered] = areas[:, covered] / totals[covered]
    return ratios @ messages


@dataclass(frozen=True)
class RequestVector:
    """Integer request counts per switch for one slot."""

    counts: np.ndarray
    gmt: datetime

    def total(self) -> int:
        return int(self.counts.sum())


def apply_rounding(values: np.ndarray, policy: str) -> np.ndarray:
    if policy == "floor":
        return np.floor(values).astype(np.int64)
    if policy == "round":
        return np.floor(values + 0.5).astype(np.int64)
    raise ConfigurationError(f"rounding: must be one of {ROUNDING_POLICIES}")


def satellite_requests(
    areas: np.ndarray,
    region_map: RegionMap,
    gmt: datetime,
    params: TrafficParams,
) -> RequestVector:
    shares = satellite_request_shares(areas, region_message_vector(region_map, gmt, params))
    return RequestVector(apply_rounding(shares, params.rounding), gmt)


# Synthetic population hotspots for the bundled sample map: (lat, lon,
# peak millions of users, spread km). Rough continent-shaped blobs; the
# numbers aim for a plausible global total, not census accuracy.
_HOTSPOTS = (
    (32.0, 114.0, 125.0, 1700.0),   # eastern China
    (23.0, 80.0, 105.0, 1500.0),    # India
    (36.0, 139.0, 21.0, 900.0),     # Japan
    (12.0, 105.0, 40.0, 1400.0),    # southeast Asia
    (-6.0, 110.0, 29.0, 1200.0),    # Indonesia
    (50.0, 12.0, 68.0, 1800.0),     # Europe
    (56.0, 44.0, 20.0, 1600.0),     # western Russia
    (39.0, -95.0, 57.0, 2100.0),    # United States
    (20.0, -100.0, 20.0, 1100.0),   # Mexico / Central America
    (-12.0, -52.0, 42.0, 1900.0),   # Brazil
    (-34.0, -62.0, 12.0, 1100.0),   # southern South America
    (8.0, 6.0, 33.0, 1300.0),       # west Africa
    (28.0, 30.0, 21.0, 1200.0),     # north Africa / Nile
    (-2.0, 36.0, 18.0, 1300.0),     # east Africa
    (-28.0, 26.0, 10.0, 900.0),     # southern Africa
    (34.0, 47.0, 26.0, 1300.0),     # Middle East
    (-31.0, 140.0, 6.0, 1400.0),    # Australia
)


def generate_sample_region_map(user_scale: float = 1.0) -> RegionMap:
    """Deterministic synthetic user map with continent-shaped hotspots.

    ``user_scale`` shrinks every region uniformly, handy for toy scenarios.
    """
    earth_r = 6371.0
    regions = []
    for region_id in range(1, NUM_REGIONS + 1):
        lat_min, lon_min = geom.grid_cell_bounds(region_id)
        clat = math.radians(lat_min + geom.GRID_CELL_DEG / 2)
        clon = math.radians(lon_min + geom.GRID_CELL_DEG / 2)
        users = 0.0
        for hlat, hlon, peak_m, sigma_km in _HOTSPOTS:
            hlat_r, hlon_r = math.radians(hlat), math.radians(hlon)
            cos_d = math.sin(clat) * math.sin(hlat_r) + math.cos(clat) * math.cos(
                hlat_r
            ) * math.cos(clon - hlon_r)
            d_km = earth_r * math.acos(min(1.0, max(-1.0, cos_d)))
            users += peak_m * 1e6 * math.exp(-0.5 * (d_km / sigma_km) ** 2)
        max_users = int(round(users * user_scale))
        offset = default_utc_offset(lon_min + geom.GRID_CELL_DEG / 2)
        regions.append(Region(region_id, lat_min, lon_min, max_users, offset))
    return RegionMap(tuple(regions))
