"""Walker-delta constellation geometry.

Generates evenly phased circular orbits, propagates satellite positions per
time slot, builds the four-neighbour (+Grid) inter-satellite link graph,
computes all-pairs shortest paths over link lengths, and evaluates ground
footprint coverage of the 15-degree latitude/longitude grid.

Conventions: distances in kilometres, angles in degrees unless a suffix says
otherwise. Satellite ids are 1-based and stable across slots:
``sat_id = plane_index * sats_per_plane + index_in_plane + 1``.
Positions are inertial (non-rotating frame); Earth rotation enters only when
sub-satellite longitudes are computed.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field
from datetime import datetime, timezone
from functools import lru_cache

import numpy as np
from scipy.sparse import csr_matrix
from scipy.sparse.csgraph import shortest_path as _csgraph_shortest_path

from .errors import ConfigurationError, TopologyError

# Standard gravitational parameter of Earth, km^3/s^2.
MU_EARTH_KM3_S2 = 398600.4418
# Sidereal rotation rate of Earth, rad/s.
SIDEREAL_RATE_RAD_S = 7.2921159e-5

# The ground grid: 15 x 15 degree cells, 24 longitude bands x 12 latitude
# bands = 288 cells tiling [-90, 90] x [-180, 180].
GRID_CELL_DEG = 15.0
GRID_LON_CELLS = 24
GRID_LAT_CELLS = 12
NUM_GRID_CELLS = GRID_LON_CELLS * GRID_LAT_CELLS


def _utc(dt: datetime) -> datetime:
    if dt.tzinfo is None:
        return dt.replace(tzinfo=timezone.utc)
    return dt.astimezone(timezone.utc)


@dataclass(frozen=True)
class ConstellationConfig:
    """Walker-delta shell parameters plus the Earth model knobs.

    ``phasing_factor`` is the Walker F parameter: satellites in adjacent
    planes are offset in anomaly by ``F * 360 / num_satellites`` degrees.
    """

    num_planes: int = 8
    sats_per_plane: int = 9
    altitude_km: float = 780.0
    inclination_deg: float = 53.0
    half_view_angle_deg: float = 35.5
    phasing_factor: int = 1
    epoch_gmt: datetime = datetime(2022, 1, 1, tzinfo=timezone.utc)
    earth_radius_km: float = 6371.0
    earth_rotation_rad_s: float = SIDEREAL_RATE_RAD_S
    greenwich_angle_at_epoch_deg: float = 0.0

    def __post_init__(self) -> None:
        if self.num_planes < 1:
            raise ConfigurationError("num_planes: must be >= 1")
        if self.sats_per_plane < 1:
            raise ConfigurationError("sats_per_plane: must be >= 1")
        if self.altitude_km <= 0:
            raise ConfigurationError("altitude_km: must be > 0")
        if not 0 < self.inclination_deg <= 180:
            raise ConfigurationError("inclination_deg: must be in (0, 180]")
        if not 0 < self.half_view_angle_deg < 90:
            raise ConfigurationError("half_view_angle_deg: must be in (0, 90)")
        if self.earth_radius_km <= 0:
            raise ConfigurationError("earth_radius_km: must be > 0")
        object.__setattr__(self, "epoch_gmt", _utc(self.epoch_gmt))

    @property
    def num_satellites(self) -> int:
        return self.num_planes * self.sats_per_plane

    @property
    def orbit_radius_km(self) -> float:
        return self.earth_radius_km + self.altitude_km

    @property
    def orbital_period_s(self) -> float:
        a = self.orbit_radius_km
        return 2.0 * math.pi * math.sqrt(a**3 / MU_EARTH_KM3_S2)


@dataclass(frozen=True)
class OrbitalElements:
    """Circular-orbit elements of one satellite at the epoch."""

    sat_id: int
    plane: int
    index_in_plane: int
    raan_deg: float
    anomaly_deg: float


@dataclass(frozen=True)
class SatState:
    """Satellite state at one instant: inertial position and ground point."""

    sat_id: int
    position_km: tuple[float, float, float]
    sub_point: tuple[float, float]  # (lat_deg, lon_deg)


def build_walker(cfg: ConstellationConfig) -> list[OrbitalElements]:
    """Lay out the shell: plane p at RAAN p*360/P, in-plane slot s at anomaly
    s*360/S plus the inter-plane phasing offset p*F*360/N."""
    n_total = cfg.num_satellites
    elements: list[OrbitalElements] = []
    for p in range(cfg.num_planes):
        raan = p * 360.0 / cfg.num_planes
        phase = p * cfg.phasing_factor * 360.0 / n_total
        for s in range(cfg.sats_per_plane):
            anomaly = (s * 360.0 / cfg.sats_per_plane + phase) % 360.0
            sat_id = p * cfg.sats_per_plane + s + 1
            elements.append(OrbitalElements(sat_id, p, s, raan, anomaly))
    return elements


def _position_eci(cfg: ConstellationConfig, raan_deg: float, anomaly_deg: float) -> tuple[float, float, float]:
    r = cfg.orbit_radius_km
    u = math.radians(anomaly_deg)
    i = math.radians(cfg.inclination_deg)
    omega = math.radians(raan_deg)
    # In-plane position rotated by inclination about x, then RAAN about z.
    x_orb, y_orb = r * math.cos(u), r * math.sin(u)
    x1, y1, z1 = x_orb, y_orb * math.cos(i), y_orb * math.sin(i)
    x = x1 * math.cos(omega) - y1 * math.sin(omega)
    y = x1 * math.sin(omega) + y1 * math.cos(omega)
    return (x, y, z1)


def propagate(
    elements: list[OrbitalElements],
    cfg: ConstellationConfig,
    slot_index: int,
    slot_seconds: float,
) -> list[SatState]:
    """Positions at ``epoch + (slot_index - 1) * slot_seconds``.

    Mean motion follows from the orbit radius (circular two-body motion, no
    perturbations). Sub-point longitudes subtract the Greenwich rotation
    accumulated since the epoch.
    """
    if slot_index < 1:
        raise ConfigurationError("slot_index: must be >= 1")
    if slot_seconds <= 0:
        raise ConfigurationError("slot_seconds: must be > 0")
    elapsed_s = (slot_index - 1) * slot_seconds
    mean_motion_deg_s = 360.0 / cfg.orbital_period_s
    greenwich_deg = cfg.greenwich_angle_at_epoch_deg + math.degrees(
        cfg.earth_rotation_rad_s * elapsed_s
    )
    states: list[SatState] = []
    for el in elements:
        anomaly = el.anomaly_deg + mean_motion_deg_s * elapsed_s
        pos = _position_eci(cfg, el.raan_deg, anomaly)
        r = math.sqrt(pos[0] ** 2 + pos[1] ** 2 + pos[2] ** 2)
        lat = math.degrees(math.asin(pos[2] / r))
        lon = math.degrees(math.atan2(pos[1], pos[0])) - greenwich_deg
        lon = (lon + 180.0) % 360.0 - 180.0
        states.append(SatState(el.sat_id, pos, (lat, lon)))
    return states


@dataclass(frozen=True)
class TopologyGraph:
    """Undirected ISL graph: edges are (sat_id, sat_id, link_length_km)."""

    num_nodes: int
    edges: tuple[tuple[int, int, float], ...]

    def degrees(self) -> np.ndarray:
        deg = np.zeros(self.num_nodes, dtype=np.int64)
        for a, b, _ in self.edges:
            deg[a - 1] += 1
            deg[b - 1] += 1
        return deg


def isl_topology(states: list[SatState], cfg: ConstellationConfig) -> TopologyGraph:
    """+Grid links: in-plane ring neighbours plus same-index satellites in the
    two adjacent planes, both wrapping. Who-connects-to-whom is static; link
    lengths are the current Euclidean distances."""
    n = cfg.num_satellites
    if len(states) != n:
        raise TopologyError(f"expected {n} satellite states, got {len(states)}")
    pos = {st.sat_id: np.asarray(st.position_km) for st in states}

    def sid(plane: int, idx: int) -> int:
        return (plane % cfg.num_planes) * cfg.sats_per_plane + (idx % cfg.sats_per_plane) + 1

    pairs: set[tuple[int, int]] = set()
    for p in range(cfg.num_planes):
        for s in range(cfg.sats_per_plane):
            a = sid(p, s)
            for b in (sid(p, s + 1), sid(p + 1, s)):
                if a != b:
                    pairs.add((min(a, b), max(a, b)))
    edges = tuple(
        (a, b, float(np.linalg.norm(pos[a] - pos[b]))) for a, b in sorted(pairs)
    )
    return TopologyGraph(n, edges)


@dataclass(frozen=True)
class DistanceMatrix:
    """All-pairs shortest paths over link lengths.

    ``dist_km[i-1, j-1]`` is the shortest-path length between satellites i
    and j, ``hops`` the number of links on the chosen path, and
    ``next_hop[i-1, j-1]`` the sat id of the first hop from i towards j
    (``i`` itself on the diagonal). Among equal-length alternatives the
    lowest-id next hop wins, so paths are deterministic.
    """

    dist_km: np.ndarray
    hops: np.ndarray
    next_hop: np.ndarray

    @property
    def num_satellites(self) -> int:
        return self.dist_km.shape[0]

    def path(self, i: int, j: int) -> list[int]:
        """Node list from i to j inclusive, following ``next_hop``."""
        nodes = [i]
        while nodes[-1] != j:
            nodes.append(int(self.next_hop[nodes[-1] - 1, j - 1]))
        return nodes


def shortest_paths(g: TopologyGraph) -> DistanceMatrix:
    n = g.num_nodes
    if n == 1:
        z = np.zeros((1, 1))
        return DistanceMatrix(z, z.astype(np.int64), np.ones((1, 1), dtype=np.int64))
    rows, cols, vals = [], [], []
    for a, b, w in g.edges:
        rows += [a - 1, b - 1]
        cols += [b - 1, a - 1]
        vals += [w, w]
    adj = csr_matrix((vals, (rows, cols)), shape=(n, n))
    dist = _csgraph_shortest_path(adj, method="D", directed=False)
    if not np.all(np.isfinite(dist)):
        raise TopologyError("topology graph is disconnected")
    # Exact symmetry despite float summation-order differences.
    dist = np.minimum(dist, dist.T)

    # Deterministic routing table: first hop minimising (link + remaining
    # distance); neighbour lists are sorted so ties pick the lowest id.
    neighbours: list[list[tuple[int, float]]] = [[] for _ in range(n)]
    for a, b, w in g.edges:
        neighbours[a - 1].append((b - 1, w))
        neighbours[b - 1].append((a - 1, w))
    next_hop = np.zeros((n, n), dtype=np.int64)
    for i in range(n):
        nbrs = sorted(neighbours[i])
        idx = np.array([v for v, _ in nbrs])
        w = np.array([lw for _, lw in nbrs])
        through = w[:, None] + dist[idx, :]  # (deg, n)
        best = idx[np.argmin(through, axis=0)]
        next_hop[i, :] = best + 1
        next_hop[i, i] = i + 1

    hops = np.full((n, n), -1, dtype=np.int64)
    np.fill_diagonal(hops, 0)
    for j in range(n):
        order = np.argsort(dist[:, j], kind="stable")
        for i in order:
            if i == j:
                continue
            nh = next_hop[i, j] - 1
            if hops[nh, j] < 0:
                raise TopologyError("routing table is not monotone")  # pragma: no cover
            hops[i, j] = hops[nh, j] + 1
    return DistanceMatrix(dist, hops, next_hop)


def footprint_central_angle_deg(cfg: ConstellationConfig) -> float:
    """Earth central half-angle of the circular footprint.

    The view cone of half-angle eps from the satellite intersects the sphere
    at central angle asin((R+h)/R * sin(eps)) - eps; when the cone misses the
    sphere the footprint is horizon-limited at acos(R/(R+h)).
    """
    r = cfg.earth_radius_km
    eps = math.radians(cfg.half_view_angle_deg)
    arg = (cfg.orbit_radius_km / r) * math.sin(eps)
    if arg >= 1.0:
        return math.degrees(math.acos(r / cfg.orbit_radius_km))
    return math.degrees(math.asin(arg)) - cfg.half_view_angle_deg


def grid_cell_bounds(region_id: int) -> tuple[float, float]:
    """(lat_min, lon_min) of a canonical grid cell, ids 1..288 scanning
    west-to-east then south-to-north."""
    if not 1 <= region_id <= NUM_GRID_CELLS:
        raise ConfigurationError(f"region_id: must be in 1..{NUM_GRID_CELLS}")
    lat_band, lon_band = divmod(region_id - 1, GRID_LON_CELLS)
    return (-90.0 + GRID_CELL_DEG * lat_band, -180.0 + GRID_CELL_DEG * lon_band)


@lru_cache(maxsize=8)
def _cell_samples(lat_min: float, lon_min: float, resolution_deg: float):
    """Sample-point unit vectors and unit-sphere cell areas for one grid cell.

    Cell centres on a resolution_deg lattice; per-sample area is the exact
    spherical area of its sub-cell (scale by R^2 for km^2). Cached because
    the grid is reused across satellites and slots.
    """
    per_axis = GRID_CELL_DEG / resolution_deg
    m = round(per_axis)
    if abs(per_axis - m) > 1e-9 or m < 1:
        raise ConfigurationError("resolution_deg: must evenly divide the 15 degree cell")
    lats = lat_min + (np.arange(m) + 0.5) * resolution_deg
    lons = lon_min + (np.arange(m) + 0.5) * resolution_deg
    lat_g, lon_g = np.meshgrid(np.radians(lats), np.radians(lons), indexing="ij")
    cos_lat = np.cos(lat_g)
    vecs = np.stack(
        [cos_lat * np.cos(lon_g), cos_lat * np.sin(lon_g), np.sin(lat_g)], axis=-1
    ).reshape(-1, 3)
    res = math.radians(resolution_deg)
    band = np.sin(np.radians(lats) + res / 2) - np.sin(np.radians(lats) - res / 2)
    areas = np.repeat(band * res, m)  # row-major matches meshgrid 'ij' reshape
    return vecs, areas


def _sub_point_unit(sub_point: tuple[float, float]) -> np.ndarray:
    lat, lon = math.radians(sub_point[0]), math.radians(sub_point[1])
    return np.array(
        [math.cos(lat) * math.cos(lon), math.cos(lat) * math.sin(lon), math.sin(lat)]
    )


def coverage_fraction(
    state: SatState,
    region_id: int,
    cfg: ConstellationConfig,
    resolution_deg: float = 0.5,
) -> tuple[float, float]:
    """(fraction, area_km2) of a canonical grid cell inside the footprint."""
    lat_min, lon_min = grid_cell_bounds(region_id)
    area = _coverage_area(state.sub_point, lat_min, lon_min, cfg, resolution_deg)
    cell_area = _cell_area_km2(lat_min, cfg, resolution_deg)
    return (area / cell_area if cell_area > 0 else 0.0, area)


def _cell_area_km2(lat_min: float, cfg: ConstellationConfig, resolution_deg: float) -> float:
    _, areas = _cell_samples(lat_min, -180.0, resolution_deg)
    return float(areas.sum()) * cfg.earth_radius_km**2


def _coverage_area(
    sub_point: tuple[float, float],
    lat_min: float,
    lon_min: float,
    cfg: ConstellationConfig,
    resolution_deg: float,
) -> float:
    vecs, areas = _cell_samples(lat_min, lon_min, resolution_deg)
    cos_lam = math.cos(math.radians(footprint_central_angle_deg(cfg)))
    covered = vecs @ _sub_point_unit(sub_point) >= cos_lam
    return float(areas[covered].sum()) * cfg.earth_radius_km**2


def coverage_areas(
    states: list[SatState],
    bounds: np.ndarray,
    cfg: ConstellationConfig,
    resolution_deg: float = 0.5,
) -> np.ndarray:
    """Covered area in km^2 for every (satellite, region) pair.

    ``bounds`` is an (R, 2) array of (lat_min, lon_min) rows. Vectorised
    equivalent of calling :func:`coverage_fraction` per pair.
    """
    subs = np.stack([_sub_point_unit(st.sub_point) for st in states])  # (N, 3)
    cos_lam = math.cos(math.radians(footprint_central_angle_deg(cfg)))
    r2 = cfg.earth_radius_km**2
    out = np.zeros((len(states), len(bounds)))
    for r, (lat_min, lon_min) in enumerate(bounds):
        vecs, areas = _cell_samples(float(lat_min), float(lon_min), resolution_deg)
        covered = (subs @ vecs.T) >= cos_lam  # (N, M)
        out[:, r] = covered @ areas * r2
    return out
