import numpy as np
import pytest

from leo_cpsa import constellation as geom
from leo_cpsa import costs, traffic

TOY_HALF_VIEW = 60.0


def toy_constellation_cfg(**overrides) -> geom.ConstellationConfig:
    """Six satellites (3 planes x 2) with a wide view cone so the tiny fleet
    still covers populated regions. The 67 degree inclination breaks the
    coverage symmetries that produce exactly tied optima on toy instances."""
    base = dict(
        num_planes=3,
        sats_per_plane=2,
        inclination_deg=67.0,
        half_view_angle_deg=TOY_HALF_VIEW,
    )
    base.update(overrides)
    return geom.ConstellationConfig(**base)


@pytest.fixture(scope="session")
def toy_cfg():
    return toy_constellation_cfg()


@pytest.fixture(scope="session")
def toy_dm(toy_cfg):
    states = geom.propagate(geom.build_walker(toy_cfg), toy_cfg, 1, 60.0)
    return geom.shortest_paths(geom.isl_topology(states, toy_cfg))


@pytest.fixture(scope="session")
def full_cfg():
    return geom.ConstellationConfig()


@pytest.fixture(scope="session")
def full_dm(full_cfg):
    states = geom.propagate(geom.build_walker(full_cfg), full_cfg, 1, 60.0)
    return geom.shortest_paths(geom.isl_topology(states, full_cfg))


def line_dm(*edge_lengths_km: float) -> geom.DistanceMatrix:
    """Distance matrix of a path graph 1-2-...-n with the given edge lengths."""
    edges = tuple(
        (i + 1, i + 2, float(length)) for i, length in enumerate(edge_lengths_km)
    )
    return geom.shortest_paths(geom.TopologyGraph(len(edge_lengths_km) + 1, edges))


def triangle_dm(d_km: float) -> geom.DistanceMatrix:
    g = geom.TopologyGraph(3, ((1, 2, d_km), (1, 3, d_km), (2, 3, d_km)))
    return geom.shortest_paths(g)


def make_context(
    dm: geom.DistanceMatrix,
    requests=None,
    backlogs=None,
    params: costs.DelayParams | None = None,
    prev: costs.Strategy | None = None,
    **kwargs,
) -> costs.SlotContext:
    n = dm.num_satellites
    if requests is None:
        requests = np.zeros(n, dtype=np.int64)
    return costs.SlotContext(
        dm=dm,
        requests=np.asarray(requests),
        backlogs=backlogs or {},
        params=params or costs.DelayParams(),
        prev_strategy=prev,
        **kwargs,
    )


def random_valid_strategy(n: int, k: int, rng: np.random.Generator) -> costs.Strategy:
    controllers = tuple(int(c) for c in rng.choice(n, size=k, replace=False) + 1)
    assignment = tuple(controllers[int(i)] for i in rng.integers(0, k, size=n))
    return costs.Strategy(controllers, assignment)


TOY_USER_SCALE = 3e-3


@pytest.fixture(scope="session")
def toy_region_map_path(tmp_path_factory):
    """A down-scaled copy of the sample map so toy fleets see small loads."""
    path = tmp_path_factory.mktemp("maps") / "toy_region_map.csv"
    traffic.write_region_map_csv(traffic.generate_sample_region_map(user_scale=TOY_USER_SCALE), path)
    return path


def toy_scenario_dict(region_map_path, **overrides) -> dict:
    """Scenario template for the 6-satellite oracle-scale runs."""
    raw = {
        "constellation": {
            "num_planes": 3,
            "sats_per_plane": 2,
            "inclination_deg": 67.0,
            "half_view_angle_deg": TOY_HALF_VIEW,
        },
        "traffic": {"region_map": str(region_map_path)},
        # Small service rate so backlogs actually accumulate at this scale.
        "delay": {"processing_rate_per_s": 8.0},
        "ga": {
            "population_size": 120,
            "max_generations": 500,
            "stall_limit": 40,
            "prior_pool_size": 30,
        },
        "k": 2,
        "slots": 3,
        "slot_seconds": 60,
        "weights": {"w1": 0.001, "w2": 1.0, "w3": 0.002},
        "strategy": "ga",
        "output_dir": "unused",
        "rng_seed": 0,
    }
    for key, value in overrides.items():
        if isinstance(value, dict) and isinstance(raw.get(key), dict):
            raw[key].update(value)
        else:
            raw[key] = value
    return raw
