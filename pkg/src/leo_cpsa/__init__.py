"""Time-slotted controller placement and switch assignment for SDN-managed
LEO satellite constellations: traffic synthesis, a five-part cost model, and
a warm-started genetic optimizer chained across slots."""

from .config import ScenarioConfig, load_scenario, scenario_from_dict
from .constellation import (
    ConstellationConfig,
    DistanceMatrix,
    SatState,
    TopologyGraph,
    build_walker,
    coverage_fraction,
    isl_topology,
    propagate,
    shortest_paths,
)
from .costs import (
    CostBreakdown,
    DelayParams,
    SlotContext,
    Strategy,
    Weights,
    objective,
    validate,
)
from .ga import Chromosome, GAParams, GaSolver, SlotSolution, cluster_seed, decode, encode, evolve_slot
from .harness import HorizonResult, SlotSnapshot, compare, emit_request_trace, run, run_horizon
from .traffic import RegionMap, RequestVector, TrafficParams, generate_sample_region_map, load_region_map

__version__ = "0.1.0"
