"""Multi-robot frontier exploration under communication-range limits."""

from .coordination import (
    ChoiceResult,
    ChoiceWeights,
    Mode,
    PassDownPath,
    RelayGraph,
    backup_choice,
    build_relay_graph,
    choose_frontier,
    enumerate_relay_paths,
    path_cost,
)
from .frontier import Frontier, FrontierList, extract_frontiers, frontier_pose, is_frontier_cell
from .grid import (
    CellState,
    GridGeometry,
    GridIndex,
    GroundTruthWorld,
    OccupancyGrid,
    Pose,
    completion_percentage,
    grid_to_world,
    load_world,
    merge_maps,
    world_to_grid,
)
from .planner import NavGrid, PathResult, astar, inflate, shortest_path_distance
from .sensing import Scan, SensorConfig, apply_scan, cast_scan
from .sim import (
    ExperimentRecord,
    IterationTrace,
    SimConfig,
    Simulation,
    load_config,
    relay_chain_valid,
    run_experiment,
    run_sweep,
)

__version__ = "0.1.0"
