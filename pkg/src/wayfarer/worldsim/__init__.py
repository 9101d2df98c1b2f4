from .terrain import (
    BRUSH,
    CATALOG,
    DIRT,
    KIND_BY_NAME,
    MUD,
    N_KINDS,
    PAVEMENT,
    TALL_GRASS,
    WALL,
    TerrainKind,
    catalog_from_text,
    catalog_to_text,
)
from .world import World, WorldSpec, generate_world, load_world, save_world
from .sim import (
    DEFAULT_RADIUS,
    OBS_CHANNELS,
    Action,
    AgentState,
    Event,
    StickyWalk,
    center_signature,
    obs_length,
    observe_cell,
    radius_for_length,
    random_start,
    reached,
    render_observation,
    run_episode,
    safe_start_cells,
    signature_channel,
    step,
    uniform_walk,
)
from .oracles import (
    bfs_field,
    geometric_baseline_plan,
    geometric_mask,
    oracle_distance,
    reckless_mask,
    safe_mask,
    shortest_path,
)
from . import suites

__all__ = [
    "Action",
    "AgentState",
    "Event",
    "TerrainKind",
    "World",
    "WorldSpec",
    "generate_world",
    "render_observation",
    "step",
    "run_episode",
    "oracle_distance",
    "geometric_baseline_plan",
    "suites",
]
