"""Graph continual-learning benchmark: coverage-diversity replay selection
with structure refinement around replayed nodes, baseline samplers, and a
forgetting-metrics suite, all runnable at desk scale."""

from .config import ExperimentConfig, TrainConfig
from .graphs import Graph, buffer_homophily_table, homophily_ratio
from .metrics import buff_div, corr_div, dist_from_center, fm, pm
from .replay import (
    CoverageSpec,
    ReplayBuffer,
    buffer_quota,
    class_pair_mean_distance,
    coverage,
    select_buffer_cd,
    select_buffer_clustering,
    select_buffer_cm,
    select_buffer_mf,
    select_buffer_random,
)
from .streams import SplitSpec, TaskStream, build_task_stream
from .structure import (
    CandidateSets,
    RefinedAdjacency,
    add_edges,
    build_candidates,
    delete_edges,
    homophily_boost_edges,
    refine_structure,
)
from .trainer import run_experiment, run_seed, run_task

__version__ = "0.1.0"

__all__ = [
    "CandidateSets", "CoverageSpec", "ExperimentConfig", "Graph",
    "RefinedAdjacency", "ReplayBuffer", "SplitSpec", "TaskStream",
    "TrainConfig", "add_edges", "buff_div", "buffer_homophily_table",
    "buffer_quota", "build_candidates", "build_task_stream",
    "class_pair_mean_distance", "corr_div", "coverage", "delete_edges",
    "dist_from_center", "fm", "homophily_boost_edges", "homophily_ratio",
    "pm", "refine_structure", "run_experiment", "run_seed", "run_task",
    "select_buffer_cd", "select_buffer_clustering", "select_buffer_cm",
    "select_buffer_mf", "select_buffer_random",
]
