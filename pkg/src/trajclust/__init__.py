"""Clustering toolkit for network-constrained trajectories and road segments.

Trajectories are symbolic sequences of road-segment ids. The toolkit models
their interactions with the road network as a bipartite traversal graph and
offers two clustering routes: modularity-based community detection on the
weighted similarity projections, and direct MAP co-clustering of the
traversal counts. Evaluation utilities (confusion matrices, adjusted Rand
index, mutual-information reports) and a labeled synthetic-trajectory
generator round out the pipeline.
"""

from .network import RoadNetwork, ZoneGrid, build_grid, load_network, shortest_path
from .generator import (
    GeneratorConfig,
    Trajectory,
    TrajectoryDataset,
    generate,
    load_dataset,
    save_dataset,
)
from .bigraph import (
    SimilarityGraph,
    TraversalMatrix,
    build_traversal_matrix,
    project_segments,
    project_trajectories,
    segment_contribution,
    trajectory_relevance,
)
from .community import Dendrogram, Partition, agglomerate, cut, modularity, refine
from .cocluster import (
    CoClusterModel,
    CoClusterResult,
    cost,
    finest_model,
    greedy,
    merge_delta,
    post_optimize,
    random_model,
    vns_search,
)
from .analysis import (
    ContingencyReport,
    CrossedMatrixReport,
    MIReport,
    adjusted_rand_index,
    confusion,
    crossed_matrix,
    mutual_information,
)

__version__ = "0.1.0"

__all__ = [
    "RoadNetwork",
    "ZoneGrid",
    "build_grid",
    "load_network",
    "shortest_path",
    "GeneratorConfig",
    "Trajectory",
    "TrajectoryDataset",
    "generate",
    "load_dataset",
    "save_dataset",
    "SimilarityGraph",
    "TraversalMatrix",
    "build_traversal_matrix",
    "project_segments",
    "project_trajectories",
    "segment_contribution",
    "trajectory_relevance",
    "Dendrogram",
    "Partition",
    "agglomerate",
    "cut",
    "modularity",
    "refine",
    "CoClusterModel",
    "CoClusterResult",
    "cost",
    "finest_model",
    "greedy",
    "merge_delta",
    "post_optimize",
    "random_model",
    "vns_search",
    "ContingencyReport",
    "CrossedMatrixReport",
    "MIReport",
    "adjusted_rand_index",
    "confusion",
    "crossed_matrix",
    "mutual_information",
    "__version__",
]
