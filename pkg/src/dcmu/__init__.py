"""Decentralized connectivity maintenance under motion and sensing uncertainty."""

__version__ = "0.1.0"

from .consensus import ConsensusGains, ConsensusState, NeighborMessage, consensus_round, run_consensus_epoch
from .controller import ControlReport, NeighborTerm, nominal_control, value_function, value_gradient
from .geometry import Obstacle, SegmentProjection, Vec2, project_point_to_segment
from .robot_model import NoiseParams, RobotState, Role
from .scenario import parse_scenario, serialize_scenario
from .simulator import MonteCarloResult, RobotSpec, RunMetrics, Scenario, monte_carlo, run_episode
from .weighted_graph import GraphParams, GraphSnapshot, WeightedEdge, WorldView, build_graph, edge_weight, fiedler_oracle, laplacian, true_binary_connectivity

__all__ = [
    "ConsensusGains",
    "ConsensusState",
    "ControlReport",
    "GraphParams",
    "GraphSnapshot",
    "MonteCarloResult",
    "NeighborMessage",
    "NeighborTerm",
    "NoiseParams",
    "Obstacle",
    "RobotSpec",
    "RobotState",
    "Role",
    "RunMetrics",
    "Scenario",
    "SegmentProjection",
    "Vec2",
    "WeightedEdge",
    "WorldView",
    "build_graph",
    "consensus_round",
    "edge_weight",
    "fiedler_oracle",
    "laplacian",
    "monte_carlo",
    "nominal_control",
    "parse_scenario",
    "project_point_to_segment",
    "run_consensus_epoch",
    "run_episode",
    "serialize_scenario",
    "true_binary_connectivity",
    "value_function",
    "value_gradient",
]
