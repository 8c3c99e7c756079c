"""Simulator for a decentralized social knowledge service: a partitioned
social multigraph, relationship inference with per-hop timeout budgets,
relationship-based access control, and a peer-to-peer overlay model."""

from .graph import SocialMultiGraph, EdgeUpdateRecord, load_edge_list
from .inference import InferenceParams, InferenceResult, evaluate_centralized
from .mapping import MappingPlan, random_mapping
from .engine import DistributedEngine, build_overlay

__all__ = [
    "SocialMultiGraph",
    "EdgeUpdateRecord",
    "load_edge_list",
    "InferenceParams",
    "InferenceResult",
    "evaluate_centralized",
    "MappingPlan",
    "random_mapping",
    "DistributedEngine",
    "build_overlay",
]

__version__ = "0.1.0"
