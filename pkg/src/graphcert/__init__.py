"""Certified robustness for graph classifiers via hash-divided subgraph voting."""

from .certify import (
    Certificate,
    VoteTally,
    certified_accuracy_curve,
    certified_size,
    certify,
    perturbation_size,
    tally_votes,
    voting_predict,
)
from .division import (
    HashScheme,
    Strategy,
    SubgraphSet,
    Task,
    TaskKind,
    divide,
    divide_edge_centric,
    divide_node_centric,
    edge_subgraph_index,
    hash_to_index,
    node_subgraph_index,
    pad_index,
)
from .gnn import GcnParams, TrainConfig, backward, gcn_forward, init_params, predict_graph, predict_node, train
from .graph import Graph, Perturbation, PerturbationError, apply_perturbation, canonicalize_edge, validate
from .perturb import AttackKind, AttackSpace, count_altered, enumerate_attacks, theorem_bound, theorem_sweep, verify_certificate

__all__ = [
    "AttackKind",
    "AttackSpace",
    "Certificate",
    "GcnParams",
    "Graph",
    "HashScheme",
    "Perturbation",
    "PerturbationError",
    "Strategy",
    "SubgraphSet",
    "Task",
    "TaskKind",
    "TrainConfig",
    "VoteTally",
    "apply_perturbation",
    "backward",
    "canonicalize_edge",
    "certified_accuracy_curve",
    "certified_size",
    "certify",
    "count_altered",
    "divide",
    "divide_edge_centric",
    "divide_node_centric",
    "edge_subgraph_index",
    "enumerate_attacks",
    "gcn_forward",
    "hash_to_index",
    "init_params",
    "node_subgraph_index",
    "pad_index",
    "perturbation_size",
    "predict_graph",
    "predict_node",
    "tally_votes",
    "theorem_bound",
    "theorem_sweep",
    "train",
    "validate",
    "verify_certificate",
    "voting_predict",
]

__version__ = "0.1.0"
