"""Contraction-tree scoring and NNI refinement for tensor networks."""

from .costmodel import CostVector, Precision, pareto_dominates, score, slice_plan
from .exceptions import *  # noqa: F403
from .netcore import ContractionTree, TensorNetwork, build_network
from .nni import NniMove, Workspace, apply, neighborhood, revert
from .refine import Certificate, RefineConfig, RefineResult, Rule, mechanism_stats, refine
from .seeds import export_tree, greedy_seed, import_tree, random_seed, randomized_greedy_seed
from .topo import Family, TopologySpec, generate

__all__ = [
    "Certificate",
    "ContractionTree",
    "CostVector",
    "Family",
    "NNIRefiner",
    "NniMove",
    "Precision",
    "RefineConfig",
    "RefineResult",
    "Rule",
    "TensorNetwork",
    "TopologySpec",
    "Workspace",
    "apply",
    "build_network",
    "export_tree",
    "generate",
    "greedy_seed",
    "import_tree",
    "mechanism_stats",
    "neighborhood",
    "pareto_dominates",
    "random_seed",
    "randomized_greedy_seed",
    "refine",
    "revert",
    "score",
    "slice_plan",
]


def __getattr__(name):
    # scikit-learn is only imported when the estimator is asked for
    if name == "NNIRefiner":
        from .estimator import NNIRefiner

        return NNIRefiner
    raise AttributeError(f"module {__name__!r} has no attribute {name!r}")
