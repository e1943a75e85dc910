"""Input coercion for the estimator and the command line."""

from __future__ import annotations

from typing import Any

from .exceptions import LeafMismatch
from .netcore import ContractionTree, TensorNetwork, network_from_document, tree_from_document

__all__ = ["check_network", "check_tree"]


def check_network(net: Any) -> TensorNetwork:
    """Return ``net`` as a :class:`TensorNetwork`, accepting document dicts."""
    if isinstance(net, TensorNetwork):
        return net
    if isinstance(net, dict):
        return network_from_document(net)
    raise TypeError(f"expected a TensorNetwork or network document, got {type(net).__name__}")


def check_tree(tree: Any, net: TensorNetwork) -> ContractionTree:
    """Return ``tree`` as a :class:`ContractionTree` whose leaves match ``net``."""
    if not isinstance(tree, ContractionTree):
        tree = tree_from_document(tree, net.n_tensors)
    if tree.n != net.n_tensors:
        raise LeafMismatch(f"tree has {tree.n} leaves, network has {net.n_tensors} tensors")
    return tree
