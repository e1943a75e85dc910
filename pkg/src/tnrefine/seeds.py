"""Seed trees: greedy agglomeration, uniform random trees, and import."""

from __future__ import annotations

import heapq
import json
import math
import warnings
from pathlib import Path
from typing import Any

import numpy as np

from .costmodel import log2_int, score
from .exceptions import ParseError
from .netcore import (
    ContractionTree,
    TensorNetwork,
    iter_bits,
    tree_from_document,
    tree_from_nested,
    tree_from_pair_sequence,
    tree_to_document,
)

__all__ = [
    "DisconnectedWarning",
    "export_tree",
    "greedy_seed",
    "import_tree",
    "random_seed",
    "randomized_greedy_seed",
]


class DisconnectedWarning(UserWarning):
    """Greedy merging had to fall back to outer products."""


def _as_rng(rng) -> np.random.Generator:
    return rng if isinstance(rng, np.random.Generator) else np.random.default_rng(rng)


def _greedy_pairs(
    net: TensorNetwork,
    rng: np.random.Generator | None,
    temperature: float,
    flop_factor: int = 2,
) -> list[tuple[int, int]]:
    n = net.n_tensors
    masks: dict[int, int] = {t: net.leaf_masks[t] for t in range(n)}
    holders: dict[int, list[int]] = {}
    for t in range(n):
        for e in iter_bits(masks[t]):
            holders.setdefault(e, []).append(t)

    def key(i: int, j: int) -> tuple:
        cost = flop_factor * net.size(masks[i] | masks[j])
        i, j = min(i, j), max(i, j)
        if rng is None or temperature <= 0:
            return (cost, i, j)
        noisy = log2_int(cost) - temperature * rng.gumbel()
        return (noisy, cost, i, j)

    heap = []
    for e, hs in holders.items():
        if len(hs) == 2:
            heap.append(key(*hs))
    heapq.heapify(heap)

    pairs = []
    next_id = n
    warned = False
    while len(masks) > 1:
        while heap and not (heap[0][-2] in masks and heap[0][-1] in masks):
            heapq.heappop(heap)
        if heap:
            i, j = heapq.heappop(heap)[-2:]
        else:
            if not warned:
                warnings.warn(
                    "network is disconnected; merging components by outer products",
                    DisconnectedWarning,
                    stacklevel=3,
                )
                warned = True
            alive = sorted(masks)
            i, j = min(
                ((a, b) for ai, a in enumerate(alive) for b in alive[ai + 1 :]),
                key=lambda ab: (net.size(masks[ab[0]] | masks[ab[1]]), ab),
            )
        k = next_id
        next_id += 1
        mk = masks.pop(i) ^ masks.pop(j)
        masks[k] = mk
        # the accumulated intermediate goes on the left
        pairs.append((j, i) if j >= n > i else (i, j))
        touched = set()
        for e in iter_bits(mk):
            hs = [h for h in holders[e] if h != i and h != j]
            hs.append(k)
            holders[e] = hs
            for h in hs:
                if h != k and h not in touched:
                    touched.add(h)
                    heapq.heappush(heap, key(h, k))
    return pairs


def greedy_seed(net: TensorNetwork) -> ContractionTree:
    """Deterministic greedy tree.

    Repeatedly merges the pair of current nodes with the cheapest pairwise
    contraction (FLOPs), breaking ties by the lexicographically smallest id
    pair.  Only pairs sharing an edge are considered until none remain.
    """
    if net.n_tensors == 1:
        return tree_from_nested(0)
    return tree_from_pair_sequence(_greedy_pairs(net, None, 0.0), net.n_tensors)


def randomized_greedy_seed(
    net: TensorNetwork,
    rng=None,
    temperature: float = 1.0,
    trials: int = 1,
) -> ContractionTree:
    """Best-of-``trials`` greedy with Gumbel noise on the log2 pair cost.

    ``temperature`` is in bits; zero recovers :func:`greedy_seed`.
    """
    if net.n_tensors == 1:
        return tree_from_nested(0)
    rng = _as_rng(rng)
    best, best_key = None, None
    for _ in range(max(1, trials)):
        tree = tree_from_pair_sequence(_greedy_pairs(net, rng, temperature), net.n_tensors)
        cost = score(tree, net)
        k = (cost.f_T, cost.f_S)
        if best_key is None or k < best_key:
            best, best_key = tree, k
    return best


def random_seed(net: TensorNetwork | int, rng=None) -> ContractionTree:
    """Tree drawn uniformly from all ``(2n-3)!!`` rooted leaf-labeled topologies.

    Leaves are inserted one at a time onto a uniformly chosen edge of the
    current tree (or above its root); each child order is then flipped by a
    fair coin.
    """
    n = net if isinstance(net, int) else net.n_tensors
    rng = _as_rng(rng)
    if n == 1:
        return tree_from_nested(0)
    # parent-pointer representation while inserting
    left: dict[int, int] = {}
    right: dict[int, int] = {}
    parent: dict[int, int | None] = {0: None}
    root = 0
    next_internal = n
    for leaf in range(1, n):
        nodes = list(parent)
        target = nodes[int(rng.integers(len(nodes)))]
        w = next_internal
        next_internal += 1
        p = parent[target]
        left[w], right[w] = (target, leaf) if rng.random() < 0.5 else (leaf, target)
        parent[w] = p
        parent[target] = w
        parent[leaf] = w
        if p is None:
            root = w
        elif left[p] == target:
            left[p] = w
        else:
            right[p] = w

    def build(v):
        stack, out = [(v, False)], []
        while stack:
            x, done = stack.pop()
            if x < n:
                out.append(x)
            elif done:
                b = out.pop()
                a = out.pop()
                out.append((a, b))
            else:
                stack.extend([(x, True), (right[x], False), (left[x], False)])
        return out[0]

    return tree_from_nested(build(root), n)


def import_tree(document: Any, n: int | None = None) -> ContractionTree:
    """Load a tree from nested lists, a ``{"pairs": ...}`` object, JSON text or a path."""
    if isinstance(document, Path) or (
        isinstance(document, str) and not document.lstrip().startswith(("[", "{"))
    ):
        try:
            document = Path(document).read_text()
        except OSError as exc:
            raise ParseError(f"cannot read tree file: {exc}") from exc
    if isinstance(document, (str, bytes)):
        try:
            document = json.loads(document)
        except json.JSONDecodeError as exc:
            raise ParseError(f"invalid JSON: {exc}") from exc
    return tree_from_document(document, n)


def export_tree(tree: ContractionTree, cost=None) -> dict[str, Any]:
    return tree_to_document(tree, cost)


def seed_f_T(tree: ContractionTree, net: TensorNetwork) -> float:
    return score(tree, net).f_T if tree.n > 1 else -math.inf
