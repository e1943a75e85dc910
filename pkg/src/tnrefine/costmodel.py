"""Four-axis cost vector of a contraction tree.

All axes are in log2 units:

* ``f_T``     total FLOPs, each pairwise contraction counting
  ``2 * |output| * inner_length`` (one multiply and one add per term);
* ``f_S``     largest intermediate (leaves included), in log2 entries;
* ``f_sigma`` log2 of the outer-loop multiplicity introduced by slicing;
* ``f_eps``   log2 of a worst-case relative forward-error bound.

FLOP totals are accumulated as exact Python integers and converted to log2
once at the end, so scores of trees that differ by a local move can be
updated in O(1) without cancellation error.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import NamedTuple, Sequence

from .exceptions import UnreachableCap
from .netcore import LEAF, ContractionTree, TensorNetwork, iter_bits, open_masks, postorder

__all__ = [
    "CostVector",
    "Precision",
    "SlicePlan",
    "TreeCosts",
    "cumulative_improvement",
    "log2_int",
    "pareto_dominates",
    "score",
    "slice_plan",
]

FLOAT_FORMAT = "{:.6f}"


class CostVector(NamedTuple):
    f_T: float
    f_S: float
    f_sigma: float
    f_eps: float

    def csv_fields(self) -> list[str]:
        return [FLOAT_FORMAT.format(x) for x in self]


CSV_COLUMNS = ("f_T", "f_S", "f_sigma", "f_eps")


@dataclass(frozen=True)
class Precision:
    """Unit roundoffs of the accumulator and of the stored inputs."""

    u_acc: float = 2.0**-24
    u_in: float = 2.0**-11


DEFAULT_PRECISION = Precision()


@dataclass(frozen=True)
class SlicePlan:
    edges: tuple[int, ...]
    f_sigma: float
    f_S: float

    def __len__(self) -> int:
        return len(self.edges)


def log2_int(x: int) -> float:
    """log2 of a positive integer of any size, to double precision."""
    if x <= 0:
        return -math.inf
    extra = x.bit_length() - 53
    if extra > 0:
        return extra + math.log2(x >> extra)
    return math.log2(x)


def _logaddexp2(a: float, b: float) -> float:
    if a < b:
        a, b = b, a
    if b == -math.inf:
        return a
    return a + math.log2(1.0 + 2.0 ** (b - a))


def error_bound_bits(k_total: int, n_internal: int, precision: Precision = DEFAULT_PRECISION) -> float:
    """``log2(sum_v K_v * u_acc + u_in)`` given ``sum_v K_v`` and the node count."""
    if n_internal == 0:
        return -math.inf
    return _logaddexp2(
        math.log2(precision.u_acc) + log2_int(k_total),
        math.log2(n_internal * precision.u_in),
    )


class TreeCosts:
    """Per-node open sets, FLOP terms and inner lengths of one tree.

    Works on raw ``left``/``right`` sequences so that the refinement loop
    can evaluate its private mutable copies without building trees.
    """

    __slots__ = (
        "net",
        "n",
        "order",
        "parent",
        "masks",
        "terms",
        "inner",
        "logsize",
        "flops",
        "inner_total",
        "f_S",
        "peak_node",
        "second_peak",
        "flop_factor",
    )

    def __init__(
        self,
        left: Sequence[int],
        right: Sequence[int],
        root: int,
        net: TensorNetwork,
        flop_factor: int = 2,
        sliced: int = 0,
    ):
        n = (len(left) + 1) // 2
        self.net = net
        self.n = n
        self.flop_factor = flop_factor
        order = postorder(left, right, root, n)
        self.order = order
        size = len(left)
        parent = [LEAF] * size
        masks = [0] * size
        terms = [0] * size
        inner = [0] * size
        logsize = [0.0] * size
        keep = ~sliced
        leaf = net.leaf_masks
        net_size = net.size
        net_log = net.log_size
        for v in order:
            if v < n:
                m = leaf[v] & keep
            else:
                a, b = left[v], right[v]
                parent[a] = v
                parent[b] = v
                ma, mb = masks[a], masks[b]
                m = ma ^ mb
                terms[v] = flop_factor * net_size(ma | mb)
                inner[v] = net_size(ma & mb)
            masks[v] = m
            logsize[v] = net_log(m)
        self.parent = parent
        self.masks = masks
        self.terms = terms
        self.inner = inner
        self.logsize = logsize
        self.flops = sum(terms)
        self.inner_total = sum(inner)
        self._find_peaks()

    def _find_peaks(self) -> None:
        best, best_v, second = -math.inf, LEAF, -math.inf
        for v in self.order:
            x = self.logsize[v]
            if x > best:
                second = best
                best, best_v = x, v
            elif x > second:
                second = x
        self.f_S = best
        self.peak_node = best_v
        self.second_peak = second

    def peak_excluding(self, v: int) -> float:
        return self.second_peak if v == self.peak_node else self.f_S

    @property
    def f_T(self) -> float:
        return log2_int(self.flops)

    def f_eps(self, precision: Precision = DEFAULT_PRECISION) -> float:
        return error_bound_bits(self.inner_total, self.n - 1, precision)


def _slice_edges(
    left: Sequence[int],
    right: Sequence[int],
    root: int,
    net: TensorNetwork,
    s_cap: float,
) -> tuple[list[int], float]:
    n = (len(left) + 1) // 2
    order = postorder(left, right, root, n)
    sliceable = net.all_edges_mask & ~net.dangling_mask
    sliced = 0
    chosen: list[int] = []
    leaf = net.leaf_masks
    # leaf sets rank tied peaks independently of child order
    leafset = {}
    for v in order:
        leafset[v] = 1 << v if v < n else leafset[left[v]] | leafset[right[v]]
    while True:
        masks = {}
        peak, peak_v = -math.inf, LEAF
        for v in order:
            m = leaf[v] & ~sliced if v < n else masks[left[v]] ^ masks[right[v]]
            masks[v] = m
            x = net.log_size(m)
            if x > peak or (x == peak and leafset[v] < leafset[peak_v]):
                peak, peak_v = x, v
        if peak <= s_cap:
            return chosen, peak
        candidates = masks[peak_v] & sliceable
        best_e, best_gain = LEAF, 0.0
        for e in iter_bits(candidates):
            gain = net.log2_bonds[e]
            if gain > best_gain:
                best_e, best_gain = e, gain
        if best_e == LEAF:
            raise UnreachableCap(
                f"peak node {peak_v} holds {peak:.3f} bits of unsliceable (open) legs, cap is {s_cap}"
            )
        chosen.append(best_e)
        sliced |= 1 << best_e


def slice_plan(tree: ContractionTree, net: TensorNetwork, s_cap: float) -> SlicePlan:
    """Greedy peak reducer.

    Repeatedly take the peak node (on ties, the one whose leaf-set bitmask
    is the smallest integer), slice the
    edge of its open set with the largest bond (lowest id on ties), and
    stop once every open set fits under ``s_cap``.  Dangling legs are
    output indices and are never sliced.
    """
    if s_cap < 0:
        raise ValueError("s_cap must be non-negative")
    open_masks(tree, net)  # leaf/tensor consistency check
    edges, achieved = _slice_edges(tree.left, tree.right, tree.root, net, s_cap)
    f_sigma = math.fsum(net.log2_bonds[e] for e in edges)
    return SlicePlan(tuple(edges), f_sigma, achieved)


def slicing_bits(left, right, root, net, s_cap, f_S) -> float:
    if s_cap is None or f_S <= s_cap:
        return 0.0
    edges, _ = _slice_edges(left, right, root, net, s_cap)
    return math.fsum(net.log2_bonds[e] for e in edges)


def score(
    tree: ContractionTree,
    net: TensorNetwork,
    s_cap: float | None = None,
    precision: Precision = DEFAULT_PRECISION,
    flop_factor: int = 2,
) -> CostVector:
    """Cost vector ``(f_T, f_S, f_sigma, f_eps)`` of ``tree`` on ``net``.

    ``f_T`` and ``f_S`` describe the unsliced tree; ``f_sigma`` is zero
    unless ``s_cap`` is given and the peak exceeds it.
    """
    open_masks(tree, net)  # validates the pairing
    costs = TreeCosts(tree.left, tree.right, tree.root, net, flop_factor)
    return cost_vector(costs, tree.left, tree.right, tree.root, s_cap, precision)


def cost_vector(costs: TreeCosts, left, right, root, s_cap, precision) -> CostVector:
    f_sigma = slicing_bits(left, right, root, costs.net, s_cap, costs.f_S)
    return CostVector(costs.f_T, costs.f_S, f_sigma, costs.f_eps(precision))


def pareto_dominates(a: Sequence[float], b: Sequence[float]) -> bool:
    """True iff ``a <= b`` on every axis and ``a < b`` on at least one."""
    strict = False
    for x, y in zip(a, b):
        if x > y:
            return False
        if x < y:
            strict = True
    return strict


def cumulative_improvement(current: Sequence[float], candidate: Sequence[float]) -> float:
    """``sum_i max(current_i - candidate_i, 0)`` in raw bits."""
    return sum(max(c - d, 0.0) for c, d in zip(current, candidate))
