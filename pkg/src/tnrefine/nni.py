"""Nearest-neighbor interchange moves on contraction trees.

For an internal tree edge ``(p, c)`` with ``c``'s children ``a``/``b`` and
``c``'s sibling ``s``, a move exchanges one grandchild (``a`` or ``b``) with
``s``.  Each swap axis is enumerated with both child orderings of the
rebuilt node, giving ``4 (n - 2)`` moves per tree.

Only the open set of ``c`` changes under a move; ``p`` and every ancestor
keep theirs.  Neighbor scores therefore follow from the current tree's
totals by replacing the FLOP and inner-length terms at ``c`` and ``p``.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Sequence

from .costmodel import (
    DEFAULT_PRECISION,
    CostVector,
    Precision,
    TreeCosts,
    _slice_edges,
    error_bound_bits,
    log2_int,
)
from .exceptions import InvalidMove, TooSmall
from .netcore import LEAF, ContractionTree, TensorNetwork, open_masks

__all__ = [
    "Neighbor",
    "NniMove",
    "Workspace",
    "apply",
    "neighborhood",
    "neighbors_with_trees",
    "revert",
]


@dataclass(frozen=True)
class NniMove:
    """Swap grandchild ``child.children[grandchild]`` with ``child``'s sibling.

    ``order == 0`` puts the sibling into the vacated slot of ``child``;
    ``order == 1`` puts it into the other slot.
    """

    parent: int
    child: int
    grandchild: int
    order: int


def _moves(left: Sequence[int], right: Sequence[int], order: Sequence[int], root: int, n: int, parent) -> list[NniMove]:
    out = []
    for c in order:
        if c < n or c == root:
            continue
        p = parent[c]
        out.extend(
            (
                NniMove(p, c, 0, 0),
                NniMove(p, c, 0, 1),
                NniMove(p, c, 1, 0),
                NniMove(p, c, 1, 1),
            )
        )
    return out


def neighborhood(tree: ContractionTree) -> list[NniMove]:
    """All ``4 (n - 2)`` moves; internal edges in post-order of the child."""
    if tree.n < 3:
        raise TooSmall(f"NNI needs at least 3 leaves, tree has {tree.n}")
    return _moves(tree.left, tree.right, tree.postorder(), tree.root, tree.n, tree.parent)


def _check(left, right, n, move: NniMove) -> int:
    """Return the slot (0/1) of ``move.child`` under ``move.parent``."""
    size = len(left)
    p, c = move.parent, move.child
    if move.grandchild not in (0, 1) or move.order not in (0, 1):
        raise InvalidMove(f"bad variant bits in {move}")
    if not (n <= c < size and n <= p < size):
        raise InvalidMove(f"{move} does not join two internal nodes")
    if left[p] == c:
        return 0
    if right[p] == c:
        return 1
    raise InvalidMove(f"node {c} is not a child of node {p}")


def apply_inplace(left: list[int], right: list[int], n: int, move: NniMove) -> None:
    side = _check(left, right, n, move)
    p, c, g = move.parent, move.child, move.grandchild
    kids = [left[c], right[c]]
    s = right[p] if side == 0 else left[p]
    a, b = kids[g], kids[1 - g]
    if side == 0:
        right[p] = a
    else:
        left[p] = a
    if move.order == 0:
        kids[g], kids[1 - g] = s, b
    else:
        kids[g], kids[1 - g] = b, s
    left[c], right[c] = kids


def revert_inplace(left: list[int], right: list[int], n: int, move: NniMove) -> None:
    side = _check(left, right, n, move)
    p, c, g = move.parent, move.child, move.grandchild
    kids = [left[c], right[c]]
    a = right[p] if side == 0 else left[p]
    if move.order == 0:
        s, b = kids[g], kids[1 - g]
    else:
        b, s = kids[g], kids[1 - g]
    if side == 0:
        right[p] = s
    else:
        left[p] = s
    kids[g], kids[1 - g] = a, b
    left[c], right[c] = kids


def apply(tree: ContractionTree, move: NniMove) -> ContractionTree:
    left, right = list(tree.left), list(tree.right)
    apply_inplace(left, right, tree.n, move)
    return ContractionTree(left, right, tree.root, validate=False)


def revert(tree: ContractionTree, move: NniMove) -> ContractionTree:
    left, right = list(tree.left), list(tree.right)
    revert_inplace(left, right, tree.n, move)
    return ContractionTree(left, right, tree.root, validate=False)


class Workspace:
    """Mutable tree plus cached per-node costs, private to one walker."""

    def __init__(
        self,
        tree: ContractionTree,
        net: TensorNetwork,
        s_cap: float | None = None,
        precision: Precision = DEFAULT_PRECISION,
        flop_factor: int = 2,
    ):
        open_masks(tree, net)
        self.net = net
        self.n = tree.n
        self.root = tree.root
        self.left = list(tree.left)
        self.right = list(tree.right)
        self.s_cap = s_cap
        self.precision = precision
        self.flop_factor = flop_factor
        self._refresh()

    def _refresh(self) -> None:
        self.costs = TreeCosts(self.left, self.right, self.root, self.net, self.flop_factor)
        self.moves = _moves(self.left, self.right, self.costs.order, self.root, self.n, self.costs.parent)
        self.cost = self._vector(self.costs.flops, self.costs.inner_total, self.costs.f_S)

    def _vector(self, flops: int, inner_total: int, f_S: float) -> CostVector:
        s_cap = self.s_cap
        f_sigma = 0.0
        if s_cap is not None and f_S > s_cap:
            edges, _ = _slice_edges(self.left, self.right, self.root, self.net, s_cap)
            f_sigma = math.fsum(self.net.log2_bonds[e] for e in edges)
        return CostVector(
            log2_int(flops), f_S, f_sigma, error_bound_bits(inner_total, self.n - 1, self.precision)
        )

    def tree(self) -> ContractionTree:
        return ContractionTree(self.left, self.right, self.root, validate=False)

    def scan(self) -> list[CostVector]:
        """Scores of every move in ``self.moves``, in the same order.

        The current tree is left untouched: moves needing a full slicing
        pass are applied to the shared arrays and reverted immediately.
        """
        costs = self.costs
        net = self.net
        size = net.size
        log_size = net.log_size
        factor = self.flop_factor
        masks, terms, inner = costs.masks, costs.terms, costs.inner
        left, right = self.left, self.right
        flops, inner_total = costs.flops, costs.inner_total
        out: list[CostVector] = []
        moves = self.moves
        for i in range(0, len(moves), 4):
            p, c = moves[i].parent, moves[i].child
            s = right[p] if left[p] == c else left[p]
            ms = masks[s]
            base_flops = flops - terms[c] - terms[p]
            base_inner = inner_total - inner[c] - inner[p]
            others = costs.peak_excluding(c)
            for g in (0, 1):
                a, b = (left[c], right[c]) if g == 0 else (right[c], left[c])
                ma, mb = masks[a], masks[b]
                oc = ms ^ mb
                new_flops = base_flops + factor * (size(ms | mb) + size(oc | ma))
                new_inner = base_inner + size(ms & mb) + size(oc & ma)
                ls = log_size(oc)
                f_S = ls if ls > others else others
                if self.s_cap is not None and f_S > self.s_cap:
                    vecs = []
                    for move in moves[i + 2 * g : i + 2 * g + 2]:
                        apply_inplace(left, right, self.n, move)
                        try:
                            vecs.append(self._vector(new_flops, new_inner, f_S))
                        finally:
                            revert_inplace(left, right, self.n, move)
                    out.extend(vecs)
                else:
                    vec = CostVector(
                        log2_int(new_flops),
                        f_S,
                        0.0,
                        error_bound_bits(new_inner, self.n - 1, self.precision),
                    )
                    out.append(vec)
                    out.append(vec)
        return out

    def accept(self, move: NniMove) -> None:
        apply_inplace(self.left, self.right, self.n, move)
        self._refresh()


class Neighbor:
    """One scored neighbor; the tree itself is built on first access."""

    __slots__ = ("index", "move", "cost", "_base", "_tree")

    def __init__(self, index: int, move: NniMove, cost: CostVector, base: ContractionTree):
        self.index = index
        self.move = move
        self.cost = cost
        self._base = base
        self._tree = None

    @property
    def tree(self) -> ContractionTree:
        if self._tree is None:
            self._tree = apply(self._base, self.move)
        return self._tree

    def __iter__(self):
        yield self.tree
        yield self.cost

    def __repr__(self) -> str:
        return f"Neighbor(index={self.index}, move={self.move}, cost={self.cost})"


def neighbors_with_trees(
    tree: ContractionTree,
    net: TensorNetwork,
    s_cap: float | None = None,
    precision: Precision = DEFAULT_PRECISION,
    flop_factor: int = 2,
) -> list[Neighbor]:
    """Every NNI neighbor of ``tree`` with its four-axis score.

    Entries follow :func:`neighborhood` order.  Each ``Neighbor`` unpacks as
    ``(tree, cost)``.  Returns an empty list for trees with fewer than three
    leaves.
    """
    ws = Workspace(tree, net, s_cap, precision, flop_factor)
    costs = ws.scan()
    return [Neighbor(i, m, c, tree) for i, (m, c) in enumerate(zip(ws.moves, costs))]
