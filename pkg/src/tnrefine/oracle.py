"""Exact references for small networks."""

from __future__ import annotations

from collections.abc import Iterator

from .costmodel import log2_int
from .exceptions import TooLarge
from .netcore import ContractionTree, TensorNetwork, tree_from_nested

__all__ = ["MAX_DP_TENSORS", "MAX_ENUM_LEAVES", "dp_optimal_fT", "enumerate_trees", "double_factorial"]

MAX_DP_TENSORS = 20
MAX_ENUM_LEAVES = 8


def double_factorial(k: int) -> int:
    out = 1
    while k > 1:
        out *= k
        k -= 2
    return out


def dp_optimal_fT(net: TensorNetwork, flop_factor: int = 2) -> tuple[float, ContractionTree]:
    """Minimum ``f_T`` over all contraction trees, by DP over tensor subsets.

    Every bipartition of every subset is tried, outer products included, so
    the result is exact for disconnected networks too.  Runs in
    ``O(3^n)``; refuses networks above :data:`MAX_DP_TENSORS` tensors.
    """
    n = net.n_tensors
    if n > MAX_DP_TENSORS:
        raise TooLarge(f"subset DP limited to {MAX_DP_TENSORS} tensors, got {n}")
    if n == 1:
        return log2_int(0), tree_from_nested(0)
    full = (1 << n) - 1
    open_ = [0] * (full + 1)
    for s in range(1, full + 1):
        low = s & -s
        open_[s] = open_[s ^ low] ^ net.leaf_masks[low.bit_length() - 1]
    best = [0] * (full + 1)
    split = [0] * (full + 1)
    size = net.size
    for s in range(1, full + 1):
        low = s & -s
        if s == low:
            continue
        rest = s ^ low
        # submasks a of s containing the lowest bit, a != s
        best_cost, best_a = None, 0
        sub = rest
        while True:
            a = sub | low
            if a != s:
                b = s ^ a
                cost = best[a] + best[b] + flop_factor * size(open_[a] | open_[b])
                if best_cost is None or cost < best_cost:
                    best_cost, best_a = cost, a
            if sub == 0:
                break
            sub = (sub - 1) & rest
        best[s] = best_cost
        split[s] = best_a

    def nested(s: int):
        stack, out = [(s, False)], []
        while stack:
            x, done = stack.pop()
            if x & (x - 1) == 0:
                out.append(x.bit_length() - 1)
            elif done:
                b = out.pop()
                a = out.pop()
                out.append((a, b))
            else:
                stack.extend([(x, True), (x ^ split[x], False), (split[x], False)])
        return out[0]

    return log2_int(best[full]), tree_from_nested(nested(full), n)


def _insertions(tree, leaf):
    """All trees obtained by grafting ``leaf`` above one subtree of ``tree``."""
    yield (tree, leaf)
    if isinstance(tree, tuple):
        a, b = tree
        for sub in _insertions(a, leaf):
            yield (sub, b)
        for sub in _insertions(b, leaf):
            yield (a, sub)


def enumerate_trees(n: int) -> Iterator[ContractionTree]:
    """Every rooted, leaf-labeled binary topology on ``n`` leaves, once.

    Yields ``(2n - 3)!!`` trees for ``n >= 2``.
    """
    if n > MAX_ENUM_LEAVES:
        raise TooLarge(f"enumeration limited to {MAX_ENUM_LEAVES} leaves, got {n}")
    if n < 1:
        return
    shapes = [0]
    for leaf in range(1, n):
        shapes = [t for shape in shapes for t in _insertions(shape, leaf)]
    for shape in shapes:
        yield tree_from_nested(shape, n)
