"""Symbolic tensor networks, contraction trees and packed open sets.

Edges are identified by dense integer ids and a set of edges is stored as a
Python ``int`` bitmask (bit ``e`` set iff edge ``e`` is a member).  The
:class:`OpenSet` wrapper adds a fixed capacity and a word-packed view on top
of the raw mask; the hot paths in :mod:`tnrefine.costmodel` and
:mod:`tnrefine.nni` work on the raw integers directly.
"""

from __future__ import annotations

import math
from collections.abc import Iterable, Iterator, Sequence
from typing import Any

from .exceptions import (
    CapacityExceeded,
    DisconnectedForest,
    DuplicateEdge,
    InvalidEndpoint,
    LeafMismatch,
    NodeReuse,
    NonPositiveBond,
    ParseError,
)

__all__ = [
    "DEFAULT_CAPACITY",
    "LEAF",
    "ContractionTree",
    "OpenSet",
    "TensorNetwork",
    "build_network",
    "open_sets",
    "tree_from_pair_sequence",
    "tree_from_nested",
    "tree_from_document",
    "tree_to_document",
    "network_from_document",
    "network_to_document",
]

DEFAULT_CAPACITY = 2048
WORD_BITS = 64
LEAF = -1


def mask_of(members: Iterable[int]) -> int:
    bits = 0
    for e in members:
        bits |= 1 << e
    return bits


def iter_bits(bits: int) -> Iterator[int]:
    while bits:
        low = bits & -bits
        yield low.bit_length() - 1
        bits ^= low


class OpenSet:
    """Fixed-capacity set of edge ids backed by a packed bitmap.

    Set algebra (``^``, ``|``, ``&``, ``-``) is evaluated on the whole
    bitmap at once, so it is exact and independent of the member count.
    """

    __slots__ = ("bits", "capacity")

    def __init__(self, members: Iterable[int] = (), capacity: int = DEFAULT_CAPACITY):
        bits = mask_of(members)
        self._init(bits, capacity)

    def _init(self, bits: int, capacity: int) -> None:
        if capacity <= 0 or capacity % WORD_BITS:
            raise ValueError(f"capacity must be a positive multiple of {WORD_BITS}")
        if bits < 0 or bits.bit_length() > capacity:
            raise CapacityExceeded(
                f"edge id {bits.bit_length() - 1} does not fit a {capacity}-bit open set"
            )
        self.bits = bits
        self.capacity = capacity

    @classmethod
    def from_bits(cls, bits: int, capacity: int = DEFAULT_CAPACITY) -> OpenSet:
        obj = cls.__new__(cls)
        obj._init(bits, capacity)
        return obj

    def _wrap(self, bits: int) -> OpenSet:
        return OpenSet.from_bits(bits, self.capacity)

    def __xor__(self, other: OpenSet) -> OpenSet:
        return self._wrap(self.bits ^ other.bits)

    def __or__(self, other: OpenSet) -> OpenSet:
        return self._wrap(self.bits | other.bits)

    def __and__(self, other: OpenSet) -> OpenSet:
        return self._wrap(self.bits & other.bits)

    def __sub__(self, other: OpenSet) -> OpenSet:
        return self._wrap(self.bits & ~other.bits)

    def __contains__(self, e: object) -> bool:
        return isinstance(e, int) and e >= 0 and bool(self.bits >> e & 1)

    def __iter__(self) -> Iterator[int]:
        return iter_bits(self.bits)

    def __len__(self) -> int:
        return self.bits.bit_count()

    def __eq__(self, other: object) -> bool:
        if isinstance(other, OpenSet):
            return self.bits == other.bits
        if isinstance(other, (set, frozenset)):
            return set(self) == other
        return NotImplemented

    def __hash__(self) -> int:
        return hash(self.bits)

    def __repr__(self) -> str:
        return f"OpenSet({sorted(self)})"

    def words(self) -> tuple[int, ...]:
        """Little-endian 64-bit words, ``capacity // 64`` of them."""
        mask = (1 << WORD_BITS) - 1
        return tuple(
            (self.bits >> (WORD_BITS * i)) & mask for i in range(self.capacity // WORD_BITS)
        )

    @classmethod
    def from_words(cls, words: Sequence[int]) -> OpenSet:
        bits = 0
        for i, w in enumerate(words):
            bits |= (w & ((1 << WORD_BITS) - 1)) << (WORD_BITS * i)
        return cls.from_bits(bits, WORD_BITS * len(words))

    def log_size(self, net: TensorNetwork) -> float:
        return net.log_size(self.bits)


class TensorNetwork:
    """A symbolic tensor network with per-edge bond dimensions.

    ``edges[e]`` holds the endpoint tensor ids of edge ``e``: two ids for a
    bond between tensors, one id for a dangling (open) leg.  Instances are
    immutable once built; use :func:`build_network` to construct one.
    """

    __slots__ = (
        "n_tensors",
        "edges",
        "bonds",
        "labels",
        "capacity",
        "leaf_masks",
        "dangling_mask",
        "log2_bonds",
        "_groups",
        "_shift",
        "_uniform",
    )

    def __init__(
        self,
        n_tensors: int,
        edges: Sequence[Sequence[int]],
        bonds: Sequence[int],
        labels: Sequence[str] | None = None,
        capacity: int = DEFAULT_CAPACITY,
    ):
        if n_tensors < 1:
            raise ValueError("a network needs at least one tensor")
        if len(edges) != len(bonds):
            raise ValueError("edges and bonds must have equal length")
        if len(edges) > capacity:
            raise CapacityExceeded(
                f"{len(edges)} edges exceed the open-set capacity of {capacity} bits"
            )
        if labels is not None and len(labels) != n_tensors:
            raise ValueError("labels must have one entry per tensor")

        leaf = [0] * n_tensors
        dangling = 0
        clean_edges = []
        for e, (ends, b) in enumerate(zip(edges, bonds)):
            ends = tuple(int(t) for t in ends)
            if len(ends) not in (1, 2):
                raise InvalidEndpoint(f"edge {e} has {len(ends)} endpoints; hyperedges are unsupported")
            for t in ends:
                if not 0 <= t < n_tensors:
                    raise InvalidEndpoint(f"edge {e} endpoint {t} outside 0..{n_tensors - 1}")
            if len(ends) == 2 and ends[0] == ends[1]:
                raise InvalidEndpoint(f"edge {e} is a self-loop on tensor {ends[0]}")
            if int(b) != b or b < 1:
                raise NonPositiveBond(f"edge {e} has bond {b}; bonds must be integers >= 1")
            for t in ends:
                leaf[t] |= 1 << e
            if len(ends) == 1:
                dangling |= 1 << e
            clean_edges.append(ends)

        self.n_tensors = n_tensors
        self.edges = tuple(clean_edges)
        self.bonds = tuple(int(b) for b in bonds)
        self.labels = tuple(labels) if labels is not None else None
        self.capacity = capacity
        self.leaf_masks = tuple(leaf)
        self.dangling_mask = dangling
        self.log2_bonds = tuple(math.log2(b) for b in self.bonds)

        groups: dict[int, int] = {}
        for e, b in enumerate(self.bonds):
            groups[b] = groups.get(b, 0) | (1 << e)
        self._groups = tuple((b, m, math.log2(b)) for b, m in sorted(groups.items()) if b > 1)
        self._uniform = self._groups[0][0] if len(self._groups) == 1 else None
        self._shift = None
        if self._uniform is not None and self._uniform & (self._uniform - 1) == 0:
            self._shift = self._uniform.bit_length() - 1
        if not self._groups:
            self._shift = 0

    @property
    def n_edges(self) -> int:
        return len(self.edges)

    @property
    def is_closed(self) -> bool:
        return self.dangling_mask == 0

    @property
    def all_edges_mask(self) -> int:
        return (1 << len(self.edges)) - 1

    def size(self, mask: int) -> int:
        """Exact product of bond dimensions over the edges in ``mask``."""
        if self._shift is not None:
            return 1 << (self._shift * (mask & self._groups[0][1]).bit_count()) if self._groups else 1
        out = 1
        for b, gmask, _ in self._groups:
            k = (mask & gmask).bit_count()
            if k:
                out *= b**k
        return out

    def log_size(self, mask: int) -> float:
        """``sum(log2(b_e))`` over the edges in ``mask``."""
        if len(self._groups) == 1:
            b, gmask, lb = self._groups[0]
            return (mask & gmask).bit_count() * lb
        total = 0.0
        for _, gmask, lb in self._groups:
            k = (mask & gmask).bit_count()
            if k:
                total += k * lb
        return total

    def incident_edges(self, tensor: int) -> list[int]:
        return list(iter_bits(self.leaf_masks[tensor]))

    def graph_edges(self) -> list[tuple[int, int]]:
        return [ends for ends in self.edges if len(ends) == 2]

    def degree(self, tensor: int) -> int:
        return sum(1 for ends in self.edges if len(ends) == 2 and tensor in ends)

    def with_bonds(self, bonds: int | Sequence[int]) -> TensorNetwork:
        """Same topology with bonds replaced (an int sets every bond)."""
        if isinstance(bonds, int):
            bonds = [bonds] * len(self.edges)
        return TensorNetwork(self.n_tensors, self.edges, bonds, self.labels, self.capacity)

    def __eq__(self, other: object) -> bool:
        if not isinstance(other, TensorNetwork):
            return NotImplemented
        return (self.n_tensors, self.edges, self.bonds) == (
            other.n_tensors,
            other.edges,
            other.bonds,
        )

    def __hash__(self) -> int:
        return hash((self.n_tensors, self.edges, self.bonds))

    def __repr__(self) -> str:
        return f"TensorNetwork(n_tensors={self.n_tensors}, n_edges={self.n_edges})"


def build_network(
    edges: Sequence[Sequence[int]],
    n: int,
    bonds: int | Sequence[int] = 2,
    dangling: Sequence[tuple[int, int]] = (),
    labels: Sequence[str] | None = None,
    capacity: int = DEFAULT_CAPACITY,
) -> TensorNetwork:
    """Validate and build a network.

    Graph edges get ids ``0..len(edges)-1`` in the order given; dangling legs
    ``(tensor, bond)`` follow.  Repeating a tensor pair raises
    :class:`DuplicateEdge`.
    """
    edges = [tuple(e) for e in edges]
    if isinstance(bonds, int):
        bonds = [bonds] * len(edges)
    bonds = list(bonds)
    if len(bonds) != len(edges):
        raise ValueError("one bond per edge required")
    for i, b in enumerate(bonds):
        if b < 1:
            raise NonPositiveBond(f"edge {i} has bond {b}")
    seen = set()
    for e in edges:
        for t in e:
            if not 0 <= t < n:
                raise InvalidEndpoint(f"endpoint {t} outside 0..{n - 1}")
        key = frozenset(e)
        if len(e) == 2 and key in seen:
            raise DuplicateEdge(f"edge {tuple(e)} given twice")
        seen.add(key)
    all_edges = edges + [(t,) for t, _ in dangling]
    all_bonds = bonds + [b for _, b in dangling]
    return TensorNetwork(n, all_edges, all_bonds, labels, capacity)


class ContractionTree:
    """Rooted binary contraction tree stored as ``left``/``right`` arrays.

    Nodes ``0..n-1`` are leaves (leaf ``i`` holds tensor ``i``) and carry the
    :data:`LEAF` sentinel in both arrays; nodes ``n..2n-2`` are internal.
    Parent pointers and the post-order are derived on demand.
    """

    __slots__ = ("left", "right", "root", "n", "_parent", "_postorder")

    def __init__(
        self,
        left: Sequence[int],
        right: Sequence[int],
        root: int | None = None,
        *,
        validate: bool = True,
    ):
        self.left = tuple(left)
        self.right = tuple(right)
        self.n = (len(self.left) + 1) // 2
        self._parent = None
        self._postorder = None
        if root is None:
            root = self._find_root()
        self.root = root
        if validate:
            self._validate()

    def _find_root(self) -> int:
        has_parent = [False] * len(self.left)
        for v in range(self.n, len(self.left)):
            for c in (self.left[v], self.right[v]):
                if 0 <= c < len(has_parent):
                    has_parent[c] = True
        roots = [v for v, p in enumerate(has_parent) if not p]
        if len(roots) != 1:
            raise DisconnectedForest(f"expected one root, found {len(roots)}")
        return roots[0]

    def _validate(self) -> None:
        size = len(self.left)
        n = self.n
        if len(self.right) != size or size % 2 == 0:
            raise ValueError("left/right arrays must have equal odd length 2n-1")
        for v in range(n):
            if self.left[v] != LEAF or self.right[v] != LEAF:
                raise ValueError(f"node {v} must be a leaf")
        parent = [LEAF] * size
        for v in range(n, size):
            a, b = self.left[v], self.right[v]
            if a == b:
                raise NodeReuse(f"node {v} has the same child twice")
            for c in (a, b):
                if not 0 <= c < size:
                    raise ValueError(f"node {v} has invalid child {c}")
                if parent[c] != LEAF:
                    raise NodeReuse(f"node {c} has two parents")
                parent[c] = v
        if parent[self.root] != LEAF:
            raise ValueError("root has a parent")
        if len(self.postorder()) != size:
            raise DisconnectedForest("tree does not reach every node from the root")

    @property
    def leaf_tensor(self) -> tuple[int, ...]:
        return tuple(range(self.n))

    @property
    def n_nodes(self) -> int:
        return len(self.left)

    def is_leaf(self, v: int) -> bool:
        return v < self.n

    def children(self, v: int) -> tuple[int, int]:
        return self.left[v], self.right[v]

    @property
    def parent(self) -> tuple[int, ...]:
        if self._parent is None:
            parent = [LEAF] * len(self.left)
            for v in range(self.n, len(self.left)):
                parent[self.left[v]] = v
                parent[self.right[v]] = v
            self._parent = tuple(parent)
        return self._parent

    def postorder(self) -> tuple[int, ...]:
        """Left subtree, right subtree, node; children always precede parents."""
        if self._postorder is None:
            self._postorder = tuple(postorder(self.left, self.right, self.root, self.n))
        return self._postorder

    def encode(self) -> tuple[int, ...]:
        """Flat encoding: ``left`` followed by ``right`` (length ``2(2n-1)``)."""
        return self.left + self.right

    @classmethod
    def decode(cls, flat: Sequence[int]) -> ContractionTree:
        if len(flat) % 2:
            raise ParseError("flat encoding must have even length")
        half = len(flat) // 2
        return cls(flat[:half], flat[half:])

    def to_pairs(self) -> list[tuple[int, int]]:
        """Merge sequence in which merge ``i`` creates node ``n + i``.

        Internal nodes are emitted in id order whenever every child has a
        smaller id than its parent, so trees built from pairs round-trip
        exactly; otherwise nodes are renumbered in a stable topological order.
        """
        n = self.n
        if self.n_nodes == 1:
            return []
        order = topological_internal_order(self)
        ssa = {v: v for v in range(n)}
        for i, v in enumerate(order):
            ssa[v] = n + i
        return [(ssa[self.left[v]], ssa[self.right[v]]) for v in order]

    def to_nested(self) -> Any:
        """Nested-tuple form with leaves as tensor ids."""
        built: dict[int, Any] = {}
        for v in self.postorder():
            built[v] = v if v < self.n else (built.pop(self.left[v]), built.pop(self.right[v]))
        return built[self.root]

    def topology(self) -> frozenset[frozenset[int]]:
        """Child-order-independent identity: the set of leaf clusters."""
        leaves: dict[int, frozenset[int]] = {}
        for v in self.postorder():
            if v < self.n:
                leaves[v] = frozenset((v,))
            else:
                leaves[v] = leaves[self.left[v]] | leaves[self.right[v]]
        return frozenset(leaves[v] for v in range(self.n, self.n_nodes))

    def relabeled(self) -> ContractionTree:
        """Equivalent tree whose internal ids follow creation order."""
        return tree_from_pair_sequence(self.to_pairs(), self.n)

    def __eq__(self, other: object) -> bool:
        if not isinstance(other, ContractionTree):
            return NotImplemented
        return self.left == other.left and self.right == other.right and self.root == other.root

    def __hash__(self) -> int:
        return hash((self.left, self.right, self.root))

    def __repr__(self) -> str:
        return f"ContractionTree({self.to_nested()!r})"


def postorder(left: Sequence[int], right: Sequence[int], root: int, n: int) -> list[int]:
    out = []
    stack = [(root, False)]
    while stack:
        v, expanded = stack.pop()
        if v < n or expanded:
            out.append(v)
            continue
        stack.append((v, True))
        stack.append((right[v], False))
        stack.append((left[v], False))
    return out


def topological_internal_order(tree: ContractionTree) -> list[int]:
    import heapq

    n = tree.n
    pending = {}
    parent = tree.parent
    ready = []
    for v in range(n, tree.n_nodes):
        k = sum(1 for c in tree.children(v) if c >= n)
        pending[v] = k
        if k == 0:
            ready.append(v)
    heapq.heapify(ready)
    order = []
    while ready:
        v = heapq.heappop(ready)
        order.append(v)
        p = parent[v]
        if p != LEAF:
            pending[p] -= 1
            if pending[p] == 0:
                heapq.heappush(ready, p)
    return order


def tree_from_pair_sequence(pairs: Sequence[Sequence[int]], n: int | None = None) -> ContractionTree:
    """Build a tree from a merge sequence; merge ``i`` creates node ``n + i``."""
    pairs = [tuple(p) for p in pairs]
    if n is None:
        n = len(pairs) + 1
    if len(pairs) != n - 1:
        raise DisconnectedForest(f"{len(pairs)} merges cannot join {n} leaves into one tree")
    size = 2 * n - 1
    left = [LEAF] * size
    right = [LEAF] * size
    available = set(range(n))
    for i, pair in enumerate(pairs):
        if len(pair) != 2:
            raise ParseError(f"merge {i} is not a pair: {pair!r}")
        a, b = (int(x) for x in pair)
        for x in (a, b):
            if x not in available:
                raise NodeReuse(f"merge {i} uses node {x}, which is consumed or not yet created")
        if a == b:
            raise NodeReuse(f"merge {i} uses node {a} twice")
        available.discard(a)
        available.discard(b)
        v = n + i
        left[v], right[v] = a, b
        available.add(v)
    return ContractionTree(left, right, root=size - 1)


def tree_from_nested(nested: Any, n: int | None = None) -> ContractionTree:
    """Build a tree from nested pairs such as ``((0, 1), 2)``."""
    pairs: list[tuple[int, int]] = []
    # iterative post-order over the nested structure
    stack: list[tuple[Any, bool]] = [(nested, False)]
    values: list[Any] = []
    leaf_ids: list[int] = []
    while stack:
        node, expanded = stack.pop()
        if isinstance(node, bool):
            raise ParseError("booleans are not leaf ids")
        if isinstance(node, int):
            leaf_ids.append(node)
            values.append(("leaf", node))
            continue
        if not isinstance(node, (list, tuple)):
            raise ParseError(f"unexpected element {node!r} in nested tree")
        if len(node) != 2:
            raise ParseError(f"internal nodes must have two children, got {len(node)}")
        if expanded:
            b = values.pop()
            a = values.pop()
            pairs.append((a, b))
            values.append(("node", len(pairs) - 1))
        else:
            stack.append((node, True))
            stack.append((node[1], False))
            stack.append((node[0], False))
    count = len(leaf_ids)
    if n is None:
        n = count
    if sorted(leaf_ids) != list(range(n)):
        raise LeafMismatch(f"leaves {sorted(leaf_ids)} are not a permutation of 0..{n - 1}")
    resolved = []
    for a, b in pairs:
        resolved.append(tuple(x[1] if x[0] == "leaf" else n + x[1] for x in (a, b)))
    if n == 1:
        return ContractionTree([LEAF], [LEAF], root=0)
    return tree_from_pair_sequence(resolved, n)


def tree_from_document(doc: Any, n: int | None = None) -> ContractionTree:
    """Parse either interchange form: nested lists or ``{"pairs": [...]}``."""
    if isinstance(doc, dict):
        if "pairs" not in doc:
            raise ParseError("tree document object needs a 'pairs' key")
        pairs = doc["pairs"]
        if not isinstance(pairs, list):
            raise ParseError("'pairs' must be a list")
        n_doc = doc.get("n", n)
        try:
            return tree_from_pair_sequence(pairs, n_doc)
        except (TypeError, ValueError) as exc:
            if isinstance(exc, (NodeReuse, DisconnectedForest, ParseError)):
                raise
            raise ParseError(str(exc)) from exc
    return tree_from_nested(doc, n)


def tree_to_document(tree: ContractionTree, cost: Any = None) -> dict[str, Any]:
    doc: dict[str, Any] = {"n": tree.n, "pairs": [list(p) for p in tree.to_pairs()]}
    if cost is not None:
        doc["cost"] = {k: float(v) for k, v in cost._asdict().items()}
    return doc


def network_to_document(net: TensorNetwork) -> dict[str, Any]:
    edges, bonds, dangling = [], [], []
    for ends, b in zip(net.edges, net.bonds):
        if len(ends) == 2:
            edges.append(list(ends))
            bonds.append(b)
        else:
            dangling.append([ends[0], b])
    doc: dict[str, Any] = {"n": net.n_tensors, "edges": edges, "bonds": bonds, "dangling": dangling}
    if net.labels is not None:
        doc["labels"] = list(net.labels)
    return doc


def network_from_document(doc: dict[str, Any]) -> TensorNetwork:
    try:
        return build_network(
            doc["edges"],
            int(doc["n"]),
            doc.get("bonds", 2),
            [tuple(d) for d in doc.get("dangling", [])],
            doc.get("labels"),
        )
    except (KeyError, TypeError) as exc:
        raise ParseError(f"malformed network document: {exc}") from exc


def open_masks(tree: ContractionTree, net: TensorNetwork, sliced: int = 0) -> list[int]:
    """Raw-bitmask version of :func:`open_sets`."""
    if tree.n != net.n_tensors:
        raise LeafMismatch(f"tree has {tree.n} leaves, network has {net.n_tensors} tensors")
    keep = ~sliced
    masks = [0] * tree.n_nodes
    leaf = net.leaf_masks
    left, right = tree.left, tree.right
    n = tree.n
    for v in tree.postorder():
        masks[v] = leaf[v] & keep if v < n else masks[left[v]] ^ masks[right[v]]
    return masks


def open_sets(
    tree: ContractionTree, net: TensorNetwork, sliced: Iterable[int] | OpenSet | None = None
) -> list[OpenSet]:
    """Open (uncontracted) edge set of every node, indexed by node id."""
    if net.n_edges > net.capacity:
        raise CapacityExceeded(f"{net.n_edges} edges exceed capacity {net.capacity}")
    if isinstance(sliced, OpenSet):
        sliced_bits = sliced.bits
    else:
        sliced_bits = mask_of(sliced or ())
    return [OpenSet.from_bits(m, net.capacity) for m in open_masks(tree, net, sliced_bits)]
