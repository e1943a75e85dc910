import json

import pytest
from hypothesis import given
from hypothesis import strategies as st

from conftest import net_and_tree
from tnrefine.exceptions import (
    CapacityExceeded,
    DisconnectedForest,
    DuplicateEdge,
    InvalidEndpoint,
    LeafMismatch,
    NodeReuse,
    NonPositiveBond,
    ParseError,
)
from tnrefine.netcore import (
    LEAF,
    ContractionTree,
    OpenSet,
    TensorNetwork,
    build_network,
    network_from_document,
    network_to_document,
    open_sets,
    tree_from_nested,
    tree_from_pair_sequence,
)


def test_pair_network(pair):
    assert pair.n_edges == 1
    assert pair.leaf_masks == (0b1, 0b1)
    assert pair.is_closed


def test_triangle_leaf_sets(triangle):
    assert triangle.n_edges == 3
    assert [len(triangle.incident_edges(t)) for t in range(3)] == [2, 2, 2]


@pytest.mark.parametrize(
    "edges, n, bonds, exc",
    [
        ([(0, 5)], 3, 2, InvalidEndpoint),
        ([(0, 1)], 2, 0, NonPositiveBond),
        ([(0, 1), (1, 0)], 2, 2, DuplicateEdge),
        ([(1, 1)], 2, 2, InvalidEndpoint),
    ],
)
def test_build_errors(edges, n, bonds, exc):
    with pytest.raises(exc):
        build_network(edges, n, bonds)


def test_hyperedge_rejected():
    with pytest.raises(InvalidEndpoint):
        TensorNetwork(3, [(0, 1, 2)], [2])


def test_capacity_is_hard_limit():
    edges = [(0, 1)] + [(i, i + 1) for i in range(1, 9)]
    with pytest.raises(CapacityExceeded):
        build_network(edges, 10, 2, capacity=8)


def test_pair_sequence_basic():
    t = tree_from_pair_sequence([(0, 1)])
    assert (t.root, t.left[2], t.right[2]) == (2, 0, 1)
    t3 = tree_from_pair_sequence([(0, 1), (3, 2)])
    assert t3 == tree_from_nested(((0, 1), 2))
    assert t3.left[0] == LEAF


def test_pair_sequence_errors():
    with pytest.raises(NodeReuse):
        tree_from_pair_sequence([(0, 1), (0, 2)])
    with pytest.raises(DisconnectedForest):
        tree_from_pair_sequence([(0, 1)], n=3)


def test_nested_errors():
    with pytest.raises(LeafMismatch):
        tree_from_nested(((0, 1), (2, 2)))
    with pytest.raises(ParseError):
        tree_from_nested(((0, 1), "x"))


def test_open_sets_triangle(triangle):
    tree = tree_from_nested(((0, 1), 2))
    sets = open_sets(tree, triangle)
    a = tree.parent[0]
    assert set(sets[a]) == {1, 2}  # e02, e12
    assert len(sets[tree.root]) == 0


def test_open_sets_with_slice(triangle):
    tree = tree_from_nested(((0, 1), 2))
    sets = open_sets(tree, triangle, sliced=[0])
    assert set(sets[0]) == {1}
    assert set(sets[tree.parent[0]]) == {1, 2}


def test_open_sets_pair(pair):
    tree = tree_from_nested((0, 1))
    assert len(open_sets(tree, pair)[tree.root]) == 0


def test_open_sets_leaf_mismatch(triangle):
    with pytest.raises(LeafMismatch):
        open_sets(tree_from_nested((0, 1)), triangle)


def test_openset_words_and_ops():
    a = OpenSet([0, 63, 64, 200])
    b = OpenSet([63, 1000])
    assert a.words()[0] == (1 | 1 << 63)
    assert OpenSet.from_words(a.words()) == a
    assert set(a ^ b) == {0, 64, 200, 1000}
    assert set(a & b) == {63}
    assert len(a | b) == 5
    with pytest.raises(CapacityExceeded):
        OpenSet([2048])


def test_openset_log_size():
    net = build_network([(0, 1), (1, 2)], 3, [4, 3])
    assert OpenSet([0, 1]).log_size(net) == pytest.approx(2 + 1.584962500721156)


def test_network_document_roundtrip():
    net = build_network([(0, 1), (1, 2)], 3, [2, 4], dangling=[(0, 3)], labels=["a", "b", "c"])
    doc = json.loads(json.dumps(network_to_document(net)))
    back = network_from_document(doc)
    assert back == net and back.labels == net.labels and back.dangling_mask == net.dangling_mask


@given(net_and_tree())
def test_root_open_set_is_dangling(nt):
    net, tree = nt
    root = open_sets(tree, net)[tree.root]
    assert root.bits == net.dangling_mask


@given(net_and_tree(), st.data())
def test_child_swap_keeps_open_sets(nt, data):
    net, tree = nt
    if tree.n < 2:
        return
    v = data.draw(st.integers(tree.n, 2 * tree.n - 2))
    left, right = list(tree.left), list(tree.right)
    left[v], right[v] = right[v], left[v]
    swapped = ContractionTree(left, right, tree.root)
    assert [s.bits for s in open_sets(tree, net)] == [s.bits for s in open_sets(swapped, net)]


@given(net_and_tree())
def test_encoding_roundtrip(nt):
    _, tree = nt
    flat = tree.encode()
    assert len(flat) == 2 * (2 * tree.n - 1)
    assert ContractionTree.decode(flat) == tree
    assert ContractionTree.decode(flat).encode() == flat


@given(net_and_tree())
def test_pairs_and_nested_roundtrip(nt):
    _, tree = nt
    again = tree_from_pair_sequence(tree.to_pairs(), tree.n)
    assert again.topology() == tree.topology()
    assert tree_from_nested(tree.to_nested(), tree.n).topology() == tree.topology()


@given(net_and_tree())
def test_postorder_children_first(nt):
    _, tree = nt
    seen = set()
    for v in tree.postorder():
        if v >= tree.n:
            assert tree.left[v] in seen and tree.right[v] in seen
        seen.add(v)
    assert len(seen) == 2 * tree.n - 1


@given(net_and_tree())
def test_open_sets_pure(nt):
    net, tree = nt
    assert [s.bits for s in open_sets(tree, net)] == [s.bits for s in open_sets(tree, net)]
