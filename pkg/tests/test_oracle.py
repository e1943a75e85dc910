import math

import numpy as np
import pytest

from conftest import random_network
from tnrefine.costmodel import score
from tnrefine.exceptions import TooLarge
from tnrefine.netcore import build_network, tree_from_nested
from tnrefine.oracle import double_factorial, dp_optimal_fT, enumerate_trees


def test_small_cases(pair, triangle, chain5):
    assert dp_optimal_fT(pair)[0] == score(tree_from_nested((0, 1)), pair).f_T
    assert dp_optimal_fT(triangle)[0] == pytest.approx(math.log2(24))
    f, tree = dp_optimal_fT(chain5)
    assert f == pytest.approx(math.log2(28))
    assert score(tree, chain5).f_T == f


@pytest.mark.parametrize("n, count", [(3, 3), (4, 15), (5, 105), (6, 945)])
def test_enumeration_counts(n, count):
    topos = [t.topology() for t in enumerate_trees(n)]
    assert len(topos) == count == double_factorial(2 * n - 3)
    assert len(set(topos)) == count


def test_limits():
    with pytest.raises(TooLarge):
        list(enumerate_trees(9))
    with pytest.raises(TooLarge):
        dp_optimal_fT(build_network([(i, i + 1) for i in range(20)], 21))


def test_disconnected_dp():
    net = build_network([(0, 1), (2, 3)], 4, 2)
    f, tree = dp_optimal_fT(net)
    assert min(score(t, net).f_T for t in enumerate_trees(4)) == f


def test_dp_equals_enumeration():
    rng = np.random.default_rng(17)
    for _ in range(40):
        n = int(rng.integers(2, 7))
        net = random_network(rng, n, extra=0.8, chi=(2, 3))
        f, witness = dp_optimal_fT(net)
        assert score(witness, net).f_T == f
        assert min(score(t, net).f_T for t in enumerate_trees(n)) == f
