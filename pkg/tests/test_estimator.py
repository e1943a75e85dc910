import doctest

import pytest
from sklearn.base import clone
from sklearn.exceptions import NotFittedError

from tnrefine import estimator
from tnrefine.estimator import NNIRefiner
from tnrefine.exceptions import LeafMismatch
from tnrefine.netcore import network_to_document
from tnrefine.topo import sycamore_like


def test_params_roundtrip():
    est = NNIRefiner(rule="scalar", walkers=3)
    assert est.get_params()["walkers"] == 3
    assert clone(est).get_params() == est.get_params()
    assert est.set_params(budget_s=2.0).budget_s == 2.0


def test_fit_transform_score():
    net = sycamore_like(3, 4)
    est = NNIRefiner(budget_s=3, walkers=2).fit(network_to_document(net))
    assert est.n_tensors_in_ == 12
    assert est.cost_.f_T <= est.seed_cost_.f_T
    assert est.transform(net) == est.tree_
    assert est.score() == -est.cost_.f_T
    assert NNIRefiner(budget_s=3, walkers=2).fit_transform(net) == est.tree_


def test_seed_tree_and_errors():
    net = sycamore_like(2, 3)
    with pytest.raises(NotFittedError):
        NNIRefiner().transform()
    with pytest.raises(LeafMismatch):
        NNIRefiner().fit(net, seed_tree=[[0, 1], 2])
    est = NNIRefiner(budget_s=1).fit(net, seed_tree=[[[[[0, 1], 2], 3], 4], 5])
    assert est.seed_tree_.n == 6
    with pytest.raises(ValueError):
        est.transform(sycamore_like(2, 4))
    with pytest.raises(TypeError):
        NNIRefiner().fit("not a network")


def test_docstring_example():
    assert doctest.testmod(estimator).failed == 0
