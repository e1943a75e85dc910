"""Scikit-learn style wrapper around the refinement loop."""

from __future__ import annotations

from sklearn.base import BaseEstimator
from sklearn.utils.validation import check_is_fitted

from .costmodel import score as score_tree
from .refine import RefineConfig, Rule, refine
from .seeds import greedy_seed
from .validation import check_network, check_tree

__all__ = ["NNIRefiner"]


class NNIRefiner(BaseEstimator):
    """Refine a contraction tree for one tensor network.

    ``fit`` takes the network (a :class:`~tnrefine.netcore.TensorNetwork`
    or its document form) plus an optional seed tree; without one the
    deterministic greedy seed is used.  Fitted attributes end in ``_``.

    >>> from tnrefine.topo import sycamore_like
    >>> est = NNIRefiner(budget_s=1.0, walkers=2).fit(sycamore_like(3, 3))
    >>> est.tree_.n
    9
    """

    def __init__(
        self,
        rule: str = "pareto",
        budget_s: float = 8.0,
        walkers: int = 8,
        s_cap: float | None = None,
        beta_lo: float = 4.0,
        beta_hi: float = 64.0,
        max_steps: int | None = None,
        random_state: int = 0,
    ):
        self.rule = rule
        self.budget_s = budget_s
        self.walkers = walkers
        self.s_cap = s_cap
        self.beta_lo = beta_lo
        self.beta_hi = beta_hi
        self.max_steps = max_steps
        self.random_state = random_state

    def _config(self) -> RefineConfig:
        return RefineConfig(
            rule=Rule(self.rule),
            budget_s=self.budget_s,
            walkers=self.walkers,
            s_cap=self.s_cap,
            beta_lo=self.beta_lo,
            beta_hi=self.beta_hi,
            seed=int(self.random_state),
            max_steps=self.max_steps,
        )

    def fit(self, X, y=None, seed_tree=None):
        net = check_network(X)
        seed = greedy_seed(net) if seed_tree is None else check_tree(seed_tree, net)
        result = refine(net, seed, self._config())
        self.network_ = net
        self.n_tensors_in_ = net.n_tensors
        self.seed_tree_ = seed
        self.seed_cost_ = result.seed_cost
        self.tree_ = result.tree
        self.cost_ = result.cost
        self.certificate_ = result.certificate
        self.result_ = result
        return self

    def transform(self, X=None):
        """The refined tree; ``X`` if given must be the fitted network."""
        check_is_fitted(self, "tree_")
        if X is not None and check_network(X) != self.network_:
            raise ValueError("transform received a different network than fit")
        return self.tree_

    def fit_transform(self, X, y=None, seed_tree=None):
        return self.fit(X, y, seed_tree=seed_tree).tree_

    def score(self, X=None, y=None) -> float:
        """Negative ``f_T`` of the refined tree, so that larger is better."""
        check_is_fitted(self, "tree_")
        net = self.network_ if X is None else check_network(X)
        return -score_tree(self.tree_, net).f_T
