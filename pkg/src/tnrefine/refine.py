"""NNI local search under Pareto, scalar and logit acceptance rules."""

from __future__ import annotations

import csv
import enum
import io
import time
from dataclasses import dataclass, field
from typing import IO, NamedTuple, Sequence

import numpy as np

from .costmodel import DEFAULT_PRECISION, CostVector, Precision, pareto_dominates
from .netcore import ContractionTree, TensorNetwork
from .nni import Workspace, apply_inplace

__all__ = [
    "Certificate",
    "MechanismStats",
    "RefineConfig",
    "RefineResult",
    "Rule",
    "TraceRow",
    "beta_schedule",
    "mechanism_stats",
    "refine",
    "step_logit",
    "step_pareto",
    "step_scalar",
]


class Rule(str, enum.Enum):
    PARETO = "pareto"
    SCALAR = "scalar"
    LOGIT_BR = "logit_br"


class Certificate(str, enum.Enum):
    PARETO_LOCAL = "PARETO_LOCAL"
    FT_LOCAL = "FT_LOCAL"
    BUDGET_EXHAUSTED = "BUDGET_EXHAUSTED"


@dataclass(frozen=True)
class RefineConfig:
    """Refinement settings.

    ``budget_s`` is wallclock; the deadline is checked between full
    neighborhood scans.  ``max_steps`` optionally caps accepted moves per
    walker and counts as budget exhaustion when hit.
    """

    rule: Rule = Rule.PARETO
    budget_s: float = 8.0
    walkers: int = 8
    s_cap: float | None = None
    beta_lo: float = 4.0
    beta_hi: float = 64.0
    beta_steps: int = 8
    seed: int = 0
    max_steps: int | None = None
    precision: Precision = DEFAULT_PRECISION
    flop_factor: int = 2

    def __post_init__(self):
        object.__setattr__(self, "rule", Rule(self.rule))
        if not self.budget_s > 0:
            raise ValueError("budget_s must be positive")
        if self.walkers < 1:
            raise ValueError("walkers must be >= 1")
        if not 0 < self.beta_lo <= self.beta_hi:
            raise ValueError("need 0 < beta_lo <= beta_hi")
        if self.beta_steps < 1:
            raise ValueError("beta_steps must be >= 1")


class TraceRow(NamedTuple):
    walker: int
    step: int
    cost: CostVector
    move_index: int


TRACE_COLUMNS = ("walker", "step", "f_T", "f_S", "f_sigma", "f_eps", "accepted_move_index")


@dataclass
class RefineResult:
    tree: ContractionTree
    cost: CostVector
    seed_cost: CostVector
    certificate: Certificate
    traces: list[list[TraceRow]]
    elapsed: float
    accepted: int
    best_walker: int
    walker_costs: list[CostVector] = field(default_factory=list)
    walker_certificates: list[Certificate] = field(default_factory=list)

    @property
    def delta_f_T(self) -> float:
        return self.seed_cost.f_T - self.cost.f_T

    def write_trace_csv(self, fh: IO[str]) -> None:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(TRACE_COLUMNS)
        for trace in self.traces:
            for row in trace:
                w.writerow([row.walker, row.step, *row.cost.csv_fields(), row.move_index])

    def trace_csv(self) -> str:
        buf = io.StringIO()
        self.write_trace_csv(buf)
        return buf.getvalue()


def _first_in_order(indices: Sequence[int], rank: Sequence[int] | None) -> int:
    if rank is None:
        return min(indices)
    return min(indices, key=rank.__getitem__)


def step_pareto(
    current: Sequence[float], scored: Sequence[Sequence[float]], rank: Sequence[int] | None = None
) -> int | None:
    """Index of the dominator with the largest summed per-axis gain.

    Ties go to the lowest index (or lowest ``rank[index]`` when a tie-break
    ranking is given).  ``None`` means the current tree is Pareto-local.
    """
    best_gain = -1.0
    best: list[int] = []
    for i, cand in enumerate(scored):
        if not pareto_dominates(cand, current):
            continue
        gain = 0.0
        for c, d in zip(current, cand):
            if c > d:
                gain += c - d
        if gain > best_gain:
            best_gain, best = gain, [i]
        elif gain == best_gain:
            best.append(i)
    if not best:
        return None
    return _first_in_order(best, rank)


def step_scalar(
    current: Sequence[float], scored: Sequence[Sequence[float]], rank: Sequence[int] | None = None
) -> int | None:
    """Index of the smallest-``f_T`` neighbor if it strictly improves, else ``None``."""
    if not scored:
        return None
    low = min(c[0] for c in scored)
    if not low < current[0]:
        return None
    return _first_in_order([i for i, c in enumerate(scored) if c[0] == low], rank)


def step_logit(
    current: Sequence[float],
    scored: Sequence[Sequence[float]],
    beta: float,
    rng: np.random.Generator,
) -> int | None:
    """Gumbel-max draw among ``f_T``-improving neighbors at inverse temperature ``beta``."""
    if not beta > 0:
        raise ValueError("beta must be positive")
    improving = [i for i, c in enumerate(scored) if c[0] < current[0]]
    if not improving:
        return None
    gains = np.array([current[0] - scored[i][0] for i in improving])
    keys = beta * gains + rng.gumbel(size=len(improving))
    return improving[int(np.argmax(keys))]


def beta_schedule(lo: float, hi: float, steps: int) -> list[float]:
    """One annealing cycle: ``steps`` geometric values from ``lo`` to ``hi``."""
    if steps == 1:
        return [hi]
    ratio = hi / lo
    return [lo * ratio ** (k / (steps - 1)) for k in range(steps)]


class _Walker:
    def __init__(self, index: int, ws: Workspace, rng: np.random.Generator, rank):
        self.index = index
        self.ws = ws
        self.rng = rng
        self.rank = rank
        self.steps = 0
        self.status: Certificate | None = None
        self.trace = [TraceRow(index, 0, ws.cost, -1)]

    def step(self, rule: Rule, betas: list[float], deadline: float) -> None:
        ws = self.ws
        scored = ws.scan()
        cur = ws.cost
        if rule is Rule.PARETO:
            pick = step_pareto(cur, scored, self.rank)
        elif rule is Rule.SCALAR:
            pick = step_scalar(cur, scored, self.rank)
        else:
            pick = step_logit(cur, scored, betas[self.steps % len(betas)], self.rng)
        if pick is None:
            self.status = Certificate.PARETO_LOCAL if rule is Rule.PARETO else Certificate.FT_LOCAL
            return
        if time.perf_counter() > deadline:
            self.status = Certificate.BUDGET_EXHAUSTED
            return
        ws.accept(ws.moves[pick])
        self.steps += 1
        self.trace.append(TraceRow(self.index, self.steps, ws.cost, pick))


def _kick(ws: Workspace, count: int, rng: np.random.Generator) -> None:
    for _ in range(count):
        move = ws.moves[int(rng.integers(len(ws.moves)))]
        apply_inplace(ws.left, ws.right, ws.n, move)
        ws._refresh()


def refine(net: TensorNetwork, seed_tree: ContractionTree, config: RefineConfig | None = None) -> RefineResult:
    """Refine ``seed_tree`` with a population of NNI walkers.

    Walker 0 starts from the seed itself with index-order tie-breaking.
    Walker ``j >= 1`` first applies ``j`` uniformly random NNI moves to the
    seed and breaks ties through its own random ranking of neighborhood
    positions.  Walkers advance one full-neighborhood step each in turn
    until all stop or the budget runs out; the result is the best walker by
    ``(f_T, f_S, walker index)``.
    """
    config = config or RefineConfig()
    start = time.perf_counter()
    deadline = start + config.budget_s
    ws0 = Workspace(seed_tree, net, config.s_cap, config.precision, config.flop_factor)
    seed_cost = ws0.cost
    if seed_tree.n < 3:
        return RefineResult(
            seed_tree,
            seed_cost,
            seed_cost,
            Certificate.PARETO_LOCAL,
            [[TraceRow(0, 0, seed_cost, -1)]],
            time.perf_counter() - start,
            0,
            0,
            [seed_cost],
            [Certificate.PARETO_LOCAL],
        )

    walkers = []
    for j in range(config.walkers):
        rng = np.random.default_rng([config.seed, j])
        ws = ws0 if j == 0 else Workspace(seed_tree, net, config.s_cap, config.precision, config.flop_factor)
        rank = None
        if j > 0:
            _kick(ws, j, rng)
            rank = rng.permutation(len(ws.moves)).tolist()
        walkers.append(_Walker(j, ws, rng, rank))

    betas = beta_schedule(config.beta_lo, config.beta_hi, config.beta_steps)
    active = list(walkers)
    while active:
        still = []
        for w in active:
            if config.max_steps is not None and w.steps >= config.max_steps:
                w.status = Certificate.BUDGET_EXHAUSTED
                continue
            w.step(config.rule, betas, deadline)
            if w.status is None:
                still.append(w)
        active = still

    best = min(walkers, key=lambda w: (w.ws.cost.f_T, w.ws.cost.f_S, w.index))
    return RefineResult(
        tree=best.ws.tree(),
        cost=best.ws.cost,
        seed_cost=seed_cost,
        certificate=best.status,
        traces=[w.trace for w in walkers],
        elapsed=time.perf_counter() - start,
        accepted=sum(w.steps for w in walkers),
        best_walker=best.index,
        walker_costs=[w.ws.cost for w in walkers],
        walker_certificates=[w.status for w in walkers],
    )


class MechanismStats(NamedTuple):
    p_pareto: float
    best_single_move_dfT: float


def mechanism_stats(
    net: TensorNetwork, seed_tree: ContractionTree, s_cap: float | None = None
) -> MechanismStats:
    """Share of NNI neighbors that Pareto-dominate the seed, and the largest
    single-move ``f_T`` drop (zero when no neighbor improves ``f_T``)."""
    ws = Workspace(seed_tree, net, s_cap)
    scored = ws.scan()
    if not scored:
        return MechanismStats(0.0, 0.0)
    cur = ws.cost
    dominators = sum(1 for c in scored if pareto_dominates(c, cur))
    drop = max(cur.f_T - c.f_T for c in scored)
    return MechanismStats(dominators / len(scored), max(drop, 0.0))
