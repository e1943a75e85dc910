"""Dense reference executor with exact FLOP accounting.

Tensor ``t`` is stored with one axis per incident edge, axes ordered by
ascending edge id.  Contraction follows the tree's post-order through
:func:`numpy.tensordot`, and every pairwise step is charged
``2 * output_entries * inner_length`` FLOPs, computed from the operand
shapes rather than from the cost model.
"""

from __future__ import annotations

import cmath
import enum
import hashlib
import itertools
import math
import time
from dataclasses import dataclass
from typing import Sequence

import numpy as np

from .costmodel import TreeCosts, log2_int
from .exceptions import OutOfMemoryBudget, ShapeMismatch
from .netcore import ContractionTree, TensorNetwork, iter_bits, mask_of, open_masks

__all__ = [
    "DEFAULT_MEM_BUDGET",
    "ExecReport",
    "PairedReport",
    "SlicedReport",
    "ValueModel",
    "check_memory",
    "execute",
    "execute_sliced",
    "materialize",
    "paired_validation",
    "validation_row",
    "value_digest",
    "VALIDATION_COLUMNS",
]

DEFAULT_MEM_BUDGET = 4 * 2**30
AGREEMENT_TOL = 1e-6
MODEL_TOL_BITS = 1e-9


class ValueModel(str, enum.Enum):
    RANDOM_GAUSSIAN = "random_gaussian"
    CIRCUIT_GATES = "circuit_gates"


@dataclass(frozen=True)
class ExecReport:
    flops_counted: int
    f_T_model: float
    value: complex | float | np.ndarray
    value_digest: str
    peak_entries_observed: int
    wallclock: float

    @property
    def is_scalar(self) -> bool:
        return np.ndim(self.value) == 0


@dataclass(frozen=True)
class SlicedReport:
    value: complex | float | np.ndarray
    flops_counted: int
    flops_unsliced: int
    n_slices: int
    f_sigma: float
    peak_entries_observed: int

    @property
    def overhead_ratio(self) -> float:
        """Executed FLOPs relative to the unsliced contraction."""
        return self.flops_counted / self.flops_unsliced


@dataclass(frozen=True)
class PairedReport:
    flops_a: int
    flops_b: int
    f_T_a: float
    f_T_b: float
    value_a: complex | float | np.ndarray
    value_b: complex | float | np.ndarray

    @property
    def measured_ratio(self) -> float:
        return self.flops_a / self.flops_b

    @property
    def predicted_ratio(self) -> float:
        return 2.0 ** (self.f_T_a - self.f_T_b)

    @property
    def agreement(self) -> float:
        return self.measured_ratio / self.predicted_ratio


def _itemsize(model: ValueModel) -> int:
    return 16 if model is ValueModel.CIRCUIT_GATES else 8


def check_memory(entries: int, itemsize: int, budget: int | None) -> None:
    if budget is not None and entries * itemsize > budget:
        raise OutOfMemoryBudget(
            f"{entries} entries x {itemsize} B = {entries * itemsize} B exceeds budget {budget} B"
        )


def _shape(net: TensorNetwork, t: int) -> tuple[int, ...]:
    return tuple(net.bonds[e] for e in iter_bits(net.leaf_masks[t]))


# Gate set for circuit tensors: pi/2 rotations about X, Y and W = (X+Y)/sqrt2,
# and fSim(theta = pi/2, phi = pi/6) on couplers.
_PAULI_X = np.array([[0, 1], [1, 0]], dtype=complex)
_PAULI_Y = np.array([[0, -1j], [1j, 0]], dtype=complex)
_SQRT = [
    (np.eye(2) - 1j * P) / math.sqrt(2)
    for P in (_PAULI_X, _PAULI_Y, (_PAULI_X + _PAULI_Y) / math.sqrt(2))
]


def fsim(theta: float = math.pi / 2, phi: float = math.pi / 6) -> np.ndarray:
    c, s = math.cos(theta), math.sin(theta)
    return np.array(
        [[1, 0, 0, 0], [0, c, -1j * s, 0], [0, -1j * s, c, 0], [0, 0, 0, cmath.exp(-1j * phi)]],
        dtype=complex,
    )


def _parse_label(label: str) -> tuple[tuple[int, ...], int]:
    parts = label.split(":")
    if parts[0] == "1q" and len(parts) == 3:
        return (int(parts[1]),), int(parts[2])
    if parts[0] == "2q" and len(parts) == 4:
        return (int(parts[1]), int(parts[2])), int(parts[3])
    raise ValueError(f"not a circuit tensor label: {label!r}")


def _circuit_tensors(net: TensorNetwork, rng: np.random.Generator) -> list[np.ndarray]:
    if net.labels is None:
        raise ValueError("circuit_gates needs a network with gate labels")
    if any(b != 2 for b in net.bonds):
        raise ValueError("circuit_gates needs bond dimension 2 on every edge")
    info = [_parse_label(lab) for lab in net.labels]
    ends = [[] for _ in range(net.n_edges)]
    for t in range(net.n_tensors):
        for e in iter_bits(net.leaf_masks[t]):
            ends[e].append(t)
    last_gate: dict[int, int] = {}
    out = []
    for t, (qubits, time_) in enumerate(info):
        # for each edge of t: which qubit wire it carries and whether it is an input
        wires = {}
        for e in iter_bits(net.leaf_masks[t]):
            (other,) = (x for x in ends[e] if x != t)
            oq, ot = info[other]
            (q,) = set(qubits) & set(oq)
            wires[(q, ot < time_)] = e
        if len(qubits) == 1:
            q = qubits[0]
            choices = [k for k in range(3) if k != last_gate.get(q)]
            k = choices[int(rng.integers(len(choices)))]
            last_gate[q] = k
            g = _SQRT[k]  # g[out, in]
            has_in, has_out = (q, True) in wires, (q, False) in wires
            if has_in and has_out:
                data, axes = g, [wires[(q, False)], wires[(q, True)]]
            elif has_out:
                data, axes = g[:, 0], [wires[(q, False)]]
            elif has_in:
                data, axes = g[0, :], [wires[(q, True)]]
            else:
                data, axes = np.array(g[0, 0]), []
        else:
            u, v = qubits
            data = fsim().reshape(2, 2, 2, 2)  # (out_u, out_v, in_u, in_v)
            axes = [wires[(u, False)], wires[(v, False)], wires[(u, True)], wires[(v, True)]]
        perm = np.argsort(axes)
        out.append(np.ascontiguousarray(np.transpose(data, perm)))
    return out


def materialize(
    net: TensorNetwork,
    rng=None,
    value_model: ValueModel | str = ValueModel.RANDOM_GAUSSIAN,
    mem_budget: int | None = DEFAULT_MEM_BUDGET,
) -> list[np.ndarray]:
    """Dense tensors for every node of ``net``.

    ``random_gaussian`` draws i.i.d. standard normal float64 entries.
    ``circuit_gates`` builds unitary gate tensors for networks produced by
    :func:`tnrefine.topo.sycamore_circuit`, with ``|0>`` and ``<0|`` folded
    into the boundary single-qubit gates.
    """
    value_model = ValueModel(value_model)
    rng = rng if isinstance(rng, np.random.Generator) else np.random.default_rng(rng)
    total = sum(math.prod(_shape(net, t)) for t in range(net.n_tensors))
    check_memory(total, _itemsize(value_model), mem_budget)
    if value_model is ValueModel.CIRCUIT_GATES:
        return _circuit_tensors(net, rng)
    return [rng.standard_normal(_shape(net, t)) for t in range(net.n_tensors)]


def value_digest(value) -> str:
    arr = np.asarray(value)
    if arr.ndim == 0:
        z = complex(arr)
        if z.imag == 0:
            return f"{z.real:.12e}"
        return f"{z.real:.12e}{z.imag:+.12e}j"
    norm = float(np.linalg.norm(arr))
    h = hashlib.sha256(repr(arr.shape).encode()).hexdigest()[:8]
    return f"norm={norm:.12e};shape={h}"


def _check_tensors(net: TensorNetwork, tensors: Sequence[np.ndarray]) -> None:
    if len(tensors) != net.n_tensors:
        raise ShapeMismatch(f"{len(tensors)} tensors for a {net.n_tensors}-tensor network")
    for t, arr in enumerate(tensors):
        if arr.shape != _shape(net, t):
            raise ShapeMismatch(f"tensor {t} has shape {arr.shape}, expected {_shape(net, t)}")


def _contract(
    net: TensorNetwork,
    tree: ContractionTree,
    tensors: Sequence[np.ndarray],
    edges: list[list[int]],
) -> tuple[np.ndarray, int, int, list[int]]:
    """Post-order contraction; returns (result, flops, peak entries, result edges)."""
    n = tree.n
    left, right = tree.left, tree.right
    data: dict[int, np.ndarray] = {}
    legs: dict[int, list[int]] = {}
    flops = 0
    peak = 0
    for v in tree.postorder():
        if v < n:
            data[v], legs[v] = tensors[v], edges[v]
        else:
            a, b = left[v], right[v]
            A, B = data.pop(a), data.pop(b)
            la, lb = legs.pop(a), legs.pop(b)
            shared = set(la) & set(lb)
            ia = [la.index(e) for e in la if e in shared]
            ib = [lb.index(e) for e in la if e in shared]
            out = np.tensordot(A, B, axes=(ia, ib))
            inner = math.prod(A.shape[i] for i in ia)
            flops += 2 * out.size * inner
            data[v] = out
            legs[v] = [e for e in la if e not in shared] + [e for e in lb if e not in shared]
        peak = max(peak, data[v].size)
    return data[tree.root], flops, peak, legs[tree.root]


def _finish(result: np.ndarray, result_legs: list[int]) -> np.ndarray | float | complex:
    if result.ndim == 0:
        return result.item()
    return np.transpose(result, np.argsort(result_legs))


def execute(
    net: TensorNetwork,
    tree: ContractionTree,
    tensors: Sequence[np.ndarray],
    mem_budget: int | None = DEFAULT_MEM_BUDGET,
) -> ExecReport:
    """Contract ``tensors`` along ``tree`` and cross-check the FLOP model.

    Raises :class:`ShapeMismatch` when the counted FLOPs disagree with the
    model's ``f_T`` by more than 1e-9 bits.
    """
    _check_tensors(net, tensors)
    open_masks(tree, net)
    costs = TreeCosts(tree.left, tree.right, tree.root, net)
    itemsize = max((a.dtype.itemsize for a in tensors), default=8)
    check_memory(max(net.size(m) for m in costs.masks), itemsize, mem_budget)
    edges = [list(iter_bits(net.leaf_masks[t])) for t in range(net.n_tensors)]
    start = time.perf_counter()
    result, flops, peak, result_legs = _contract(net, tree, tensors, edges)
    wall = time.perf_counter() - start
    f_model = costs.f_T
    if tree.n > 1 and abs(log2_int(flops) - f_model) > MODEL_TOL_BITS:
        raise ShapeMismatch(f"counted {flops} FLOPs, model predicts 2^{f_model:.9f}")
    value = _finish(result, result_legs)
    return ExecReport(flops, f_model, value, value_digest(value), peak, wall)


def execute_sliced(
    net: TensorNetwork,
    tree: ContractionTree,
    tensors: Sequence[np.ndarray],
    sliced_edges: Sequence[int],
    mem_budget: int | None = DEFAULT_MEM_BUDGET,
) -> SlicedReport:
    """Loop over every assignment of ``sliced_edges`` and sum the results.

    Executed FLOPs are booked in full here; the cost model keeps them out of
    ``f_T`` and reports the multiplicity as ``f_sigma``.
    """
    _check_tensors(net, tensors)
    sliced_mask = mask_of(sliced_edges)
    if sliced_mask & net.dangling_mask:
        raise ValueError("dangling (output) edges cannot be sliced")
    open_masks(tree, net)
    sliced_costs = TreeCosts(tree.left, tree.right, tree.root, net, sliced=sliced_mask)
    itemsize = max((a.dtype.itemsize for a in tensors), default=8)
    check_memory(max(net.size(m) for m in sliced_costs.masks), itemsize, mem_budget)
    full = TreeCosts(tree.left, tree.right, tree.root, net)
    sliced = sorted(set(sliced_edges))
    leaf_edges = [list(iter_bits(net.leaf_masks[t])) for t in range(net.n_tensors)]
    kept_edges = [[e for e in le if not sliced_mask >> e & 1] for le in leaf_edges]
    total = None
    flops = 0
    peak = 0
    n_slices = 0
    for assignment in itertools.product(*(range(net.bonds[e]) for e in sliced)):
        fixed = dict(zip(sliced, assignment))
        views = []
        for t, arr in enumerate(tensors):
            index = tuple(fixed.get(e, slice(None)) for e in leaf_edges[t])
            views.append(arr[index])
        result, f, p, legs = _contract(net, tree, views, kept_edges)
        part = _finish(result, legs)
        total = part if total is None else total + part
        flops += f
        peak = max(peak, p)
        n_slices += 1
    f_sigma = math.fsum(net.log2_bonds[e] for e in sliced)
    return SlicedReport(total, flops, full.flops, n_slices, f_sigma, peak)


def paired_validation(
    net: TensorNetwork,
    tree_a: ContractionTree,
    tree_b: ContractionTree,
    tensors: Sequence[np.ndarray],
    mem_budget: int | None = DEFAULT_MEM_BUDGET,
    tol: float = AGREEMENT_TOL,
) -> PairedReport:
    """Execute both trees and compare the FLOP ratio with ``2^(f_T(a) - f_T(b))``."""
    ra = execute(net, tree_a, tensors, mem_budget)
    rb = execute(net, tree_b, tensors, mem_budget)
    report = PairedReport(
        ra.flops_counted, rb.flops_counted, ra.f_T_model, rb.f_T_model, ra.value, rb.value
    )
    if abs(report.agreement - 1.0) > tol:
        raise ShapeMismatch(f"FLOP ratio agreement {report.agreement!r} outside 1 +/- {tol}")
    return report


VALIDATION_COLUMNS = ("net_id", "tree_id", "flops", "f_T_model", "value_digest", "agreement")


def validation_row(net_id: str, tree_id: str, report: ExecReport, agreement: float) -> list[str]:
    return [
        net_id,
        tree_id,
        str(report.flops_counted),
        f"{report.f_T_model:.6f}",
        report.value_digest,
        f"{agreement:.6f}",
    ]
