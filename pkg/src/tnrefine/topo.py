"""Benchmark topologies at uniform bond dimension.

Every generator is a deterministic function of its arguments.  Integer
seeds are mixed with a per-family tag before use, so the same seed gives
independent instances in different families.
"""

from __future__ import annotations

import enum
import math
from dataclasses import dataclass
from importlib import resources

import numpy as np

from .exceptions import GenerationFailed
from .netcore import TensorNetwork, build_network

__all__ = [
    "Family",
    "TopologySpec",
    "generate",
    "grid_diag_density",
    "qaoa_p2",
    "random_regular",
    "sycamore_53",
    "sycamore_circuit",
    "sycamore_like",
    "sycamore_like_shape",
    "CIRCUIT_PATTERN",
    "coupler_layers",
]


class Family(str, enum.Enum):
    SYCAMORE_LIKE = "sycamore_like"
    GRID_DIAG_P = "grid_diag_p"
    RANDOM_REGULAR = "random_regular"
    QAOA_P2 = "qaoa_p2"
    SYCAMORE_53 = "sycamore_53"
    SYCAMORE_CIRCUIT = "sycamore_circuit"


_STREAM = {
    Family.GRID_DIAG_P: 0x67D1,
    Family.RANDOM_REGULAR: 0x3E6A,
    Family.QAOA_P2: 0x0A0A,
    Family.SYCAMORE_CIRCUIT: 0x5C1C,
}


def family_rng(family: Family, rng) -> np.random.Generator:
    if isinstance(rng, np.random.Generator):
        return rng
    return np.random.default_rng([0 if rng is None else int(rng), _STREAM[family]])


def _grid_edges(rows: int, cols: int) -> tuple[list[tuple[int, int]], list[tuple[int, int]]]:
    grid, diag = [], []
    for r in range(rows):
        for c in range(cols):
            v = r * cols + c
            if c + 1 < cols:
                grid.append((v, v + 1))
            if r + 1 < rows:
                grid.append((v, v + cols))
    for r in range(rows - 1):
        for c in range(cols - 1):
            v = r * cols + c
            diag.append((v, v + cols + 1))
            diag.append((v + 1, v + cols))
    return grid, diag


def sycamore_like(rows: int, cols: int, chi: int = 2) -> TensorNetwork:
    """Square lattice plus both diagonals of every unit cell."""
    if rows < 2 or cols < 2:
        raise ValueError("sycamore_like needs rows, cols >= 2")
    grid, diag = _grid_edges(rows, cols)
    return build_network(grid + diag, rows * cols, chi)


def sycamore_like_shape(n: int) -> tuple[int, int]:
    """Most square ``rows x cols = n`` factorization with ``rows <= cols``."""
    for rows in range(math.isqrt(n), 1, -1):
        if n % rows == 0:
            return rows, n // rows
    raise ValueError(f"n={n} has no rows x cols factorization with both sides >= 2")


def grid_diag_density(rows: int, cols: int, p: float, chi: int = 2, rng=None) -> TensorNetwork:
    """Square lattice with each unit-cell diagonal kept with probability ``p``."""
    if not 0.0 <= p <= 1.0:
        raise ValueError("p must lie in [0, 1]")
    if rows < 2 or cols < 2:
        raise ValueError("grid needs rows, cols >= 2")
    rng = family_rng(Family.GRID_DIAG_P, rng)
    grid, diag = _grid_edges(rows, cols)
    keep = rng.random(len(diag)) < p
    return build_network(grid + [e for e, k in zip(diag, keep) if k], rows * cols, chi)


def _pairing_model(n: int, d: int, rng: np.random.Generator, max_tries: int) -> list[tuple[int, int]]:
    if (n * d) % 2:
        raise ValueError(f"n*d must be even, got n={n}, d={d}")
    if n <= d:
        raise ValueError(f"need n > d, got n={n}, d={d}")
    points = np.repeat(np.arange(n), d)
    for _ in range(max_tries):
        perm = rng.permutation(points)
        pairs = perm.reshape(-1, 2)
        edges = set()
        ok = True
        for u, v in pairs:
            u, v = int(u), int(v)
            if u == v:
                ok = False
                break
            key = (u, v) if u < v else (v, u)
            if key in edges:
                ok = False
                break
            edges.add(key)
        if ok:
            return sorted(edges)
    raise GenerationFailed(f"no simple {d}-regular pairing on {n} vertices after {max_tries} tries")


def random_regular(n: int, d: int = 3, chi: int = 2, rng=None, max_tries: int = 10_000) -> TensorNetwork:
    """Simple random ``d``-regular graph from the pairing model with rejection."""
    rng = family_rng(Family.RANDOM_REGULAR, rng)
    return build_network(_pairing_model(n, d, rng, max_tries), n, chi)


def qaoa_p2(n: int, chi: int = 2, rng=None, max_tries: int = 10_000) -> TensorNetwork:
    """Interaction graph of a random 3-regular MaxCut instance."""
    rng = family_rng(Family.QAOA_P2, rng)
    return build_network(_pairing_model(n, 3, rng, max_tries), n, chi)


def _read_device_graph() -> tuple[list[tuple[int, int]], dict[int, tuple[int, int]]]:
    text = resources.files("tnrefine.data").joinpath("sycamore53.txt").read_text()
    edges, coords = [], {}
    for line in text.splitlines():
        line = line.strip()
        if line.startswith("#q "):
            q, r, c = (int(x) for x in line[3:].split())
            coords[q] = (r, c)
            continue
        if not line or line.startswith("#"):
            continue
        u, v = line.split()
        edges.append((int(u), int(v)))
    return edges, coords


def sycamore_53(chi: int = 2) -> TensorNetwork:
    """The 53-qubit device coupler graph."""
    edges, coords = _read_device_graph()
    return build_network(edges, len(coords), chi)


# Coupler layers A, B, C, D as (column offset, vertical) of a staggered
# brick pattern on the qubit grid, and the cycle order used on the device.
_LAYERS = {"A": (0, True), "B": (1, True), "C": (1, False), "D": (0, False)}
CIRCUIT_PATTERN = "ABCDCDAB"


def _in_layer(a: tuple[int, int], b: tuple[int, int], layer: str) -> bool:
    offset, vertical = _LAYERS[layer]
    if vertical:
        a, b = (a[1], a[0]), (b[1], b[0])
    a, b = sorted((a, b))
    if a[0] != b[0] or b[1] != a[1] + 1:
        return False
    pos = (a[0] % 2, (a[1] - offset) % 2)
    return pos in ((0, 0), (1, 1))


def coupler_layers() -> dict[str, list[tuple[int, int]]]:
    edges, coords = _read_device_graph()
    return {
        name: [(u, v) for u, v in edges if _in_layer(coords[u], coords[v], name)] for name in _LAYERS
    }


def sycamore_circuit(m: int, chi: int = 2, rng=None) -> TensorNetwork:
    """Closed-boundary random-circuit network on the 53-qubit device.

    Each of the ``m`` cycles is one rank-2 tensor per qubit followed by one
    rank-4 tensor per coupler of that cycle's layer; a final single-qubit
    layer closes the circuit.  The ``|0>`` kets are absorbed into the first
    single-qubit tensors and the ``<0|`` bras into the last ones, so those
    carry a single wire.  Tensor labels record the gate kind, qubits and
    time layer (``"1q:q:t"`` / ``"2q:q1:q2:t"``) for the gate materializer;
    ``rng`` is accepted for interface symmetry and does not affect topology.
    """
    if m < 1:
        raise ValueError("depth m must be >= 1")
    _, coords = _read_device_graph()
    layers = coupler_layers()
    n_qubits = len(coords)
    labels: list[str] = []
    edges: list[tuple[int, int]] = []
    last = [-1] * n_qubits  # tensor currently holding each qubit's wire

    def add_tensor(label: str, qubits: tuple[int, ...]) -> None:
        t = len(labels)
        labels.append(label)
        for q in qubits:
            if last[q] >= 0:
                edges.append((last[q], t))
            last[q] = t

    t = 0
    for cycle in range(m):
        for q in range(n_qubits):
            add_tensor(f"1q:{q}:{t}", (q,))
        t += 1
        for u, v in layers[CIRCUIT_PATTERN[cycle % len(CIRCUIT_PATTERN)]]:
            add_tensor(f"2q:{u}:{v}:{t}", (u, v))
        t += 1
    for q in range(n_qubits):
        add_tensor(f"1q:{q}:{t}", (q,))
    return build_network(edges, len(labels), chi, labels=labels)


@dataclass(frozen=True)
class TopologySpec:
    """Declarative description of one generated instance."""

    family: Family
    n: int | None = None
    rows: int | None = None
    cols: int | None = None
    p: float = 1.0
    d: int = 3
    m: int = 4
    chi: int = 2
    seed: int = 0

    def __post_init__(self):
        object.__setattr__(self, "family", Family(self.family))

    def shape(self) -> tuple[int, int]:
        if self.rows is not None and self.cols is not None:
            return self.rows, self.cols
        if self.n is None:
            raise ValueError(f"{self.family.value} needs n or rows/cols")
        return sycamore_like_shape(self.n)


def generate(spec: TopologySpec) -> TensorNetwork:
    fam = spec.family
    if fam is Family.SYCAMORE_LIKE:
        return sycamore_like(*spec.shape(), spec.chi)
    if fam is Family.GRID_DIAG_P:
        return grid_diag_density(*spec.shape(), spec.p, spec.chi, spec.seed)
    if fam is Family.RANDOM_REGULAR:
        return random_regular(spec.n, spec.d, spec.chi, spec.seed)
    if fam is Family.QAOA_P2:
        return qaoa_p2(spec.n, spec.chi, spec.seed)
    if fam is Family.SYCAMORE_53:
        return sycamore_53(spec.chi)
    if fam is Family.SYCAMORE_CIRCUIT:
        return sycamore_circuit(spec.m, spec.chi, spec.seed)
    raise ValueError(f"unknown family {fam}")
