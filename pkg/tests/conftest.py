import sys
from pathlib import Path

import numpy as np
import pytest
from hypothesis import HealthCheck, settings
from hypothesis import strategies as st

from tnrefine.netcore import build_network
from tnrefine.seeds import random_seed

sys.path.insert(0, str(Path(__file__).parent))

settings.register_profile(
    "default", max_examples=60, deadline=None, suppress_health_check=[HealthCheck.too_slow]
)
settings.load_profile("default")


def random_network(rng: np.random.Generator, n: int, extra: float = 0.5, chi=(2,), dangling: int = 0):
    """Connected random network: a random spanning tree plus extra edges."""
    edges = set()
    order = rng.permutation(n)
    for k in range(1, n):
        u, v = int(order[k]), int(order[rng.integers(k)])
        edges.add((min(u, v), max(u, v)))
    for _ in range(int(extra * n)):
        u, v = (int(x) for x in rng.choice(n, 2, replace=False))
        edges.add((min(u, v), max(u, v)))
    edges = sorted(edges)
    bonds = [int(rng.choice(chi)) for _ in edges]
    legs = [(int(rng.integers(n)), int(rng.choice(chi))) for _ in range(dangling)]
    return build_network(edges, n, bonds, dangling=legs)


@st.composite
def net_and_tree(draw, min_n=2, max_n=12, chi=(2, 3, 4), dangling=True):
    n = draw(st.integers(min_n, max_n))
    seed = draw(st.integers(0, 2**32 - 1))
    rng = np.random.default_rng(seed)
    legs = draw(st.integers(0, 2)) if dangling else 0
    net = random_network(rng, n, extra=draw(st.floats(0, 1.5)), chi=chi, dangling=legs)
    return net, random_seed(net, rng)


@pytest.fixture
def triangle():
    return build_network([(0, 1), (0, 2), (1, 2)], 3, 2)


@pytest.fixture
def pair():
    return build_network([(0, 1)], 2, 2)


@pytest.fixture
def chain5():
    return build_network([(0, 1), (1, 2), (2, 3), (3, 4)], 5, 2)


# criterion number -> (passed, detail), filled by test_acceptance
ACCEPTANCE: dict[int, tuple[bool, str]] = {}


def pytest_terminal_summary(terminalreporter):
    if not ACCEPTANCE:
        return
    terminalreporter.section("acceptance criteria")
    for k in sorted(ACCEPTANCE):
        ok, detail = ACCEPTANCE[k]
        terminalreporter.write_line(f"criterion {k:2d}: {'PASS' if ok else 'FAIL'}  {detail}")
