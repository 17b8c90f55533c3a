import sys
from pathlib import Path

import numpy as np
import pytest

sys.path.insert(0, str(Path(__file__).parent))

from graphcert.graph import Graph  # noqa: E402


def make_graph(n, edges, dim=2, seed=0, directed=False, labels=None):
    rng = np.random.default_rng(seed)
    x = rng.standard_normal((n, dim))
    return Graph.build({u: x[u] for u in range(n)}, edges, directed=directed, labels=labels)


def random_graph(rng, max_nodes=8, p=None, dim=2, directed=False):
    n = int(rng.integers(1, max_nodes + 1))
    p = rng.uniform(0.1, 0.9) if p is None else p
    if directed:
        pairs = [(u, v) for u in range(n) for v in range(n) if u != v]
    else:
        pairs = [(u, v) for u in range(n) for v in range(u + 1, n)]
    edges = [e for e in pairs if rng.random() < p]
    x = rng.standard_normal((n, dim))
    return Graph.build({u: x[u] for u in range(n)}, edges, directed=directed)


@pytest.fixture
def path4():
    return make_graph(4, [(0, 1), (1, 2), (2, 3)])


ACCEPTANCE_LINES: list[str] = []


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE_LINES:
        terminalreporter.section("acceptance criteria")
        for line in sorted(ACCEPTANCE_LINES, key=lambda s: int(s.split()[1].rstrip(":"))):
            terminalreporter.write_line(line)
