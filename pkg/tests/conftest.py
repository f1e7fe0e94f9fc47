import itertools

import numpy as np
import pytest

from rotconsensus.graph import Configuration, Graph, build_laplacian, compute_stress_matrix
from rotconsensus.scenarios import FORMATION_EDGES, FORMATION_POSITIONS, RENDEZVOUS_EDGES

ACCEPTANCE_LINES = []


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE_LINES:
        terminalreporter.section("acceptance criteria")
        for line in ACCEPTANCE_LINES:
            terminalreporter.write_line(line)


def random_connected_graph(rng, n, p=0.5, weighted=False):
    while True:
        edges = [
            (i, j, rng.uniform(0.2, 3.0) if weighted else 1.0)
            for i, j in itertools.combinations(range(n), 2)
            if rng.random() < p
        ]
        try:
            return Graph(n, tuple(edges))
        except Exception:
            continue


def k4_core_graph(rng, n, extra=0):
    """K4 plus vertices glued onto existing triangles, plus a few extra edges."""
    edges = set(itertools.combinations(range(4), 2))
    triangles = list(itertools.combinations(range(4), 3))
    for v in range(4, n):
        tri = triangles[rng.integers(len(triangles))]
        edges |= {(u, v) for u in tri}
        triangles += [(tri[0], tri[1], v), (tri[0], tri[2], v), (tri[1], tri[2], v)]
    missing = [e for e in itertools.combinations(range(n), 2) if e not in edges]
    for k in rng.permutation(len(missing))[:extra]:
        edges.add(missing[k])
    return Graph(n, tuple(sorted(edges)))


@pytest.fixture
def rng():
    return np.random.default_rng(20240611)


@pytest.fixture(scope="session")
def cycle4_laplacian():
    return build_laplacian(Graph(4, ((0, 1), (1, 2), (2, 3), (0, 3))))


@pytest.fixture(scope="session")
def rendezvous_graph():
    return Graph.from_one_based(4, RENDEZVOUS_EDGES)


@pytest.fixture(scope="session")
def rendezvous_laplacian(rendezvous_graph):
    return build_laplacian(rendezvous_graph)


@pytest.fixture(scope="session")
def formation_graph():
    return Graph.from_one_based(7, FORMATION_EDGES)


@pytest.fixture(scope="session")
def formation_config():
    return Configuration(np.array(FORMATION_POSITIONS, dtype=float))


@pytest.fixture(scope="session")
def formation_stress(formation_graph, formation_config):
    return compute_stress_matrix(formation_graph, formation_config)
