import numpy as np
import pytest

from gnn_zero_one.sampling import Graph


def assert_graph_invariants(g: Graph) -> None:
    adj = g.adjacency
    for v, nb in enumerate(adj):
        assert np.all(np.diff(nb) > 0), "neighbour lists must be sorted and duplicate-free"
        assert v not in nb
        assert g.degrees[v] == nb.size
        if nb.size:
            assert nb.min() >= 0 and nb.max() < g.n
        for u in nb:
            assert v in adj[u]


@pytest.fixture
def graph_invariants():
    return assert_graph_invariants
