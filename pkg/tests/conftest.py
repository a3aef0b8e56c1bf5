import numpy as np
import pytest

from gcpn.molgraph import add_atom, add_bond, single_atom


@pytest.fixture
def rng():
    return np.random.default_rng(1234)


def random_graph(rng, n_lo=4, n_hi=8, symbols=("C", "C", "C", "N", "O", "S", "F", "Cl")):
    """Random valid, connected molecule: grow a tree then try a few ring bonds."""
    n = int(rng.integers(n_lo, n_hi + 1))
    g = single_atom("C")
    for _ in range(20 * n):
        if g.n >= n:
            break
        sym = symbols[int(rng.integers(len(symbols)))]
        u = int(rng.integers(g.n))
        h = add_atom(g, sym)
        h2, viol = add_bond(h, u, h.n - 1, 1)
        if viol is None:
            g = h2
    for _ in range(2):
        u, v = (int(x) for x in rng.integers(g.n, size=2))
        if u != v:
            g2, viol = add_bond(g, u, v, int(rng.integers(1, 3)))
            if viol is None:
                g = g2
    return g


def nx_isomorphic(g1, g2):
    """Independent oracle: networkx VF2 with atom-type and bond-order matching."""
    import networkx as nx

    def to_nx(g):
        h = nx.Graph()
        for i in range(g.n):
            h.add_node(i, atom=int(g.atoms[i]))
        for u, v, order in g.edges():
            h.add_edge(u, v, order=order)
        return h

    return nx.is_isomorphic(to_nx(g1), to_nx(g2), node_match=lambda a, b: a["atom"] == b["atom"],
                            edge_match=lambda a, b: a["order"] == b["order"])
