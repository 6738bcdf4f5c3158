"""Canonical codes: isomorphism invariance and soundness on hard pairs."""

import numpy as np
import pytest

from aggterm.canonical import canonical_code, canonical_labeling, decode_code
from aggterm.errors import NeighborhoodTooLargeError
from aggterm.graphs import RootedGraph, rooted_neighborhood
from conftest import rand_graph


def rooted(adj, k=1, radius=3):
    return RootedGraph(adj=tuple(tuple(sorted(r)) for r in adj),
                       roots=tuple(range(k)), radius=radius)


def permute(rg: RootedGraph, perm) -> RootedGraph:
    """Relabel non-root nodes by perm (which must fix the roots)."""
    adj = [()] * rg.n
    for v, row in enumerate(rg.adj):
        adj[perm[v]] = tuple(sorted(perm[u] for u in row))
    return RootedGraph(adj=tuple(adj), roots=rg.roots, radius=rg.radius)


def cycle(n):
    return [( (i - 1) % n, (i + 1) % n ) for i in range(n)]


def test_code_invariant_under_relabeling():
    rng = np.random.default_rng(77)
    for trial in range(60):
        g = rand_graph(rng, 14, 1)
        k = int(rng.integers(1, min(3, g.n) + 1))
        rg = rooted_neighborhood(g, list(range(k)), 2)
        base = canonical_code(rg).code
        for _ in range(3):
            perm = np.concatenate([np.arange(k),
                                   k + rng.permutation(rg.n - k)])
            assert canonical_code(permute(rg, perm)).code == base


def test_roots_are_distinguished():
    # path a-b: rooted at the end vs rooted at both nodes in each order
    p = rooted([[1], [0, 2], [1]], k=1)
    q = RootedGraph(adj=p.adj, roots=(0, 1), radius=p.radius)
    assert canonical_code(p).code != canonical_code(q).code


def test_root_order_matters():
    # path 0-1-2 rooted (end, middle) vs (middle, end)
    adj = ((1,), (0, 2), (1,))
    a = RootedGraph(adj=adj, roots=(0, 1), radius=2)
    badj = ((1, 2), (0,), (0,))  # same path renumbered: middle first
    b = RootedGraph(adj=badj, roots=(0, 1), radius=2)
    assert canonical_code(a).code != canonical_code(b).code


def test_two_regular_pair_distinguished():
    c6 = rooted(cycle(6))
    two_triangles = rooted([[1, 2], [0, 2], [0, 1],
                            [4, 5], [3, 5], [3, 4]])
    assert canonical_code(c6).code != canonical_code(two_triangles).code


def test_three_regular_pair_distinguished():
    # K33 and the triangular prism: both 3-regular on 6 nodes
    k33 = rooted([[3, 4, 5], [3, 4, 5], [3, 4, 5],
                  [0, 1, 2], [0, 1, 2], [0, 1, 2]])
    prism = rooted([[1, 2, 3], [0, 2, 4], [0, 1, 5],
                    [0, 4, 5], [1, 3, 5], [2, 3, 4]])
    assert canonical_code(k33).code != canonical_code(prism).code


def test_exhaustive_soundness_n5():
    """Codes on all rooted graphs with 5 nodes agree exactly with brute force.

    Two graphs get the same code iff some root-fixing permutation maps one
    to the other.
    """
    from itertools import combinations, permutations
    pairs = list(combinations(range(5), 2))
    rng = np.random.default_rng(5)
    masks = rng.choice(1 << len(pairs), size=60, replace=False)
    graphs = []
    for mask in masks:
        adj = [[] for _ in range(5)]
        for bit, (i, j) in enumerate(pairs):
            if (int(mask) >> bit) & 1:
                adj[i].append(j)
                adj[j].append(i)
        graphs.append(rooted(adj))

    def brute_iso(a, b):
        for perm in permutations(range(1, 5)):
            p = (0,) + perm
            if all(tuple(sorted(p[u] for u in a.adj[v])) == b.adj[p[v]]
                   for v in range(5)):
                return True
        return False

    codes = [canonical_code(g).code for g in graphs]
    for i in range(len(graphs)):
        for j in range(i + 1, len(graphs)):
            same = codes[i] == codes[j]
            assert same == brute_iso(graphs[i], graphs[j]), (i, j)


def test_decode_round_trip():
    rng = np.random.default_rng(78)
    for _ in range(40):
        g = rand_graph(rng, 12, 1)
        rg = rooted_neighborhood(g, [0], 2)
        code = canonical_code(rg)
        back = decode_code(code.code)
        assert back.k == rg.k and back.n == rg.n
        assert back.num_edges() == rg.num_edges()
        assert canonical_code(back).code == code.code


def test_labeling_is_permutation():
    rng = np.random.default_rng(79)
    g = rand_graph(rng, 15, 1)
    rg = rooted_neighborhood(g, [0, 1], 2)
    lab = canonical_labeling(rg)
    assert sorted(lab) == list(range(rg.n))
    assert lab[0] == 0 and lab[1] == 1  # roots keep their slots


def test_size_cap():
    big = rooted([[j for j in range(40) if j != i] for i in range(40)])
    with pytest.raises(NeighborhoodTooLargeError):
        canonical_code(big, size_cap=20)
