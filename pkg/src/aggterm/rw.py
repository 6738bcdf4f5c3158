"""Return-probability encodings of random walks.

Entry i (1-based, i = 1..kmax) is the probability that a uniform random walk
of length i starting at v ends back at v. Isolated nodes get the zero vector.
"""

from __future__ import annotations

from typing import Optional

import numpy as np

from .graphs import FeaturedGraph
from .rng import stream

EXACT_BALL_LIMIT = 10_000  # default method switches to sampling past this
DEFAULT_WALKS = 100_000
_DENSE_BATCH_LIMIT = 2048  # below this, batch encodings use dense matrix powers


def _gather_neighbors(graph: FeaturedGraph, nodes: np.ndarray) -> np.ndarray:
    """All neighbors of `nodes`, concatenated (with multiplicity)."""
    counts = graph.degrees[nodes]
    total = int(counts.sum())
    if total == 0:
        return np.array([], dtype=np.int64)
    seg = np.concatenate([[0], np.cumsum(counts)])
    intra = np.arange(total) - np.repeat(seg[:-1], counts)
    flat = np.repeat(graph.indptr[nodes], counts) + intra
    return graph.indices[flat]


def _ball(graph: FeaturedGraph, v: int, radius: int, limit: Optional[int] = None):
    """Sorted nodes within `radius` of v, or None once `limit` is exceeded."""
    seen = np.zeros(graph.n, dtype=bool)
    seen[v] = True
    count = 1
    frontier = np.array([v], dtype=np.int64)
    for _ in range(radius):
        nbrs = _gather_neighbors(graph, frontier)
        if len(nbrs) == 0:
            break
        nbrs = np.unique(nbrs)
        new = nbrs[~seen[nbrs]]
        if len(new) == 0:
            break
        seen[new] = True
        count += len(new)
        if limit is not None and count > limit:
            return None
        frontier = new
    return np.nonzero(seen)[0]


def _exact_local(graph: FeaturedGraph, v: int, kmax: int, ball: np.ndarray) -> np.ndarray:
    # walks of length <= kmax never leave the kmax-ball, so the DP below is exact
    b = len(ball)
    deg = graph.degrees
    if b == graph.n:
        src = np.repeat(np.arange(b, dtype=np.int64), deg)
        dst = graph.indices
        v_local = v
        degs_local = deg.astype(np.float64)
    else:
        local_of = np.full(graph.n, -1, dtype=np.int64)
        local_of[ball] = np.arange(b)
        counts = deg[ball]
        rep = np.repeat(np.arange(b, dtype=np.int64), counts)
        nbrs = _gather_neighbors(graph, ball)
        keep = local_of[nbrs] >= 0
        src = rep[keep]
        dst = local_of[nbrs[keep]]
        v_local = int(local_of[v])
        degs_local = deg[ball].astype(np.float64)
    inv_deg = np.zeros(b)
    nz = degs_local > 0
    inv_deg[nz] = 1.0 / degs_local[nz]
    prob = np.zeros(b)
    prob[v_local] = 1.0
    out = np.zeros(kmax)
    for step in range(kmax):
        prob = np.bincount(dst, weights=prob[src] * inv_deg[src], minlength=b)
        out[step] = prob[v_local]
    return out


def _monte_carlo(graph: FeaturedGraph, v: int, kmax: int, walks: int,
                 rng: np.random.Generator) -> np.ndarray:
    deg = graph.degrees
    cur = np.full(walks, v, dtype=np.int64)
    out = np.zeros(kmax)
    for step in range(kmax):
        picks = rng.integers(0, deg[cur])
        cur = graph.indices[graph.indptr[cur] + picks]
        out[step] = np.count_nonzero(cur == v) / walks
    return out


def rw_encoding(graph: FeaturedGraph, v: int, kmax: int, method: Optional[str] = None,
                walks: int = DEFAULT_WALKS, seed: int = 0) -> np.ndarray:
    """Length-kmax return-probability vector for node v.

    method None picks exact_local while the kmax-hop ball stays at or below
    10^4 nodes, and falls back to monte_carlo (10^5 walks) beyond that.
    """
    if kmax < 1:
        raise ValueError("kmax must be >= 1")
    if graph.degrees[v] == 0:
        return np.zeros(kmax)
    if method is None:
        ball = _ball(graph, v, kmax, limit=EXACT_BALL_LIMIT)
        if ball is not None:
            return _exact_local(graph, v, kmax, ball)
        method = "monte_carlo"
    if method == "exact_local":
        return _exact_local(graph, v, kmax, _ball(graph, v, kmax))
    if method == "monte_carlo":
        rng = stream(seed, "rw", v, kmax)
        return _monte_carlo(graph, v, kmax, walks, rng)
    raise ValueError(f"unknown rw method {method!r}")


def rw_encoding_all(graph: FeaturedGraph, kmax: int) -> np.ndarray:
    """(n, kmax) matrix of return probabilities for every node.

    Small graphs use dense transition-matrix powers; larger ones fall back to
    the per-node routine (cheap when neighborhoods are small).
    """
    n = graph.n
    if n <= _DENSE_BATCH_LIMIT:
        deg = graph.degrees.astype(np.float64)
        trans = np.zeros((n, n))
        rows = np.repeat(np.arange(n), graph.degrees)
        if len(rows):
            trans[rows, graph.indices] = 1.0 / deg[rows]
        out = np.zeros((n, kmax))
        power = trans
        out[:, 0] = np.diag(power)
        for step in range(1, kmax):
            power = power @ trans
            out[:, step] = np.diag(power)
        out[graph.degrees == 0] = 0.0
        return out
    return np.stack([rw_encoding(graph, v, kmax) for v in range(n)])
