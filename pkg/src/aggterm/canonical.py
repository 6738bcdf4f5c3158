"""Exact canonical codes for rooted subgraphs.

Two rooted subgraphs get the same code byte string if and only if there is an
isomorphism between them that maps the i-th root to the i-th root. Codes are
self-describing (root count, node count, full adjacency bitset under the
canonical labeling), so they can be decoded back into a graph.

Rooted forests take a linear-time subtree-encoding path. Everything else runs
individualization plus color refinement with pruning by discovered
automorphisms, which keeps highly symmetric inputs (stars, cliques) from
blowing up the search.
"""

from __future__ import annotations

import sys
from dataclasses import dataclass

from .errors import ConfigError, NeighborhoodTooLargeError
from .graphs import RootedGraph

DEFAULT_SIZE_CAP = 64
_MAGIC = b"RN1"


@dataclass(frozen=True)
class RootedNeighborhoodCode:
    code: bytes
    k: int
    radius: int


# ---------------------------------------------------------------------------
# refinement-based search (general case)
# ---------------------------------------------------------------------------


def _refine(adj, colors):
    """Equitable refinement; new color ids are assigned in signature order."""
    n = len(adj)
    while True:
        sigs = [(colors[v], tuple(sorted(colors[w] for w in adj[v]))) for v in range(n)]
        remap = {s: i for i, s in enumerate(sorted(set(sigs)))}
        new = [remap[s] for s in sigs]
        if new == colors:
            return new
        colors = new


def _edge_bytes(adj_mask, labeling):
    """Upper-triangle adjacency bits of the relabeled graph, row-major."""
    n = len(labeling)
    bits = bytearray((n * (n - 1) // 2 + 7) // 8)
    pos = 0
    for i in range(n):
        mi = adj_mask[labeling[i]]
        for j in range(i + 1, n):
            if (mi >> labeling[j]) & 1:
                bits[pos >> 3] |= 1 << (pos & 7)
            pos += 1
    return bytes(bits)


class _Search:
    def __init__(self, adj, adj_mask):
        self.adj = adj
        self.adj_mask = adj_mask
        self.best_code = None
        self.best_labeling = None
        self.first_code = None
        self.first_labeling = None
        self.gens: list[tuple[int, ...]] = []
        # global orbit partition; a generator is kept only when it merges
        # something here, which bounds the list at n-1 informative entries
        self._orbit = list(range(len(adj)))

    def run(self, colors):
        self._visit(colors, [])
        return self.best_labeling

    def _gfind(self, x):
        orbit = self._orbit
        while orbit[x] != x:
            orbit[x] = orbit[orbit[x]]
            x = orbit[x]
        return x

    def _maybe_gen(self, ref_labeling, labeling):
        n = len(labeling)
        sigma = [0] * n
        for i in range(n):
            sigma[ref_labeling[i]] = labeling[i]
        merged = False
        for w in range(n):
            a, b = self._gfind(w), self._gfind(sigma[w])
            if a != b:
                self._orbit[a] = b
                merged = True
        if merged:
            self.gens.append(tuple(sigma))

    def _visit(self, colors, path):
        colors = _refine(self.adj, colors)
        n = len(colors)
        ncolors = max(colors) + 1
        cells = [[] for _ in range(ncolors)]
        for v, c in enumerate(colors):
            cells[c].append(v)
        target = next((cell for cell in cells if len(cell) > 1), None)
        if target is None:
            labeling = [0] * n
            for v, c in enumerate(colors):
                labeling[c] = v
            code = _edge_bytes(self.adj_mask, labeling)
            if self.first_code is None:
                self.first_code = code
                self.first_labeling = labeling
            elif code == self.first_code:
                self._maybe_gen(self.first_labeling, labeling)
            if self.best_code is None or code < self.best_code:
                self.best_code = code
                self.best_labeling = labeling
            elif code == self.best_code and labeling is not self.best_labeling:
                self._maybe_gen(self.best_labeling, labeling)
            return
        # orbit pruning: skip candidates equivalent to an earlier one under an
        # automorphism that fixes every individualized vertex on this path
        parent = list(range(n))

        def find(x):
            while parent[x] != x:
                parent[x] = parent[parent[x]]
                x = parent[x]
            return x

        def absorb(g):
            if all(g[p] == p for p in path):
                for w in range(n):
                    rw_, rg = find(w), find(g[w])
                    if rw_ != rg:
                        parent[rw_] = rg

        scanned = 0
        tried_roots = set()
        cv = colors[target[0]]
        for v in target:
            # generators found deeper in the search prune later siblings too
            while scanned < len(self.gens):
                absorb(self.gens[scanned])
                scanned += 1
            root = find(v)
            if root in tried_roots:
                continue
            tried_roots.add(root)
            child = []
            for w, c in enumerate(colors):
                if c < cv or w == v:
                    child.append(c)
                elif c == cv:
                    child.append(c + 1)
                else:
                    child.append(c + 1)
            self._visit(child, path + [v])


# ---------------------------------------------------------------------------
# twin reduction
# ---------------------------------------------------------------------------


def _twin_reduce(adj_mask, colors):
    """Collapse classes of same-colored vertices with identical neighborhoods.

    Vertices sharing an open neighborhood (false twins, necessarily
    non-adjacent) or a closed neighborhood (true twins, pairwise adjacent)
    are interchangeable by automorphisms, so the search only needs one
    representative; class size and twin kind fold into the quotient color.
    Rounds alternate the two kinds until nothing merges. Returns
    (classes, masks, colors) for the quotient, where classes[i] lists the
    original vertices behind quotient vertex i.
    """
    classes = [[v] for v in range(len(adj_mask))]
    cur_mask = list(adj_mask)
    cur_colors = list(colors)
    changed = True
    while changed and len(classes) > 1:
        changed = False
        for closed in (False, True):
            m = len(classes)
            groups = {}
            for i in range(m):
                key = (cur_colors[i], cur_mask[i] | ((1 << i) if closed else 0))
                groups.setdefault(key, []).append(i)
            if all(len(g) == 1 for g in groups.values()):
                continue
            changed = True
            drop = set()
            for g in groups.values():
                rep = g[0]
                for other in g[1:]:
                    drop.add(other)
                    # concatenate, never sort: merged classes are blocks of
                    # equal size whose members are only interchangeable while
                    # each block stays contiguous in the final ordering
                    classes[rep] = classes[rep] + classes[other]
            keep = [i for i in range(m) if i not in drop]
            remap = {old: new for new, old in enumerate(keep)}
            new_mask = []
            for i in keep:
                mask = 0
                row = cur_mask[i]
                for j in keep:
                    if j != i and (row >> j) & 1:
                        mask |= 1 << remap[j]
                new_mask.append(mask)
            new_classes = [classes[i] for i in keep]
            keys = [(cur_colors[i], len(new_classes[pos]), closed)
                    for pos, i in enumerate(keep)]
            order = {key: pos for pos, key in enumerate(sorted(set(keys)))}
            cur_colors = [order[key] for key in keys]
            cur_mask = new_mask
            classes = new_classes
    return classes, cur_mask, cur_colors


# ---------------------------------------------------------------------------
# forest fast path
# ---------------------------------------------------------------------------


def _forest_labeling(rg: RootedGraph):
    """Canonical labeling for rooted forests, or None if not applicable."""
    n = rg.n
    comp = [-1] * n
    comps = []
    for start in range(n):
        if comp[start] >= 0:
            continue
        cid = len(comps)
        members = [start]
        comp[start] = cid
        queue = [start]
        while queue:
            u = queue.pop()
            for w in rg.adj[u]:
                if comp[w] < 0:
                    comp[w] = cid
                    members.append(w)
                    queue.append(w)
        comps.append(members)
    root_pos = {v: i for i, v in enumerate(rg.roots)}
    comp_infos = []
    for members in comps:
        edges = sum(len(rg.adj[v]) for v in members) // 2
        if edges != len(members) - 1:
            return None  # has a cycle
        marks = sorted(root_pos[v] for v in members if v in root_pos)
        if not marks:
            return None  # rootless tree: leave it to the general search
        comp_infos.append((marks[0], members))
    comp_infos.sort(key=lambda t: t[0])

    enc_memo: dict[int, tuple] = {}

    def encode(v, parent):
        kids = sorted(encode(w, v) for w in rg.adj[v] if w != parent)
        enc = (root_pos.get(v, -1), tuple(kids))
        enc_memo[v] = enc
        return enc

    order = []

    def emit(v, parent):
        if v not in root_pos:
            order.append(v)
        kids = sorted((w for w in rg.adj[v] if w != parent),
                      key=lambda w: (enc_memo[w], w))
        for w in kids:
            emit(w, v)

    for first_mark, members in comp_infos:
        tree_root = rg.roots[first_mark]
        encode(tree_root, -1)
        emit(tree_root, -1)
    return list(rg.roots) + order


# ---------------------------------------------------------------------------
# public api
# ---------------------------------------------------------------------------


def canonical_labeling(rg: RootedGraph, size_cap: int = DEFAULT_SIZE_CAP) -> list[int]:
    """Position -> vertex map; the i-th root always lands at position i."""
    if rg.n > size_cap:
        raise NeighborhoodTooLargeError(rg.n, size_cap)
    if len(set(rg.roots)) != len(rg.roots):
        raise ConfigError("roots must be distinct")
    labeling = _forest_labeling(rg)
    if labeling is not None:
        return labeling
    k = rg.k
    colors = [k] * rg.n
    for i, r in enumerate(rg.roots):
        colors[r] = i
    adj_mask = [0] * rg.n
    for v, row in enumerate(rg.adj):
        for w in row:
            adj_mask[v] |= 1 << w
    classes, q_mask, q_colors = _twin_reduce(adj_mask, colors)
    old_limit = sys.getrecursionlimit()
    sys.setrecursionlimit(max(old_limit, 4 * rg.n + 100))
    try:
        if len(classes) < rg.n:
            q_adj = [[j for j in range(len(classes)) if (q_mask[i] >> j) & 1]
                     for i in range(len(classes))]
            q_lab = _Search(q_adj, q_mask).run(q_colors)
            labeling = []
            for pos in range(len(classes)):
                labeling.extend(classes[q_lab[pos]])
            return labeling
        adj = [list(row) for row in rg.adj]
        return _Search(adj, adj_mask).run(colors)
    finally:
        sys.setrecursionlimit(old_limit)


def canonical_code(rg: RootedGraph, size_cap: int = DEFAULT_SIZE_CAP) -> RootedNeighborhoodCode:
    """Canonical byte string for the rooted-isomorphism class of rg."""
    labeling = canonical_labeling(rg, size_cap)
    adj_mask = [0] * rg.n
    for v, row in enumerate(rg.adj):
        for w in row:
            adj_mask[v] |= 1 << w
    body = _edge_bytes(adj_mask, labeling)
    header = _MAGIC + bytes([rg.k]) + rg.n.to_bytes(2, "big")
    return RootedNeighborhoodCode(code=header + body, k=rg.k, radius=rg.radius)


def decode_code(code: bytes) -> RootedGraph:
    """Rebuild the canonically labeled rooted graph from its code."""
    if code[:3] != _MAGIC:
        raise ConfigError("not a rooted-neighborhood code")
    k = code[3]
    n = int.from_bytes(code[4:6], "big")
    bits = code[6:]
    adj: list[list[int]] = [[] for _ in range(n)]
    pos = 0
    for i in range(n):
        for j in range(i + 1, n):
            if (bits[pos >> 3] >> (pos & 7)) & 1:
                adj[i].append(j)
                adj[j].append(i)
            pos += 1
    # radius: how far the ball actually extends from the roots
    dist = {r: 0 for r in range(k)}
    frontier = list(range(k))
    radius = 0
    while frontier:
        nxt = []
        for u in frontier:
            for w in adj[u]:
                if w not in dist:
                    dist[w] = dist[u] + 1
                    radius = max(radius, dist[w])
                    nxt.append(w)
        frontier = nxt
    return RootedGraph(adj=tuple(tuple(sorted(row)) for row in adj),
                       roots=tuple(range(k)), radius=radius)
