"""Adjacency patterns over variable tuples and their extension weights.

A graph type records, for an ordered tuple of k variables, which unordered
pairs are adjacent; every pair is decided one way or the other. Extending a
type adds one fresh variable together with a full set of edge decisions
against the existing ones. The alpha weights below are the limiting
probabilities that a uniformly random new node realizes a given extension
pattern, either unconditionally or conditioned on being adjacent to an
anchor variable.

Weights come in float and exact `Fraction` flavors. The exact ones make the
normalization identity (the weights over all extensions of a type sum to
one) hold with no rounding at all, which the float versions inherit only
approximately.
"""

from __future__ import annotations

from dataclasses import dataclass
from fractions import Fraction
from typing import Optional, Sequence

from .errors import ConfigError

__all__ = [
    "GraphType",
    "enumerate_extensions",
    "alpha_weight",
    "alpha_weight_exact",
    "alpha_weight_local",
    "alpha_weight_local_exact",
    "alpha_weight_sbm",
]


@dataclass(frozen=True)
class GraphType:
    """Edge/non-edge decision for every pair among k ordered variables.

    `edges` holds the adjacent pairs as (i, j) with i < j; absent pairs are
    non-edges. k=0 is the unique empty type.
    """

    k: int
    edges: frozenset = frozenset()

    def __post_init__(self):
        if self.k < 0:
            raise ConfigError("variable count must be >= 0")
        norm = frozenset((int(i), int(j)) for i, j in self.edges)
        object.__setattr__(self, "edges", norm)
        for i, j in norm:
            if not (0 <= i < j < self.k):
                raise ConfigError(
                    f"pair ({i}, {j}) is not ordered and below k={self.k}")

    def has_edge(self, i: int, j: int) -> bool:
        if i == j:
            raise ConfigError("graph types have no self pairs")
        return (min(i, j), max(i, j)) in self.edges

    def bits(self) -> int:
        """Pack the pair decisions into an int, pairs in lexicographic order."""
        out = 0
        pos = 0
        for i in range(self.k):
            for j in range(i + 1, self.k):
                if (i, j) in self.edges:
                    out |= 1 << pos
                pos += 1
        return out

    @classmethod
    def from_bits(cls, k: int, bits: int) -> "GraphType":
        npairs = k * (k - 1) // 2
        if not (0 <= bits < (1 << npairs) if npairs else bits == 0):
            raise ConfigError(f"bit pattern {bits} out of range for k={k}")
        edges = set()
        pos = 0
        for i in range(k):
            for j in range(i + 1, k):
                if (bits >> pos) & 1:
                    edges.add((i, j))
                pos += 1
        return cls(k, frozenset(edges))

    def restrict(self, m: int) -> "GraphType":
        """Induced type on the first m variables."""
        if not (0 <= m <= self.k):
            raise ConfigError(f"cannot restrict a {self.k}-type to {m} variables")
        return GraphType(m, frozenset(e for e in self.edges if e[1] < m))


def enumerate_extensions(t: GraphType,
                         anchor: Optional[int] = None) -> list:
    """All one-variable extensions of t, optionally forced adjacent to anchor.

    The new variable gets index t.k. Without an anchor there are 2^k
    extensions (every subset of possible new edges); with anchor i there are
    2^(k-1), all containing the edge (i, t.k). Order is deterministic: the
    edge subsets are swept as binary counters over the free pair slots.
    """
    if anchor is not None and not (0 <= anchor < t.k):
        raise ConfigError(f"anchor {anchor} out of range for a {t.k}-type")
    free = [i for i in range(t.k) if anchor is None or i != anchor]
    out = []
    for mask in range(1 << len(free)):
        edges = set(t.edges)
        if anchor is not None:
            edges.add((anchor, t.k))
        for slot, i in enumerate(free):
            if (mask >> slot) & 1:
                edges.add((i, t.k))
        out.append(GraphType(t.k + 1, frozenset(edges)))
    return out


def _new_edge_vars(t: GraphType, t_ext: GraphType) -> list:
    """Validate that t_ext extends t; return the vars adjacent to the new one."""
    if t_ext.k != t.k + 1:
        raise ConfigError(
            f"extension must have {t.k + 1} variables, got {t_ext.k}")
    if t_ext.restrict(t.k) != t:
        raise ConfigError("extension disagrees with the base type on old pairs")
    return [i for i in range(t.k) if (i, t.k) in t_ext.edges]


def _limit_fraction(p_limit) -> Fraction:
    p = Fraction(p_limit)
    if not (0 <= p <= 1):
        raise ConfigError(f"edge-probability limit {p_limit} outside [0, 1]")
    return p


def alpha_weight_exact(t: GraphType, t_ext: GraphType, p_limit) -> Fraction:
    """Exact weight p^r (1-p)^(k-r) where r counts the new variable's edges."""
    r = len(_new_edge_vars(t, t_ext))
    p = _limit_fraction(p_limit)
    return p ** r * (1 - p) ** (t.k - r)


def alpha_weight(t: GraphType, t_ext: GraphType, p_limit) -> float:
    """Float weight of one unanchored extension; sums to 1 over all of them."""
    return float(alpha_weight_exact(t, t_ext, p_limit))


def alpha_weight_local_exact(t: GraphType, t_ext: GraphType, anchor: int,
                             p_limit) -> Fraction:
    """Exact anchored weight p^r (1-p)^(k-1-r), r excluding the anchor edge.

    The extension must contain the anchor edge: anchored extensions model a
    node drawn from the anchor's neighborhood, so that edge carries no
    probability factor.
    """
    if not (0 <= anchor < t.k):
        raise ConfigError(f"anchor {anchor} out of range for a {t.k}-type")
    touched = _new_edge_vars(t, t_ext)
    if anchor not in touched:
        raise ConfigError("anchored extension must contain the anchor edge")
    r = len(touched) - 1
    p = _limit_fraction(p_limit)
    return p ** r * (1 - p) ** (t.k - 1 - r)


def alpha_weight_local(t: GraphType, t_ext: GraphType, anchor: int,
                       p_limit) -> float:
    return float(alpha_weight_local_exact(t, t_ext, anchor, p_limit))


def alpha_weight_sbm(t: GraphType, t_ext: GraphType,
                     communities: Sequence[int],
                     fractions: Sequence[float],
                     p,
                     anchor: Optional[int] = None) -> float:
    """Weight of an extension whose variables carry block-model communities.

    `communities` assigns 1-based labels to all k+1 variables (the last one
    is the new variable). The weight is the probability that a random node
    lands in the new variable's community and realizes exactly the
    extension's edge pattern against the old variables at the block edge
    probabilities:

        q_c * prod_{i edge} P[c_i, c] * prod_{i non-edge} (1 - P[c_i, c])

    With an anchor, the anchor edge must be present and its factor is the
    conditional P[c_anchor, c] as usual; summing over patterns and c then
    gives sum_c q_c P[c_anchor, c] rather than 1, the anchored normalizer.
    """
    touched = set(_new_edge_vars(t, t_ext))
    if anchor is not None:
        if not (0 <= anchor < t.k):
            raise ConfigError(f"anchor {anchor} out of range for a {t.k}-type")
        if anchor not in touched:
            raise ConfigError("anchored extension must contain the anchor edge")
    m = len(fractions)
    pm = [list(row) for row in p]
    if len(pm) != m or any(len(row) != m for row in pm):
        raise ConfigError("block probability matrix must be M x M")
    labels = [int(c) for c in communities]
    if len(labels) != t_ext.k:
        raise ConfigError(
            f"need {t_ext.k} community labels, got {len(labels)}")
    if any(not (1 <= c <= m) for c in labels):
        raise ConfigError(f"community labels must lie in 1..{m}")
    c_new = labels[-1]
    weight = float(fractions[c_new - 1])
    for i in range(t.k):
        pic = float(pm[labels[i] - 1][c_new - 1])
        if not (0.0 <= pic <= 1.0):
            raise ConfigError("block probabilities must lie in [0, 1]")
        weight *= pic if i in touched else (1.0 - pic)
    return weight
