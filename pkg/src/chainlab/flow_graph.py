"""Truncated infinite flow graphs, ergodic classes and jet interactions.

Whether ``sum_t (a_ij(t) + a_ji(t))`` diverges cannot be decided from a
finite window. Edges are declared present when the accumulated flow reaches
``threshold`` by ``horizon``; both numbers travel with the graph. The default
threshold of 1 is the unit-flow stopping rule used in the product bound.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Optional, Sequence

import numpy as np

from .chain_core import ChainWindow, backward_product
from .errors import ChainError

DEFAULT_THRESHOLD = 1.0


@dataclass(frozen=True)
class FlowGraph:
    n: int
    weights: np.ndarray  # symmetric, zero diagonal
    horizon: int
    threshold: float
    slopes: Optional[np.ndarray] = None

    @classmethod
    def from_weights(cls, weights, horizon, threshold=DEFAULT_THRESHOLD, slopes=None) -> "FlowGraph":
        w = np.asarray(weights, dtype=float)
        w = w + w.T
        np.fill_diagonal(w, 0.0)
        return cls(w.shape[0], w, horizon, threshold, slopes)

    @property
    def present(self) -> np.ndarray:
        adj = self.weights >= self.threshold
        np.fill_diagonal(adj, False)
        return adj

    def edges(self) -> list:
        adj = self.present
        return [(i, j) for i in range(self.n) for j in range(i + 1, self.n) if adj[i, j]]

    def to_tsv(self) -> str:
        lines = ["i\tj\tweight\tverdict"]
        adj = self.present
        for i in range(self.n):
            for j in range(i + 1, self.n):
                verdict = "present" if adj[i, j] else "absent"
                lines.append(f"{i}\t{j}\t{self.weights[i, j]:.17g}\t{verdict}")
        return "\n".join(lines) + "\n"


def build_flow_graph(chain: ChainWindow, horizon: int, threshold: float = DEFAULT_THRESHOLD) -> FlowGraph:
    """Accumulate ``a_ij(t) + a_ji(t)`` over ``[t0, horizon)``.

    ``slopes`` holds the per-step growth of each pair over the second half
    of the window, an advisory divergence hint and nothing more.
    """
    if threshold <= 0:
        raise ChainError("threshold must be positive")
    mats = chain.window(chain.t0, horizon)
    half = len(mats) // 2
    total = mats.sum(axis=0)
    late = mats[half:].sum(axis=0)
    span = max(1, len(mats) - half)
    g = FlowGraph.from_weights(total, horizon, threshold)
    slopes = (late + late.T) / span
    np.fill_diagonal(slopes, 0.0)
    return FlowGraph(g.n, g.weights, horizon, threshold, slopes)


class UnionFind:
    def __init__(self, size):
        self.parent = list(range(size))

    def find(self, a):
        root = a
        while self.parent[root] != root:
            root = self.parent[root]
        while self.parent[a] != root:
            self.parent[a], a = root, self.parent[a]
        return root

    def union(self, a, b):
        ra, rb = self.find(a), self.find(b)
        if ra != rb:
            # keep the smaller label as root so output order is stable
            lo, hi = min(ra, rb), max(ra, rb)
            self.parent[hi] = lo

    def groups(self) -> list:
        out = {}
        for i in range(len(self.parent)):
            out.setdefault(self.find(i), []).append(i)
        return sorted((tuple(v) for v in out.values()), key=lambda g: g[0])


def connected_components(g: FlowGraph) -> list:
    """Components over present edges, each a sorted tuple, ordered by least member."""
    uf = UnionFind(g.n)
    for i, j in g.edges():
        uf.union(i, j)
    return uf.groups()


def _row_groups(p: np.ndarray, tol: float) -> list:
    n = p.shape[0]
    d = np.abs(p[:, None, :] - p[None, :, :]).sum(axis=2)
    uf = UnionFind(n)
    for i in range(n):
        for j in range(i + 1, n):
            if d[i, j] <= tol:
                uf.union(i, j)
    return uf.groups()


@dataclass(frozen=True)
class ErgodicClasses:
    classes: list
    class_ergodic: bool
    flow_components: list
    agrees: bool
    starts: tuple
    cauchy_gap: float

    def witness(self) -> Optional[str]:
        if self.agrees:
            return None
        return f"row grouping {self.classes} vs flow components {self.flow_components}"


def ergodic_classes(chain: ChainWindow, horizon: int, tol: float = 1e-6,
                    threshold: float = DEFAULT_THRESHOLD, starts: Optional[Sequence[int]] = None) -> ErgodicClasses:
    """Group rows of ``A(horizon:s)`` that agree within ``tol`` (ℓ1).

    Several start times ``s`` are tried (default ``t0`` and an eighth and a
    quarter of the way). ``class_ergodic`` requires the grouping to be identical for all of
    them and each product to be Cauchy: ``A(horizon:s)`` and
    ``A(mid:s)``, with ``mid`` half way from ``s``, differ by at most ``tol``
    entrywise. The grouping is compared against the components of the
    truncated flow graph on ``[t0, horizon)``.
    """
    t0 = chain.t0
    span = horizon - t0
    if span < 2:
        raise ChainError("ergodic class detection needs a horizon at least two steps past t0")
    if starts is None:
        starts = sorted({t0, t0 + span // 8, t0 + span // 4})
    groupings = []
    gap = 0.0
    for s in starts:
        mid = s + (horizon - s) // 2
        p_mid = backward_product(chain, s, mid)
        p = backward_product(chain, mid, horizon) @ p_mid
        gap = max(gap, float(np.abs(p - p_mid).max()))
        groupings.append(_row_groups(p, tol))
    classes = groupings[0]
    stable = all(g == classes for g in groupings)
    components = connected_components(build_flow_graph(chain, horizon, threshold))
    return ErgodicClasses(classes, stable and gap <= tol, components, classes == components,
                          tuple(starts), gap)


@dataclass(frozen=True)
class Jet:
    """A time-indexed family of subsets of ``base``.

    ``sets`` is either a sequence (``sets[k]`` is ``J(t0 + k)``) or a
    callable ``t -> iterable``.
    """

    base: frozenset
    sets: object
    t0: int = 0

    @classmethod
    def constant(cls, base, members) -> "Jet":
        m = frozenset(members)
        return cls(frozenset(base), lambda t: m)

    def at(self, t: int) -> frozenset:
        if callable(self.sets):
            out = frozenset(self.sets(t))
        else:
            out = frozenset(self.sets[t - self.t0])
        if not out <= self.base:
            raise ChainError(f"jet value at t={t} leaves its base set")
        return out

    def is_proper(self, t1: int, t2: int) -> bool:
        return all(0 < len(self.at(t)) < len(self.base) for t in range(t1, t2))


def complement_jet(j: Jet, n: int) -> Jet:
    full = frozenset(range(n))
    return Jet(full, lambda t: full - j.at(t))


def jet_interaction(chain: ChainWindow, ju: Jet, jv: Jet, horizon: int) -> float:
    """Truncated total interaction between two disjoint jets on ``[t0, horizon)``.

    Step ``t`` contributes the weight that members of ``ju(t+1)`` place on
    ``jv(t)`` plus members of ``jv(t+1)`` on ``ju(t)``.
    """
    total = 0.0
    for t in range(chain.t0, horizon):
        a = chain.at(t)
        u_now, v_now = ju.at(t), jv.at(t)
        u_next, v_next = ju.at(t + 1), jv.at(t + 1)
        if u_now & v_now or u_next & v_next:
            raise ChainError(f"jets overlap at t={t}")
        if u_next and v_now:
            total += float(a[np.ix_(sorted(u_next), sorted(v_now))].sum())
        if v_next and u_now:
            total += float(a[np.ix_(sorted(v_next), sorted(u_now))].sum())
    return total
