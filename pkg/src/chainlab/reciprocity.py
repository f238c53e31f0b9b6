"""Reciprocity (cut balance), approximate reciprocity and the static
irreducibility equivalence.

Approximate reciprocity asks for constants ``p0, beta`` with

    p0 * sum_{t=ta}^{tb-1} 1ᵀA_{S S̄}(t)1  <=  sum_{t=ta}^{tb-1} 1ᵀA_{S̄ S}(t)1 + beta

for every cut ``S`` and window ``ta < tb``. On a finite horizon the smallest
admissible ``beta`` is a maximum-subarray problem per cut, solved here with
prefix sums and a running minimum.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Optional

import numpy as np

from .chain_core import (
    TOL_STOCH,
    ChainWindow,
    SubsetCut,
    cut_flow_table,
    cut_masks,
)
from .errors import ChainError, ChainIndexError, InternalConsistencyError

EXHAUSTIVE_MAX_N = 16
SAMPLED_CUTS = 1 << 14


@dataclass(frozen=True)
class ReciprocityCertificate:
    p0: float
    beta_required: float
    witness: Optional[tuple]  # (SubsetCut, t_start, t_end) or None when nothing is positive
    horizon: int
    exhaustive: bool
    t0: int = 0

    @property
    def witness_mask(self) -> int:
        return self.witness[0].mask if self.witness else 0

    def to_text(self) -> str:
        if self.witness:
            cut, ta, tb = self.witness
            wmask, wwin = f"{cut.mask:#x} {cut}", f"[{ta},{tb})"
        else:
            wmask, wwin = "none", "none"
        return "\n".join([
            f"p0\t{self.p0!r}",
            f"beta_required\t{self.beta_required!r}",
            f"witness_mask\t{wmask}",
            f"witness_window\t{wwin}",
            f"horizon\t{self.horizon}",
            f"exhaustive\t{str(self.exhaustive).lower()}",
        ]) + "\n"


def cut_mask_rows(n: int, seed: int = 0) -> tuple:
    """Indicator rows to scan and whether the scan is exhaustive.

    Above ``EXHAUSTIVE_MAX_N`` nodes: all singletons, all co-singletons and a
    seeded uniform sample of ``SAMPLED_CUTS`` masks.
    """
    if n <= EXHAUSTIVE_MAX_N:
        return cut_masks(n), True
    full = (1 << n) - 1
    rng = np.random.default_rng(seed)
    chosen = {1 << i for i in range(n)} | {full ^ (1 << i) for i in range(n)}
    while len(chosen) < 2 * n + SAMPLED_CUTS:
        m = int(rng.integers(1, full))
        chosen.add(m)
    masks = np.array(sorted(chosen), dtype=np.int64)
    rows = ((masks[:, None] >> np.arange(n)[None, :]) & 1).astype(float)
    return rows, False


def _flows(mats: np.ndarray, rows: np.ndarray):
    """Forward flows ``S -> S̄`` and backward flows ``S̄ -> S`` per cut row."""
    forward = cut_flow_table(mats, rows)
    backward = cut_flow_table(mats, 1.0 - rows)
    return forward, backward


def max_window_excess(diff: np.ndarray):
    """Max over ``0 <= a < b <= T`` of ``sum(diff[a:b])`` for every column.

    Returns ``(values, starts, ends)``. ``diff`` has shape ``(T, K)``.
    """
    T, K = diff.shape
    prefix = np.zeros((T + 1, K))
    np.cumsum(diff, axis=0, out=prefix[1:])
    # best start for window ending at b is argmin prefix[0:b]
    run_min = np.minimum.accumulate(prefix[:-1], axis=0)
    gains = prefix[1:] - run_min
    end = np.argmax(gains, axis=0)
    values = gains[end, np.arange(K)]
    starts = np.empty(K, dtype=int)
    for k in range(K):
        b = end[k] + 1
        starts[k] = int(np.argmin(prefix[:b, k]))
    return values, starts, end + 1


def approximate_reciprocity_beta(chain: ChainWindow, p0: float, horizon: Optional[int] = None,
                                 seed: int = 0) -> ReciprocityCertificate:
    """Smallest ``beta`` making the approximate-reciprocity inequality hold
    on every cut and every window inside ``[t0, horizon)``.

    The verdict is horizon-bounded: it certifies the finite window only.
    """
    if not 0 < p0 <= 1:
        raise ChainError(f"p0 must lie in (0, 1], got {p0}")
    horizon = chain.stop if horizon is None else horizon
    if horizon <= chain.t0:
        raise ChainIndexError(f"horizon {horizon} must exceed t0={chain.t0}")
    if chain.n < 2:
        return ReciprocityCertificate(p0, 0.0, None, horizon, True, chain.t0)
    mats = chain.window(chain.t0, horizon)
    if np.any(mats.sum(axis=2) > 1.0 + TOL_STOCH):
        raise ChainError("not substochastic: a row sum exceeds 1")
    rows, exhaustive = cut_mask_rows(chain.n, seed)
    forward, backward = _flows(mats, rows)
    values, starts, ends = max_window_excess(p0 * forward - backward)
    k = int(np.argmax(values))
    best = float(values[k])
    if best <= 0.0:
        return ReciprocityCertificate(p0, 0.0, None, horizon, exhaustive, chain.t0)
    mask = int(sum(1 << i for i in range(chain.n) if rows[k, i]))
    witness = (SubsetCut(chain.n, mask), chain.t0 + int(starts[k]), chain.t0 + int(ends[k]))
    return ReciprocityCertificate(p0, best, witness, horizon, exhaustive, chain.t0)


def witness_excess(chain: ChainWindow, cert: ReciprocityCertificate) -> float:
    """Recompute ``p0 * forward - backward`` over the certificate's witness."""
    if cert.witness is None:
        return 0.0
    cut, ta, tb = cert.witness
    x = cut.indicator()
    fwd = bwd = 0.0
    for m in chain.window(ta, tb):
        fwd += float(x @ m @ (1 - x))
        bwd += float((1 - x) @ m @ x)
    return cert.p0 * fwd - bwd


def cut_balance_alpha(chain: ChainWindow, horizon: Optional[int] = None, seed: int = 0) -> float:
    """Largest ``alpha`` in ``[0, 1]`` with forward >= alpha * backward on
    every cut at every step of the window. Pairs with both flows zero are
    vacuous (ratio 1)."""
    chain.require("stochastic")
    horizon = chain.stop if horizon is None else horizon
    if chain.n < 2:
        return 1.0
    mats = chain.window(chain.t0, horizon)
    rows, _ = cut_mask_rows(chain.n, seed)
    forward, backward = _flows(mats, rows)
    with np.errstate(divide="ignore", invalid="ignore"):
        ratio = np.where(backward > 0, forward / np.where(backward > 0, backward, 1.0), 1.0)
    return float(min(1.0, ratio.min()))


def _strongly_connected(adj: np.ndarray) -> bool:
    n = adj.shape[0]

    def reach(a):
        seen = {0}
        todo = [0]
        while todo:
            i = todo.pop()
            for j in np.flatnonzero(a[i]):
                if j not in seen:
                    seen.add(int(j))
                    todo.append(int(j))
        return len(seen) == n

    return reach(adj) and reach(adj.T)


@dataclass(frozen=True)
class StaticEquivalence:
    irreducible: bool
    reciprocal: bool
    flow_connected: bool


def static_equivalence_check(m: np.ndarray) -> StaticEquivalence:
    """Irreducibility, reciprocity and flow-graph connectivity of a static
    chain ``A(t) = m``; the three are tied by irreducible <=> (reciprocal and
    flow-connected), and a violation raises :class:`InternalConsistencyError`.
    """
    from .flow_graph import build_flow_graph, connected_components

    chain = ChainWindow.static(m)
    chain.require("stochastic")
    positive = chain.matrices[0] > 0
    irreducible = _strongly_connected(positive)
    reciprocal = cut_balance_alpha(chain) > 0
    # a static positive entry sums to infinity; one step with any threshold
    # below the smallest positive entry detects it exactly
    smallest = chain.matrices[0][positive].min() if positive.any() else 1.0
    g = build_flow_graph(chain, chain.t0 + 1, threshold=smallest / 2)
    flow_connected = len(connected_components(g)) == 1
    if irreducible != (reciprocal and flow_connected):
        raise InternalConsistencyError(
            f"static equivalence violated: irreducible={irreducible}, "
            f"reciprocal={reciprocal}, flow_connected={flow_connected}")
    return StaticEquivalence(irreducible, reciprocal, flow_connected)


def beta_trend(chain: ChainWindow, p0: float, horizon: int, levels: int = 3) -> list:
    """``beta_required`` at ``horizon / 2**k`` for ``k = levels-1 .. 0``."""
    out = []
    for k in reversed(range(levels)):
        h = chain.t0 + max(1, (horizon - chain.t0) >> k)
        out.append((h, approximate_reciprocity_beta(chain, p0, h).beta_required))
    return out


def looks_unbounded(trend: list, tol: float = 1e-9) -> bool:
    """Growth heuristic on a doubling-horizon ``beta`` trend.

    Flags the chain when the last doubling added more than a quarter of the
    final value. Linear growth adds half; a saturated ``beta`` adds nothing.
    """
    (_, prev), (_, last) = trend[-2], trend[-1]
    return last > tol and (last - prev) > 0.25 * last
