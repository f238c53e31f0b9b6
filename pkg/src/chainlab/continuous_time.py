"""Continuous-time chains ``dx/dt = A(t) x`` with ``A(t) = -L(t)``.

Only piecewise-constant generators are supported: on each segment the
state-transition matrix is an exact matrix exponential and every integral
of a weight is a finite sum of ``weight * duration``.
"""

from __future__ import annotations

import bisect
from dataclasses import dataclass, field
from typing import Optional, Sequence

import numpy as np

from .absolute_probability import uniqueness_diagnostic
from .chain_core import ChainWindow, SubsetCut, backward_product
from .errors import ChainError, ChainIndexError, DimensionMismatch, InternalConsistencyError, NotStochastic
from .expm import expm
from .flow_graph import DEFAULT_THRESHOLD, FlowGraph
from .reciprocity import _flows, cut_mask_rows, max_window_excess

TOL_GENERATOR = 1e-12
TOL_CT = 1e-10
CLAMP_TOL = 1e-12
COMPOSE_TOL = 1e-9


def check_generator(g: np.ndarray, tol: float = TOL_GENERATOR) -> None:
    n = g.shape[0]
    off = g[~np.eye(n, dtype=bool)]
    if np.any(off < -tol):
        raise NotStochastic("generator has a negative off-diagonal weight")
    scale = max(1.0, float(np.abs(g).max()))
    if np.any(np.abs(g.sum(axis=1)) > tol * scale * n):
        raise NotStochastic("generator rows must sum to zero (negated Laplacian)")


@dataclass(frozen=True, eq=False)
class CtChain:
    """Piecewise-constant generator starting at time 0.

    Segment ``k`` applies ``generators[k]`` on ``[breaks[k], breaks[k+1])``.
    ``grid`` (optional) is the sample sequence ``t_0 < t_1 < ...``; every
    grid time must be a segment breakpoint.
    """

    durations: np.ndarray
    generators: np.ndarray
    grid: Optional[np.ndarray] = None
    breaks: np.ndarray = field(init=False, repr=False)

    def __post_init__(self):
        d = np.asarray(self.durations, dtype=float).ravel()
        g = np.asarray(self.generators, dtype=float)
        if g.ndim == 2:
            g = g[None]
        if g.ndim != 3 or g.shape[1] != g.shape[2] or g.shape[0] != d.size:
            raise DimensionMismatch(f"{d.size} durations vs generator stack of shape {g.shape}")
        if np.any(d <= 0) or not np.all(np.isfinite(d)):
            raise ChainError("segment durations must be finite and positive")
        for m in g:
            check_generator(m)
        breaks = np.concatenate([[0.0], np.cumsum(d)])
        object.__setattr__(self, "durations", d)
        object.__setattr__(self, "generators", g)
        object.__setattr__(self, "breaks", breaks)
        if self.grid is not None:
            grid = np.asarray(self.grid, dtype=float).ravel()
            if grid.size < 2 or np.any(np.diff(grid) <= 0):
                raise ChainError("grid must hold at least two increasing times")
            for t in grid:
                if not np.any(np.isclose(breaks, t, rtol=0, atol=1e-12)):
                    raise ChainError(f"grid time {t!r} is not a segment breakpoint")
            object.__setattr__(self, "grid", grid)

    @property
    def n(self) -> int:
        return self.generators.shape[1]

    @property
    def end(self) -> float:
        return float(self.breaks[-1])

    def with_grid(self, times: Sequence[float]) -> "CtChain":
        """Split segments at ``times`` (identical pieces) and attach them as the grid."""
        times = np.asarray(sorted(set(float(t) for t in times)))
        if times[0] < 0 or times[-1] > self.end + 1e-12:
            raise ChainIndexError("grid leaves the covered interval")
        cuts = sorted(set(self.breaks.tolist()) | set(times.tolist()))
        durations, gens = [], []
        for a, b in zip(cuts, cuts[1:]):
            if b - a <= 1e-15:
                continue
            durations.append(b - a)
            gens.append(self.generator_at(0.5 * (a + b)))
        return CtChain(np.array(durations), np.array(gens), times)

    def generator_at(self, t: float) -> np.ndarray:
        if not 0 <= t < self.end:
            raise ChainIndexError(f"t={t} outside [0, {self.end})")
        k = bisect.bisect_right(self.breaks.tolist(), t) - 1
        return self.generators[k]

    def pieces(self, tau: float, t: float):
        """``(segment index, overlap length)`` for segments meeting ``[tau, t]``."""
        if tau < 0 or t < tau:
            raise ChainIndexError(f"need 0 <= tau <= t, got tau={tau}, t={t}")
        if t > self.end + 1e-12:
            raise ChainIndexError(f"t={t} beyond the last segment end {self.end}")
        out = []
        for k in range(len(self.durations)):
            a, b = max(tau, self.breaks[k]), min(t, self.breaks[k + 1])
            if b > a:
                out.append((k, b - a))
        return out

    def integral(self, tau: float, t: float) -> np.ndarray:
        """``∫_tau^t A(s) ds`` exactly."""
        acc = np.zeros((self.n, self.n))
        for k, length in self.pieces(tau, t):
            acc += self.generators[k] * length
        return acc


@dataclass(frozen=True)
class TransitionOperator:
    tau: float
    t: float
    matrix: np.ndarray
    step_count: int
    max_local_error: float
    clamped: int = 0


def transition(chain: CtChain, tau: float, t: float) -> TransitionOperator:
    """``Φ(t, tau)``: product of per-segment exponentials, latest on the left.

    ``max_local_error`` is the worst row-sum deviation of any factor before
    clamping, a direct check of stochasticity.
    """
    pieces = chain.pieces(tau, t)
    phi = np.eye(chain.n)
    worst = 0.0
    clamped = 0
    for k, length in pieces:
        e, _ = expm(chain.generators[k] * length)
        worst = max(worst, float(np.abs(e.sum(axis=1) - 1.0).max()))
        neg = e < 0
        if np.any(e < -CLAMP_TOL):
            raise InternalConsistencyError(f"segment exponential has entry {e.min():.3g} < -{CLAMP_TOL}")
        clamped += int(neg.sum())
        e[neg] = 0.0
        phi = e @ phi
    if np.abs(phi.sum(axis=1) - 1.0).max() > TOL_CT:
        raise InternalConsistencyError("state-transition matrix lost row-stochasticity")
    return TransitionOperator(tau, t, phi, len(pieces), worst, clamped)


def _require_grid(chain: CtChain) -> np.ndarray:
    if chain.grid is None:
        raise ChainError("this operation needs a sample grid")
    return chain.grid


def sample_discrete(chain: CtChain, check: bool = True) -> ChainWindow:
    """Discrete chain ``B(k) = Φ(t_{k+1}, t_k)`` on the grid."""
    grid = _require_grid(chain)
    mats = np.stack([transition(chain, a, b).matrix for a, b in zip(grid, grid[1:])])
    out = ChainWindow(mats)
    if check:
        whole = transition(chain, grid[0], grid[-1]).matrix
        if np.abs(backward_product(out, 0, out.stop) - whole).max() > COMPOSE_TOL:
            raise InternalConsistencyError("sampled products disagree with Φ over the grid span")
    return out


def interval_integrals(chain: CtChain) -> np.ndarray:
    """Off-diagonal parts of ``∫ A`` over each grid interval; shape ``(K, n, n)``."""
    grid = _require_grid(chain)
    out = np.stack([chain.integral(a, b) for a, b in zip(grid, grid[1:])])
    out *= 1.0 - np.eye(chain.n)
    return out


def uniform_bound_M(chain: CtChain) -> float:
    """``max_k max_{i != j} ∫_{t_k}^{t_{k+1}} a_ij``."""
    return float(interval_integrals(chain).max())


def ct_reciprocity_beta(chain: CtChain, p0: float, upto: Optional[int] = None) -> float:
    """Smallest ``beta`` with ``p0 ∫ forward <= ∫ backward + beta`` for every
    cut and every grid window ``[t_l, t_m]``, using the first ``upto`` grid
    intervals (all by default)."""
    if not 0 < p0 <= 1:
        raise ChainError(f"p0 must lie in (0, 1], got {p0}")
    w = interval_integrals(chain)
    if upto is not None:
        w = w[:upto]
    if chain.n < 2 or len(w) == 0:
        return 0.0
    rows, _ = cut_mask_rows(chain.n)
    forward, backward = _flows(w, rows)
    values, _, _ = max_window_excess(p0 * forward - backward)
    return max(0.0, float(values.max()))


@dataclass(frozen=True)
class SandwichCheck:
    G_empirical: float  # inf when no interval has positive flow
    upper_ok: bool
    phi_flow: np.ndarray
    integral_flow: np.ndarray


def sandwich_check(chain: CtChain, cut: SubsetCut, tol: float = 1e-12) -> SandwichCheck:
    """Per grid interval, ``1ᵀΦ_{S S̄}1`` against ``∫ 1ᵀA_{S S̄}1``.

    ``G_empirical`` is the smallest ratio of the two over intervals with
    positive integral; the upper side asks ``Φ-flow <= n * integral``.
    """
    if cut.n != chain.n:
        raise DimensionMismatch("cut dimension differs from chain dimension")
    grid = _require_grid(chain)
    x = cut.indicator()
    phi_flow, int_flow = [], []
    for a, b in zip(grid, grid[1:]):
        phi = transition(chain, a, b).matrix
        w = chain.integral(a, b) * (1.0 - np.eye(chain.n))
        phi_flow.append(float(x @ phi @ (1 - x)))
        int_flow.append(float(x @ w @ (1 - x)))
    phi_flow, int_flow = np.array(phi_flow), np.array(int_flow)
    pos = int_flow > 0
    g = float((phi_flow[pos] / int_flow[pos]).min()) if pos.any() else float("inf")
    upper = bool(np.all(phi_flow <= chain.n * int_flow + tol))
    return SandwichCheck(g, upper, phi_flow, int_flow)


def ct_flow_graph(chain: CtChain, t_end: Optional[float] = None, threshold: float = DEFAULT_THRESHOLD) -> FlowGraph:
    """Truncated continuous-time flow graph: ``∫_0^{t_end} (a_ij + a_ji)``."""
    t_end = chain.end if t_end is None else t_end
    w = chain.integral(0.0, t_end) * (1.0 - np.eye(chain.n))
    return FlowGraph.from_weights(w, t_end, threshold)


def aps_unique_on_grid(chain: CtChain, tol: float = 1e-6) -> tuple:
    """Basis-sweep spread of the sampled chain over its whole grid."""
    b = sample_discrete(chain)
    spread = uniqueness_diagnostic(b, 0, [b.stop])[0]
    return spread <= tol, spread
