"""Absolute probability sequences on finite windows.

An absolute probability sequence satisfies ``pi(t+1)ᵀ A(t) = pi(t)ᵀ``. On a
window ``[t0, T]`` it is pinned by the terminal vector ``pi(T)`` and obtained
by stepping backwards. Positivity and uniqueness of the infinite-time
sequence are only ever *evidenced* on finite horizons; every verdict here
carries its horizon.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Optional, Sequence

import numpy as np

from .bounds import EtaParams, log_eta_n
from .chain_core import (
    TOL_STOCH,
    ChainWindow,
    backward_product,
    is_stochastic_vector,
    pairwise_l1_spread,
    strong_aperiodicity_gamma,
)
from .errors import ChainError, DomainError, NotStochastic
from .reciprocity import approximate_reciprocity_beta

RESIDUAL_CONSTANT = 4.0


@dataclass(frozen=True)
class ApsTrace:
    t0: int
    terminal_time: int
    terminal: np.ndarray
    values: np.ndarray  # values[k] = pi(t0 + k), k = 0 .. T - t0
    residual: float

    @property
    def p_star(self) -> float:
        return float(self.values.min())

    def at(self, t: int) -> np.ndarray:
        return self.values[t - self.t0]

    def to_tsv(self) -> str:
        n = self.values.shape[1]
        lines = ["t\t" + "\t".join(f"pi_{i}" for i in range(n)) + "\tresidual"]
        for k, row in enumerate(self.values):
            lines.append(f"{self.t0 + k}\t" + "\t".join(f"{v:.17g}" for v in row)
                         + f"\t{self.residual:.17g}")
        return "\n".join(lines) + "\n"


def uniform(n: int) -> np.ndarray:
    return np.full(n, 1.0 / n)


def aps_backward(chain: ChainWindow, t0: int, T: int, terminal: Optional[np.ndarray] = None,
                 tol: float = TOL_STOCH) -> ApsTrace:
    """``pi(t)ᵀ = pi(t+1)ᵀ A(t)`` from ``pi(T) = terminal`` down to ``t0``."""
    if T < t0:
        raise ChainError(f"need t0 <= T, got t0={t0}, T={T}")
    n = chain.n
    terminal = uniform(n) if terminal is None else np.asarray(terminal, dtype=float)
    if terminal.shape != (n,) or not is_stochastic_vector(terminal, tol):
        raise NotStochastic("terminal vector must be a stochastic vector of length n")
    mats = chain.window(t0, T)
    rows = mats.sum(axis=2)
    if np.any(np.abs(rows - 1.0) > tol) or np.any(mats < 0):
        raise NotStochastic("absolute probability sequences need a stochastic chain")
    values = np.empty((T - t0 + 1, n))
    values[-1] = terminal
    for k in range(T - t0 - 1, -1, -1):
        values[k] = values[k + 1] @ mats[k]
    residual = 0.0
    for k in range(T - t0):
        residual = max(residual, float(np.abs(values[k] - values[k + 1] @ mats[k]).sum()))
    sums = values.sum(axis=1)
    drift = (T - t0 + 1) * n * np.finfo(float).eps * RESIDUAL_CONSTANT + tol
    if np.any(np.abs(sums - 1.0) > drift) or np.any(values < -drift):
        raise NotStochastic("propagated vector left the simplex; chain rows are not stochastic")
    return ApsTrace(t0, T, terminal.copy(), values, residual)


def basis_sweep(chain: ChainWindow, t0: int, T: int) -> np.ndarray:
    """``pi(t0)`` for each basis terminal ``e_1 .. e_n`` (row ``i``).

    All ``n`` backward recursions are run together as one matrix recursion.
    """
    mats = chain.window(t0, T)
    rows = np.eye(chain.n)
    for k in range(T - t0 - 1, -1, -1):
        rows = rows @ mats[k]
    return rows


def uniqueness_diagnostic(chain: ChainWindow, t0: int, horizons: Sequence[int]) -> list:
    """Spread (max pairwise ℓ1 distance) of ``pi(t0)`` across the basis
    terminals, for each horizon. A spread that does not shrink is evidence
    that the absolute probability sequence is not unique."""
    horizons = list(horizons)
    if any(b <= a for a, b in zip(horizons, horizons[1:])):
        raise ChainError("horizons must be strictly increasing")
    chain.require("stochastic")
    out = []
    for T in horizons:
        out.append(pairwise_l1_spread(basis_sweep(chain, t0, T)))
    return out


@dataclass(frozen=True)
class PStarVerdict:
    gamma: float
    beta: float
    eta_theoretical: Optional[float]
    log_eta_theoretical: Optional[float]
    p_star_empirical: float
    p_star_trend: list = field(default_factory=list)  # [(horizon, p_star)]
    horizon: int = 0

    @property
    def in_pstar(self) -> bool:
        """Horizon-bounded evidence: strongly aperiodic, finite beta and the
        positivity floor does not collapse under horizon doubling."""
        if self.gamma <= 0 or not math.isfinite(self.beta) or self.p_star_empirical <= 0:
            return False
        first, last = self.p_star_trend[0][1], self.p_star_trend[-1][1]
        return last >= 0.5 * first

    @property
    def label(self) -> str:
        word = "in P* (horizon-bounded evidence)" if self.in_pstar else "not evidenced in P*"
        return f"{word}, horizon={self.horizon}"


def class_pstar_verdict(chain: ChainWindow, p0: float, horizon: int, doublings: int = 2,
                        terminal: Optional[np.ndarray] = None) -> PStarVerdict:
    """Assemble aperiodicity, approximate reciprocity, the constructive bound
    and the empirical APS floor for one chain.

    ``p_star_empirical`` is the smallest entry of the APS traces pinned at
    ``horizon * 2**k`` (``k = 0..doublings``) with the given terminal
    (uniform by default).
    """
    chain.require("stochastic")
    t0 = chain.t0
    gamma = strong_aperiodicity_gamma(chain.materialize(horizon)) if chain.reaches(horizon) else 0.0
    beta = approximate_reciprocity_beta(chain, p0, horizon).beta_required
    log_eta = eta = None
    try:
        log_eta = log_eta_n(EtaParams(chain.n, gamma, p0, beta, 0.0))
        eta = math.exp(log_eta)
    except DomainError:
        pass
    trend = []
    span = horizon - t0
    for k in range(doublings + 1):
        T = t0 + span * (1 << k)
        if not chain.reaches(T):
            break
        trend.append((T, aps_backward(chain, t0, T, terminal).p_star))
    p_star = min(p for _, p in trend)
    return PStarVerdict(gamma, beta, eta, log_eta, p_star, trend, horizon)


@dataclass(frozen=True)
class ErgodicityCheck:
    ergodic_on_horizon: bool
    pi_t0: Optional[np.ndarray]
    spread: float


def ergodicity_check(chain: ChainWindow, t0: int, horizon: int, tol: float = 1e-9) -> ErgodicityCheck:
    """``A(horizon:t0)`` is within ``tol`` of rank one (max row-pair ℓ1)."""
    p = backward_product(chain, t0, horizon)
    spread = pairwise_l1_spread(p)
    ok = spread <= tol
    return ErgodicityCheck(ok, p.mean(axis=0) if ok else None, spread)


def stationary_limit(m: np.ndarray, t0: int = 0, tol: float = 1e-13, max_horizon: int = 1 << 20):
    """``pi(t0)`` of a static chain pinned at ever larger horizons until two
    consecutive doublings agree within ``tol`` (ℓ1). Returns ``(pi, horizon)``."""
    chain = ChainWindow.static(m)
    T = 16
    prev = aps_backward(chain, t0, t0 + T).values[0]
    while T < max_horizon:
        T *= 2
        cur = aps_backward(chain, t0, t0 + T).values[0]
        if np.abs(cur - prev).sum() <= tol:
            return cur, T
        prev = cur
    return prev, T
