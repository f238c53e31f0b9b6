"""Averaging dynamics ``x(t+1) = A(t) x(t)``: simulation, mutual ergodicity
and the convergence-rate check built on the weighted variance
``V_u(x) = sum_i u_i (x_i - uᵀx)^2``."""

from __future__ import annotations

from dataclasses import dataclass
from typing import Optional

import numpy as np

from ._parallel import map_ordered
from .absolute_probability import ApsTrace
from .chain_core import ChainWindow, cut_masks, is_stochastic_vector
from .errors import ChainError, DimensionMismatch, NotStochastic

ENVELOPE_TOL = 1e-12
FLOW_MODES = ("cross", "block")


@dataclass(frozen=True)
class Trajectory:
    t0: int
    states: np.ndarray  # states[k] = x(t0 + k)
    chain: ChainWindow

    @property
    def T(self) -> int:
        return self.t0 + len(self.states) - 1

    def at(self, t: int) -> np.ndarray:
        return self.states[t - self.t0]

    def to_tsv(self, aps: Optional[ApsTrace] = None) -> str:
        n = self.states.shape[1]
        head = "t\t" + "\t".join(f"x_{i}" for i in range(n))
        lines = [head + ("\tV" if aps is not None else "")]
        for k, x in enumerate(self.states):
            t = self.t0 + k
            row = f"{t}\t" + "\t".join(f"{v:.17g}" for v in x)
            if aps is not None and aps.t0 <= t <= aps.terminal_time:
                row += f"\t{quadratic_comparison(aps.at(t), x):.17g}"
            lines.append(row)
        return "\n".join(lines) + "\n"


def simulate(chain: ChainWindow, t0: int, x0, T: int, check_envelope: bool = True) -> Trajectory:
    """Step the dynamics from ``x(t0) = x0`` to time ``T``.

    For stochastic chains the max-min envelope can only shrink; that is
    asserted at every step.
    """
    x = np.asarray(x0, dtype=float)
    if x.shape != (chain.n,):
        raise DimensionMismatch(f"x0 has shape {x.shape}, chain has n={chain.n}")
    if T < t0:
        raise ChainError("need t0 <= T")
    mats = chain.window(t0, T)
    stochastic = check_envelope and bool(np.all(np.abs(mats.sum(axis=2) - 1.0) <= 1e-9))
    states = np.empty((T - t0 + 1, chain.n))
    states[0] = x
    for k, a in enumerate(mats):
        nxt = a @ states[k]
        if stochastic:
            scale = ENVELOPE_TOL * max(1.0, float(np.abs(states[k]).max()))
            if nxt.max() > states[k].max() + scale or nxt.min() < states[k].min() - scale:
                raise AssertionError(f"envelope grew at t={t0 + k}")
        states[k + 1] = nxt
    return Trajectory(t0, states, chain)


def mutual_ergodicity(chain: ChainWindow, i: int, j: int, trials: int = 20, T: Optional[int] = None,
                      tol: float = 1e-6, seed: int = 0) -> bool:
    """Seeded Monte Carlo test of ``x_i(T) - x_j(T) -> 0``.

    Each trial draws a start time in the first half of ``[t0, T)`` and
    ``x0`` uniform in ``[-1, 1]^n``.
    """
    if i == j:
        raise ChainError("mutual ergodicity needs two distinct indices")
    T = chain.stop if T is None else T
    rng = np.random.default_rng(seed)
    draws = [(int(rng.integers(chain.t0, chain.t0 + max(1, (T - chain.t0) // 2))),
              rng.uniform(-1.0, 1.0, chain.n)) for _ in range(trials)]

    def gap(draw):
        s, x0 = draw
        x = simulate(chain, s, x0, T, check_envelope=False).states[-1]
        return abs(x[i] - x[j])

    return all(g <= tol for g in map_ordered(gap, draws))


def quadratic_comparison(u, x) -> float:
    """Weighted variance of ``x`` under the stochastic weights ``u``."""
    u = np.asarray(u, dtype=float)
    x = np.asarray(x, dtype=float)
    if not is_stochastic_vector(u):
        raise NotStochastic("u must be a stochastic vector")
    mean = float(u @ x)
    return float(u @ (x - mean) ** 2)


def _per_step_cut_quantity(mats: np.ndarray, flow_mode: str) -> np.ndarray:
    """Per-step quantity for every cut, shape ``(T, K)``."""
    n = mats.shape[-1]
    x = cut_masks(n)
    if flow_mode == "cross":
        # 1ᵀA_{S̄ S}1: weight rows outside S place on S
        off = mats * (1.0 - np.eye(n))
        return np.einsum("ki,tij,kj->tk", 1.0 - x, off, x)
    if flow_mode == "block":
        # 1ᵀA_S 1: the principal block, diagonal included
        return np.einsum("ki,tij,kj->tk", x, mats, x)
    raise ChainError(f"flow_mode must be one of {FLOW_MODES}")


@dataclass(frozen=True)
class EpochResult:
    times: list
    diagnostic: str = ""

    def __iter__(self):
        return iter(self.times)

    def __len__(self):
        return len(self.times)


def epoch_times(chain: ChainWindow, delta: float, horizon: int, flow_mode: str = "cross") -> EpochResult:
    """Greedy epochs ``t_1 < t_2 < ... <= horizon``.

    ``t_q`` is the first ``t >= t_{q-1} + 1`` at which the quantity summed
    over ``[t_{q-1}, t)`` reaches ``delta`` for every cut at once. ``"cross"``
    sums the cut flow ``1ᵀA_{S̄ S}1``; ``"block"`` sums the principal block
    mass ``1ᵀA_S 1`` exactly as the rate statement is printed.
    """
    if delta <= 0:
        raise ChainError("delta must be positive")
    if chain.n < 2:
        return EpochResult([], "n < 2: no cuts")
    mats = chain.window(chain.t0, horizon)
    q = _per_step_cut_quantity(mats, flow_mode)
    times = []
    acc = np.zeros(q.shape[1])
    for k in range(len(mats)):
        acc += q[k]
        if acc.min() >= delta:
            times.append(chain.t0 + k + 1)
            acc[:] = 0.0
    diag = "" if times else f"no epoch completed before horizon {horizon}"
    return EpochResult(times, diag)


def rate_factor(m: int, gamma: float, p_star: float, delta: float, eps: float = 1.0) -> float:
    """Per-epoch contraction factor ``1 - eps delta (1-delta)^2 gamma p* / (m-1)^2``."""
    return 1.0 - eps * delta * (1.0 - delta) ** 2 * gamma * p_star / (m - 1) ** 2


@dataclass(frozen=True)
class ContractionCheck:
    per_epoch_ratio: list  # worst ratio over trials, per epoch
    bound: float
    holds: bool
    slack: float
    diagnostic: str = ""


def contraction_check(chain: ChainWindow, aps: ApsTrace, epochs, gamma: float, p_star: float, delta: float,
                      eps: float = 1.0, trials: int = 8, seed: int = 0, floor: float = 1e-24) -> ContractionCheck:
    """Empirical ``V_{pi(t_q)}(x(t_q)) / V_{pi(t_{q-1})}(x(t_{q-1}))`` against
    the rate factor, from seeded random ``x(t0)``.

    Epoch zero is ``aps.t0``. Ratios whose denominator is below ``floor``
    are skipped (the trajectory has already reached consensus).
    """
    epochs = list(epochs)
    bound = rate_factor(chain.n, gamma, p_star, delta, eps)
    if not epochs:
        return ContractionCheck([], bound, True, float("nan"), "no epochs: bound is vacuous on this horizon")
    if epochs[-1] > aps.terminal_time:
        raise ChainError("epochs run past the APS window")
    marks = [aps.t0] + epochs
    rng = np.random.default_rng(seed)
    worst = [0.0] * len(epochs)
    seen = [False] * len(epochs)
    for _ in range(trials):
        traj = simulate(chain, aps.t0, rng.uniform(-1.0, 1.0, chain.n), epochs[-1], check_envelope=False)
        v = [quadratic_comparison(aps.at(t), traj.at(t)) for t in marks]
        for q in range(1, len(marks)):
            if v[q - 1] > floor:
                worst[q - 1] = max(worst[q - 1], v[q] / v[q - 1])
                seen[q - 1] = True
    ratios = [r for r, s in zip(worst, seen) if s]
    top = max(ratios) if ratios else 0.0
    holds = top <= bound + 1e-12
    diag = "" if ratios else "V reached consensus before the first epoch"
    return ContractionCheck([r if s else float("nan") for r, s in zip(worst, seen)], bound, holds,
                            bound - top, diag)
