"""Constructive lower bounds on backward products.

``eta_n`` is the recursive constant guaranteeing ``A(t1:t0) >= eta I`` for
strongly aperiodic, approximately reciprocal, approximately stochastic
substochastic chains. It is astronomically small already for ``n = 3``, so
everything is evaluated in log space and only converted at the boundary.
"""

from __future__ import annotations

import math
import threading
import warnings
from dataclasses import dataclass
from functools import lru_cache

import numpy as np

from .chain_core import ChainWindow
from .errors import DomainError


class EtaUnderflowWarning(RuntimeWarning):
    """The bound is positive but below the smallest representable double."""


def m_of_eps(eps: float) -> float:
    """``M(eps) = ln(1/eps) / (1 - eps)``: the rate for which
    ``1 - x >= exp(-M x)`` on ``[0, 1 - eps]``."""
    if not 0.0 < eps < 1.0:
        raise DomainError(f"eps must lie in (0, 1), got {eps}")
    return -math.log(eps) / (1.0 - eps)


def lemma4_path_bound(eta_i: float, eta_j: float, delta: float) -> float:
    """Lower bound ``eta_i * eta_j * delta / 2`` on the ``(j, i)`` entry of a
    product whose diagonal entries stay above ``eta_i``/``eta_j`` and whose
    ``(j, i)`` entries sum to at least ``delta``."""
    if not (0.0 < eta_i <= 1.0 and 0.0 < eta_j <= 1.0):
        raise DomainError("eta_i and eta_j must lie in (0, 1]")
    if not 0.0 < delta < eta_j:
        raise DomainError(f"delta must lie in (0, eta_j) = (0, {eta_j}), got {delta}")
    return 0.5 * eta_i * eta_j * delta


@dataclass(frozen=True)
class EtaParams:
    n: int
    gamma: float
    p0: float
    beta: float
    delta: float = 0.0

    def __post_init__(self):
        if self.n < 1:
            raise DomainError("n must be >= 1")
        if not 0.0 < self.gamma < 1.0:
            raise DomainError(f"gamma must lie in (0, 1), got {self.gamma}")
        if not 0.0 < self.p0 < 1.0:
            raise DomainError(f"p0 must lie in (0, 1), got {self.p0}")
        # beta = 0 is admitted as the limit beta -> 0+; the bound is continuous there
        if not (self.beta >= 0.0 and math.isfinite(self.beta)):
            raise DomainError(f"beta must be a finite nonnegative real, got {self.beta}")
        if not (self.delta >= 0.0 and math.isfinite(self.delta)):
            raise DomainError(f"delta must be a finite nonnegative real, got {self.delta}")


_memo_lock = threading.Lock()


@lru_cache(maxsize=None)
def _log_eta(n: int, gamma: float, p0: float, beta: float, delta: float) -> float:
    m = m_of_eps(gamma)
    if n == 1:
        return -m * delta
    shift_b = 2.0 * n
    shift_c = (2.0 * n + beta) / p0
    log_b = min(_log_eta(r, gamma, p0, beta + shift_b, delta + shift_b) for r in range(1, n))
    log_c = min(_log_eta(r, gamma, p0, beta + shift_c, delta + shift_c) for r in range(1, n))
    lo = min(log_b, log_c)
    # the path step uses min{1/n^2, eta_min/2}
    log_step = min(-2.0 * math.log(n), lo - math.log(2.0))
    per_hop = n * lo + 2.0 * lo - math.log(2.0) + log_step
    return n * per_hop + n * lo - m * delta


def log_eta_n(params: EtaParams) -> float:
    """Natural log of ``eta_n(gamma, p0, beta, delta)``."""
    with _memo_lock:
        return _log_eta(params.n, float(params.gamma), float(params.p0),
                        float(params.beta), float(params.delta))


def eta_n(params: EtaParams) -> float:
    """``eta_n`` in linear space. Underflow to 0.0 emits
    :class:`EtaUnderflowWarning`; use :func:`log_eta_n` to keep the value."""
    log_value = log_eta_n(params)
    value = math.exp(log_value)
    if value == 0.0:
        warnings.warn(f"eta_{params.n} = exp({log_value:.6g}) underflows to 0",
                      EtaUnderflowWarning, stacklevel=2)
    return value


@dataclass(frozen=True)
class ProductBoundCheck:
    holds: bool
    worst: tuple  # (t1, t2, i, value)

    @property
    def worst_value(self) -> float:
        return self.worst[3]


def verify_product_lower_bound(chain: ChainWindow, eta: float | None = None, horizon: int | None = None,
                               log_eta: float | None = None) -> ProductBoundCheck:
    """Check ``(A(t2:t1))_ii >= eta`` for all ``t0 <= t1 <= t2 <= horizon``.

    Pass ``log_eta`` instead of ``eta`` when the bound underflows. All
    products anchored at the same ``t2 - 1`` are extended in one batched
    multiplication per step, ``O(horizon^2)`` small products overall.
    """
    if (eta is None) == (log_eta is None):
        raise ValueError("pass exactly one of eta, log_eta")
    horizon = chain.stop if horizon is None else horizon
    mats = chain.window(chain.t0, horizon)
    n = chain.n
    # t1 = t2 gives the identity, diagonal 1
    worst = (chain.t0, chain.t0, 0, 1.0)
    prods = np.empty((0, n, n))
    for k, a in enumerate(mats):
        prods = np.concatenate([prods, np.eye(n)[None]])
        prods = np.matmul(a, prods)  # prods[s] = A(t0+k+1 : t0+s)
        diags = np.diagonal(prods, axis1=1, axis2=2)
        s, i = np.unravel_index(int(np.argmin(diags)), diags.shape)
        if diags[s, i] < worst[3]:
            worst = (chain.t0 + int(s), chain.t0 + k + 1, int(i), float(diags[s, i]))
    if log_eta is not None:
        holds = worst[3] > 0 and math.log(worst[3]) >= log_eta
    else:
        holds = worst[3] >= eta
    return ProductBoundCheck(bool(holds), worst)
