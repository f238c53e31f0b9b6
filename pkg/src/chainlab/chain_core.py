"""Matrix and chain primitives.

A chain is a finite window ``A(t0), ..., A(T-1)`` of square nonnegative
matrices plus an optional rule that says what ``A(t)`` is for ``t >= T``.
Backward products follow the convention

    A(t2:t1) = A(t2-1) A(t2-2) ... A(t1),   A(t:t) = I

so that ``x(t2) = A(t2:t1) x(t1)`` for the averaging dynamics
``x(t+1) = A(t) x(t)``.

Node indices are 0-based throughout the library.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Callable, Iterator, Optional

import numpy as np

from .errors import ChainError, ChainIndexError, DimensionMismatch, NotStochastic

TOL_STOCH = 1e-9
MAX_DIM = 32

EXTENSIONS = ("identity", "repeat", "cycle", "generator")


def classify(m: np.ndarray, tol: float = TOL_STOCH) -> str:
    """Return ``"stochastic"``, ``"substochastic"`` or ``"invalid"``.

    Classification is computed from the entries, never declared.
    """
    m = np.asarray(m, dtype=float)
    if m.ndim != 2 or m.shape[0] != m.shape[1]:
        return "invalid"
    if not np.all(np.isfinite(m)) or np.any(m < 0):
        return "invalid"
    rows = m.sum(axis=1)
    if np.all(np.abs(rows - 1.0) <= tol):
        return "stochastic"
    if np.all(rows <= 1.0 + tol):
        return "substochastic"
    return "invalid"


def is_stochastic_vector(v: np.ndarray, tol: float = TOL_STOCH) -> bool:
    v = np.asarray(v, dtype=float)
    return v.ndim == 1 and bool(np.all(v >= -tol)) and abs(v.sum() - 1.0) <= tol * max(1, v.size)


@dataclass(frozen=True)
class SubsetCut:
    """A nonempty proper subset ``S`` of ``{0..n-1}`` stored as a bitmask.

    Bit ``i`` set means node ``i`` is in ``S``. The complement is always
    derived on demand.
    """

    n: int
    mask: int

    def __post_init__(self):
        full = (1 << self.n) - 1
        if self.n < 2:
            raise ChainError("a cut needs n >= 2")
        if not 0 < self.mask < full:
            raise ChainError(f"mask {self.mask:#b} is not a nonempty proper subset of [{self.n}]")

    @classmethod
    def from_members(cls, n: int, members) -> "SubsetCut":
        mask = 0
        for i in members:
            if not 0 <= i < n:
                raise ChainError(f"node {i} outside [0, {n})")
            mask |= 1 << i
        return cls(n, mask)

    @property
    def members(self) -> tuple:
        return tuple(i for i in range(self.n) if self.mask >> i & 1)

    @property
    def complement(self) -> tuple:
        return tuple(i for i in range(self.n) if not self.mask >> i & 1)

    def indicator(self) -> np.ndarray:
        return np.array([self.mask >> i & 1 for i in range(self.n)], dtype=float)

    def __str__(self):
        return "{" + ",".join(str(i) for i in self.members) + "}"


def all_cuts(n: int) -> Iterator[SubsetCut]:
    """Every nonempty proper subset, both orientations, in mask order."""
    for mask in range(1, (1 << n) - 1):
        yield SubsetCut(n, mask)


def cut_masks(n: int) -> np.ndarray:
    """Indicator rows for every mask ``1 .. 2**n - 2``; shape ``(2**n - 2, n)``."""
    masks = np.arange(1, (1 << n) - 1, dtype=np.int64)
    bits = (masks[:, None] >> np.arange(n)[None, :]) & 1
    return bits.astype(float)


@dataclass(frozen=True, eq=False)
class ChainWindow:
    """Finite window of a (sub)stochastic chain starting at time ``t0``.

    ``matrices[k]`` holds ``A(t0 + k)``. ``extension`` decides what happens
    past the window: ``None`` (out of range is an error), ``"identity"``,
    ``"repeat"`` (last matrix forever), ``"cycle"`` or ``"generator"``
    (``generator(t)`` builds ``A(t)``; see :mod:`chainlab.random_chains`).
    """

    matrices: np.ndarray
    t0: int = 0
    extension: Optional[str] = None
    generator: Optional[Callable[[int], np.ndarray]] = field(default=None, repr=False)
    generator_spec: object = field(default=None, repr=False)

    def __post_init__(self):
        mats = np.array(self.matrices, dtype=float)
        if mats.ndim == 2:
            mats = mats[None]
        if mats.ndim != 3 or mats.shape[1] != mats.shape[2]:
            raise DimensionMismatch(f"expected a stack of square matrices, got shape {mats.shape}")
        if mats.shape[0] < 1:
            raise ChainError("a chain window needs at least one matrix")
        if mats.shape[1] > MAX_DIM:
            raise ChainError(f"n={mats.shape[1]} exceeds the supported maximum {MAX_DIM}")
        if self.t0 < 0:
            raise ChainError("t0 must be >= 0")
        if self.extension is not None and self.extension not in EXTENSIONS:
            raise ChainError(f"unknown extension rule {self.extension!r}")
        if self.extension == "generator" and self.generator is None:
            raise ChainError("generator extension needs a generator callable")
        if not np.all(np.isfinite(mats)) or np.any(mats < 0):
            raise NotStochastic("chain matrices must be finite and nonnegative")
        mats.setflags(write=False)
        object.__setattr__(self, "matrices", mats)

    @classmethod
    def static(cls, m, count: int = 1, t0: int = 0) -> "ChainWindow":
        """``A(t) = m`` for every ``t >= t0``."""
        m = np.asarray(m, dtype=float)
        return cls(np.repeat(m[None], count, axis=0), t0=t0, extension="repeat")

    @classmethod
    def identity(cls, n: int, count: int = 1, t0: int = 0) -> "ChainWindow":
        return cls(np.repeat(np.eye(n)[None], count, axis=0), t0=t0, extension="identity")

    @property
    def n(self) -> int:
        return self.matrices.shape[1]

    @property
    def count(self) -> int:
        return self.matrices.shape[0]

    @property
    def stop(self) -> int:
        """First time index past the stored window (``T``)."""
        return self.t0 + self.count

    def reaches(self, t: int) -> bool:
        """True if ``A(s)`` is defined for every ``t0 <= s < t``."""
        return t <= self.stop or self.extension is not None

    def at(self, t: int) -> np.ndarray:
        """The matrix ``A(t)``."""
        if t < self.t0:
            raise ChainIndexError(f"t={t} precedes the window start t0={self.t0}")
        k = t - self.t0
        if k < self.count:
            return self.matrices[k]
        if self.extension is None:
            raise ChainIndexError(f"t={t} beyond window end {self.stop} and no extension rule")
        if self.extension == "identity":
            return np.eye(self.n)
        if self.extension == "repeat":
            return self.matrices[-1]
        if self.extension == "cycle":
            return self.matrices[k % self.count]
        m = np.asarray(self.generator(t), dtype=float)
        if m.shape != (self.n, self.n):
            raise DimensionMismatch(f"generator returned shape {m.shape} at t={t}")
        return m

    def window(self, t1: int, t2: int) -> np.ndarray:
        """Stack of ``A(t)`` for ``t1 <= t < t2``; shape ``(t2 - t1, n, n)``."""
        if t2 < t1:
            raise ChainIndexError(f"empty or reversed window [{t1}, {t2})")
        if t1 < self.t0:
            raise ChainIndexError(f"t={t1} precedes the window start t0={self.t0}")
        if t2 <= self.stop:
            return self.matrices[t1 - self.t0:t2 - self.t0]
        if not self.reaches(t2):
            raise ChainIndexError(f"t={t2 - 1} beyond window end {self.stop} and no extension rule")
        if t2 == t1:
            return np.empty((0, self.n, self.n))
        k1, k2 = t1 - self.t0, t2 - self.t0
        if self.extension == "cycle":
            return self.matrices[np.arange(k1, k2) % self.count]
        if self.extension == "repeat":
            idx = np.minimum(np.arange(k1, k2), self.count - 1)
            return self.matrices[idx]
        return np.stack([self.at(t) for t in range(t1, t2)])

    def materialize(self, stop: int) -> "ChainWindow":
        """A new window holding ``A(t0) .. A(stop-1)`` explicitly."""
        return ChainWindow(self.window(self.t0, stop), t0=self.t0, extension=self.extension,
                           generator=self.generator, generator_spec=self.generator_spec)

    def classification(self, tol: float = TOL_STOCH) -> str:
        kinds = {classify(m, tol) for m in self.matrices}
        if "invalid" in kinds:
            return "invalid"
        if kinds == {"stochastic"}:
            return "stochastic"
        return "substochastic"

    def require(self, kind: str = "stochastic", tol: float = TOL_STOCH) -> None:
        got = self.classification(tol)
        if kind == "stochastic" and got != "stochastic":
            raise NotStochastic(f"chain is {got}, a stochastic chain is required")
        if kind == "substochastic" and got == "invalid":
            raise NotStochastic("chain has a row sum above 1; a substochastic chain is required")


def backward_product(chain: ChainWindow, t1: int, t2: int) -> np.ndarray:
    """``A(t2:t1) = A(t2-1) ... A(t1)``, with ``A(t:t) = I``.

    Sequential left multiplication, no re-association, so results are
    reproducible bit for bit.
    """
    if t2 < t1:
        raise ChainIndexError(f"backward product needs t1 <= t2, got t1={t1}, t2={t2}")
    if t1 < chain.t0:
        raise ChainIndexError(f"t1={t1} precedes the window start t0={chain.t0}")
    if not chain.reaches(t2):
        raise ChainIndexError(f"t2={t2} beyond window end {chain.stop} and no extension rule")
    p = np.eye(chain.n)
    for t in range(t1, t2):
        p = chain.at(t) @ p
    return p


def block(m: np.ndarray, cut: SubsetCut):
    """``(A_S, A_{S S̄}, A_{S̄ S}, A_{S̄})`` with indices in ascending order."""
    m = np.asarray(m, dtype=float)
    if m.shape != (cut.n, cut.n):
        raise DimensionMismatch(f"matrix shape {m.shape} does not match cut dimension {cut.n}")
    s, sb = list(cut.members), list(cut.complement)
    return m[np.ix_(s, s)], m[np.ix_(s, sb)], m[np.ix_(sb, s)], m[np.ix_(sb, sb)]


def cut_flow(m: np.ndarray, cut: SubsetCut) -> tuple:
    """``(1ᵀA_{S S̄}1, 1ᵀA_{S̄ S}1)``.

    The first entry is the total weight rows in ``S`` place on ``S̄``; the
    second the reverse.
    """
    _, s_sb, sb_s, _ = block(m, cut)
    return float(s_sb.sum()), float(sb_s.sum())


def cut_flow_table(mats: np.ndarray, masks: Optional[np.ndarray] = None) -> np.ndarray:
    """Cross-cut flows ``1ᵀA_{S S̄}(t)1`` for every mask and time.

    ``mats`` has shape ``(T, n, n)``; the result has shape ``(T, K)`` with one
    column per indicator row of ``masks`` (default: every mask, see
    :func:`cut_masks`). The reverse flow of mask ``S`` is the column of its
    complement. Diagonal entries never contribute.
    """
    mats = np.asarray(mats, dtype=float)
    n = mats.shape[-1]
    x = cut_masks(n) if masks is None else masks
    off = mats * (1.0 - np.eye(n))
    # f_S(t) = x^T A(t) (1 - x)
    xa = np.einsum("ki,tij->tkj", x, off)
    return np.einsum("tkj,kj->tk", xa, 1.0 - x)


def complement_index(n: int) -> np.ndarray:
    """Column index of the complement mask, for tables built by :func:`cut_masks`."""
    masks = np.arange(1, (1 << n) - 1)
    comp = ((1 << n) - 1) ^ masks
    return comp - 1


def deviation_from_stochasticity(chain: ChainWindow, tol: float = TOL_STOCH) -> float:
    """``Δ = Σ_t 1ᵀ(1 - A(t)1)`` over the stored window."""
    rows = chain.matrices.sum(axis=2)
    if np.any(rows > 1.0 + tol):
        raise NotStochastic("row sum above 1: chain is not substochastic")
    deficit = np.clip(1.0 - rows, 0.0, None)
    return float(deficit.sum())


def strong_aperiodicity_gamma(chain: ChainWindow) -> float:
    """``min_{t,i} a_ii(t)`` over the stored window; strongly aperiodic iff > 0."""
    return float(np.diagonal(chain.matrices, axis1=1, axis2=2).min())


def pairwise_l1_spread(rows: np.ndarray) -> float:
    """Largest ℓ1 distance between any two rows."""
    rows = np.asarray(rows, dtype=float)
    if rows.shape[0] < 2:
        return 0.0
    d = np.abs(rows[:, None, :] - rows[None, :, :]).sum(axis=2)
    return float(d.max())


def as_chain(obj, count: int = 1) -> ChainWindow:
    """Accept a ChainWindow, a single matrix (static chain) or a stack."""
    if isinstance(obj, ChainWindow):
        return obj
    arr = np.asarray(obj, dtype=float)
    if arr.ndim == 2:
        return ChainWindow.static(arr, count)
    return ChainWindow(arr)

