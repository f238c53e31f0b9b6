"""Seeded families of independent random stochastic chains.

Every matrix ``A(t)`` is drawn from its own Philox stream keyed by
``(seed, replicate)`` with ``t`` in the high counter word, so ``A(t)`` does
not depend on how many other matrices were drawn, in what order, or on
which thread.

Families (``params`` keys in brackets, defaults in the table below):

``identity``
    ``A(t) = I``.
``gossip-pairs`` [pair_prob, mixing]
    With probability ``pair_prob`` a uniform pair ``{i, j}`` averages with
    weight ``mixing``; otherwise ``I``. Doubly stochastic, strongly aperiodic
    (``gamma = 1 - mixing``), expected chain symmetric hence reciprocal.
``lazy-random-walk`` [self_weight, edge_prob]
    Erdős–Rényi graph per step; node ``i`` keeps ``self_weight`` and spreads
    the rest evenly over its neighbours (isolated nodes stay put). Strongly
    aperiodic (``gamma = self_weight``); expected chain symmetric.
``one-directional-elite`` [self_weight, elite]
    Node ``elite`` never listens; every other node keeps ``self_weight`` and
    gives the rest to one uniformly chosen other node. Strongly aperiodic,
    *not* approximately reciprocal.
``block-diagonal-mixers`` [blocks, pair_prob, mixing, leak, leak_decay]
    Independent gossip inside each block of consecutive nodes, times an
    optional cross-block gossip with weight ``leak * leak_decay**t``
    (summable, so blocks stay distinct ergodic classes). ``blocks`` is a
    tuple of sizes.
``static-perturbed`` [noise]
    ``(1 - noise) A0 + noise R(t)`` with ``A0 = I/2 + D/2`` for a seeded
    Dirichlet matrix ``D`` and ``R(t)`` with Dirichlet rows. Strongly
    aperiodic, positive, expected chain static and irreducible.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from functools import partial
from itertools import combinations

import numpy as np

from .chain_core import ChainWindow
from .errors import ChainError

DEFAULTS = {
    "identity": {},
    "gossip-pairs": {"pair_prob": 1.0, "mixing": 0.5},
    "lazy-random-walk": {"self_weight": 0.5, "edge_prob": 0.5},
    "one-directional-elite": {"self_weight": 0.5, "elite": 0},
    "block-diagonal-mixers": {"blocks": None, "pair_prob": 1.0, "mixing": 0.5, "leak": 0.0, "leak_decay": 0.5},
    "static-perturbed": {"noise": 0.2},
}
FAMILIES = tuple(DEFAULTS)

_MASK64 = (1 << 64) - 1


@dataclass(frozen=True)
class GeneratorSpec:
    family: str
    n: int
    params: dict = field(default_factory=dict)
    seed: int = 0

    def __post_init__(self):
        if self.family not in DEFAULTS:
            raise ChainError(f"unknown family {self.family!r}; choose from {', '.join(FAMILIES)}")
        if self.n < 1:
            raise ChainError("n must be >= 1")
        unknown = set(self.params) - set(DEFAULTS[self.family])
        if unknown:
            raise ChainError(f"unknown parameters for {self.family}: {sorted(unknown)}")
        merged = {**DEFAULTS[self.family], **self.params}
        if self.family == "block-diagonal-mixers":
            blocks = merged["blocks"] or (self.n,)
            merged["blocks"] = tuple(int(b) for b in blocks)
            if sum(merged["blocks"]) != self.n or min(merged["blocks"]) < 1:
                raise ChainError(f"block sizes {merged['blocks']} must be positive and sum to n={self.n}")
        if "elite" in merged:
            merged["elite"] = int(merged["elite"])
            if not 0 <= merged["elite"] < self.n:
                raise ChainError("elite index out of range")
        for key in ("pair_prob", "mixing", "self_weight", "edge_prob", "noise", "leak", "leak_decay"):
            if key in merged and not 0.0 <= float(merged[key]) <= 1.0:
                raise ChainError(f"{key} must lie in [0, 1]")
        if self.family in ("gossip-pairs", "block-diagonal-mixers") and merged["mixing"] > 0.5:
            raise ChainError("mixing above 1/2 breaks strong aperiodicity")
        object.__setattr__(self, "params", merged)
        object.__setattr__(self, "seed", int(self.seed) & _MASK64)

    def header(self) -> str:
        parts = [f"family={self.family}", f"n={self.n}", f"seed={self.seed}"]
        for k, v in self.params.items():
            if isinstance(v, tuple):
                v = ":".join(str(x) for x in v)
            parts.append(f"{k}={v!r}" if isinstance(v, float) else f"{k}={v}")
        return " ".join(parts)

    @classmethod
    def from_header(cls, text: str) -> "GeneratorSpec":
        kv = dict(tok.split("=", 1) for tok in text.split())
        family, n, seed = kv.pop("family"), int(kv.pop("n")), int(kv.pop("seed", "0"))
        return cls(family, n, parse_params(kv), seed)


def parse_params(kv: dict) -> dict:
    out = {}
    for k, v in kv.items():
        if k == "blocks":
            out[k] = tuple(int(x) for x in str(v).split(":")) if v not in ("None", "") else None
        elif k == "elite":
            out[k] = int(v)
        else:
            out[k] = float(v)
    return out


def stream(seed: int, t: int, replicate: int = 0) -> np.random.Generator:
    """Counter-based stream for ``A(t)``: key ``(seed, replicate)``, counter ``(0, 0, t, 0)``."""
    key = np.array([seed & _MASK64, replicate & _MASK64], dtype=np.uint64)
    counter = np.array([0, 0, t & _MASK64, 0], dtype=np.uint64)
    return np.random.Generator(np.random.Philox(key=key, counter=counter))


def _gossip(n: int, i: int, j: int, w: float) -> np.ndarray:
    a = np.eye(n)
    a[i, i] = a[j, j] = 1.0 - w
    a[i, j] = a[j, i] = w
    return a


def _base_static(spec: GeneratorSpec) -> np.ndarray:
    rng = stream(spec.seed, 0, replicate=(1 << 63))
    d = rng.dirichlet(np.ones(spec.n), size=spec.n)
    return 0.5 * np.eye(spec.n) + 0.5 * d


def _block_ranges(blocks) -> list:
    out, start = [], 0
    for b in blocks:
        out.append(list(range(start, start + b)))
        start += b
    return out


def sample_matrix(spec: GeneratorSpec, t: int, replicate: int = 0) -> np.ndarray:
    """One draw of ``A(t)``; a pure function of ``(spec, t, replicate)``."""
    n, p = spec.n, spec.params
    rng = stream(spec.seed, t, replicate)
    fam = spec.family
    if fam == "identity" or n == 1:
        return np.eye(n)
    if fam == "gossip-pairs":
        if rng.random() >= p["pair_prob"]:
            return np.eye(n)
        i, j = rng.choice(n, size=2, replace=False)
        return _gossip(n, int(i), int(j), p["mixing"])
    if fam == "lazy-random-walk":
        upper = np.triu(rng.random((n, n)) < p["edge_prob"], 1)
        adj = upper | upper.T
        deg = adj.sum(axis=1)
        w = p["self_weight"]
        a = np.zeros((n, n))
        for i in range(n):
            if deg[i] == 0:
                a[i, i] = 1.0
            else:
                a[i, adj[i]] = (1.0 - w) / deg[i]
                a[i, i] = w
        return a
    if fam == "one-directional-elite":
        w, e = p["self_weight"], p["elite"]
        a = np.zeros((n, n))
        for i in range(n):
            j = int(rng.integers(n - 1))
            j += j >= i
            a[i, i] = 1.0 if i == e else w
            if i != e:
                a[i, j] += 1.0 - w
        return a
    if fam == "block-diagonal-mixers":
        a = np.eye(n)
        for members in _block_ranges(p["blocks"]):
            pick = rng.random()
            if len(members) >= 2 and pick < p["pair_prob"]:
                i, j = rng.choice(members, size=2, replace=False)
                a = _gossip(n, int(i), int(j), p["mixing"]) @ a
        eps = p["leak"] * p["leak_decay"] ** t
        if eps > 0 and len(p["blocks"]) > 1:
            label = np.repeat(np.arange(len(p["blocks"])), p["blocks"])
            cross = [(i, j) for i, j in combinations(range(n), 2) if label[i] != label[j]]
            i, j = cross[int(rng.integers(len(cross)))]
            a = _gossip(n, i, j, eps) @ a
        return a
    if fam == "static-perturbed":
        r = rng.dirichlet(np.ones(n), size=n)
        return (1.0 - p["noise"]) * _base_static(spec) + p["noise"] * r
    raise ChainError(f"unsupported family {fam!r}")


def generate(spec: GeneratorSpec, count: int, t0: int = 0) -> ChainWindow:
    """``A(t0) .. A(t0 + count - 1)``; later times come from the same generator."""
    if count < 1:
        raise ChainError("count must be >= 1")
    mats = np.stack([sample_matrix(spec, t) for t in range(t0, t0 + count)])
    return ChainWindow(mats, t0=t0, extension="generator", generator=partial(sample_matrix, spec),
                       generator_spec=spec)


def _expected_gossip(n: int, members, q: float, w: float) -> np.ndarray:
    """``E[A]`` for one gossip step over ``members`` inside an ``n``-node chain."""
    e = np.eye(n)
    m = len(members)
    if m < 2:
        return e
    pairs = m * (m - 1) / 2
    for i in members:
        for j in members:
            if i != j:
                e[i, j] = q * w / pairs
        # a node is in a chosen pair with probability q (m-1)/pairs
        e[i, i] = 1.0 - q * w * (m - 1) / pairs
    return e


def expected_matrix(spec: GeneratorSpec, t: int) -> np.ndarray:
    """Closed-form ``E[A(t)]``."""
    n, p = spec.n, spec.params
    fam = spec.family
    if fam == "identity" or n == 1:
        return np.eye(n)
    if fam == "gossip-pairs":
        return _expected_gossip(n, range(n), p["pair_prob"], p["mixing"])
    if fam == "lazy-random-walk":
        w, q = p["self_weight"], p["edge_prob"]
        m = n - 2
        # E[1/(1 + Bin(m, q))] = (1 - (1-q)^(m+1)) / ((m+1) q)
        inv = (1.0 - (1.0 - q) ** (m + 1)) / ((m + 1) * q) if q > 0 else 1.0
        off = (1.0 - w) * q * inv
        e = np.full((n, n), off)
        np.fill_diagonal(e, 1.0 - off * (n - 1))
        return e
    if fam == "one-directional-elite":
        w, el = p["self_weight"], p["elite"]
        e = np.full((n, n), (1.0 - w) / (n - 1))
        np.fill_diagonal(e, w)
        e[el] = 0.0
        e[el, el] = 1.0
        return e
    if fam == "block-diagonal-mixers":
        e = np.eye(n)
        for members in _block_ranges(p["blocks"]):
            e = _expected_gossip(n, members, p["pair_prob"], p["mixing"]) @ e
        eps = p["leak"] * p["leak_decay"] ** t
        if eps > 0 and len(p["blocks"]) > 1:
            label = np.repeat(np.arange(len(p["blocks"])), p["blocks"])
            cross = [(i, j) for i, j in combinations(range(n), 2) if label[i] != label[j]]
            leak = sum(_gossip(n, i, j, eps) for i, j in cross) / len(cross)
            e = leak @ e
        return e
    if fam == "static-perturbed":
        return (1.0 - p["noise"]) * _base_static(spec) + p["noise"] * np.full((n, n), 1.0 / n)
    raise ChainError(f"unsupported family {fam!r}")


def expected_chain(spec: GeneratorSpec, count: int, t0: int = 0) -> ChainWindow:
    mats = np.stack([expected_matrix(spec, t) for t in range(t0, t0 + count)])
    return ChainWindow(mats, t0=t0, extension="generator", generator=partial(expected_matrix, spec))


@dataclass(frozen=True)
class FeedbackEstimate:
    gamma_hat: float
    stderr: float
    vacuous: bool


def feedback_coefficient(spec: GeneratorSpec, samples: int = 1000, t: int = 0,
                         floor: float = 1e-9) -> FeedbackEstimate:
    """Monte Carlo ``min_{i != j} E[a_ii a_ij] / E[a_ij]`` at time ``t``.

    Replicates ``1 .. samples`` of ``A(t)`` are used (replicate 0 is the one
    :func:`generate` returns). Pairs whose estimated ``E[a_ij]`` is below
    ``floor`` are skipped; if all are, the property holds vacuously and
    ``gamma_hat = 1``. The standard error is the delta-method error of the
    minimising ratio.
    """
    if samples < 1000:
        raise ChainError("feedback estimation needs at least 1000 samples")
    draws = np.stack([sample_matrix(spec, t, replicate=r) for r in range(1, samples + 1)])
    n = spec.n
    diag = np.diagonal(draws, axis1=1, axis2=2)
    prod = diag[:, :, None] * draws
    mean_a = draws.mean(axis=0)
    mean_p = prod.mean(axis=0)
    best, err = 1.0, 0.0
    vacuous = True
    for i in range(n):
        for j in range(n):
            if i == j or mean_a[i, j] < floor:
                continue
            vacuous = False
            r = mean_p[i, j] / mean_a[i, j]
            if r <= best:
                resid = prod[:, i, j] - r * draws[:, i, j]
                best, err = r, float(resid.std(ddof=1) / (mean_a[i, j] * np.sqrt(samples)))
    return FeedbackEstimate(float(best), err, vacuous)
