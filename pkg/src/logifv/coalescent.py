"""Exchangeable coalescents driven by a finite measure Lambda on [0, 1].

A Lambda-coalescent on n blocks merges any fixed k of them at rate

    lambda(n, k) = integral over u of u^(k-2) (1-u)^(n-k) Lambda(du),

so u is the fraction of lineages caught in a single reproduction event.
Three measure families cover the scaling limits of the particle system:

* ``PointMassAtZero(mass)``: Lambda = mass * delta_0, the Kingman case;
  only pairs merge, at rate ``mass``.
* ``BetaScaled(alpha, scale)``: Lambda(du) = scale * u^(1-alpha)
  (1-u)^(alpha-1) du with alpha in (1, 2), the heavy-tail case; merge rates
  are scale * B(k - alpha, n - k + alpha).
* ``UniformScaled(scale)``: Lambda(du) = scale * du, the Bolthausen-Sznitman
  case; merge rates are scale * B(k - 1, n - k + 1).

``lambda_from_model`` maps a particle model to the measure of its limit.
The block-counting chain (number of blocks over time) has closed-form
generator entries, so its time-t law comes from a matrix exponential;
``simulate_block_count`` gives the Monte Carlo counterpart.
"""
from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np
from numpy.typing import NDArray
from scipy.linalg import expm as _expm
from scipy.special import betaln as _betaln

from .dynamics import ModelParams, scaling_for
from .errors import ParameterError, SizeLimitError

# expm on the block-counting generator stays cheap and well-conditioned up
# to this many starting blocks
MAX_BLOCKS = 64


@dataclass(frozen=True)
class PointMassAtZero:
    """Lambda = mass * delta_0: pairwise merges at rate ``mass``."""

    mass: float

    def __post_init__(self):
        if not (self.mass > 0.0 and math.isfinite(self.mass)):
            raise ParameterError(f"mass must be positive, got {self.mass}")

    @property
    def total_mass(self) -> float:
        return self.mass


@dataclass(frozen=True)
class BetaScaled:
    """Lambda(du) = scale * u^(1-alpha) (1-u)^(alpha-1) du, alpha in (1, 2)."""

    alpha: float
    scale: float

    def __post_init__(self):
        if not 1.0 < self.alpha < 2.0:
            raise ParameterError(
                f"alpha must lie in (1, 2), got {self.alpha}")
        if not (self.scale > 0.0 and math.isfinite(self.scale)):
            raise ParameterError(f"scale must be positive, got {self.scale}")

    @property
    def total_mass(self) -> float:
        return self.scale * math.exp(_betaln(2.0 - self.alpha, self.alpha))


@dataclass(frozen=True)
class UniformScaled:
    """Lambda(du) = scale * du on (0, 1)."""

    scale: float

    def __post_init__(self):
        if not (self.scale > 0.0 and math.isfinite(self.scale)):
            raise ParameterError(f"scale must be positive, got {self.scale}")

    @property
    def total_mass(self) -> float:
        return self.scale


LambdaMeasure = PointMassAtZero | BetaScaled | UniformScaled


def lambda_from_model(params: ModelParams) -> LambdaMeasure:
    """The Lambda measure of the coalescent dual to the model's limit.

    finite_variance gives pair merges at rate 1/effective_pop; stable gives
    the Beta-type measure with density b p0 alpha / n*^(alpha-1) *
    u^(1-alpha) (1-u)^(alpha-1); neveu gives the uniform measure with
    density b p0.
    """
    s = scaling_for(params)
    if params.regime == "finite_variance":
        return PointMassAtZero(mass=1.0 / s.effective_pop)
    if params.regime == "stable":
        a = params.law.alpha
        scale = params.b * params.law.tail_p0 * a / s.n_star ** (a - 1.0)
        return BetaScaled(alpha=a, scale=scale)
    return UniformScaled(scale=params.b * params.law.tail_p0)


def merge_rate(measure: LambdaMeasure, n: int, k: int) -> float:
    """Rate lambda(n, k) at which a fixed k-subset of n blocks merges."""
    if n < 2 or not 2 <= k <= n:
        raise ParameterError(f"need n >= 2 and 2 <= k <= n, got n={n} k={k}")
    if isinstance(measure, PointMassAtZero):
        return measure.mass if k == 2 else 0.0
    if isinstance(measure, BetaScaled):
        a = measure.alpha
        return measure.scale * math.exp(_betaln(k - a, n - k + a))
    return measure.scale * math.exp(_betaln(k - 1.0, n - k + 1.0))


def total_merge_rate(measure: LambdaMeasure, n: int) -> float:
    """Total jump rate of the block-counting chain out of state n."""
    if n < 2:
        return 0.0
    return math.fsum(
        math.comb(n, k) * merge_rate(measure, n, k) for k in range(2, n + 1))


def block_generator(measure: LambdaMeasure,
                    n_max: int) -> NDArray[np.float64]:
    """Generator of the block-counting chain on states 0..n_max.

    Row/column index is the block count; a k-merge moves j to j - k + 1 at
    rate C(j, k) lambda(j, k). States 0 and 1 are absorbing (row zero).
    """
    if n_max < 1:
        raise ParameterError(f"n_max must be >= 1, got {n_max}")
    q = np.zeros((n_max + 1, n_max + 1), dtype=np.float64)
    for j in range(2, n_max + 1):
        for k in range(2, j + 1):
            rate = math.comb(j, k) * merge_rate(measure, j, k)
            q[j, j - k + 1] += rate
        q[j, j] = -math.fsum(q[j, :j].tolist())
    return q


def block_count_distribution(measure: LambdaMeasure, n: int,
                             t: float) -> NDArray[np.float64]:
    """Law of the block count at time t started from n blocks.

    Returns a vector p of length n + 1 with p[j] = P(count = j); p[0] = 0.
    """
    if n < 1:
        raise ParameterError(f"n must be >= 1, got {n}")
    if n > MAX_BLOCKS:
        raise SizeLimitError(
            f"block count distribution supports n <= {MAX_BLOCKS}, got {n}")
    if not (t >= 0.0 and math.isfinite(t)):
        raise ParameterError(f"t must be finite and >= 0, got {t}")
    if n == 1:
        return np.array([0.0, 1.0])
    q = block_generator(measure, n)
    p = _expm(t * q)[n]
    # expm noise can leave tiny negatives; clip and renormalise
    p = np.clip(p, 0.0, None)
    return p / p.sum()


def _jump_tables(measure: LambdaMeasure, n: int):
    """Per-state total rates and cumulative k-merge probabilities.

    Returns (q, cums) with q[j] the exit rate from state j and cums[j] the
    cumulative distribution over k = 2..j of picking a k-merge.
    """
    q = np.zeros(n + 1)
    cums: list[NDArray[np.float64] | None] = [None] * (n + 1)
    for j in range(2, n + 1):
        rates = np.array([math.comb(j, k) * merge_rate(measure, j, k)
                          for k in range(2, j + 1)])
        tot = float(math.fsum(rates.tolist()))
        q[j] = tot
        c = np.cumsum(rates / tot)
        c[-1] = 1.0
        cums[j] = c
    return q, cums


def simulate_block_count(measure: LambdaMeasure, n: int, t: float,
                         rng: np.random.Generator, size: int | None = None):
    """Monte Carlo block count at time t started from n blocks.

    Returns an int when ``size`` is None, else an int64 array of that length.
    All replicas advance state-group by state-group, so the cost is O(n)
    vectorised rounds regardless of ``size``.
    """
    if n < 1:
        raise ParameterError(f"n must be >= 1, got {n}")
    if not (t >= 0.0 and math.isfinite(t)):
        raise ParameterError(f"t must be finite and >= 0, got {t}")
    scalar = size is None
    m = 1 if scalar else int(size)
    if m < 1:
        raise ParameterError(f"size must be >= 1, got {size}")
    q, cums = _jump_tables(measure, n)
    state = np.full(m, n, dtype=np.int64)
    clock = np.zeros(m)
    active = state > 1
    while np.any(active):
        idx = np.nonzero(active)[0]
        waits = rng.exponential(size=idx.size) / q[state[idx]]
        clock[idx] += waits
        # a jump after t never lands: the state at t is the pre-jump state
        landed = idx[clock[idx] <= t]
        for j in np.unique(state[landed]):
            grp = landed[state[landed] == j]
            ks = 2 + np.searchsorted(cums[j], rng.random(grp.size),
                                     side="right")
            state[grp] = j - ks + 1
        active[:] = False
        active[landed] = state[landed] > 1
    if scalar:
        return int(state[0])
    return state


def simulate_partition(measure: LambdaMeasure, labels, t: float,
                       rng: np.random.Generator) -> frozenset:
    """Partition-valued coalescent at time t started from singletons.

    Returns a frozenset of frozensets covering ``labels``.
    """
    blocks = [frozenset([x]) for x in labels]
    if len({x for blk in blocks for x in blk}) != len(blocks):
        raise ParameterError("labels must be distinct")
    if not (t >= 0.0 and math.isfinite(t)):
        raise ParameterError(f"t must be finite and >= 0, got {t}")
    clock = 0.0
    while len(blocks) > 1:
        j = len(blocks)
        q, cums = _jump_tables(measure, j)
        clock += rng.exponential() / q[j]
        if clock > t:
            break
        k = 2 + int(np.searchsorted(cums[j], rng.random(), side="right"))
        chosen = rng.choice(j, size=k, replace=False)
        merged = frozenset().union(*(blocks[i] for i in chosen))
        blocks = [blk for i, blk in enumerate(blocks)
                  if i not in set(chosen.tolist())]
        blocks.append(merged)
    return frozenset(blocks)
