"""Offspring distributions for the branching part of the population model.

Every birth event produces k >= 1 children. Two families are supported:

* ``zeta`` laws: p_k proportional to k^-(1+alpha), normalised by the Riemann
  zeta value zeta(1+alpha). alpha = 1 gives the k^-2 tail whose second moment
  diverges logarithmically; alpha in (1, 2) gives finite mean and infinite
  variance; alpha > 2 has finite variance.
* ``explicit`` laws: a finite probability vector over k = 1..len(pmf).

Sampling is distributionally exact. Zeta laws use cumulative inversion over a
head table (k <= head_cut) and, beyond it, rejection of k = floor(Y) + 1 with
Y Pareto(alpha, scale=head_cut) against the acceptance ratio

    a(k) = alpha / (k * expm1(-alpha * log1p(-1/k)))

which satisfies (Pareto cell mass of k) * a(k) = alpha * head_cut^alpha *
k^-(1+alpha) identically, so no approximation enters. The expm1/log1p form
avoids the catastrophic cancellation of (k-1)^-alpha - k^-alpha at large k.
"""
from __future__ import annotations

import math
from dataclasses import dataclass

import mpmath
import numpy as np
from numpy.typing import NDArray
from scipy.special import zeta as _zeta_fn
from scipy.stats import chisquare

from .errors import ParameterError, UnsupportedOperationError

# Head-table size for zeta laws. Beyond this the rejection sampler takes over;
# its acceptance rate at k = head_cut + 1 already exceeds 1 - 1/head_cut.
ZETA_HEAD_CUT = 4096

# Absolute truncation tolerance for pgf evaluation.
_PGF_TOL = 1e-12

# Pareto draws above this would overflow int64 after floor; the clamp fires
# with probability < 1e-19 per tail draw.
_INT64_GUARD = 8.9e18

_PGF_CHUNK = 1 << 20


@dataclass(frozen=True)
class OffspringLaw:
    """Immutable offspring distribution.

    ``head_probs[i]`` is P(k = i+1) for k < tail_start. For zeta laws the tail
    k >= tail_start carries mass 1 - head_cum[-1] with exact pmf
    k^-(1+alpha)/zeta(1+alpha); explicit laws have no tail. ``m`` and ``m2``
    are the first two moments (math.inf when divergent) and ``tail_p0`` is
    the tail constant lim_k k^(1+alpha) p_k for zeta laws, None otherwise.
    """

    kind: str
    alpha: float | None
    head_probs: NDArray[np.float64]
    head_cum: NDArray[np.float64]
    tail_start: int
    m: float
    m2: float
    tail_p0: float | None
    zeta_norm: float | None


def make_zeta(alpha: float, head_cut: int = ZETA_HEAD_CUT) -> OffspringLaw:
    """Build the zeta law p_k = k^-(1+alpha) / zeta(1+alpha), k >= 1."""
    if not (alpha > 0.0 and math.isfinite(alpha)):
        raise ParameterError(f"zeta tail exponent must be positive, got {alpha}")
    if head_cut < 1:
        raise ParameterError(f"head_cut must be >= 1, got {head_cut}")
    z = float(_zeta_fn(1.0 + alpha))
    ks = np.arange(1, head_cut + 1, dtype=np.float64)
    head = ks ** (-(1.0 + alpha)) / z
    cum = np.cumsum(head)
    m = float(_zeta_fn(alpha) / z) if alpha > 1.0 else math.inf
    m2 = float(_zeta_fn(alpha - 1.0) / z) if alpha > 2.0 else math.inf
    return OffspringLaw(
        kind="zeta",
        alpha=float(alpha),
        head_probs=head,
        head_cum=cum,
        tail_start=head_cut + 1,
        m=m,
        m2=m2,
        tail_p0=1.0 / z,
        zeta_norm=z,
    )


def make_explicit(pmf) -> OffspringLaw:
    """Build a finite-support law; pmf[i] is the weight of k = i + 1."""
    probs = np.asarray(pmf, dtype=np.float64)
    if probs.ndim != 1 or probs.size < 1:
        raise ParameterError("pmf must be a non-empty 1-d sequence")
    if np.any(probs < 0.0) or not np.all(np.isfinite(probs)):
        raise ParameterError("pmf entries must be finite and >= 0")
    total = float(probs.sum())
    if abs(total - 1.0) > 1e-12:
        raise ParameterError(f"pmf must sum to 1 within 1e-12, got {total!r}")
    probs = probs / total
    cum = np.cumsum(probs)
    cum[-1] = 1.0  # force an airtight head so inversion never falls past it
    ks = np.arange(1, probs.size + 1, dtype=np.float64)
    m = float(np.dot(ks, probs))
    m2 = float(np.dot(ks * ks, probs))
    return OffspringLaw(
        kind="explicit",
        alpha=None,
        head_probs=probs,
        head_cum=cum,
        tail_start=probs.size + 1,
        m=m,
        m2=m2,
        tail_p0=None,
        zeta_norm=None,
    )


def pmf(law: OffspringLaw, k: int) -> float:
    """Exact P(X = k)."""
    if k < 1:
        return 0.0
    if k < law.tail_start:
        return float(law.head_probs[k - 1])
    if law.kind == "explicit":
        return 0.0
    return float(k) ** (-(1.0 + law.alpha)) / law.zeta_norm


def tail_prob(law: OffspringLaw, k: int) -> float:
    """Exact P(X > k)."""
    if k < 1:
        return 1.0
    if law.kind == "explicit":
        if k >= law.head_probs.size:
            return 0.0
        return float(law.head_probs[k:].sum())
    # Hurwitz zeta: sum_{j > k} j^-(1+alpha) = zeta(1+alpha, k+1)
    return float(_zeta_fn(1.0 + law.alpha, k + 1)) / law.zeta_norm


def moments(law: OffspringLaw) -> tuple[float, float]:
    """(E[k], E[k^2]), math.inf where divergent."""
    return law.m, law.m2


def m2pd(law: OffspringLaw, delta: float) -> float:
    """E[k^(2+delta)], math.inf where divergent. Needs delta >= 0."""
    if delta < 0.0:
        raise ParameterError(f"delta must be >= 0, got {delta}")
    if law.kind == "explicit":
        ks = np.arange(1, law.head_probs.size + 1, dtype=np.float64)
        return float(np.dot(ks ** (2.0 + delta), law.head_probs))
    if delta >= law.alpha - 2.0:
        return math.inf
    return float(_zeta_fn(law.alpha - 1.0 - delta)) / law.zeta_norm


def _tail_draw(alpha: float, cut: int, rng: np.random.Generator) -> int:
    """One exact draw from p_k proportional to k^-(1+alpha) on k > cut."""
    while True:
        u1 = rng.random()
        y = cut * u1 ** (-1.0 / alpha) if u1 > 0.0 else math.inf
        if y > _INT64_GUARD:
            y = _INT64_GUARD
        k = int(y) + 1
        accept = alpha / (k * math.expm1(-alpha * math.log1p(-1.0 / k)))
        if rng.random() <= accept:
            return k


def sample(law: OffspringLaw, rng: np.random.Generator, size: int | None = None):
    """Draw offspring counts. Returns an int for size=None, else int64 array."""
    n = 1 if size is None else int(size)
    if n < 0:
        raise ParameterError(f"size must be >= 0, got {size}")
    u = rng.random(n)
    ks = np.searchsorted(law.head_cum, u, side="right").astype(np.int64) + 1
    if law.kind == "zeta":
        head_top = law.head_cum[-1]
        for i in np.nonzero(u >= head_top)[0]:
            ks[i] = _tail_draw(law.alpha, law.tail_start - 1, rng)
    if size is None:
        return int(ks[0])
    return ks


def pgf(law: OffspringLaw, s: float) -> float:
    """Generating function h(s) = sum_k p_k s^k on [0, 1].

    Zeta laws are summed in chunks until the remaining tail is provably below
    1e-12; when individual terms drop below that first, the remainder is
    closed out with an integral bracket (monotone integrand, midpoint value,
    half-cell error bound) through the upper incomplete gamma function.
    """
    if not (0.0 <= s <= 1.0):
        raise ParameterError(f"pgf argument must be in [0, 1], got {s}")
    if law.kind == "explicit":
        acc = 0.0
        for p in law.head_probs[::-1]:
            acc = (acc + p) * s
        return float(acc)
    if s == 0.0:
        return 0.0
    if s == 1.0:
        return 1.0
    expo = 1.0 + law.alpha
    ks = np.arange(1, law.tail_start, dtype=np.float64)
    log_s = math.log(s)
    total = float(np.dot(law.head_probs, np.exp(ks * log_s)))
    lo = law.tail_start
    while True:
        # remaining tail <= s^lo * P(X >= lo)
        bound = math.exp(lo * log_s) * tail_prob(law, lo - 1)
        if bound < 0.5 * _PGF_TOL:
            break
        first_term = math.exp(lo * log_s) * lo ** (-expo) / law.zeta_norm
        if first_term < _PGF_TOL:
            # integral bracket: sum_{k>=lo} g(k) in [I, I + g(lo)] for
            # decreasing g; take I + g(lo)/2, error <= g(lo)/2 < 5e-13
            lam = -log_s
            integral = lam ** law.alpha * float(
                mpmath.gammainc(-law.alpha, a=lam * lo)
            )
            total += integral / law.zeta_norm + 0.5 * first_term
            break
        hi = lo + _PGF_CHUNK
        kk = np.arange(lo, hi, dtype=np.float64)
        total += float(np.sum(np.exp(kk * log_s) * kk ** (-expo))) / law.zeta_norm
        lo = hi
    return float(total)


def tail_function(law: OffspringLaw, y: float) -> float:
    """y^(1+alpha) * p_floor(y), the normalised tail profile of a zeta law.

    Converges to the tail constant as y grows. Defined for zeta laws only.
    """
    if law.kind != "zeta":
        raise UnsupportedOperationError("tail_function needs a zeta law")
    if y < 1.0:
        raise ParameterError(f"tail_function needs y >= 1, got {y}")
    k = math.floor(y)
    # ratio form (y/k)^(1+alpha) / zeta stays finite for huge y
    return (y / k) ** (1.0 + law.alpha) / law.zeta_norm


def nonexplosion_check(law: OffspringLaw) -> bool:
    """Heuristic probe that the plain branching part cannot explode.

    Explosion of a pure branching process is ruled out when the integral of
    1/|h(s) - s| diverges at s -> 1. On a geometric grid u = 1 - s the scaled
    integrand z(u) = u (1 + log(1/u)) / |h(1-u) - (1-u)| stays bounded away
    from zero for non-explosive laws (finite mean, or the k^-2 boundary tail)
    and decays like a power of u for explosive heavy tails. Advisory only:
    tail exponents just below the boundary are indistinguishable on a finite
    grid.
    """
    us = np.logspace(-2.0, -8.0, 13)
    z_first = None
    z_last = None
    for u in us:
        diff = abs(pgf(law, 1.0 - float(u)) - (1.0 - float(u)))
        if diff < 1e-14:
            # h(s) = s within evaluation noise: deterministic unit offspring
            return True
        z = float(u) * (1.0 + math.log(1.0 / float(u))) / diff
        if z_first is None:
            z_first = z
        z_last = z
    return z_last >= 0.4 * z_first


def sampler_chi_square(
    law: OffspringLaw,
    draws: int,
    rng: np.random.Generator,
    min_expected: float = 10.0,
) -> tuple[float, float, int]:
    """Goodness-of-fit of ``sample`` against the exact cell probabilities.

    Head values get individual cells while their expected count stays above
    ``min_expected``; the tail is covered by geometrically widening cells and
    one open cell. Returns (statistic, p-value, degrees of freedom).
    """
    xs = sample(law, rng, draws)
    edges = []  # right-closed cell edges: cell i is (edges[i-1], edges[i]]
    probs = []
    k = 1
    while True:
        p = pmf(law, k)
        if k > 1 and p * draws < min_expected:
            break
        if law.kind == "explicit" and k >= law.tail_start:
            break
        edges.append(k)
        probs.append(p)
        k += 1
        if k > 4 * ZETA_HEAD_CUT:
            break
    lo = k
    width = max(1, lo)
    while True:
        rest = tail_prob(law, lo - 1)
        if rest * draws < 2.0 * min_expected or law.kind == "explicit":
            break
        hi = lo + width
        p = tail_prob(law, lo - 1) - tail_prob(law, hi - 1)
        if p * draws < min_expected:
            width *= 2
            continue
        edges.append(hi - 1)
        probs.append(p)
        lo = hi
        width *= 2
    open_mass = tail_prob(law, lo - 1)
    if open_mass > 0.0:
        edges.append(np.iinfo(np.int64).max)
        probs.append(open_mass)
    if len(probs) < 2:
        return 0.0, 1.0, 0
    counts = np.zeros(len(probs), dtype=np.int64)
    cell = np.searchsorted(np.asarray(edges, dtype=np.int64), xs, side="left")
    np.add.at(counts, cell, 1)
    expected = np.asarray(probs, dtype=np.float64) * draws
    # fold rounding slack into the largest cell so totals match exactly
    expected[np.argmax(expected)] += draws - expected.sum()
    stat, pvalue = chisquare(counts, expected)
    return float(stat), float(pvalue), len(probs) - 1
