"""Moment duality checks between forward frequency processes and coalescents.

For any Lambda-coalescent and its Fleming-Viot dual, the n-th moment of the
type-0 frequency satisfies

    E[X_t^n] = sum_j P(block count at t = j | start n) x0^j,

and in particular the heterozygosity obeys the closed form

    E[X_t (1 - X_t)] = x0 (1 - x0) exp(-Lambda_total t),

because two lineages merge at rate Lambda_total. The helpers here estimate
forward moments by Monte Carlo (from the limit simulators or from particle
trajectories), evaluate the dual side through the block-counting chain, and
package z-scores into reports.
"""
from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .coalescent import LambdaMeasure, PointMassAtZero, \
    block_count_distribution, lambda_from_model
from .dynamics import ModelParams, simulate_replicates
from .errors import ParameterError
from .flemingviot import simulate_lfv, simulate_wf


@dataclass(frozen=True)
class MonteCarloEstimate:
    """Sample mean with its standard error."""

    mean: float
    se: float
    n_samples: int


def moment_estimate(samples) -> MonteCarloEstimate:
    arr = np.asarray(samples, dtype=np.float64)
    if arr.ndim != 1 or arr.size < 2:
        raise ParameterError("need a 1-d sample of size >= 2")
    return MonteCarloEstimate(
        mean=float(arr.mean()),
        se=float(arr.std(ddof=1) / math.sqrt(arr.size)),
        n_samples=arr.size,
    )


def dual_moment(measure: LambdaMeasure, n: int, t: float, x0: float) -> float:
    """E[X_t^n] through the coalescent side of the duality."""
    if not 0.0 <= x0 <= 1.0:
        raise ParameterError(f"x0 must lie in [0, 1], got {x0}")
    p = block_count_distribution(measure, n, t)
    return float(sum(p[j] * x0**j for j in range(1, n + 1)))


def heterozygosity_theory(measure: LambdaMeasure, x0: float,
                          t: float) -> float:
    """Exact E[X_t (1 - X_t)] for the limit process."""
    if not 0.0 <= x0 <= 1.0:
        raise ParameterError(f"x0 must lie in [0, 1], got {x0}")
    return x0 * (1.0 - x0) * math.exp(-measure.total_mass * t)


@dataclass(frozen=True)
class DualityCell:
    """One (t, n) comparison of forward Monte Carlo against the dual."""

    t: float
    n: int
    forward: MonteCarloEstimate
    dual: float
    z: float

    def to_jsonable(self, threshold: float) -> dict:
        return {
            "t": self.t,
            "n": self.n,
            "forward": {
                "mean": self.forward.mean,
                "se": self.forward.se,
                "n": self.forward.n_samples,
            },
            "dual": self.dual,
            "z": self.z,
            "pass": abs(self.z) <= threshold,
        }


@dataclass(frozen=True)
class DualityReport:
    """All (t, n) cells of a duality check plus the pass verdict."""

    source: str
    x0: float
    threshold: float
    cells: tuple[DualityCell, ...]
    extinction_frac: float | None = None

    @property
    def max_abs_z(self) -> float:
        return max(abs(c.z) for c in self.cells)

    @property
    def passed(self) -> bool:
        return self.max_abs_z <= self.threshold

    def to_jsonable(self) -> dict:
        return {
            "source": self.source,
            "x0": self.x0,
            "threshold": self.threshold,
            "passed": self.passed,
            "max_abs_z": self.max_abs_z,
            "extinction_frac": self.extinction_frac,
            "cells": [c.to_jsonable(self.threshold) for c in self.cells],
        }


def _z_score(est: MonteCarloEstimate, exact: float) -> float:
    if est.se == 0.0:
        return 0.0 if est.mean == exact else math.inf
    return (est.mean - exact) / est.se


def _build_cells(measure, x0, ts, ns, samples_by_t):
    cells = []
    for i, t in enumerate(ts):
        x = samples_by_t[i]
        for n in ns:
            est = moment_estimate(x**n)
            exact = dual_moment(measure, n, t, x0)
            cells.append(DualityCell(t=float(t), n=int(n), forward=est,
                                     dual=exact, z=_z_score(est, exact)))
    return tuple(cells)


def limit_duality(measure: LambdaMeasure, x0: float, ts, ns,
                  rng: np.random.Generator, paths: int, eps: float = 1e-3,
                  dt: float = 1e-4, threshold: float = 3.0) -> DualityReport:
    """Check the limit simulator against the coalescent dual.

    A point mass at zero runs the Wright-Fisher diffusion; other measures
    run the hybrid jump-diffusion with cutoff ``eps``.
    """
    ts = list(ts)
    if isinstance(measure, PointMassAtZero):
        x = simulate_wf(measure.mass, x0, ts, rng, paths, dt=dt)
        source = "wf"
    else:
        x = simulate_lfv(measure, x0, ts, rng, paths, eps=eps, dt=dt)
        source = "lfv"
    samples = [x[:, i] for i in range(len(ts))]
    return DualityReport(
        source=source, x0=x0, threshold=threshold,
        cells=_build_cells(measure, x0, ts, ns, samples),
    )


def particle_duality(params: ModelParams, init_counts, ts, ns,
                     master_seed: int, replicates: int, threads: int = 1,
                     threshold: float = 3.0) -> DualityReport:
    """Check particle-system type frequencies against the limit's dual.

    ``init_counts`` must have exactly two types; type 0 is the focal one.
    Extinct replicates keep frequency zero and stay in the sample (the limit
    never dies, so their fraction is reported for judging relevance).
    """
    arr = np.asarray(init_counts, dtype=np.int64)
    if arr.size != 2:
        raise ParameterError("particle duality needs exactly two types")
    x0 = float(arr[0] / arr.sum())
    measure = lambda_from_model(params)
    ts = list(ts)
    rs = simulate_replicates(params, arr, horizon=max(ts), obs_times=ts,
                             master_seed=master_seed, replicates=replicates,
                             threads=threads)
    samples = [rs.freqs[:, i, 0] for i in range(len(ts))]
    return DualityReport(
        source="particle", x0=x0, threshold=threshold,
        cells=_build_cells(measure, x0, ts, ns, samples),
        extinction_frac=float(rs.extinct.any(axis=1).mean()),
    )


def heterozygosity_check(measure: LambdaMeasure, x0: float, ts,
                         samples_by_t, rel_floor: float,
                         threshold: float = 3.0):
    """Compare heterozygosity samples against the exact decay.

    Returns a list of dicts, one per time, each passing when the deviation
    is within max(threshold * se, rel_floor * exact).
    """
    out = []
    for t, x in zip(ts, samples_by_t):
        est = moment_estimate(np.asarray(x) * (1.0 - np.asarray(x)))
        exact = heterozygosity_theory(measure, x0, t)
        band = max(threshold * est.se, rel_floor * exact)
        out.append({
            "t": float(t),
            "observed": est.mean,
            "se": est.se,
            "exact": exact,
            "band": band,
            "pass": abs(est.mean - exact) <= band,
        })
    return out
