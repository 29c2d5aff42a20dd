"""Particle-system model, scaling regimes, and the simulation front end.

The population is a continuous-time branching process with logistic
competition: each of N individuals gives birth at rate b to k children
(k drawn from the offspring law, children inherit the parent's type) and dies
at rate d + (c/K) N. K is the scale parameter; each regime declares how raw
time and population size are rescaled so the measure-valued process has a
nontrivial limit:

* ``finite_variance``: time K, size K; the type-frequency limit is a
  Fleming-Viot diffusion with resampling rate 1/effective_pop,
  effective_pop = n_star / (b (m + m2)).
* ``stable`` (zeta offspring, tail exponent alpha in (1, 2)): time
  K^(alpha-1), size K; the limit is a Lambda-Fleming-Viot process with a
  Beta-type Lambda measure.
* ``neveu`` (zeta offspring, alpha = 1): time 1, size K log K; the limit has
  a uniform Lambda measure.

The equilibrium scaled size is n_star = (b m - d)/c for the first two
regimes and n_star = b p0 / c (p0 the offspring tail constant) for neveu.

The event loop runs in a compiled kernel when the extension built, with a
pure-Python twin selected as fallback; both consume the same uniform stream
and give bit-identical trajectories (set LOGIFV_FORCE_PYTHON=1 to force the
fallback).
"""
from __future__ import annotations

import math
import os
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field

import numpy as np
from numpy.typing import NDArray

from . import _engine_py
from .errors import ExtinctError, ParameterError
from .offspring import OffspringLaw

if os.environ.get("LOGIFV_FORCE_PYTHON"):
    _engine = _engine_py
    _BACKEND = "python"
else:
    try:
        from . import _engine_cy as _engine  # type: ignore[no-redef]

        _BACKEND = "compiled"
    except ImportError:
        _engine = _engine_py
        _BACKEND = "python"

REGIMES = ("finite_variance", "stable", "neveu")

# domain tag separating replicate streams from other consumers of a master seed
STREAM_DOMAIN_REPLICATES = 0

_AUDIT_EVERY = 1 << 16


def engine_backend() -> str:
    """Which event-loop kernel is active: 'compiled' or 'python'."""
    return _BACKEND


@dataclass(frozen=True)
class ModelParams:
    """Model parameters. Validates regime compatibility on construction."""

    b: float
    d: float
    c: float
    K: int
    law: OffspringLaw
    regime: str

    def __post_init__(self):
        if not (self.b > 0.0 and math.isfinite(self.b)):
            raise ParameterError(f"birth rate must be positive, got {self.b}")
        if not (self.d >= 0.0 and math.isfinite(self.d)):
            raise ParameterError(f"death rate must be >= 0, got {self.d}")
        if not (self.c > 0.0 and math.isfinite(self.c)):
            raise ParameterError(f"competition rate must be positive, got {self.c}")
        if int(self.K) != self.K or self.K < 1:
            raise ParameterError(f"scale K must be a positive integer, got {self.K}")
        if self.regime not in REGIMES:
            raise ParameterError(f"unknown regime {self.regime!r}")
        if self.regime == "finite_variance":
            if not math.isfinite(self.law.m2):
                raise ParameterError(
                    "finite_variance regime needs a finite second moment "
                    "(zeta laws require alpha > 2)"
                )
        elif self.regime == "stable":
            if self.law.kind != "zeta" or not (1.0 < self.law.alpha < 2.0):
                raise ParameterError(
                    "stable regime needs a zeta law with tail exponent in (1, 2)"
                )
        else:  # neveu
            if self.law.kind != "zeta" or self.law.alpha != 1.0:
                raise ParameterError(
                    "neveu regime needs the zeta law with tail exponent 1"
                )
            if self.K < 3:
                raise ParameterError("neveu regime needs K >= 3 so K log K >= K")
        if self.regime in ("finite_variance", "stable"):
            if not self.b * self.law.m > self.d:
                raise ParameterError(
                    f"supercriticality b*m > d required, got "
                    f"b*m={self.b * self.law.m}, d={self.d}"
                )

    @property
    def c_K(self) -> float:
        return self.c / self.K


@dataclass(frozen=True)
class RegimeScaling:
    """Derived scaling data for a parameter set."""

    regime: str
    time_factor: float
    size_factor: float
    n_star: float
    effective_pop: float | None


def scaling_for(params: ModelParams) -> RegimeScaling:
    law = params.law
    if params.regime == "finite_variance":
        n_star = (params.b * law.m - params.d) / params.c
        return RegimeScaling(
            regime=params.regime,
            time_factor=float(params.K),
            size_factor=float(params.K),
            n_star=n_star,
            effective_pop=n_star / (params.b * (law.m + law.m2)),
        )
    if params.regime == "stable":
        n_star = (params.b * law.m - params.d) / params.c
        return RegimeScaling(
            regime=params.regime,
            time_factor=float(params.K) ** (law.alpha - 1.0),
            size_factor=float(params.K),
            n_star=n_star,
            effective_pop=None,
        )
    n_star = params.b * law.tail_p0 / params.c
    return RegimeScaling(
        regime=params.regime,
        time_factor=1.0,
        size_factor=params.K * math.log(params.K),
        n_star=n_star,
        effective_pop=None,
    )


@dataclass(frozen=True)
class Trajectory:
    """One replicate's records at the scaled observation times.

    Frequencies sum to 1 while the population is alive; after extinction the
    row is all zeros (the mass sits on a sentinel type outside the initial
    labels) and ``extinct`` flags it.
    """

    scaled_times: NDArray[np.float64]
    counts: NDArray[np.int64]
    n_bar: NDArray[np.float64]
    freqs: NDArray[np.float64]
    extinct: NDArray[np.bool_]
    events: int
    final_raw_time: float
    replicate: int | None = None


@dataclass(frozen=True)
class ReplicateSet:
    """Stacked trajectories of independent replicates (axis 0)."""

    scaled_times: NDArray[np.float64]
    counts: NDArray[np.int64]
    n_bar: NDArray[np.float64]
    freqs: NDArray[np.float64]
    extinct: NDArray[np.bool_]
    events: NDArray[np.int64]

    @property
    def n_replicates(self) -> int:
        return self.counts.shape[0]

    def trajectory(self, i: int) -> Trajectory:
        return Trajectory(
            scaled_times=self.scaled_times,
            counts=self.counts[i],
            n_bar=self.n_bar[i],
            freqs=self.freqs[i],
            extinct=self.extinct[i],
            events=int(self.events[i]),
            final_raw_time=math.nan,
            replicate=i,
        )


@dataclass
class PopulationState:
    """Mutable state for single-event stepping."""

    counts: NDArray[np.int64]
    total: int
    raw_time: float
    _fenwick: _engine_py.Fenwick = field(repr=False, default=None)
    _kahan_comp: float = field(repr=False, default=0.0)

    @classmethod
    def from_counts(cls, counts) -> "PopulationState":
        arr = np.asarray(counts, dtype=np.int64).copy()
        if arr.ndim != 1 or arr.size < 1:
            raise ParameterError("counts must be a non-empty 1-d vector")
        if np.any(arr < 0):
            raise ParameterError("counts must be >= 0")
        state = cls(counts=arr, total=int(arr.sum()), raw_time=0.0)
        state._fenwick = _engine_py.Fenwick(arr.tolist())
        return state


@dataclass(frozen=True)
class EventRecord:
    """Outcome of one step: 'birth' or 'death', acting type, offspring, wait."""

    kind: str
    type_index: int
    offspring: int
    wait: float


def replicate_stream(master_seed: int, index: int,
                     domain: int = STREAM_DOMAIN_REPLICATES) -> np.random.Philox:
    """Independent counter-based bit generator for (master_seed, index)."""
    ss = np.random.SeedSequence(entropy=master_seed, spawn_key=(domain, index))
    return np.random.Philox(ss)


def _law_kernel_args(law: OffspringLaw):
    is_zeta = law.kind == "zeta"
    return (
        law.head_cum,
        is_zeta,
        law.alpha if is_zeta else 1.0,
        law.tail_start - 1,
    )


def step(state: PopulationState, params: ModelParams,
         stream: _engine_py.UniformStream) -> EventRecord:
    """Advance the state by exactly one event (raw clock)."""
    if state.total == 0:
        raise ExtinctError("cannot step an extinct population")
    total = state.total
    rate_birth = params.b * total
    rate_total = rate_birth + (params.d + params.c_K * total) * total
    wait = -math.log1p(-stream.next()) / rate_total
    y = wait - state._kahan_comp
    t_next = state.raw_time + y
    state._kahan_comp = (t_next - state.raw_time) - y
    state.raw_time = t_next
    u_evt = stream.next()
    j = state._fenwick.find(stream.next() * total)
    while state.counts[j] == 0:
        j = (j + 1) % state.counts.size
    head_cum, is_zeta, alpha, cut = _law_kernel_args(params.law)
    if u_evt * rate_total < rate_birth:
        k = _engine_py.draw_offspring(stream, head_cum, is_zeta, alpha, cut)
        state.counts[j] += k
        state.total += k
        state._fenwick.add(j, k)
        return EventRecord(kind="birth", type_index=int(j), offspring=k, wait=wait)
    state.counts[j] -= 1
    state.total -= 1
    state._fenwick.add(j, -1)
    return EventRecord(kind="death", type_index=int(j), offspring=0, wait=wait)


def _check_obs_times(obs_times, horizon: float) -> NDArray[np.float64]:
    obs = np.asarray(obs_times, dtype=np.float64)
    if obs.ndim != 1 or obs.size < 1:
        raise ParameterError("obs_times must be a non-empty 1-d vector")
    if np.any(np.diff(obs) <= 0.0):
        raise ParameterError("obs_times must be strictly increasing")
    if obs[0] < 0.0 or obs[-1] > horizon:
        raise ParameterError("obs_times must lie within [0, horizon]")
    return obs


def simulate(params: ModelParams, init_counts, horizon: float,
             obs_times=None, seed=0, audit: bool = False,
             replicate: int | None = None) -> Trajectory:
    """Run one replicate to the scaled horizon, recording at obs_times.

    ``seed`` may be an int (a replicate stream is derived from it), a
    SeedSequence, or a BitGenerator. Records carry the left limit when an
    observation instant ties with an event time.
    """
    if not (horizon >= 0.0 and math.isfinite(horizon)):
        raise ParameterError(f"horizon must be finite and >= 0, got {horizon}")
    if obs_times is None:
        obs_times = [horizon]
    obs = _check_obs_times(obs_times, horizon)
    arr = np.asarray(init_counts, dtype=np.int64)
    if arr.ndim != 1 or arr.size < 1 or np.any(arr < 0):
        raise ParameterError("init_counts must be a non-empty vector of counts >= 0")
    if isinstance(seed, np.random.BitGenerator):
        bitgen = seed
    elif isinstance(seed, np.random.SeedSequence):
        bitgen = np.random.Philox(seed)
    else:
        bitgen = replicate_stream(int(seed), 0)
    scales = scaling_for(params)
    obs_raw = obs * scales.time_factor
    head_cum, is_zeta, alpha, cut = _law_kernel_args(params.law)
    counts, events, t_final = _engine.run_sim(
        arr, params.b, params.d, params.c_K, head_cum, is_zeta, alpha, cut,
        obs_raw, bitgen, _AUDIT_EVERY if audit else 0,
    )
    return _package_trajectory(obs, counts, events, t_final, scales, replicate)


def _package_trajectory(obs, counts, events, t_final, scales, replicate):
    totals = counts.sum(axis=1)
    n_bar = totals / scales.size_factor
    freqs = np.zeros(counts.shape, dtype=np.float64)
    alive = totals > 0
    freqs[alive] = counts[alive] / totals[alive, None]
    return Trajectory(
        scaled_times=obs,
        counts=counts,
        n_bar=n_bar,
        freqs=freqs,
        extinct=~alive,
        events=int(events),
        final_raw_time=float(t_final),
        replicate=replicate,
    )


def simulate_replicates(params: ModelParams, init_counts, horizon: float,
                        obs_times, master_seed: int, replicates: int,
                        threads: int = 1) -> ReplicateSet:
    """Independent replicates; replicate i uses the stream derived from
    (master_seed, i), so results do not depend on the thread count."""
    if replicates < 1:
        raise ParameterError(f"replicates must be >= 1, got {replicates}")
    obs = _check_obs_times(obs_times if obs_times is not None else [horizon],
                           horizon)
    arr = np.asarray(init_counts, dtype=np.int64)
    scales = scaling_for(params)
    obs_raw = obs * scales.time_factor
    head_cum, is_zeta, alpha, cut = _law_kernel_args(params.law)
    n_types = arr.size
    all_counts = np.zeros((replicates, obs.size, n_types), dtype=np.int64)
    all_events = np.zeros(replicates, dtype=np.int64)

    def one(i: int) -> None:
        bitgen = replicate_stream(master_seed, i)
        counts, events, _ = _engine.run_sim(
            arr, params.b, params.d, params.c_K, head_cum, is_zeta, alpha,
            cut, obs_raw, bitgen, 0,
        )
        all_counts[i] = counts
        all_events[i] = events

    # threads only pay off with the compiled kernel (it releases the GIL)
    if threads > 1 and _BACKEND == "compiled":
        with ThreadPoolExecutor(max_workers=threads) as pool:
            list(pool.map(one, range(replicates)))
    else:
        for i in range(replicates):
            one(i)

    totals = all_counts.sum(axis=2)
    n_bar = totals / scales.size_factor
    freqs = np.zeros(all_counts.shape, dtype=np.float64)
    alive = totals > 0
    freqs[alive] = all_counts[alive] / totals[alive][:, None]
    return ReplicateSet(
        scaled_times=obs,
        counts=all_counts,
        n_bar=n_bar,
        freqs=freqs,
        extinct=~alive,
        events=all_events,
    )


def frequency(state_or_counts) -> NDArray[np.float64]:
    """Type-frequency vector; all zeros for the extinct sentinel state."""
    if isinstance(state_or_counts, PopulationState):
        counts = state_or_counts.counts
    else:
        counts = np.asarray(state_or_counts, dtype=np.int64)
    total = counts.sum()
    if total == 0:
        return np.zeros(counts.size, dtype=np.float64)
    return counts / float(total)


@dataclass(frozen=True)
class OccupationStats:
    """Band statistics of a scaled-size path around its equilibrium."""

    sup_dev: float
    frac_outside: float


def occupation_stats(traj: Trajectory, n_star: float, eps: float,
                     horizon: float | None = None) -> OccupationStats:
    """sup |N_bar - n_star| over the records, and the time fraction outside
    the eps-band (records weighted by their forward gaps; the last record
    extends to the horizon)."""
    if eps <= 0.0:
        raise ParameterError(f"eps must be positive, got {eps}")
    times = traj.scaled_times
    if horizon is None:
        horizon = float(times[-1])
    if horizon < times[-1]:
        raise ParameterError("horizon must not precede the last record")
    dev = np.abs(traj.n_bar - n_star)
    span = horizon - float(times[0])
    if span <= 0.0:
        return OccupationStats(sup_dev=float(dev.max()), frac_outside=0.0)
    gaps = np.diff(np.append(times, horizon))
    frac = float(np.dot(gaps, (dev > eps).astype(np.float64)) / span)
    return OccupationStats(sup_dev=float(dev.max()), frac_outside=frac)


def lyapunov(n: float, n_star: float) -> float:
    """V(n) = n/n* - 1 - log(n/n*); zero exactly at n*, positive elsewhere."""
    if n <= 0.0 or n_star <= 0.0:
        raise ParameterError("lyapunov needs n > 0 and n_star > 0")
    r = n / n_star
    return r - 1.0 - math.log(r)


def drift_rate(params: ModelParams) -> float:
    """Logistic relaxation rate of the macroscopic flow (per unit of the
    flow's own clock): b m - d in the finite-mean regimes, c n_star for
    neveu."""
    if params.regime == "neveu":
        return params.c * scaling_for(params).n_star
    return params.b * params.law.m - params.d


def logistic_flow(n0: float, t: float, rate: float, n_star: float) -> float:
    """Closed-form solution of dn/dt = rate * n * (1 - n/n_star)."""
    if n0 < 0.0:
        raise ParameterError(f"n0 must be >= 0, got {n0}")
    if n0 == 0.0:
        return 0.0
    return n_star / (1.0 + (n_star / n0 - 1.0) * math.exp(-rate * t))
