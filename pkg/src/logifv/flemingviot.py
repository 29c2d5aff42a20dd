"""Frequency processes of the scaling limits: Fleming-Viot simulators.

For a two-type population the limit frequency X_t of type 0 follows:

* Kingman case (``PointMassAtZero(mass)``): the Wright-Fisher diffusion
  dX = sqrt(mass * X (1 - X)) dW.
* General Lambda with no atom at zero: a jump process where reproduction
  events of size u arrive at rate u^-2 Lambda(du) and send X to
  (1 - u) X + u B with B ~ Bernoulli(X) (the parent's type).

``simulate_lfv`` integrates the hybrid scheme: jumps of size below a cutoff
``eps`` are folded into a diffusion with variance rate sigma^2(eps) =
Lambda((0, eps)) (their exact second-order effect), and jumps above ``eps``
are applied literally with Poisson arrivals at rate R(eps) = integral of
u^-2 Lambda(du) over [eps, 1). The scheme's pair-coalescence rate is
sigma^2(eps) + Lambda([eps, 1)) = Lambda((0, 1)) exactly, independent of
``eps``, so heterozygosity decay is a sharp cross-check. Truncation only
touches third and higher moments, at O(eps) bias, and halving ``eps`` is the
standard stability check.

Boundaries 0 and 1 are absorbing. A clipped Euler step is biased there (the
clipped half-Gaussian pushes mass back inside), so within a layer of width
10 sigma^2 dt the diffusion step instead uses the exact transition of its
small-x limit dX = sqrt(sigma^2 X) dW, a zero-dimension squared Bessel
process: X_{t+dt} = Gamma(N, sigma^2 dt / 2) with N ~ Poisson(2 X_t /
(sigma^2 dt)), which preserves the martingale property and the quadratic
variation exactly and absorbs with the correct probability. Dropping the
(1 - x) factor inside the layer costs a relative O(layer width) on the noise
variance there, far below the clipping bias it removes.
"""
from __future__ import annotations

import math

import mpmath
import numpy as np
from numpy.typing import NDArray
from scipy.special import betainc as _betainc_reg
from scipy.special import betaln as _betaln

from .coalescent import (BetaScaled, LambdaMeasure, PointMassAtZero,
                         UniformScaled)
from .errors import ParameterError, UnsupportedOperationError

def small_jump_variance(measure: LambdaMeasure, eps: float) -> float:
    """sigma^2(eps) = Lambda below the cutoff (the atom at 0 included)."""
    _check_eps(eps)
    if isinstance(measure, PointMassAtZero):
        return measure.mass
    if isinstance(measure, UniformScaled):
        return measure.scale * eps
    a = measure.alpha
    # regularized incomplete beta times B(2-a, a) gives the raw integral
    return measure.scale * math.exp(_betaln(2.0 - a, a)) * float(
        _betainc_reg(2.0 - a, a, eps))


def jump_rate(measure: LambdaMeasure, eps: float) -> float:
    """R(eps): arrival rate of reproduction events of size >= eps."""
    _check_eps(eps)
    if isinstance(measure, PointMassAtZero):
        return 0.0
    if isinstance(measure, UniformScaled):
        return measure.scale * (1.0 / eps - 1.0)
    a = measure.alpha
    # integral of u^(-a-1) (1-u)^(a-1) du needs the a < 0 continuation
    return measure.scale * float(mpmath.betainc(-a, a, eps, 1.0))


def _check_eps(eps: float) -> None:
    if not 0.0 < eps < 1.0:
        raise ParameterError(f"eps must lie in (0, 1), got {eps}")


class JumpSizeSampler:
    """Draws reproduction-event sizes from u^-2 Lambda(du) on [eps, hi).

    Uniform measure: exact analytic inversion of the u^-2 density. Beta
    measure: exact rejection with proposals from the analytically
    invertible u^(-1-a) factor, accepted with probability (1-u)^(a-1); the
    acceptance rate is 1 - O(eps) since proposals concentrate near the
    cutoff where the correction factor is ~1.
    """

    def __init__(self, measure: LambdaMeasure, eps: float, hi: float = 1.0):
        _check_eps(eps)
        if not eps < hi <= 1.0:
            raise ParameterError(
                f"need eps < hi <= 1, got eps={eps}, hi={hi}")
        if isinstance(measure, PointMassAtZero):
            raise UnsupportedOperationError(
                "a point mass at zero has no jumps above any cutoff")
        self.measure = measure
        self.eps = eps
        self.hi = hi
        if isinstance(measure, BetaScaled):
            a = measure.alpha
            self._lo_pow = eps ** -a
            self._span = eps ** -a - hi ** -a
        else:
            self._lo_pow = None

    def draw(self, rng: np.random.Generator,
             size: int) -> NDArray[np.float64]:
        if self._lo_pow is None:
            # analytic inverse of the normalised u^-2 density on [eps, hi)
            inv_eps = 1.0 / self.eps
            return 1.0 / (inv_eps - rng.random(size)
                          * (inv_eps - 1.0 / self.hi))
        a = self.measure.alpha
        out = np.empty(size)
        idx = np.arange(size)
        while idx.size:
            u = (self._lo_pow
                 - rng.random(idx.size) * self._span) ** (-1.0 / a)
            accept = rng.random(idx.size) < (1.0 - u) ** (a - 1.0)
            out[idx[accept]] = u[accept]
            idx = idx[~accept]
        return out


def _obs_grid(obs_times, dt: float) -> NDArray[np.int64]:
    obs = np.asarray(obs_times, dtype=np.float64)
    if obs.ndim != 1 or obs.size < 1:
        raise ParameterError("obs_times must be a non-empty 1-d vector")
    if np.any(obs < 0.0) or not np.all(np.isfinite(obs)):
        raise ParameterError("obs_times must be finite and >= 0")
    if np.any(np.diff(obs) <= 0.0):
        raise ParameterError("obs_times must be strictly increasing")
    idx = np.rint(obs / dt).astype(np.int64)
    if np.any(np.diff(idx) <= 0) and obs.size > 1:
        raise ParameterError("obs_times closer than dt cannot be resolved")
    return idx


class _Diffusion:
    """One Euler step of dX = sqrt(sigma^2 X(1-X)) dW with the exact
    squared-Bessel transition inside the boundary layers."""

    def __init__(self, sigma2: float, dt: float):
        self.sigma2 = sigma2
        self.sqrt_dt = math.sqrt(dt)
        self.theta = min(10.0 * sigma2 * dt, 0.5)  # boundary layer width
        self.pois_c = 2.0 / (sigma2 * dt) if sigma2 > 0.0 else 0.0
        self.gamma_scale = sigma2 * dt / 2.0

    def step(self, x: NDArray[np.float64], rng: np.random.Generator,
             noise: NDArray[np.float64] | None = None) -> None:
        """Advance ``x`` in place; ``noise`` optionally supplies one
        standard normal per path (for coupling runs), else normals are
        drawn for the interior paths only."""
        sigma2 = self.sigma2
        if sigma2 <= 0.0:
            return
        lo = x < self.theta
        hi = x > 1.0 - self.theta
        mid = ~(lo | hi)
        xm = x[mid]
        dw = rng.standard_normal(xm.size) if noise is None else noise[mid]
        x[mid] = np.clip(
            xm + np.sqrt(sigma2 * xm * (1.0 - xm)) * self.sqrt_dt * dw,
            0.0, 1.0)
        if lo.any():
            n_bes = rng.poisson(x[lo] * self.pois_c)
            x[lo] = np.minimum(rng.gamma(n_bes, self.gamma_scale), 1.0)
        if hi.any():
            n_bes = rng.poisson((1.0 - x[hi]) * self.pois_c)
            x[hi] = 1.0 - np.minimum(rng.gamma(n_bes, self.gamma_scale), 1.0)


def _check_run_args(x0: float, paths: int, dt: float) -> None:
    if not 0.0 <= x0 <= 1.0:
        raise ParameterError(f"x0 must lie in [0, 1], got {x0}")
    if paths < 1:
        raise ParameterError(f"paths must be >= 1, got {paths}")
    if not (dt > 0.0 and math.isfinite(dt)):
        raise ParameterError(f"dt must be positive, got {dt}")


def _apply_jumps(x: NDArray[np.float64], counts: NDArray[np.int64],
                 sampler: JumpSizeSampler, rng: np.random.Generator) -> None:
    """Apply counts[i] sequential jumps to x[i], in place."""
    idx = np.flatnonzero(counts)
    while idx.size:
        sizes = sampler.draw(rng, idx.size)
        parents = (rng.random(idx.size) < x[idx]).astype(np.float64)
        x[idx] = (1.0 - sizes) * x[idx] + sizes * parents
        counts[idx] -= 1
        idx = idx[counts[idx] > 0]


def _run_hybrid(sigma2: float, rate: float, sampler, x0: float, obs_times,
                rng: np.random.Generator, paths: int,
                dt: float) -> NDArray[np.float64]:
    _check_run_args(x0, paths, dt)
    obs_idx = _obs_grid(obs_times, dt)
    out = np.empty((paths, obs_idx.size))
    x = np.full(paths, float(x0))
    lam = rate * dt
    diffusion = _Diffusion(sigma2, dt)
    # paths at exactly 0 or 1 are absorbed under both moves; skip them
    active = np.arange(paths) if 0.0 < x0 < 1.0 else np.arange(0)
    next_obs = 0
    n_steps = int(obs_idx[-1])
    for s in range(n_steps + 1):
        while next_obs < obs_idx.size and obs_idx[next_obs] == s:
            out[:, next_obs] = x
            next_obs += 1
        if s == n_steps or active.size == 0:
            if next_obs < obs_idx.size:
                out[:, next_obs:] = x[:, None]
                next_obs = obs_idx.size
            break
        xs = x[active]
        diffusion.step(xs, rng)
        if lam > 0.0:
            counts = rng.poisson(lam, xs.size)
            _apply_jumps(xs, counts, sampler, rng)
        x[active] = xs
        keep = (xs > 0.0) & (xs < 1.0)
        if not keep.all():
            active = active[keep]
    return out


def simulate_wf(rate: float, x0: float, obs_times,
                rng: np.random.Generator, paths: int,
                dt: float = 1e-4) -> NDArray[np.float64]:
    """Euler paths of the Wright-Fisher diffusion with resampling ``rate``.

    Returns an array of shape (paths, len(obs_times)); observation times are
    rounded to the step grid.
    """
    if not (rate > 0.0 and math.isfinite(rate)):
        raise ParameterError(f"rate must be positive, got {rate}")
    return _run_hybrid(rate, 0.0, None, x0, obs_times, rng, paths, dt)


def simulate_lfv(measure: LambdaMeasure, x0: float, obs_times,
                 rng: np.random.Generator, paths: int, eps: float = 1e-3,
                 dt: float = 1e-4) -> NDArray[np.float64]:
    """Hybrid diffusion-plus-jumps paths of the Lambda-Fleming-Viot process.

    Returns an array of shape (paths, len(obs_times)). For a point mass at
    zero this reduces to ``simulate_wf`` exactly (same draws, same paths).
    """
    sigma2 = small_jump_variance(measure, eps)
    rate = jump_rate(measure, eps)
    sampler = JumpSizeSampler(measure, eps) if rate > 0.0 else None
    return _run_hybrid(sigma2, rate, sampler, x0, obs_times, rng, paths, dt)


def simulate_lfv_pair(measure: LambdaMeasure, x0: float, obs_times,
                      rng: np.random.Generator, paths: int,
                      eps: float = 1e-3, dt: float = 1e-4,
                      ) -> tuple[NDArray[np.float64], NDArray[np.float64]]:
    """Positively coupled path pairs at cutoffs ``eps`` and ``eps / 2``.

    The cutoff-sensitivity of the hybrid scheme is far smaller than the
    Monte Carlo noise of two independent runs, so comparing independent
    estimates measures nothing. This runner couples the two resolutions by
    Poisson thinning: jumps of size >= eps arrive once and are applied to
    both lanes with shared sizes and shared parent-selection uniforms, while
    the eps/2 lane additionally receives the band [eps/2, eps) as explicit
    jumps instead of diffusion variance. The lanes also share one standard
    normal per path and step for their interior diffusion moves, so the
    diffusion difference scales with sigma(eps) - sigma(eps/2) rather than
    with either sigma. Each lane's marginal law is exactly the
    corresponding single-resolution scheme (the half lane applies a step's
    shared jumps before its band jumps, a reordering within the step's time
    resolution), and shared large jumps both carry most of the variance and
    contract the lane difference by 1 - u at each event, so the pair stays
    tightly correlated.

    Returns two arrays of shape (paths, len(obs_times)): the eps lane and
    the eps/2 lane.
    """
    if isinstance(measure, PointMassAtZero):
        raise UnsupportedOperationError(
            "the cutoff does not enter the Kingman case; nothing to compare")
    _check_run_args(x0, paths, dt)
    obs_idx = _obs_grid(obs_times, dt)
    half = eps / 2.0
    lam_shared = jump_rate(measure, eps) * dt
    lam_band = (jump_rate(measure, half) - jump_rate(measure, eps)) * dt
    shared_sampler = JumpSizeSampler(measure, eps)
    band_sampler = JumpSizeSampler(measure, half, hi=eps)
    rng_shared, rng_a, rng_b = rng.spawn(3)
    diff_a = _Diffusion(small_jump_variance(measure, eps), dt)
    diff_b = _Diffusion(small_jump_variance(measure, half), dt)
    out_a = np.empty((paths, obs_idx.size))
    out_b = np.empty((paths, obs_idx.size))
    xa = np.full(paths, float(x0))
    xb = np.full(paths, float(x0))
    # paths absorbed in both lanes stay put; shared draws are sized to the
    # union so per-path alignment between the lanes is preserved
    active = np.arange(paths) if 0.0 < x0 < 1.0 else np.arange(0)
    next_obs = 0
    n_steps = int(obs_idx[-1])
    for s in range(n_steps + 1):
        while next_obs < obs_idx.size and obs_idx[next_obs] == s:
            out_a[:, next_obs] = xa
            out_b[:, next_obs] = xb
            next_obs += 1
        if s == n_steps or active.size == 0:
            if next_obs < obs_idx.size:
                out_a[:, next_obs:] = xa[:, None]
                out_b[:, next_obs:] = xb[:, None]
                next_obs = obs_idx.size
            break
        sa = xa[active]
        sb = xb[active]
        noise = rng_shared.standard_normal(active.size)
        diff_a.step(sa, rng_a, noise=noise)
        diff_b.step(sb, rng_b, noise=noise)
        counts = rng_shared.poisson(lam_shared, active.size)
        idx = np.flatnonzero(counts)
        while idx.size:
            sizes = shared_sampler.draw(rng_shared, idx.size)
            u = rng_shared.random(idx.size)
            pa = (u < sa[idx]).astype(np.float64)
            pb = (u < sb[idx]).astype(np.float64)
            sa[idx] = (1.0 - sizes) * sa[idx] + sizes * pa
            sb[idx] = (1.0 - sizes) * sb[idx] + sizes * pb
            counts[idx] -= 1
            idx = idx[counts[idx] > 0]
        counts = rng_b.poisson(lam_band, active.size)
        _apply_jumps(sb, counts, band_sampler, rng_b)
        xa[active] = sa
        xb[active] = sb
        keep = ((sa > 0.0) & (sa < 1.0)) | ((sb > 0.0) & (sb < 1.0))
        if not keep.all():
            active = active[keep]
    return out_a, out_b
