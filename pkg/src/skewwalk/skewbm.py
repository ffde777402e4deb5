"""
Skew Brownian motion: transition density and CDF, scale function,
interval exit probabilities and an exact grid sampler.

The transition density of W_gamma is

    p_t(x, y) = phi_t(x - y) + gamma * sign(y) * phi_t(|x| + |y|)

with phi_t the N(0, t) density.  gamma = 0 is standard Brownian motion,
gamma = 1 (resp. -1) is Brownian motion reflected upward (resp. downward)
at the origin.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from scipy.special import erfc

_SQRT2 = np.sqrt(2.0)
_SQRT2PI = np.sqrt(2.0 * np.pi)

BRACKET_WIDTH = 12.0
BISECTION_TOL = 1e-12
_MAX_BISECTIONS = 200


@dataclass(frozen=True)
class SkewBmParams:
    """Skewness parameter with the derived excursion-sign probabilities.

    ``p`` is the probability that an excursion away from zero is positive,
    ``q = 1 - p``.
    """

    gamma: float

    def __post_init__(self):
        if not -1.0 <= self.gamma <= 1.0:
            raise ValueError(f"gamma must lie in [-1, 1], got {self.gamma!r}")

    @property
    def p(self):
        return (1 + self.gamma) / 2

    @property
    def q(self):
        return (1 - self.gamma) / 2

    @classmethod
    def from_p(cls, p):
        return cls(2 * p - 1)


def _check_time(t):
    t = np.asarray(t, dtype=float)
    if np.any(~(t > 0)):
        raise ValueError("time must be strictly positive")
    return t


def norm_cdf(z):
    """Standard normal CDF through the complementary error function."""
    return 0.5 * erfc(-np.asarray(z, dtype=float) / _SQRT2)


def gaussian_kernel(t, x):
    """Density of N(0, t) evaluated at ``x``."""
    t = _check_time(t)
    x = np.asarray(x, dtype=float)
    return np.exp(-x * x / (2.0 * t)) / (_SQRT2PI * np.sqrt(t))


def skew_density(params: SkewBmParams, t, x, y):
    """Transition density p_t(x, y); sign(0) is taken as 0."""
    t = _check_time(t)
    x = np.asarray(x, dtype=float)
    y = np.asarray(y, dtype=float)
    out = gaussian_kernel(t, x - y) + params.gamma * np.sign(y) * gaussian_kernel(
        t, np.abs(x) + np.abs(y)
    )
    return out if out.ndim else float(out)


def skew_cdf(params: SkewBmParams, t, x, y):
    """P(W_gamma(t) <= y | W_gamma(0) = x).

    Integrating the density piecewise gives, with s = sqrt(t),

        y <= 0:  Phi((y - x)/s) - gamma * Phi((y - |x|)/s)
        y  > 0:  Phi((y - x)/s) - gamma * Phi(-|x|/s)
                 + gamma * (Phi((|x| + y)/s) - Phi(|x|/s))
    """
    t = _check_time(t)
    x = np.asarray(x, dtype=float)
    y = np.asarray(y, dtype=float)
    s = np.sqrt(t)
    ax = np.abs(x)
    g = params.gamma
    base = norm_cdf((y - x) / s)
    neg = base - g * norm_cdf((y - ax) / s)
    pos = base - g * norm_cdf(-ax / s) + g * (norm_cdf((ax + y) / s) - norm_cdf(ax / s))
    out = np.clip(np.where(y <= 0, neg, pos), 0.0, 1.0)
    return out if out.ndim else float(out)


def skew_mean(params: SkewBmParams, t, x):
    """E[W_gamma(t) | W_gamma(0) = x]."""
    t = _check_time(t)
    x = np.asarray(x, dtype=float)
    s = np.sqrt(t)
    a = np.abs(x) / s
    tail = s * np.exp(-0.5 * a * a) / _SQRT2PI - np.abs(x) * norm_cdf(-a)
    out = x + 2.0 * params.gamma * tail
    return out if out.ndim else float(out)


def scale_function(params: SkewBmParams, x):
    """psi(x) = x/p for x >= 0 and x/q for x < 0.

    Scalars are evaluated in plain Python arithmetic, so ``Fraction`` inputs
    stay exact.
    """
    if np.ndim(x) == 0 and not isinstance(x, np.ndarray):
        if x >= 0:
            if x > 0 and params.p == 0:
                raise ValueError("scale function undefined on x > 0 when gamma = -1")
            return x / params.p if x else 0 * x
        if params.q == 0:
            raise ValueError("scale function undefined on x < 0 when gamma = 1")
        return x / params.q
    x = np.asarray(x, dtype=float)
    if np.any(x > 0) and params.p == 0:
        raise ValueError("scale function undefined on x > 0 when gamma = -1")
    if np.any(x < 0) and params.q == 0:
        raise ValueError("scale function undefined on x < 0 when gamma = 1")
    slope_pos = 1.0 / params.p if params.p else 0.0
    slope_neg = 1.0 / params.q if params.q else 0.0
    return np.where(x >= 0, x * slope_pos, x * slope_neg)


def exit_probability_up(params: SkewBmParams, a, a1):
    """Probability of leaving [-a, a] through +a when started from a1."""
    if not a > 0:
        raise ValueError("interval half-width must be positive")
    if abs(a1) > a:
        raise ValueError("start point must lie in [-a, a]")
    lo = scale_function(params, -a)
    return (scale_function(params, a1) - lo) / (scale_function(params, a) - lo)


def exit_probability_down(params: SkewBmParams, a, a1):
    """Probability of leaving [-a, a] through -a when started from a1."""
    if not a > 0:
        raise ValueError("interval half-width must be positive")
    if abs(a1) > a:
        raise ValueError("start point must lie in [-a, a]")
    hi = scale_function(params, a)
    return (hi - scale_function(params, a1)) / (hi - scale_function(params, -a))


def inverse_cdf(params: SkewBmParams, t, x, u):
    """Solve skew_cdf(t, x, y) = u for y by vectorised bisection.

    The bracket is the conditional mean +/- 12 sqrt(t); iteration stops once
    every residual is within BISECTION_TOL in probability.  Returns the upper
    end of the final bracket so that the result never sits in a region of
    zero mass.
    """
    x = np.asarray(x, dtype=float)
    u = np.asarray(u, dtype=float)
    x, u = np.broadcast_arrays(x, u)
    half = BRACKET_WIDTH * np.sqrt(t)
    centre = skew_mean(params, t, x)
    lo = np.array(centre - half, dtype=float)
    hi = np.array(centre + half, dtype=float)
    for _ in range(_MAX_BISECTIONS):
        mid = 0.5 * (lo + hi)
        f = skew_cdf(params, t, x, mid)
        below = f < u
        lo = np.where(below, mid, lo)
        hi = np.where(below, hi, mid)
        if np.all(np.abs(f - u) <= BISECTION_TOL) or np.all(hi - lo <= 4 * np.spacing(np.abs(hi) + 1.0)):
            break
    return hi


def sample_skew_path(params: SkewBmParams, seed, grid, x0=0.0, size=None):
    """Sample W_gamma on a time grid by sequential inverse-CDF draws.

    Parameters
    ----------
    params : SkewBmParams
    seed : int or numpy.random.Generator
    grid : array_like
        Strictly increasing times with ``grid[0] == 0``.
    x0 : float
        Starting point.
    size : int, optional
        Number of independent paths.  ``None`` returns one path.

    Returns
    -------
    ndarray of shape ``(len(grid),)`` or ``(size, len(grid))``.
    """
    grid = np.asarray(grid, dtype=float)
    if grid.ndim != 1 or grid.size == 0:
        raise ValueError("time grid must be a non-empty 1-d sequence")
    if grid[0] != 0:
        raise ValueError("time grid must start at 0")
    if np.any(np.diff(grid) <= 0):
        raise ValueError("time grid must be strictly increasing")
    rng = seed if isinstance(seed, np.random.Generator) else np.random.default_rng(seed)
    n_paths = 1 if size is None else int(size)
    out = np.empty((n_paths, grid.size))
    out[:, 0] = x0
    for k, dt in enumerate(np.diff(grid), start=1):
        u = rng.random(n_paths)
        out[:, k] = inverse_cdf(params, dt, out[:, k - 1], u)
    return out[0] if size is None else out
